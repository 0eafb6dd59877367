//! Lasso traces and finite teams.
//!
//! A lasso denotes the infinite trace `stem · cycle^ω`. Teams are finite
//! sets of lassos together with a time index; all exact evaluation in this
//! crate reduces to the periodicity of team suffixes computed by [`horizon`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// A letter is the set of propositions holding at one time step.
pub type Letter = BTreeSet<String>;

/// Ultimately periodic trace `stem · cycle^ω`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LassoTrace {
    pub stem: Vec<Letter>,
    #[serde(rename = "loop")]
    pub cycle: Vec<Letter>,
}

pub fn letter(props: &[&str]) -> Letter {
    props.iter().map(|p| p.to_string()).collect()
}

impl LassoTrace {
    /// Panics if `cycle` is empty; use [`LassoTrace::try_new`] for fallible input.
    pub fn new(stem: Vec<Letter>, cycle: Vec<Letter>) -> LassoTrace {
        LassoTrace::try_new(stem, cycle).expect("lasso cycle must be non-empty")
    }

    pub fn try_new(stem: Vec<Letter>, cycle: Vec<Letter>) -> Option<LassoTrace> {
        if cycle.is_empty() {
            None
        } else {
            Some(LassoTrace { stem, cycle })
        }
    }

    /// The letter at position `i` of the denoted infinite trace.
    pub fn letter_at(&self, i: usize) -> &Letter {
        if i < self.stem.len() {
            &self.stem[i]
        } else {
            &self.cycle[(i - self.stem.len()) % self.cycle.len()]
        }
    }

    /// Shortest stem, primitive cycle. Two lassos denote the same infinite
    /// trace exactly when their canonical forms are equal.
    pub fn canonicalize(&self) -> LassoTrace {
        let mut cycle = primitive_root(&self.cycle).to_vec();
        let mut stem = self.stem.clone();
        while let Some(last) = stem.last() {
            if last == cycle.last().unwrap() {
                stem.pop();
                cycle.rotate_right(1);
            } else {
                break;
            }
        }
        LassoTrace { stem, cycle }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonicalize()
    }

    /// Letterwise intersection with `keep`, re-canonicalized.
    pub fn project(&self, keep: &BTreeSet<String>) -> LassoTrace {
        let restrict =
            |l: &Letter| -> Letter { l.intersection(keep).cloned().collect() };
        LassoTrace {
            stem: self.stem.iter().map(restrict).collect(),
            cycle: self.cycle.iter().map(restrict).collect(),
        }
        .canonicalize()
    }

    /// All proposition names occurring on the trace.
    pub fn props(&self) -> BTreeSet<String> {
        self.stem
            .iter()
            .chain(self.cycle.iter())
            .flat_map(|l| l.iter().cloned())
            .collect()
    }
}

fn primitive_root(cycle: &[Letter]) -> &[Letter] {
    let n = cycle.len();
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        let root = &cycle[..d];
        if cycle.chunks(d).all(|c| c == root) {
            return root;
        }
    }
    cycle
}

/// Finite team of canonical lasso traces plus a time index.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Team {
    traces: Vec<LassoTrace>,
    pub index: usize,
}

impl Team {
    /// Canonicalizes, deduplicates and sorts the given traces.
    pub fn new(traces: Vec<LassoTrace>, index: usize) -> Team {
        let set: BTreeSet<LassoTrace> =
            traces.iter().map(LassoTrace::canonicalize).collect();
        Team {
            traces: set.into_iter().collect(),
            index,
        }
    }

    pub fn traces(&self) -> &[LassoTrace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }
}

/// Periodicity data of a team suffix: for every `k >= stem_len`,
/// the suffix set `T[k,∞]` equals `T[k + period,∞]` trace-wise.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Horizon {
    /// Max stem length over the team (`S`).
    pub stem_len: usize,
    /// Lcm of cycle lengths (`P`).
    pub period: usize,
    /// `max(from, S) + P`; until/weak-until witnesses beyond this bound are redundant.
    pub bound: usize,
}

/// Returns `None` on the empty team (callers special-case `∅`).
pub fn horizon(traces: &[LassoTrace], from: usize) -> Option<Horizon> {
    if traces.is_empty() {
        return None;
    }
    let stem_len = traces.iter().map(|t| t.stem.len()).max().unwrap();
    let period = traces.iter().map(|t| t.cycle.len()).fold(1, lcm);
    Some(Horizon {
        stem_len,
        period,
        bound: stem_len.max(from) + period,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// On-disk team format: letters are arrays of proposition names drawn from `ap`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TeamFile {
    pub ap: Vec<String>,
    #[serde(default)]
    pub index: usize,
    pub traces: Vec<LassoTrace>,
}

#[derive(thiserror::Error, Debug)]
pub enum TeamFileError {
    #[error("malformed team file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trace {trace}: unknown proposition {prop:?} (not in \"ap\")")]
    UnknownProp { trace: usize, prop: String },
    #[error("trace {0}: empty loop")]
    EmptyLoop(usize),
}

impl TeamFile {
    pub fn parse(text: &str) -> Result<TeamFile, TeamFileError> {
        let file: TeamFile = serde_json::from_str(text)?;
        let ap: BTreeSet<&String> = file.ap.iter().collect();
        for (i, t) in file.traces.iter().enumerate() {
            if t.cycle.is_empty() {
                return Err(TeamFileError::EmptyLoop(i));
            }
            for l in t.stem.iter().chain(t.cycle.iter()) {
                if let Some(p) = l.iter().find(|p| !ap.contains(p)) {
                    return Err(TeamFileError::UnknownProp {
                        trace: i,
                        prop: p.clone(),
                    });
                }
            }
        }
        Ok(file)
    }

    pub fn into_team(self) -> Team {
        Team::new(self.traces, self.index)
    }

    pub fn from_team(team: &Team, ap: Vec<String>) -> TeamFile {
        TeamFile {
            ap,
            index: team.index,
            traces: team.traces().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(stem: &[&[&str]], cycle: &[&[&str]]) -> LassoTrace {
        LassoTrace::new(
            stem.iter().map(|l| letter(l)).collect(),
            cycle.iter().map(|l| letter(l)).collect(),
        )
    }

    #[test]
    fn letter_at_stem_then_loop() {
        let t = tr(&[&["p"]], &[&[]]);
        assert_eq!(*t.letter_at(0), letter(&["p"]));
        let t = tr(&[], &[&["a"], &["b"]]);
        assert_eq!(*t.letter_at(5), letter(&["b"]));
        let t = tr(&[&[], &[]], &[&["p"]]);
        assert_eq!(*t.letter_at(7), letter(&["p"]));
    }

    #[test]
    fn canonical_absorbs_stem_into_loop() {
        let t = tr(&[&["p"]], &[&["p"]]);
        assert_eq!(t.canonicalize(), tr(&[], &[&["p"]]));
    }

    #[test]
    fn canonical_primitive_loop() {
        let t = tr(&[], &[&["a"], &["a"]]);
        assert_eq!(t.canonicalize(), tr(&[], &[&["a"]]));
    }

    #[test]
    fn canonical_rotates_through_stem() {
        // {a}({b}{a})^ω = ({a}{b})^ω
        let t = tr(&[&["a"]], &[&["b"], &["a"]]);
        let c = t.canonicalize();
        assert_eq!(c, tr(&[], &[&["a"], &["b"]]));
        for i in 0..8 {
            assert_eq!(t.letter_at(i), c.letter_at(i));
        }
    }

    #[test]
    fn letter_at_respects_canonicalization() {
        let cases = [
            tr(&[&["p"], &[]], &[&["p"], &["p"]]),
            tr(&[&["a"], &["b"], &["a"]], &[&["b"], &["a"]]),
            tr(&[], &[&["a"], &["b"], &["a"], &["b"]]),
        ];
        for t in cases {
            let c = t.canonicalize();
            for i in 0..t.stem.len() + 3 * t.cycle.len() {
                assert_eq!(t.letter_at(i), c.letter_at(i), "at {i}");
            }
        }
    }

    #[test]
    fn horizon_examples() {
        let one = tr(&[], &[&[]]);
        let h = horizon(&[one], 0).unwrap();
        assert_eq!((h.stem_len, h.period, h.bound), (0, 1, 1));

        let a = tr(&[&["a"]], &[&["a"], &[]]);
        let b = tr(&[], &[&["b"], &[], &[]]);
        let h = horizon(&[a.clone(), b.clone()], 0).unwrap();
        assert_eq!((h.stem_len, h.period, h.bound), (1, 6, 7));
        let h = horizon(&[a, b], 10).unwrap();
        assert_eq!((h.stem_len, h.period, h.bound), (1, 6, 16));

        assert!(horizon(&[], 0).is_none());
    }

    #[test]
    fn project_examples() {
        let t = tr(&[], &[&["p", "q"]]);
        assert_eq!(t.project(&letter(&["p"])), tr(&[], &[&["p"]]));
        assert_eq!(t.project(&letter(&[])), tr(&[], &[&[]]));
        // stem [{p},{q}], loop [{p,q}] onto {q}
        let t = tr(&[&["p"], &["q"]], &[&["p", "q"]]);
        let p = t.project(&letter(&["q"]));
        assert_eq!(p, tr(&[&[]], &[&["q"]]));
        for i in 0..6 {
            let expect: Letter = t.letter_at(i).intersection(&letter(&["q"])).cloned().collect();
            assert_eq!(*p.letter_at(i), expect);
        }
    }

    #[test]
    fn team_dedupes_denotationally_equal_lassos() {
        let t1 = tr(&[&["a"]], &[&["b"], &["a"]]);
        let t2 = tr(&[], &[&["a"], &["b"]]);
        let team = Team::new(vec![t1, t2], 0);
        assert_eq!(team.len(), 1);
    }

    #[test]
    fn team_file_rejects_unknown_prop() {
        let text = r#"{"ap":["a"],"index":0,"traces":[{"stem":[["a"],[]],"loop":[["b"]]}]}"#;
        assert!(matches!(
            TeamFile::parse(text),
            Err(TeamFileError::UnknownProp { .. })
        ));
        let ok = r#"{"ap":["a","b"],"index":0,"traces":[{"stem":[["a"],[]],"loop":[["a","b"]]}]}"#;
        assert_eq!(TeamFile::parse(ok).unwrap().into_team().len(), 1);
    }
}
