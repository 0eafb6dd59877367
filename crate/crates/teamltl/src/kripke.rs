//! Kripke structures, bounded trace generation, and the decidable
//! model-checking pipelines built on self-composition.
//!
//! * [`check_forall_k`] strips the prefix off a `∀^k` translation, negates
//!   the body, and checks emptiness of the tableau automaton against the
//!   k-fold self-composition — exact, no bounds.
//! * [`check_exists_forall`] searches existential uniform-sequence and trace
//!   witnesses up to bounds; each fixed witness is checked exactly via a
//!   product with the negated body. `Holds` is always exact; a failure is
//!   `ExactFail` only when the witness space itself was provably exhausted
//!   (a single exactly-one-level variable whose reachable-set trajectory
//!   closed a cycle), otherwise `FailsUpTo`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::buchi::{find_accepting_lasso, ltl_to_buchi, BuchiAutomaton};
use crate::formula::{LtlFormula, TeamFormula};
use crate::hyper::{
    bnegate, Body, HyperBody, HyperFormula, QuantKind, QuantTag, UniformSeq,
};
use crate::team_eval;
use crate::traces::{LassoTrace, Letter};
use crate::translate::{kcoherent_body, leftflat_translate, TranslateError};

#[derive(Clone, Debug)]
pub struct KState {
    pub label: Letter,
    pub succ: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct KripkeStructure {
    pub ap: Vec<String>,
    pub states: Vec<KState>,
    pub init: usize,
}

#[derive(thiserror::Error, Debug)]
pub enum KripkeError {
    #[error("malformed kripke file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("state {0} has no successor (paths must be infinite)")]
    NoSuccessor(usize),
    #[error("unknown state id {0}")]
    UnknownState(usize),
    #[error("duplicate state id {0}")]
    DuplicateState(usize),
    #[error("state {state}: label {prop:?} not in \"ap\"")]
    UnknownProp { state: usize, prop: String },
}

#[derive(Serialize, Deserialize)]
struct KripkeFileState {
    id: usize,
    label: Vec<String>,
}

/// On-disk format: `{"ap":[...], "states":[{"id":0,"label":["a"]}],
/// "init":0, "edges":[[0,1],...]}`.
#[derive(Serialize, Deserialize)]
struct KripkeFile {
    ap: Vec<String>,
    states: Vec<KripkeFileState>,
    init: usize,
    edges: Vec<(usize, usize)>,
}

impl KripkeStructure {
    pub fn new(
        ap: Vec<String>,
        labels: Vec<Letter>,
        edges: &[(usize, usize)],
        init: usize,
    ) -> Result<KripkeStructure, KripkeError> {
        let n = labels.len();
        let mut states: Vec<KState> = labels
            .into_iter()
            .map(|label| KState {
                label,
                succ: Vec::new(),
            })
            .collect();
        for &(u, v) in edges {
            if u >= n {
                return Err(KripkeError::UnknownState(u));
            }
            if v >= n {
                return Err(KripkeError::UnknownState(v));
            }
            states[u].succ.push(v);
        }
        if init >= n {
            return Err(KripkeError::UnknownState(init));
        }
        for (i, s) in states.iter_mut().enumerate() {
            s.succ.sort_unstable();
            s.succ.dedup();
            if s.succ.is_empty() {
                return Err(KripkeError::NoSuccessor(i));
            }
        }
        Ok(KripkeStructure { ap, states, init })
    }

    pub fn parse(text: &str) -> Result<KripkeStructure, KripkeError> {
        let file: KripkeFile = serde_json::from_str(text)?;
        let mut ids = BTreeMap::new();
        for (i, s) in file.states.iter().enumerate() {
            if ids.insert(s.id, i).is_some() {
                return Err(KripkeError::DuplicateState(s.id));
            }
        }
        let ap: BTreeSet<&String> = file.ap.iter().collect();
        let mut labels = Vec::new();
        for s in &file.states {
            if let Some(p) = s.label.iter().find(|p| !ap.contains(p)) {
                return Err(KripkeError::UnknownProp {
                    state: s.id,
                    prop: p.clone(),
                });
            }
            labels.push(s.label.iter().cloned().collect());
        }
        let map = |id: usize| ids.get(&id).copied().ok_or(KripkeError::UnknownState(id));
        let edges: Vec<(usize, usize)> = file
            .edges
            .iter()
            .map(|&(u, v)| Ok((map(u)?, map(v)?)))
            .collect::<Result<_, KripkeError>>()?;
        KripkeStructure::new(file.ap, labels, &edges, map(file.init)?)
    }

    pub fn to_json(&self) -> String {
        let file = KripkeFile {
            ap: self.ap.clone(),
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, s)| KripkeFileState {
                    id,
                    label: s.label.iter().cloned().collect(),
                })
                .collect(),
            init: self.init,
            edges: self
                .states
                .iter()
                .enumerate()
                .flat_map(|(u, s)| s.succ.iter().map(move |&v| (u, v)))
                .collect(),
        };
        serde_json::to_string_pretty(&file).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Bounded trace enumeration
// ---------------------------------------------------------------------------

/// All canonical traces `t(u · v^ω)` for state paths with `|u| ≤ stem_max`
/// and cycles `1 ≤ |v| ≤ loop_max` starting at the stem's end.
pub fn traces_enumerate(
    k: &KripkeStructure,
    stem_max: usize,
    loop_max: usize,
) -> Vec<LassoTrace> {
    let mut out: BTreeSet<LassoTrace> = BTreeSet::new();
    let mut stems: Vec<Vec<usize>> = vec![vec![k.init]];
    for _ in 0..stem_max {
        let mut next = Vec::new();
        for stem in &stems {
            let last = *stem.last().unwrap();
            for &s in &k.states[last].succ {
                let mut stem = stem.clone();
                stem.push(s);
                next.push(stem);
            }
        }
        stems.extend(next.clone());
        stems = stems.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let _ = next;
    }
    // stems holds all paths from init of length ≤ stem_max + 1; the final
    // state of each is the cycle anchor
    for stem in &stems {
        if stem.len() > stem_max + 1 {
            continue;
        }
        let anchor = *stem.last().unwrap();
        let mut cycles: Vec<Vec<usize>> = vec![vec![anchor]];
        for _ in 0..loop_max {
            let mut grown = Vec::new();
            for c in &cycles {
                let last = *c.last().unwrap();
                for &s in &k.states[last].succ {
                    if c.len() <= loop_max {
                        let mut c = c.clone();
                        c.push(s);
                        grown.push(c);
                    }
                }
            }
            for c in &grown {
                if *c.last().unwrap() == anchor && c.len() >= 2 {
                    let cycle_states = &c[0..c.len() - 1];
                    let stem_letters: Vec<Letter> = stem[..stem.len() - 1]
                        .iter()
                        .map(|&s| k.states[s].label.clone())
                        .collect();
                    let cycle_letters: Vec<Letter> = cycle_states
                        .iter()
                        .map(|&s| k.states[s].label.clone())
                        .collect();
                    out.insert(
                        LassoTrace::new(stem_letters, cycle_letters).canonicalize(),
                    );
                }
            }
            cycles = grown;
        }
    }
    out.into_iter().collect()
}

// ---------------------------------------------------------------------------
// ∀^k pipeline
// ---------------------------------------------------------------------------

pub struct ForallKResult {
    pub holds: bool,
    /// On failure, the violating k-tuple of traces.
    pub counterexample: Option<Vec<LassoTrace>>,
}

pub(crate) fn body_to_ltl(b: &Body) -> LtlFormula {
    match &**b {
        HyperBody::True => LtlFormula::True,
        HyperBody::False => LtlFormula::False,
        HyperBody::Lit { prop, var, positive } => {
            let name = format!("{prop}@{var}");
            if *positive {
                LtlFormula::Prop(name)
            } else {
                LtlFormula::NegProp(name)
            }
        }
        HyperBody::And(l, r) => LtlFormula::and(body_to_ltl(l), body_to_ltl(r)),
        HyperBody::Or(l, r) => LtlFormula::or(body_to_ltl(l), body_to_ltl(r)),
        HyperBody::Next(x) => LtlFormula::next(body_to_ltl(x)),
        HyperBody::Until(l, r) => LtlFormula::until(body_to_ltl(l), body_to_ltl(r)),
        HyperBody::WeakUntil(l, r) => {
            LtlFormula::weak_until(body_to_ltl(l), body_to_ltl(r))
        }
    }
}

/// Per-state letter masks of the automaton alphabet for one trace-variable
/// component: `aps` entries of the form `p@var` read `p` from that state.
fn component_masks(aut: &BuchiAutomaton, k: &KripkeStructure, var: &str) -> Vec<u64> {
    let suffix = format!("@{var}");
    k.states
        .iter()
        .map(|s| {
            let mut m = 0u64;
            for (i, ap) in aut.aps.iter().enumerate() {
                if let Some(p) = ap.strip_suffix(&suffix) {
                    if s.label.contains(p) {
                        m |= 1 << i;
                    }
                }
            }
            m
        })
        .collect()
}

/// Model checking of the k-coherent route: builds `φ^Φ`, negates it, and
/// decides language emptiness of the negation against `K^k`.
pub fn check_forall_k(
    k: &KripkeStructure,
    f: &TeamFormula,
    arity: usize,
) -> Result<ForallKResult, TranslateError> {
    if arity == 0 {
        return Err(TranslateError::ZeroK);
    }
    if !crate::formula::fragment_flags(f).k_coherent_eligible {
        return Err(TranslateError::FragmentMismatch {
            expected: "k-coherent-eligible",
        });
    }
    let vars: Vec<String> = (1..=arity).map(|j| format!("pi{j}")).collect();
    let body = kcoherent_body(f, &vars);
    let negated = bnegate(&body);
    let aut = ltl_to_buchi(&body_to_ltl(&negated));
    let masks: Vec<Vec<u64>> = vars.iter().map(|v| component_masks(&aut, k, v)).collect();

    type PState = (usize, Vec<usize>);
    let inits: Vec<PState> = aut
        .initial
        .iter()
        .map(|&q| (q, vec![k.init; arity]))
        .collect();
    let succs = |s: &PState| -> Vec<PState> {
        let (q, ks) = s;
        let letter: u64 = ks
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &st)| acc | masks[j][st]);
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for &st in ks.iter() {
            let mut next = Vec::new();
            for t in &tuples {
                for &s2 in &k.states[st].succ {
                    let mut t = t.clone();
                    t.push(s2);
                    next.push(t);
                }
            }
            tuples = next;
        }
        let mut out = Vec::new();
        for (cond, q2) in &aut.arcs[*q] {
            if cond.matches(letter) {
                for t in &tuples {
                    out.push((*q2, t.clone()));
                }
            }
        }
        out
    };
    match find_accepting_lasso(inits, succs, |&(q, _)| aut.accepting[q]) {
        None => Ok(ForallKResult {
            holds: true,
            counterexample: None,
        }),
        Some((prefix, cycle)) => {
            let traces = (0..arity)
                .map(|j| {
                    let stem: Vec<Letter> = prefix
                        .iter()
                        .map(|(_, ks)| k.states[ks[j]].label.clone())
                        .collect();
                    let cyc: Vec<Letter> = cycle
                        .iter()
                        .map(|(_, ks)| k.states[ks[j]].label.clone())
                        .collect();
                    LassoTrace::new(stem, cyc).canonicalize()
                })
                .collect();
            Ok(ForallKResult {
                holds: false,
                counterexample: Some(traces),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// ∃̈* ∃π* ∀π* pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct McBounds {
    /// Stem length for existential witness lassos (sequences and traces).
    pub witness_stem: usize,
    /// Loop length for existential witness lassos.
    pub witness_loop: usize,
    /// Cap on distinct reachable-set vectors before the level trajectory
    /// search gives up.
    pub state_cap: usize,
}

impl Default for McBounds {
    fn default() -> McBounds {
        McBounds {
            witness_stem: 4,
            witness_loop: 2,
            state_cap: 1 << 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExistsForallVerdict {
    Holds {
        uniform_witness: Vec<(String, UniformSeq)>,
        trace_witness: Vec<(String, LassoTrace)>,
    },
    ExactFail,
    FailsUpTo {
        witness_stem: usize,
        witness_loop: usize,
    },
}

#[derive(thiserror::Error, Debug)]
pub enum McError {
    #[error("prefix is not of the shape uniform-∃* trace-∃* trace-∀+: {0}")]
    BadPrefix(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

/// The two-state gadget generating all sequences over one quantified
/// proposition, composed synchronously over the variable set: states are the
/// subsets of `vars`, fully interconnected, labeled by their subset.
pub fn gadget_structure(vars: &[String]) -> KripkeStructure {
    let n = 1usize << vars.len();
    let labels: Vec<Letter> = (0..n)
        .map(|m| {
            vars.iter()
                .enumerate()
                .filter(|(j, _)| m >> j & 1 == 1)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
    // every subset state can start a sequence; the structure is symmetric,
    // so any fixed initial works as long as enumeration also varies stems
    KripkeStructure::new(vars.to_vec(), labels, &edges, 0).unwrap()
}

struct PrefixShape {
    uniform: Vec<(String, QuantTag)>,
    exists_traces: Vec<String>,
    forall_traces: Vec<String>,
}

fn parse_prefix(f: &HyperFormula) -> Result<PrefixShape, McError> {
    let mut shape = PrefixShape {
        uniform: Vec::new(),
        exists_traces: Vec::new(),
        forall_traces: Vec::new(),
    };
    for q in &f.prefix {
        match q.kind {
            QuantKind::UPropExists => {
                if !shape.exists_traces.is_empty() || !shape.forall_traces.is_empty() {
                    return Err(McError::BadPrefix(format!(
                        "uniform quantifier {} after trace quantifiers",
                        q.var
                    )));
                }
                shape.uniform.push((q.var.clone(), q.tag));
            }
            QuantKind::TraceExists => {
                if !shape.forall_traces.is_empty() {
                    return Err(McError::BadPrefix(format!(
                        "existential trace {} after universal",
                        q.var
                    )));
                }
                shape.exists_traces.push(q.var.clone());
            }
            QuantKind::TraceForall => shape.forall_traces.push(q.var.clone()),
            other => {
                return Err(McError::BadPrefix(format!(
                    "unsupported quantifier {other:?} {}",
                    q.var
                )))
            }
        }
    }
    if shape.forall_traces.is_empty() {
        return Err(McError::BadPrefix("no universal trace quantifier".into()));
    }
    Ok(shape)
}

/// Joint clock over the fixed uniform sequences and existential witness
/// traces: position-indexed letters over `u!var` / `e!prop@var` names.
struct Clock {
    stem: usize,
    cycle: usize,
    letters: Vec<BTreeSet<String>>,
}

fn build_clock(
    uniform: &[(String, UniformSeq)],
    traces: &[(String, LassoTrace)],
) -> Clock {
    let mut stem = 1usize;
    let mut cycle = 1usize;
    for (_, s) in uniform {
        stem = stem.max(s.stem.len());
        cycle = crate::traces::lcm(cycle, s.cycle.len().max(1));
    }
    for (_, t) in traces {
        stem = stem.max(t.stem.len());
        cycle = crate::traces::lcm(cycle, t.cycle.len());
    }
    let letters = (0..stem + cycle)
        .map(|p| {
            let mut l = BTreeSet::new();
            for (v, s) in uniform {
                if s.at(p) {
                    l.insert(format!("u!{v}@clk"));
                }
            }
            for (v, t) in traces {
                for prop in t.letter_at(p) {
                    l.insert(format!("e!{prop}@{v}"));
                }
            }
            l
        })
        .collect();
    Clock {
        stem,
        cycle,
        letters,
    }
}

/// Rewrites body literals into the clock/product namespaces.
fn rewrite_body(b: &Body, shape: &PrefixShape) -> Body {
    use crate::hyper::{bfalse, btrue, bnext, buntil, bweak_until};
    use std::rc::Rc;
    let uniform: BTreeSet<&String> = shape.uniform.iter().map(|(v, _)| v).collect();
    let evars: BTreeSet<&String> = shape.exists_traces.iter().collect();
    match &**b {
        HyperBody::True => btrue(),
        HyperBody::False => bfalse(),
        HyperBody::Lit { prop, var, positive } => {
            // uniform literals are trace-independent: park them on the clock
            let (name, var) = if uniform.contains(prop) {
                (format!("u!{prop}"), "clk".to_string())
            } else if evars.contains(var) {
                (format!("e!{prop}"), var.clone())
            } else {
                (prop.clone(), var.clone())
            };
            Rc::new(HyperBody::Lit {
                prop: name,
                var,
                positive: *positive,
            })
        }
        HyperBody::And(l, r) => crate::hyper::band(
            rewrite_body(l, shape),
            rewrite_body(r, shape),
        ),
        HyperBody::Or(l, r) => {
            crate::hyper::bor(rewrite_body(l, shape), rewrite_body(r, shape))
        }
        HyperBody::Next(x) => bnext(rewrite_body(x, shape)),
        HyperBody::Until(l, r) => {
            buntil(rewrite_body(l, shape), rewrite_body(r, shape))
        }
        HyperBody::WeakUntil(l, r) => {
            bweak_until(rewrite_body(l, shape), rewrite_body(r, shape))
        }
    }
}

/// Exact inner check: does some tuple of `K`-traces for the universal
/// variables violate the body under the fixed witnesses? `true` means a
/// counterexample exists.
fn has_universal_counterexample(
    k: &KripkeStructure,
    aut: &BuchiAutomaton,
    clock: &Clock,
    forall_vars: &[String],
) -> bool {
    let m = forall_vars.len();
    let masks: Vec<Vec<u64>> = forall_vars
        .iter()
        .map(|v| component_masks(aut, k, v))
        .collect();
    let clock_masks: Vec<u64> = clock.letters.iter().map(|l| aut.letter_mask(l)).collect();
    type PState = (usize, usize, Vec<usize>);
    let inits: Vec<PState> = aut
        .initial
        .iter()
        .map(|&q| (q, 0usize, vec![k.init; m]))
        .collect();
    let succ_pos = |p: usize| {
        if p + 1 < clock.stem + clock.cycle {
            p + 1
        } else {
            clock.stem
        }
    };
    let succs = |s: &PState| -> Vec<PState> {
        let (q, p, ks) = s;
        let letter = ks
            .iter()
            .enumerate()
            .fold(clock_masks[*p], |acc, (j, &st)| acc | masks[j][st]);
        let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
        for &st in ks.iter() {
            let mut next = Vec::new();
            for t in &tuples {
                for &s2 in &k.states[st].succ {
                    let mut t = t.clone();
                    t.push(s2);
                    next.push(t);
                }
            }
            tuples = next;
        }
        let mut out = Vec::new();
        for (cond, q2) in &aut.arcs[*q] {
            if cond.matches(letter) {
                for t in &tuples {
                    out.push((*q2, succ_pos(*p), t.clone()));
                }
            }
        }
        out
    };
    find_accepting_lasso(inits, succs, |&(q, _, _)| aut.accepting[q]).is_some()
}

/// Deterministic witness order: lassos by total length, lexicographic.
fn witness_sequences(stem_max: usize, loop_max: usize) -> Vec<UniformSeq> {
    let mut out = Vec::new();
    for total in 1..=stem_max + loop_max {
        for stem_len in 0..=total.min(stem_max) {
            let cycle_len = total - stem_len;
            if cycle_len == 0 || cycle_len > loop_max {
                continue;
            }
            for mask in 0u64..(1 << total) {
                let stem: Vec<bool> = (0..stem_len).map(|b| mask >> b & 1 == 1).collect();
                let cycle: Vec<bool> = (0..cycle_len)
                    .map(|b| mask >> (stem_len + b) & 1 == 1)
                    .collect();
                out.push(UniformSeq { stem, cycle });
            }
        }
    }
    out
}

pub fn check_exists_forall(
    k: &KripkeStructure,
    f: &HyperFormula,
    bounds: &McBounds,
) -> Result<ExistsForallVerdict, McError> {
    let shape = parse_prefix(f)?;
    let body = rewrite_body(&f.body, &shape);
    let negated = bnegate(&body);
    let aut = ltl_to_buchi(&body_to_ltl(&negated));

    let eol_vars: Vec<&String> = shape
        .uniform
        .iter()
        .filter(|(_, t)| *t == QuantTag::ExactlyOneLevel)
        .map(|(v, _)| v)
        .collect();
    let plain_vars: Vec<&String> = shape
        .uniform
        .iter()
        .filter(|(_, t)| *t == QuantTag::None)
        .map(|(v, _)| v)
        .collect();

    // the provably-exhaustive route: one exactly-one-level variable, no other
    // existential witnesses
    if plain_vars.is_empty() && shape.exists_traces.is_empty() && eol_vars.len() == 1 {
        return Ok(single_level_search(
            k,
            &aut,
            eol_vars[0],
            &shape.forall_traces,
            bounds,
        ));
    }

    // bounded search over all existential witnesses
    let trace_pool = traces_enumerate(k, bounds.witness_stem, bounds.witness_loop);
    let seq_pool = witness_sequences(bounds.witness_stem, bounds.witness_loop);
    let level_pool: Vec<UniformSeq> = (0..bounds.witness_stem + bounds.witness_loop)
        .map(UniformSeq::exactly_at)
        .collect();

    let uniform_choices: Vec<Vec<UniformSeq>> = shape
        .uniform
        .iter()
        .map(|(_, tag)| match tag {
            QuantTag::ExactlyOneLevel => level_pool.clone(),
            QuantTag::None => seq_pool.clone(),
        })
        .collect();
    let trace_choices: Vec<&[LassoTrace]> = shape
        .exists_traces
        .iter()
        .map(|_| trace_pool.as_slice())
        .collect();

    let mut pick_u = vec![0usize; uniform_choices.len()];
    let mut pick_t = vec![0usize; trace_choices.len()];
    if trace_choices.iter().any(|c| c.is_empty()) {
        return Ok(ExistsForallVerdict::FailsUpTo {
            witness_stem: bounds.witness_stem,
            witness_loop: bounds.witness_loop,
        });
    }
    loop {
        let uniform: Vec<(String, UniformSeq)> = shape
            .uniform
            .iter()
            .enumerate()
            .map(|(j, (v, _))| (v.clone(), uniform_choices[j][pick_u[j]].clone()))
            .collect();
        let traces: Vec<(String, LassoTrace)> = shape
            .exists_traces
            .iter()
            .zip(pick_t.iter())
            .map(|(v, &i)| (v.clone(), trace_pool[i].clone()))
            .collect();
        let clock = build_clock(&uniform, &traces);
        if !has_universal_counterexample(k, &aut, &clock, &shape.forall_traces) {
            return Ok(ExistsForallVerdict::Holds {
                uniform_witness: uniform,
                trace_witness: traces,
            });
        }
        // odometer over (uniform, trace) picks
        let mut advanced = false;
        for (j, p) in pick_u.iter_mut().enumerate() {
            *p += 1;
            if *p < uniform_choices[j].len() {
                advanced = true;
                break;
            }
            *p = 0;
        }
        if !advanced {
            for (j, p) in pick_t.iter_mut().enumerate() {
                *p += 1;
                if *p < trace_choices[j].len() {
                    advanced = true;
                    break;
                }
                *p = 0;
            }
        }
        if !advanced {
            return Ok(ExistsForallVerdict::FailsUpTo {
                witness_stem: bounds.witness_stem,
                witness_loop: bounds.witness_loop,
            });
        }
    }
}

/// Exhaustive search over the single exactly-one-level variable: the
/// reachable product state set after `ℓ` zero-steps evolves deterministically
/// with `ℓ`, so once it repeats every later level is equivalent to an
/// earlier one.
fn single_level_search(
    k: &KripkeStructure,
    aut: &BuchiAutomaton,
    var: &String,
    forall_vars: &[String],
    bounds: &McBounds,
) -> ExistsForallVerdict {
    let m = forall_vars.len();
    let masks: Vec<Vec<u64>> = forall_vars
        .iter()
        .map(|v| component_masks(aut, k, v))
        .collect();
    let var_bit: u64 = {
        let name = format!("u!{var}@clk");
        aut.aps
            .iter()
            .position(|a| *a == name)
            .map(|i| 1 << i)
            .unwrap_or(0)
    };

    type PState = (usize, Vec<usize>);
    let step = |states: &BTreeSet<PState>, with_var: bool| -> BTreeSet<PState> {
        let mut out = BTreeSet::new();
        for (q, ks) in states {
            let letter = ks
                .iter()
                .enumerate()
                .fold(if with_var { var_bit } else { 0 }, |acc, (j, &st)| {
                    acc | masks[j][st]
                });
            let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
            for &st in ks.iter() {
                let mut next = Vec::new();
                for t in &tuples {
                    for &s2 in &k.states[st].succ {
                        let mut t = t.clone();
                        t.push(s2);
                        next.push(t);
                    }
                }
                tuples = next;
            }
            for (cond, q2) in &aut.arcs[*q] {
                if cond.matches(letter) {
                    for t in &tuples {
                        out.insert((*q2, t.clone()));
                    }
                }
            }
        }
        out
    };

    // states from which the negated body has an accepting run with the
    // variable false forever
    let bad_tail = |from: &PState| -> bool {
        find_accepting_lasso(
            vec![from.clone()],
            |s| step(&BTreeSet::from([s.clone()]), false).into_iter().collect(),
            |&(q, _)| aut.accepting[q],
        )
        .is_some()
    };
    let mut tail_memo: HashMap<PState, bool> = HashMap::new();

    let inits: BTreeSet<PState> = aut
        .initial
        .iter()
        .map(|&q| (q, vec![k.init; m]))
        .collect();
    let mut frontier = inits;
    let mut seen: HashSet<BTreeSet<PState>> = HashSet::new();
    let mut level = 0usize;
    loop {
        // the witness sets the variable at `level`: a counterexample must
        // pass through the flagged step and then run clean
        let after = step(&frontier, true);
        let mut bad = false;
        for s in &after {
            let b = *tail_memo
                .entry(s.clone())
                .or_insert_with(|| bad_tail(s));
            if b {
                bad = true;
                break;
            }
        }
        if !bad {
            return ExistsForallVerdict::Holds {
                uniform_witness: vec![(var.clone(), UniformSeq::exactly_at(level))],
                trace_witness: Vec::new(),
            };
        }
        if !seen.insert(frontier.clone()) {
            // trajectory closed a cycle: every further level repeats one
            // already refuted
            return ExistsForallVerdict::ExactFail;
        }
        if seen.len() > bounds.state_cap {
            return ExistsForallVerdict::FailsUpTo {
                witness_stem: bounds.witness_stem,
                witness_loop: bounds.witness_loop,
            };
        }
        frontier = step(&frontier, false);
        level += 1;
    }
}

// ---------------------------------------------------------------------------
// Model checking dispatch
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum McMode {
    KCoherent(usize),
    LeftFlat,
    Bounded { stem_max: usize, loop_max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum McVerdict {
    Holds,
    Refuted {
        counterexample: Option<Vec<LassoTrace>>,
    },
    HoldsOnApprox {
        stem_max: usize,
        loop_max: usize,
    },
    Unknown {
        detail: String,
    },
}

/// Syntactic downward closure: every connective preserves it and every atom
/// has it.
pub fn is_downward_closed_syntactic(f: &TeamFormula) -> bool {
    use TeamFormula as T;
    match f {
        T::True | T::False | T::Prop(_) | T::NegProp(_) | T::Dep(..) => true,
        T::NonEmpty | T::Inc(..) | T::BoolNeg(_) | T::LeftOr(..) => false,
        T::GenAtom(fam, _) => fam.is_downward_closed(),
        T::And(l, r) | T::SplitOr(l, r) | T::BoolOr(l, r) | T::Until(l, r)
        | T::WeakUntil(l, r) => {
            is_downward_closed_syntactic(l) && is_downward_closed_syntactic(r)
        }
        T::Next(x) | T::FlatAll(x) | T::SubteamAll(x) => is_downward_closed_syntactic(x),
    }
}

pub fn mc_teamltl(
    k: &KripkeStructure,
    f: &TeamFormula,
    mode: &McMode,
    bounds: &McBounds,
) -> Result<McVerdict, McError> {
    match mode {
        McMode::KCoherent(arity) => {
            let r = check_forall_k(k, f, *arity)?;
            Ok(if r.holds {
                McVerdict::Holds
            } else {
                McVerdict::Refuted {
                    counterexample: r.counterexample,
                }
            })
        }
        McMode::LeftFlat => {
            let t = leftflat_translate(f)?;
            match check_exists_forall(k, &t.closed, bounds)? {
                ExistsForallVerdict::Holds { .. } => Ok(McVerdict::Holds),
                ExistsForallVerdict::ExactFail => Ok(McVerdict::Refuted {
                    counterexample: None,
                }),
                ExistsForallVerdict::FailsUpTo {
                    witness_stem,
                    witness_loop,
                } => Ok(McVerdict::Unknown {
                    detail: format!(
                        "no witness up to stem {witness_stem}, loop {witness_loop}"
                    ),
                }),
            }
        }
        McMode::Bounded { stem_max, loop_max } => {
            let team = traces_enumerate(k, *stem_max, *loop_max);
            let holds = team_eval::eval(&team, 0, f);
            Ok(if holds {
                McVerdict::HoldsOnApprox {
                    stem_max: *stem_max,
                    loop_max: *loop_max,
                }
            } else if is_downward_closed_syntactic(f) {
                // the enumerated team is a subteam of Traces(K); downward
                // closure makes its failure a proof
                McVerdict::Refuted {
                    counterexample: Some(team),
                }
            } else {
                McVerdict::Unknown {
                    detail: format!(
                        "fails on the enumeration at stem {stem_max}, loop {loop_max}, \
                         but the formula is not downward closed"
                    ),
                }
            })
        }
    }
}

// ---------------------------------------------------------------------------
// 1-coherence rewriting
// ---------------------------------------------------------------------------

/// `φ ↦ φ*` over TeamLTL(⊆, vv): Boolean disjunctions become classical,
/// inclusion atoms become conjoined biconditionals; equivalent over
/// singleton teams.
pub fn one_coherence_reduction(f: &TeamFormula) -> Result<LtlFormula, TranslateError> {
    use TeamFormula as T;
    Ok(match f {
        T::True => LtlFormula::True,
        T::False => LtlFormula::False,
        T::Prop(p) => LtlFormula::Prop(p.clone()),
        T::NegProp(p) => LtlFormula::NegProp(p.clone()),
        T::And(l, r) => LtlFormula::and(
            one_coherence_reduction(l)?,
            one_coherence_reduction(r)?,
        ),
        T::SplitOr(l, r) | T::BoolOr(l, r) => LtlFormula::or(
            one_coherence_reduction(l)?,
            one_coherence_reduction(r)?,
        ),
        T::Next(x) => LtlFormula::next(one_coherence_reduction(x)?),
        T::Until(l, r) => LtlFormula::until(
            one_coherence_reduction(l)?,
            one_coherence_reduction(r)?,
        ),
        T::WeakUntil(l, r) => LtlFormula::weak_until(
            one_coherence_reduction(l)?,
            one_coherence_reduction(r)?,
        ),
        T::Inc(ls, rs) => ls
            .iter()
            .zip(rs.iter())
            .map(|(l, r)| {
                LtlFormula::or(
                    LtlFormula::and(l.clone(), r.clone()),
                    LtlFormula::and(l.negated(), r.negated()),
                )
            })
            .reduce(LtlFormula::and)
            .unwrap_or(LtlFormula::True),
        _ => {
            return Err(TranslateError::FragmentMismatch {
                expected: "TeamLTL(inc, vv)",
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_team_formula;
    use crate::traces::letter;

    fn single_state(label: &[&str]) -> KripkeStructure {
        KripkeStructure::new(
            label.iter().map(|s| s.to_string()).collect(),
            vec![letter(label)],
            &[(0, 0)],
            0,
        )
        .unwrap()
    }

    fn branching_pq() -> KripkeStructure {
        // w0 {} -> {p} self-loop, w0 -> {} self-loop
        KripkeStructure::new(
            vec!["p".to_string()],
            vec![letter(&[]), letter(&["p"]), letter(&[])],
            &[(0, 1), (0, 2), (1, 1), (2, 2)],
            0,
        )
        .unwrap()
    }

    #[test]
    fn kripke_file_round_trip() {
        let text = r#"{"ap":["a"],"states":[{"id":0,"label":["a"]},{"id":1,"label":[]}],
                       "init":0,"edges":[[0,1],[1,0]]}"#;
        let k = KripkeStructure::parse(text).unwrap();
        assert_eq!(k.states.len(), 2);
        let again = KripkeStructure::parse(&k.to_json()).unwrap();
        assert_eq!(again.states[0].succ, vec![1]);
        // rejects sink states
        let bad = r#"{"ap":[],"states":[{"id":0,"label":[]}],"init":0,"edges":[]}"#;
        assert!(matches!(
            KripkeStructure::parse(bad),
            Err(KripkeError::NoSuccessor(0))
        ));
    }

    #[test]
    fn enumerate_single_loop() {
        let k = single_state(&["p"]);
        let ts = traces_enumerate(&k, 1, 1);
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0], LassoTrace::new(vec![], vec![letter(&["p"])]));
    }

    #[test]
    fn enumerate_two_cycle_collapses() {
        let k = KripkeStructure::new(
            vec!["a".into(), "b".into()],
            vec![letter(&["a"]), letter(&["b"])],
            &[(0, 1), (1, 0)],
            0,
        )
        .unwrap();
        let ts = traces_enumerate(&k, 1, 2);
        // {a}({b}{a})^ω and ({a}{b})^ω denote the same trace
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].stem.len(), 0);
        assert_eq!(ts[0].cycle.len(), 2);
    }

    #[test]
    fn enumerate_branching() {
        let k = branching_pq();
        let ts = traces_enumerate(&k, 1, 1);
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn forall_k_examples() {
        let k = single_state(&["p"]);
        let f = parse_team_formula("A1 G p").unwrap();
        assert!(check_forall_k(&k, &f, 1).unwrap().holds);
        let f = parse_team_formula("~p").unwrap();
        let r = check_forall_k(&k, &f, 1).unwrap();
        assert!(!r.holds);
        assert!(r.counterexample.is_some());

        // constancy of p fails on the branching structure
        let k = branching_pq();
        let f = parse_team_formula("dep(; X p)").unwrap();
        let r = check_forall_k(&k, &f, 2).unwrap();
        assert!(!r.holds);
        let cx = r.counterexample.unwrap();
        assert_eq!(cx.len(), 2);
        // the two witnesses disagree on p at step 1
        let a = cx[0].letter_at(1).contains("p");
        let b = cx[1].letter_at(1).contains("p");
        assert_ne!(a, b);
    }

    #[test]
    fn exists_forall_single_level() {
        use crate::hyper::parse_hyper_formula;
        let k = single_state(&["p"]);
        let f = parse_hyper_formula(
            "uexists1 r. forall pi. ((r@pi & X G !r@pi) & G (!r@pi | F p@pi))",
        )
        .unwrap();
        match check_exists_forall(&k, &f, &McBounds::default()).unwrap() {
            ExistsForallVerdict::Holds { uniform_witness, .. } => {
                assert_eq!(uniform_witness[0].1, UniformSeq::exactly_at(0));
            }
            other => panic!("expected Holds, got {other:?}"),
        }
        let k = single_state(&[]);
        let f = parse_hyper_formula(
            "uexists1 r. forall pi. ((r@pi & X G !r@pi) & G (!r@pi | F p@pi))",
        )
        .unwrap();
        assert_eq!(
            check_exists_forall(&k, &f, &McBounds::default()).unwrap(),
            ExistsForallVerdict::ExactFail
        );
        // branching p/¬p: no single level works
        let k = branching_pq();
        let f = parse_hyper_formula("uexists1 r. forall pi. G (!r@pi | p@pi)").unwrap();
        assert_eq!(
            check_exists_forall(&k, &f, &McBounds::default()).unwrap(),
            ExistsForallVerdict::ExactFail
        );
    }

    #[test]
    fn mc_dispatch() {
        let k = single_state(&["p"]);
        let f = parse_team_formula("A1 F p").unwrap();
        assert_eq!(
            mc_teamltl(&k, &f, &McMode::LeftFlat, &McBounds::default()).unwrap(),
            McVerdict::Holds
        );
        let f = parse_team_formula("A1 G p").unwrap();
        assert_eq!(
            mc_teamltl(&k, &f, &McMode::KCoherent(1), &McBounds::default()).unwrap(),
            McVerdict::Holds
        );
        // downward closed and refuted on the approximation: sound refutation
        let k = branching_pq();
        let f = parse_team_formula("F p").unwrap();
        match mc_teamltl(
            &k,
            &f,
            &McMode::Bounded {
                stem_max: 2,
                loop_max: 2,
            },
            &McBounds::default(),
        )
        .unwrap()
        {
            McVerdict::Refuted { .. } => {}
            other => panic!("expected Refuted, got {other:?}"),
        }
    }

    #[test]
    fn one_coherence_examples() {
        let f = parse_team_formula("inc(a; b)").unwrap();
        let g = one_coherence_reduction(&f).unwrap();
        assert_eq!(g.to_string(), "((a & b) | (!a & !b))");
        let f = parse_team_formula("a vv b").unwrap();
        assert_eq!(one_coherence_reduction(&f).unwrap().to_string(), "(a | b)");
        let f = parse_team_formula("p U q").unwrap();
        assert_eq!(one_coherence_reduction(&f).unwrap().to_string(), "(p U q)");
        assert!(one_coherence_reduction(&parse_team_formula("dep(a; b)").unwrap()).is_err());
    }

    #[test]
    fn one_coherence_singleton_equivalence() {
        use crate::team_eval::{eval, eval_ltl};
        let t = LassoTrace::new(
            vec![letter(&["a"])],
            vec![letter(&["b"]), letter(&["a", "b"])],
        );
        for s in ["inc(a; b)", "a vv b", "(a vv b) U inc(b; a)", "G (a vv !a)"] {
            let f = parse_team_formula(s).unwrap();
            let g = one_coherence_reduction(&f).unwrap();
            for i in 0..4 {
                assert_eq!(
                    eval(std::slice::from_ref(&t), i, &f),
                    eval_ltl(&t, i, &g),
                    "case {s} at {i}"
                );
            }
        }
    }
}
