//! Compilers from TeamLTL fragments into HyperLTL / HyperQPTL(+) prefix
//! fragments, emitted as [`HyperFormula`] values.
//!
//! Three routes:
//! * [`kcoherent_translate`]: the Φ-indexed expansion into `∀^k` HyperLTL.
//! * [`leftflat_translate`]: the marker-sequence translation of the
//!   left-flat fragment into `∃̈* ∀π` HyperQPTL.
//! * [`full_translate`]: the subteam-encoding translation of
//!   TeamLTL(vv, NE, A1) into `∃p Q̈* ∃π* ∀π` HyperQPTL+.
//!
//! The latter two emit exactly-one-level tags on their marker variables in
//! place of the side formula "F v ∧ G(v → XG ¬v)". Outputs of
//! `full_translate` are prenex; the prenexing laws used for trace
//! quantifiers assume a non-empty team, matching model-checking use where
//! every structure generates at least one trace.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use crate::formula::{
    eliminate_flat_nonclassical, fragment_flags, EliminationError, LtlFormula, TeamFormula,
};
use crate::hyper::{
    band, bany, beventually, bfalse, bglobally, biff, bimplies, bnegate, bnext, bor, btrue,
    buntil, bweak_until, lit, neg_lit, Body, HyperBody, HyperFormula, QuantBounds,
    QuantKind, Quantifier,
};
use crate::traces::{horizon, LassoTrace};

/// Evaluation bounds sufficient for every witness the translation
/// correctness arguments construct. Universal level quantifiers stop at
/// `K = max(i, S) + P + 1`: suffix configurations repeat with period `P`
/// beyond the stem, so the obligation of a level `k ≥ K` follows from the
/// one at `k − P` with all witness chains shifted. Existential markers keep
/// the full grid `K + P·(1 + temporal depth)`, which fits every marker
/// chain spawned inside the deepest universal branch (one chain step per
/// temporal nesting level, plus one slack level for Boolean choices).
pub fn source_bounds(traces: &[LassoTrace], i: usize, f: &TeamFormula) -> QuantBounds {
    let (s, p) = match horizon(traces, 0) {
        Some(h) => (h.stem_len, h.period),
        None => (0, 1),
    };
    let depth = f.temporal_depth();
    let level = i.max(s) + p + 1;
    QuantBounds {
        stem_max: level + p * (1 + depth),
        loop_lcm: p,
        universal_level_max: Some(level),
        cap: 1 << 16,
    }
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum TranslateError {
    #[error("formula is not in the {expected} fragment")]
    FragmentMismatch { expected: &'static str },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Elimination(#[from] EliminationError),
}

/// Propositions are `prop@var`-indexed copies of an LTL formula.
pub fn embed_ltl(f: &LtlFormula, var: &str) -> Body {
    use LtlFormula as L;
    match f {
        L::True => btrue(),
        L::False => bfalse(),
        L::Prop(p) => lit(p, var),
        L::NegProp(p) => neg_lit(p, var),
        L::And(l, r) => band(embed_ltl(l, var), embed_ltl(r, var)),
        L::Or(l, r) => bor(embed_ltl(l, var), embed_ltl(r, var)),
        L::Next(x) => bnext(embed_ltl(x, var)),
        L::Until(l, r) => buntil(embed_ltl(l, var), embed_ltl(r, var)),
        L::WeakUntil(l, r) => bweak_until(embed_ltl(l, var), embed_ltl(r, var)),
    }
}

/// Removes `A1` nodes; only meaningful under an enclosing `A1` context.
fn strip_flat_all(f: &TeamFormula) -> TeamFormula {
    use TeamFormula as T;
    match f {
        T::FlatAll(x) => strip_flat_all(x),
        T::And(l, r) => TeamFormula::and(strip_flat_all(l), strip_flat_all(r)),
        T::SplitOr(l, r) => TeamFormula::split_or(strip_flat_all(l), strip_flat_all(r)),
        T::BoolOr(l, r) => TeamFormula::bool_or(strip_flat_all(l), strip_flat_all(r)),
        T::Next(x) => TeamFormula::next(strip_flat_all(x)),
        T::Until(l, r) => TeamFormula::until(strip_flat_all(l), strip_flat_all(r)),
        T::WeakUntil(l, r) => {
            TeamFormula::weak_until(strip_flat_all(l), strip_flat_all(r))
        }
        other => other.clone(),
    }
}

/// The per-trace LTL form of a flat operand: inner `A1` dropped, `vv`/`NE`
/// eliminated by the bottom-up linear procedure.
fn flat_ltl(f: &TeamFormula) -> Result<LtlFormula, TranslateError> {
    Ok(eliminate_flat_nonclassical(&strip_flat_all(f))?)
}

struct Fresh {
    used: BTreeSet<String>,
    counter: usize,
}

impl Fresh {
    fn avoiding(f: &TeamFormula) -> Fresh {
        Fresh {
            used: f.props(),
            counter: 0,
        }
    }

    fn next(&mut self, base: &str) -> String {
        loop {
            let name = format!("{base}__{}", self.counter);
            self.counter += 1;
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// k-coherent fragment -> ∀^k HyperLTL
// ---------------------------------------------------------------------------

/// `φ^Φ` for `Φ` the full variable set, closed under `k` universal trace
/// quantifiers `pi1..pik`.
pub fn kcoherent_translate(f: &TeamFormula, k: usize) -> Result<HyperFormula, TranslateError> {
    if k == 0 {
        return Err(TranslateError::ZeroK);
    }
    if !fragment_flags(f).k_coherent_eligible {
        return Err(TranslateError::FragmentMismatch {
            expected: "k-coherent-eligible",
        });
    }
    let vars: Vec<String> = (1..=k).map(|j| format!("pi{j}")).collect();
    let body = kcoherent_body(f, &vars);
    let prefix = vars
        .iter()
        .map(|v| Quantifier::new(QuantKind::TraceForall, v))
        .collect();
    Ok(HyperFormula::new(prefix, body))
}

/// The open form `φ^Φ` over the given trace variables (`Φ` = all of them).
pub fn kcoherent_body(f: &TeamFormula, vars: &[String]) -> Body {
    let mut memo = HashMap::new();
    let full = if vars.is_empty() {
        0
    } else {
        (1u32 << vars.len()) - 1
    };
    k_body(f, full, vars, &mut memo)
}

fn members(mask: u32, vars: &[String]) -> impl Iterator<Item = &String> + '_ {
    vars.iter()
        .enumerate()
        .filter(move |(j, _)| mask >> j & 1 == 1)
        .map(|(_, v)| v)
}

fn submasks_of(mask: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut cur = mask;
    loop {
        out.push(cur);
        if cur == 0 {
            break;
        }
        cur = (cur - 1) & mask;
    }
    out
}

/// Raw (non-folding) Or/And keep the cover disjunction structurally
/// countable: one disjunct per ordered cover, `3^|Φ|` in total.
fn raw_or(l: Body, r: Body) -> Body {
    Rc::new(HyperBody::Or(l, r))
}

fn raw_and(l: Body, r: Body) -> Body {
    Rc::new(HyperBody::And(l, r))
}

fn k_body(
    f: &TeamFormula,
    mask: u32,
    vars: &[String],
    memo: &mut HashMap<(usize, u32), Body>,
) -> Body {
    use TeamFormula as T;
    let key = (f as *const TeamFormula as usize, mask);
    if let Some(b) = memo.get(&key) {
        return b.clone();
    }
    let out = match f {
        T::True => btrue(),
        // Π[Φ] is empty exactly when Φ is
        T::False => {
            if mask == 0 {
                btrue()
            } else {
                bfalse()
            }
        }
        T::NonEmpty => {
            if mask == 0 {
                bfalse()
            } else {
                btrue()
            }
        }
        T::Prop(p) => ball_over(mask, vars, |v| lit(p, v)),
        T::NegProp(p) => ball_over(mask, vars, |v| neg_lit(p, v)),
        T::And(l, r) => band(k_body(l, mask, vars, memo), k_body(r, mask, vars, memo)),
        T::BoolOr(l, r) => bor(k_body(l, mask, vars, memo), k_body(r, mask, vars, memo)),
        T::BoolNeg(x) => bnegate(&k_body(x, mask, vars, memo)),
        T::Next(x) => bnext(k_body(x, mask, vars, memo)),
        T::Until(l, r) => buntil(k_body(l, mask, vars, memo), k_body(r, mask, vars, memo)),
        T::WeakUntil(l, r) => {
            bweak_until(k_body(l, mask, vars, memo), k_body(r, mask, vars, memo))
        }
        T::SplitOr(l, r) => {
            // one disjunct per ordered pair Φ0 ∪ Φ1 = Φ
            let mut disjuncts = Vec::new();
            for m0 in submasks_of(mask) {
                let rest = mask & !m0;
                for extra in submasks_of(m0) {
                    let m1 = rest | extra;
                    disjuncts.push(raw_and(
                        k_body(l, m0, vars, memo),
                        k_body(r, m1, vars, memo),
                    ));
                }
            }
            disjuncts
                .into_iter()
                .reduce(raw_or)
                .expect("at least the (Φ, Φ) cover exists")
        }
        T::FlatAll(x) => {
            let parts: Vec<Body> = vars
                .iter()
                .enumerate()
                .filter(|(j, _)| mask >> j & 1 == 1)
                .map(|(j, _)| k_body(x, 1 << j, vars, memo))
                .collect();
            crate::hyper::ball(parts)
        }
        T::SubteamAll(x) => {
            let parts: Vec<Body> = submasks_of(mask)
                .into_iter()
                .map(|m| k_body(x, m, vars, memo))
                .collect();
            crate::hyper::ball(parts)
        }
        T::Dep(args, target) => {
            let ms: Vec<&String> = members(mask, vars).collect();
            let mut conj = Vec::new();
            for &v1 in &ms {
                for &v2 in &ms {
                    let agree_args = crate::hyper::ball(
                        args.iter().map(|a| agree(a, v1, v2)),
                    );
                    conj.push(bimplies(agree_args, agree(target, v1, v2)));
                }
            }
            crate::hyper::ball(conj)
        }
        T::Inc(ls, rs) => {
            let ms: Vec<&String> = members(mask, vars).collect();
            let mut conj = Vec::new();
            for &v1 in &ms {
                let witnesses = ms.iter().map(|&v2| {
                    crate::hyper::ball(
                        ls.iter()
                            .zip(rs.iter())
                            .map(|(l, r)| biff(embed_ltl(l, v1), embed_ltl(r, v2))),
                    )
                });
                conj.push(bany(witnesses));
            }
            crate::hyper::ball(conj)
        }
        T::GenAtom(fam, args) => {
            let ms: Vec<&String> = members(mask, vars).collect();
            // realized tuple set equals some relation of the family
            let arms = fam.relations.iter().map(|rel| {
                let inside = crate::hyper::ball(ms.iter().map(|&v| {
                    bany(rel.iter().map(|tup| tuple_eq(args, tup, v)))
                }));
                let covered = crate::hyper::ball(rel.iter().map(|tup| {
                    bany(ms.iter().map(|&v| tuple_eq(args, tup, v)))
                }));
                band(inside, covered)
            });
            bany(arms)
        }
        T::LeftOr(..) => unreachable!("rejected by the fragment check"),
    };
    memo.insert(key, out.clone());
    out
}

fn ball_over<'a>(
    mask: u32,
    vars: &'a [String],
    mut make: impl FnMut(&'a str) -> Body,
) -> Body {
    let mut out = btrue();
    for (j, v) in vars.iter().enumerate() {
        if mask >> j & 1 == 1 {
            out = band(out, make(v));
        }
    }
    out
}

fn agree(f: &LtlFormula, v1: &str, v2: &str) -> Body {
    biff(embed_ltl(f, v1), embed_ltl(f, v2))
}

fn tuple_eq(args: &[LtlFormula], tup: &[bool], v: &str) -> Body {
    crate::hyper::ball(
        args.iter()
            .zip(tup.iter())
            .map(|(a, &b)| embed_ltl(&a.signed(b), v)),
    )
}

/// Number of disjuncts in the top-level cover of a split translation.
pub fn or_spine_len(b: &Body) -> usize {
    match &**b {
        HyperBody::Or(l, r) => or_spine_len(l) + or_spine_len(r),
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// Left-flat fragment -> ∃̈* ∀π HyperQPTL
// ---------------------------------------------------------------------------

pub struct LeftFlatTranslation {
    /// Closed form: `∃̈ markers... ∀π. r ∧ XG¬r ∧ [φ, r]`, evaluation at step 0.
    pub closed: HyperFormula,
    /// Open form: the same markers and trace quantifier around `[φ, r]`,
    /// with `r` free so callers can preset the evaluation step.
    pub open: HyperFormula,
    pub r_name: String,
    pub trace_var: String,
}

pub fn leftflat_translate(f: &TeamFormula) -> Result<LeftFlatTranslation, TranslateError> {
    if !fragment_flags(f).left_flat {
        return Err(TranslateError::FragmentMismatch {
            expected: "left-flat",
        });
    }
    let mut fresh = Fresh::avoiding(f);
    let pi = "pi".to_string();
    let r0 = fresh.next("r");
    let mut markers: Vec<Quantifier> = Vec::new();
    let body = lf_clause(f, &r0, &pi, &mut fresh, &mut markers)?;

    let open_prefix: Vec<Quantifier> = markers
        .iter()
        .cloned()
        .chain([Quantifier::new(QuantKind::TraceForall, &pi)])
        .collect();
    let open = HyperFormula::new(open_prefix, body.clone());

    let mut closed_prefix = vec![Quantifier::tagged(QuantKind::UPropExists, &r0)];
    closed_prefix.extend(markers.iter().cloned());
    closed_prefix.push(Quantifier::new(QuantKind::TraceForall, &pi));
    let anchor = band(
        lit(&r0, &pi),
        bnext(bglobally(neg_lit(&r0, &pi))),
    );
    let closed = HyperFormula::new(closed_prefix, band(anchor, body.clone()));

    Ok(LeftFlatTranslation {
        closed,
        open,
        r_name: r0,
        trace_var: pi,
    })
}

/// `[φ, r]` from the translation table. All markers are plain uniform
/// existentials: inside a branch the top marker never reaches, a marker must
/// be free to stay silent, or its conjunctive obligations (the event of an
/// until chain, the shift link of a next marker) would bind vacuously-dead
/// subformulas. Only the closing form pins the top marker to one level.
fn lf_clause(
    f: &TeamFormula,
    r: &str,
    pi: &str,
    fresh: &mut Fresh,
    markers: &mut Vec<Quantifier>,
) -> Result<Body, TranslateError> {
    use TeamFormula as T;
    Ok(match f {
        T::True => btrue(),
        T::False => bglobally(neg_lit(r, pi)),
        T::Prop(p) => bglobally(bimplies(lit(r, pi), lit(p, pi))),
        T::NegProp(p) => bglobally(bimplies(lit(r, pi), neg_lit(p, pi))),
        T::FlatAll(x) => {
            let hat = embed_ltl(&flat_ltl(x)?, pi);
            bglobally(bimplies(lit(r, pi), hat))
        }
        T::Next(x) => {
            let r1 = fresh.next("r");
            markers.push(Quantifier::new(QuantKind::UPropExists, &r1));
            let link = bglobally(biff(lit(r, pi), bnext(lit(&r1, pi))));
            band(link, lf_clause(x, &r1, pi, fresh, markers)?)
        }
        T::And(l, r_) => band(
            lf_clause(l, r, pi, fresh, markers)?,
            lf_clause(r_, r, pi, fresh, markers)?,
        ),
        T::SplitOr(l, r_) => bor(
            lf_clause(l, r, pi, fresh, markers)?,
            lf_clause(r_, r, pi, fresh, markers)?,
        ),
        T::BoolOr(l, r_) => {
            let d = fresh.next("d");
            markers.push(Quantifier::new(QuantKind::UPropExists, &d));
            band(
                bimplies(lit(&d, pi), lf_clause(l, r, pi, fresh, markers)?),
                bimplies(neg_lit(&d, pi), lf_clause(r_, r, pi, fresh, markers)?),
            )
        }
        T::Until(l, r_) | T::WeakUntil(l, r_) => {
            let weak = matches!(f, T::WeakUntil(..));
            let rl = fresh.next("r");
            markers.push(Quantifier::new(QuantKind::UPropExists, &rl));
            let rr = fresh.next("r");
            markers.push(Quantifier::new(QuantKind::UPropExists, &rr));
            let stop = band(lit(&rr, pi), bnext(bglobally(neg_lit(&rr, pi))));
            let chain = if weak {
                bweak_until(lit(&rl, pi), stop)
            } else {
                buntil(lit(&rl, pi), stop)
            };
            let hat = embed_ltl(&flat_ltl(l)?, pi);
            let parts = [
                bglobally(bimplies(lit(r, pi), chain)),
                bglobally(bimplies(lit(&rl, pi), hat)),
                lf_clause(r_, &rr, pi, fresh, markers)?,
            ];
            crate::hyper::ball(parts)
        }
        _ => unreachable!("rejected by the fragment check"),
    })
}

// ---------------------------------------------------------------------------
// TeamLTL(vv, NE, A1) -> ∃p Q̈* ∃π* ∀π HyperQPTL+
// ---------------------------------------------------------------------------

/// Intermediate translation tree before prenexing. `ChunkForall` bodies and
/// `Uniform` macros speak about the shared universal trace variable;
/// `ChunkExists` bodies get their own fresh variable when lowered.
enum TrNode {
    ChunkForall(Body),
    ChunkExists(String, Body),
    /// Trace-independent formula over uniform propositions; parked under the
    /// final universal trace quantifier.
    Uniform(Body),
    And(Box<TrNode>, Box<TrNode>),
    Or(Box<TrNode>, Box<TrNode>),
    Quant(Quantifier, Box<TrNode>),
}

fn contains_forall_chunk(n: &TrNode) -> bool {
    match n {
        TrNode::ChunkForall(_) => true,
        TrNode::ChunkExists(..) | TrNode::Uniform(_) => false,
        TrNode::And(l, r) | TrNode::Or(l, r) => {
            contains_forall_chunk(l) || contains_forall_chunk(r)
        }
        TrNode::Quant(_, x) => contains_forall_chunk(x),
    }
}

pub struct FullTranslation {
    pub formula: HyperFormula,
    pub subteam_prop: String,
    pub trace_var: String,
}

/// The subteam-encoding translation: `∃qS ∃̈q ∃̈r (TR(φ) ∧ aux)` prenexed to
/// `∃p Q̈* ∃π* ∀π`. Equivalence with team satisfaction at step `i` (where the
/// top `q`/`r` land by the aux conjunct) holds over non-empty teams.
pub fn full_translate(f: &TeamFormula) -> Result<FullTranslation, TranslateError> {
    if !fragment_flags(f).general_bor_ne_flat {
        return Err(TranslateError::FragmentMismatch {
            expected: "TeamLTL(vv, NE, A1)",
        });
    }
    let mut fresh = Fresh::avoiding(f);
    let qs = fresh.next("qS");
    let pi = "pi".to_string();
    let q0 = fresh.next("q");
    let r0 = fresh.next("r");
    let mut ctx = TrCtx {
        qs: qs.clone(),
        pi: pi.clone(),
        fresh,
    };
    let node = ctx.tr(f, &q0, &r0)?;
    let (quants, matrix) = ctx.prenex(node);
    let mut evars = Vec::new();
    let tr_body = lower(matrix, &mut evars);
    let aux = crate::hyper::ball([lit(&qs, &pi), lit(&q0, &pi), lit(&r0, &pi)]);
    let body = band(tr_body, aux);

    let mut prefix = vec![
        Quantifier::new(QuantKind::PropExists, &qs),
        Quantifier::tagged(QuantKind::UPropExists, &q0),
        Quantifier::tagged(QuantKind::UPropExists, &r0),
    ];
    prefix.extend(quants);
    prefix.extend(
        evars
            .iter()
            .map(|v| Quantifier::new(QuantKind::TraceExists, v)),
    );
    prefix.push(Quantifier::new(QuantKind::TraceForall, &pi));
    Ok(FullTranslation {
        formula: HyperFormula::new(prefix, body),
        subteam_prop: qs,
        trace_var: pi,
    })
}

struct TrCtx {
    qs: String,
    pi: String,
    fresh: Fresh,
}

impl TrCtx {
    /// Membership of the trace in the subteam selected by `q`'s level.
    fn member(&self, q: &str, var: &str) -> Body {
        beventually(band(lit(q, var), lit(&self.qs, var)))
    }

    /// `a ⪯ b`: b's level is at or after a's.
    fn level_le(&self, a: &str, b: &str) -> Body {
        bglobally(bimplies(lit(a, &self.pi), beventually(lit(b, &self.pi))))
    }

    /// `a ≺ b`: b's level is strictly after a's.
    fn level_lt(&self, a: &str, b: &str) -> Body {
        bglobally(bimplies(
            lit(a, &self.pi),
            bnext(beventually(lit(b, &self.pi))),
        ))
    }

    fn tr(&mut self, f: &TeamFormula, q: &str, r: &str) -> Result<TrNode, TranslateError> {
        use TeamFormula as T;
        Ok(match f {
            T::True => TrNode::Uniform(btrue()),
            T::False => {
                // only the empty subteam satisfies the falsum
                TrNode::ChunkForall(bnegate(&self.member(q, &self.pi)))
            }
            T::NonEmpty => {
                let v = self.fresh_trace_var();
                TrNode::ChunkExists(v.clone(), self.member(q, &v))
            }
            T::Prop(p) => self.literal_chunk(q, r, lit(p, &self.pi)),
            T::NegProp(p) => self.literal_chunk(q, r, neg_lit(p, &self.pi)),
            T::FlatAll(x) => {
                let hat = embed_ltl(&flat_ltl(x)?, &self.pi);
                self.literal_chunk(q, r, hat)
            }
            T::And(l, r_) => TrNode::And(
                Box::new(self.tr(l, q, r)?),
                Box::new(self.tr(r_, q, r)?),
            ),
            T::BoolOr(l, r_) => TrNode::Or(
                Box::new(self.tr(l, q, r)?),
                Box::new(self.tr(r_, q, r)?),
            ),
            T::Next(x) => {
                let r1 = self.fresh.next("r");
                let link = bglobally(biff(
                    lit(r, &self.pi),
                    bnext(lit(&r1, &self.pi)),
                ));
                TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropExists, &r1),
                    Box::new(TrNode::And(
                        Box::new(TrNode::Uniform(link)),
                        Box::new(self.tr(x, q, &r1)?),
                    )),
                )
            }
            T::SplitOr(l, r_) => {
                let q1 = self.fresh.next("q");
                let q2 = self.fresh.next("q");
                // the two levels mark subteams whose union is q's subteam
                let union = biff(
                    beventually(band(lit(q, &self.pi), lit(&self.qs, &self.pi))),
                    beventually(band(
                        bor(lit(&q1, &self.pi), lit(&q2, &self.pi)),
                        lit(&self.qs, &self.pi),
                    )),
                );
                let inner = TrNode::And(
                    Box::new(TrNode::ChunkForall(union)),
                    Box::new(TrNode::And(
                        Box::new(self.tr(l, &q1, r)?),
                        Box::new(self.tr(r_, &q2, r)?),
                    )),
                );
                TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropExists, &q1),
                    Box::new(TrNode::Quant(
                        Quantifier::tagged(QuantKind::UPropExists, &q2),
                        Box::new(inner),
                    )),
                )
            }
            T::Until(l, r_) => {
                let r1 = self.fresh.next("r");
                let r2 = self.fresh.next("r");
                let premise = band(self.level_le(r, &r2), self.level_lt(&r2, &r1));
                let all_mid = TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropForall, &r2),
                    Box::new(TrNode::Or(
                        Box::new(TrNode::Uniform(bnegate(&premise))),
                        Box::new(self.tr(l, q, &r2)?),
                    )),
                );
                TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropExists, &r1),
                    Box::new(TrNode::And(
                        Box::new(TrNode::Uniform(self.level_le(r, &r1))),
                        Box::new(TrNode::And(
                            Box::new(self.tr(r_, q, &r1)?),
                            Box::new(all_mid),
                        )),
                    )),
                )
            }
            T::WeakUntil(l, r_) => {
                let r1 = self.fresh.next("r");
                let r2 = self.fresh.next("r");
                let witness = TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropExists, &r2),
                    Box::new(TrNode::And(
                        Box::new(TrNode::Uniform(band(
                            self.level_le(r, &r2),
                            self.level_le(&r2, &r1),
                        ))),
                        Box::new(self.tr(r_, q, &r2)?),
                    )),
                );
                TrNode::Quant(
                    Quantifier::tagged(QuantKind::UPropForall, &r1),
                    Box::new(TrNode::Or(
                        Box::new(TrNode::Uniform(bnegate(&self.level_le(r, &r1)))),
                        Box::new(TrNode::Or(Box::new(self.tr(l, q, &r1)?), Box::new(witness))),
                    )),
                )
            }
            _ => unreachable!("rejected by the fragment check"),
        })
    }

    fn literal_chunk(&self, q: &str, r: &str, ell: Body) -> TrNode {
        TrNode::ChunkForall(bimplies(
            self.member(q, &self.pi),
            beventually(band(lit(r, &self.pi), ell)),
        ))
    }

    fn fresh_trace_var(&mut self) -> String {
        self.fresh.next("pi")
    }

    /// Hoists quantifiers in nesting order; disjunctions whose both sides
    /// carry universal trace chunks get an exactly-one-level chooser so the
    /// matrix stays mergeable under a single ∀π.
    fn prenex(&mut self, n: TrNode) -> (Vec<Quantifier>, TrNode) {
        match n {
            TrNode::Quant(q, x) => {
                let (mut qs, m) = self.prenex(*x);
                qs.insert(0, q);
                (qs, m)
            }
            TrNode::And(l, r) => {
                let (mut ql, ml) = self.prenex(*l);
                let (qr, mr) = self.prenex(*r);
                ql.extend(qr);
                (ql, TrNode::And(Box::new(ml), Box::new(mr)))
            }
            TrNode::Or(l, r) => {
                let (mut ql, ml) = self.prenex(*l);
                let (qr, mr) = self.prenex(*r);
                if contains_forall_chunk(&ml) && contains_forall_chunk(&mr) {
                    let d = self.fresh.next("d");
                    let guard_l = TrNode::Or(
                        Box::new(TrNode::Uniform(neg_lit(&d, &self.pi))),
                        Box::new(ml),
                    );
                    let guard_r = TrNode::Or(
                        Box::new(TrNode::Uniform(lit(&d, &self.pi))),
                        Box::new(mr),
                    );
                    let mut qs = vec![Quantifier::tagged(QuantKind::UPropExists, &d)];
                    qs.extend(ql);
                    qs.extend(qr);
                    (qs, TrNode::And(Box::new(guard_l), Box::new(guard_r)))
                } else {
                    ql.extend(qr);
                    (ql, TrNode::Or(Box::new(ml), Box::new(mr)))
                }
            }
            leaf => (Vec::new(), leaf),
        }
    }
}

fn lower(m: TrNode, evars: &mut Vec<String>) -> Body {
    match m {
        TrNode::ChunkForall(b) | TrNode::Uniform(b) => b,
        TrNode::ChunkExists(v, b) => {
            evars.push(v);
            b
        }
        TrNode::And(l, r) => band(lower(*l, evars), lower(*r, evars)),
        TrNode::Or(l, r) => bor(lower(*l, evars), lower(*r, evars)),
        TrNode::Quant(..) => unreachable!("prenex removed quantifiers"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_team_formula;
    use crate::hyper::{eval_hyper_default, HyperAssignment};
    use crate::team_eval::eval;
    use crate::traces::{letter, LassoTrace};

    fn tr(stem: &[&[&str]], cycle: &[&[&str]]) -> LassoTrace {
        LassoTrace::new(
            stem.iter().map(|l| letter(l)).collect(),
            cycle.iter().map(|l| letter(l)).collect(),
        )
    }

    fn parse(s: &str) -> TeamFormula {
        parse_team_formula(s).unwrap()
    }

    // -- k-coherent ---------------------------------------------------------

    #[test]
    fn kcoherent_atom_shape() {
        let h = kcoherent_translate(&parse("p"), 2).unwrap();
        assert_eq!(h.to_string(), "forall pi1. forall pi2. (p@pi1 & p@pi2)");
        let h = kcoherent_translate(&parse("~p"), 1).unwrap();
        assert_eq!(h.to_string(), "forall pi1. !p@pi1");
        assert!(matches!(
            kcoherent_translate(&parse("p"), 0),
            Err(TranslateError::ZeroK)
        ));
        assert!(kcoherent_translate(&parse("p orl q"), 1).is_err());
    }

    #[test]
    fn kcoherent_cover_count() {
        for k in 1..=3usize {
            let h = kcoherent_translate(&parse("p | q"), k).unwrap();
            assert_eq!(or_spine_len(&h.body), 3usize.pow(k as u32), "k = {k}");
        }
    }

    /// Lemma-style equivalence on a surjective assignment Π[Φ] = T.
    fn lemma9_agrees(team: &[LassoTrace], i: usize, s: &str, k: usize) {
        let f = parse(s);
        let vars: Vec<String> = (1..=k).map(|j| format!("pi{j}")).collect();
        let body = kcoherent_body(&f, &vars);
        let open = HyperFormula::new(vec![], body);
        // one surjection suffices for the check; enumerate all var->trace maps
        // that cover the team
        let n = team.len();
        assert!(n <= k && n >= 1);
        let mut found = false;
        let mut map = vec![0usize; k];
        'outer: loop {
            let covered: std::collections::BTreeSet<usize> = map.iter().copied().collect();
            if covered.len() == n && covered.iter().all(|&t| t < n) {
                found = true;
                let mut asg = HyperAssignment::default();
                for (j, v) in vars.iter().enumerate() {
                    asg.traces.insert(v.clone(), map[j]);
                }
                let hyper = eval_hyper_default(team, &asg, i, &open).unwrap();
                let direct = eval(team, i, &f);
                assert_eq!(hyper, direct, "formula {s} with map {map:?}");
            }
            for j in 0..k {
                map[j] += 1;
                if map[j] < n {
                    continue 'outer;
                }
                map[j] = 0;
            }
            break;
        }
        assert!(found);
    }

    #[test]
    fn kcoherent_oracle_spots() {
        let team = vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])];
        for s in [
            "p",
            "p | q",
            "F p",
            "A1 F p",
            "~(F p)",
            "dep(p; q)",
            "inc(p; q)",
            "A (p vv !p vv NE)",
            "(p vv q) U (p vv !p)",
        ] {
            lemma9_agrees(&team, 0, s, 2);
            lemma9_agrees(&team, 1, s, 3);
        }
        let single = vec![tr(&[], &[&["p"], &["q"]])];
        for s in ["X q", "p U q", "G (p | q)"] {
            lemma9_agrees(&single, 0, s, 1);
            lemma9_agrees(&single, 0, s, 2);
        }
    }

    #[test]
    fn kcoherent_closed_form_downward_closed() {
        // for downward closed φ and non-empty T: (T,i) ⊨ φ iff the ∀^k closure holds
        let team = vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])];
        for s in ["A1 F p", "dep(; p)", "p | !p"] {
            let f = parse(s);
            let h = kcoherent_translate(&f, 2).unwrap();
            let hyper =
                eval_hyper_default(&team, &HyperAssignment::default(), 0, &h).unwrap();
            assert_eq!(hyper, eval(&team, 0, &f), "formula {s}");
        }
    }

    // -- left-flat ----------------------------------------------------------

    #[test]
    fn leftflat_shape() {
        let t = leftflat_translate(&parse("A1 F p")).unwrap();
        assert_eq!(
            t.closed.to_string(),
            "uexists1 r__0. forall pi. ((r__0@pi & X G !r__0@pi) & G (!r__0@pi | F p@pi))"
        );
        let t = leftflat_translate(&parse("q")).unwrap();
        assert!(t.open.to_string().contains("G (!r__0@pi | q@pi)"));
        assert!(leftflat_translate(&parse("(F p) U q")).is_err());
    }

    fn thm13_agrees(team: &[LassoTrace], i: usize, s: &str) {
        let f = parse(s);
        let t = leftflat_translate(&f).unwrap();
        let mut asg = HyperAssignment::default();
        asg.uniform
            .insert(t.r_name.clone(), crate::hyper::UniformSeq::exactly_at(i));
        let bounds = source_bounds(team, i, &f);
        let hyper =
            crate::hyper::eval_hyper(team, &asg, 0, &t.open, &bounds).unwrap();
        assert_eq!(hyper, eval(team, i, &f), "formula {s} at {i}");
    }

    #[test]
    fn leftflat_oracle_spots() {
        let team = vec![tr(&[&["a"], &["b"]], &[&[]])];
        thm13_agrees(&team, 0, "(A1 a) U b");
        let team = vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])];
        for s in [
            "p",
            "A1 F p",
            "F p",
            "p | X p",
            "(p & p) vv X p",
            "F (p vv q)",
            "a W p",
            "X X p",
        ] {
            thm13_agrees(&team, 0, s);
            thm13_agrees(&team, 1, s);
        }
        // non-empty teams only; the closed form also checks step 0
        let f = parse("A1 F p");
        let t = leftflat_translate(&f).unwrap();
        let hyper =
            eval_hyper_default(&team, &HyperAssignment::default(), 0, &t.closed).unwrap();
        assert_eq!(hyper, eval(&team, 0, &f));
    }

    // -- full ---------------------------------------------------------------

    #[test]
    fn full_shape() {
        let t = full_translate(&parse("NE")).unwrap();
        let s = t.formula.to_string();
        assert!(s.starts_with("existsp qS__0. uexists1 q__1. uexists1 r__2."));
        assert!(s.contains("exists pi__3."), "{s}");
        assert!(s.contains("F (q__1@pi__3 & qS__0@pi__3)"), "{s}");

        let t = full_translate(&parse("p")).unwrap();
        let s = t.formula.to_string();
        // membership → the literal holds at the r level
        assert!(
            s.contains("F (r__2@pi & p@pi)"),
            "literal clause missing: {s}"
        );
        assert!(full_translate(&parse("~p")).is_err());
    }

    fn thm7_agrees(team: &[LassoTrace], i: usize, s: &str) {
        let f = parse(s);
        let t = full_translate(&f).unwrap();
        let bounds = source_bounds(team, i, &f);
        let hyper = crate::hyper::eval_hyper(
            team,
            &HyperAssignment::default(),
            i,
            &t.formula,
            &bounds,
        )
        .unwrap();
        assert_eq!(hyper, eval(team, i, &f), "formula {s} at {i}");
    }

    #[test]
    fn full_oracle_spots() {
        let team = vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])];
        for s in ["p", "NE", "p vv NE", "p | q", "A1 F p", "X p", "NE & X (p | !p)"] {
            thm7_agrees(&team, 0, s);
        }
        let single = vec![tr(&[], &[&["p"], &["q"]])];
        for s in ["p U q", "F (p & NE)", "G (p vv q)", "(NE & p) | q"] {
            thm7_agrees(&single, 0, s);
            thm7_agrees(&single, 1, s);
        }
    }

    #[test]
    fn translations_are_linear_sized() {
        for s in [
            "p",
            "(p | q) vv X p",
            "A1 (p U q) U (p vv q)",
            "G (F (p | NE) vv A1 X q)",
        ] {
            let f = parse(s);
            if fragment_flags(&f).general_bor_ne_flat {
                let t = full_translate(&f).unwrap();
                assert!(
                    t.formula.size() <= 60 * f.size(),
                    "{s}: {} vs {}",
                    t.formula.size(),
                    f.size()
                );
            }
            if fragment_flags(&f).left_flat {
                let t = leftflat_translate(&f).unwrap();
                assert!(t.closed.size() <= 60 * f.size());
            }
        }
    }
}
