//! Exact reference evaluator for TeamLTL and its extensions over finite
//! teams of lassos.
//!
//! Until/weak-until quantify over `[i, B)` with `B = max(i, S) + P` from the
//! team horizon: suffix configurations repeat with period `P` after `S`, so
//! witnesses and counterexamples beyond `B` are redundant. Split covers are
//! ordered pairs `(T1, T2)` with `T1 ∪ T2 = T`, overlapping and empty parts
//! included. Memoization is keyed by subteam bitmask, reduced time index and
//! subformula id; all tables are call-local.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use crate::formula::{BoolRelationFamily, LtlFormula, TeamFormula};
use crate::traces::{horizon, LassoTrace, Team};

pub fn eval(traces: &[LassoTrace], i: usize, f: &TeamFormula) -> bool {
    let mut ev = Evaluator::new(traces, f);
    let full = ev.full_mask();
    ev.eval_at(full, i)
}

pub fn eval_team(team: &Team, f: &TeamFormula) -> bool {
    eval(team.traces(), team.index, f)
}

/// Classical LTL truth on a single lasso.
pub fn eval_ltl(trace: &LassoTrace, i: usize, f: &LtlFormula) -> bool {
    let traces = std::slice::from_ref(trace);
    let mut arena = LtlArena::new(traces);
    let id = arena.intern(f);
    let h = horizon(traces, 0).unwrap();
    arena.value(id, 0, reduce(i, h.stem_len, h.period))
}

/// Checks the k-coherence biconditional on this specific team:
/// `eval(T) ⇔ every subteam of size ≤ k satisfies f`.
pub fn is_k_coherent_on(traces: &[LassoTrace], i: usize, f: &TeamFormula, k: usize) -> bool {
    let mut ev = Evaluator::new(traces, f);
    let full = ev.full_mask();
    let whole = ev.eval_at(full, i);
    let all_small = submasks(full)
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|m| m.count_ones() as usize <= k)
        .all(|m| ev.eval_at(m, i));
    whole == all_small
}

fn reduce(i: usize, stem_len: usize, period: usize) -> usize {
    if i < stem_len {
        i
    } else {
        stem_len + (i - stem_len) % period
    }
}

fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    // descending enumeration of all submasks, ending with 0
    let mut cur = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = cur;
        if cur == 0 {
            done = true;
        } else {
            cur = (cur - 1) & mask;
        }
        Some(out)
    })
}

// ---------------------------------------------------------------------------
// LTL atom arguments: dense value tables over the reduced position space
// ---------------------------------------------------------------------------

enum LNode {
    True,
    False,
    Prop(String),
    NegProp(String),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    WeakUntil(usize, usize),
}

struct LtlArena<'a> {
    traces: &'a [LassoTrace],
    stem_len: usize,
    period: usize,
    nodes: Vec<LNode>,
    /// values[node][trace * (S+P) + pos]
    values: Vec<Option<Vec<bool>>>,
    dedup: HashMap<LtlFormula, usize>,
}

impl<'a> LtlArena<'a> {
    fn new(traces: &'a [LassoTrace]) -> LtlArena<'a> {
        let (stem_len, period) = match horizon(traces, 0) {
            Some(h) => (h.stem_len, h.period),
            None => (0, 1),
        };
        LtlArena {
            traces,
            stem_len,
            period,
            nodes: Vec::new(),
            values: Vec::new(),
            dedup: HashMap::new(),
        }
    }

    fn intern(&mut self, f: &LtlFormula) -> usize {
        if let Some(&id) = self.dedup.get(f) {
            return id;
        }
        let node = match f {
            LtlFormula::True => LNode::True,
            LtlFormula::False => LNode::False,
            LtlFormula::Prop(p) => LNode::Prop(p.clone()),
            LtlFormula::NegProp(p) => LNode::NegProp(p.clone()),
            LtlFormula::And(l, r) => LNode::And(self.intern(l), self.intern(r)),
            LtlFormula::Or(l, r) => LNode::Or(self.intern(l), self.intern(r)),
            LtlFormula::Next(x) => LNode::Next(self.intern(x)),
            LtlFormula::Until(l, r) => LNode::Until(self.intern(l), self.intern(r)),
            LtlFormula::WeakUntil(l, r) => {
                LNode::WeakUntil(self.intern(l), self.intern(r))
            }
        };
        self.nodes.push(node);
        self.values.push(None);
        let id = self.nodes.len() - 1;
        self.dedup.insert(f.clone(), id);
        id
    }

    /// Truth of node `id` on trace `t` at reduced position `pos`.
    fn value(&mut self, id: usize, t: usize, pos: usize) -> bool {
        self.fill(id);
        self.values[id].as_ref().unwrap()[t * (self.stem_len + self.period) + pos]
    }

    fn fill(&mut self, id: usize) {
        if self.values[id].is_some() {
            return;
        }
        let span = self.stem_len + self.period;
        let n = self.traces.len();
        let mut table = vec![false; n * span];
        // children are interned before parents, so this recursion terminates
        match &self.nodes[id] {
            LNode::True => table.iter_mut().for_each(|v| *v = true),
            LNode::False => {}
            LNode::Prop(p) => {
                for (t, trace) in self.traces.iter().enumerate() {
                    for pos in 0..span {
                        table[t * span + pos] = trace.letter_at(pos).contains(p);
                    }
                }
            }
            LNode::NegProp(p) => {
                for (t, trace) in self.traces.iter().enumerate() {
                    for pos in 0..span {
                        table[t * span + pos] = !trace.letter_at(pos).contains(p);
                    }
                }
            }
            &LNode::And(l, r) => {
                self.fill(l);
                self.fill(r);
                for (k, v) in table.iter_mut().enumerate() {
                    *v = self.values[l].as_ref().unwrap()[k]
                        && self.values[r].as_ref().unwrap()[k];
                }
            }
            &LNode::Or(l, r) => {
                self.fill(l);
                self.fill(r);
                for (k, v) in table.iter_mut().enumerate() {
                    *v = self.values[l].as_ref().unwrap()[k]
                        || self.values[r].as_ref().unwrap()[k];
                }
            }
            &LNode::Next(x) => {
                self.fill(x);
                let xs = self.values[x].as_ref().unwrap();
                for t in 0..n {
                    for pos in 0..span {
                        let nxt = self.succ(pos);
                        table[t * span + pos] = xs[t * span + nxt];
                    }
                }
            }
            &LNode::Until(l, r) => {
                self.fill(l);
                self.fill(r);
                let (ls, rs) = (
                    self.values[l].as_ref().unwrap().clone(),
                    self.values[r].as_ref().unwrap().clone(),
                );
                for t in 0..n {
                    self.temporal_table(&mut table, t, &ls, &rs, false);
                }
            }
            &LNode::WeakUntil(l, r) => {
                self.fill(l);
                self.fill(r);
                let (ls, rs) = (
                    self.values[l].as_ref().unwrap().clone(),
                    self.values[r].as_ref().unwrap().clone(),
                );
                for t in 0..n {
                    self.temporal_table(&mut table, t, &ls, &rs, true);
                }
            }
        }
        self.values[id] = Some(table);
    }

    fn succ(&self, pos: usize) -> usize {
        if pos + 1 < self.stem_len + self.period {
            pos + 1
        } else {
            self.stem_len
        }
    }

    /// Until (`weak = false`) or weak-until over the lasso position space:
    /// loop positions by the one-period fixpoint formula, stem backwards.
    fn temporal_table(
        &self,
        table: &mut [bool],
        t: usize,
        ls: &[bool],
        rs: &[bool],
        weak: bool,
    ) {
        let span = self.stem_len + self.period;
        let at = |vals: &[bool], pos: usize| vals[t * span + pos];
        // loop part
        for off in 0..self.period {
            let pos = self.stem_len + off;
            let mut v = weak;
            if weak {
                // ∀k < P: l@p⊕k ∨ ∃m ≤ k: r@p⊕m
                let mut seen_r = false;
                for k in 0..self.period {
                    let p = self.stem_len + (off + k) % self.period;
                    seen_r |= at(rs, p);
                    if !at(ls, p) && !seen_r {
                        v = false;
                        break;
                    }
                }
            } else {
                // ∃k < P: r@p⊕k ∧ ∀m < k: l@p⊕m
                for k in 0..self.period {
                    let p = self.stem_len + (off + k) % self.period;
                    if at(rs, p) {
                        v = true;
                        break;
                    }
                    if !at(ls, p) {
                        break;
                    }
                }
            }
            table[t * span + pos] = v;
        }
        // stem part backwards; U and W share the one-step unfolding and
        // differ only through the loop seed above
        for pos in (0..self.stem_len).rev() {
            let nxt = table[t * span + pos + 1];
            table[t * span + pos] = at(rs, pos) || (at(ls, pos) && nxt);
        }
    }
}

// ---------------------------------------------------------------------------
// Team-level evaluation
// ---------------------------------------------------------------------------

enum TNode {
    True,
    False,
    Prop(String),
    NegProp(String),
    And(usize, usize),
    SplitOr(usize, usize),
    BoolOr(usize, usize),
    BoolNeg(usize),
    Next(usize),
    Until(usize, usize),
    WeakUntil(usize, usize),
    Dep(Vec<usize>, usize),
    Inc(Vec<usize>, Vec<usize>),
    FlatAll(usize),
    SubteamAll(usize),
    NonEmpty,
    LeftOr(usize, usize),
    GenAtom(Rc<BoolRelationFamily>, Vec<usize>),
}

pub struct Evaluator<'a> {
    traces: &'a [LassoTrace],
    stem_len: usize,
    period: usize,
    nodes: Vec<TNode>,
    root: usize,
    ltl: LtlArena<'a>,
    memo: HashMap<(u32, usize, usize), bool>,
}

impl<'a> Evaluator<'a> {
    pub fn new(traces: &'a [LassoTrace], f: &TeamFormula) -> Evaluator<'a> {
        assert!(traces.len() <= 32, "teams beyond 32 traces are unsupported");
        let (stem_len, period) = match horizon(traces, 0) {
            Some(h) => (h.stem_len, h.period),
            None => (0, 1),
        };
        let mut ev = Evaluator {
            traces,
            stem_len,
            period,
            nodes: Vec::new(),
            root: 0,
            ltl: LtlArena::new(traces),
            memo: HashMap::new(),
        };
        ev.root = ev.intern(f);
        ev
    }

    pub fn full_mask(&self) -> u32 {
        if self.traces.is_empty() {
            0
        } else {
            u32::MAX >> (32 - self.traces.len())
        }
    }

    fn intern(&mut self, f: &TeamFormula) -> usize {
        use TeamFormula as F;
        let node = match f {
            F::True => TNode::True,
            F::False => TNode::False,
            F::Prop(p) => TNode::Prop(p.clone()),
            F::NegProp(p) => TNode::NegProp(p.clone()),
            F::And(l, r) => TNode::And(self.intern(l), self.intern(r)),
            F::SplitOr(l, r) => TNode::SplitOr(self.intern(l), self.intern(r)),
            F::BoolOr(l, r) => TNode::BoolOr(self.intern(l), self.intern(r)),
            F::BoolNeg(x) => TNode::BoolNeg(self.intern(x)),
            F::Next(x) => TNode::Next(self.intern(x)),
            F::Until(l, r) => TNode::Until(self.intern(l), self.intern(r)),
            F::WeakUntil(l, r) => TNode::WeakUntil(self.intern(l), self.intern(r)),
            F::Dep(args, t) => TNode::Dep(
                args.iter().map(|a| self.ltl.intern(a)).collect(),
                self.ltl.intern(t),
            ),
            F::Inc(ls, rs) => TNode::Inc(
                ls.iter().map(|a| self.ltl.intern(a)).collect(),
                rs.iter().map(|a| self.ltl.intern(a)).collect(),
            ),
            F::FlatAll(x) => TNode::FlatAll(self.intern(x)),
            F::SubteamAll(x) => TNode::SubteamAll(self.intern(x)),
            F::NonEmpty => TNode::NonEmpty,
            F::LeftOr(l, r) => TNode::LeftOr(self.intern(l), self.intern(r)),
            F::GenAtom(fam, args) => TNode::GenAtom(
                fam.clone(),
                args.iter().map(|a| self.ltl.intern(a)).collect(),
            ),
        };
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn eval_at(&mut self, mask: u32, i: usize) -> bool {
        self.eval_node(mask, i, self.root)
    }

    fn eval_node(&mut self, mask: u32, i: usize, node: usize) -> bool {
        let red = reduce(i, self.stem_len, self.period);
        if let Some(&v) = self.memo.get(&(mask, red, node)) {
            return v;
        }
        let v = self.compute(mask, i, red, node);
        self.memo.insert((mask, red, node), v);
        v
    }

    fn members(&self, mask: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.traces.len()).filter(move |t| mask >> t & 1 == 1)
    }

    fn compute(&mut self, mask: u32, i: usize, red: usize, node: usize) -> bool {
        match &self.nodes[node] {
            TNode::True => true,
            TNode::False => mask == 0,
            TNode::NonEmpty => mask != 0,
            TNode::Prop(p) => {
                let p = p.clone();
                self.members(mask).all(|t| self.traces[t].letter_at(red).contains(&p))
            }
            TNode::NegProp(p) => {
                let p = p.clone();
                self.members(mask).all(|t| !self.traces[t].letter_at(red).contains(&p))
            }
            &TNode::And(l, r) => self.eval_node(mask, i, l) && self.eval_node(mask, i, r),
            &TNode::BoolOr(l, r) => {
                self.eval_node(mask, i, l) || self.eval_node(mask, i, r)
            }
            &TNode::BoolNeg(x) => !self.eval_node(mask, i, x),
            &TNode::Next(x) => self.eval_node(mask, i + 1, x),
            &TNode::SplitOr(l, r) => self.split(mask, i, l, r, false),
            &TNode::LeftOr(l, r) => self.split(mask, i, l, r, true),
            &TNode::Until(l, r) => {
                let bound = self.stem_len.max(i) + self.period;
                (i..bound).any(|k| {
                    self.eval_node(mask, k, r)
                        && (i..k).all(|m| self.eval_node(mask, m, l))
                })
            }
            &TNode::WeakUntil(l, r) => {
                let bound = self.stem_len.max(i) + self.period;
                (i..bound).all(|k| {
                    self.eval_node(mask, k, l)
                        || (i..=k).any(|m| self.eval_node(mask, m, r))
                })
            }
            TNode::Dep(args, target) => {
                let (args, target) = (args.clone(), *target);
                let rows: Vec<(Vec<bool>, bool)> = self
                    .members(mask)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .map(|t| {
                        (
                            args.iter().map(|&a| self.ltl.value(a, t, red)).collect(),
                            self.ltl.value(target, t, red),
                        )
                    })
                    .collect();
                rows.iter().all(|(a1, v1)| {
                    rows.iter().all(|(a2, v2)| a1 != a2 || v1 == v2)
                })
            }
            TNode::Inc(ls, rs) => {
                let (ls, rs) = (ls.clone(), rs.clone());
                let members: Vec<usize> = self.members(mask).collect();
                let lefts: Vec<Vec<bool>> = members
                    .iter()
                    .map(|&t| ls.iter().map(|&a| self.ltl.value(a, t, red)).collect())
                    .collect();
                let rights: BTreeSet<Vec<bool>> = members
                    .iter()
                    .map(|&t| rs.iter().map(|&a| self.ltl.value(a, t, red)).collect())
                    .collect();
                lefts.iter().all(|l| rights.contains(l))
            }
            TNode::GenAtom(fam, args) => {
                let (fam, args) = (fam.clone(), args.clone());
                let realized: BTreeSet<Vec<bool>> = self
                    .members(mask)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .map(|t| args.iter().map(|&a| self.ltl.value(a, t, red)).collect())
                    .collect();
                fam.contains(&realized)
            }
            &TNode::FlatAll(x) => {
                let singles: Vec<u32> = self.members(mask).map(|t| 1 << t).collect();
                singles.into_iter().all(|m| self.eval_node(m, i, x))
            }
            &TNode::SubteamAll(x) => {
                submasks(mask).collect::<Vec<_>>().into_iter().all(|m| self.eval_node(m, i, x))
            }
        }
    }

    fn split(&mut self, mask: u32, i: usize, l: usize, r: usize, left_nonempty: bool) -> bool {
        for m1 in submasks(mask) {
            if left_nonempty && m1 == 0 {
                continue;
            }
            let rest = mask & !m1;
            if !self.eval_node(m1, i, l) {
                continue;
            }
            // the right part must cover mask ∖ m1 and may take any subset of m1
            for extra in submasks(m1) {
                if self.eval_node(rest | extra, i, r) {
                    return true;
                }
            }
        }
        false
    }
}

/// Human-readable satisfaction trace of split choices, one line per split
/// node on the satisfied path. Empty when the formula does not hold.
pub fn explain(traces: &[LassoTrace], i: usize, f: &TeamFormula) -> Vec<String> {
    let mut ev = Evaluator::new(traces, f);
    let full = ev.full_mask();
    let mut out = Vec::new();
    if ev.eval_at(full, i) {
        explain_rec(&mut ev, full, i, f, &mut out);
    }
    out
}

fn mask_names(mask: u32, n: usize) -> String {
    let ids: Vec<String> = (0..n).filter(|t| mask >> t & 1 == 1).map(|t| t.to_string()).collect();
    format!("{{{}}}", ids.join(","))
}

fn explain_rec(
    ev: &mut Evaluator,
    mask: u32,
    i: usize,
    f: &TeamFormula,
    out: &mut Vec<String>,
) {
    use TeamFormula as F;
    match f {
        F::SplitOr(l, r) | F::LeftOr(l, r) => {
            let need_ne = matches!(f, F::LeftOr(..));
            let n = ev.traces.len();
            let li = ev.intern(l);
            let ri = ev.intern(r);
            for m1 in submasks(mask) {
                if need_ne && m1 == 0 {
                    continue;
                }
                if !ev.eval_node(m1, i, li) {
                    continue;
                }
                let rest = mask & !m1;
                for extra in submasks(m1) {
                    let m2 = rest | extra;
                    if ev.eval_node(m2, i, ri) {
                        out.push(format!(
                            "split at step {i}: {f} -> left {} right {}",
                            mask_names(m1, n),
                            mask_names(m2, n)
                        ));
                        explain_rec(ev, m1, i, l, out);
                        explain_rec(ev, m2, i, r, out);
                        return;
                    }
                }
            }
        }
        F::And(l, r) => {
            explain_rec(ev, mask, i, l, out);
            explain_rec(ev, mask, i, r, out);
        }
        F::BoolOr(l, r) => {
            let li = ev.intern(l);
            if ev.eval_node(mask, i, li) {
                explain_rec(ev, mask, i, l, out);
            } else {
                explain_rec(ev, mask, i, r, out);
            }
        }
        F::Next(x) => explain_rec(ev, mask, i + 1, x, out),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_team_formula;
    use crate::traces::letter;

    fn tr(stem: &[&[&str]], cycle: &[&[&str]]) -> LassoTrace {
        LassoTrace::new(
            stem.iter().map(|l| letter(l)).collect(),
            cycle.iter().map(|l| letter(l)).collect(),
        )
    }

    fn ev(traces: &[LassoTrace], i: usize, s: &str) -> bool {
        eval(traces, i, &parse_team_formula(s).unwrap())
    }

    #[test]
    fn eval_ltl_examples() {
        let t = tr(&[], &[&["p"]]);
        assert!(eval_ltl(&t, 0, &crate::formula::parse_ltl_formula("F p").unwrap()));
        let t = tr(&[&[], &["p"]], &[&[]]);
        assert!(!eval_ltl(&t, 0, &crate::formula::parse_ltl_formula("G p").unwrap()));
        assert!(eval_ltl(&t, 1, &crate::formula::parse_ltl_formula("p").unwrap()));
        let t = tr(&[], &[&["a"], &["b"]]);
        assert!(eval_ltl(
            &t,
            0,
            &crate::formula::parse_ltl_formula("(a | b) W !T").unwrap()
        ));
    }

    #[test]
    fn empty_team_property() {
        for s in ["p", "!p", "F p", "(p | q)", "dep(a; b)", "inc(a; b)", "G (p vv q)"] {
            assert!(ev(&[], 0, s), "empty team should satisfy {s}");
        }
        assert!(!ev(&[], 0, "NE"));
        assert!(ev(&[], 0, "!T"));
        // orl requires a non-empty left part
        assert!(!ev(&[], 0, "p orl q"));
    }

    fn two_trace_team() -> Vec<LassoTrace> {
        vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])]
    }

    #[test]
    fn synchronous_eventually() {
        let t = two_trace_team();
        assert!(!ev(&t, 0, "F p"), "no common step where p holds");
        assert!(ev(&t, 0, "A1 F p"));
        let mut t3 = t.clone();
        t3.push(tr(&[], &[&[]]));
        assert!(!ev(&t3, 0, "A1 F p"));
        assert!(!ev(&t3, 0, "F p"));
    }

    #[test]
    fn split_disjunction() {
        let t = vec![tr(&[], &[&["a"]]), tr(&[], &[&["b"]])];
        assert!(ev(&t, 0, "G a | G b"));
        assert!(!ev(&t, 0, "G a vv G b"));
        // vv needs the whole team on one side, which a mixed team never is
        assert!(!ev(&t, 0, "G (a vv b)"));
        assert!(ev(&t, 0, "G (a vv !a) | G (b vv !b)"));
    }

    #[test]
    fn singleton_equivalence() {
        let t = tr(&[&["p"], &[]], &[&["q"]]);
        for s in ["p", "F q", "p U q", "(p & X G q)", "G (p | q)"] {
            let team = ev(std::slice::from_ref(&t), 0, s);
            let ltl = eval_ltl(&t, 0, &crate::formula::parse_ltl_formula(s).unwrap());
            assert_eq!(team, ltl, "case {s}");
        }
    }

    #[test]
    fn bool_negation_is_strict_complement() {
        let t = two_trace_team();
        for s in ["p", "F p", "p | q", "dep(p; q)"] {
            let pos = ev(&t, 0, s);
            let neg = ev(&t, 0, &format!("~({s})"));
            assert_eq!(neg, !pos, "case {s}");
        }
    }

    #[test]
    fn dependence_and_inclusion() {
        // traces: (o,s), (o,!s): o constant, s varies
        let t = vec![tr(&[], &[&["o", "s"]]), tr(&[], &[&["o"]])];
        assert!(ev(&t, 0, "dep(; o)"));
        assert!(!ev(&t, 0, "dep(; s)"));
        assert!(ev(&t, 0, "dep(o; o)"));
        assert!(!ev(&t, 0, "dep(o; s)"));
        // non-inference: (o,s) ⊆ (o,!s)
        assert!(ev(&t, 0, "inc(o, s; o, !s)"));
        let leak = vec![tr(&[], &[&["o", "s"]])];
        assert!(!ev(&leak, 0, "inc(o, s; o, !s)"));
    }

    #[test]
    fn subteam_quantifier() {
        let t = two_trace_team();
        assert!(ev(&t, 0, "A (p vv !p vv T)"));
        // A (F p) fails: the full subteam has no common witness
        assert!(!ev(&t, 0, "A F p"));
    }

    #[test]
    fn until_bound_is_sufficient() {
        // p first shows at step 3 on the longer stem
        let t = vec![tr(&[&[], &[], &[], &["p"]], &[&["p"]]), tr(&[], &[&["p"]])];
        assert!(ev(&t, 0, "F p"));
        assert!(ev(&t, 2, "F p"));
        let t = vec![tr(&[], &[&[], &[], &["p"]])];
        assert!(ev(&t, 0, "F p"));
        assert!(ev(&t, 7, "F p"));
        assert!(!ev(&t, 0, "G p"));
    }

    #[test]
    fn k_coherence_examples() {
        let t = two_trace_team();
        let fp = parse_team_formula("F p").unwrap();
        assert!(!is_k_coherent_on(&t, 0, &fp, 1), "singletons satisfy, union does not");
        let flat = parse_team_formula("A1 F p").unwrap();
        assert!(is_k_coherent_on(&t, 0, &flat, 1));
        // downward closed and true on T: both sides true for every k
        let dc = parse_team_formula("dep(; p)").unwrap();
        let t2 = vec![tr(&[], &[&["p"]])];
        for k in 1..3 {
            assert!(is_k_coherent_on(&t2, 0, &dc, k));
        }
    }

    #[test]
    fn periodicity_of_eval() {
        let t = vec![
            tr(&[&["a"]], &[&["p"], &[]]),
            tr(&[], &[&[], &["p"], &["p"]]),
        ];
        let h = horizon(&t, 0).unwrap();
        for s in ["F p", "G (p vv !p)", "p U (p | !p)", "X p"] {
            let f = parse_team_formula(s).unwrap();
            for k in h.stem_len..h.stem_len + 3 {
                assert_eq!(
                    eval(&t, k, &f),
                    eval(&t, k + h.period, &f),
                    "case {s} at {k}"
                );
            }
        }
    }

    #[test]
    fn left_or_needs_nonempty_left() {
        let t = vec![tr(&[], &[&["a"]])];
        assert!(ev(&t, 0, "a orl T"));
        assert!(!ev(&t, 0, "b orl T"));
        assert!(ev(&t, 0, "T orl b"));
    }

    #[test]
    fn explain_reports_split() {
        let t = vec![tr(&[], &[&["a"]]), tr(&[], &[&["b"]])];
        let f = parse_team_formula("G a | G b").unwrap();
        let lines = explain(&t, 0, &f);
        assert_eq!(lines.len(), 1);
        assert!(lines[0].contains("left"), "{lines:?}");
    }
}
