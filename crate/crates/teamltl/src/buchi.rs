//! LTL to Büchi automata via the declarative tableau construction, plus
//! nested-DFS search for accepting lassos in implicit product graphs.
//!
//! The tableau is built by node splitting with generalized acceptance (one
//! set per until subformula; weak until contributes no eventuality), then
//! degeneralized with a counter. No optimization passes: correctness first,
//! desk-scale sizes.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use crate::formula::LtlFormula;
use crate::traces::{LassoTrace, Letter};

/// Conjunctive label constraint over the automaton's proposition list.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct LabelCond {
    pub pos: u64,
    pub neg: u64,
}

impl LabelCond {
    pub fn matches(&self, letter: u64) -> bool {
        letter & self.pos == self.pos && letter & self.neg == 0
    }
}

/// Transition-labeled Büchi automaton. A run starts in `initial`, and the
/// transition taken at step `i` consumes the word's letter `i`.
#[derive(Clone, Debug)]
pub struct BuchiAutomaton {
    pub aps: Vec<String>,
    pub initial: Vec<usize>,
    pub accepting: Vec<bool>,
    pub arcs: Vec<Vec<(LabelCond, usize)>>,
}

impl BuchiAutomaton {
    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn ap_index(&self) -> HashMap<&str, usize> {
        self.aps
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect()
    }

    pub fn letter_mask(&self, letter: &Letter) -> u64 {
        let idx = self.ap_index();
        let mut m = 0u64;
        for p in letter {
            if let Some(&i) = idx.get(p.as_str()) {
                m |= 1 << i;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Tableau construction
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Sub {
    True,
    False,
    Prop(usize),
    NegProp(usize),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    WeakUntil(usize, usize),
}

struct Store {
    aps: Vec<String>,
    ap_ids: HashMap<String, usize>,
    nodes: Vec<Sub>,
    ids: HashMap<Sub, usize>,
}

impl Store {
    fn new() -> Store {
        Store {
            aps: Vec::new(),
            ap_ids: HashMap::new(),
            nodes: Vec::new(),
            ids: HashMap::new(),
        }
    }

    fn ap(&mut self, name: &str) -> usize {
        if let Some(&i) = self.ap_ids.get(name) {
            return i;
        }
        self.aps.push(name.to_string());
        self.ap_ids.insert(name.to_string(), self.aps.len() - 1);
        self.aps.len() - 1
    }

    fn put(&mut self, s: Sub) -> usize {
        if let Some(&i) = self.ids.get(&s) {
            return i;
        }
        self.nodes.push(s.clone());
        self.ids.insert(s, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn intern(&mut self, f: &LtlFormula) -> usize {
        let s = match f {
            LtlFormula::True => Sub::True,
            LtlFormula::False => Sub::False,
            LtlFormula::Prop(p) => Sub::Prop(self.ap(p)),
            LtlFormula::NegProp(p) => Sub::NegProp(self.ap(p)),
            LtlFormula::And(l, r) => {
                let (l, r) = (self.intern(l), self.intern(r));
                Sub::And(l, r)
            }
            LtlFormula::Or(l, r) => {
                let (l, r) = (self.intern(l), self.intern(r));
                Sub::Or(l, r)
            }
            LtlFormula::Next(x) => {
                let x = self.intern(x);
                Sub::Next(x)
            }
            LtlFormula::Until(l, r) => {
                let (l, r) = (self.intern(l), self.intern(r));
                Sub::Until(l, r)
            }
            LtlFormula::WeakUntil(l, r) => {
                let (l, r) = (self.intern(l), self.intern(r));
                Sub::WeakUntil(l, r)
            }
        };
        self.put(s)
    }
}

#[derive(Clone)]
struct TNode {
    incoming: BTreeSet<usize>,
    new: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

const INIT_MARK: usize = usize::MAX;

fn expand(mut node: TNode, store: &Store, done: &mut Vec<TNode>) {
    let Some(&f) = node.new.iter().next() else {
        // fully expanded: merge with an existing node or add
        for existing in done.iter_mut() {
            if existing.old == node.old && existing.next == node.next {
                existing.incoming.extend(node.incoming.iter().copied());
                return;
            }
        }
        let id = done.len();
        done.push(node.clone());
        let succ = TNode {
            incoming: BTreeSet::from([id]),
            new: node.next.clone(),
            old: BTreeSet::new(),
            next: BTreeSet::new(),
        };
        expand(succ, store, done);
        return;
    };
    node.new.remove(&f);
    match store.nodes[f] {
        Sub::False => {}
        Sub::True => expand(node, store, done),
        Sub::Prop(p) => {
            if let Some(&neg) = store.ids.get(&Sub::NegProp(p)) {
                if node.old.contains(&neg) {
                    return;
                }
            }
            node.old.insert(f);
            expand(node, store, done);
        }
        Sub::NegProp(p) => {
            if let Some(&pos) = store.ids.get(&Sub::Prop(p)) {
                if node.old.contains(&pos) {
                    return;
                }
            }
            node.old.insert(f);
            expand(node, store, done);
        }
        Sub::And(l, r) => {
            node.old.insert(f);
            for x in [l, r] {
                if !node.old.contains(&x) {
                    node.new.insert(x);
                }
            }
            expand(node, store, done);
        }
        Sub::Or(l, r) => {
            node.old.insert(f);
            let mut left = node.clone();
            if !left.old.contains(&l) {
                left.new.insert(l);
            }
            expand(left, store, done);
            let mut right = node;
            if !right.old.contains(&r) {
                right.new.insert(r);
            }
            expand(right, store, done);
        }
        Sub::Next(x) => {
            node.old.insert(f);
            node.next.insert(x);
            expand(node, store, done);
        }
        // φ U ψ = ψ ∨ (φ ∧ X(φ U ψ)); same unfolding for W, which merely
        // drops the eventuality obligation
        Sub::Until(l, r) | Sub::WeakUntil(l, r) => {
            node.old.insert(f);
            let mut cont = node.clone();
            if !cont.old.contains(&l) {
                cont.new.insert(l);
            }
            cont.next.insert(f);
            expand(cont, store, done);
            let mut settle = node;
            if !settle.old.contains(&r) {
                settle.new.insert(r);
            }
            expand(settle, store, done);
        }
    }
}

/// NNF LTL (propositions may be trace-indexed names) to a Büchi automaton
/// accepting exactly its models.
pub fn ltl_to_buchi(f: &LtlFormula) -> BuchiAutomaton {
    let mut store = Store::new();
    // intern the negated-prop duals up front so contradiction checks can
    // look them up by id
    let root = store.intern(f);
    let start = TNode {
        incoming: BTreeSet::from([INIT_MARK]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    };
    let mut done: Vec<TNode> = Vec::new();
    expand(start, &store, &mut done);

    // generalized acceptance: one set per until subformula
    let untils: Vec<(usize, usize)> = store
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Sub::Until(_, r) => Some((i, *r)),
            _ => None,
        })
        .collect();
    let gen_sets: Vec<Vec<bool>> = untils
        .iter()
        .map(|&(u, r)| {
            done.iter()
                .map(|n| n.old.contains(&r) || !n.old.contains(&u))
                .collect()
        })
        .collect();

    let label_of = |n: &TNode| -> LabelCond {
        let mut cond = LabelCond::default();
        for &f in &n.old {
            match store.nodes[f] {
                Sub::Prop(p) => cond.pos |= 1 << p,
                Sub::NegProp(p) => cond.neg |= 1 << p,
                _ => {}
            }
        }
        cond
    };

    let m = gen_sets.len();
    let counters = m.max(1);
    // state (node, counter); counter m is the "all sets seen" flash
    let idx = |node: usize, c: usize| node * (counters + 1) + c;
    let num = done.len() * (counters + 1);
    let mut arcs: Vec<Vec<(LabelCond, usize)>> = vec![Vec::new(); num];
    let mut accepting = vec![false; num];

    for (target, node) in done.iter().enumerate() {
        let cond = label_of(node);
        for &src in &node.incoming {
            if src == INIT_MARK {
                continue;
            }
            for c in 0..=counters {
                let base = if c == counters { 0 } else { c };
                let next_c = if m == 0 {
                    counters // no eventualities: every step flashes
                } else if gen_sets[base][target] {
                    base + 1
                } else {
                    base
                };
                arcs[idx(src, c)].push((cond, idx(target, next_c)));
            }
        }
    }
    for node in 0..done.len() {
        accepting[idx(node, counters)] = true;
    }
    // a virtual initial state keeps the first letter's constraint on an arc
    let virt = num;
    arcs.push(Vec::new());
    accepting.push(false);
    for (target, node) in done.iter().enumerate() {
        if node.incoming.contains(&INIT_MARK) {
            let cond = label_of(node);
            let base = 0;
            let next_c = if m == 0 {
                counters
            } else if gen_sets[base][target] {
                base + 1
            } else {
                base
            };
            arcs[virt].push((cond, idx(target, next_c)));
        }
    }
    BuchiAutomaton {
        aps: store.aps,
        initial: vec![virt],
        accepting,
        arcs,
    }
}

// ---------------------------------------------------------------------------
// Nested DFS
// ---------------------------------------------------------------------------

/// Searches an implicit Büchi graph for an accepting lasso; returns
/// `(prefix, cycle)` over graph states, the cycle entered at its first state.
pub fn find_accepting_lasso<S, FS, FA>(
    initial: Vec<S>,
    successors: FS,
    accepting: FA,
) -> Option<(Vec<S>, Vec<S>)>
where
    S: Clone + Eq + Hash,
    FS: Fn(&S) -> Vec<S>,
    FA: Fn(&S) -> bool,
{
    let mut blue: std::collections::HashSet<S> = std::collections::HashSet::new();
    let mut red: std::collections::HashSet<S> = std::collections::HashSet::new();

    for init in initial {
        if blue.contains(&init) {
            continue;
        }
        // iterative blue DFS keeping the current path
        let mut stack: Vec<(S, Vec<S>, usize)> = Vec::new();
        blue.insert(init.clone());
        stack.push((init.clone(), successors(&init), 0));
        let mut path: Vec<S> = vec![init];
        while let Some((state, succs, k)) = stack.last_mut() {
            if *k < succs.len() {
                let t = succs[*k].clone();
                *k += 1;
                if !blue.contains(&t) {
                    blue.insert(t.clone());
                    stack.push((t.clone(), successors(&t), 0));
                    path.push(t);
                }
            } else {
                let s = state.clone();
                stack.pop();
                path.pop();
                if accepting(&s) {
                    if let Some(cycle) =
                        red_search(&s, &path, &successors, &mut red)
                    {
                        // prefix: path from the root to s (s excluded; the
                        // cycle starts at s)
                        let cut = cycle
                            .first()
                            .and_then(|c| path.iter().position(|p| p == c))
                            .unwrap_or(path.len());
                        let mut prefix = path[..cut].to_vec();
                        if cut == path.len() {
                            prefix = path.clone();
                        }
                        return Some((prefix, cycle));
                    }
                }
            }
        }
    }
    None
}

/// Red DFS from `seed`: a path back to `seed` itself or to a state on the
/// current blue path closes an accepting cycle.
fn red_search<S, FS>(
    seed: &S,
    blue_path: &[S],
    successors: &FS,
    red: &mut std::collections::HashSet<S>,
) -> Option<Vec<S>>
where
    S: Clone + Eq + Hash,
    FS: Fn(&S) -> Vec<S>,
{
    let on_path: std::collections::HashSet<&S> = blue_path.iter().collect();
    let mut stack: Vec<(S, Vec<S>, usize)> = Vec::new();
    let mut rpath: Vec<S> = vec![seed.clone()];
    red.insert(seed.clone());
    stack.push((seed.clone(), successors(seed), 0));
    while let Some((_, succs, k)) = stack.last_mut() {
        if *k < succs.len() {
            let t = succs[*k].clone();
            *k += 1;
            if t == *seed {
                return Some(rpath.clone());
            }
            if let Some(i) = blue_path.iter().position(|p| p == &t) {
                // cycle: seed →(red path)→ t →(blue path)→ ... → seed
                let mut cycle = rpath.clone();
                cycle.extend(blue_path[i..].iter().cloned());
                // rotate so the cycle starts at its entry on the blue path
                let entry = blue_path[i].clone();
                let at = cycle.iter().position(|c| *c == entry).unwrap();
                cycle.rotate_left(at);
                return Some(cycle);
            }
            if !red.contains(&t) && !on_path.contains(&t) {
                red.insert(t.clone());
                stack.push((t.clone(), successors(&t), 0));
                rpath.push(t);
            }
        } else {
            stack.pop();
            rpath.pop();
        }
    }
    None
}

/// Does the automaton accept the infinite word denoted by the lasso?
pub fn buchi_accepts_lasso(aut: &BuchiAutomaton, trace: &LassoTrace) -> bool {
    let span = trace.stem.len() + trace.cycle.len();
    let masks: Vec<u64> = (0..span).map(|p| aut.letter_mask(trace.letter_at(p))).collect();
    let succ = |p: usize| {
        if p + 1 < span {
            p + 1
        } else {
            trace.stem.len()
        }
    };
    let inits: Vec<(usize, usize)> = aut.initial.iter().map(|&q| (q, 0usize)).collect();
    find_accepting_lasso(
        inits,
        |&(q, p)| {
            aut.arcs[q]
                .iter()
                .filter(|(c, _)| c.matches(masks[p]))
                .map(|&(_, q2)| (q2, succ(p)))
                .collect()
        },
        |&(q, _)| aut.accepting[q],
    )
    .is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_ltl_formula;
    use crate::traces::letter;

    fn tr(stem: &[&[&str]], cycle: &[&[&str]]) -> LassoTrace {
        LassoTrace::new(
            stem.iter().map(|l| letter(l)).collect(),
            cycle.iter().map(|l| letter(l)).collect(),
        )
    }

    #[test]
    fn globally_and_eventually() {
        let aut = ltl_to_buchi(&parse_ltl_formula("G p").unwrap());
        assert!(buchi_accepts_lasso(&aut, &tr(&[], &[&["p"]])));
        assert!(!buchi_accepts_lasso(&aut, &tr(&[&["p"]], &[&[]])));

        let aut = ltl_to_buchi(&parse_ltl_formula("F p").unwrap());
        assert!(buchi_accepts_lasso(&aut, &tr(&[&[], &[]], &[&["p"]])));
        assert!(!buchi_accepts_lasso(&aut, &tr(&[], &[&[]])));
    }

    #[test]
    fn until_needs_the_event() {
        let aut = ltl_to_buchi(&parse_ltl_formula("p U q").unwrap());
        assert!(buchi_accepts_lasso(&aut, &tr(&[&["p"], &["p"], &["q"]], &[&[]])));
        assert!(!buchi_accepts_lasso(&aut, &tr(&[], &[&["p"]])));
        // weak until tolerates p forever
        let aut = ltl_to_buchi(&parse_ltl_formula("p W q").unwrap());
        assert!(buchi_accepts_lasso(&aut, &tr(&[], &[&["p"]])));
        assert!(!buchi_accepts_lasso(&aut, &tr(&[&["p"]], &[&[]])));
    }

    #[test]
    fn agreement_with_eval_ltl() {
        use crate::team_eval::eval_ltl;
        let formulas = [
            "p", "!p", "X p", "F p", "G p", "p U q", "p W q",
            "(p | q) U (p & q)", "G (p | X q)", "F G p", "G F p",
            "(p U q) W !p",
        ];
        let traces = [
            tr(&[], &[&["p"]]),
            tr(&[], &[&["q"]]),
            tr(&[&["p"]], &[&["q"]]),
            tr(&[&["p", "q"], &[]], &[&["p"], &["q"]]),
            tr(&[], &[&["p"], &[]]),
            tr(&[&[], &["p", "q"]], &[&["q"], &["p"]]),
        ];
        for fs in formulas {
            let f = parse_ltl_formula(fs).unwrap();
            let aut = ltl_to_buchi(&f);
            for t in &traces {
                assert_eq!(
                    buchi_accepts_lasso(&aut, t),
                    eval_ltl(t, 0, &f),
                    "formula {fs} on {t:?}"
                );
            }
        }
    }

    #[test]
    fn indexed_props_are_distinct() {
        let aut = ltl_to_buchi(&parse_ltl_formula("G (p_x & !p_y)").unwrap());
        let t = tr(&[], &[&["p_x"]]);
        assert!(buchi_accepts_lasso(&aut, &t));
        let t = tr(&[], &[&["p_x", "p_y"]]);
        assert!(!buchi_accepts_lasso(&aut, &t));
    }
}
