//! Deterministic seeded generators for teams, formulas and Kripke
//! structures, and the property-suite engine behind `check-props` and the
//! acceptance tests.
//!
//! Default grid: at most 4 traces, stems ≤ 3, loops ≤ 2, 2 propositions,
//! formula depth ≤ 4 — small enough for the `3^|T|` cover enumeration and
//! subset quantifiers, large enough to exercise every clause.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::formula::{
    eliminate_flat_nonclassical, eliminate_generalized_atoms, fragment_flags,
    parse_team_formula_with, render, BoolRelationFamily, FamilyRegistry, Fragment,
    LtlFormula, TeamFormula,
};
use crate::hyper::{eval_hyper, eval_hyper_default, HyperAssignment, HyperFormula, UniformSeq};
use crate::kripke::{check_forall_k, traces_enumerate, KripkeStructure};
use crate::team_eval::{eval, eval_ltl, is_k_coherent_on};
use crate::traces::{horizon, LassoTrace, Letter, Team};
use crate::translate::{
    full_translate, kcoherent_body, kcoherent_translate, leftflat_translate,
    or_spine_len, source_bounds,
};

const GRID_TRACES: usize = 4;
const GRID_STEM: usize = 3;
const GRID_LOOP: usize = 2;
const GRID_AP: usize = 2;
const GRID_DEPTH: usize = 4;

fn ap_names(count: usize) -> Vec<String> {
    ["a", "b", "c", "e"]
        .iter()
        .take(count)
        .map(|s| s.to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

pub fn gen_team(
    seed: u64,
    max_traces: usize,
    stem_max: usize,
    loop_max: usize,
    ap_count: usize,
) -> Team {
    let mut rng = StdRng::seed_from_u64(seed);
    gen_team_with(&mut rng, max_traces, stem_max, loop_max, ap_count)
}

fn gen_letter(rng: &mut StdRng, ap: &[String]) -> Letter {
    ap.iter()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect()
}

fn gen_team_with(
    rng: &mut StdRng,
    max_traces: usize,
    stem_max: usize,
    loop_max: usize,
    ap_count: usize,
) -> Team {
    let ap = ap_names(ap_count);
    let n = rng.gen_range(0..=max_traces);
    let traces = (0..n)
        .map(|_| {
            let stem_len = rng.gen_range(0..=stem_max);
            let loop_len = rng.gen_range(1..=loop_max);
            LassoTrace::new(
                (0..stem_len).map(|_| gen_letter(rng, &ap)).collect(),
                (0..loop_len).map(|_| gen_letter(rng, &ap)).collect(),
            )
        })
        .collect();
    Team::new(traces, 0)
}

fn gen_nonempty_team_with(
    rng: &mut StdRng,
    max_traces: usize,
    stem_max: usize,
    loop_max: usize,
    ap_count: usize,
) -> Team {
    loop {
        let t = gen_team_with(rng, max_traces.max(1), stem_max, loop_max, ap_count);
        if !t.is_empty() {
            return t;
        }
    }
}

/// Which connectives the formula generator may emit.
#[derive(Clone, Copy, Debug)]
struct Profile {
    split: bool,
    bool_or: bool,
    bool_neg: bool,
    ne: bool,
    flat_all: bool,
    subteam_all: bool,
    dep: bool,
    inc: bool,
    gen_atom: bool,
    /// Force generated relation families to contain the empty relation, so
    /// the atom keeps the empty-team property.
    gen_atom_with_empty: bool,
    left_or: bool,
    left_flat_discipline: bool,
}

impl Profile {
    fn plain() -> Profile {
        Profile {
            split: true,
            bool_or: false,
            bool_neg: false,
            ne: false,
            flat_all: false,
            subteam_all: false,
            dep: false,
            inc: false,
            gen_atom: false,
            gen_atom_with_empty: false,
            left_or: false,
            left_flat_discipline: false,
        }
    }

    fn k_coherent() -> Profile {
        Profile {
            bool_or: true,
            bool_neg: true,
            ne: true,
            flat_all: true,
            subteam_all: true,
            dep: true,
            inc: true,
            gen_atom: true,
            ..Profile::plain()
        }
    }

    fn left_flat() -> Profile {
        Profile {
            bool_or: true,
            flat_all: true,
            left_flat_discipline: true,
            ..Profile::plain()
        }
    }

    fn bor_ne_flat() -> Profile {
        Profile {
            bool_or: true,
            ne: true,
            flat_all: true,
            ..Profile::plain()
        }
    }

    /// Downward closed: dep, Boolean or, flattening, subteam quantifiers.
    fn downward_closed() -> Profile {
        Profile {
            bool_or: true,
            flat_all: true,
            subteam_all: true,
            dep: true,
            ..Profile::plain()
        }
    }

    /// The ~-free, NE-free fragment with the empty-team property. The left
    /// disjunction is excluded (it demands a non-empty part), and generated
    /// relation families must contain the empty relation for the same
    /// reason.
    fn empty_team_safe() -> Profile {
        Profile {
            bool_or: true,
            flat_all: true,
            subteam_all: true,
            dep: true,
            inc: true,
            gen_atom: true,
            gen_atom_with_empty: true,
            ..Profile::plain()
        }
    }

    fn everything() -> Profile {
        Profile {
            left_or: true,
            ..Profile::k_coherent()
        }
    }
}

pub fn gen_formula(seed: u64, depth: usize, fragment: Fragment) -> TeamFormula {
    let mut rng = StdRng::seed_from_u64(seed);
    let profile = match fragment {
        Fragment::PlainTeamLtl => Profile::plain(),
        Fragment::KCoherentEligible => Profile::k_coherent(),
        Fragment::LeftFlat => Profile::left_flat(),
        Fragment::GeneralBorNeFlat => Profile::bor_ne_flat(),
        Fragment::Unsupported => Profile::everything(),
    };
    let f = gen_formula_with(&mut rng, depth, &profile, GRID_AP);
    debug_assert!(
        match fragment {
            Fragment::PlainTeamLtl => fragment_flags(&f).plain,
            Fragment::KCoherentEligible => fragment_flags(&f).k_coherent_eligible,
            Fragment::LeftFlat => fragment_flags(&f).left_flat,
            Fragment::GeneralBorNeFlat => fragment_flags(&f).general_bor_ne_flat,
            Fragment::Unsupported => true,
        },
        "generator left the requested fragment: {f}"
    );
    f
}

fn gen_ltl_arg(rng: &mut StdRng, ap: &[String]) -> LtlFormula {
    let p = ap[rng.gen_range(0..ap.len())].clone();
    match rng.gen_range(0..5) {
        0 => LtlFormula::NegProp(p),
        1 => LtlFormula::next(LtlFormula::Prop(p)),
        2 => {
            let q = ap[rng.gen_range(0..ap.len())].clone();
            LtlFormula::and(LtlFormula::Prop(p), LtlFormula::NegProp(q))
        }
        _ => LtlFormula::Prop(p),
    }
}

fn gen_relation_family(rng: &mut StdRng, with_empty: bool) -> BoolRelationFamily {
    let arity = rng.gen_range(1..=2usize);
    let tuples: Vec<Vec<bool>> = (0..1u32 << arity)
        .map(|m| (0..arity).map(|b| m >> b & 1 == 1).collect())
        .collect();
    let mut relations = BTreeSet::new();
    if with_empty {
        relations.insert(BTreeSet::new());
    }
    let count = rng.gen_range(1..=3usize);
    for _ in 0..count {
        let rel: BTreeSet<Vec<bool>> = tuples
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        relations.insert(rel);
    }
    // content-derived name so equal atoms resolve consistently
    let mut tag = 0u64;
    for rel in &relations {
        tag = tag.wrapping_mul(31).wrapping_add(rel.len() as u64 + 1);
        for tup in rel {
            for &b in tup {
                tag = tag.wrapping_mul(3).wrapping_add(b as u64 + 1);
            }
        }
    }
    BoolRelationFamily::new(&format!("g{tag:x}"), arity, relations).unwrap()
}

fn gen_atom(rng: &mut StdRng, profile: &Profile, ap: &[String]) -> TeamFormula {
    let mut choices: Vec<u8> = vec![0, 0, 1, 1, 2];
    if profile.ne {
        choices.push(3);
    }
    if profile.dep {
        choices.push(4);
        choices.push(4);
    }
    if profile.inc {
        choices.push(5);
        choices.push(5);
    }
    if profile.gen_atom {
        choices.push(6);
    }
    let p = ap[rng.gen_range(0..ap.len())].clone();
    match choices[rng.gen_range(0..choices.len())] {
        0 => TeamFormula::Prop(p),
        1 => TeamFormula::NegProp(p),
        2 => {
            if rng.gen_bool(0.5) {
                TeamFormula::True
            } else {
                TeamFormula::Prop(p)
            }
        }
        3 => TeamFormula::NonEmpty,
        4 => {
            let n = rng.gen_range(0..=2usize);
            TeamFormula::Dep(
                (0..n).map(|_| gen_ltl_arg(rng, ap)).collect(),
                gen_ltl_arg(rng, ap),
            )
        }
        5 => TeamFormula::Inc(vec![gen_ltl_arg(rng, ap)], vec![gen_ltl_arg(rng, ap)]),
        _ => {
            let fam = gen_relation_family(rng, profile.gen_atom_with_empty);
            let args = (0..fam.arity).map(|_| gen_ltl_arg(rng, ap)).collect();
            TeamFormula::GenAtom(std::rc::Rc::new(fam), args)
        }
    }
}

/// Flat class for left operands: literals, ∧, ∨, X, or `A1 ψ`.
fn gen_flat(rng: &mut StdRng, depth: usize, profile: &Profile, ap: &[String]) -> TeamFormula {
    let p = ap[rng.gen_range(0..ap.len())].clone();
    if depth == 0 {
        return if rng.gen_bool(0.5) {
            TeamFormula::Prop(p)
        } else {
            TeamFormula::NegProp(p)
        };
    }
    match rng.gen_range(0..6) {
        0 => TeamFormula::and(
            gen_flat(rng, depth - 1, profile, ap),
            gen_flat(rng, depth - 1, profile, ap),
        ),
        1 => TeamFormula::split_or(
            gen_flat(rng, depth - 1, profile, ap),
            gen_flat(rng, depth - 1, profile, ap),
        ),
        2 => TeamFormula::next(gen_flat(rng, depth - 1, profile, ap)),
        3 if profile.flat_all => {
            TeamFormula::flat_all(gen_formula_with(rng, depth - 1, profile, ap.len()))
        }
        _ => gen_flat(rng, 0, profile, ap),
    }
}

fn gen_formula_with(
    rng: &mut StdRng,
    depth: usize,
    profile: &Profile,
    ap_count: usize,
) -> TeamFormula {
    let ap = ap_names(ap_count);
    if depth == 0 || rng.gen_bool(0.25) {
        return gen_atom(rng, profile, &ap);
    }
    let mut ops: Vec<u8> = vec![0, 1, 5, 6, 7];
    if profile.split {
        ops.push(1);
    }
    if profile.bool_or {
        ops.push(2);
    }
    if profile.bool_neg {
        ops.push(3);
    }
    if profile.flat_all {
        ops.push(4);
    }
    if profile.subteam_all {
        ops.push(8);
    }
    if profile.left_or {
        ops.push(9);
    }
    let sub = |rng: &mut StdRng| gen_formula_with(rng, depth - 1, profile, ap_count);
    match ops[rng.gen_range(0..ops.len())] {
        0 => TeamFormula::and(sub(rng), sub(rng)),
        1 => TeamFormula::split_or(sub(rng), sub(rng)),
        2 => TeamFormula::bool_or(sub(rng), sub(rng)),
        3 => TeamFormula::bool_neg(sub(rng)),
        4 => TeamFormula::flat_all(sub(rng)),
        5 => TeamFormula::next(sub(rng)),
        6 | 7 => {
            let left = if profile.left_flat_discipline {
                gen_flat(rng, depth - 1, profile, &ap)
            } else {
                sub(rng)
            };
            if rng.gen_bool(0.5) {
                TeamFormula::until(left, sub(rng))
            } else {
                TeamFormula::weak_until(left, sub(rng))
            }
        }
        8 => TeamFormula::subteam_all(sub(rng)),
        _ => TeamFormula::left_or(sub(rng), sub(rng)),
    }
}

pub fn gen_kripke(seed: u64, max_states: usize, ap_count: usize) -> KripkeStructure {
    let mut rng = StdRng::seed_from_u64(seed);
    gen_kripke_with(&mut rng, max_states, ap_count)
}

fn gen_kripke_with(rng: &mut StdRng, max_states: usize, ap_count: usize) -> KripkeStructure {
    let ap = ap_names(ap_count);
    let n = rng.gen_range(1..=max_states);
    let labels: Vec<Letter> = (0..n).map(|_| gen_letter(rng, &ap)).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        let degree = rng.gen_range(1..=2usize.min(n));
        let mut targets = BTreeSet::new();
        while targets.len() < degree {
            targets.insert(rng.gen_range(0..n));
        }
        edges.extend(targets.into_iter().map(|v| (u, v)));
    }
    KripkeStructure::new(ap, labels, &edges, 0).unwrap()
}

pub fn collect_families(f: &TeamFormula) -> FamilyRegistry {
    fn walk(f: &TeamFormula, reg: &mut FamilyRegistry) {
        use TeamFormula::*;
        match f {
            GenAtom(fam, _) => reg.insert((**fam).clone()),
            And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r)
            | LeftOr(l, r) => {
                walk(l, reg);
                walk(r, reg);
            }
            Next(x) | BoolNeg(x) | FlatAll(x) | SubteamAll(x) => walk(x, reg),
            _ => {}
        }
    }
    let mut reg = FamilyRegistry::new();
    walk(f, &mut reg);
    reg
}

// ---------------------------------------------------------------------------
// Suite engine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum TrialOutcome {
    Pass,
    /// Passed only after one bound escalation (logged, expected rare).
    PassEscalated,
    Fail(String),
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub trials: u64,
    pub passes: u64,
    pub failures: u64,
    pub escalations: u64,
    pub first_counterexample: Option<String>,
    pub duration: Duration,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{}: {}/{} passed, {} failed, {} escalations, {:.2?}",
            self.name, self.passes, self.trials, self.failures, self.escalations,
            self.duration
        );
        if let Some(cx) = &self.first_counterexample {
            let _ = write!(s, "\n  first counterexample: {cx}");
        }
        s
    }
}

struct Ctx {
    rng: StdRng,
}

impl Ctx {
    fn team(&mut self) -> Team {
        gen_team_with(&mut self.rng, GRID_TRACES, GRID_STEM, GRID_LOOP, GRID_AP)
    }

    fn nonempty_team(&mut self, max_traces: usize) -> Team {
        gen_nonempty_team_with(&mut self.rng, max_traces, GRID_STEM, GRID_LOOP, GRID_AP)
    }

    fn formula(&mut self, depth: usize, profile: &Profile) -> TeamFormula {
        gen_formula_with(&mut self.rng, depth, profile, GRID_AP)
    }
}

type Trial = fn(&mut Ctx) -> TrialOutcome;

fn show_case(team: &Team, f: &TeamFormula, detail: &str) -> String {
    let traces: Vec<String> = team
        .traces()
        .iter()
        .map(|t| format!("{:?}+{:?}", t.stem, t.cycle))
        .collect();
    format!("formula {} on team [{}]: {detail}", render(f), traces.join(" "))
}

/// Greedy shrinking: drop traces, shorten stems and loops, then re-check.
fn shrink_team<FC>(team: &Team, fails: FC) -> Team
where
    FC: Fn(&Team) -> bool,
{
    let mut cur = team.clone();
    loop {
        let mut candidates: Vec<Team> = Vec::new();
        for drop in 0..cur.len() {
            let traces: Vec<LassoTrace> = cur
                .traces()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, t)| t.clone())
                .collect();
            candidates.push(Team::new(traces, cur.index));
        }
        for shorten in 0..cur.len() {
            let mut traces: Vec<LassoTrace> = cur.traces().to_vec();
            let t = &mut traces[shorten];
            if !t.stem.is_empty() {
                let mut t2 = t.clone();
                t2.stem.pop();
                traces[shorten] = t2;
                candidates.push(Team::new(traces, cur.index));
            } else if t.cycle.len() > 1 {
                let mut t2 = t.clone();
                t2.cycle.pop();
                traces[shorten] = t2;
                candidates.push(Team::new(traces, cur.index));
            }
        }
        match candidates.into_iter().find(|c| *c != cur && fails(c)) {
            Some(smaller) => cur = smaller,
            None => return cur,
        }
    }
}

fn subformulas(f: &TeamFormula) -> Vec<TeamFormula> {
    use TeamFormula::*;
    match f {
        And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r)
        | LeftOr(l, r) => vec![(**l).clone(), (**r).clone()],
        Next(x) | BoolNeg(x) | FlatAll(x) | SubteamAll(x) => vec![(**x).clone()],
        _ => Vec::new(),
    }
}

/// Shrinks `(team, formula)` against a failing predicate, preserving it.
fn shrink_case<FC>(team: &Team, f: &TeamFormula, fails: FC) -> (Team, TeamFormula)
where
    FC: Fn(&Team, &TeamFormula) -> bool,
{
    let mut cf = f.clone();
    let mut ct = shrink_team(team, |t| fails(t, &cf));
    loop {
        match subformulas(&cf).into_iter().find(|s| fails(&ct, s)) {
            Some(smaller) => {
                cf = smaller;
                ct = shrink_team(&ct, |t| fails(t, &cf));
            }
            None => return (ct, cf),
        }
    }
}

// ---------------------------------------------------------------------------
// The suites
// ---------------------------------------------------------------------------

fn suite_roundtrip(ctx: &mut Ctx) -> TrialOutcome {
    let f = ctx.formula(GRID_DEPTH, &Profile::everything());
    let reg = collect_families(&f);
    let text = render(&f);
    match parse_team_formula_with(&text, &reg) {
        Ok(back) if back == f => TrialOutcome::Pass,
        Ok(back) => TrialOutcome::Fail(format!(
            "{text} re-parsed as {}",
            render(&back)
        )),
        Err(e) => TrialOutcome::Fail(format!("{text} failed to re-parse: {e}")),
    }
}

fn check_downward_closure(team: &Team, f: &TeamFormula) -> bool {
    // a violation: the team satisfies f but some subteam does not
    if !eval(team.traces(), team.index, f) {
        return false;
    }
    let n = team.len();
    (0..1u32 << n).any(|mask| {
        let sub: Vec<LassoTrace> = team
            .traces()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, t)| t.clone())
            .collect();
        !eval(&sub, team.index, f)
    })
}

fn suite_downward_closure(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let f = ctx.formula(GRID_DEPTH, &Profile::downward_closed());
    if check_downward_closure(&team, &f) {
        let (t, g) = shrink_case(&team, &f, check_downward_closure);
        TrialOutcome::Fail(show_case(&t, &g, "satisfied, but a subteam fails"))
    } else {
        TrialOutcome::Pass
    }
}

/// Deliberately wrong claim (upward closure); the harness must find
/// counterexamples.
fn suite_downward_closure_mutated(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.nonempty_team(GRID_TRACES);
    let f = ctx.formula(2, &Profile::downward_closed());
    let upward_violated = |team: &Team, f: &TeamFormula| {
        !eval(team.traces(), team.index, f)
            && team
                .traces()
                .iter()
                .any(|t| eval(std::slice::from_ref(t), team.index, f))
    };
    if upward_violated(&team, &f) {
        let (t, g) = shrink_case(&team, &f, upward_violated);
        TrialOutcome::Fail(show_case(&t, &g, "a singleton satisfies, the team does not"))
    } else {
        TrialOutcome::Pass
    }
}

fn suite_empty_team(ctx: &mut Ctx) -> TrialOutcome {
    let f = ctx.formula(GRID_DEPTH, &Profile::empty_team_safe());
    if eval(&[], 0, &f) {
        TrialOutcome::Pass
    } else {
        TrialOutcome::Fail(format!("empty team falsifies {}", render(&f)))
    }
}

fn suite_singleton_equivalence(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.nonempty_team(1);
    let f = ctx.formula(GRID_DEPTH, &Profile::plain());
    let ltl = f.to_ltl().expect("plain profile");
    let t = &team.traces()[0];
    for i in 0..GRID_STEM + 2 * GRID_LOOP {
        if eval(std::slice::from_ref(t), i, &f) != eval_ltl(t, i, &ltl) {
            return TrialOutcome::Fail(show_case(
                &team,
                &f,
                &format!("team and trace semantics disagree at {i}"),
            ));
        }
    }
    TrialOutcome::Pass
}

fn suite_flatness_asub(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let f = TeamFormula::flat_all(ctx.formula(GRID_DEPTH - 1, &Profile::k_coherent()));
    let whole = eval(team.traces(), 0, &f);
    let each = team
        .traces()
        .iter()
        .all(|t| eval(std::slice::from_ref(t), 0, &f));
    if whole == each {
        TrialOutcome::Pass
    } else {
        TrialOutcome::Fail(show_case(&team, &f, "A1 is not flat here"))
    }
}

fn suite_boolneg_complement(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let f = ctx.formula(GRID_DEPTH, &Profile::k_coherent());
    let pos = eval(team.traces(), 0, &f);
    let neg = eval(team.traces(), 0, &TeamFormula::bool_neg(f.clone()));
    if pos != neg {
        TrialOutcome::Pass
    } else {
        TrialOutcome::Fail(show_case(&team, &f, "~ is not a strict complement"))
    }
}

fn suite_periodicity(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.nonempty_team(GRID_TRACES);
    let f = ctx.formula(GRID_DEPTH, &Profile::k_coherent());
    let h = horizon(team.traces(), 0).expect("non-empty");
    for k in h.stem_len..h.stem_len + h.period {
        if eval(team.traces(), k, &f) != eval(team.traces(), k + h.period, &f) {
            return TrialOutcome::Fail(show_case(
                &team,
                &f,
                &format!("eval at {k} differs from {}", k + h.period),
            ));
        }
    }
    TrialOutcome::Pass
}

fn suite_atom_elimination(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let mut profile = Profile::downward_closed();
    profile.inc = true;
    profile.gen_atom = true;
    profile.ne = true;
    let f = ctx.formula(3, &profile);
    let expanded = match eliminate_generalized_atoms(&f) {
        Ok(e) => e,
        Err(e) => return TrialOutcome::Fail(format!("elimination failed on {}: {e}", render(&f))),
    };
    let disagree = |team: &Team, f: &TeamFormula| match eliminate_generalized_atoms(f) {
        Ok(e) => eval(team.traces(), 0, f) != eval(team.traces(), 0, &e),
        Err(_) => false,
    };
    if eval(team.traces(), 0, &f) != eval(team.traces(), 0, &expanded) {
        let (t, g) = shrink_case(&team, &f, disagree);
        TrialOutcome::Fail(show_case(&t, &g, "atom elimination changes the verdict"))
    } else {
        TrialOutcome::Pass
    }
}

fn suite_asub_elimination(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let f = ctx.formula(3, &Profile::bor_ne_flat());
    // strip A1 so the eliminator's precondition holds
    fn strip(f: &TeamFormula) -> TeamFormula {
        use TeamFormula::*;
        match f {
            FlatAll(x) => strip(x),
            And(l, r) => TeamFormula::and(strip(l), strip(r)),
            SplitOr(l, r) => TeamFormula::split_or(strip(l), strip(r)),
            BoolOr(l, r) => TeamFormula::bool_or(strip(l), strip(r)),
            Next(x) => TeamFormula::next(strip(x)),
            Until(l, r) => TeamFormula::until(strip(l), strip(r)),
            WeakUntil(l, r) => TeamFormula::weak_until(strip(l), strip(r)),
            other => other.clone(),
        }
    }
    let stripped = strip(&f);
    let flat = match eliminate_flat_nonclassical(&stripped) {
        Ok(g) => g,
        Err(e) => {
            return TrialOutcome::Fail(format!("elimination failed on {}: {e}", render(&stripped)))
        }
    };
    let lhs = TeamFormula::flat_all(stripped.clone());
    let rhs = TeamFormula::flat_all(TeamFormula::from_ltl(&flat));
    // equivalence under A1 on every subteam of the grid team, which covers
    // the singleton and empty cases the rewrite rules promise
    for mask in 0..1u32 << team.len() {
        let sub: Vec<LassoTrace> = team
            .traces()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, t)| t.clone())
            .collect();
        if eval(&sub, 0, &lhs) != eval(&sub, 0, &rhs) {
            return TrialOutcome::Fail(show_case(
                &Team::new(sub, 0),
                &stripped,
                "A1-elimination changes the verdict",
            ));
        }
    }
    TrialOutcome::Pass
}

fn surjections(k: usize, n: usize) -> Vec<Vec<usize>> {
    // all maps {0..k} -> {0..n} covering all of {0..n}
    let mut maps = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for m in &maps {
            for t in 0..n {
                let mut m = m.clone();
                m.push(t);
                next.push(m);
            }
        }
        maps = next;
    }
    maps.into_iter()
        .filter(|m| (0..n).all(|t| m.contains(&t)))
        .collect()
}

fn suite_lemma9(ctx: &mut Ctx) -> TrialOutcome {
    let k = 1 + (ctx.rng.gen_range(0..3usize));
    let team = ctx.nonempty_team(k);
    let f = ctx.formula(3, &Profile::k_coherent());
    let i = ctx.rng.gen_range(0..2usize);
    let vars: Vec<String> = (1..=k).map(|j| format!("pi{j}")).collect();
    let body = kcoherent_body(&f, &vars);
    let open = HyperFormula::new(vec![], body);
    let direct = eval(team.traces(), i, &f);
    // one covering assignment suffices; test them all at this scale
    for map in surjections(k, team.len()) {
        let mut asg = HyperAssignment::default();
        for (j, v) in vars.iter().enumerate() {
            asg.traces.insert(v.clone(), map[j]);
        }
        match eval_hyper_default(team.traces(), &asg, i, &open) {
            Ok(h) if h == direct => {}
            Ok(_) => {
                return TrialOutcome::Fail(show_case(
                    &team,
                    &f,
                    &format!("open translation disagrees at {i} under {map:?}, k = {k}"),
                ))
            }
            Err(e) => return TrialOutcome::Fail(format!("hyper evaluation failed: {e}")),
        }
    }
    if crate::kripke::is_downward_closed_syntactic(&f) {
        let closed = kcoherent_translate(&f, k).expect("fragment checked");
        match eval_hyper_default(team.traces(), &HyperAssignment::default(), i, &closed) {
            Ok(h) if h == direct => {}
            Ok(_) => {
                return TrialOutcome::Fail(show_case(
                    &team,
                    &f,
                    &format!("closed ∀^{k} form disagrees at {i}"),
                ))
            }
            Err(e) => return TrialOutcome::Fail(format!("hyper evaluation failed: {e}")),
        }
    }
    TrialOutcome::Pass
}

fn suite_thm13(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.team();
    let f = ctx.formula(GRID_DEPTH, &Profile::left_flat());
    let i = ctx.rng.gen_range(0..2usize);
    let t = match leftflat_translate(&f) {
        Ok(t) => t,
        Err(e) => return TrialOutcome::Fail(format!("translation failed on {}: {e}", render(&f))),
    };
    let mut asg = HyperAssignment::default();
    asg.uniform.insert(t.r_name.clone(), UniformSeq::exactly_at(i));
    let bounds = source_bounds(team.traces(), i, &f);
    match eval_hyper(team.traces(), &asg, 0, &t.open, &bounds) {
        Ok(h) if h == eval(team.traces(), i, &f) => TrialOutcome::Pass,
        Ok(_) => TrialOutcome::Fail(show_case(&team, &f, &format!("left-flat translation disagrees at {i}"))),
        Err(e) => TrialOutcome::Fail(format!("hyper evaluation failed: {e}")),
    }
}

/// Reconstructs the thm7 trial inputs for one trial seed; test scaffolding.
pub fn gen_formula_debug(trial_seed: u64) -> (Team, TeamFormula, usize) {
    let mut ctx = Ctx {
        rng: StdRng::seed_from_u64(trial_seed),
    };
    let team = ctx.nonempty_team(3);
    let f = ctx.formula(3, &Profile::bor_ne_flat());
    let i = ctx.rng.gen_range(0..2usize);
    (team, f, i)
}

fn suite_thm7(ctx: &mut Ctx) -> TrialOutcome {
    let team = ctx.nonempty_team(3);
    let f = ctx.formula(3, &Profile::bor_ne_flat());
    let i = ctx.rng.gen_range(0..2usize);
    let t = match full_translate(&f) {
        Ok(t) => t,
        Err(e) => return TrialOutcome::Fail(format!("translation failed on {}: {e}", render(&f))),
    };
    let direct = eval(team.traces(), i, &f);
    let bounds = source_bounds(team.traces(), i, &f);
    match eval_hyper(team.traces(), &HyperAssignment::default(), i, &t.formula, &bounds) {
        Ok(h) if h == direct => TrialOutcome::Pass,
        Ok(_) => {
            // escalate the bounds once before declaring a disagreement
            match eval_hyper(
                team.traces(),
                &HyperAssignment::default(),
                i,
                &t.formula,
                &bounds.escalated(),
            ) {
                Ok(h2) if h2 == direct => TrialOutcome::PassEscalated,
                Ok(_) => TrialOutcome::Fail(show_case(
                    &team,
                    &f,
                    &format!("full translation disagrees at {i} even after escalation"),
                )),
                Err(e) => TrialOutcome::Fail(format!("hyper evaluation failed: {e}")),
            }
        }
        Err(e) => TrialOutcome::Fail(format!("hyper evaluation failed: {e}")),
    }
}

fn suite_buchi_ltl(ctx: &mut Ctx) -> TrialOutcome {
    let f = ctx.formula(GRID_DEPTH, &Profile::plain());
    let ltl = f.to_ltl().expect("plain profile");
    let aut = crate::buchi::ltl_to_buchi(&ltl);
    let team = ctx.nonempty_team(2);
    for t in team.traces() {
        if crate::buchi::buchi_accepts_lasso(&aut, t) != eval_ltl(t, 0, &ltl) {
            return TrialOutcome::Fail(format!(
                "automaton and evaluator disagree on {} over {:?}+{:?}",
                render(&f),
                t.stem,
                t.cycle
            ));
        }
    }
    TrialOutcome::Pass
}

fn suite_kpipeline(ctx: &mut Ctx) -> TrialOutcome {
    let k_struct = gen_kripke_with(&mut ctx.rng, 4, GRID_AP);
    let arity = 1 + ctx.rng.gen_range(0..2usize);
    let f = ctx.formula(2, &Profile::k_coherent());
    let res = match check_forall_k(&k_struct, &f, arity) {
        Ok(r) => r,
        Err(e) => return TrialOutcome::Fail(format!("pipeline failed on {}: {e}", render(&f))),
    };
    let vars: Vec<String> = (1..=arity).map(|j| format!("pi{j}")).collect();
    let body = kcoherent_body(&f, &vars);
    // tuple evaluation through a merged trace: indexed propositions of the
    // body read component j's letters under the prefix `@pij`
    let body_ltl = crate::kripke::body_to_ltl(&body);
    let check_tuple = |traces: &[LassoTrace], tuple: &[usize]| -> bool {
        let components: Vec<&LassoTrace> = tuple.iter().map(|&t| &traces[t]).collect();
        let stem = components.iter().map(|t| t.stem.len()).max().unwrap_or(0);
        let cycle = components
            .iter()
            .map(|t| t.cycle.len())
            .fold(1, crate::traces::lcm);
        let letter = |pos: usize| -> Letter {
            components
                .iter()
                .zip(vars.iter())
                .flat_map(|(t, v)| {
                    t.letter_at(pos).iter().map(move |p| format!("{p}@{v}"))
                })
                .collect()
        };
        let merged = LassoTrace::new(
            (0..stem).map(letter).collect(),
            (stem..stem + cycle).map(letter).collect(),
        );
        eval_ltl(&merged, 0, &body_ltl)
    };
    if let Some(cx) = &res.counterexample {
        // the counterexample must itself violate the body
        let tuple: Vec<usize> = (0..arity).collect();
        if check_tuple(cx, &tuple) {
            return TrialOutcome::Fail(show_case(
                &Team::new(cx.clone(), 0),
                &f,
                "counterexample re-verification says the body holds",
            ));
        }
    }
    // brute force over enumerated lasso tuples; loop bound 4 so every
    // simple cycle of a 4-state structure contributes
    let pool = traces_enumerate(&k_struct, 2, 4);
    if pool.is_empty() {
        return TrialOutcome::Fail(format!(
            "structure with {} states yields no lassos at the enumeration bounds",
            k_struct.states.len()
        ));
    }
    let mut tuple = vec![0usize; arity];
    loop {
        if !check_tuple(&pool, &tuple) {
            if res.holds {
                return TrialOutcome::Fail(show_case(
                    &Team::new(pool.clone(), 0),
                    &f,
                    &format!("pipeline says holds, tuple {tuple:?} violates the body"),
                ));
            }
            break;
        }
        let mut j = 0;
        loop {
            if j == arity {
                break;
            }
            tuple[j] += 1;
            if tuple[j] < pool.len() {
                break;
            }
            tuple[j] = 0;
            j += 1;
        }
        if j == arity {
            break;
        }
    }
    TrialOutcome::Pass
}

fn suite_size_bounds(ctx: &mut Ctx) -> TrialOutcome {
    // measured constant for the linear-size claims of both translators
    const C: usize = 60;
    let f = ctx.formula(GRID_DEPTH, &Profile::bor_ne_flat());
    if let Ok(t) = full_translate(&f) {
        if t.formula.size() > C * f.size() {
            return TrialOutcome::Fail(format!(
                "full translation of {} has size {} > {C}·{}",
                render(&f),
                t.formula.size(),
                f.size()
            ));
        }
    }
    let g = ctx.formula(GRID_DEPTH, &Profile::left_flat());
    if let Ok(t) = leftflat_translate(&g) {
        if t.closed.size() > C * g.size() {
            return TrialOutcome::Fail(format!(
                "left-flat translation of {} has size {} > {C}·{}",
                render(&g),
                t.closed.size(),
                g.size()
            ));
        }
    }
    // exact cover counts: 3^k disjuncts per split node
    let k = 1 + ctx.rng.gen_range(0..3usize);
    let split = TeamFormula::split_or(
        ctx.formula(1, &Profile::plain()),
        ctx.formula(1, &Profile::plain()),
    );
    let h = kcoherent_translate(&split, k).expect("plain fragment");
    if or_spine_len(&h.body) != 3usize.pow(k as u32) {
        return TrialOutcome::Fail(format!(
            "cover count for {} at k = {k}: {} ≠ 3^{k}",
            render(&split),
            or_spine_len(&h.body)
        ));
    }
    TrialOutcome::Pass
}

fn suite_coherence_flat(ctx: &mut Ctx) -> TrialOutcome {
    // flat formulas are 1-coherent on every team
    let team = ctx.team();
    let f = TeamFormula::flat_all(ctx.formula(2, &Profile::k_coherent()));
    if is_k_coherent_on(team.traces(), 0, &f, 1) {
        TrialOutcome::Pass
    } else {
        TrialOutcome::Fail(show_case(&team, &f, "A1-formula is not 1-coherent"))
    }
}

const SUITES: &[(&str, Trial)] = &[
    ("roundtrip", suite_roundtrip),
    ("downward-closure", suite_downward_closure),
    ("downward-closure:mutated", suite_downward_closure_mutated),
    ("empty-team", suite_empty_team),
    ("singleton-equivalence", suite_singleton_equivalence),
    ("flatness-asub", suite_flatness_asub),
    ("boolneg-complement", suite_boolneg_complement),
    ("periodicity", suite_periodicity),
    ("atom-elimination", suite_atom_elimination),
    ("asub-elimination", suite_asub_elimination),
    ("lemma9", suite_lemma9),
    ("thm13", suite_thm13),
    ("thm7", suite_thm7),
    ("buchi-ltl", suite_buchi_ltl),
    ("kpipeline", suite_kpipeline),
    ("size-bounds", suite_size_bounds),
    ("coherence-flat", suite_coherence_flat),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

#[derive(thiserror::Error, Debug)]
#[error("unknown suite {0:?} (available: {})", suite_names().join(", "))]
pub struct UnknownSuite(pub String);

pub fn run_suite(name: &str, trials: u64, seed: u64) -> Result<SuiteReport, UnknownSuite> {
    let Some((_, trial)) = SUITES.iter().find(|(n, _)| *n == name) else {
        return Err(UnknownSuite(name.to_string()));
    };
    let start = Instant::now();
    let mut report = SuiteReport {
        name: name.to_string(),
        trials,
        passes: 0,
        failures: 0,
        escalations: 0,
        first_counterexample: None,
        duration: Duration::ZERO,
    };
    for t in 0..trials {
        let trial_seed = seed
            .wrapping_add(t.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(1);
        let mut ctx = Ctx {
            rng: StdRng::seed_from_u64(trial_seed),
        };
        match trial(&mut ctx) {
            TrialOutcome::Pass => report.passes += 1,
            TrialOutcome::PassEscalated => {
                report.passes += 1;
                report.escalations += 1;
            }
            TrialOutcome::Fail(cx) => {
                report.failures += 1;
                if report.first_counterexample.is_none() {
                    report.first_counterexample = Some(format!("seed {trial_seed}: {cx}"));
                }
            }
        }
    }
    report.duration = start.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = gen_team(7, 4, 3, 2, 2);
        let b = gen_team(7, 4, 3, 2, 2);
        assert_eq!(a, b);
        let f = gen_formula(7, 3, Fragment::KCoherentEligible);
        let g = gen_formula(7, 3, Fragment::KCoherentEligible);
        assert_eq!(f, g);
    }

    #[test]
    fn generators_respect_fragments() {
        for seed in 0..60 {
            let f = gen_formula(seed, 4, Fragment::LeftFlat);
            assert!(fragment_flags(&f).left_flat, "{}", render(&f));
            let f = gen_formula(seed, 4, Fragment::GeneralBorNeFlat);
            assert!(fragment_flags(&f).general_bor_ne_flat, "{}", render(&f));
            let f = gen_formula(seed, 0, Fragment::PlainTeamLtl);
            assert_eq!(f.temporal_depth(), 0);
        }
    }

    #[test]
    fn suites_smoke() {
        for name in [
            "roundtrip",
            "downward-closure",
            "empty-team",
            "singleton-equivalence",
            "flatness-asub",
            "boolneg-complement",
            "periodicity",
            "atom-elimination",
            "asub-elimination",
            "coherence-flat",
        ] {
            let r = run_suite(name, 25, 11).unwrap();
            assert!(r.ok(), "{}", r.line());
        }
    }

    #[test]
    fn oracle_suites_smoke() {
        for name in ["lemma9", "thm13", "buchi-ltl", "size-bounds"] {
            let r = run_suite(name, 20, 23).unwrap();
            assert!(r.ok(), "{}", r.line());
        }
        let r = run_suite("thm7", 6, 23).unwrap();
        assert!(r.ok(), "{}", r.line());
        let r = run_suite("kpipeline", 6, 23).unwrap();
        assert!(r.ok(), "{}", r.line());
    }

    #[test]
    fn mutation_mode_reports_counterexamples() {
        let r = run_suite("downward-closure:mutated", 200, 5).unwrap();
        assert!(r.failures > 0, "the broken property should be caught");
        assert!(r.first_counterexample.is_some());
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("nope", 1, 0).is_err());
    }
}
