//! Counter-machine hardness instances: the structure whose traces encode
//! machine configurations, the formulas enforcing lossy / non-lossy
//! b-recurring computation, the satisfiability embedding, and a run-to-team
//! encoder for positive tests.
//!
//! Counter values are trace cardinalities: the value of counter `s` at step
//! `j` is the number of distinct trace suffixes carrying `c_s` at `j`. The
//! dummy proposition `d` keeps counter traces with equal suffixes apart.

use std::collections::BTreeSet;
use std::fmt;

use crate::formula::{LtlFormula, TeamFormula};
use crate::kripke::KripkeStructure;
use crate::traces::{LassoTrace, Letter, Team};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Counter {
    L,
    M,
    R,
}

impl Counter {
    pub const ALL: [Counter; 3] = [Counter::L, Counter::M, Counter::R];

    pub fn prop(&self) -> &'static str {
        match self {
            Counter::L => "c_l",
            Counter::M => "c_m",
            Counter::R => "c_r",
        }
    }

    fn index(&self) -> usize {
        match self {
            Counter::L => 0,
            Counter::M => 1,
            Counter::R => 2,
        }
    }

    fn parse(s: &str) -> Option<Counter> {
        match s {
            "l" => Some(Counter::L),
            "m" => Some(Counter::M),
            "r" => Some(Counter::R),
            _ => None,
        }
    }
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Counter::L => 'l',
            Counter::M => 'm',
            Counter::R => 'r',
        };
        write!(f, "{c}")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Instruction {
    Inc(Counter, [usize; 2]),
    Dec(Counter, [usize; 2]),
    IfZero(Counter, usize, usize),
}

/// Non-deterministic 3-counter machine: an indexed instruction list.
#[derive(Clone, Debug)]
pub struct CounterMachine {
    pub instructions: Vec<Instruction>,
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum MachineError {
    #[error("machine has no instructions")]
    Empty,
    #[error("instruction {at}: target label {label} out of range (n = {n})")]
    BadLabel { at: usize, label: usize, n: usize },
    #[error("line {0}: {1}")]
    Parse(usize, String),
}

impl CounterMachine {
    pub fn new(instructions: Vec<Instruction>) -> Result<CounterMachine, MachineError> {
        let n = instructions.len();
        if n == 0 {
            return Err(MachineError::Empty);
        }
        for (at, ins) in instructions.iter().enumerate() {
            let targets = match ins {
                Instruction::Inc(_, t) | Instruction::Dec(_, t) => t.to_vec(),
                Instruction::IfZero(_, a, b) => vec![*a, *b],
            };
            if let Some(&label) = targets.iter().find(|&&t| t >= n) {
                return Err(MachineError::BadLabel { at, label, n });
            }
        }
        Ok(CounterMachine { instructions })
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// One instruction per line:
    /// `0: INC l -> {1,2}` / `1: DEC m -> {0,0}` / `2: IFZ r ? 0 : 1`.
    pub fn parse(text: &str) -> Result<CounterMachine, MachineError> {
        let mut instructions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| MachineError::Parse(lineno + 1, msg.to_string());
            let (idx, rest) = line
                .split_once(':')
                .ok_or_else(|| err("expected 'index: INSTR'"))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| err("bad instruction index"))?;
            if idx != instructions.len() {
                return Err(err("instruction indices must be consecutive from 0"));
            }
            let rest = rest.trim();
            let mut words = rest.split_whitespace();
            let op = words.next().ok_or_else(|| err("missing opcode"))?;
            let counter = words
                .next()
                .and_then(Counter::parse)
                .ok_or_else(|| err("expected counter l, m or r"))?;
            let tail: String = words.collect::<Vec<_>>().join(" ");
            let ins = match op {
                "INC" | "DEC" => {
                    let tail = tail
                        .strip_prefix("->")
                        .ok_or_else(|| err("expected '-> {j1,j2}'"))?
                        .trim();
                    let tail = tail
                        .strip_prefix('{')
                        .and_then(|t| t.strip_suffix('}'))
                        .ok_or_else(|| err("expected '{j1,j2}'"))?;
                    let mut parts = tail.split(',').map(|p| p.trim().parse::<usize>());
                    let j1 = parts
                        .next()
                        .and_then(Result::ok)
                        .ok_or_else(|| err("bad target"))?;
                    let j2 = parts
                        .next()
                        .and_then(Result::ok)
                        .ok_or_else(|| err("bad target"))?;
                    if op == "INC" {
                        Instruction::Inc(counter, [j1, j2])
                    } else {
                        Instruction::Dec(counter, [j1, j2])
                    }
                }
                "IFZ" => {
                    let (a, b) = tail
                        .strip_prefix('?')
                        .and_then(|t| t.split_once(':'))
                        .ok_or_else(|| err("expected '? j1 : j2'"))?;
                    Instruction::IfZero(
                        counter,
                        a.trim().parse().map_err(|_| err("bad target"))?,
                        b.trim().parse().map_err(|_| err("bad target"))?,
                    )
                }
                other => return Err(err(&format!("unknown opcode {other:?}"))),
            };
            instructions.push(ins);
        }
        CounterMachine::new(instructions)
    }

    pub fn render(&self) -> String {
        self.instructions
            .iter()
            .enumerate()
            .map(|(i, ins)| match ins {
                Instruction::Inc(c, [a, b]) => format!("{i}: INC {c} -> {{{a},{b}}}"),
                Instruction::Dec(c, [a, b]) => format!("{i}: DEC {c} -> {{{a},{b}}}"),
                Instruction::IfZero(c, a, b) => format!("{i}: IFZ {c} ? {a} : {b}"),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn ap(&self) -> Vec<String> {
        let mut ap: Vec<String> = Counter::ALL.iter().map(|c| c.prop().to_string()).collect();
        ap.push("d".to_string());
        ap.extend((0..self.len()).map(|i| i.to_string()));
        ap
    }
}

// ---------------------------------------------------------------------------
// The structure K_I
// ---------------------------------------------------------------------------

/// States are `(i, j, k, t, l)` with the instruction index plus one flag per
/// counter and the dummy; the transition relation is total. `16n` states.
pub fn build_kripke(machine: &CounterMachine) -> KripkeStructure {
    let n = machine.len();
    let mut labels: Vec<Letter> = Vec::with_capacity(16 * n);
    for i in 0..n {
        for flags in 0..16u32 {
            let mut label = Letter::new();
            label.insert(i.to_string());
            for (bit, c) in Counter::ALL.iter().enumerate() {
                if flags >> bit & 1 == 1 {
                    label.insert(c.prop().to_string());
                }
            }
            if flags >> 3 & 1 == 1 {
                label.insert("d".to_string());
            }
            labels.push(label);
        }
    }
    let total = 16 * n;
    let edges: Vec<(usize, usize)> = (0..total)
        .flat_map(|u| (0..total).map(move |v| (u, v)))
        .collect();
    // w0 = (0,0,0,0,0) is the flags=0 state of instruction 0
    KripkeStructure::new(machine.ap(), labels, &edges, 0).unwrap()
}

// ---------------------------------------------------------------------------
// The formulas φ_{I,b}
// ---------------------------------------------------------------------------

fn prop(name: &str) -> TeamFormula {
    TeamFormula::prop(name)
}

fn neg(name: &str) -> TeamFormula {
    TeamFormula::neg_prop(name)
}

fn top_subset(s: &str) -> TeamFormula {
    TeamFormula::Inc(vec![LtlFormula::True], vec![LtlFormula::prop(s)])
}

fn bot_subset(s: &str) -> TeamFormula {
    TeamFormula::Inc(vec![LtlFormula::False], vec![LtlFormula::prop(s)])
}

fn bool_or_all(parts: Vec<TeamFormula>) -> TeamFormula {
    parts
        .into_iter()
        .reduce(TeamFormula::bool_or)
        .expect("non-empty")
}

fn and_all(parts: Vec<TeamFormula>) -> TeamFormula {
    parts.into_iter().reduce(TeamFormula::and).expect("non-empty")
}

/// `G ⋀_{a∈AP} (a vv !a)`: the team is a single trace as far as AP can see.
fn singleton_formula(machine: &CounterMachine) -> TeamFormula {
    let conj = and_all(
        machine
            .ap()
            .iter()
            .map(|a| TeamFormula::bool_or(prop(a), neg(a)))
            .collect(),
    );
    TeamFormula::globally(conj)
}

fn cs_decrease(c: Counter) -> TeamFormula {
    let s = c.prop();
    TeamFormula::split_or(
        prop(s),
        TeamFormula::and(neg(s), TeamFormula::next(neg(s))),
    )
}

fn cs_preserve(c: Counter) -> TeamFormula {
    let s = c.prop();
    TeamFormula::split_or(
        TeamFormula::and(prop(s), TeamFormula::next(prop(s))),
        TeamFormula::and(neg(s), TeamFormula::next(neg(s))),
    )
}

fn others(c: Counter) -> Vec<Counter> {
    Counter::ALL.iter().copied().filter(|o| *o != c).collect()
}

fn goto(j1: usize, j2: usize) -> TeamFormula {
    TeamFormula::next(TeamFormula::bool_or(
        prop(&j1.to_string()),
        prop(&j2.to_string()),
    ))
}

fn theta_comp(machine: &CounterMachine, theta: impl Fn(&Instruction) -> TeamFormula) -> TeamFormula {
    let arms = machine
        .instructions
        .iter()
        .enumerate()
        .map(|(i, ins)| TeamFormula::and(prop(&i.to_string()), theta(ins)))
        .collect();
    TeamFormula::globally(bool_or_all(arms))
}

fn theta_b_rec(b: usize) -> TeamFormula {
    TeamFormula::globally(TeamFormula::eventually(prop(&b.to_string())))
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum ReductionError {
    #[error("recurrence label {b} out of range (n = {n})")]
    BadRecurrenceLabel { b: usize, n: usize },
    #[error("run is empty")]
    EmptyRun,
    #[error("run must start from the initial configuration (0,0,0,0)")]
    BadInitialConfiguration,
    #[error("steps {at} -> {next}: configurations are not (lossy-)consecutive")]
    NotConsecutive { at: usize, next: usize },
    #[error("run never executes the recurrence label {0} in its loop")]
    NotRecurring(usize),
    #[error("counter {counter} reaches {value}, exceeding the trace budget {budget}")]
    Budget {
        counter: Counter,
        value: u64,
        budget: u64,
    },
}

/// Lossy-computation formula `(θ_comp ∧ GF b) ∨_L ⊤`.
pub fn build_formula_lossy(
    machine: &CounterMachine,
    b: usize,
) -> Result<TeamFormula, ReductionError> {
    if b >= machine.len() {
        return Err(ReductionError::BadRecurrenceLabel {
            b,
            n: machine.len(),
        });
    }
    let singleton = singleton_formula(machine);
    let theta = |ins: &Instruction| match *ins {
        Instruction::Inc(c, [j1, j2]) => {
            let grow = and_all(vec![singleton.clone(), neg(c.prop()), TeamFormula::next(prop(c.prop()))]);
            let mut parts = vec![
                goto(j1, j2),
                TeamFormula::split_or(grow, cs_decrease(c)),
            ];
            parts.extend(others(c).into_iter().map(cs_decrease));
            and_all(parts)
        }
        Instruction::Dec(c, [j1, j2]) => {
            let shrink = TeamFormula::and(prop(c.prop()), TeamFormula::next(neg(c.prop())));
            let mut parts = vec![
                goto(j1, j2),
                TeamFormula::left_or(shrink, cs_decrease(c)),
            ];
            parts.extend(others(c).into_iter().map(cs_decrease));
            and_all(parts)
        }
        Instruction::IfZero(c, j1, j2) => {
            let zero = TeamFormula::next(TeamFormula::and(neg(c.prop()), prop(&j1.to_string())));
            let nonzero = TeamFormula::and(
                top_subset(c.prop()),
                TeamFormula::next(prop(&j2.to_string())),
            );
            let mut parts = vec![TeamFormula::bool_or(zero, nonzero)];
            parts.extend(Counter::ALL.into_iter().map(cs_decrease));
            and_all(parts)
        }
    };
    Ok(TeamFormula::left_or(
        TeamFormula::and(theta_comp(machine, theta), theta_b_rec(b)),
        TeamFormula::True,
    ))
}

/// Non-lossy formula `(θ_diff ∧ θ'_comp ∧ GF b) ∨_L ⊤`, with a single
/// subteam quantifier inside `θ_diff`.
pub fn build_formula_nonlossy(
    machine: &CounterMachine,
    b: usize,
) -> Result<TeamFormula, ReductionError> {
    if b >= machine.len() {
        return Err(ReductionError::BadRecurrenceLabel {
            b,
            n: machine.len(),
        });
    }
    let singleton = singleton_formula(machine);
    let theta = |ins: &Instruction| match *ins {
        Instruction::Inc(c, [j1, j2]) => {
            let grow = and_all(vec![singleton.clone(), neg(c.prop()), TeamFormula::next(prop(c.prop()))]);
            let mut parts = vec![
                goto(j1, j2),
                TeamFormula::left_or(grow, cs_preserve(c)),
            ];
            parts.extend(others(c).into_iter().map(cs_preserve));
            and_all(parts)
        }
        Instruction::Dec(c, [j1, j2]) => {
            let shrink = and_all(vec![singleton.clone(), prop(c.prop()), TeamFormula::next(neg(c.prop()))]);
            let mut parts = vec![
                goto(j1, j2),
                TeamFormula::left_or(shrink, cs_preserve(c)),
            ];
            parts.extend(others(c).into_iter().map(cs_preserve));
            and_all(parts)
        }
        Instruction::IfZero(c, j1, j2) => {
            let zero = TeamFormula::and(neg(c.prop()), TeamFormula::next(prop(&j1.to_string())));
            let nonzero = TeamFormula::and(
                top_subset(c.prop()),
                TeamFormula::next(prop(&j2.to_string())),
            );
            let mut parts = vec![TeamFormula::bool_or(zero, nonzero)];
            parts.extend(Counter::ALL.into_iter().map(cs_preserve));
            and_all(parts)
        }
    };
    // θ_diff: distinct traces keep distinct suffixes — synchronised on every
    // marker proposition, or infinitely often realizing both values of one
    let sync = TeamFormula::globally(and_all(
        ["c_l", "c_m", "c_r", "d"]
            .iter()
            .map(|a| TeamFormula::bool_or(prop(a), neg(a)))
            .collect(),
    ));
    let split_somewhere = TeamFormula::globally(TeamFormula::eventually(bool_or_all(
        ["c_l", "c_m", "c_r", "d"]
            .iter()
            .map(|a| TeamFormula::and(top_subset(a), bot_subset(a)))
            .collect(),
    )));
    let theta_diff =
        TeamFormula::subteam_all(TeamFormula::bool_or(sync, split_somewhere));
    Ok(TeamFormula::left_or(
        and_all(vec![theta_diff, theta_comp(machine, theta), theta_b_rec(b)]),
        TeamFormula::True,
    ))
}

/// The conjunction `θ_comp ∧ GF b` alone (no ∨_L ⊤ closure), for checking
/// encoded runs directly.
pub fn computation_core(
    machine: &CounterMachine,
    b: usize,
    lossy: bool,
) -> Result<TeamFormula, ReductionError> {
    let full = if lossy {
        build_formula_lossy(machine, b)?
    } else {
        build_formula_nonlossy(machine, b)?
    };
    match full {
        TeamFormula::LeftOr(core, _) => Ok(*core),
        _ => unreachable!("the builders emit ∨_L at the top"),
    }
}

// ---------------------------------------------------------------------------
// Satisfiability embedding
// ---------------------------------------------------------------------------

/// Adds one fresh `pw{i}` proposition per state and returns the formula that
/// is satisfied exactly by the empty team and the full trace set of the
/// extension.
pub fn build_sat_embedding(k: &KripkeStructure) -> (KripkeStructure, TeamFormula) {
    let n = k.states.len();
    let state_prop = |i: usize| format!("pw{i}");
    let mut ap = k.ap.clone();
    ap.extend((0..n).map(state_prop));
    let labels: Vec<Letter> = k
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut l = s.label.clone();
            l.insert(state_prop(i));
            l
        })
        .collect();
    let edges: Vec<(usize, usize)> = k
        .states
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.succ.iter().map(move |&v| (u, v)))
        .collect();
    let extended = KripkeStructure::new(ap, labels, &edges, k.init).unwrap();

    let arms: Vec<TeamFormula> = k
        .states
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let mut parts = vec![prop(&state_prop(w))];
            parts.extend(
                (0..n)
                    .filter(|&v| v != w)
                    .map(|v| neg(&state_prop(v))),
            );
            parts.extend(s.succ.iter().map(|&v| {
                TeamFormula::Inc(
                    vec![LtlFormula::True],
                    vec![LtlFormula::next(LtlFormula::prop(&state_prop(v)))],
                )
            }));
            let step = s
                .succ
                .iter()
                .map(|&v| prop(&state_prop(v)))
                .reduce(TeamFormula::split_or)
                .expect("states have successors");
            parts.push(TeamFormula::next(step));
            for p in &k.ap {
                if s.label.contains(p) {
                    parts.push(prop(p));
                } else {
                    parts.push(neg(p));
                }
            }
            and_all(parts)
        })
        .collect();
    let theta = TeamFormula::and(
        prop(&state_prop(k.init)),
        TeamFormula::globally(
            arms.into_iter()
                .reduce(TeamFormula::split_or)
                .expect("at least one state"),
        ),
    );
    (extended, theta)
}

// ---------------------------------------------------------------------------
// Runs and their encoding
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Configuration {
    pub instr: usize,
    pub counters: [u64; 3],
}

impl Configuration {
    pub fn initial() -> Configuration {
        Configuration {
            instr: 0,
            counters: [0; 3],
        }
    }
}

/// Eventually periodic configuration sequence `stem · cycle^ω`.
#[derive(Clone, Debug)]
pub struct MachineRun {
    pub stem: Vec<Configuration>,
    pub cycle: Vec<Configuration>,
}

impl MachineRun {
    pub fn at(&self, j: usize) -> &Configuration {
        if j < self.stem.len() {
            &self.stem[j]
        } else {
            &self.cycle[(j - self.stem.len()) % self.cycle.len()]
        }
    }

    /// `stem:` / `loop:` sections of configuration tuples `(i, vl, vm, vr)`.
    pub fn parse(text: &str) -> Result<MachineRun, String> {
        let mut stem = Vec::new();
        let mut cycle = Vec::new();
        let mut into_cycle = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "stem:" => into_cycle = false,
                "loop:" => into_cycle = true,
                tuple => {
                    let tuple = tuple
                        .trim_start_matches('(')
                        .trim_end_matches(')');
                    let nums: Result<Vec<u64>, _> =
                        tuple.split(',').map(|x| x.trim().parse::<u64>()).collect();
                    let nums =
                        nums.map_err(|_| format!("line {}: bad tuple", lineno + 1))?;
                    if nums.len() != 4 {
                        return Err(format!("line {}: expected (i,vl,vm,vr)", lineno + 1));
                    }
                    let c = Configuration {
                        instr: nums[0] as usize,
                        counters: [nums[1], nums[2], nums[3]],
                    };
                    if into_cycle {
                        cycle.push(c);
                    } else {
                        stem.push(c);
                    }
                }
            }
        }
        if cycle.is_empty() {
            return Err("run needs a non-empty loop: section".to_string());
        }
        Ok(MachineRun { stem, cycle })
    }
}

/// Exact machine steps from a configuration.
pub fn successors(machine: &CounterMachine, c: &Configuration) -> Vec<Configuration> {
    let Some(ins) = machine.instructions.get(c.instr) else {
        return Vec::new();
    };
    match *ins {
        Instruction::Inc(s, targets) => {
            let mut counters = c.counters;
            counters[s.index()] += 1;
            dedup_targets(targets)
                .map(|t| Configuration { instr: t, counters })
                .collect()
        }
        Instruction::Dec(s, targets) => {
            if c.counters[s.index()] == 0 {
                // decrement from zero blocks
                return Vec::new();
            }
            let mut counters = c.counters;
            counters[s.index()] -= 1;
            dedup_targets(targets)
                .map(|t| Configuration { instr: t, counters })
                .collect()
        }
        Instruction::IfZero(s, j1, j2) => {
            let t = if c.counters[s.index()] == 0 { j1 } else { j2 };
            vec![Configuration {
                instr: t,
                counters: c.counters,
            }]
        }
    }
}

fn dedup_targets(targets: [usize; 2]) -> impl Iterator<Item = usize> {
    let set: BTreeSet<usize> = targets.into_iter().collect();
    set.into_iter()
}

/// Exact consecution `⤳_c`.
pub fn consecutive(machine: &CounterMachine, from: &Configuration, to: &Configuration) -> bool {
    successors(machine, from).contains(to)
}

/// Lossy consecution `⤳_lc`: some exact step between dominating
/// configurations (`from` may first leak downward, the result may then leak
/// down to `to`).
pub fn lossy_consecutive(
    machine: &CounterMachine,
    from: &Configuration,
    to: &Configuration,
) -> bool {
    let mut lowered = vec![[0u64; 3]];
    for i in 0..3 {
        let mut next = Vec::new();
        for v in &lowered {
            for x in 0..=from.counters[i] {
                let mut v = *v;
                v[i] = x;
                next.push(v);
            }
        }
        lowered = next;
    }
    lowered.into_iter().any(|counters| {
        let start = Configuration {
            instr: from.instr,
            counters,
        };
        successors(machine, &start).into_iter().any(|mid| {
            mid.instr == to.instr && (0..3).all(|i| mid.counters[i] >= to.counters[i])
        })
    })
}

fn validate_run(
    machine: &CounterMachine,
    run: &MachineRun,
    b: usize,
) -> Result<(), ReductionError> {
    if run.cycle.is_empty() {
        return Err(ReductionError::EmptyRun);
    }
    if *run.at(0) != Configuration::initial() {
        return Err(ReductionError::BadInitialConfiguration);
    }
    let total = run.stem.len() + run.cycle.len();
    for j in 0..total {
        // the step off the end wraps into the loop
        let next = if j + 1 < total {
            j + 1
        } else {
            run.stem.len()
        };
        if !lossy_consecutive(machine, run.at(j), run.at(next)) {
            return Err(ReductionError::NotConsecutive { at: j, next });
        }
    }
    if !run.cycle.iter().any(|c| c.instr == b) {
        return Err(ReductionError::NotRecurring(b));
    }
    Ok(())
}

/// Encodes an eventually periodic run as a team of lasso traces: one
/// instruction trace plus one trace per counter unit, separated by `d`
/// patterns on the loop.
pub fn encode_computation(
    machine: &CounterMachine,
    run: &MachineRun,
    b: usize,
) -> Result<Team, ReductionError> {
    validate_run(machine, run, b)?;
    let stem_len = run.stem.len();
    let cycle_len = run.cycle.len();
    let total = stem_len + cycle_len;

    // d patterns live on loop positions; position 0 must stay unlabeled to
    // match the initial state of K_I
    let usable: Vec<usize> = (0..cycle_len)
        .filter(|&p| stem_len > 0 || p > 0)
        .collect();
    let mut patterns: Vec<BTreeSet<usize>> = Vec::new();
    for mask in 0u64..(1 << usable.len().min(16)) {
        patterns.push(
            usable
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &p)| p)
                .collect(),
        );
    }
    let mut next_pattern = 1usize; // pattern 0 (empty) is the instruction trace's

    let letter_at = |j: usize, unit: Option<(Counter, u64)>, pattern: &BTreeSet<usize>| {
        let c = run.at(j);
        let mut l = Letter::new();
        l.insert(c.instr.to_string());
        if let Some((counter, u)) = unit {
            if c.counters[counter.index()] >= u {
                l.insert(counter.prop().to_string());
            }
        }
        if j >= stem_len && pattern.contains(&((j - stem_len) % cycle_len)) {
            l.insert("d".to_string());
        }
        l
    };

    let empty = BTreeSet::new();
    let mut traces = vec![LassoTrace::new(
        (0..stem_len).map(|j| letter_at(j, None, &empty)).collect(),
        (stem_len..total).map(|j| letter_at(j, None, &empty)).collect(),
    )];

    for counter in Counter::ALL {
        let max = (0..total)
            .map(|j| run.at(j).counters[counter.index()])
            .max()
            .unwrap_or(0);
        for u in 1..=max {
            if next_pattern >= patterns.len() {
                return Err(ReductionError::Budget {
                    counter,
                    value: max,
                    budget: patterns.len().saturating_sub(1) as u64,
                });
            }
            let pattern = patterns[next_pattern].clone();
            next_pattern += 1;
            traces.push(LassoTrace::new(
                (0..stem_len)
                    .map(|j| letter_at(j, Some((counter, u)), &pattern))
                    .collect(),
                (stem_len..total)
                    .map(|j| letter_at(j, Some((counter, u)), &pattern))
                    .collect(),
            ));
        }
    }
    let expected = traces.len();
    let team = Team::new(traces, 0);
    debug_assert_eq!(team.len(), expected, "d patterns keep traces distinct");
    Ok(team)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_team_formula, render};
    use crate::team_eval::eval;

    fn ifz_machine() -> CounterMachine {
        CounterMachine::new(vec![Instruction::IfZero(Counter::L, 0, 0)]).unwrap()
    }

    fn inc_dec_machine() -> CounterMachine {
        CounterMachine::new(vec![
            Instruction::Inc(Counter::L, [1, 1]),
            Instruction::Dec(Counter::L, [0, 0]),
        ])
        .unwrap()
    }

    #[test]
    fn machine_file_round_trip() {
        let text = "0: INC l -> {1,1}\n1: DEC l -> {0,0}\n";
        let m = CounterMachine::parse(text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(CounterMachine::parse(&m.render()).unwrap().render(), m.render());
        assert!(CounterMachine::parse("0: IFZ l ? 0 : 5").is_err());
        let m = CounterMachine::parse("0: IFZ r ? 0 : 0").unwrap();
        assert_eq!(m.instructions[0], Instruction::IfZero(Counter::R, 0, 0));
    }

    #[test]
    fn kripke_has_16n_states_total_relation() {
        let m = ifz_machine();
        let k = build_kripke(&m);
        assert_eq!(k.states.len(), 16);
        assert!(k.states.iter().all(|s| s.succ.len() == 16));
        // w0 carries only the instruction prop
        assert_eq!(k.states[k.init].label, crate::traces::letter(&["0"]));
        // some state carries {0, c_l, d}
        assert!(k
            .states
            .iter()
            .any(|s| s.label == crate::traces::letter(&["0", "c_l", "d"])));
        let m2 = inc_dec_machine();
        assert_eq!(build_kripke(&m2).states.len(), 32);
    }

    #[test]
    fn lossy_formula_shape() {
        let m = ifz_machine();
        let f = build_formula_lossy(&m, 0).unwrap();
        let text = render(&f);
        // the recurrence conjunct and the ∨_L ⊤ closure
        assert!(text.contains("G F 0"), "{text}");
        assert!(text.ends_with("orl T)"), "{text}");
        // the IfZero template: zero branch under X, non-zero branch via ⊆
        assert!(text.contains("X (!c_l & 0)"), "{text}");
        assert!(text.contains("inc(T; c_l)"), "{text}");
        // parses back
        assert_eq!(parse_team_formula(&text).unwrap(), f);
        assert!(build_formula_lossy(&m, 3).is_err());
    }

    #[test]
    fn lossy_formula_size_linear() {
        // per-instruction templates have constant size over a fixed AP core,
        // plus the n instruction props inside `singleton`
        for n in 1..6 {
            let instructions =
                (0..n).map(|i| Instruction::Inc(Counter::L, [i, i])).collect();
            let m = CounterMachine::new(instructions).unwrap();
            let f = build_formula_lossy(&m, 0).unwrap();
            assert!(
                f.size() <= 200 * n * n + 200,
                "n = {n}: size {}",
                f.size()
            );
        }
    }

    #[test]
    fn nonlossy_formula_shape() {
        let m = inc_dec_machine();
        let f = build_formula_nonlossy(&m, 0).unwrap();
        fn count_subteam_all(f: &TeamFormula) -> usize {
            use TeamFormula::*;
            match f {
                SubteamAll(x) => 1 + count_subteam_all(x),
                And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r)
                | WeakUntil(l, r) | LeftOr(l, r) => {
                    count_subteam_all(l) + count_subteam_all(r)
                }
                Next(x) | BoolNeg(x) | FlatAll(x) => count_subteam_all(x),
                _ => 0,
            }
        }
        assert_eq!(count_subteam_all(&f), 1);
        let text = render(&f);
        assert!(text.contains("orl ((c_l & X c_l) | (!c_l & X !c_l))"), "{text}");
        assert!(text.contains("inc(!T; d)"), "{text}");
    }

    #[test]
    fn consecution_examples() {
        let m = inc_dec_machine();
        let c0 = Configuration::initial();
        let c1 = Configuration {
            instr: 1,
            counters: [1, 0, 0],
        };
        assert!(consecutive(&m, &c0, &c1));
        assert!(lossy_consecutive(&m, &c0, &c1));
        // lossy may drop the increment
        let c1_lost = Configuration {
            instr: 1,
            counters: [0, 0, 0],
        };
        assert!(!consecutive(&m, &c0, &c1_lost));
        assert!(lossy_consecutive(&m, &c0, &c1_lost));
        // decrement from zero blocks
        assert!(successors(&m, &c1_lost).is_empty());
    }

    /// ⤳_lc accepts exactly the pairs dominated by some exact step.
    #[test]
    fn lossy_consecution_matches_domination() {
        let m = CounterMachine::new(vec![
            Instruction::Inc(Counter::L, [1, 2]),
            Instruction::Dec(Counter::M, [0, 2]),
            Instruction::IfZero(Counter::R, 0, 1),
        ])
        .unwrap();
        let configs: Vec<Configuration> = (0..3)
            .flat_map(|i| {
                (0..3u64).flat_map(move |a| {
                    (0..3u64).flat_map(move |bb| {
                        (0..3u64).map(move |c| Configuration {
                            instr: i,
                            counters: [a, bb, c],
                        })
                    })
                })
            })
            .collect();
        for from in &configs {
            for to in &configs {
                let dominated = configs.iter().any(|lo| {
                    lo.instr == from.instr
                        && (0..3).all(|i| lo.counters[i] <= from.counters[i])
                        && successors(&m, lo).iter().any(|mid| {
                            mid.instr == to.instr
                                && (0..3).all(|i| mid.counters[i] >= to.counters[i])
                        })
                });
                assert_eq!(
                    lossy_consecutive(&m, from, to),
                    dominated,
                    "{from:?} -> {to:?}"
                );
            }
        }
    }

    #[test]
    fn encode_trivial_ifz_run() {
        let m = ifz_machine();
        let run = MachineRun {
            stem: vec![],
            cycle: vec![Configuration::initial()],
        };
        let team = encode_computation(&m, &run, 0).unwrap();
        assert_eq!(team.len(), 1);
        assert_eq!(
            team.traces()[0],
            LassoTrace::new(vec![], vec![crate::traces::letter(&["0"])])
        );
        let core = computation_core(&m, 0, true).unwrap();
        assert!(eval(team.traces(), 0, &core));
    }

    #[test]
    fn encode_inc_dec_run() {
        let m = inc_dec_machine();
        let run = MachineRun {
            stem: vec![],
            cycle: vec![
                Configuration::initial(),
                Configuration {
                    instr: 1,
                    counters: [1, 0, 0],
                },
            ],
        };
        let team = encode_computation(&m, &run, 0).unwrap();
        // the instruction trace plus one unit for counter l
        assert_eq!(team.len(), 2);
        let unit = team
            .traces()
            .iter()
            .find(|t| t.props().contains("c_l"))
            .unwrap();
        assert!(!unit.letter_at(0).contains("c_l"));
        assert!(unit.letter_at(1).contains("c_l"));
        // lossy and non-lossy cores both hold on this exact run
        let core = computation_core(&m, 0, true).unwrap();
        assert!(eval(team.traces(), 0, &core));
        let core = computation_core(&m, 0, false).unwrap();
        assert!(eval(team.traces(), 0, &core));
    }

    #[test]
    fn encode_rejects_bad_runs() {
        let m = ifz_machine();
        let run = MachineRun {
            stem: vec![],
            cycle: vec![Configuration {
                instr: 0,
                counters: [1, 0, 0],
            }],
        };
        assert_eq!(
            encode_computation(&m, &run, 0),
            Err(ReductionError::BadInitialConfiguration)
        );
        let m = inc_dec_machine();
        let run = MachineRun {
            stem: vec![],
            cycle: vec![
                Configuration::initial(),
                Configuration {
                    instr: 0, // INC must move to instruction 1
                    counters: [1, 0, 0],
                },
            ],
        };
        assert!(matches!(
            encode_computation(&m, &run, 0),
            Err(ReductionError::NotConsecutive { .. })
        ));
    }

    #[test]
    fn run_file_parses() {
        let text = "stem:\n(0, 0,0,0)\nloop:\n(1, 1,0,0)\n(0, 0,0,0)\n";
        let run = MachineRun::parse(text).unwrap();
        assert_eq!(run.stem.len(), 1);
        assert_eq!(run.cycle.len(), 2);
        assert_eq!(run.at(3).instr, 1);
    }

    #[test]
    fn sat_embedding_two_state() {
        use crate::kripke::traces_enumerate;
        let k = KripkeStructure::new(
            vec!["a".to_string()],
            vec![crate::traces::letter(&["a"]), crate::traces::letter(&[])],
            &[(0, 1), (1, 0), (1, 1)],
            0,
        )
        .unwrap();
        let (k2, theta) = build_sat_embedding(&k);
        assert_eq!(k2.states.len(), 2);
        assert!(k2.states[0].label.contains("pw0"));
        // the bounded full trace set satisfies θ
        let full = traces_enumerate(&k2, 3, 2);
        assert!(eval(&full, 0, &theta), "full enumeration satisfies θ");
        // a deficient non-empty subteam misses a successor trace and fails
        let one = vec![full
            .iter()
            .find(|t| t.cycle.len() == 2 && t.stem.is_empty())
            .cloned()
            .unwrap_or_else(|| full[0].clone())];
        assert!(!eval(&one, 0, &theta), "missing successors falsify θ");
        // the empty team satisfies θ
        assert!(eval(&[], 0, &theta));
    }

    #[test]
    fn formulas_lie_in_their_fragments() {
        use crate::formula::fragment_flags;
        let m = inc_dec_machine();
        let lossy = build_formula_lossy(&m, 0).unwrap();
        let nonlossy = build_formula_nonlossy(&m, 0).unwrap();
        // TeamLTL(⊆, vv, ∨_L): no ~, no A, no A1 in the lossy formula
        fn uses(f: &TeamFormula, what: fn(&TeamFormula) -> bool) -> bool {
            use TeamFormula::*;
            what(f)
                || match f {
                    And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r)
                    | WeakUntil(l, r) | LeftOr(l, r) => {
                        uses(l, what) || uses(r, what)
                    }
                    Next(x) | BoolNeg(x) | FlatAll(x) | SubteamAll(x) => uses(x, what),
                    _ => false,
                }
        }
        assert!(!uses(&lossy, |f| matches!(
            f,
            TeamFormula::BoolNeg(_) | TeamFormula::SubteamAll(_) | TeamFormula::FlatAll(_)
        )));
        assert!(uses(&nonlossy, |f| matches!(f, TeamFormula::SubteamAll(_))));
        // neither is k-coherent-eligible (∨_L), by design
        assert!(!fragment_flags(&lossy).k_coherent_eligible);
    }
}
