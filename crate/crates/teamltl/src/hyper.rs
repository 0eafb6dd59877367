//! HyperLTL / HyperQPTL / HyperQPTL+ over finite teams of lassos.
//!
//! The evaluator is exact for trace quantifiers and *bounded-exact* for
//! propositional quantifiers: quantified propositions range over lasso-shaped
//! sequences with stem length ≤ `stem_max` and loop length dividing
//! `loop_lcm`. Defaults derive from the team horizon plus the temporal depth
//! of the body, which covers every witness the translation correctness
//! arguments construct; verdicts for arbitrary hand-written inputs are
//! qualified by those bounds.
//!
//! Search strategy: trace quantifiers and tagged (exactly-one-level)
//! universal quantifiers expand over their finite ranges; every remaining
//! existential sequence becomes a block of free bits over the joint position
//! space, and the quantifier-free body compiles to a Boolean circuit whose
//! satisfiability a SAT solver decides.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use varisat::{ExtendFormula, Lit, Solver};

use crate::traces::{horizon, lcm, LassoTrace};

// ---------------------------------------------------------------------------
// Syntax
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QuantKind {
    TraceExists,
    TraceForall,
    /// Uniform propositional quantification: one sequence shared by all traces.
    UPropExists,
    UPropForall,
    /// Non-uniform propositional quantification: independent relabeling per trace.
    PropExists,
    PropForall,
}

/// Range restriction emitted by the translators in place of the side formula
/// "true in exactly one level".
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum QuantTag {
    #[default]
    None,
    /// The sequence is true at exactly one position `k < stem_max`.
    ExactlyOneLevel,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Quantifier {
    pub kind: QuantKind,
    pub var: String,
    pub tag: QuantTag,
}

impl Quantifier {
    pub fn new(kind: QuantKind, var: &str) -> Quantifier {
        Quantifier {
            kind,
            var: var.to_string(),
            tag: QuantTag::None,
        }
    }

    pub fn tagged(kind: QuantKind, var: &str) -> Quantifier {
        Quantifier {
            kind,
            var: var.to_string(),
            tag: QuantTag::ExactlyOneLevel,
        }
    }

    pub fn binds_prop(&self) -> bool {
        !matches!(self.kind, QuantKind::TraceExists | QuantKind::TraceForall)
    }
}

/// Quantifier-free body in negation normal form over trace-indexed literals.
/// Children are reference-counted: translator outputs share large subtrees.
#[derive(PartialEq, Eq, Debug)]
pub enum HyperBody {
    True,
    False,
    Lit {
        prop: String,
        var: String,
        positive: bool,
    },
    And(Rc<HyperBody>, Rc<HyperBody>),
    Or(Rc<HyperBody>, Rc<HyperBody>),
    Next(Rc<HyperBody>),
    Until(Rc<HyperBody>, Rc<HyperBody>),
    WeakUntil(Rc<HyperBody>, Rc<HyperBody>),
}

pub type Body = Rc<HyperBody>;

pub fn lit(prop: &str, var: &str) -> Body {
    Rc::new(HyperBody::Lit {
        prop: prop.to_string(),
        var: var.to_string(),
        positive: true,
    })
}

pub fn neg_lit(prop: &str, var: &str) -> Body {
    Rc::new(HyperBody::Lit {
        prop: prop.to_string(),
        var: var.to_string(),
        positive: false,
    })
}

pub fn btrue() -> Body {
    Rc::new(HyperBody::True)
}

pub fn bfalse() -> Body {
    Rc::new(HyperBody::False)
}

pub fn band(l: Body, r: Body) -> Body {
    match (&*l, &*r) {
        (HyperBody::True, _) => r,
        (_, HyperBody::True) => l,
        (HyperBody::False, _) | (_, HyperBody::False) => bfalse(),
        _ => Rc::new(HyperBody::And(l, r)),
    }
}

pub fn bor(l: Body, r: Body) -> Body {
    match (&*l, &*r) {
        (HyperBody::False, _) => r,
        (_, HyperBody::False) => l,
        (HyperBody::True, _) | (_, HyperBody::True) => btrue(),
        _ => Rc::new(HyperBody::Or(l, r)),
    }
}

pub fn ball(xs: impl IntoIterator<Item = Body>) -> Body {
    xs.into_iter().fold(btrue(), band)
}

pub fn bany(xs: impl IntoIterator<Item = Body>) -> Body {
    xs.into_iter().fold(bfalse(), bor)
}

pub fn bnext(x: Body) -> Body {
    Rc::new(HyperBody::Next(x))
}

pub fn buntil(l: Body, r: Body) -> Body {
    Rc::new(HyperBody::Until(l, r))
}

pub fn bweak_until(l: Body, r: Body) -> Body {
    Rc::new(HyperBody::WeakUntil(l, r))
}

pub fn beventually(x: Body) -> Body {
    buntil(btrue(), x)
}

pub fn bglobally(x: Body) -> Body {
    bweak_until(x, bfalse())
}

pub fn bimplies(l: Body, r: Body) -> Body {
    bor(bnegate(&l), r)
}

pub fn biff(l: Body, r: Body) -> Body {
    bor(band(l.clone(), r.clone()), band(bnegate(&l), bnegate(&r)))
}

/// Negation pushed to literals.
pub fn bnegate(b: &Body) -> Body {
    match &**b {
        HyperBody::True => bfalse(),
        HyperBody::False => btrue(),
        HyperBody::Lit { prop, var, positive } => Rc::new(HyperBody::Lit {
            prop: prop.clone(),
            var: var.clone(),
            positive: !positive,
        }),
        HyperBody::And(l, r) => bor(bnegate(l), bnegate(r)),
        HyperBody::Or(l, r) => band(bnegate(l), bnegate(r)),
        HyperBody::Next(x) => bnext(bnegate(x)),
        HyperBody::Until(l, r) => {
            bweak_until(bnegate(r), band(bnegate(l), bnegate(r)))
        }
        HyperBody::WeakUntil(l, r) => {
            buntil(bnegate(r), band(bnegate(l), bnegate(r)))
        }
    }
}

pub fn temporal_depth(b: &HyperBody) -> usize {
    match b {
        HyperBody::True | HyperBody::False | HyperBody::Lit { .. } => 0,
        HyperBody::And(l, r) | HyperBody::Or(l, r) => {
            temporal_depth(l).max(temporal_depth(r))
        }
        HyperBody::Next(x) => 1 + temporal_depth(x),
        HyperBody::Until(l, r) | HyperBody::WeakUntil(l, r) => {
            1 + temporal_depth(l).max(temporal_depth(r))
        }
    }
}

pub fn body_size(b: &HyperBody) -> usize {
    match b {
        HyperBody::True | HyperBody::False | HyperBody::Lit { .. } => 1,
        HyperBody::Next(x) => 1 + body_size(x),
        HyperBody::And(l, r)
        | HyperBody::Or(l, r)
        | HyperBody::Until(l, r)
        | HyperBody::WeakUntil(l, r) => 1 + body_size(l) + body_size(r),
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HyperFormula {
    pub prefix: Vec<Quantifier>,
    pub body: Body,
}

impl HyperFormula {
    pub fn new(prefix: Vec<Quantifier>, body: Body) -> HyperFormula {
        HyperFormula { prefix, body }
    }

    pub fn size(&self) -> usize {
        self.prefix.len() + body_size(&self.body)
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing
// ---------------------------------------------------------------------------

impl fmt::Display for HyperBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use HyperBody::*;
        // binary nodes self-parenthesize, so unary operands print bare
        let operand = |f: &mut fmt::Formatter<'_>, x: &HyperBody| -> fmt::Result {
            write!(f, "{x}")
        };
        match self {
            True => write!(f, "T"),
            False => write!(f, "!T"),
            Lit { prop, var, positive } => {
                write!(f, "{}{prop}@{var}", if *positive { "" } else { "!" })
            }
            Until(l, r) if **l == True => {
                write!(f, "F ")?;
                operand(f, r)
            }
            WeakUntil(l, r) if **r == False => {
                write!(f, "G ")?;
                operand(f, l)
            }
            Next(x) => {
                write!(f, "X ")?;
                operand(f, x)
            }
            And(l, r) => write!(f, "({l} & {r})"),
            Or(l, r) => write!(f, "({l} | {r})"),
            Until(l, r) => write!(f, "({l} U {r})"),
            WeakUntil(l, r) => write!(f, "({l} W {r})"),
        }
    }
}

impl fmt::Display for HyperFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in &self.prefix {
            let kw = match (q.kind, q.tag) {
                (QuantKind::TraceExists, _) => "exists",
                (QuantKind::TraceForall, _) => "forall",
                (QuantKind::UPropExists, QuantTag::None) => "uexists",
                (QuantKind::UPropExists, QuantTag::ExactlyOneLevel) => "uexists1",
                (QuantKind::UPropForall, QuantTag::None) => "uforall",
                (QuantKind::UPropForall, QuantTag::ExactlyOneLevel) => "uforall1",
                (QuantKind::PropExists, QuantTag::None) => "existsp",
                (QuantKind::PropExists, QuantTag::ExactlyOneLevel) => "existsp1",
                (QuantKind::PropForall, QuantTag::None) => "forallp",
                (QuantKind::PropForall, QuantTag::ExactlyOneLevel) => "forallp1",
            };
            write!(f, "{kw} {}. ", q.var)?;
        }
        write!(f, "{}", self.body)
    }
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum HyperParseError {
    #[error("at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

struct HLexer {
    toks: Vec<(usize, String)>,
    pos: usize,
    end: usize,
}

fn hlex(text: &str) -> Result<HLexer, HyperParseError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' | '.' => i += 1,
            '(' | ')' | '&' | '|' | '!' => {
                toks.push((i, c.to_string()));
                i += 1;
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric()
                        || bytes[i] == b'_'
                        || bytes[i] == b'@')
                {
                    i += 1;
                }
                toks.push((start, text[start..i].to_string()));
            }
            other => {
                return Err(HyperParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(HLexer {
        toks,
        pos: 0,
        end: text.len(),
    })
}

impl HLexer {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|(_, t)| t.as_str())
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<String> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, w: &str) -> bool {
        if self.peek() == Some(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, HyperParseError> {
        Err(HyperParseError::Syntax {
            pos: self.here(),
            msg: msg.into(),
        })
    }
}

pub fn parse_hyper_formula(text: &str) -> Result<HyperFormula, HyperParseError> {
    let mut lx = hlex(text)?;
    let mut prefix = Vec::new();
    loop {
        let (kind, tag) = match lx.peek() {
            Some("forall") => (QuantKind::TraceForall, QuantTag::None),
            Some("exists") => (QuantKind::TraceExists, QuantTag::None),
            Some("uforall") => (QuantKind::UPropForall, QuantTag::None),
            Some("uexists") => (QuantKind::UPropExists, QuantTag::None),
            Some("uforall1") => (QuantKind::UPropForall, QuantTag::ExactlyOneLevel),
            Some("uexists1") => (QuantKind::UPropExists, QuantTag::ExactlyOneLevel),
            Some("forallp") => (QuantKind::PropForall, QuantTag::None),
            Some("existsp") => (QuantKind::PropExists, QuantTag::None),
            Some("forallp1") => (QuantKind::PropForall, QuantTag::ExactlyOneLevel),
            Some("existsp1") => (QuantKind::PropExists, QuantTag::ExactlyOneLevel),
            _ => break,
        };
        lx.bump();
        let var = match lx.bump() {
            Some(v) if !v.contains('@') => v,
            _ => return lx.err("expected a quantified variable name"),
        };
        prefix.push(Quantifier { kind, var, tag });
    }
    let body = parse_hbody_or(&mut lx)?;
    if lx.pos != lx.toks.len() {
        return lx.err("trailing input");
    }
    Ok(HyperFormula { prefix, body })
}

fn parse_hbody_or(lx: &mut HLexer) -> Result<Body, HyperParseError> {
    let mut f = parse_hbody_and(lx)?;
    while lx.eat("|") {
        let r = parse_hbody_and(lx)?;
        f = Rc::new(HyperBody::Or(f, r));
    }
    Ok(f)
}

fn parse_hbody_and(lx: &mut HLexer) -> Result<Body, HyperParseError> {
    let mut f = parse_hbody_until(lx)?;
    while lx.eat("&") {
        let r = parse_hbody_until(lx)?;
        f = Rc::new(HyperBody::And(f, r));
    }
    Ok(f)
}

fn parse_hbody_until(lx: &mut HLexer) -> Result<Body, HyperParseError> {
    let l = parse_hbody_unary(lx)?;
    if lx.eat("U") {
        Ok(buntil(l, parse_hbody_until(lx)?))
    } else if lx.eat("W") {
        Ok(bweak_until(l, parse_hbody_until(lx)?))
    } else {
        Ok(l)
    }
}

fn parse_hbody_unary(lx: &mut HLexer) -> Result<Body, HyperParseError> {
    if lx.eat("X") {
        return Ok(bnext(parse_hbody_unary(lx)?));
    }
    if lx.eat("F") {
        return Ok(beventually(parse_hbody_unary(lx)?));
    }
    if lx.eat("G") {
        return Ok(bglobally(parse_hbody_unary(lx)?));
    }
    parse_hbody_atom(lx)
}

fn parse_hbody_atom(lx: &mut HLexer) -> Result<Body, HyperParseError> {
    match lx.bump().as_deref() {
        Some("(") => {
            let f = parse_hbody_or(lx)?;
            if !lx.eat(")") {
                return lx.err("expected ')'");
            }
            Ok(f)
        }
        Some("!") => match lx.bump().as_deref() {
            Some("T") => Ok(bfalse()),
            Some(w) => match w.split_once('@') {
                Some((p, v)) if !p.is_empty() && !v.is_empty() => Ok(neg_lit(p, v)),
                _ => lx.err(format!("expected prop@var after '!', got {w:?}")),
            },
            None => lx.err("dangling '!'"),
        },
        Some("T") => Ok(btrue()),
        Some(w) => match w.split_once('@') {
            Some((p, v)) if !p.is_empty() && !v.is_empty() => Ok(lit(p, v)),
            _ => lx.err(format!("expected prop@var, got {w:?}")),
        },
        None => lx.err("expected a formula"),
    }
}

// ---------------------------------------------------------------------------
// Sequences and bounds
// ---------------------------------------------------------------------------

/// A quantified proposition's sequence as a Boolean lasso.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UniformSeq {
    pub stem: Vec<bool>,
    pub cycle: Vec<bool>,
}

impl UniformSeq {
    /// True at exactly position `k`.
    pub fn exactly_at(k: usize) -> UniformSeq {
        let mut stem = vec![false; k + 1];
        stem[k] = true;
        UniformSeq {
            stem,
            cycle: vec![false],
        }
    }

    pub fn never() -> UniformSeq {
        UniformSeq {
            stem: Vec::new(),
            cycle: vec![false],
        }
    }

    pub fn at(&self, i: usize) -> bool {
        if i < self.stem.len() {
            self.stem[i]
        } else {
            self.cycle[(i - self.stem.len()) % self.cycle.len()]
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct QuantBounds {
    /// Quantified sequences have stem length at most this.
    pub stem_max: usize,
    /// Quantified sequence loop lengths divide this.
    pub loop_lcm: usize,
    /// Universal exactly-one-level quantifiers expand only up to this level.
    /// Levels between it and `stem_max` are headroom: marker chains forced
    /// by a deep universal branch still fit on the grid there. `None` means
    /// the full grid.
    pub universal_level_max: Option<usize>,
    /// Guard on plain universal propositional expansion (number of candidate
    /// sequences); exceeding it is an error, not a verdict.
    pub cap: u64,
}

impl QuantBounds {
    pub fn default_for(traces: &[LassoTrace], i: usize, f: &HyperFormula) -> QuantBounds {
        let (s, p) = match horizon(traces, 0) {
            Some(h) => (h.stem_len, h.period),
            None => (0, 1),
        };
        let depth = temporal_depth(&f.body);
        let level = s.max(i) + p * (1 + depth);
        QuantBounds {
            stem_max: level + p * (1 + depth),
            loop_lcm: p,
            universal_level_max: Some(level),
            cap: 1 << 16,
        }
    }

    pub fn escalated(&self) -> QuantBounds {
        QuantBounds {
            stem_max: self.stem_max * 2,
            loop_lcm: self.loop_lcm,
            universal_level_max: self.universal_level_max.map(|l| l * 2),
            cap: self.cap,
        }
    }
}

/// Bindings for free variables of a formula: trace variables map to indices
/// into the team slice, free uniform propositions to preset sequences.
#[derive(Clone, Default, Debug)]
pub struct HyperAssignment {
    pub traces: BTreeMap<String, usize>,
    pub uniform: BTreeMap<String, UniformSeq>,
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum HyperError {
    #[error("unbound trace variable {0:?}")]
    UnboundTraceVar(String),
    #[error("duplicate variable {0:?} in prefix")]
    DuplicateVar(String),
    #[error("universal propositional quantifier {var:?} needs {needed} candidates, cap is {cap}")]
    BoundOverflow { var: String, needed: u64, cap: u64 },
    #[error("solver failure: {0}")]
    Solver(String),
}

// ---------------------------------------------------------------------------
// Circuits
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
enum Sig {
    T,
    F,
    /// SAT input bit, with polarity.
    Var(u32, bool),
    /// AND gate output, with polarity.
    Gate(u32, bool),
}

impl Sig {
    fn not(self) -> Sig {
        match self {
            Sig::T => Sig::F,
            Sig::F => Sig::T,
            Sig::Var(v, p) => Sig::Var(v, !p),
            Sig::Gate(g, p) => Sig::Gate(g, !p),
        }
    }
}

#[derive(Default)]
struct Circuit {
    gates: Vec<Vec<Sig>>,
    cons: HashMap<Vec<Sig>, u32>,
    nvars: u32,
}

impl Circuit {
    fn new_var(&mut self) -> Sig {
        self.nvars += 1;
        Sig::Var(self.nvars - 1, true)
    }

    fn and(&mut self, xs: impl IntoIterator<Item = Sig>) -> Sig {
        let mut kids: Vec<Sig> = Vec::new();
        for x in xs {
            match x {
                Sig::T => {}
                Sig::F => return Sig::F,
                s => kids.push(s),
            }
        }
        kids.sort();
        kids.dedup();
        for w in kids.windows(2) {
            if w[0] == w[1].not() {
                return Sig::F;
            }
        }
        match kids.len() {
            0 => Sig::T,
            1 => kids[0],
            _ => {
                if let Some(&g) = self.cons.get(&kids) {
                    return Sig::Gate(g, true);
                }
                let g = self.gates.len() as u32;
                self.gates.push(kids.clone());
                self.cons.insert(kids, g);
                Sig::Gate(g, true)
            }
        }
    }

    fn or(&mut self, xs: impl IntoIterator<Item = Sig>) -> Sig {
        let negs: Vec<Sig> = xs.into_iter().map(Sig::not).collect();
        self.and(negs).not()
    }

    fn and2(&mut self, a: Sig, b: Sig) -> Sig {
        self.and([a, b])
    }

    fn or2(&mut self, a: Sig, b: Sig) -> Sig {
        self.or([a, b])
    }

    /// Exactly one of `bits` is true.
    fn exactly_one(&mut self, bits: &[Sig]) -> Sig {
        let mut conj = vec![self.or(bits.iter().copied())];
        for i in 0..bits.len() {
            for j in i + 1..bits.len() {
                conj.push(self.and2(bits[i], bits[j]).not());
            }
        }
        self.and(conj)
    }

    fn to_lit(&self, s: Sig) -> Lit {
        match s {
            Sig::Var(v, p) => Lit::from_index(v as usize, p),
            Sig::Gate(g, p) => Lit::from_index((self.nvars + g) as usize, p),
            _ => unreachable!("constants are folded away"),
        }
    }

    /// Tseitin encoding; true iff some assignment of the input bits
    /// satisfies `root`.
    fn satisfiable(&self, root: Sig) -> Result<bool, HyperError> {
        match root {
            Sig::T => return Ok(true),
            Sig::F => return Ok(false),
            _ => {}
        }
        let mut solver = Solver::new();
        for (g, kids) in self.gates.iter().enumerate() {
            let out = Lit::from_index((self.nvars + g as u32) as usize, true);
            let mut long: Vec<Lit> = vec![out];
            for &k in kids {
                let kl = self.to_lit(k);
                solver.add_clause(&[!out, kl]);
                long.push(!kl);
            }
            solver.add_clause(&long);
        }
        solver.add_clause(&[self.to_lit(root)]);
        solver.solve().map_err(|e| HyperError::Solver(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum PropVal {
    /// Fixed sequence, read at joint positions.
    Const(UniformSeq),
    /// Free bits, one per joint position.
    Bits(Rc<Vec<Sig>>),
    /// Per-trace free bits (non-uniform quantification).
    TraceBits(Rc<Vec<Vec<Sig>>>),
}

#[derive(Clone, Default)]
struct Env {
    traces: BTreeMap<String, usize>,
    props: BTreeMap<String, PropVal>,
}

struct HyperEval<'a> {
    team: &'a [LassoTrace],
    /// Joint position space: `span = stem + cycle`, loopback to `stem`.
    stem: usize,
    cycle: usize,
    /// Quantified-sequence grid from the bounds: stems of length `qstem`,
    /// loops of length `qloop` (with `qloop` dividing `cycle`).
    qstem: usize,
    qloop: usize,
    /// Expansion limit for universal exactly-one-level quantifiers.
    ulevel: usize,
    circuit: Circuit,
    cap: u64,
}

pub fn eval_hyper(
    team: &[LassoTrace],
    assignment: &HyperAssignment,
    i: usize,
    formula: &HyperFormula,
    bounds: &QuantBounds,
) -> Result<bool, HyperError> {
    let (team_s, team_p) = match horizon(team, 0) {
        Some(h) => (h.stem_len, h.period),
        None => (0, 1),
    };
    let mut seen = std::collections::BTreeSet::new();
    for q in &formula.prefix {
        if !seen.insert(q.var.clone()) {
            return Err(HyperError::DuplicateVar(q.var.clone()));
        }
    }
    let qloop = bounds.loop_lcm.max(1);
    let mut ev = HyperEval {
        team,
        stem: bounds.stem_max.max(team_s).max(i + 1),
        cycle: lcm(qloop, team_p),
        qstem: bounds.stem_max,
        qloop,
        ulevel: bounds.universal_level_max.unwrap_or(bounds.stem_max),
        circuit: Circuit::default(),
        cap: bounds.cap,
    };
    let mut env = Env::default();
    for (v, t) in &assignment.traces {
        env.traces.insert(v.clone(), *t);
    }
    for (p, s) in &assignment.uniform {
        env.props.insert(p.clone(), PropVal::Const(s.clone()));
    }
    let root = ev.build_prefix(&formula.prefix, env, &formula.body, i)?;
    ev.circuit.satisfiable(root)
}

/// [`eval_hyper`] at spec-default bounds.
pub fn eval_hyper_default(
    team: &[LassoTrace],
    assignment: &HyperAssignment,
    i: usize,
    formula: &HyperFormula,
) -> Result<bool, HyperError> {
    let bounds = QuantBounds::default_for(team, i, formula);
    eval_hyper(team, assignment, i, formula, &bounds)
}

impl<'a> HyperEval<'a> {
    fn span(&self) -> usize {
        self.stem + self.cycle
    }

    fn reduce(&self, pos: usize) -> usize {
        if pos < self.span() {
            pos
        } else {
            self.stem + (pos - self.stem) % self.cycle
        }
    }

    fn build_prefix(
        &mut self,
        quants: &[Quantifier],
        env: Env,
        body: &Body,
        at: usize,
    ) -> Result<Sig, HyperError> {
        let Some((q, rest)) = quants.split_first() else {
            let mut memo = HashMap::new();
            return Ok(self.build_body(body, &env, self.reduce(at), &mut memo)?);
        };
        match q.kind {
            QuantKind::TraceExists | QuantKind::TraceForall => {
                let mut parts = Vec::new();
                for t in 0..self.team.len() {
                    let mut env = env.clone();
                    env.traces.insert(q.var.clone(), t);
                    parts.push(self.build_prefix(rest, env, body, at)?);
                }
                Ok(if q.kind == QuantKind::TraceExists {
                    self.circuit.or(parts)
                } else {
                    self.circuit.and(parts)
                })
            }
            QuantKind::UPropExists => {
                let bits = self.alloc_uniform(q.tag);
                let constraint = self.tag_constraint(q.tag, &bits);
                let mut env = env.clone();
                env.props.insert(q.var.clone(), PropVal::Bits(Rc::new(bits)));
                let inner = self.build_prefix(rest, env, body, at)?;
                Ok(self.circuit.and2(constraint, inner))
            }
            QuantKind::PropExists => {
                let mut all = Vec::new();
                let mut constraints = Vec::new();
                for _ in 0..self.team.len() {
                    let bits = self.alloc_uniform(q.tag);
                    constraints.push(self.tag_constraint(q.tag, &bits));
                    all.push(bits);
                }
                let mut env = env.clone();
                env.props
                    .insert(q.var.clone(), PropVal::TraceBits(Rc::new(all)));
                let inner = self.build_prefix(rest, env, body, at)?;
                constraints.push(inner);
                Ok(self.circuit.and(constraints))
            }
            QuantKind::UPropForall => {
                let mut parts = Vec::new();
                for seq in self.universal_range(q)? {
                    let mut env = env.clone();
                    env.props.insert(q.var.clone(), PropVal::Const(seq));
                    parts.push(self.build_prefix(rest, env, body, at)?);
                }
                Ok(self.circuit.and(parts))
            }
            QuantKind::PropForall => {
                let per_trace = self.universal_range(q)?;
                let n = self.team.len();
                let total = (per_trace.len() as u64).checked_pow(n as u32);
                match total {
                    Some(t) if t <= self.cap => {}
                    _ => {
                        return Err(HyperError::BoundOverflow {
                            var: q.var.clone(),
                            needed: total.unwrap_or(u64::MAX),
                            cap: self.cap,
                        })
                    }
                }
                let mut parts = Vec::new();
                let mut pick = vec![0usize; n];
                loop {
                    let seqs: Vec<UniformSeq> =
                        pick.iter().map(|&k| per_trace[k].clone()).collect();
                    let mut env = env.clone();
                    env.props
                        .insert(q.var.clone(), PropVal::Const(UniformSeq::never()));
                    // represent the per-trace choice as TraceBits of constants
                    let all: Vec<Vec<Sig>> = seqs
                        .iter()
                        .map(|s| {
                            (0..self.span())
                                .map(|p| if s.at(p) { Sig::T } else { Sig::F })
                                .collect()
                        })
                        .collect();
                    env.props
                        .insert(q.var.clone(), PropVal::TraceBits(Rc::new(all)));
                    parts.push(self.build_prefix(rest, env, body, at)?);
                    // odometer
                    let mut j = 0;
                    loop {
                        if j == n {
                            break;
                        }
                        pick[j] += 1;
                        if pick[j] < per_trace.len() {
                            break;
                        }
                        pick[j] = 0;
                        j += 1;
                    }
                    if j == n || n == 0 {
                        break;
                    }
                }
                Ok(self.circuit.and(parts))
            }
        }
    }

    /// Per-joint-position signals of a fresh quantified sequence of shape
    /// (`qstem`, `qloop`); positions past the stem read the loop bits, which
    /// is consistent across the joint loopback since `qloop` divides `cycle`.
    fn alloc_uniform(&mut self, tag: QuantTag) -> Vec<Sig> {
        let span = self.span();
        match tag {
            QuantTag::None => {
                let stem_bits: Vec<Sig> =
                    (0..self.qstem).map(|_| self.circuit.new_var()).collect();
                let loop_bits: Vec<Sig> =
                    (0..self.qloop).map(|_| self.circuit.new_var()).collect();
                (0..span)
                    .map(|p| {
                        if p < self.qstem {
                            stem_bits[p]
                        } else {
                            loop_bits[(p - self.qstem) % self.qloop]
                        }
                    })
                    .collect()
            }
            // exactly-one-level: true at one position k < qstem, false elsewhere
            QuantTag::ExactlyOneLevel => (0..span)
                .map(|p| {
                    if p < self.qstem {
                        self.circuit.new_var()
                    } else {
                        Sig::F
                    }
                })
                .collect(),
        }
    }

    fn tag_constraint(&mut self, tag: QuantTag, bits: &[Sig]) -> Sig {
        match tag {
            QuantTag::None => Sig::T,
            QuantTag::ExactlyOneLevel => {
                let stem_bits: Vec<Sig> = bits[..self.qstem].to_vec();
                self.circuit.exactly_one(&stem_bits)
            }
        }
    }

    fn universal_range(&self, q: &Quantifier) -> Result<Vec<UniformSeq>, HyperError> {
        match q.tag {
            QuantTag::ExactlyOneLevel => {
                Ok((0..self.ulevel.min(self.qstem)).map(UniformSeq::exactly_at).collect())
            }
            QuantTag::None => {
                let bits = self.qstem + self.qloop;
                let needed = 1u64 << bits.min(62);
                if bits > 62 || needed > self.cap {
                    return Err(HyperError::BoundOverflow {
                        var: q.var.clone(),
                        needed,
                        cap: self.cap,
                    });
                }
                let mut out = Vec::with_capacity(needed as usize);
                for mask in 0..needed {
                    let stem: Vec<bool> =
                        (0..self.qstem).map(|b| mask >> b & 1 == 1).collect();
                    let cycle: Vec<bool> = (0..self.qloop)
                        .map(|b| mask >> (self.qstem + b) & 1 == 1)
                        .collect();
                    out.push(UniformSeq { stem, cycle });
                }
                Ok(out)
            }
        }
    }

    fn prop_sig(&mut self, env: &Env, prop: &str, var: &str, pos: usize) -> Result<Sig, HyperError> {
        if let Some(v) = env.props.get(prop) {
            return Ok(match v {
                PropVal::Const(s) => {
                    if s.at(pos) {
                        Sig::T
                    } else {
                        Sig::F
                    }
                }
                PropVal::Bits(bits) => bits[pos],
                PropVal::TraceBits(per) => {
                    let t = *env
                        .traces
                        .get(var)
                        .ok_or_else(|| HyperError::UnboundTraceVar(var.to_string()))?;
                    per[t][pos]
                }
            });
        }
        let t = *env
            .traces
            .get(var)
            .ok_or_else(|| HyperError::UnboundTraceVar(var.to_string()))?;
        Ok(if self.team[t].letter_at(pos).contains(prop) {
            Sig::T
        } else {
            Sig::F
        })
    }

    fn build_body(
        &mut self,
        body: &Body,
        env: &Env,
        pos: usize,
        memo: &mut HashMap<(usize, usize), Sig>,
    ) -> Result<Sig, HyperError> {
        let key = (Rc::as_ptr(body) as usize, pos);
        if let Some(&s) = memo.get(&key) {
            return Ok(s);
        }
        let sig = match &**body {
            HyperBody::True => Sig::T,
            HyperBody::False => Sig::F,
            HyperBody::Lit { prop, var, positive } => {
                let s = self.prop_sig(env, prop, var, pos)?;
                if *positive {
                    s
                } else {
                    s.not()
                }
            }
            HyperBody::And(l, r) => {
                let a = self.build_body(l, env, pos, memo)?;
                let b = self.build_body(r, env, pos, memo)?;
                self.circuit.and2(a, b)
            }
            HyperBody::Or(l, r) => {
                let a = self.build_body(l, env, pos, memo)?;
                let b = self.build_body(r, env, pos, memo)?;
                self.circuit.or2(a, b)
            }
            HyperBody::Next(x) => {
                let nxt = self.reduce(pos + 1);
                self.build_body(x, env, nxt, memo)?
            }
            HyperBody::Until(l, r) => {
                if pos < self.stem {
                    let rr = self.build_body(r, env, pos, memo)?;
                    let ll = self.build_body(l, env, pos, memo)?;
                    let nxt = self.build_body(body, env, pos + 1, memo)?;
                    let cont = self.circuit.and2(ll, nxt);
                    self.circuit.or2(rr, cont)
                } else {
                    // one full period from a loop position
                    let mut disj = Vec::new();
                    let mut prefix = Vec::new();
                    for k in 0..self.cycle {
                        let p = self.stem + (pos - self.stem + k) % self.cycle;
                        let rr = self.build_body(r, env, p, memo)?;
                        let arm = self
                            .circuit
                            .and(prefix.iter().copied().chain([rr]));
                        disj.push(arm);
                        prefix.push(self.build_body(l, env, p, memo)?);
                    }
                    self.circuit.or(disj)
                }
            }
            HyperBody::WeakUntil(l, r) => {
                if pos < self.stem {
                    let rr = self.build_body(r, env, pos, memo)?;
                    let ll = self.build_body(l, env, pos, memo)?;
                    let nxt = self.build_body(body, env, pos + 1, memo)?;
                    let cont = self.circuit.and2(ll, nxt);
                    self.circuit.or2(rr, cont)
                } else {
                    let mut conj = Vec::new();
                    let mut any_r = Sig::F;
                    for k in 0..self.cycle {
                        let p = self.stem + (pos - self.stem + k) % self.cycle;
                        let rr = self.build_body(r, env, p, memo)?;
                        any_r = self.circuit.or2(any_r, rr);
                        let ll = self.build_body(l, env, p, memo)?;
                        conj.push(self.circuit.or2(ll, any_r));
                    }
                    self.circuit.and(conj)
                }
            }
        };
        memo.insert(key, sig);
        Ok(sig)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::letter;

    fn tr(stem: &[&[&str]], cycle: &[&[&str]]) -> LassoTrace {
        LassoTrace::new(
            stem.iter().map(|l| letter(l)).collect(),
            cycle.iter().map(|l| letter(l)).collect(),
        )
    }

    fn ev(team: &[LassoTrace], i: usize, text: &str) -> bool {
        let f = parse_hyper_formula(text).unwrap();
        eval_hyper_default(team, &HyperAssignment::default(), i, &f).unwrap()
    }

    #[test]
    fn hyper_round_trip() {
        for s in [
            "forall pi. G p@pi",
            "uexists p. forall pi. (F p@pi & G (!p@pi | G !a@pi))",
            "uexists1 r. forall pi. (r@pi & X G !r@pi)",
            "existsp q. exists pi. F (q@pi & a@pi)",
            "(p@x U q@x)",
        ] {
            let f = parse_hyper_formula(s).unwrap();
            let printed = f.to_string();
            assert_eq!(parse_hyper_formula(&printed).unwrap(), f, "case {s}");
        }
    }

    #[test]
    fn trace_quantifiers() {
        let team = vec![tr(&[], &[&["p"]])];
        assert!(ev(&team, 0, "forall pi. G p@pi"));
        let team = vec![tr(&[], &[&["p"]]), tr(&[], &[&[]])];
        assert!(!ev(&team, 0, "forall pi. G p@pi"));
        assert!(ev(&team, 0, "exists pi. G p@pi"));
        // two quantifiers, both orders instantiated
        let team = vec![tr(&[&["p"]], &[&[]]), tr(&[&[], &["p"]], &[&[]])];
        assert!(!ev(
            &team,
            0,
            "forall pi1. forall pi2. G ((p@pi1 & p@pi2) | (!p@pi1 & !p@pi2))"
        ));
    }

    #[test]
    fn empty_team_quantifiers() {
        assert!(ev(&[], 0, "forall pi. p@pi"));
        assert!(!ev(&[], 0, "exists pi. p@pi"));
    }

    #[test]
    fn uniform_exists_witness() {
        // all traces drop a from step 2 on
        let team = vec![
            tr(&[&["a"], &["a"]], &[&[]]),
            tr(&[&["a"]], &[&[]]),
        ];
        assert!(ev(
            &team,
            0,
            "uexists p. forall pi. (F p@pi & G (!p@pi | G !a@pi))"
        ));
        // one trace keeps a forever: no level works
        let team = vec![tr(&[&["a"]], &[&[]]), tr(&[], &[&["a"]])];
        assert!(!ev(
            &team,
            0,
            "uexists p. forall pi. (F p@pi & G (!p@pi | G !a@pi))"
        ));
    }

    #[test]
    fn exactly_one_level_exists() {
        let team = vec![tr(&[&[], &[], &["p"]], &[&[]])];
        assert!(ev(&team, 0, "uexists1 r. forall pi. G (!r@pi | p@pi)"));
        let team = vec![tr(&[], &[&[]])];
        assert!(!ev(&team, 0, "uexists1 r. forall pi. G (!r@pi | p@pi)"));
        // the constraint forces r to actually fire somewhere
        assert!(ev(&team, 0, "uexists1 r. forall pi. F r@pi"));
        assert!(!ev(&team, 0, "uexists1 r. forall pi. G !r@pi"));
    }

    #[test]
    fn uniform_forall() {
        let team = vec![tr(&[], &[&["p"]])];
        // for every EOL marker position, p holds there
        assert!(ev(&team, 0, "uforall1 r. forall pi. G (!r@pi | p@pi)"));
        let team = vec![tr(&[&["p"]], &[&[]])];
        assert!(!ev(&team, 0, "uforall1 r. forall pi. G (!r@pi | p@pi)"));
    }

    #[test]
    fn non_uniform_exists_colors_independently() {
        // mark on each trace the step where a first holds; non-uniform q can,
        // uniform q cannot
        let team = vec![tr(&[&["a"]], &[&[]]), tr(&[&[], &["a"]], &[&[]])];
        assert!(ev(&team, 0, "existsp q. forall pi. G ((q@pi & a@pi) | (!q@pi & !a@pi))"));
        assert!(!ev(&team, 0, "uexists q. forall pi. G ((q@pi & a@pi) | (!q@pi & !a@pi))"));
    }

    #[test]
    fn free_assignment_and_presets() {
        let team = vec![tr(&[&[], &["p"]], &[&[]])];
        let f = parse_hyper_formula("G (!r@pi | p@pi)").unwrap();
        let mut asg = HyperAssignment::default();
        asg.traces.insert("pi".to_string(), 0);
        asg.uniform.insert("r".to_string(), UniformSeq::exactly_at(1));
        assert!(eval_hyper_default(&team, &asg, 0, &f).unwrap());
        asg.uniform.insert("r".to_string(), UniformSeq::exactly_at(0));
        assert!(!eval_hyper_default(&team, &asg, 0, &f).unwrap());
    }

    #[test]
    fn unbound_trace_var_errors() {
        let team = vec![tr(&[], &[&[]])];
        let f = parse_hyper_formula("G p@pi").unwrap();
        assert!(matches!(
            eval_hyper_default(&team, &HyperAssignment::default(), 0, &f),
            Err(HyperError::UnboundTraceVar(_))
        ));
    }

    #[test]
    fn plain_universal_cap_guard() {
        let team = vec![tr(&[], &[&[]])];
        let f = parse_hyper_formula("uforall q. forall pi. (q@pi | !q@pi)").unwrap();
        let mut bounds = QuantBounds::default_for(&team, 0, &f);
        bounds.cap = 2;
        assert!(matches!(
            eval_hyper(&team, &HyperAssignment::default(), 0, &f, &bounds),
            Err(HyperError::BoundOverflow { .. })
        ));
        bounds.cap = 1 << 16;
        assert!(eval_hyper(&team, &HyperAssignment::default(), 0, &f, &bounds).unwrap());
    }

    #[test]
    fn plain_uniform_forall_small() {
        // over a 1-position stem + 1-loop space: q arbitrary; G(q ∨ ¬q) holds,
        // F q does not (the all-false sequence refutes it)
        let team = vec![tr(&[], &[&[]])];
        let f = parse_hyper_formula("uforall q. forall pi. F q@pi").unwrap();
        let bounds = QuantBounds {
            stem_max: 2,
            loop_lcm: 1,
            universal_level_max: None,
            cap: 1 << 16,
        };
        assert!(!eval_hyper(&team, &HyperAssignment::default(), 0, &f, &bounds).unwrap());
    }

    /// Brute-force oracle: enumerate all trace assignments directly.
    #[test]
    fn trace_quantifier_exactness() {
        use crate::team_eval::eval_ltl;
        let team = vec![
            tr(&[&["a"]], &[&["b"]]),
            tr(&[], &[&["a"], &[]]),
            tr(&[&["b"]], &[&["a"]]),
        ];
        // ∀π1 ∃π2: F(a@π1 & b@π2) — brute force over 9 pairs using eval_ltl on
        // a merged two-trace product is awkward; instead compare against
        // direct enumeration with the evaluator itself on closed sub-calls.
        let f = parse_hyper_formula("forall pi1. exists pi2. F (a@pi1 & b@pi2)").unwrap();
        let got = eval_hyper_default(&team, &HyperAssignment::default(), 0, &f).unwrap();
        let inner = parse_hyper_formula("F (a@pi1 & b@pi2)").unwrap();
        let mut brute = true;
        for t1 in 0..team.len() {
            let mut any = false;
            for t2 in 0..team.len() {
                let mut asg = HyperAssignment::default();
                asg.traces.insert("pi1".to_string(), t1);
                asg.traces.insert("pi2".to_string(), t2);
                any |= eval_hyper_default(&team, &asg, 0, &inner).unwrap();
            }
            brute &= any;
        }
        assert_eq!(got, brute);
        // and the closed sub-calls agree with single-trace LTL
        let fp = crate::formula::parse_ltl_formula("F (a & b)").unwrap();
        for (t, trace) in team.iter().enumerate() {
            let mut asg = HyperAssignment::default();
            asg.traces.insert("pi".to_string(), t);
            let one = parse_hyper_formula("F (a@pi & b@pi)").unwrap();
            assert_eq!(
                eval_hyper_default(&team, &asg, 0, &one).unwrap(),
                eval_ltl(trace, 0, &fp)
            );
        }
    }

    #[test]
    fn eval_index_matters() {
        let team = vec![tr(&[&["p"]], &[&[]])];
        let f = parse_hyper_formula("forall pi. p@pi").unwrap();
        assert!(eval_hyper_default(&team, &HyperAssignment::default(), 0, &f).unwrap());
        assert!(!eval_hyper_default(&team, &HyperAssignment::default(), 1, &f).unwrap());
    }

    #[test]
    fn bound_monotonicity_exists() {
        // ∃-only propositional prefix: enlarging bounds never flips true→false
        let team = vec![tr(&[&[], &[], &[], &["a"]], &[&[]])];
        let f = parse_hyper_formula("uexists1 r. forall pi. F (r@pi & a@pi)").unwrap();
        let small = QuantBounds {
            stem_max: 2,
            loop_lcm: 1,
            universal_level_max: None,
            cap: 1 << 16,
        };
        let big = QuantBounds {
            stem_max: 6,
            loop_lcm: 1,
            universal_level_max: None,
            cap: 1 << 16,
        };
        let at_small = eval_hyper(&team, &HyperAssignment::default(), 0, &f, &small).unwrap();
        let at_big = eval_hyper(&team, &HyperAssignment::default(), 0, &f, &big).unwrap();
        assert!(!at_small && at_big, "witness needs level 3");
    }
}
