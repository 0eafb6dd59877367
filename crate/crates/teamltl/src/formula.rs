//! Formula ASTs, parser, printer and source-level rewriters.
//!
//! Both ASTs are kept in negation normal form: classical negation occurs
//! only on propositions (and on `T`, which denotes the falsum). `F`/`G`
//! are parse-time sugar for `T U φ` and `φ W !T`.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

/// Classical LTL in negation normal form. Atom arguments of dependence,
/// inclusion and generalized atoms live here.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum LtlFormula {
    True,
    False,
    Prop(String),
    NegProp(String),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    WeakUntil(Box<LtlFormula>, Box<LtlFormula>),
}

impl LtlFormula {
    pub fn prop(name: &str) -> LtlFormula {
        LtlFormula::Prop(name.to_string())
    }

    pub fn neg_prop(name: &str) -> LtlFormula {
        LtlFormula::NegProp(name.to_string())
    }

    pub fn and(l: LtlFormula, r: LtlFormula) -> LtlFormula {
        LtlFormula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: LtlFormula, r: LtlFormula) -> LtlFormula {
        LtlFormula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: LtlFormula) -> LtlFormula {
        LtlFormula::Next(Box::new(f))
    }

    pub fn until(l: LtlFormula, r: LtlFormula) -> LtlFormula {
        LtlFormula::Until(Box::new(l), Box::new(r))
    }

    pub fn weak_until(l: LtlFormula, r: LtlFormula) -> LtlFormula {
        LtlFormula::WeakUntil(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: LtlFormula) -> LtlFormula {
        LtlFormula::until(LtlFormula::True, f)
    }

    pub fn globally(f: LtlFormula) -> LtlFormula {
        LtlFormula::weak_until(f, LtlFormula::False)
    }

    /// Negation, pushed to atoms.
    pub fn negated(&self) -> LtlFormula {
        use LtlFormula::*;
        match self {
            True => False,
            False => True,
            Prop(p) => NegProp(p.clone()),
            NegProp(p) => Prop(p.clone()),
            And(l, r) => LtlFormula::or(l.negated(), r.negated()),
            Or(l, r) => LtlFormula::and(l.negated(), r.negated()),
            Next(f) => LtlFormula::next(f.negated()),
            // ¬(φ U ψ) = ¬ψ W (¬φ ∧ ¬ψ),  ¬(φ W ψ) = ¬ψ U (¬φ ∧ ¬ψ)
            Until(l, r) => LtlFormula::weak_until(
                r.negated(),
                LtlFormula::and(l.negated(), r.negated()),
            ),
            WeakUntil(l, r) => LtlFormula::until(
                r.negated(),
                LtlFormula::and(l.negated(), r.negated()),
            ),
        }
    }

    /// `φ^b` from the generalized-atom expansion: `φ` if `b`, else its negation.
    pub fn signed(&self, b: bool) -> LtlFormula {
        if b {
            self.clone()
        } else {
            self.negated()
        }
    }

    pub fn props(&self, out: &mut BTreeSet<String>) {
        use LtlFormula::*;
        match self {
            True | False => {}
            Prop(p) | NegProp(p) => {
                out.insert(p.clone());
            }
            Next(f) => f.props(out),
            And(l, r) | Or(l, r) | Until(l, r) | WeakUntil(l, r) => {
                l.props(out);
                r.props(out);
            }
        }
    }

    pub fn size(&self) -> usize {
        use LtlFormula::*;
        match self {
            True | False | Prop(_) | NegProp(_) => 1,
            Next(f) => 1 + f.size(),
            And(l, r) | Or(l, r) | Until(l, r) | WeakUntil(l, r) => 1 + l.size() + r.size(),
        }
    }
}

/// An n-ary family of Boolean relations, the second-order truth table of a
/// generalized atom. Relations are given extensionally as sets of n-bit tuples.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BoolRelationFamily {
    pub name: String,
    pub arity: usize,
    pub relations: BTreeSet<BTreeSet<Vec<bool>>>,
    downward_closed: bool,
}

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum FamilyError {
    #[error("relation family {0:?} is empty")]
    Empty(String),
    #[error("relation family {0:?}: tuple of arity {1}, expected {2}")]
    ArityMismatch(String, usize, usize),
}

impl BoolRelationFamily {
    pub fn new(
        name: &str,
        arity: usize,
        relations: BTreeSet<BTreeSet<Vec<bool>>>,
    ) -> Result<BoolRelationFamily, FamilyError> {
        if relations.is_empty() {
            return Err(FamilyError::Empty(name.to_string()));
        }
        for rel in &relations {
            for tup in rel {
                if tup.len() != arity {
                    return Err(FamilyError::ArityMismatch(
                        name.to_string(),
                        tup.len(),
                        arity,
                    ));
                }
            }
        }
        // Downward closure is equivalent to closure under removing one tuple.
        let downward_closed = relations.iter().all(|rel| {
            rel.iter().all(|tup| {
                let mut smaller = rel.clone();
                smaller.remove(tup);
                relations.contains(&smaller)
            })
        });
        Ok(BoolRelationFamily {
            name: name.to_string(),
            arity,
            relations,
            downward_closed,
        })
    }

    pub fn is_downward_closed(&self) -> bool {
        self.downward_closed
    }

    pub fn contains(&self, realized: &BTreeSet<Vec<bool>>) -> bool {
        self.relations.contains(realized)
    }
}

/// TeamLTL with the extension atoms and connectives.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum TeamFormula {
    True,
    False,
    Prop(String),
    NegProp(String),
    And(Box<TeamFormula>, Box<TeamFormula>),
    /// Split disjunction `|`: the team divides into two covering subteams.
    SplitOr(Box<TeamFormula>, Box<TeamFormula>),
    /// Boolean disjunction `vv`: the whole team satisfies one side.
    BoolOr(Box<TeamFormula>, Box<TeamFormula>),
    /// Boolean negation `~`.
    BoolNeg(Box<TeamFormula>),
    Next(Box<TeamFormula>),
    Until(Box<TeamFormula>, Box<TeamFormula>),
    WeakUntil(Box<TeamFormula>, Box<TeamFormula>),
    /// `dep(φ1..φn; ψ)`: the ψ-value is a function of the φ-values.
    Dep(Vec<LtlFormula>, LtlFormula),
    /// `inc(φ1..φn; ψ1..ψn)`: every left value combination occurs on the right.
    Inc(Vec<LtlFormula>, Vec<LtlFormula>),
    /// `A1`: every singleton subteam satisfies the operand.
    FlatAll(Box<TeamFormula>),
    /// `A`: every subteam satisfies the operand.
    SubteamAll(Box<TeamFormula>),
    /// `NE`: the team is non-empty.
    NonEmpty,
    /// `orl`: split disjunction with a non-empty left part.
    LeftOr(Box<TeamFormula>, Box<TeamFormula>),
    /// `gen[NAME](φ1..φn)`: realized value tuples form a relation of the family.
    GenAtom(Rc<BoolRelationFamily>, Vec<LtlFormula>),
}

impl TeamFormula {
    pub fn prop(name: &str) -> TeamFormula {
        TeamFormula::Prop(name.to_string())
    }

    pub fn neg_prop(name: &str) -> TeamFormula {
        TeamFormula::NegProp(name.to_string())
    }

    pub fn and(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::And(Box::new(l), Box::new(r))
    }

    pub fn split_or(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::SplitOr(Box::new(l), Box::new(r))
    }

    pub fn bool_or(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::BoolOr(Box::new(l), Box::new(r))
    }

    pub fn bool_neg(f: TeamFormula) -> TeamFormula {
        TeamFormula::BoolNeg(Box::new(f))
    }

    pub fn next(f: TeamFormula) -> TeamFormula {
        TeamFormula::Next(Box::new(f))
    }

    pub fn until(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::Until(Box::new(l), Box::new(r))
    }

    pub fn weak_until(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::WeakUntil(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: TeamFormula) -> TeamFormula {
        TeamFormula::until(TeamFormula::True, f)
    }

    pub fn globally(f: TeamFormula) -> TeamFormula {
        TeamFormula::weak_until(f, TeamFormula::False)
    }

    pub fn flat_all(f: TeamFormula) -> TeamFormula {
        TeamFormula::FlatAll(Box::new(f))
    }

    pub fn subteam_all(f: TeamFormula) -> TeamFormula {
        TeamFormula::SubteamAll(Box::new(f))
    }

    pub fn left_or(l: TeamFormula, r: TeamFormula) -> TeamFormula {
        TeamFormula::LeftOr(Box::new(l), Box::new(r))
    }

    pub fn from_ltl(f: &LtlFormula) -> TeamFormula {
        use LtlFormula as L;
        match f {
            L::True => TeamFormula::True,
            L::False => TeamFormula::False,
            L::Prop(p) => TeamFormula::Prop(p.clone()),
            L::NegProp(p) => TeamFormula::NegProp(p.clone()),
            L::And(l, r) => TeamFormula::and(Self::from_ltl(l), Self::from_ltl(r)),
            L::Or(l, r) => TeamFormula::split_or(Self::from_ltl(l), Self::from_ltl(r)),
            L::Next(f) => TeamFormula::next(Self::from_ltl(f)),
            L::Until(l, r) => TeamFormula::until(Self::from_ltl(l), Self::from_ltl(r)),
            L::WeakUntil(l, r) => {
                TeamFormula::weak_until(Self::from_ltl(l), Self::from_ltl(r))
            }
        }
    }

    /// Downcast into plain LTL; split disjunction becomes classical or.
    pub fn to_ltl(&self) -> Option<LtlFormula> {
        use TeamFormula as T;
        Some(match self {
            T::True => LtlFormula::True,
            T::False => LtlFormula::False,
            T::Prop(p) => LtlFormula::Prop(p.clone()),
            T::NegProp(p) => LtlFormula::NegProp(p.clone()),
            T::And(l, r) => LtlFormula::and(l.to_ltl()?, r.to_ltl()?),
            T::SplitOr(l, r) => LtlFormula::or(l.to_ltl()?, r.to_ltl()?),
            T::Next(f) => LtlFormula::next(f.to_ltl()?),
            T::Until(l, r) => LtlFormula::until(l.to_ltl()?, r.to_ltl()?),
            T::WeakUntil(l, r) => LtlFormula::weak_until(l.to_ltl()?, r.to_ltl()?),
            _ => return None,
        })
    }

    pub fn size(&self) -> usize {
        use TeamFormula::*;
        match self {
            True | False | Prop(_) | NegProp(_) | NonEmpty => 1,
            Next(f) | BoolNeg(f) | FlatAll(f) | SubteamAll(f) => 1 + f.size(),
            And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r)
            | LeftOr(l, r) => 1 + l.size() + r.size(),
            Dep(args, t) => 1 + args.iter().map(LtlFormula::size).sum::<usize>() + t.size(),
            Inc(ls, rs) => {
                1 + ls.iter().chain(rs.iter()).map(LtlFormula::size).sum::<usize>()
            }
            GenAtom(_, args) => 1 + args.iter().map(LtlFormula::size).sum::<usize>(),
        }
    }

    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        use TeamFormula::*;
        match self {
            True | False | NonEmpty => {}
            Prop(p) | NegProp(p) => {
                out.insert(p.clone());
            }
            Next(f) | BoolNeg(f) | FlatAll(f) | SubteamAll(f) => f.collect_props(out),
            And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r)
            | LeftOr(l, r) => {
                l.collect_props(out);
                r.collect_props(out);
            }
            Dep(args, t) => {
                args.iter().for_each(|a| a.props(out));
                t.props(out);
            }
            Inc(ls, rs) => ls.iter().chain(rs.iter()).for_each(|a| a.props(out)),
            GenAtom(_, args) => args.iter().for_each(|a| a.props(out)),
        }
    }

    /// Maximum nesting depth of `X`/`U`/`W`.
    pub fn temporal_depth(&self) -> usize {
        use TeamFormula::*;
        match self {
            True | False | Prop(_) | NegProp(_) | NonEmpty | Dep(..) | Inc(..)
            | GenAtom(..) => 0,
            BoolNeg(f) | FlatAll(f) | SubteamAll(f) => f.temporal_depth(),
            Next(f) => 1 + f.temporal_depth(),
            And(l, r) | SplitOr(l, r) | BoolOr(l, r) | LeftOr(l, r) => {
                l.temporal_depth().max(r.temporal_depth())
            }
            Until(l, r) | WeakUntil(l, r) => {
                1 + l.temporal_depth().max(r.temporal_depth())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", TeamFormula::from_ltl(self))
    }
}

// binary nodes self-parenthesize, so unary operands print bare
fn write_operand(f: &mut fmt::Formatter<'_>, x: &TeamFormula) -> fmt::Result {
    write!(f, "{x}")
}

fn join_ltl(args: &[LtlFormula]) -> String {
    args.iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for TeamFormula {
    /// Fully parenthesized canonical form with `F`/`G` sugar; `parse ∘ render = id`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TeamFormula::*;
        match self {
            True => write!(f, "T"),
            False => write!(f, "!T"),
            Prop(p) => write!(f, "{p}"),
            NegProp(p) => write!(f, "!{p}"),
            NonEmpty => write!(f, "NE"),
            Until(l, r) if **l == True => {
                write!(f, "F ")?;
                write_operand(f, r)
            }
            WeakUntil(l, r) if **r == False => {
                write!(f, "G ")?;
                write_operand(f, l)
            }
            Next(x) => {
                write!(f, "X ")?;
                write_operand(f, x)
            }
            BoolNeg(x) => {
                write!(f, "~")?;
                write_operand(f, x)
            }
            FlatAll(x) => {
                write!(f, "A1 ")?;
                write_operand(f, x)
            }
            SubteamAll(x) => {
                write!(f, "A ")?;
                write_operand(f, x)
            }
            And(l, r) => write!(f, "({l} & {r})"),
            SplitOr(l, r) => write!(f, "({l} | {r})"),
            BoolOr(l, r) => write!(f, "({l} vv {r})"),
            LeftOr(l, r) => write!(f, "({l} orl {r})"),
            Until(l, r) => write!(f, "({l} U {r})"),
            WeakUntil(l, r) => write!(f, "({l} W {r})"),
            Dep(args, t) => write!(f, "dep({}; {t})", join_ltl(args)),
            Inc(ls, rs) => write!(f, "inc({}; {})", join_ltl(ls), join_ltl(rs)),
            GenAtom(fam, args) => write!(f, "gen[{}]({})", fam.name, join_ltl(args)),
        }
    }
}

pub fn render(f: &TeamFormula) -> String {
    f.to_string()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum ParseError {
    #[error("at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("at {pos}: negation may only be applied to a proposition or T")]
    BadNegation { pos: usize },
    #[error("at {pos}: {context} arguments must be plain LTL")]
    NotLtl { pos: usize, context: &'static str },
    #[error("at {pos}: unknown relation family {name:?}")]
    UnknownFamily { pos: usize, name: String },
    #[error("at {pos}: inc needs equally long tuples (got {left} and {right})")]
    IncArity { pos: usize, left: usize, right: usize },
    #[error("at {pos}: gen[{name}] expects {expected} arguments, got {got}")]
    GenArity {
        pos: usize,
        name: String,
        expected: usize,
        got: usize,
    },
}

/// Named relation families available to `gen[NAME](...)`.
#[derive(Default, Clone, Debug)]
pub struct FamilyRegistry {
    families: Vec<Rc<BoolRelationFamily>>,
}

impl FamilyRegistry {
    pub fn new() -> FamilyRegistry {
        FamilyRegistry::default()
    }

    pub fn insert(&mut self, fam: BoolRelationFamily) {
        self.families.retain(|f| f.name != fam.name);
        self.families.push(Rc::new(fam));
    }

    pub fn get(&self, name: &str) -> Option<Rc<BoolRelationFamily>> {
        self.families.iter().find(|f| f.name == name).cloned()
    }

    /// One relation per line, comma-separated n-bit tuples in braces:
    /// `NAME: {01}, {10, 11}` declares a 2-ary family of two relations.
    pub fn parse(text: &str) -> Result<FamilyRegistry, String> {
        let mut reg = FamilyRegistry::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, rest) = line
                .split_once(':')
                .ok_or_else(|| format!("line {}: expected NAME: relations", lineno + 1))?;
            let name = name.trim();
            let mut relations = BTreeSet::new();
            let mut arity = None;
            let mut rest = rest.trim();
            while !rest.is_empty() {
                let open = rest
                    .find('{')
                    .ok_or_else(|| format!("line {}: expected '{{'", lineno + 1))?;
                let close = rest[open..]
                    .find('}')
                    .ok_or_else(|| format!("line {}: unterminated '{{'", lineno + 1))?
                    + open;
                let body = &rest[open + 1..close];
                let mut rel = BTreeSet::new();
                for tup in body.split(',') {
                    let tup = tup.trim();
                    if tup.is_empty() {
                        continue;
                    }
                    let bits: Option<Vec<bool>> = tup
                        .chars()
                        .map(|c| match c {
                            '0' => Some(false),
                            '1' => Some(true),
                            _ => None,
                        })
                        .collect();
                    let bits = bits
                        .ok_or_else(|| format!("line {}: bad tuple {tup:?}", lineno + 1))?;
                    match arity {
                        None => arity = Some(bits.len()),
                        Some(a) if a != bits.len() => {
                            return Err(format!("line {}: mixed arities", lineno + 1))
                        }
                        _ => {}
                    }
                    rel.insert(bits);
                }
                relations.insert(rel);
                rest = rest[close + 1..].trim_start_matches([',', ' ', '\t']);
            }
            let arity = arity.unwrap_or(1);
            let fam = BoolRelationFamily::new(name, arity, relations)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
            reg.insert(fam);
        }
        Ok(reg)
    }
}

#[derive(Debug, PartialEq, Clone)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Amp,
    Pipe,
    Bang,
    Tilde,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' | '.' => {
                i += 1;
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '!' => Tok::Bang,
            '~' => Tok::Tilde,
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric()
                        || bytes[i] == b'_'
                        || bytes[i] == b'@')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    registry: &'a FamilyRegistry,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(ref t) if t == want => Ok(()),
            got => Err(ParseError::Syntax {
                pos,
                msg: format!("expected {what}, got {got:?}"),
            }),
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_orl(&mut self) -> Result<TeamFormula, ParseError> {
        let mut f = self.parse_vv()?;
        while self.eat_ident("orl") {
            let r = self.parse_vv()?;
            f = TeamFormula::left_or(f, r);
        }
        Ok(f)
    }

    fn parse_vv(&mut self) -> Result<TeamFormula, ParseError> {
        let mut f = self.parse_split_or()?;
        while self.eat_ident("vv") {
            let r = self.parse_split_or()?;
            f = TeamFormula::bool_or(f, r);
        }
        Ok(f)
    }

    fn parse_split_or(&mut self) -> Result<TeamFormula, ParseError> {
        let mut f = self.parse_and()?;
        while matches!(self.peek(), Some(Tok::Pipe)) {
            self.bump();
            let r = self.parse_and()?;
            f = TeamFormula::split_or(f, r);
        }
        Ok(f)
    }

    fn parse_and(&mut self) -> Result<TeamFormula, ParseError> {
        let mut f = self.parse_until()?;
        while matches!(self.peek(), Some(Tok::Amp)) {
            self.bump();
            let r = self.parse_until()?;
            f = TeamFormula::and(f, r);
        }
        Ok(f)
    }

    fn parse_until(&mut self) -> Result<TeamFormula, ParseError> {
        let l = self.parse_unary()?;
        if self.eat_ident("U") {
            let r = self.parse_until()?;
            Ok(TeamFormula::until(l, r))
        } else if self.eat_ident("W") {
            let r = self.parse_until()?;
            Ok(TeamFormula::weak_until(l, r))
        } else {
            Ok(l)
        }
    }

    fn parse_unary(&mut self) -> Result<TeamFormula, ParseError> {
        if self.eat_ident("X") {
            return Ok(TeamFormula::next(self.parse_unary()?));
        }
        if self.eat_ident("F") {
            return Ok(TeamFormula::eventually(self.parse_unary()?));
        }
        if self.eat_ident("G") {
            return Ok(TeamFormula::globally(self.parse_unary()?));
        }
        if self.eat_ident("A1") {
            return Ok(TeamFormula::flat_all(self.parse_unary()?));
        }
        if self.eat_ident("A") {
            return Ok(TeamFormula::subteam_all(self.parse_unary()?));
        }
        if matches!(self.peek(), Some(Tok::Tilde)) {
            self.bump();
            return Ok(TeamFormula::bool_neg(self.parse_unary()?));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<TeamFormula, ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Bang) => {
                let pos = self.here();
                match self.bump() {
                    Some(Tok::Ident(w)) if w == "T" => Ok(TeamFormula::False),
                    Some(Tok::Ident(w)) if !is_keyword(&w) => Ok(TeamFormula::NegProp(w)),
                    _ => Err(ParseError::BadNegation { pos }),
                }
            }
            Some(Tok::LParen) => {
                let f = self.parse_orl()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(f)
            }
            Some(Tok::Ident(w)) => match w.as_str() {
                "T" => Ok(TeamFormula::True),
                "NE" => Ok(TeamFormula::NonEmpty),
                "dep" => self.parse_dep(pos),
                "inc" => self.parse_inc(pos),
                "gen" => self.parse_gen(pos),
                w if !is_keyword(w) => Ok(TeamFormula::Prop(w.to_string())),
                w => Err(ParseError::Syntax {
                    pos,
                    msg: format!("unexpected keyword {w:?}"),
                }),
            },
            got => Err(ParseError::Syntax {
                pos,
                msg: format!("expected a formula, got {got:?}"),
            }),
        }
    }

    fn parse_ltl_args(
        &mut self,
        context: &'static str,
        stop_at_semi: bool,
    ) -> Result<Vec<LtlFormula>, ParseError> {
        let mut args = Vec::new();
        loop {
            let pos = self.here();
            let f = self.parse_split_or()?;
            let ltl = f.to_ltl().ok_or(ParseError::NotLtl { pos, context })?;
            args.push(ltl);
            match self.peek() {
                Some(Tok::Comma) => {
                    self.bump();
                }
                Some(Tok::Semi) if stop_at_semi => break,
                Some(Tok::RParen) => break,
                _ => {
                    return Err(ParseError::Syntax {
                        pos: self.here(),
                        msg: "expected ',', ';' or ')'".to_string(),
                    })
                }
            }
        }
        Ok(args)
    }

    fn parse_dep(&mut self, _pos: usize) -> Result<TeamFormula, ParseError> {
        self.expect(&Tok::LParen, "'('")?;
        // dep(;ψ) is the 0-ary constancy atom
        let args = if matches!(self.peek(), Some(Tok::Semi)) {
            Vec::new()
        } else {
            self.parse_ltl_args("dep", true)?
        };
        self.expect(&Tok::Semi, "';'")?;
        let pos = self.here();
        let target = self
            .parse_split_or()?
            .to_ltl()
            .ok_or(ParseError::NotLtl { pos, context: "dep" })?;
        self.expect(&Tok::RParen, "')'")?;
        Ok(TeamFormula::Dep(args, target))
    }

    fn parse_inc(&mut self, pos: usize) -> Result<TeamFormula, ParseError> {
        self.expect(&Tok::LParen, "'('")?;
        let left = self.parse_ltl_args("inc", true)?;
        self.expect(&Tok::Semi, "';'")?;
        let right = self.parse_ltl_args("inc", false)?;
        self.expect(&Tok::RParen, "')'")?;
        if left.len() != right.len() {
            return Err(ParseError::IncArity {
                pos,
                left: left.len(),
                right: right.len(),
            });
        }
        Ok(TeamFormula::Inc(left, right))
    }

    fn parse_gen(&mut self, pos: usize) -> Result<TeamFormula, ParseError> {
        self.expect(&Tok::LBracket, "'['")?;
        let name = match self.bump() {
            Some(Tok::Ident(w)) => w,
            got => {
                return Err(ParseError::Syntax {
                    pos: self.here(),
                    msg: format!("expected family name, got {got:?}"),
                })
            }
        };
        self.expect(&Tok::RBracket, "']'")?;
        let fam = self
            .registry
            .get(&name)
            .ok_or(ParseError::UnknownFamily { pos, name: name.clone() })?;
        self.expect(&Tok::LParen, "'('")?;
        let args = self.parse_ltl_args("gen", false)?;
        self.expect(&Tok::RParen, "')'")?;
        if args.len() != fam.arity {
            return Err(ParseError::GenArity {
                pos,
                name,
                expected: fam.arity,
                got: args.len(),
            });
        }
        Ok(TeamFormula::GenAtom(fam, args))
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(
        w,
        "U" | "W" | "X" | "F" | "G" | "A" | "A1" | "NE" | "T" | "vv" | "orl" | "dep"
            | "inc" | "gen"
    )
}

pub fn parse_team_formula(text: &str) -> Result<TeamFormula, ParseError> {
    parse_team_formula_with(text, &FamilyRegistry::default())
}

pub fn parse_team_formula_with(
    text: &str,
    registry: &FamilyRegistry,
) -> Result<TeamFormula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        registry,
    };
    let f = p.parse_orl()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::Syntax {
            pos: p.here(),
            msg: "trailing input".to_string(),
        });
    }
    Ok(f)
}

pub fn parse_ltl_formula(text: &str) -> Result<LtlFormula, ParseError> {
    let f = parse_team_formula(text)?;
    f.to_ltl().ok_or(ParseError::NotLtl {
        pos: 0,
        context: "ltl",
    })
}

// ---------------------------------------------------------------------------
// Generalized-atom elimination
// ---------------------------------------------------------------------------

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum EliminationError {
    #[error("extensional expansion too large: family {name:?} over arity {arity}")]
    FamilyTooLarge { name: String, arity: usize },
    #[error("unsupported connective for flat elimination: {0}")]
    UnsupportedNode(String),
}

/// Cap on `Σ_{R∈G} |R|` before atom expansion refuses to materialize.
const EXPANSION_CAP: usize = 1 << 14;

/// The relation family defining `dep(φ1..φn; ψ)`: graphs of partial functions
/// `{0,1}^n ⇀ {0,1}`.
pub fn dep_family(n: usize) -> BoolRelationFamily {
    let mut relations = BTreeSet::new();
    let domain: Vec<Vec<bool>> = bit_tuples(n);
    // choice per domain point: absent / maps to 0 / maps to 1
    let mut stack = vec![(0usize, BTreeSet::new())];
    while let Some((i, rel)) = stack.pop() {
        if i == domain.len() {
            relations.insert(rel);
            continue;
        }
        for choice in 0..3u8 {
            let mut rel = rel.clone();
            if choice > 0 {
                let mut tup = domain[i].clone();
                tup.push(choice == 2);
                rel.insert(tup);
            }
            stack.push((i + 1, rel));
        }
    }
    BoolRelationFamily::new("dep", n + 1, relations).unwrap()
}

/// The relation family defining the n-ary inclusion atom: relations over
/// `{0,1}^{2n}` whose left projection is contained in the right projection.
pub fn inc_family(n: usize) -> Result<BoolRelationFamily, EliminationError> {
    if n > 1 {
        // 2^(4^n) candidate relations; anything beyond n = 1 is out of reach
        return Err(EliminationError::FamilyTooLarge {
            name: "inc".to_string(),
            arity: 2 * n,
        });
    }
    let tuples = bit_tuples(2 * n);
    let mut relations = BTreeSet::new();
    for mask in 0u32..(1 << tuples.len()) {
        let rel: BTreeSet<Vec<bool>> = tuples
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, t)| t.clone())
            .collect();
        let left: BTreeSet<&[bool]> = rel.iter().map(|t| &t[..n]).collect();
        let right: BTreeSet<&[bool]> = rel.iter().map(|t| &t[n..]).collect();
        if left.is_subset(&right) {
            relations.insert(rel);
        }
    }
    Ok(BoolRelationFamily::new("inc", 2 * n, relations).unwrap())
}

fn bit_tuples(n: usize) -> Vec<Vec<bool>> {
    (0u32..(1 << n))
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
        .collect()
}

fn expand_gen_atom(
    fam: &BoolRelationFamily,
    args: &[LtlFormula],
) -> Result<TeamFormula, EliminationError> {
    let weight: usize = fam.relations.iter().map(|r| r.len().max(1)).sum();
    if weight > EXPANSION_CAP {
        return Err(EliminationError::FamilyTooLarge {
            name: fam.name.clone(),
            arity: fam.arity,
        });
    }
    let dc = fam.is_downward_closed();
    let mut disjuncts = Vec::new();
    for rel in &fam.relations {
        if dc && rel.is_empty() && fam.relations.len() > 1 {
            // the empty relation's disjunct only admits the empty team,
            // which every other disjunct admits as well
            continue;
        }
        let mut splits: Option<TeamFormula> = None;
        for tup in rel {
            let conj = args
                .iter()
                .zip(tup.iter())
                .map(|(a, b)| a.signed(*b))
                .reduce(LtlFormula::and)
                .unwrap_or(LtlFormula::True);
            let mut part = TeamFormula::flat_all(TeamFormula::from_ltl(&conj));
            if !dc {
                part = TeamFormula::and(part, TeamFormula::NonEmpty);
            }
            splits = Some(match splits {
                None => part,
                Some(acc) => TeamFormula::split_or(acc, part),
            });
        }
        // empty relation: the empty disjunction, satisfied only by ∅
        disjuncts.push(splits.unwrap_or(TeamFormula::False));
    }
    Ok(disjuncts
        .into_iter()
        .reduce(TeamFormula::bool_or)
        .expect("relation family is non-empty"))
}

/// Rewrites every `dep`, `inc` and `gen` atom into `vv`/`|`/`A1` (plus `NE`
/// for families that are not downward closed), preserving team satisfaction.
pub fn eliminate_generalized_atoms(
    f: &TeamFormula,
) -> Result<TeamFormula, EliminationError> {
    use TeamFormula::*;
    Ok(match f {
        True | False | Prop(_) | NegProp(_) | NonEmpty => f.clone(),
        And(l, r) => TeamFormula::and(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        SplitOr(l, r) => TeamFormula::split_or(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        BoolOr(l, r) => TeamFormula::bool_or(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        LeftOr(l, r) => TeamFormula::left_or(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        Until(l, r) => TeamFormula::until(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        WeakUntil(l, r) => TeamFormula::weak_until(
            eliminate_generalized_atoms(l)?,
            eliminate_generalized_atoms(r)?,
        ),
        Next(x) => TeamFormula::next(eliminate_generalized_atoms(x)?),
        BoolNeg(x) => TeamFormula::bool_neg(eliminate_generalized_atoms(x)?),
        FlatAll(x) => TeamFormula::flat_all(eliminate_generalized_atoms(x)?),
        SubteamAll(x) => TeamFormula::subteam_all(eliminate_generalized_atoms(x)?),
        Dep(args, target) => {
            let fam = dep_family(args.len());
            let mut all = args.clone();
            all.push(target.clone());
            expand_gen_atom(&fam, &all)?
        }
        Inc(ls, rs) => {
            let fam = inc_family(ls.len())?;
            let mut all = ls.clone();
            all.extend(rs.iter().cloned());
            expand_gen_atom(&fam, &all)?
        }
        GenAtom(fam, args) => expand_gen_atom(fam, args)?,
    })
}

// ---------------------------------------------------------------------------
// Flat elimination of vv / NE under A1
// ---------------------------------------------------------------------------

/// Intermediate form of the bottom-up procedure: `NE ∧ ψ` when `ne` is set.
/// A bare `NE` carries `True` as its body, so conjunction drops `True` sides
/// to keep the rewrite rules' "ψ may be empty" reading.
struct Flat {
    ne: bool,
    body: LtlFormula,
}

fn and1(l: LtlFormula, r: LtlFormula) -> LtlFormula {
    match (l, r) {
        (LtlFormula::True, r) => r,
        (l, LtlFormula::True) => l,
        (l, r) => LtlFormula::and(l, r),
    }
}

/// Rewrites a `vv`/`NE`/LTL formula into plain LTL `ψ` with `A1 f ≡ A1 ψ`:
/// the rules preserve truth over teams of cardinality at most one, and the
/// output is linear in the input.
pub fn eliminate_flat_nonclassical(f: &TeamFormula) -> Result<LtlFormula, EliminationError> {
    Ok(flatten(f)?.body)
}

fn flatten(f: &TeamFormula) -> Result<Flat, EliminationError> {
    use TeamFormula::*;
    let flat = |body| Flat { ne: false, body };
    Ok(match f {
        True => flat(LtlFormula::True),
        False => flat(LtlFormula::False),
        Prop(p) => flat(LtlFormula::Prop(p.clone())),
        NegProp(p) => flat(LtlFormula::NegProp(p.clone())),
        NonEmpty => Flat {
            ne: true,
            body: LtlFormula::True,
        },
        And(l, r) => {
            let (l, r) = (flatten(l)?, flatten(r)?);
            Flat {
                ne: l.ne || r.ne,
                body: and1(l.body, r.body),
            }
        }
        SplitOr(l, r) => {
            let (l, r) = (flatten(l)?, flatten(r)?);
            match (l.ne, r.ne) {
                (true, true) => Flat {
                    ne: true,
                    body: and1(l.body, r.body),
                },
                (true, false) => Flat { ne: true, body: l.body },
                (false, true) => Flat { ne: true, body: r.body },
                (false, false) => Flat {
                    ne: false,
                    body: LtlFormula::or(l.body, r.body),
                },
            }
        }
        BoolOr(l, r) => {
            let (l, r) = (flatten(l)?, flatten(r)?);
            Flat {
                ne: l.ne && r.ne,
                body: LtlFormula::or(l.body, r.body),
            }
        }
        Next(x) => {
            let x = flatten(x)?;
            Flat {
                ne: x.ne,
                body: LtlFormula::next(x.body),
            }
        }
        Until(l, r) => {
            let (l, r) = (flatten(l)?, flatten(r)?);
            Flat {
                ne: r.ne,
                body: LtlFormula::until(l.body, r.body),
            }
        }
        WeakUntil(l, r) => {
            let (l, r) = (flatten(l)?, flatten(r)?);
            Flat {
                ne: l.ne && r.ne,
                body: LtlFormula::weak_until(l.body, r.body),
            }
        }
        other => {
            return Err(EliminationError::UnsupportedNode(node_name(other).to_string()))
        }
    })
}

fn node_name(f: &TeamFormula) -> &'static str {
    use TeamFormula::*;
    match f {
        True | False => "constant",
        Prop(_) => "prop",
        NegProp(_) => "negated prop",
        And(..) => "&",
        SplitOr(..) => "|",
        BoolOr(..) => "vv",
        BoolNeg(..) => "~",
        Next(..) => "X",
        Until(..) => "U",
        WeakUntil(..) => "W",
        Dep(..) => "dep",
        Inc(..) => "inc",
        FlatAll(..) => "A1",
        SubteamAll(..) => "A",
        NonEmpty => "NE",
        LeftOr(..) => "orl",
        GenAtom(..) => "gen",
    }
}

// ---------------------------------------------------------------------------
// Fragment classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Fragment {
    PlainTeamLtl,
    KCoherentEligible,
    LeftFlat,
    GeneralBorNeFlat,
    Unsupported,
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fragment::PlainTeamLtl => "plain",
            Fragment::KCoherentEligible => "kcoherent-eligible",
            Fragment::LeftFlat => "left-flat",
            Fragment::GeneralBorNeFlat => "bor-ne-flat",
            Fragment::Unsupported => "unsupported",
        };
        write!(f, "{s}")
    }
}

/// Which translators accept the formula. The fragments overlap, so the
/// single [`classify_fragment`] tag reports the most specific one.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct FragmentFlags {
    pub plain: bool,
    pub k_coherent_eligible: bool,
    pub left_flat: bool,
    pub general_bor_ne_flat: bool,
}

pub fn fragment_flags(f: &TeamFormula) -> FragmentFlags {
    FragmentFlags {
        plain: is_plain(f),
        k_coherent_eligible: is_k_coherent_eligible(f),
        left_flat: is_left_flat_eligible(f),
        general_bor_ne_flat: is_bor_ne_flat(f),
    }
}

pub fn classify_fragment(f: &TeamFormula) -> Fragment {
    let flags = fragment_flags(f);
    if flags.left_flat {
        Fragment::LeftFlat
    } else if flags.general_bor_ne_flat {
        Fragment::GeneralBorNeFlat
    } else if flags.k_coherent_eligible {
        Fragment::KCoherentEligible
    } else if flags.plain {
        Fragment::PlainTeamLtl
    } else {
        Fragment::Unsupported
    }
}

fn is_plain(f: &TeamFormula) -> bool {
    use TeamFormula::*;
    match f {
        True | False | Prop(_) | NegProp(_) => true,
        And(l, r) | SplitOr(l, r) | Until(l, r) | WeakUntil(l, r) => {
            is_plain(l) && is_plain(r)
        }
        Next(x) => is_plain(x),
        _ => false,
    }
}

fn is_k_coherent_eligible(f: &TeamFormula) -> bool {
    use TeamFormula::*;
    match f {
        True | False | Prop(_) | NegProp(_) | NonEmpty | Dep(..) | Inc(..)
        | GenAtom(..) => true,
        And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r) => {
            is_k_coherent_eligible(l) && is_k_coherent_eligible(r)
        }
        Next(x) | BoolNeg(x) | FlatAll(x) | SubteamAll(x) => is_k_coherent_eligible(x),
        LeftOr(..) => false,
    }
}

fn is_bor_ne_flat(f: &TeamFormula) -> bool {
    use TeamFormula::*;
    match f {
        True | False | Prop(_) | NegProp(_) | NonEmpty => true,
        And(l, r) | SplitOr(l, r) | BoolOr(l, r) | Until(l, r) | WeakUntil(l, r) => {
            is_bor_ne_flat(l) && is_bor_ne_flat(r)
        }
        Next(x) | FlatAll(x) => is_bor_ne_flat(x),
        _ => false,
    }
}

/// The syntactic flat class: `{literals, ∧, ∨, X}`-closure plus `A1 ψ`.
pub fn is_syntactically_flat(f: &TeamFormula) -> bool {
    use TeamFormula::*;
    match f {
        True | False | Prop(_) | NegProp(_) => true,
        And(l, r) | SplitOr(l, r) => is_syntactically_flat(l) && is_syntactically_flat(r),
        Next(x) => is_syntactically_flat(x),
        FlatAll(_) => true,
        _ => false,
    }
}

fn is_left_flat_eligible(f: &TeamFormula) -> bool {
    use TeamFormula::*;
    match f {
        True | False | Prop(_) | NegProp(_) => true,
        And(l, r) | SplitOr(l, r) | BoolOr(l, r) => {
            is_left_flat_eligible(l) && is_left_flat_eligible(r)
        }
        Next(x) | FlatAll(x) => is_left_flat_eligible(x),
        Until(l, r) | WeakUntil(l, r) => {
            is_syntactically_flat(l) && is_left_flat_eligible(l) && is_left_flat_eligible(r)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> TeamFormula {
        parse_team_formula(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse("p"), TeamFormula::prop("p"));
        // G (a vv !a) expands to W over !T
        let f = parse("G (a vv !a)");
        assert_eq!(
            f,
            TeamFormula::globally(TeamFormula::bool_or(
                TeamFormula::prop("a"),
                TeamFormula::neg_prop("a")
            ))
        );
        let f = parse("inc(o1, s ; o1, !s)");
        assert_eq!(
            f,
            TeamFormula::Inc(
                vec![LtlFormula::prop("o1"), LtlFormula::prop("s")],
                vec![LtlFormula::prop("o1"), LtlFormula::neg_prop("s")],
            )
        );
    }

    #[test]
    fn parse_precedence() {
        // unary > U/W > & > | > vv > orl
        let f = parse("a U b & c | d vv e orl f");
        assert_eq!(
            f,
            TeamFormula::left_or(
                TeamFormula::bool_or(
                    TeamFormula::split_or(
                        TeamFormula::and(
                            TeamFormula::until(
                                TeamFormula::prop("a"),
                                TeamFormula::prop("b")
                            ),
                            TeamFormula::prop("c")
                        ),
                        TeamFormula::prop("d")
                    ),
                    TeamFormula::prop("e")
                ),
                TeamFormula::prop("f")
            )
        );
        // U is right-associative
        assert_eq!(
            parse("a U b U c"),
            TeamFormula::until(
                TeamFormula::prop("a"),
                TeamFormula::until(TeamFormula::prop("b"), TeamFormula::prop("c"))
            )
        );
    }

    #[test]
    fn parse_rejects_bad_negation() {
        assert!(matches!(
            parse_team_formula("!(a & b)"),
            Err(ParseError::BadNegation { .. })
        ));
        assert!(parse_team_formula("!X a").is_err());
    }

    #[test]
    fn parse_reports_position() {
        match parse_team_formula("a & ) b") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn render_examples() {
        assert_eq!(render(&TeamFormula::prop("p")), "p");
        assert_eq!(
            render(&TeamFormula::eventually(TeamFormula::prop("p"))),
            "F p"
        );
        let dep = TeamFormula::Dep(
            vec![LtlFormula::prop("a"), LtlFormula::prop("b")],
            LtlFormula::prop("c"),
        );
        assert_eq!(render(&dep), "dep(a, b; c)");
    }

    #[test]
    fn round_trip_hand_cases() {
        for s in [
            "p",
            "(p & q)",
            "F p",
            "G (a vv !a)",
            "~(NE orl !T)",
            "A1 (a | b)",
            "A X p",
            "dep(; p)",
            "dep(a, b; c)",
            "inc(a; b)",
            "((a U b) W c)",
        ] {
            let f = parse(s);
            assert_eq!(parse(&render(&f)), f, "case {s}");
        }
    }

    #[test]
    fn classify_examples() {
        // left operand of U is ⊤ after F-sugar: left-flat
        let f = parse("F dep(a; b) | F dep(c; d)");
        let f = eliminate_generalized_atoms(&f).unwrap();
        assert_eq!(classify_fragment(&f), Fragment::LeftFlat);
        // not left-flat: F p is not syntactically flat
        assert_eq!(classify_fragment(&parse("(F p) U q")), Fragment::GeneralBorNeFlat);
        assert_eq!(classify_fragment(&parse("~(F p) U q")), Fragment::KCoherentEligible);
        assert_eq!(classify_fragment(&parse("p U q")), Fragment::LeftFlat);
        assert_eq!(classify_fragment(&parse("G (a vv !a)")), Fragment::GeneralBorNeFlat);
        assert!(fragment_flags(&parse("p U q")).plain);
        assert_eq!(classify_fragment(&parse("~p orl q")), Fragment::Unsupported);
    }

    #[test]
    fn flat_elimination_rules() {
        // (NE ∧ ψ) vv θ → ψ ∨ θ
        let f = parse("(NE & p) vv q");
        assert_eq!(eliminate_flat_nonclassical(&f).unwrap(), parse_ltl_formula("p | q").unwrap());
        // plain LTL: vv becomes |
        let f = parse("(p vv q)");
        assert_eq!(eliminate_flat_nonclassical(&f).unwrap(), parse_ltl_formula("p | q").unwrap());
        // X(NE ∧ ψ): NE floats out and is dropped at the top
        let f = parse("X (NE & p)");
        assert_eq!(eliminate_flat_nonclassical(&f).unwrap(), parse_ltl_formula("X p").unwrap());
        assert!(eliminate_flat_nonclassical(&parse("A1 p")).is_err());
    }

    #[test]
    fn dep_family_small() {
        let fam = dep_family(0);
        // ∅, {0}, {1} — constancy
        assert_eq!(fam.relations.len(), 3);
        assert!(fam.is_downward_closed());
        let fam = dep_family(1);
        assert_eq!(fam.relations.len(), 9);
        assert!(fam.is_downward_closed());
    }

    #[test]
    fn inc_family_small() {
        let fam = inc_family(1).unwrap();
        assert_eq!(fam.relations.len(), 12);
        assert!(!fam.is_downward_closed());
        assert!(inc_family(2).is_err());
    }

    #[test]
    fn family_registry_parse() {
        let reg = FamilyRegistry::parse("maj: {11}, {01, 10, 11}\n").unwrap();
        let fam = reg.get("maj").unwrap();
        assert_eq!(fam.arity, 2);
        assert_eq!(fam.relations.len(), 2);
    }
}
