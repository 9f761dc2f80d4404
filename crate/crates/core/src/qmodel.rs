//! Conjunctive queries, statistics files and CSV data directories.
//!
//! Query syntax: `Q(X,Y) :- R(X,Y), S(Y,Z).`
//!
//! Statistics syntax, one constraint per line, `#` starts a comment:
//!
//! ```text
//! mode numeric N=1000
//! card(R) <= 100
//! deg(R; Y | X) <= 5
//! norm(R; 2; Y | X)^2 <= 25
//! ```
//!
//! In `mode symbolic` bounds are written `N`, `N^2` or `N^{3/2}`; the literal
//! `1` is also accepted and means `N^0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::relcore::{self, Database, Relation, Schema, Tuple, Value, Variable};
use crate::varset::{VarSet, MAX_BITS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub symbol: String,
    pub vars: Vec<Variable>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.symbol)?;
        write_list(f, &self.vars)?;
        write!(f, ")")
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, vs: &[Variable]) -> fmt::Result {
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{v}")?;
    }
    Ok(())
}

/// `name(head) :- atoms`. Variables are indexed in order of first
/// appearance in the body; [`VarSet`]s refer to those indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head: Vec<Variable>,
    pub atoms: Vec<Atom>,
    vars: Vec<Variable>,
}

impl ConjunctiveQuery {
    pub fn new(name: &str, head: Vec<Variable>, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Semantic("query has no atoms".into()));
        }
        let mut vars: Vec<Variable> = Vec::new();
        let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &atoms {
            if a.vars.is_empty() {
                return Err(Error::Semantic(format!("atom {} has no variables", a.symbol)));
            }
            if let Some(&k) = arities.get(a.symbol.as_str()) {
                if k != a.vars.len() {
                    return Err(Error::Semantic(format!(
                        "relation {} used with arities {} and {}",
                        a.symbol,
                        k,
                        a.vars.len()
                    )));
                }
            }
            arities.insert(&a.symbol, a.vars.len());
            let mut seen = BTreeSet::new();
            for v in &a.vars {
                if !seen.insert(v) {
                    return Err(Error::Semantic(format!(
                        "variable {v} repeated inside atom {a}"
                    )));
                }
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        if vars.len() > MAX_BITS {
            return Err(Error::Size(format!(
                "{} variables, at most {MAX_BITS} supported",
                vars.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for v in &head {
            if !vars.contains(v) {
                return Err(Error::Semantic(format!("head variable {v} not in body")));
            }
            if !seen.insert(v) {
                return Err(Error::Semantic(format!("head variable {v} repeated")));
            }
        }
        Ok(ConjunctiveQuery {
            name: name.to_string(),
            head,
            atoms,
            vars,
        })
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, v: &Variable) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    /// Panics on variables outside the query.
    pub fn set_of(&self, vs: &[Variable]) -> VarSet {
        VarSet::from_indices(vs.iter().map(|v| self.var_index(v).expect("query variable")))
    }

    /// Members of `s` in index order.
    pub fn vars_of(&self, s: VarSet) -> Vec<Variable> {
        s.iter().map(|i| self.vars[i].clone()).collect()
    }

    pub fn atom_set(&self, i: usize) -> VarSet {
        self.set_of(&self.atoms[i].vars)
    }

    pub fn free_set(&self) -> VarSet {
        self.set_of(&self.head)
    }

    pub fn all_set(&self) -> VarSet {
        VarSet::full(self.vars.len())
    }

    pub fn render_set(&self, s: VarSet) -> String {
        s.render(&self.vars)
    }

    pub fn is_full(&self) -> bool {
        self.head.len() == self.vars.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    /// Distinct relation symbols in order of first appearance.
    pub fn symbols(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.atoms {
            if !out.contains(&a.symbol.as_str()) {
                out.push(&a.symbol);
            }
        }
        out
    }

    /// The first atom with the given symbol; its variable names name the
    /// columns of the stored relation.
    pub fn guard_atom(&self, symbol: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.symbol == symbol)
    }

    /// The instance of atom `i`, with columns named by the atom's variables.
    pub fn atom_relation(&self, db: &Database, i: usize) -> Result<Relation> {
        let a = &self.atoms[i];
        let r = db
            .get(&a.symbol)
            .ok_or_else(|| Error::Semantic(format!("no data for relation {}", a.symbol)))?;
        r.rename(&a.vars)
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        write_list(f, &self.head)?;
        write!(f, ") :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ".")
    }
}

/// A rule with a disjunction of head bags over the body of a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjunctiveRule {
    pub heads: Vec<(VarSet, String)>,
    pub body: Vec<Atom>,
    /// Variable universe the head sets index into.
    pub vars: Vec<Variable>,
}

impl DisjunctiveRule {
    pub fn bags(&self) -> Vec<VarSet> {
        self.heads.iter().map(|(b, _)| *b).collect()
    }
}

impl fmt::Display for DisjunctiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (bag, sym)) in self.heads.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            write!(f, "{sym}(")?;
            let vs: Vec<Variable> = bag.iter().map(|j| self.vars[j].clone()).collect();
            write_list(f, &vs)?;
            write!(f, ")")?;
        }
        write!(f, " :- ")?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, " ∧ ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// lexing shared by both grammars

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    Sym(&'static str),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 14] = [
    ":-", "<=", "≤", "(", ")", ",", ".", ";", "|", "^", "{", "}", "/", "=",
];

fn lex(text: &str, first_line: usize) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = first_line;
    let mut col = 1;
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c == '\n' {
            line += 1;
            col = 1;
            chars.next();
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            chars.next();
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    col += 1;
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    col += 1;
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Int(s), line: start_line, col: start_col });
            continue;
        }
        let rest = &text[i..];
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.chars().count() {
                    chars.next();
                    col += 1;
                }
                out.push(Token { tok: Tok::Sym(s), line: start_line, col: start_col });
            }
            None => {
                return Err(Error::Syntax {
                    line,
                    column: col,
                    message: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax {
            line: t.line,
            column: t.col,
            message: message.into(),
        })
    }

    fn found(&self) -> String {
        match &self.peek().tok {
            Tok::Ident(s) | Tok::Int(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.found()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.found())),
        }
    }

    fn int(&mut self) -> Result<BigUint> {
        match &self.peek().tok {
            Tok::Int(s) => {
                let v = s.parse::<BigUint>().expect("digits");
                self.next();
                Ok(v)
            }
            _ => self.error(format!("expected integer, found {}", self.found())),
        }
    }

    fn at_end(&self) -> bool {
        self.peek().tok == Tok::End
    }

    /// Comma-separated identifiers, possibly empty, stopping before `stop`.
    fn var_list(&mut self, stop: &[&str]) -> Result<Vec<Variable>> {
        let mut out = Vec::new();
        if stop.iter().any(|s| self.at_sym(s)) {
            return Ok(out);
        }
        loop {
            out.push(Variable::new(&self.ident()?)?);
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }
}

pub fn parse_query(text: &str) -> Result<ConjunctiveQuery> {
    let mut c = Cursor { toks: lex(text, 1)?, pos: 0 };
    let name = c.ident()?;
    c.expect_sym("(")?;
    let head = c.var_list(&[")"])?;
    c.expect_sym(")")?;
    c.expect_sym(":-")?;
    let mut atoms = Vec::new();
    loop {
        let symbol = c.ident()?;
        c.expect_sym("(")?;
        if c.at_sym(")") {
            return c.error(format!("atom {symbol} needs at least one variable"));
        }
        let vars = c.var_list(&[")"])?;
        c.expect_sym(")")?;
        atoms.push(Atom { symbol, vars });
        if !c.eat_sym(",") {
            break;
        }
    }
    c.eat_sym(".");
    if !c.at_end() {
        return c.error(format!("expected end of query, found {}", c.found()));
    }
    ConjunctiveQuery::new(&name, head, atoms)
}

// ---------------------------------------------------------------------------
// statistics

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatsMode {
    Symbolic,
    Numeric { n: BigUint },
}

/// A constraint's right-hand side: an integer in numeric mode or an
/// exponent `e` meaning `N^e` in symbolic mode. For norm constraints this is
/// the bound on the k-th power of the norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    Count(BigUint),
    Power(BigRational),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Count(c) => write!(f, "{c}"),
            Bound::Power(e) if e.is_zero() => write!(f, "1"),
            Bound::Power(e) if e.is_one() => write!(f, "N"),
            Bound::Power(e) if e.is_integer() => write!(f, "N^{}", e.numer()),
            Bound::Power(e) => write!(f, "N^{{{}/{}}}", e.numer(), e.denom()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Degree,
    Norm(u32),
}

/// `deg_guard(ys | xs) <= bound`, or for `Norm(k)` the bound on
/// `Σ_x deg(ys | xs = x)^k`. Variables use the names of the guard's first
/// atom and apply positionally to every atom with that symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeConstraint {
    pub guard: String,
    pub xs: Vec<Variable>,
    pub ys: Vec<Variable>,
    pub kind: ConstraintKind,
    pub bound: Bound,
}

impl DegreeConstraint {
    /// Column positions of `xs` and `ys` in the guard relation.
    pub fn positions(&self, q: &ConjunctiveQuery) -> Result<(Vec<usize>, Vec<usize>)> {
        let g = q
            .guard_atom(&self.guard)
            .ok_or_else(|| Error::Semantic(format!("unknown relation {}", self.guard)))?;
        let schema = Schema::new(g.vars.clone())?;
        Ok((schema.positions(&self.xs)?, schema.positions(&self.ys)?))
    }

    /// `(atom index, xs, ys)` for every atom the constraint guards.
    pub fn instances(&self, q: &ConjunctiveQuery) -> Result<Vec<(usize, VarSet, VarSet)>> {
        let (xp, yp) = self.positions(q)?;
        Ok(q.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.symbol == self.guard)
            .map(|(i, a)| {
                let xs = VarSet::from_indices(xp.iter().map(|&p| q.var_index(&a.vars[p]).unwrap()));
                let ys = VarSet::from_indices(yp.iter().map(|&p| q.var_index(&a.vars[p]).unwrap()));
                (i, xs, ys)
            })
            .collect())
    }

    fn is_card(&self, q: &ConjunctiveQuery) -> bool {
        self.kind == ConstraintKind::Degree
            && self.xs.is_empty()
            && q.guard_atom(&self.guard)
                .is_some_and(|g| g.vars.len() == self.ys.len() && g.vars.iter().zip(&self.ys).all(|(a, b)| a == b))
    }

    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let list = |vs: &[Variable]| {
            vs.iter().map(Variable::name).collect::<Vec<_>>().join(",")
        };
        if self.is_card(q) {
            return format!("card({}) <= {}", self.guard, self.bound);
        }
        let cond = if self.xs.is_empty() {
            String::new()
        } else {
            format!(" | {}", list(&self.xs))
        };
        match self.kind {
            ConstraintKind::Degree => {
                format!("deg({}; {}{}) <= {}", self.guard, list(&self.ys), cond, self.bound)
            }
            ConstraintKind::Norm(k) => format!(
                "norm({}; {k}; {}{})^{k} <= {}",
                self.guard,
                list(&self.ys),
                cond,
                self.bound
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatisticsSet {
    pub mode: StatsMode,
    pub constraints: Vec<DegreeConstraint>,
}

impl StatisticsSet {
    pub fn is_symbolic(&self) -> bool {
        self.mode == StatsMode::Symbolic
    }

    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let mut out = match &self.mode {
            StatsMode::Symbolic => "mode symbolic\n".to_string(),
            StatsMode::Numeric { n } => format!("mode numeric N={n}\n"),
        };
        for c in &self.constraints {
            out.push_str(&c.render(q));
            out.push('\n');
        }
        out
    }
}

enum RawBound {
    Count(BigUint),
    Power(BigRational),
}

fn parse_bound(c: &mut Cursor) -> Result<RawBound> {
    match &c.peek().tok {
        Tok::Int(_) => Ok(RawBound::Count(c.int()?)),
        Tok::Ident(s) if s == "N" => {
            c.next();
            if !c.eat_sym("^") {
                return Ok(RawBound::Power(BigRational::one()));
            }
            let braced = c.eat_sym("{") || {
                if c.eat_sym("(") {
                    // `N^(3/2)` reads the same as `N^{3/2}`
                    let num = c.int()?;
                    let den = if c.eat_sym("/") { c.int()? } else { BigUint::one() };
                    c.expect_sym(")")?;
                    return ratio(c, num, den).map(RawBound::Power);
                }
                false
            };
            let num = c.int()?;
            let den = if braced && c.eat_sym("/") { c.int()? } else { BigUint::one() };
            if braced {
                c.expect_sym("}")?;
            }
            ratio(c, num, den).map(RawBound::Power)
        }
        _ => c.error(format!("expected a bound, found {}", c.found())),
    }
}

fn ratio(c: &Cursor, num: BigUint, den: BigUint) -> Result<BigRational> {
    if den.is_zero() {
        return c.error("zero denominator in exponent");
    }
    Ok(BigRational::new(num.into(), den.into()))
}

fn parse_mode(c: &mut Cursor) -> Result<StatsMode> {
    match c.ident()?.as_str() {
        "symbolic" => Ok(StatsMode::Symbolic),
        "numeric" => {
            let key = c.ident()?;
            if key != "N" {
                return c.error(format!("expected `N=`, found `{key}`"));
            }
            c.expect_sym("=")?;
            let n = c.int()?;
            if n <= BigUint::one() {
                return Err(Error::Semantic("numeric mode needs N > 1".into()));
            }
            Ok(StatsMode::Numeric { n })
        }
        other => Err(Error::Semantic(format!("unknown statistics mode `{other}`"))),
    }
}

/// Parses a statistics file against the query whose atoms provide the guard
/// schemas.
pub fn parse_stats(text: &str, q: &ConjunctiveQuery) -> Result<StatisticsSet> {
    let mut mode: Option<StatsMode> = None;
    let mut raw: Vec<(usize, DegreeConstraint, RawBound)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut toks = Cursor { toks: lex(line, lineno)?, pos: 0 };
        if toks.at_end() {
            continue;
        }
        let head = toks.ident()?;
        if head == "mode" {
            if mode.is_some() {
                return Err(Error::Semantic(format!("line {lineno}: second mode line")));
            }
            mode = Some(parse_mode(&mut toks)?);
        } else {
            let (con, bound) = parse_constraint(&head, &mut toks, q, lineno)?;
            raw.push((lineno, con, bound));
        }
        if !toks.at_end() {
            return toks.error(format!("unexpected {}", toks.found()));
        }
    }
    let mode = match mode {
        Some(m) => m,
        None if raw.iter().any(|(_, _, b)| matches!(b, RawBound::Power(_))) => StatsMode::Symbolic,
        None if raw.is_empty() => StatsMode::Symbolic,
        None => {
            return Err(Error::Semantic(
                "numeric statistics need a `mode numeric N=...` line".into(),
            ))
        }
    };
    let mut constraints = Vec::new();
    for (lineno, mut con, b) in raw {
        con.bound = match (&mode, b) {
            (StatsMode::Numeric { .. }, RawBound::Count(c)) => {
                if c.is_zero() {
                    return Err(Error::Semantic(format!("line {lineno}: bound must be positive")));
                }
                Bound::Count(c)
            }
            (StatsMode::Symbolic, RawBound::Power(e)) => Bound::Power(e),
            (StatsMode::Symbolic, RawBound::Count(c)) if c.is_one() => {
                Bound::Power(BigRational::zero())
            }
            (StatsMode::Symbolic, RawBound::Count(c)) if c.is_zero() => {
                return Err(Error::Semantic(format!("line {lineno}: bound must be positive")));
            }
            _ => {
                return Err(Error::Semantic(format!(
                    "line {lineno}: bound does not match the statistics mode"
                )))
            }
        };
        constraints.push(con);
    }
    Ok(StatisticsSet { mode, constraints })
}

fn parse_constraint(
    head: &str,
    c: &mut Cursor,
    q: &ConjunctiveQuery,
    lineno: usize,
) -> Result<(DegreeConstraint, RawBound)> {
    let kind_word = head;
    c.expect_sym("(")?;
    let guard = c.ident()?;
    let atom = q
        .guard_atom(&guard)
        .ok_or_else(|| Error::Semantic(format!("line {lineno}: relation {guard} not in the query")))?;
    let (kind, xs, ys) = match kind_word {
        "card" => (ConstraintKind::Degree, Vec::new(), atom.vars.clone()),
        "deg" | "norm" => {
            c.expect_sym(";")?;
            let kind = if kind_word == "norm" {
                let k = c.int()?;
                c.expect_sym(";")?;
                let k = k.to_u32().filter(|&k| k >= 1).ok_or_else(|| {
                    Error::Semantic(format!("line {lineno}: norm order must be a positive integer"))
                })?;
                ConstraintKind::Norm(k)
            } else {
                ConstraintKind::Degree
            };
            let ys = c.var_list(&["|", ")"])?;
            let xs = if c.eat_sym("|") { c.var_list(&[")"])? } else { Vec::new() };
            (kind, xs, ys)
        }
        other => {
            return Err(Error::Syntax {
                line: lineno,
                column: 1,
                message: format!("unknown constraint `{other}`"),
            })
        }
    };
    c.expect_sym(")")?;
    if let ConstraintKind::Norm(k) = kind {
        if c.eat_sym("^") {
            let p = c.int()?;
            if p != BigUint::from(k) {
                return Err(Error::Semantic(format!(
                    "line {lineno}: norm of order {k} must be bounded as its {k}-th power"
                )));
            }
        }
    }
    if !c.eat_sym("<=") && !c.eat_sym("≤") {
        return c.error(format!("expected `<=`, found {}", c.found()));
    }
    let bound = parse_bound(c)?;

    if ys.is_empty() {
        return Err(Error::Semantic(format!("line {lineno}: empty degree target")));
    }
    for v in xs.iter().chain(&ys) {
        if !atom.vars.contains(v) {
            return Err(Error::Semantic(format!(
                "line {lineno}: variable {v} not in the schema of {guard}"
            )));
        }
    }
    if let Some(v) = xs.iter().find(|v| ys.contains(v)) {
        return Err(Error::Semantic(format!(
            "line {lineno}: variable {v} on both sides of `|`"
        )));
    }
    Schema::new(xs.clone()).and(Schema::new(ys.clone())).map_err(|_| {
        Error::Semantic(format!("line {lineno}: repeated variable in constraint"))
    })?;
    let con = DegreeConstraint {
        guard,
        xs,
        ys,
        kind,
        bound: Bound::Count(BigUint::one()),
    };
    Ok((con, bound))
}

// ---------------------------------------------------------------------------
// data

/// Loads `<dir>/<symbol>.csv` for every relation of `q`. The header must name
/// the columns of some atom with that symbol; columns are stored in the
/// order of the symbol's first atom.
pub fn load_database(dir: &Path, q: &ConjunctiveQuery) -> Result<Database> {
    let mut db = Database::new();
    for symbol in q.symbols() {
        let path = dir.join(format!("{symbol}.csv"));
        let data_err = |message: String| Error::Data {
            path: path.clone(),
            message,
        };
        let text = fs::read_to_string(&path).map_err(|e| data_err(e.to_string()))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| data_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let guard = q.guard_atom(symbol).expect("symbol of q");
        if header.len() != guard.vars.len() {
            return Err(data_err(format!(
                "header has {} columns, relation {symbol} has arity {}",
                header.len(),
                guard.vars.len()
            )));
        }
        let matching = q
            .atoms
            .iter()
            .filter(|a| a.symbol == symbol)
            .find(|a| {
                let names: BTreeSet<&str> = a.vars.iter().map(Variable::name).collect();
                header.iter().all(|h| names.contains(h.as_str()))
                    && header.iter().collect::<BTreeSet<_>>().len() == header.len()
            })
            .ok_or_else(|| {
                data_err(format!(
                    "header {} does not name the columns of {symbol}",
                    header.join(",")
                ))
            })?;
        // header column j holds the atom position perm[j]
        let perm: Vec<usize> = header
            .iter()
            .map(|h| matching.vars.iter().position(|v| v.name() == h).unwrap())
            .collect();
        let mut rel = Relation::empty(Schema::new(guard.vars.clone())?);
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths { .. } => {
                    data_err(format!("ragged row {}: {e}", row + 2))
                }
                _ => data_err(e.to_string()),
            })?;
            let mut t: Tuple = vec![Value::Int(0); perm.len()];
            for (j, field) in rec.iter().enumerate() {
                t[perm[j]] = Value::parse(field);
            }
            rel.insert(t)?;
        }
        db.insert(symbol, rel);
    }
    Ok(db)
}

/// Canonical CSV: header of variable names, rows in sorted order.
pub fn write_csv(rel: &Relation) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(rel.vars().iter().map(Variable::name))
        .expect("in-memory write");
    for t in rel.iter() {
        w.write_record(t.iter().map(|v| v.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Writes one `<symbol>.csv` per relation of `db`.
pub fn save_database(dir: &Path, db: &Database) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (symbol, rel) in db.relations() {
        fs::write(dir.join(format!("{symbol}.csv")), write_csv(rel))?;
    }
    Ok(())
}

/// Tightest numeric degree constraints the data satisfies: for every
/// relation and every condition set of at most `max_cond` columns, the degree
/// of the remaining columns.
pub fn infer_stats(db: &Database, q: &ConjunctiveQuery, max_cond: usize) -> Result<StatisticsSet> {
    let mut constraints = Vec::new();
    for symbol in q.symbols() {
        let atom = q.guard_atom(symbol).expect("symbol of q");
        let rel = db
            .get(symbol)
            .ok_or_else(|| Error::Semantic(format!("no data for relation {symbol}")))?;
        let k = atom.vars.len();
        let all = VarSet::full(k);
        let mut conds: Vec<VarSet> = all.subsets().filter(|s| s.len() <= max_cond && *s != all).collect();
        conds.sort_by_key(|s| (s.len(), *s));
        for xs_pos in conds {
            let xs: Vec<Variable> = xs_pos.iter().map(|p| atom.vars[p].clone()).collect();
            let ys: Vec<Variable> = (all - xs_pos).iter().map(|p| atom.vars[p].clone()).collect();
            let d = relcore::degree(rel, &ys, &xs)?.max(1);
            constraints.push(DegreeConstraint {
                guard: symbol.to_string(),
                xs,
                ys,
                kind: ConstraintKind::Degree,
                bound: Bound::Count(BigUint::from(d)),
            });
        }
    }
    let n = BigUint::from(db.size().max(2));
    Ok(StatisticsSet {
        mode: StatsMode::Numeric { n },
        constraints,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub constraint: usize,
    pub text: String,
    pub actual: BigUint,
    /// The binding of the conditioning variables that attains `actual`.
    pub witness: Vec<(Variable, Value)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated: actual {}", self.text, self.actual)?;
        if !self.witness.is_empty() {
            let b: Vec<String> = self.witness.iter().map(|(v, x)| format!("{v}={x}")).collect();
            write!(f, " at {}", b.join(", "))?;
        }
        Ok(())
    }
}

/// Every constraint the data violates; empty iff the database satisfies
/// the statistics.
pub fn check_stats(db: &Database, s: &StatisticsSet, q: &ConjunctiveQuery) -> Result<Vec<Violation>> {
    if s.is_symbolic() {
        return Err(Error::Mode(
            "symbolic statistics cannot be checked against data".into(),
        ));
    }
    let mut out = Vec::new();
    for (i, c) in s.constraints.iter().enumerate() {
        let Bound::Count(bound) = &c.bound else {
            return Err(Error::Mode("symbolic bound in numeric statistics".into()));
        };
        let Some(rel) = db.get(&c.guard) else {
            continue;
        };
        let degrees = relcore::degree_map(rel, &c.ys, &c.xs)?;
        let (actual, witness) = match c.kind {
            ConstraintKind::Degree => {
                let best = degrees.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)));
                match best {
                    Some((x, d)) => (
                        BigUint::from(*d),
                        c.xs.iter().cloned().zip(x.iter().cloned()).collect(),
                    ),
                    None => (BigUint::zero(), Vec::new()),
                }
            }
            ConstraintKind::Norm(k) => (relcore::lknorm_pow(rel, &c.ys, &c.xs, k)?, Vec::new()),
        };
        if &actual > bound {
            out.push(Violation {
                constraint: i,
                text: c.render(q),
                actual,
                witness,
            });
        }
    }
    Ok(out)
}

/// Least `N >= 2` under which the data satisfies symbolic statistics, i.e.
/// every observed degree `a` against exponent `e` has `a <= N^e`.
pub fn least_symbolic_n(db: &Database, s: &StatisticsSet) -> Result<BigUint> {
    let mut n = BigUint::from(2u32);
    for c in &s.constraints {
        let Bound::Power(e) = &c.bound else {
            return Err(Error::Mode("numeric bound in symbolic statistics".into()));
        };
        let Some(rel) = db.get(&c.guard) else {
            continue;
        };
        let actual = match c.kind {
            ConstraintKind::Degree => BigUint::from(relcore::degree(rel, &c.ys, &c.xs)?),
            ConstraintKind::Norm(k) => relcore::lknorm_pow(rel, &c.ys, &c.xs, k)?,
        };
        if actual <= BigUint::one() {
            continue;
        }
        if !e.is_positive() {
            return Err(Error::StatsMismatch(format!(
                "constraint {} bounds an observed {} by 1",
                c.guard, actual
            )));
        }
        // least n with n^p >= actual^q
        let p = e.numer().to_u32().ok_or_else(|| Error::Argument("exponent too large".into()))?;
        let q = e.denom().to_u32().ok_or_else(|| Error::Argument("exponent too large".into()))?;
        let goal = actual.pow(q);
        let ok = |m: &BigUint| m.pow(p) >= goal;
        let mut hi = n.clone();
        while !ok(&hi) {
            hi *= 2u32;
        }
        let mut lo = n.clone();
        while lo < hi {
            let mid: BigUint = (&lo + &hi) / 2u32;
            if ok(&mid) {
                hi = mid;
            } else {
                lo = mid + 1u32;
            }
        }
        n = n.max(lo);
    }
    Ok(n)
}
