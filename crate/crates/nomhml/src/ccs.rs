//! CCS front end: parser, structural-congruence normalisation, and bounded
//! state-space generation into a validated nominal transition system.
//!
//! Constants start with an uppercase letter, channels are lowercase. The
//! co-action of `a` is written `'a`. Restriction is `new a. P` and binds to
//! the next prefix; parenthesise larger scopes. Internally constants are
//! parameterised by their free names, so permuting a term permutes the
//! argument vector and recursion stays equivariant.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::nominal::{Name, NameSet, Perm, Sort, Universe};
use crate::nts::{ActDecl, ActLabel, Nts, NtsBuilder, StateId};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum CcsAct {
    Tau,
    In(Name),
    Out(Name),
}

impl CcsAct {
    fn subject(&self) -> Option<Name> {
        match self {
            CcsAct::Tau => None,
            CcsAct::In(a) | CcsAct::Out(a) => Some(*a),
        }
    }

    fn permute(&self, p: &Perm) -> CcsAct {
        match self {
            CcsAct::Tau => CcsAct::Tau,
            CcsAct::In(a) => CcsAct::In(p.apply(*a)),
            CcsAct::Out(a) => CcsAct::Out(p.apply(*a)),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum CcsTerm {
    Nil,
    Prefix(CcsAct, Box<CcsTerm>),
    Sum(Vec<CcsTerm>),
    Par(Vec<CcsTerm>),
    Restrict(Name, Box<CcsTerm>),
    /// A defined constant applied to the names standing in for the free
    /// names of its body.
    Const(String, Vec<Name>),
}

impl CcsTerm {
    pub fn free_names(&self) -> NameSet {
        match self {
            CcsTerm::Nil => NameSet::empty(),
            CcsTerm::Prefix(a, p) => {
                let mut s = p.free_names();
                if let Some(n) = a.subject() {
                    s.insert(n);
                }
                s
            }
            CcsTerm::Sum(items) | CcsTerm::Par(items) => items
                .iter()
                .fold(NameSet::empty(), |acc, t| acc.union(t.free_names())),
            CcsTerm::Restrict(x, p) => {
                let mut s = p.free_names();
                s.remove(*x);
                s
            }
            CcsTerm::Const(_, args) => args.iter().copied().collect(),
        }
    }

    pub fn permute(&self, p: &Perm) -> CcsTerm {
        match self {
            CcsTerm::Nil => CcsTerm::Nil,
            CcsTerm::Prefix(a, t) => CcsTerm::Prefix(a.permute(p), Box::new(t.permute(p))),
            CcsTerm::Sum(items) => CcsTerm::Sum(items.iter().map(|t| t.permute(p)).collect()),
            CcsTerm::Par(items) => CcsTerm::Par(items.iter().map(|t| t.permute(p)).collect()),
            CcsTerm::Restrict(x, t) => CcsTerm::Restrict(p.apply(*x), Box::new(t.permute(p))),
            CcsTerm::Const(k, args) => {
                CcsTerm::Const(k.clone(), args.iter().map(|n| p.apply(*n)).collect())
            }
        }
    }

    /// Rename free occurrences of `from` to `to`, alpha-converting clashing
    /// restriction binders out of the way.
    fn rename_free(&self, u: &Universe, from: Name, to: Name) -> Result<CcsTerm> {
        if from == to {
            return Ok(self.clone());
        }
        let ren = |n: Name| if n == from { to } else { n };
        Ok(match self {
            CcsTerm::Nil => CcsTerm::Nil,
            CcsTerm::Prefix(a, p) => {
                let a2 = match a {
                    CcsAct::Tau => CcsAct::Tau,
                    CcsAct::In(n) => CcsAct::In(ren(*n)),
                    CcsAct::Out(n) => CcsAct::Out(ren(*n)),
                };
                CcsTerm::Prefix(a2, Box::new(p.rename_free(u, from, to)?))
            }
            CcsTerm::Sum(items) => CcsTerm::Sum(
                items.iter().map(|t| t.rename_free(u, from, to)).collect::<Result<_>>()?,
            ),
            CcsTerm::Par(items) => CcsTerm::Par(
                items.iter().map(|t| t.rename_free(u, from, to)).collect::<Result<_>>()?,
            ),
            CcsTerm::Restrict(x, p) => {
                if *x == from {
                    CcsTerm::Restrict(*x, p.clone())
                } else if *x == to {
                    let mut avoid = p.free_names();
                    avoid.insert(from);
                    avoid.insert(to);
                    let fresh = u.fresh(avoid, u.sort_of(*x))?;
                    let renamed = p.rename_free(u, *x, fresh)?;
                    CcsTerm::Restrict(fresh, Box::new(renamed.rename_free(u, from, to)?))
                } else {
                    CcsTerm::Restrict(*x, Box::new(p.rename_free(u, from, to)?))
                }
            }
            CcsTerm::Const(k, args) => {
                CcsTerm::Const(k.clone(), args.iter().map(|n| ren(*n)).collect())
            }
        })
    }

    /// Structural-congruence normal form: sums and parallels flattened and
    /// sorted, units dropped, vacuous restrictions removed, binders renamed
    /// to the least fresh name.
    pub fn normalize(&self, u: &Universe) -> Result<CcsTerm> {
        Ok(match self {
            CcsTerm::Nil => CcsTerm::Nil,
            CcsTerm::Prefix(a, p) => CcsTerm::Prefix(*a, Box::new(p.normalize(u)?)),
            CcsTerm::Sum(items) => {
                let mut out = Vec::new();
                for t in items {
                    match t.normalize(u)? {
                        CcsTerm::Nil => {}
                        CcsTerm::Sum(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                match out.len() {
                    0 => CcsTerm::Nil,
                    1 => out.pop().expect("len checked"),
                    _ => CcsTerm::Sum(out),
                }
            }
            CcsTerm::Par(items) => {
                let mut out = Vec::new();
                for t in items {
                    match t.normalize(u)? {
                        CcsTerm::Nil => {}
                        CcsTerm::Par(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                match out.len() {
                    0 => CcsTerm::Nil,
                    1 => out.pop().expect("len checked"),
                    _ => CcsTerm::Par(out),
                }
            }
            CcsTerm::Restrict(x, p) => {
                let p = p.normalize(u)?;
                if p == CcsTerm::Nil {
                    return Ok(CcsTerm::Nil);
                }
                if !p.free_names().contains(*x) {
                    return Ok(p);
                }
                let mut avoid = p.free_names();
                avoid.remove(*x);
                let canonical = u.fresh(avoid, u.sort_of(*x))?;
                let body = p.rename_free(u, *x, canonical)?;
                CcsTerm::Restrict(canonical, Box::new(body.normalize(u)?))
            }
            CcsTerm::Const(k, args) => CcsTerm::Const(k.clone(), args.clone()),
        })
    }
}

/// Constant definitions: each body is stored over its formal parameters (the
/// free names of the definition, in ascending order).
#[derive(Clone, Debug, Default)]
pub struct Defs {
    entries: BTreeMap<String, (Vec<Name>, CcsTerm)>,
}

impl Defs {
    pub fn formals(&self, name: &str) -> Result<&[Name]> {
        self.entries
            .get(name)
            .map(|(f, _)| f.as_slice())
            .ok_or_else(|| Error::Lookup(format!("undefined constant `{name}`")))
    }

    /// Instantiate a constant's body at the given arguments.
    pub fn unfold(&self, u: &Universe, name: &str, args: &[Name]) -> Result<CcsTerm> {
        let (formals, body) = self
            .entries
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("undefined constant `{name}`")))?;
        if formals.len() != args.len() {
            return Err(Error::Invalid(format!(
                "constant `{name}` expects {} arguments, got {}",
                formals.len(),
                args.len()
            )));
        }
        let p = crate::nominal::injection_to_perm(u, formals, args)?;
        Ok(body.permute(&p))
    }
}

/// Exploration bounds for state-space generation.
#[derive(Clone, Copy, Debug)]
pub struct GenBudget {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for GenBudget {
    fn default() -> Self {
        GenBudget { max_states: 512, max_depth: 64 }
    }
}

/// A generated system together with the interned terms.
pub struct Generated {
    pub nts: Nts,
    pub root: StateId,
    /// States whose transitions were cut off by the budget.
    pub truncated: Vec<StateId>,
    pub terms: Vec<CcsTerm>,
}

fn transitions(t: &CcsTerm, u: &Universe, defs: &Defs, unfold: usize) -> Result<Vec<(CcsAct, CcsTerm)>> {
    Ok(match t {
        CcsTerm::Nil => vec![],
        CcsTerm::Prefix(a, p) => vec![(*a, (**p).clone())],
        CcsTerm::Sum(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(transitions(item, u, defs, unfold)?);
            }
            out
        }
        CcsTerm::Par(items) => {
            let mut out = Vec::new();
            let per_child: Vec<Vec<(CcsAct, CcsTerm)>> = items
                .iter()
                .map(|item| transitions(item, u, defs, unfold))
                .collect::<Result<_>>()?;
            for (i, steps) in per_child.iter().enumerate() {
                for (a, p2) in steps {
                    let mut rest = items.clone();
                    rest[i] = p2.clone();
                    out.push((*a, CcsTerm::Par(rest)));
                }
            }
            for i in 0..items.len() {
                for j in (i + 1)..items.len() {
                    for (ai, pi) in &per_child[i] {
                        for (aj, pj) in &per_child[j] {
                            let sync = matches!((ai, aj), (CcsAct::In(a), CcsAct::Out(b)) if a == b)
                                || matches!((ai, aj), (CcsAct::Out(a), CcsAct::In(b)) if a == b);
                            if sync {
                                let mut rest = items.clone();
                                rest[i] = pi.clone();
                                rest[j] = pj.clone();
                                out.push((CcsAct::Tau, CcsTerm::Par(rest)));
                            }
                        }
                    }
                }
            }
            out
        }
        CcsTerm::Restrict(x, p) => transitions(p, u, defs, unfold)?
            .into_iter()
            .filter(|(a, _)| a.subject() != Some(*x))
            .map(|(a, p2)| (a, CcsTerm::Restrict(*x, Box::new(p2))))
            .collect(),
        CcsTerm::Const(k, args) => {
            if unfold == 0 {
                return Err(Error::Invalid(format!(
                    "constant `{k}` unfolds without reaching a guard; recursion must be guarded"
                )));
            }
            transitions(&defs.unfold(u, k, args)?, u, defs, unfold - 1)?
        }
    })
}

/// Explore the state space of a term, whole orbits at a time so the result
/// stays equivariant even when truncated at the budget.
pub fn generate(term: &CcsTerm, defs: &Defs, u: &Universe, budget: GenBudget) -> Result<Generated> {
    let mut terms: Vec<CcsTerm> = Vec::new();
    let mut index: BTreeMap<CcsTerm, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, CcsAct, usize)> = Vec::new();
    fn intern(t: CcsTerm, terms: &mut Vec<CcsTerm>, index: &mut BTreeMap<CcsTerm, usize>) -> usize {
        if let Some(i) = index.get(&t) {
            return *i;
        }
        terms.push(t.clone());
        index.insert(t, terms.len() - 1);
        terms.len() - 1
    }

    let root_term = term.normalize(u)?;
    let root = intern(root_term, &mut terms, &mut index);
    let mut expanded: BTreeSet<usize> = BTreeSet::new();

    loop {
        let Some(seed) = (0..terms.len()).find(|i| !expanded.contains(i)) else { break };
        // The whole orbit of the seed is expanded in one batch.
        let mut orbit = BTreeSet::from([seed]);
        let mut work = vec![seed];
        while let Some(cur) = work.pop() {
            for t in u.transpositions() {
                let img_term = terms[cur].permute(&t).normalize(u)?;
                let img = intern(img_term, &mut terms, &mut index);
                if orbit.insert(img) {
                    work.push(img);
                }
            }
        }
        if terms.len() > budget.max_states {
            break;
        }
        for s in orbit {
            expanded.insert(s);
            for (a, target) in transitions(&terms[s], u, defs, budget.max_depth)? {
                let target = target.normalize(u)?;
                let id = intern(target, &mut terms, &mut index);
                edges.push((s, a, id));
            }
        }
        if terms.len() > budget.max_states {
            break;
        }
    }

    // Close the frontier under transpositions so the orbit tables are total;
    // frontier states stay transition-free.
    let mut i = 0;
    while i < terms.len() {
        for t in u.transpositions() {
            let img = terms[i].permute(&t).normalize(u)?;
            intern(img, &mut terms, &mut index);
        }
        i += 1;
    }

    let mut b = NtsBuilder::new(u.clone());
    let tau = b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] })?;
    let act = b.add_act(ActDecl {
        name: "act".into(),
        arg_sorts: vec![Sort(0)],
        binding: vec![false],
    })?;
    let coact = b.add_act(ActDecl {
        name: "coact".into(),
        arg_sorts: vec![Sort(0)],
        binding: vec![false],
    })?;
    for t in terms.iter() {
        b.add_state(print_term(t, u), t.free_names())?;
    }
    for (s, a, q) in &edges {
        let label = match a {
            CcsAct::Tau => ActLabel::new(tau, vec![]),
            CcsAct::In(n) => ActLabel::new(act, vec![*n]),
            CcsAct::Out(n) => ActLabel::new(coact, vec![*n]),
        };
        b.add_trans(StateId(*s as u32), label, StateId(*q as u32));
    }
    for tr in u.transpositions() {
        let (x, y) = tr.as_transpositions()[0];
        for (i, t) in terms.iter().enumerate() {
            let img_term = t.permute(&tr).normalize(u)?;
            let img = index[&img_term];
            if img != i {
                b.set_state_perm(x, y, StateId(i as u32), StateId(img as u32))?;
            }
        }
    }
    let nts = b.build()?;
    let truncated_states: Vec<StateId> = (0..terms.len())
        .filter(|i| !expanded.contains(i))
        .map(|i| StateId(i as u32))
        .collect();
    Ok(Generated { nts, root: StateId(root as u32), truncated: truncated_states, terms })
}

pub fn print_term(t: &CcsTerm, u: &Universe) -> String {
    match t {
        CcsTerm::Nil => "0".to_string(),
        CcsTerm::Prefix(a, p) => {
            let act = match a {
                CcsAct::Tau => "tau".to_string(),
                CcsAct::In(n) => u.label(*n).to_string(),
                CcsAct::Out(n) => format!("'{}", u.label(*n)),
            };
            format!("{act}.{}", print_atom(p, u))
        }
        CcsTerm::Sum(items) => items
            .iter()
            .map(|t| print_atom(t, u))
            .collect::<Vec<_>>()
            .join(" + "),
        CcsTerm::Par(items) => items
            .iter()
            .map(|t| print_atom(t, u))
            .collect::<Vec<_>>()
            .join(" | "),
        CcsTerm::Restrict(x, p) => format!("new {}. {}", u.label(*x), print_atom(p, u)),
        CcsTerm::Const(k, args) => {
            if args.is_empty() {
                k.clone()
            } else {
                let args: Vec<&str> = args.iter().map(|n| u.label(*n)).collect();
                format!("{k}({})", args.join(","))
            }
        }
    }
}

fn print_atom(t: &CcsTerm, u: &Universe) -> String {
    match t {
        CcsTerm::Sum(_) | CcsTerm::Par(_) => format!("({})", print_term(t, u)),
        _ => print_term(t, u),
    }
}

/// A parsed program: definitions plus the root expression, still over raw
/// identifier strings.
#[derive(Debug)]
pub struct Program {
    pub defs: Vec<(String, Expr)>,
    pub root: Expr,
}

#[derive(Clone, Debug)]
pub enum Expr {
    Nil,
    Prefix(ActExpr, Box<Expr>),
    Sum(Box<Expr>, Box<Expr>),
    Par(Box<Expr>, Box<Expr>),
    Restrict(String, Box<Expr>),
    Const(String),
}

#[derive(Clone, Debug)]
pub enum ActExpr {
    Tau,
    In(String),
    Out(String),
}

impl Program {
    /// All channel names appearing anywhere (free or bound).
    pub fn mentioned_names(&self) -> BTreeSet<String> {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            match e {
                Expr::Nil | Expr::Const(_) => {}
                Expr::Prefix(a, p) => {
                    match a {
                        ActExpr::Tau => {}
                        ActExpr::In(n) | ActExpr::Out(n) => {
                            out.insert(n.clone());
                        }
                    }
                    walk(p, out);
                }
                Expr::Sum(l, r) | Expr::Par(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Restrict(x, p) => {
                    out.insert(x.clone());
                    walk(p, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        for (_, e) in &self.defs {
            walk(e, &mut out);
        }
        walk(&self.root, &mut out);
        out
    }

    /// Resolve names against a universe, turning constant definitions into
    /// parameterised form.
    pub fn resolve(&self, u: &Universe) -> Result<(CcsTerm, Defs)> {
        // Free names of each definition, to a fixpoint across mutual
        // recursion (string level).
        let mut free: BTreeMap<String, BTreeSet<String>> =
            self.defs.iter().map(|(n, _)| (n.clone(), BTreeSet::new())).collect();
        loop {
            let mut changed = false;
            for (name, body) in &self.defs {
                let now = expr_free(body, &free)?;
                if free[name] != now {
                    free.insert(name.clone(), now);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut defs = Defs::default();
        for (name, body) in &self.defs {
            let formals: Vec<Name> = free[name]
                .iter()
                .map(|n| resolve_name(u, n))
                .collect::<Result<_>>()?;
            let term = resolve_expr(body, u, &free)?;
            defs.entries.insert(name.clone(), (formals, term));
        }
        let root = resolve_expr(&self.root, u, &free)?;
        Ok((root, defs))
    }
}

fn expr_free(e: &Expr, defs_free: &BTreeMap<String, BTreeSet<String>>) -> Result<BTreeSet<String>> {
    Ok(match e {
        Expr::Nil => BTreeSet::new(),
        Expr::Prefix(a, p) => {
            let mut s = expr_free(p, defs_free)?;
            match a {
                ActExpr::Tau => {}
                ActExpr::In(n) | ActExpr::Out(n) => {
                    s.insert(n.clone());
                }
            }
            s
        }
        Expr::Sum(l, r) | Expr::Par(l, r) => {
            let mut s = expr_free(l, defs_free)?;
            s.extend(expr_free(r, defs_free)?);
            s
        }
        Expr::Restrict(x, p) => {
            let mut s = expr_free(p, defs_free)?;
            s.remove(x);
            s
        }
        Expr::Const(k) => defs_free
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Lookup(format!("undefined constant `{k}`")))?,
    })
}

fn resolve_expr(
    e: &Expr,
    u: &Universe,
    defs_free: &BTreeMap<String, BTreeSet<String>>,
) -> Result<CcsTerm> {
    Ok(match e {
        Expr::Nil => CcsTerm::Nil,
        Expr::Prefix(a, p) => {
            let act = match a {
                ActExpr::Tau => CcsAct::Tau,
                ActExpr::In(n) => CcsAct::In(resolve_name(u, n)?),
                ActExpr::Out(n) => CcsAct::Out(resolve_name(u, n)?),
            };
            CcsTerm::Prefix(act, Box::new(resolve_expr(p, u, defs_free)?))
        }
        Expr::Sum(l, r) => CcsTerm::Sum(vec![
            resolve_expr(l, u, defs_free)?,
            resolve_expr(r, u, defs_free)?,
        ]),
        Expr::Par(l, r) => CcsTerm::Par(vec![
            resolve_expr(l, u, defs_free)?,
            resolve_expr(r, u, defs_free)?,
        ]),
        Expr::Restrict(x, p) => {
            CcsTerm::Restrict(resolve_name(u, x)?, Box::new(resolve_expr(p, u, defs_free)?))
        }
        Expr::Const(k) => {
            let args = defs_free
                .get(k)
                .ok_or_else(|| Error::Lookup(format!("undefined constant `{k}`")))?
                .iter()
                .map(|n| resolve_name(u, n))
                .collect::<Result<_>>()?;
            CcsTerm::Const(k.clone(), args)
        }
    })
}

fn resolve_name(u: &Universe, n: &str) -> Result<Name> {
    u.lookup(n)
        .ok_or_else(|| Error::Universe(format!("name `{n}` is not in the universe")))
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Tick,
    Dot,
    Plus,
    Bar,
    LParen,
    RParen,
    Zero,
    Eq,
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src, pos: 0, line: 1, col: 1 }
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, col: self.col, msg: msg.into() })
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek_char() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<Tok> {
        self.skip_ws();
        let Some(c) = self.peek_char() else { return Ok(Tok::Eof) };
        let tok = match c {
            '\'' => {
                self.bump();
                Tok::Tick
            }
            '.' => {
                self.bump();
                Tok::Dot
            }
            '+' => {
                self.bump();
                Tok::Plus
            }
            '|' => {
                self.bump();
                Tok::Bar
            }
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            '0' => {
                self.bump();
                Tok::Zero
            }
            '=' => {
                self.bump();
                Tok::Eq
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(c) = self.peek_char() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return self.error(format!("unexpected character `{other}`")),
        };
        Ok(tok)
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Tok,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Parser<'a>> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next_tok()?;
        Ok(Parser { lexer, current })
    }

    fn advance(&mut self) -> Result<Tok> {
        let next = self.lexer.next_tok()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.current == tok {
            self.advance()?;
            Ok(())
        } else {
            self.lexer
                .error(format!("expected {tok:?}, found {:?}", self.current))
        }
    }

    fn parse_program(&mut self) -> Result<Program> {
        let mut defs: Vec<(String, Expr)> = Vec::new();
        let mut root = None;
        loop {
            if self.current == Tok::Eof {
                break;
            }
            if let Tok::Ident(name) = self.current.clone() {
                if name.chars().next().is_some_and(|c| c.is_uppercase()) {
                    self.advance()?;
                    if self.current == Tok::Eq {
                        self.advance()?;
                        let body = self.parse_sum()?;
                        defs.push((name, body));
                        continue;
                    }
                    root = Some(Expr::Const(name));
                    break;
                }
            }
            root = Some(self.parse_sum()?);
            break;
        }
        if self.current != Tok::Eof {
            return self.lexer.error(format!("trailing input at {:?}", self.current));
        }
        let root = root
            .or_else(|| {
                defs.iter()
                    .find(|(n, _)| n.eq_ignore_ascii_case("main"))
                    .or(defs.first())
                    .map(|(n, _)| Expr::Const(n.clone()))
            })
            .ok_or(Error::Parse { line: 1, col: 1, msg: "empty program".into() })?;
        Ok(Program { defs, root })
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut acc = self.parse_par()?;
        while self.current == Tok::Plus {
            self.advance()?;
            let rhs = self.parse_par()?;
            acc = Expr::Sum(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_par(&mut self) -> Result<Expr> {
        let mut acc = self.parse_prefix()?;
        while self.current == Tok::Bar {
            self.advance()?;
            let rhs = self.parse_prefix()?;
            acc = Expr::Par(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_prefix(&mut self) -> Result<Expr> {
        match self.current.clone() {
            Tok::Zero => {
                self.advance()?;
                Ok(Expr::Nil)
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.parse_sum()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Tick => {
                self.advance()?;
                let Tok::Ident(name) = self.advance()? else {
                    return self.lexer.error("expected a channel after `'`");
                };
                self.expect(Tok::Dot)?;
                let cont = self.parse_prefix()?;
                Ok(Expr::Prefix(ActExpr::Out(name), Box::new(cont)))
            }
            Tok::Ident(name) => {
                if name == "new" {
                    self.advance()?;
                    let Tok::Ident(x) = self.advance()? else {
                        return self.lexer.error("expected a name after `new`");
                    };
                    self.expect(Tok::Dot)?;
                    let body = self.parse_prefix()?;
                    return Ok(Expr::Restrict(x, Box::new(body)));
                }
                if name.chars().next().is_some_and(|c| c.is_uppercase()) {
                    self.advance()?;
                    return Ok(Expr::Const(name));
                }
                self.advance()?;
                if name == "tau" {
                    self.expect(Tok::Dot)?;
                    let cont = self.parse_prefix()?;
                    return Ok(Expr::Prefix(ActExpr::Tau, Box::new(cont)));
                }
                self.expect(Tok::Dot)?;
                let cont = self.parse_prefix()?;
                Ok(Expr::Prefix(ActExpr::In(name), Box::new(cont)))
            }
            other => self.lexer.error(format!("unexpected token {other:?}")),
        }
    }
}

/// Parse a `.ccs` source file.
pub fn parse_ccs(src: &str) -> Result<Program> {
    Parser::new(src)?.parse_program()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::strong_bisim;

    fn universe() -> Universe {
        Universe::single_sorted(["a", "b", "c", "d"]).unwrap()
    }

    fn compile(src: &str) -> Generated {
        let program = parse_ccs(src).unwrap();
        let u = universe();
        let (term, defs) = program.resolve(&u).unwrap();
        generate(&term, &defs, &u, GenBudget::default()).unwrap()
    }

    #[test]
    fn parses_sums_of_prefixes() {
        let p = parse_ccs("a.0 + b.0").unwrap();
        match p.root {
            Expr::Sum(_, _) => {}
            other => panic!("expected a sum, got {other:?}"),
        }
    }

    #[test]
    fn single_prefix_generates_its_orbit() {
        let generated = compile("a.0");
        // a.0 plus the orbit b.0, c.0, d.0, plus 0.
        assert_eq!(generated.nts.state_count(), 5);
        assert!(generated.truncated.is_empty());
        let report = generated.nts.validate();
        assert!(report.ok(), "{:?}", report.violations);
        let root_trans = generated.nts.residuals_of(generated.root);
        assert_eq!(root_trans.len(), 1);
        assert!(generated.nts.bn(&root_trans[0].act).is_empty());
    }

    #[test]
    fn duplicate_summands_bisimilar_to_single() {
        let one = compile("a.0 + a.0");
        let both = compile("a.0");
        let union = Nts::disjoint_union(&one.nts, &both.nts).unwrap();
        let rel = strong_bisim(&union).unwrap();
        let p = union
            .lookup_state(&format!("l.{}", one.nts.state_name(one.root)))
            .unwrap();
        let q = union
            .lookup_state(&format!("r.{}", both.nts.state_name(both.root)))
            .unwrap();
        assert!(rel.contains(p, q));
    }

    #[test]
    fn restriction_blocks_and_synchronises() {
        // new a. (a.0 | 'a.0): only the internal handshake remains.
        let generated = compile("new a. (a.0 | 'a.0)");
        let root_trans = generated.nts.residuals_of(generated.root);
        assert_eq!(root_trans.len(), 1);
        assert!(generated.nts.is_tau(&root_trans[0].act));
        assert!(generated.nts.validate().ok());
    }

    #[test]
    fn constants_unfold_with_budget() {
        let generated = compile("K = a.K\nK");
        assert!(generated.nts.validate().ok(), "{:?}", generated.nts.validate().violations);
        assert_eq!(generated.nts.residuals_of(generated.root).len(), 1);
        assert_eq!(
            generated.nts.residuals_of(generated.root)[0].target,
            generated.root
        );
    }

    #[test]
    fn truncation_reports_frontier() {
        // An unbounded spawner grows forever; the budget cuts it off.
        let program = parse_ccs("K = a.(K | b.0)\nK").unwrap();
        let u = universe();
        let (term, defs) = program.resolve(&u).unwrap();
        let generated =
            generate(&term, &defs, &u, GenBudget { max_states: 12, max_depth: 16 }).unwrap();
        assert!(!generated.truncated.is_empty());
    }
}
