//! Formula surface syntax: parsing into a raw AST, lowering against a
//! system (which expands weak modalities, quantifiers, the new-name
//! quantifier and the next-step modality), and printing.

use std::collections::BTreeMap;

use crate::effects::EffectRegistry;
use crate::error::{Error, Result};
use crate::formula::weak::{FlFormula, WeakFormula};
use crate::formula::{self, Formula, VarId};
use crate::nominal::{Name, NameSet};
use crate::nts::{ActLabel, Nts};

#[derive(Clone, Debug, PartialEq)]
pub struct ActAst {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    True,
    False,
    Not(Box<Ast>),
    And(Vec<Ast>),
    Or(Vec<Ast>),
    Pred(String),
    May(ActAst, Box<Ast>),
    Must(ActAst, Box<Ast>),
    WMay(ActAst, Box<Ast>),
    WMust(ActAst, Box<Ast>),
    Eff(String, Box<Ast>),
    Orbit(Vec<String>, Box<Ast>),
    Forall(String, Vec<String>, Box<Ast>),
    Exists(String, Vec<String>, Box<Ast>),
    New(String, Box<Ast>),
    Next(Box<Ast>),
    NextAll(Box<Ast>),
    Mu(String, Box<Ast>),
    Nu(String, Box<Ast>),
    Var(String),
}

/// Parse the surface syntax.
pub fn parse(src: &str) -> Result<Ast> {
    let mut p = P::new(src)?;
    let ast = p.formula()?;
    if p.current != T::Eof {
        return p.error(format!("trailing input at {:?}", p.current));
    }
    Ok(ast)
}

#[derive(Clone, Debug, PartialEq)]
enum T {
    Ident(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Lt,
    Gt,
    LtLt,
    GtGt,
    Semi,
    Comma,
    Dot,
    Eof,
}

struct P<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    current: T,
}

impl<'a> P<'a> {
    fn new(src: &'a str) -> Result<P<'a>> {
        let mut p = P { src, pos: 0, line: 1, col: 1, current: T::Eof };
        p.current = p.lex()?;
        Ok(p)
    }

    fn error<X>(&self, msg: impl Into<String>) -> Result<X> {
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

    fn lex(&mut self) -> Result<T> {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        let Some(c) = self.peek_char() else { return Ok(T::Eof) };
        Ok(match c {
            '{' => {
                self.bump();
                T::LBrace
            }
            '}' => {
                self.bump();
                T::RBrace
            }
            '(' => {
                self.bump();
                T::LParen
            }
            ')' => {
                self.bump();
                T::RParen
            }
            '[' => {
                self.bump();
                T::LBrack
            }
            ']' => {
                self.bump();
                T::RBrack
            }
            '<' => {
                self.bump();
                if self.peek_char() == Some('<') {
                    self.bump();
                    T::LtLt
                } else {
                    T::Lt
                }
            }
            '>' => {
                self.bump();
                if self.peek_char() == Some('>') {
                    self.bump();
                    T::GtGt
                } else {
                    T::Gt
                }
            }
            ';' => {
                self.bump();
                T::Semi
            }
            ',' => {
                self.bump();
                T::Comma
            }
            '.' => {
                self.bump();
                T::Dot
            }
            c if c.is_alphanumeric() || c == '_' || c == ':' => {
                let mut s = String::new();
                while let Some(c) = self.peek_char() {
                    if c.is_alphanumeric() || c == '_' || c == ':' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                T::Ident(s)
            }
            other => return self.error(format!("unexpected character `{other}`")),
        })
    }

    fn advance(&mut self) -> Result<T> {
        let next = self.lex()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expect(&mut self, t: T) -> Result<()> {
        if self.current == t {
            self.advance()?;
            Ok(())
        } else {
            self.error(format!("expected {t:?}, found {:?}", self.current))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.advance()? {
            T::Ident(s) => Ok(s),
            other => self.error(format!("expected an identifier, found {other:?}")),
        }
    }

    fn formula(&mut self) -> Result<Ast> {
        match self.current.clone() {
            T::LParen => {
                self.advance()?;
                let inner = self.formula()?;
                self.expect(T::RParen)?;
                Ok(inner)
            }
            T::Ident(word) => {
                self.advance()?;
                match word.as_str() {
                    "true" => Ok(Ast::True),
                    "false" => Ok(Ast::False),
                    "not" => Ok(Ast::Not(Box::new(self.formula()?))),
                    "and" => Ok(Ast::And(self.block()?)),
                    "or" => Ok(Ast::Or(self.block()?)),
                    "pred" => {
                        self.expect(T::LParen)?;
                        let name = self.ident()?;
                        self.expect(T::RParen)?;
                        Ok(Ast::Pred(name))
                    }
                    "may" => {
                        let act = self.strong_act()?;
                        Ok(Ast::May(act, Box::new(self.formula()?)))
                    }
                    "must" => {
                        let act = self.strong_act()?;
                        Ok(Ast::Must(act, Box::new(self.formula()?)))
                    }
                    "wmay" => {
                        let act = self.weak_act()?;
                        Ok(Ast::WMay(act, Box::new(self.formula()?)))
                    }
                    "wmust" => {
                        let act = self.weak_act()?;
                        Ok(Ast::WMust(act, Box::new(self.formula()?)))
                    }
                    "eff" => {
                        self.expect(T::LBrack)?;
                        let name = self.ident()?;
                        self.expect(T::RBrack)?;
                        Ok(Ast::Eff(name, Box::new(self.formula()?)))
                    }
                    "orbit" => {
                        match self.advance()? {
                            T::Ident(kw) if kw == "fix" => {}
                            other => return self.error(format!("expected `fix`, found {other:?}")),
                        }
                        self.expect(T::LBrace)?;
                        let names = self.name_list(T::RBrace)?;
                        Ok(Ast::Orbit(names, Box::new(self.formula()?)))
                    }
                    "forall" | "exists" => {
                        let var = self.ident()?;
                        match self.advance()? {
                            T::Ident(kw) if kw == "in" => {}
                            other => return self.error(format!("expected `in`, found {other:?}")),
                        }
                        self.expect(T::LBrace)?;
                        let values = self.name_list(T::RBrace)?;
                        self.expect(T::Dot)?;
                        let body = Box::new(self.formula()?);
                        Ok(if word == "forall" {
                            Ast::Forall(var, values, body)
                        } else {
                            Ast::Exists(var, values, body)
                        })
                    }
                    "new" => {
                        let var = self.ident()?;
                        self.expect(T::Dot)?;
                        Ok(Ast::New(var, Box::new(self.formula()?)))
                    }
                    "next" => Ok(Ast::Next(Box::new(self.formula()?))),
                    "nextall" => Ok(Ast::NextAll(Box::new(self.formula()?))),
                    "mu" => {
                        let var = self.ident()?;
                        self.expect(T::Dot)?;
                        Ok(Ast::Mu(var, Box::new(self.formula()?)))
                    }
                    "nu" => {
                        let var = self.ident()?;
                        self.expect(T::Dot)?;
                        Ok(Ast::Nu(var, Box::new(self.formula()?)))
                    }
                    other => Ok(Ast::Var(other.to_string())),
                }
            }
            other => self.error(format!("unexpected token {other:?}")),
        }
    }

    fn block(&mut self) -> Result<Vec<Ast>> {
        self.expect(T::LBrace)?;
        let mut items = Vec::new();
        if self.current == T::RBrace {
            self.advance()?;
            return Ok(items);
        }
        loop {
            items.push(self.formula()?);
            match self.advance()? {
                T::Semi => continue,
                T::RBrace => break,
                other => return self.error(format!("expected `;` or `}}`, found {other:?}")),
            }
        }
        Ok(items)
    }

    fn name_list(&mut self, close: T) -> Result<Vec<String>> {
        let mut names = Vec::new();
        if self.current == close {
            self.advance()?;
            return Ok(names);
        }
        loop {
            names.push(self.ident()?);
            if self.current == T::Comma || self.current == T::Semi {
                self.advance()?;
                continue;
            }
            if self.current == close {
                self.advance()?;
                break;
            }
            return self.error(format!("expected `,` or close, found {:?}", self.current));
        }
        Ok(names)
    }

    fn strong_act(&mut self) -> Result<ActAst> {
        self.expect(T::Lt)?;
        let act = self.act_body(T::Gt)?;
        Ok(act)
    }

    fn weak_act(&mut self) -> Result<ActAst> {
        self.expect(T::LtLt)?;
        let act = self.act_body(T::GtGt)?;
        Ok(act)
    }

    fn act_body(&mut self, close: T) -> Result<ActAst> {
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.current == T::LParen {
            self.advance()?;
            if self.current != T::RParen {
                loop {
                    args.push(self.ident()?);
                    if self.current == T::Comma || self.current == T::Semi {
                        self.advance()?;
                        continue;
                    }
                    break;
                }
            }
            self.expect(T::RParen)?;
        }
        self.expect(close)?;
        Ok(ActAst { name, args })
    }
}

fn resolve_act(nts: &Nts, act: &ActAst) -> Result<ActLabel> {
    let ctor = nts.lookup_act(&act.name)?;
    let decl = nts.act_decl(ctor);
    if act.args.len() != decl.arity() {
        return Err(Error::Invalid(format!(
            "action `{}` expects {} arguments, got {}",
            act.name,
            decl.arity(),
            act.args.len()
        )));
    }
    let args = act
        .args
        .iter()
        .map(|a| {
            nts.universe()
                .lookup(a)
                .ok_or_else(|| Error::Universe(format!("name `{a}` is not in the universe")))
        })
        .collect::<Result<Vec<Name>>>()?;
    Ok(ActLabel::new(ctor, args))
}

fn resolve_name(nts: &Nts, n: &str) -> Result<Name> {
    nts.universe()
        .lookup(n)
        .ok_or_else(|| Error::Universe(format!("name `{n}` is not in the universe")))
}

/// Lower an AST to a core formula over the given system; weak modalities are
/// unrolled, quantifiers and the next-step operators expanded. Effect
/// consequences are rejected (use [`lower_fl`]).
pub fn lower(ast: &Ast, nts: &Nts) -> Result<Formula> {
    let mut vars = VarEnv::default();
    lower_rec(ast, nts, &mut vars)
}

#[derive(Default)]
struct VarEnv {
    map: BTreeMap<String, VarId>,
    next: u32,
}

impl VarEnv {
    fn get(&mut self, name: &str) -> VarId {
        if let Some(v) = self.map.get(name) {
            return *v;
        }
        let id = VarId(self.next);
        self.next += 1;
        self.map.insert(name.to_string(), id);
        id
    }
}

fn lower_rec(ast: &Ast, nts: &Nts, vars: &mut VarEnv) -> Result<Formula> {
    Ok(match ast {
        Ast::True => Formula::top(),
        Ast::False => Formula::bot(),
        Ast::Not(inner) => lower_rec(inner, nts, vars)?.neg(),
        Ast::And(items) => Formula::conj(
            items
                .iter()
                .map(|i| lower_rec(i, nts, vars))
                .collect::<Result<Vec<_>>>()?,
        )?,
        Ast::Or(items) => Formula::disj(
            items
                .iter()
                .map(|i| lower_rec(i, nts, vars))
                .collect::<Result<Vec<_>>>()?,
        )?,
        Ast::Pred(name) => Formula::Pred(nts.lookup_pred(name)?),
        Ast::May(act, body) => {
            Formula::may(resolve_act(nts, act)?, lower_rec(body, nts, vars)?)
        }
        Ast::Must(act, body) => {
            Formula::must(resolve_act(nts, act)?, lower_rec(body, nts, vars)?)
        }
        Ast::WMay(act, body) => {
            formula::wmay(nts, &resolve_act(nts, act)?, &lower_rec(body, nts, vars)?)?
        }
        Ast::WMust(act, body) => {
            formula::wmust(nts, &resolve_act(nts, act)?, &lower_rec(body, nts, vars)?)?
        }
        Ast::Eff(_, _) => {
            return Err(Error::Invalid(
                "effect consequences need an effect registry; check with --kind fl".into(),
            ))
        }
        Ast::Orbit(names, body) => {
            let fix: NameSet = names
                .iter()
                .map(|n| resolve_name(nts, n))
                .collect::<Result<_>>()?;
            Formula::orbit(fix, lower_rec(body, nts, vars)?)
        }
        Ast::Forall(x, values, body) => {
            let x = resolve_name(nts, x)?;
            let values = values
                .iter()
                .map(|n| resolve_name(nts, n))
                .collect::<Result<Vec<_>>>()?;
            formula::forall_names(nts, x, values, &lower_rec(body, nts, vars)?)?
        }
        Ast::Exists(x, values, body) => {
            let x = resolve_name(nts, x)?;
            let values = values
                .iter()
                .map(|n| resolve_name(nts, n))
                .collect::<Result<Vec<_>>>()?;
            formula::exists_names(nts, x, values, &lower_rec(body, nts, vars)?)?
        }
        Ast::New(x, body) => {
            let x = resolve_name(nts, x)?;
            formula::new_name(nts, x, &lower_rec(body, nts, vars)?)?
        }
        Ast::Next(body) => formula::next(nts, &lower_rec(body, nts, vars)?)?,
        Ast::NextAll(body) => formula::next_all(nts, &lower_rec(body, nts, vars)?)?,
        Ast::Mu(x, body) => {
            let var = vars.get(x);
            Formula::mu(var, lower_rec(body, nts, vars)?)
        }
        Ast::Nu(x, body) => {
            let var = vars.get(x);
            Formula::nu(var, lower_rec(body, nts, vars)?)
        }
        Ast::Var(x) => Formula::Var(vars.get(x)),
    })
}

/// Lower to the weak sublogic; the shape `wmay<<tau>> and{A; pred(phi)}`
/// becomes the guarded-predicate constructor, and for an observable action
/// the same shape is the abbreviation for the tau-guarded form.
pub fn lower_weak(ast: &Ast, nts: &Nts) -> Result<WeakFormula> {
    Ok(match ast {
        Ast::True => WeakFormula::top(),
        Ast::False => WeakFormula::top().neg(),
        Ast::Not(inner) => lower_weak(inner, nts)?.neg(),
        Ast::And(items) => WeakFormula::conj(
            items
                .iter()
                .map(|i| lower_weak(i, nts))
                .collect::<Result<Vec<_>>>()?,
        ),
        Ast::Or(items) => WeakFormula::disj(
            items
                .iter()
                .map(|i| lower_weak(i, nts))
                .collect::<Result<Vec<_>>>()?,
        ),
        Ast::WMust(act, body) => {
            let inner = Ast::WMay(act.clone(), Box::new(Ast::Not(body.clone())));
            lower_weak(&inner, nts)?.neg()
        }
        Ast::WMay(act, body) => {
            let label = resolve_act(nts, act)?;
            // Split a conjunction body into its predicate and the rest.
            let (rest, pred) = split_guarded(body, nts)?;
            match pred {
                Some(pred) => {
                    let guarded = WeakFormula::tau_pred(rest, pred);
                    if nts.is_tau(&label) {
                        guarded
                    } else {
                        WeakFormula::wmay(label, guarded)
                    }
                }
                None => WeakFormula::wmay(label, rest),
            }
        }
        Ast::Pred(_) => {
            return Err(Error::Invalid(
                "state predicates must be guarded: write wmay<<tau>> and{...; pred(phi)}".into(),
            ))
        }
        other => {
            return Err(Error::Invalid(format!(
                "not a weak formula construct: {other:?}"
            )))
        }
    })
}

fn split_guarded(body: &Ast, nts: &Nts) -> Result<(WeakFormula, Option<crate::nts::PredId>)> {
    if let Ast::Pred(name) = body {
        return Ok((WeakFormula::top(), Some(nts.lookup_pred(name)?)));
    }
    if let Ast::And(items) = body {
        let preds: Vec<&Ast> = items.iter().filter(|i| matches!(i, Ast::Pred(_))).collect();
        if preds.len() == 1 {
            let Ast::Pred(name) = preds[0] else { unreachable!() };
            let rest: Vec<WeakFormula> = items
                .iter()
                .filter(|i| !matches!(i, Ast::Pred(_)))
                .map(|i| lower_weak(i, nts))
                .collect::<Result<_>>()?;
            return Ok((WeakFormula::conj(rest), Some(nts.lookup_pred(name)?)));
        }
        if preds.len() > 1 {
            return Err(Error::Invalid(
                "a guarded conjunction may contain at most one predicate".into(),
            ));
        }
    }
    Ok((lower_weak(body, nts)?, None))
}

/// Lower to the effect-consequence grammar: effects guard predicates or
/// action modalities.
pub fn lower_fl(ast: &Ast, nts: &Nts, reg: &EffectRegistry) -> Result<FlFormula> {
    Ok(match ast {
        Ast::True => FlFormula::top(),
        Ast::False => FlFormula::top().neg(),
        Ast::Not(inner) => lower_fl(inner, nts, reg)?.neg(),
        Ast::And(items) => FlFormula::conj(
            items
                .iter()
                .map(|i| lower_fl(i, nts, reg))
                .collect::<Result<Vec<_>>>()?,
        ),
        Ast::Or(items) => FlFormula::conj(
            items
                .iter()
                .map(|i| Ok(lower_fl(i, nts, reg)?.neg()))
                .collect::<Result<Vec<_>>>()?,
        )
        .neg(),
        Ast::Eff(name, body) => {
            let eff = reg
                .effects
                .iter()
                .position(|e| e.name == *name)
                .map(|i| crate::effects::EffectId(i as u32))
                .ok_or_else(|| Error::Lookup(format!("unknown effect `{name}`")))?;
            match &**body {
                Ast::Pred(p) => FlFormula::EffPred { eff, pred: nts.lookup_pred(p)? },
                Ast::May(act, inner) => FlFormula::EffMay {
                    eff,
                    act: resolve_act(nts, act)?,
                    body: Box::new(lower_fl(inner, nts, reg)?),
                },
                other => {
                    return Err(Error::Invalid(format!(
                        "an effect must guard a predicate or an action modality, found {other:?}"
                    )))
                }
            }
        }
        other => {
            return Err(Error::Invalid(format!(
                "not an effect-consequence construct: {other:?}"
            )))
        }
    })
}

/// Print a formula in the surface syntax.
pub fn print(f: &Formula, nts: &Nts) -> String {
    match f {
        Formula::Conj(items) if items.is_empty() => "true".into(),
        Formula::Neg(inner) => match &**inner {
            Formula::Conj(items) if items.is_empty() => "false".into(),
            Formula::Conj(items)
                if !items.is_empty() && items.iter().all(|i| matches!(i, Formula::Neg(_))) =>
            {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        Formula::Neg(x) => print(x, nts),
                        _ => unreachable!(),
                    })
                    .collect();
                format!("or{{{}}}", parts.join("; "))
            }
            _ => format!("not {}", print(inner, nts)),
        },
        Formula::Conj(items) => {
            let parts: Vec<String> = items.iter().map(|i| print(i, nts)).collect();
            format!("and{{{}}}", parts.join("; "))
        }
        Formula::Orbit { fix, template } => {
            let names: Vec<&str> = fix.iter().map(|n| nts.universe().label(n)).collect();
            format!("orbit fix{{{}}} {}", names.join(","), print(template, nts))
        }
        Formula::Pred(p) => format!("pred({})", nts.pred_name(*p)),
        Formula::May { act, body } => {
            format!("may<{}> {}", nts.display_act(act), print(body, nts))
        }
        Formula::Var(x) => format!("X{}", x.0),
        Formula::Mu { var, body } => format!("mu X{}. {}", var.0, print(body, nts)),
    }
}

/// Print a weak formula in the surface syntax.
pub fn print_weak(f: &WeakFormula, nts: &Nts) -> String {
    match f {
        WeakFormula::Conj(items) if items.is_empty() => "true".into(),
        WeakFormula::Conj(items) => {
            let parts: Vec<String> = items.iter().map(|i| print_weak(i, nts)).collect();
            format!("and{{{}}}", parts.join("; "))
        }
        WeakFormula::Neg(inner) => match &**inner {
            WeakFormula::Conj(items) if items.is_empty() => "false".into(),
            _ => format!("not {}", print_weak(inner, nts)),
        },
        WeakFormula::WMay { act, body } => {
            format!("wmay<<{}>> {}", nts.display_act(act), print_weak(body, nts))
        }
        WeakFormula::TauPred { body, pred } => format!(
            "wmay<<tau>> and{{{}; pred({})}}",
            print_weak(body, nts),
            nts.pred_name(*pred)
        ),
    }
}

/// Print an effect-consequence formula.
pub fn print_fl(f: &FlFormula, nts: &Nts, reg: &EffectRegistry) -> String {
    match f {
        FlFormula::Conj(items) if items.is_empty() => "true".into(),
        FlFormula::Conj(items) => {
            let parts: Vec<String> = items.iter().map(|i| print_fl(i, nts, reg)).collect();
            format!("and{{{}}}", parts.join("; "))
        }
        FlFormula::Neg(inner) => match &**inner {
            FlFormula::Conj(items) if items.is_empty() => "false".into(),
            _ => format!("not {}", print_fl(inner, nts, reg)),
        },
        FlFormula::EffPred { eff, pred } => format!(
            "eff[{}] pred({})",
            reg.effect(*eff).name,
            nts.pred_name(*pred)
        ),
        FlFormula::EffMay { eff, act, body } => format!(
            "eff[{}] may<{}> {}",
            reg.effect(*eff).name,
            nts.display_act(act),
            print_fl(body, nts, reg)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{check, check_weak, WeakClosure};
    use crate::nominal::{NameSet, Universe};
    use crate::nts::{ActDecl, NtsBuilder};

    fn sys() -> Nts {
        let u = Universe::single_sorted(["a", "b", "c", "d"]).unwrap();
        let mut b = NtsBuilder::new(u);
        let p = b.add_state("P".into(), NameSet::empty()).unwrap();
        let q = b.add_state("Q".into(), NameSet::empty()).unwrap();
        let phi = b.add_pred("phi".into(), NameSet::empty()).unwrap();
        let tau = b
            .add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] })
            .unwrap();
        b.add_sat(q, phi);
        b.add_trans(p, ActLabel::new(tau, vec![]), q);
        b.build().unwrap()
    }

    #[test]
    fn parses_and_checks_weak_tau_pred() {
        let nts = sys();
        let ast = parse("wmay<<tau>> pred(phi)").unwrap();
        let p = nts.lookup_state("P").unwrap();
        // Strong lowering expands the weak modality.
        let f = lower(&ast, &nts).unwrap();
        assert!(check(&nts, p, &f).unwrap());
        // Weak lowering produces the guarded constructor.
        let w = lower_weak(&ast, &nts).unwrap();
        let wc = WeakClosure::new(&nts);
        assert!(check_weak(&nts, &wc, p, &w).unwrap());
    }

    #[test]
    fn round_trips_strong_syntax() {
        let nts = sys();
        let cases = [
            "true",
            "false",
            "not pred(phi)",
            "and{pred(phi); may<tau> true}",
            "or{pred(phi); not pred(phi)}",
            "mu X. or{pred(phi); next X}",
        ];
        for src in cases {
            let ast = parse(src).unwrap();
            let f = lower(&ast, &nts).unwrap();
            let printed = print(&f, &nts);
            let f2 = lower(&parse(&printed).unwrap(), &nts).unwrap();
            assert_eq!(
                f.canonical(&nts).unwrap(),
                f2.canonical(&nts).unwrap(),
                "case {src} printed as {printed}"
            );
        }
    }

    #[test]
    fn quantifier_sugar_expands() {
        let nts = sys();
        let ast = parse("forall b in {a, c}. may<tau> true").unwrap();
        let f = lower(&ast, &nts).unwrap();
        match f {
            Formula::Conj(items) => assert_eq!(items.len(), 1),
            other => panic!("expected a conjunction, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unguarded_predicates_in_weak_lowering() {
        let nts = sys();
        let ast = parse("pred(phi)").unwrap();
        assert!(lower_weak(&ast, &nts).is_err());
    }
}
