//! The modal logic: finite and orbit conjunctions, negation, state
//! predicates, binding action modalities, variables and least fixpoints.
//!
//! Formulas are interpreted relative to a system (predicates and actions are
//! interned there, and permuting a predicate goes through its orbit table),
//! so most operations take the [`Nts`] alongside the formula. Equality of
//! canonical forms coincides with alpha-equivalence, which is also available
//! directly as [`alpha_eq`].

pub mod syntax;
pub mod weak;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::nominal::{binder_renaming, hull_by, Name, NameSet, Nominal, Perm};
use crate::nts::{ActLabel, Nts, PredId};

/// An equivariant fixpoint variable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(pub u32);

/// Bound on the size of any materialised conjunct set.
pub const CONJ_BOUND: usize = 1_000_000;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    /// Finite conjunction over a set of formulas.
    Conj(BTreeSet<Formula>),
    /// Symbolic conjunction over the orbit of `template` under all
    /// permutations fixing `fix` pointwise.
    Orbit { fix: NameSet, template: Box<Formula> },
    Neg(Box<Formula>),
    Pred(PredId),
    /// `⟨α⟩A`; the binding names of the action bind into the body.
    May { act: ActLabel, body: Box<Formula> },
    Var(VarId),
    /// Least fixpoint; every occurrence of the variable in the body must sit
    /// under an even number of negations.
    Mu { var: VarId, body: Box<Formula> },
}

impl Formula {
    pub fn top() -> Formula {
        Formula::Conj(BTreeSet::new())
    }

    pub fn bot() -> Formula {
        Formula::Neg(Box::new(Formula::top()))
    }

    pub fn neg(self) -> Formula {
        Formula::Neg(Box::new(self))
    }

    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Result<Formula> {
        let set: BTreeSet<Formula> = items.into_iter().collect();
        if set.len() > CONJ_BOUND {
            return Err(Error::ConjunctionBound(set.len()));
        }
        Ok(Formula::Conj(set))
    }

    pub fn conj2(a: Formula, b: Formula) -> Formula {
        Formula::Conj([a, b].into_iter().collect())
    }

    /// `⋁ = ¬⋀¬`.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Result<Formula> {
        Ok(Formula::conj(items.into_iter().map(Formula::neg))?.neg())
    }

    pub fn disj2(a: Formula, b: Formula) -> Formula {
        Formula::conj2(a.neg(), b.neg()).neg()
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::disj2(b, a.neg())
    }

    pub fn may(act: ActLabel, body: Formula) -> Formula {
        Formula::May { act, body: Box::new(body) }
    }

    /// `⟦α⟧A = ¬⟨α⟩¬A`.
    pub fn must(act: ActLabel, body: Formula) -> Formula {
        Formula::may(act, body.neg()).neg()
    }

    pub fn mu(var: VarId, body: Formula) -> Formula {
        Formula::Mu { var, body: Box::new(body) }
    }

    /// Greatest fixpoint `νX.A = ¬μX.¬A[¬X/X]`.
    pub fn nu(var: VarId, body: Formula) -> Formula {
        let negated_var = body.substitute_var(var, &Formula::Var(var).neg());
        Formula::mu(var, negated_var.neg()).neg()
    }

    pub fn orbit(fix: NameSet, template: Formula) -> Formula {
        Formula::Orbit { fix, template: Box::new(template) }
    }

    pub fn is_top(&self) -> bool {
        matches!(self, Formula::Conj(s) if s.is_empty())
    }

    /// Free fixpoint variables.
    pub fn free_vars(&self) -> BTreeSet<VarId> {
        fn walk(f: &Formula, bound: &mut Vec<VarId>, out: &mut BTreeSet<VarId>) {
            match f {
                Formula::Conj(items) => items.iter().for_each(|i| walk(i, bound, out)),
                Formula::Orbit { template, .. } => walk(template, bound, out),
                Formula::Neg(inner) => walk(inner, bound, out),
                Formula::Pred(_) => {}
                Formula::May { body, .. } => walk(body, bound, out),
                Formula::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(*x);
                    }
                }
                Formula::Mu { var, body } => {
                    bound.push(*var);
                    walk(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn is_fixpoint_free(&self) -> bool {
        match self {
            Formula::Conj(items) => items.iter().all(Formula::is_fixpoint_free),
            Formula::Orbit { template, .. } => template.is_fixpoint_free(),
            Formula::Neg(inner) => inner.is_fixpoint_free(),
            Formula::Pred(_) => true,
            Formula::May { body, .. } => body.is_fixpoint_free(),
            Formula::Var(_) | Formula::Mu { .. } => false,
        }
    }

    /// Substitute a formula for the free occurrences of a variable.
    /// Binding-variable clashes are resolved by renaming; action binders are
    /// not touched (fixpoint variables live in a separate namespace, and the
    /// checker only substitutes name-closed arguments in practice; callers
    /// needing binder freshness use [`substitute_avoiding`]).
    pub fn substitute_var(&self, x: VarId, replacement: &Formula) -> Formula {
        match self {
            Formula::Conj(items) => {
                Formula::Conj(items.iter().map(|i| i.substitute_var(x, replacement)).collect())
            }
            Formula::Orbit { fix, template } => Formula::Orbit {
                fix: *fix,
                template: Box::new(template.substitute_var(x, replacement)),
            },
            Formula::Neg(inner) => inner.substitute_var(x, replacement).neg(),
            Formula::Pred(p) => Formula::Pred(*p),
            Formula::May { act, body } => Formula::May {
                act: act.clone(),
                body: Box::new(body.substitute_var(x, replacement)),
            },
            Formula::Var(y) => {
                if *y == x {
                    replacement.clone()
                } else {
                    Formula::Var(*y)
                }
            }
            Formula::Mu { var, body } => {
                if *var == x {
                    Formula::Mu { var: *var, body: body.clone() }
                } else if replacement.free_vars().contains(var) {
                    let fresh = VarId(
                        1 + self
                            .max_var_id()
                            .max(replacement.max_var_id())
                            .unwrap_or(VarId(0))
                            .0,
                    );
                    let renamed = body.substitute_var(*var, &Formula::Var(fresh));
                    Formula::Mu { var: fresh, body: Box::new(renamed.substitute_var(x, replacement)) }
                } else {
                    Formula::Mu { var: *var, body: Box::new(body.substitute_var(x, replacement)) }
                }
            }
        }
    }

    fn max_var_id(&self) -> Option<VarId> {
        match self {
            Formula::Conj(items) => items.iter().filter_map(Formula::max_var_id).max(),
            Formula::Orbit { template, .. } => template.max_var_id(),
            Formula::Neg(inner) => inner.max_var_id(),
            Formula::Pred(_) => None,
            Formula::May { body, .. } => body.max_var_id(),
            Formula::Var(x) => Some(*x),
            Formula::Mu { var, body } => body.max_var_id().max(Some(*var)),
        }
    }

    /// Capture-avoiding substitution as used when unrolling fixpoints:
    /// additionally renames `May` binders clashing with the free names of the
    /// replacement.
    pub fn substitute_avoiding(&self, nts: &Nts, x: VarId, replacement: &Formula) -> Result<Formula> {
        let repl_supp = replacement.support(nts);
        self.subst_avoid(nts, x, replacement, repl_supp)
    }

    fn subst_avoid(&self, nts: &Nts, x: VarId, repl: &Formula, repl_supp: NameSet) -> Result<Formula> {
        Ok(match self {
            Formula::Conj(items) => Formula::Conj(
                items
                    .iter()
                    .map(|i| i.subst_avoid(nts, x, repl, repl_supp))
                    .collect::<Result<_>>()?,
            ),
            Formula::Orbit { fix, template } => {
                // Substituting under an orbit conjunction is only sound when
                // the replacement is untouched by the orbit's permutations.
                if !repl_supp.is_subset(*fix) && template.free_vars().contains(&x) {
                    let expanded = expand_orbit(nts, *fix, template)?;
                    Formula::Conj(
                        expanded
                            .into_iter()
                            .map(|f| f.subst_avoid(nts, x, repl, repl_supp))
                            .collect::<Result<_>>()?,
                    )
                } else {
                    Formula::Orbit {
                        fix: *fix,
                        template: Box::new(template.subst_avoid(nts, x, repl, repl_supp)?),
                    }
                }
            }
            Formula::Neg(inner) => inner.subst_avoid(nts, x, repl, repl_supp)?.neg(),
            Formula::Pred(p) => Formula::Pred(*p),
            Formula::May { act, body } => {
                let binders = nts.bn(act);
                if binders.intersection(repl_supp).is_empty() || !body.free_vars().contains(&x) {
                    Formula::May {
                        act: act.clone(),
                        body: Box::new(body.subst_avoid(nts, x, repl, repl_supp)?),
                    }
                } else {
                    let own = act.occurring().union(body.support(nts));
                    let avoid = own.union(repl_supp);
                    let (p, _) = binder_renaming(nts.universe(), binders, avoid, |f| {
                        act.visit_names(f)
                    })?;
                    Formula::May {
                        act: act.permute(&p),
                        body: Box::new(body.permute(nts, &p).subst_avoid(nts, x, repl, repl_supp)?),
                    }
                }
            }
            Formula::Var(y) => {
                if *y == x {
                    repl.clone()
                } else {
                    Formula::Var(*y)
                }
            }
            Formula::Mu { var, body } => {
                if *var == x {
                    self.clone()
                } else if repl.free_vars().contains(var) {
                    let fresh = VarId(
                        1 + self.max_var_id().max(repl.max_var_id()).unwrap_or(VarId(0)).0,
                    );
                    let renamed = body.substitute_var(*var, &Formula::Var(fresh));
                    Formula::Mu {
                        var: fresh,
                        body: Box::new(renamed.subst_avoid(nts, x, repl, repl_supp)?),
                    }
                } else {
                    Formula::Mu {
                        var: *var,
                        body: Box::new(body.subst_avoid(nts, x, repl, repl_supp)?),
                    }
                }
            }
        })
    }

    /// Structural permutation action. Predicates move through their orbit
    /// tables; fixpoint variables are equivariant.
    pub fn permute(&self, nts: &Nts, p: &Perm) -> Formula {
        match self {
            Formula::Conj(items) => Formula::Conj(items.iter().map(|i| i.permute(nts, p)).collect()),
            Formula::Orbit { fix, template } => Formula::Orbit {
                fix: p.apply_set(*fix),
                template: Box::new(template.permute(nts, p)),
            },
            Formula::Neg(inner) => inner.permute(nts, p).neg(),
            Formula::Pred(phi) => Formula::Pred(nts.permute_pred(p, *phi)),
            Formula::May { act, body } => {
                Formula::May { act: act.permute(p), body: Box::new(body.permute(nts, p)) }
            }
            Formula::Var(x) => Formula::Var(*x),
            Formula::Mu { var, body } => {
                Formula::Mu { var: *var, body: Box::new(body.permute(nts, p)) }
            }
        }
    }

    /// Names textually occurring (an over-approximation of the support).
    pub fn occurring(&self, nts: &Nts) -> NameSet {
        let mut out = NameSet::empty();
        self.visit_names(nts, &mut |n| out.insert(n));
        out
    }

    fn visit_names(&self, nts: &Nts, f: &mut dyn FnMut(Name)) {
        match self {
            Formula::Conj(items) => items.iter().for_each(|i| i.visit_names(nts, f)),
            Formula::Orbit { fix, template } => {
                fix.iter().for_each(&mut *f);
                template.visit_names(nts, f);
            }
            Formula::Neg(inner) => inner.visit_names(nts, f),
            Formula::Pred(phi) => nts.pred_support(*phi).iter().for_each(f),
            Formula::May { act, body } => {
                act.visit_names(f);
                body.visit_names(nts, f);
            }
            Formula::Var(_) => {}
            Formula::Mu { body, .. } => body.visit_names(nts, f),
        }
    }

    /// Structural support computation.
    pub fn support(&self, nts: &Nts) -> NameSet {
        match self {
            Formula::Conj(items) => items
                .iter()
                .fold(NameSet::empty(), |acc, i| acc.union(i.support(nts))),
            Formula::Orbit { fix, template } => template.support(nts).intersection(*fix),
            Formula::Neg(inner) => inner.support(nts),
            Formula::Pred(phi) => nts.pred_support(*phi),
            Formula::May { act, body } => act
                .occurring()
                .union(body.support(nts))
                .difference(nts.bn(act)),
            Formula::Var(_) => NameSet::empty(),
            Formula::Mu { body, .. } => body.support(nts),
        }
    }

    /// Alpha-canonical form: `May` binders renamed top-down, in action
    /// argument order, to the least fresh names; bound fixpoint variables
    /// renumbered in pre-order.
    pub fn canonical(&self, nts: &Nts) -> Result<Formula> {
        self.canonical_vars().canonical_names(nts)
    }

    fn canonical_names(&self, nts: &Nts) -> Result<Formula> {
        Ok(match self {
            Formula::Conj(items) => Formula::Conj(
                items.iter().map(|i| i.canonical_names(nts)).collect::<Result<_>>()?,
            ),
            Formula::Orbit { fix, template } => {
                Formula::Orbit { fix: *fix, template: Box::new(template.canonical_names(nts)?) }
            }
            Formula::Neg(inner) => inner.canonical_names(nts)?.neg(),
            Formula::Pred(p) => Formula::Pred(*p),
            Formula::May { act, body } => {
                let binders = nts.bn(act);
                let supp = self.support(nts);
                let (p, _) = binder_renaming(nts.universe(), binders, supp, |f| act.visit_names(f))?;
                Formula::May {
                    act: act.permute(&p),
                    body: Box::new(body.permute(nts, &p).canonical_names(nts)?),
                }
            }
            Formula::Var(x) => Formula::Var(*x),
            Formula::Mu { var, body } => {
                Formula::Mu { var: *var, body: Box::new(body.canonical_names(nts)?) }
            }
        })
    }

    /// Renumber bound fixpoint variables in pre-order, avoiding free ids.
    fn canonical_vars(&self) -> Formula {
        let free = self.free_vars();
        let mut next = 0u32;
        let mut fresh = move || {
            while free.contains(&VarId(next)) {
                next += 1;
            }
            let id = VarId(next);
            next += 1;
            id
        };
        fn walk(f: &Formula, env: &BTreeMap<VarId, VarId>, fresh: &mut impl FnMut() -> VarId) -> Formula {
            match f {
                Formula::Conj(items) => {
                    Formula::Conj(items.iter().map(|i| walk(i, env, fresh)).collect())
                }
                Formula::Orbit { fix, template } => {
                    Formula::Orbit { fix: *fix, template: Box::new(walk(template, env, fresh)) }
                }
                Formula::Neg(inner) => walk(inner, env, fresh).neg(),
                Formula::Pred(p) => Formula::Pred(*p),
                Formula::May { act, body } => {
                    Formula::May { act: act.clone(), body: Box::new(walk(body, env, fresh)) }
                }
                Formula::Var(x) => Formula::Var(env.get(x).copied().unwrap_or(*x)),
                Formula::Mu { var, body } => {
                    let new = fresh();
                    let mut env2 = env.clone();
                    env2.insert(*var, new);
                    Formula::Mu { var: new, body: Box::new(walk(body, &env2, fresh)) }
                }
            }
        }
        walk(self, &BTreeMap::new(), &mut fresh)
    }

    /// Check the even-negation constraint on every fixpoint body.
    pub fn check_positivity(&self) -> Result<()> {
        fn walk(f: &Formula, polarity: &BTreeMap<VarId, bool>, positive: bool) -> Result<()> {
            match f {
                Formula::Conj(items) => items.iter().try_for_each(|i| walk(i, polarity, positive)),
                Formula::Orbit { template, .. } => walk(template, polarity, positive),
                Formula::Neg(inner) => walk(inner, polarity, !positive),
                Formula::Pred(_) => Ok(()),
                Formula::May { body, .. } => walk(body, polarity, positive),
                Formula::Var(x) => match polarity.get(x) {
                    Some(entry) if *entry != positive => Err(Error::PositivityViolation { var: x.0 }),
                    _ => Ok(()),
                },
                Formula::Mu { var, body } => {
                    let mut inner = polarity.clone();
                    inner.insert(*var, positive);
                    walk(body, &inner, positive)
                }
            }
        }
        walk(self, &BTreeMap::new(), true)
    }
}

/// The finite conjunct set denoted by an orbit conjunction.
pub fn expand_orbit(nts: &Nts, fix: NameSet, template: &Formula) -> Result<Vec<Formula>> {
    let supp = template.support(nts);
    let raw = hull_by(nts.universe(), fix, template, supp, |f, p| f.permute(nts, p));
    let mut out = BTreeSet::new();
    for f in raw {
        out.insert(f.canonical(nts)?);
        if out.len() > CONJ_BOUND {
            return Err(Error::ConjunctionBound(out.len()));
        }
    }
    Ok(out.into_iter().collect())
}

/// Concrete alpha-equivalence: conjunction sets match up to alpha both ways;
/// modalities match when a binder renaming aligns them that fixes the free
/// names of action and body class.
pub fn alpha_eq(nts: &Nts, a: &Formula, b: &Formula) -> bool {
    alpha_eq_env(nts, a, b, &mut Vec::new())
}

fn alpha_eq_env(nts: &Nts, a: &Formula, b: &Formula, vars: &mut Vec<(VarId, VarId)>) -> bool {
    match (a, b) {
        (Formula::Conj(xs), Formula::Conj(ys)) => {
            xs.iter().all(|x| ys.iter().any(|y| alpha_eq_env(nts, x, y, vars)))
                && ys.iter().all(|y| xs.iter().any(|x| alpha_eq_env(nts, x, y, vars)))
        }
        (Formula::Orbit { fix: f1, template: t1 }, Formula::Orbit { fix: f2, template: t2 }) => {
            f1 == f2 && alpha_eq_env(nts, t1, t2, vars)
        }
        (Formula::Neg(x), Formula::Neg(y)) => alpha_eq_env(nts, x, y, vars),
        (Formula::Pred(p), Formula::Pred(q)) => p == q,
        (Formula::Var(x), Formula::Var(y)) => {
            match vars.iter().rev().find(|(a, b)| a == x || b == y) {
                Some((a, b)) => a == x && b == y,
                None => x == y,
            }
        }
        (Formula::Mu { var: v1, body: b1 }, Formula::Mu { var: v2, body: b2 }) => {
            vars.push((*v1, *v2));
            let r = alpha_eq_env(nts, b1, b2, vars);
            vars.pop();
            r
        }
        (Formula::May { act: a1, body: b1 }, Formula::May { act: a2, body: b2 }) => {
            if a1.ctor != a2.ctor || a1.args.len() != a2.args.len() {
                return false;
            }
            let bn1 = nts.bn(a1);
            let bn2 = nts.bn(a2);
            // The permutation is forced positionally on the action args and
            // must fix the free names of the left modality.
            let free = a1.occurring().union(b1.support(nts)).difference(bn1);
            let mut moving = Vec::new();
            let mut images = Vec::new();
            for (x, y) in a1.args.iter().zip(&a2.args) {
                if bn1.contains(*x) {
                    if !bn2.contains(*y) {
                        return false;
                    }
                    match moving.iter().position(|m| m == x) {
                        Some(i) => {
                            if images[i] != *y {
                                return false;
                            }
                        }
                        None => {
                            moving.push(*x);
                            images.push(*y);
                        }
                    }
                } else if x != y {
                    return false;
                }
            }
            // Images must be fresh for the left free names and distinct.
            for (i, y) in images.iter().enumerate() {
                if free.contains(*y) || images[..i].contains(y) {
                    return false;
                }
            }
            if images
                .iter()
                .zip(&moving)
                .any(|(y, x)| nts.universe().sort_of(*y) != nts.universe().sort_of(*x))
            {
                return false;
            }
            let mut p = Perm::identity(nts.universe().size());
            for (x, y) in moving.iter().zip(&images) {
                let cur = p.apply(*x);
                if cur != *y {
                    p = Perm::swap(nts.universe(), cur, *y).expect("sort checked").compose(&p);
                }
            }
            if !p.fixes(free) {
                return false;
            }
            a1.permute(&p) == *a2 && alpha_eq_env(nts, &b1.permute(nts, &p), b2, vars)
        }
        _ => false,
    }
}

/// Substitute name `v` for free occurrences of name `x` (quantifier
/// expansion). Not a permutation: `v` may already occur.
pub fn subst_name(nts: &Nts, f: &Formula, x: Name, v: Name) -> Result<Formula> {
    if x == v {
        return Ok(f.clone());
    }
    Ok(match f {
        Formula::Conj(items) => Formula::Conj(
            items.iter().map(|i| subst_name(nts, i, x, v)).collect::<Result<_>>()?,
        ),
        Formula::Orbit { fix, template } => {
            if fix.contains(x) || fix.contains(v) {
                // Renaming interferes with the orbit; expand first.
                let expanded = expand_orbit(nts, *fix, template)?;
                Formula::Conj(
                    expanded
                        .into_iter()
                        .map(|g| subst_name(nts, &g, x, v))
                        .collect::<Result<_>>()?,
                )
            } else {
                Formula::Orbit { fix: *fix, template: Box::new(subst_name(nts, template, x, v)?) }
            }
        }
        Formula::Neg(inner) => subst_name(nts, inner, x, v)?.neg(),
        Formula::Pred(p) => {
            if nts.pred_support(*p).contains(x) {
                return Err(Error::Invalid(format!(
                    "cannot substitute into predicate `{}`: name substitution on interned \
                     predicates is only defined for names outside their support",
                    nts.pred_name(*p)
                )));
            }
            Formula::Pred(*p)
        }
        Formula::May { act, body } => {
            let binders = nts.bn(act);
            if binders.contains(x) {
                // x is rebound here; nothing free below.
                Formula::May { act: act.clone(), body: body.clone() }
            } else if binders.contains(v) {
                // Rename the binder away from v, then substitute in the
                // renamed modality (its free argument positions may still
                // mention x).
                let own = act.occurring().union(body.support(nts));
                let avoid = own.union(NameSet::singleton(v)).union(NameSet::singleton(x));
                let (p, _) =
                    binder_renaming(nts.universe(), binders, avoid, |g| act.visit_names(g))?;
                let renamed = Formula::May {
                    act: act.permute(&p),
                    body: Box::new(body.permute(nts, &p)),
                };
                subst_name(nts, &renamed, x, v)?
            } else {
                let args = act.args.iter().map(|n| if *n == x { v } else { *n }).collect();
                Formula::May {
                    act: ActLabel::new(act.ctor, args),
                    body: Box::new(subst_name(nts, body, x, v)?),
                }
            }
        }
        Formula::Var(y) => Formula::Var(*y),
        Formula::Mu { var, body } => {
            Formula::Mu { var: *var, body: Box::new(subst_name(nts, body, x, v)?) }
        }
    })
}

/// `∀x∈S. A` as the conjunction of the substitution instances.
pub fn forall_names(
    nts: &Nts,
    x: Name,
    values: impl IntoIterator<Item = Name>,
    body: &Formula,
) -> Result<Formula> {
    Formula::conj(
        values
            .into_iter()
            .map(|v| subst_name(nts, body, x, v))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// `∃x∈S. A = ¬∀x∈S.¬A`.
pub fn exists_names(
    nts: &Nts,
    x: Name,
    values: impl IntoIterator<Item = Name>,
    body: &Formula,
) -> Result<Formula> {
    Ok(forall_names(nts, x, values, &body.clone().neg())?.neg())
}

/// The new-name quantifier. On a finite system a single witness suffices: a
/// name fresh for the formula and for every state support can be swapped in
/// for `x`, and by equivariance the choice does not matter.
pub fn new_name(nts: &Nts, x: Name, body: &Formula) -> Result<Formula> {
    let mut avoid = body.support(nts);
    for s in nts.states() {
        avoid = avoid.union(nts.state_support(s));
    }
    avoid.insert(x);
    let n = nts.universe().fresh(avoid, nts.universe().sort_of(x))?;
    let p = Perm::swap(nts.universe(), x, n)?;
    Ok(body.permute(nts, &p))
}

/// `⟨T⟩A` over a finite action set: the disjunction of the modalities.
pub fn may_set(acts: impl IntoIterator<Item = ActLabel>, body: &Formula) -> Result<Formula> {
    Formula::disj(acts.into_iter().map(|a| Formula::may(a, body.clone())))
}

pub fn must_set(acts: impl IntoIterator<Item = ActLabel>, body: &Formula) -> Result<Formula> {
    Ok(may_set(acts, &body.clone().neg())?.neg())
}

/// Next-step modality `⟨⟩A`: some transition with binders fresh for `A`.
/// The action set is every action the system can perform, alpha-converted
/// away from the support of `A`.
pub fn next(nts: &Nts, body: &Formula) -> Result<Formula> {
    let acts = system_actions_avoiding(nts, body.support(nts))?;
    may_set(acts, body)
}

/// Dual next-step `⟦⟧A`.
pub fn next_all(nts: &Nts, body: &Formula) -> Result<Formula> {
    let acts = system_actions_avoiding(nts, body.support(nts))?;
    must_set(acts, body)
}

/// Every action occurring in some transition, with binders renamed fresh for
/// `avoid`; actions whose binders cannot avoid the set are dropped (they
/// cannot witness a non-capturing step).
pub fn system_actions_avoiding(nts: &Nts, avoid: NameSet) -> Result<Vec<ActLabel>> {
    let mut out = BTreeSet::new();
    for (_, r) in nts.transitions() {
        let binders = nts.bn(&r.act);
        let free = r.act.occurring().difference(binders);
        match binder_renaming(nts.universe(), binders, free.union(avoid), |f| r.act.visit_names(f)) {
            Ok((p, _)) => {
                out.insert(r.act.permute(&p));
            }
            Err(Error::FreshnessExhausted { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out.into_iter().collect())
}

/// Weak modality `⟨⟨α⟩⟩A`, unrolled to the saturation depth of the target
/// system: `⟨⟨τ⟩⟩A = ⋁_{i ≤ n}⟨τ⟩ⁱA` with `n` the state count, and
/// `⟨⟨α⟩⟩A = ⟨⟨τ⟩⟩⟨α⟩⟨⟨τ⟩⟩A` for observable actions.
pub fn wmay(nts: &Nts, act: &ActLabel, body: &Formula) -> Result<Formula> {
    if nts.is_tau(act) {
        wmay_tau(nts, body)
    } else {
        let inner = Formula::may(act.clone(), wmay_tau(nts, body)?);
        wmay_tau(nts, &inner)
    }
}

pub fn wmust(nts: &Nts, act: &ActLabel, body: &Formula) -> Result<Formula> {
    Ok(wmay(nts, act, &body.clone().neg())?.neg())
}

fn wmay_tau(nts: &Nts, body: &Formula) -> Result<Formula> {
    let Some(tau) = nts.tau() else {
        // Without unobservable actions the closure is trivial.
        return Ok(body.clone());
    };
    let depth = nts.state_count();
    let mut disjuncts = Vec::with_capacity(depth + 1);
    let mut cur = body.clone();
    disjuncts.push(cur.clone());
    for _ in 0..depth {
        cur = Formula::may(tau.clone(), cur);
        disjuncts.push(cur.clone());
    }
    Formula::disj(disjuncts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nominal::{Sort, Universe};
    use crate::nts::{ActDecl, NtsBuilder};

    /// A pi-flavoured system: free output `out(chan,chan)`, late input
    /// `in(chan;chan)` binding its second argument, plus tau.
    fn sys() -> Nts {
        let u = Universe::single_sorted(["a", "b", "n", "m", "v", "w"]).unwrap();
        let mut b = NtsBuilder::new(u);
        b.add_state("S".into(), NameSet::empty()).unwrap();
        b.add_pred("phi".into(), NameSet::empty()).unwrap();
        b.add_pred("psi".into(), NameSet::empty()).unwrap();
        b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] }).unwrap();
        b.add_act(ActDecl {
            name: "out".into(),
            arg_sorts: vec![Sort(0), Sort(0)],
            binding: vec![false, false],
        })
        .unwrap();
        b.add_act(ActDecl {
            name: "in".into(),
            arg_sorts: vec![Sort(0), Sort(0)],
            binding: vec![false, true],
        })
        .unwrap();
        b.build().unwrap()
    }

    fn act(nts: &Nts, name: &str, args: &[&str]) -> ActLabel {
        let ctor = nts.lookup_act(name).unwrap();
        let args = args
            .iter()
            .map(|l| nts.universe().lookup(l).unwrap())
            .collect();
        ActLabel::new(ctor, args)
    }

    fn names(nts: &Nts, labels: &[&str]) -> NameSet {
        labels.iter().map(|l| nts.universe().lookup(l).unwrap()).collect()
    }

    #[test]
    fn alpha_variants_of_late_input_are_equal() {
        let nts = sys();
        // ⟨in(a;v)⟩⟨out(b,v)⟩T vs ⟨in(a;w)⟩⟨out(b,w)⟩T
        let f1 = Formula::may(act(&nts, "in", &["a", "v"]), Formula::may(act(&nts, "out", &["b", "v"]), Formula::top()));
        let f2 = Formula::may(act(&nts, "in", &["a", "w"]), Formula::may(act(&nts, "out", &["b", "w"]), Formula::top()));
        assert!(alpha_eq(&nts, &f1, &f2));
        assert_eq!(f1.canonical(&nts).unwrap(), f2.canonical(&nts).unwrap());
        // Distinct predicates are not alpha-equivalent.
        let p1 = Formula::Pred(nts.lookup_pred("phi").unwrap());
        let p2 = Formula::Pred(nts.lookup_pred("psi").unwrap());
        assert!(!alpha_eq(&nts, &p1, &p2));
        // Conjunction is a set.
        let c1 = Formula::conj2(p1.clone(), p2.clone());
        let c2 = Formula::conj2(p2, p1);
        assert!(alpha_eq(&nts, &c1, &c2));
        assert_eq!(c1, c2);
    }

    #[test]
    fn support_of_late_input_formula() {
        let nts = sys();
        let f = Formula::may(act(&nts, "in", &["a", "v"]), Formula::may(act(&nts, "out", &["b", "v"]), Formula::top()));
        assert_eq!(f.support(&nts), names(&nts, &["a", "b"]));
        assert_eq!(Formula::top().support(&nts), NameSet::empty());
        let orbit = Formula::orbit(
            names(&nts, &["a", "b"]),
            Formula::may(act(&nts, "out", &["a", "n"]), Formula::may(act(&nts, "out", &["b", "n"]), Formula::top())),
        );
        assert_eq!(orbit.support(&nts), names(&nts, &["a", "b"]));
    }

    #[test]
    fn orbit_expansion_enumerates_fresh_instances() {
        let nts = sys();
        let template = Formula::may(
            act(&nts, "out", &["a", "n"]),
            Formula::may(act(&nts, "out", &["b", "n"]), Formula::top()),
        );
        let fix = names(&nts, &["a", "b"]);
        let items = expand_orbit(&nts, fix, &template).unwrap();
        // n ranges over the four names outside {a,b}.
        assert_eq!(items.len(), 4);
    }

    #[test]
    fn alpha_eq_is_equivariant_on_swaps() {
        let nts = sys();
        let f1 = Formula::may(act(&nts, "in", &["a", "v"]), Formula::may(act(&nts, "out", &["b", "v"]), Formula::top()));
        let f2 = Formula::may(act(&nts, "in", &["a", "w"]), Formula::may(act(&nts, "out", &["b", "w"]), Formula::top()));
        for t in nts.universe().transpositions() {
            let g1 = f1.permute(&nts, &t);
            let g2 = f2.permute(&nts, &t);
            assert!(alpha_eq(&nts, &g1, &g2));
        }
    }

    #[test]
    fn substitution_respects_binders() {
        let nts = sys();
        let x = VarId(0);
        // X[B/X] = B; (mu X. X)[B/X] unchanged.
        let b = Formula::Pred(nts.lookup_pred("phi").unwrap());
        assert_eq!(Formula::Var(x).substitute_var(x, &b), b);
        let muxx = Formula::mu(x, Formula::Var(x));
        assert_eq!(muxx.substitute_var(x, &b), muxx);
    }

    #[test]
    fn capture_avoiding_substitution_renames_binder() {
        let nts = sys();
        let x = VarId(0);
        let v = nts.universe().lookup("v").unwrap();
        // ⟨in(a;v)⟩X with a replacement whose support contains v.
        let f = Formula::may(act(&nts, "in", &["a", "v"]), Formula::Var(x));
        let repl = Formula::may(act(&nts, "out", &["b", "v"]), Formula::top());
        let result = f.substitute_avoiding(&nts, x, &repl).unwrap();
        match &result {
            Formula::May { act, body } => {
                assert!(!nts.bn(act).contains(v), "binder must move away from v");
                assert_eq!(**body, repl);
            }
            other => panic!("unexpected shape {other:?}"),
        }
        // The result does not depend on the bound name chosen.
        let g = Formula::may(act(&nts, "in", &["a", "w"]), Formula::Var(x));
        let result2 = g.substitute_avoiding(&nts, x, &repl).unwrap();
        assert_eq!(
            result.canonical(&nts).unwrap(),
            result2.canonical(&nts).unwrap()
        );
    }

    #[test]
    fn positivity_detects_odd_negations() {
        let x = VarId(0);
        let good = Formula::mu(x, Formula::Var(x).neg().neg());
        assert!(good.check_positivity().is_ok());
        let bad = Formula::mu(x, Formula::Var(x).neg());
        assert!(matches!(bad.check_positivity(), Err(Error::PositivityViolation { .. })));
    }

    #[test]
    fn swap_test_support_matches_structural() {
        let nts = sys();
        let cases = vec![
            Formula::top(),
            Formula::Pred(nts.lookup_pred("phi").unwrap()),
            Formula::may(act(&nts, "in", &["a", "v"]), Formula::may(act(&nts, "out", &["b", "v"]), Formula::top())),
            Formula::conj2(
                Formula::may(act(&nts, "out", &["a", "b"]), Formula::top()),
                Formula::may(act(&nts, "tau", &[]), Formula::top()).neg(),
            ),
        ];
        for f in cases {
            let canonical = f.canonical(&nts).unwrap();
            let swap_supp = crate::nominal::support_by(
                nts.universe(),
                canonical.occurring(&nts),
                &canonical,
                |x, p| x.permute(&nts, p).canonical(&nts).unwrap(),
            );
            assert_eq!(swap_supp, f.support(&nts), "formula {f:?}");
        }
    }
}
