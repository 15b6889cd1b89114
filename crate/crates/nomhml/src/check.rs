//! Satisfaction checking and fixpoint evaluation.
//!
//! `check` evaluates closed formulas at a state, choosing alpha-variants of
//! modalities and residuals over a common fresh pool so that matching is
//! structural. `interp` is the set semantics with least fixpoints, evaluated
//! by Kleene iteration (default) or by intersecting all prefixpoints over the
//! subset lattice (oracle mode for small systems).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::effects::EffectRegistry;
use crate::error::{Error, Result};
use crate::formula::weak::{ExtWeakFormula, FlFormula, Preformula, WeakFormula};
use crate::formula::{expand_orbit, Formula, VarId};
use crate::nominal::{binder_renaming, NameSet, Nominal};
use crate::nts::{ActLabel, Nts, Residual, StateId};

/// A finitely supported set of states.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct StateSet(pub BTreeSet<StateId>);

impl StateSet {
    pub fn all(nts: &Nts) -> StateSet {
        StateSet(nts.states().collect())
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.0.contains(&s)
    }

    pub fn permute(&self, nts: &Nts, p: &crate::nominal::Perm) -> StateSet {
        StateSet(self.0.iter().map(|s| nts.permute_state(p, *s)).collect())
    }

    pub fn support(&self, nts: &Nts) -> NameSet {
        let occ = self
            .0
            .iter()
            .fold(NameSet::empty(), |acc, s| acc.union(nts.state_support(*s)));
        crate::nominal::support_by(nts.universe(), occ, self, |set, p| set.permute(nts, p))
    }
}

/// A finite map from fixpoint variables to state sets, defaulting to empty.
#[derive(Clone, Debug, Default)]
pub struct Valuation(pub BTreeMap<VarId, StateSet>);

impl Valuation {
    pub fn get(&self, x: VarId) -> StateSet {
        self.0.get(&x).cloned().unwrap_or_default()
    }

    pub fn with(&self, x: VarId, s: StateSet) -> Valuation {
        let mut m = self.0.clone();
        m.insert(x, s);
        Valuation(m)
    }

    pub fn support(&self, nts: &Nts) -> NameSet {
        self.0
            .values()
            .fold(NameSet::empty(), |acc, s| acc.union(s.support(nts)))
    }
}

/// Check a closed formula at a state.
pub fn check(nts: &Nts, p: StateId, formula: &Formula) -> Result<bool> {
    if let Some(x) = formula.free_vars().into_iter().next() {
        return Err(Error::UnboundVariable(x.0));
    }
    formula.check_positivity()?;
    let canonical = formula.canonical(nts)?;
    let mut memo = HashMap::new();
    eval(nts, p, &canonical, &mut memo)
}

fn eval(
    nts: &Nts,
    p: StateId,
    f: &Formula,
    memo: &mut HashMap<(StateId, Formula), bool>,
) -> Result<bool> {
    if let Some(v) = memo.get(&(p, f.clone())) {
        return Ok(*v);
    }
    let value = match f {
        Formula::Conj(items) => {
            let mut all = true;
            for i in items {
                if !eval(nts, p, i, memo)? {
                    all = false;
                    break;
                }
            }
            all
        }
        Formula::Orbit { fix, template } => {
            let mut all = true;
            for i in expand_orbit(nts, *fix, template)? {
                if !eval(nts, p, &i, memo)? {
                    all = false;
                    break;
                }
            }
            all
        }
        Formula::Neg(inner) => !eval(nts, p, inner, memo)?,
        Formula::Pred(phi) => nts.holds(p, *phi)?,
        Formula::May { act, body } => {
            let mut found = false;
            for r in nts.residuals_of(p) {
                if let Some((q, moved_body)) = match_modality(nts, p, act, body, r, NameSet::empty())? {
                    if eval(nts, q, &moved_body, memo)? {
                        found = true;
                        break;
                    }
                }
            }
            found
        }
        Formula::Var(x) => return Err(Error::UnboundVariable(x.0)),
        Formula::Mu { .. } => {
            let set = interp(nts, f, &Valuation::default())?;
            set.contains(p)
        }
    };
    memo.insert((p, f.clone()), value);
    Ok(value)
}

/// Align a modality `⟨act⟩body` with a residual of `p`: rename both binder
/// sets over the same fresh pool (avoiding the state, the formula, the
/// residual and `extra`) and compare the actions structurally. On a match,
/// returns the residual target and the body moved under the common renaming.
fn match_modality(
    nts: &Nts,
    p: StateId,
    act: &ActLabel,
    body: &Formula,
    r: &Residual,
    extra: NameSet,
) -> Result<Option<(StateId, Formula)>> {
    if r.act.ctor != act.ctor || r.act.args.len() != act.args.len() {
        return Ok(None);
    }
    let binders = nts.bn(act);
    let formula_free = act.occurring().union(body.support(nts)).difference(binders);
    let avoid = nts
        .state_support(p)
        .union(formula_free)
        .union(nts.residual_support(r))
        .union(extra);
    let (pf, _) = binder_renaming(nts.universe(), binders, avoid, |f| act.visit_names(f))?;
    let act_f = act.permute(&pf);
    let r_binders = nts.bn(&r.act);
    let (pr, _) = binder_renaming(nts.universe(), r_binders, avoid, |f| r.act.visit_names(f))?;
    if act_f != r.act.permute(&pr) {
        return Ok(None);
    }
    let q = nts.permute_state(&pr, r.target);
    Ok(Some((q, body.permute(nts, &pf))))
}

/// Interpretation of a formula as its set of satisfying states, least
/// fixpoints by Kleene iteration.
pub fn interp(nts: &Nts, f: &Formula, valuation: &Valuation) -> Result<StateSet> {
    f.check_positivity()?;
    interp_with(nts, f, valuation, MuMode::Kleene)
}

/// Oracle interpretation: least fixpoints as the intersection of all
/// prefixpoints, enumerated over the full subset lattice. Only for systems
/// with at most [`TARSKI_LIMIT`] states.
pub fn interp_tarski(nts: &Nts, f: &Formula, valuation: &Valuation) -> Result<StateSet> {
    if nts.state_count() > TARSKI_LIMIT {
        return Err(Error::Invalid(format!(
            "prefixpoint enumeration needs at most {TARSKI_LIMIT} states, system has {}",
            nts.state_count()
        )));
    }
    f.check_positivity()?;
    interp_with(nts, f, valuation, MuMode::Tarski)
}

pub const TARSKI_LIMIT: usize = 20;

#[derive(Clone, Copy, PartialEq, Eq)]
enum MuMode {
    Kleene,
    Tarski,
}

fn interp_with(nts: &Nts, f: &Formula, valuation: &Valuation, mode: MuMode) -> Result<StateSet> {
    Ok(match f {
        Formula::Conj(items) => {
            let mut out = StateSet::all(nts);
            for i in items {
                let s = interp_with(nts, i, valuation, mode)?;
                out = StateSet(out.0.intersection(&s.0).copied().collect());
            }
            out
        }
        Formula::Orbit { fix, template } => {
            let mut out = StateSet::all(nts);
            for i in expand_orbit(nts, *fix, template)? {
                let s = interp_with(nts, &i, valuation, mode)?;
                out = StateSet(out.0.intersection(&s.0).copied().collect());
            }
            out
        }
        Formula::Neg(inner) => {
            let s = interp_with(nts, inner, valuation, mode)?;
            StateSet(nts.states().filter(|p| !s.contains(*p)).collect())
        }
        Formula::Pred(phi) => {
            StateSet(nts.states().filter(|p| nts.sat_pairs().any(|(s, q)| s == *p && q == *phi)).collect())
        }
        Formula::May { act, body } => {
            let eps_supp = valuation.support(nts);
            let mut out = BTreeSet::new();
            for p in nts.states() {
                for r in nts.residuals_of(p) {
                    if let Some((q, moved_body)) = match_modality(nts, p, act, body, r, eps_supp)? {
                        let target_set = interp_with(nts, &moved_body, valuation, mode)?;
                        if target_set.contains(q) {
                            out.insert(p);
                            break;
                        }
                    }
                }
            }
            StateSet(out)
        }
        Formula::Var(x) => valuation.get(*x),
        Formula::Mu { var, body } => match mode {
            MuMode::Kleene => {
                let mut current = StateSet::default();
                loop {
                    let next = interp_with(nts, body, &valuation.with(*var, current.clone()), mode)?;
                    if next == current {
                        break current;
                    }
                    current = next;
                }
            }
            MuMode::Tarski => {
                let states: Vec<StateId> = nts.states().collect();
                let mut result: Option<BTreeSet<StateId>> = None;
                for mask in 0u64..(1u64 << states.len()) {
                    let set = StateSet(
                        states
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| mask & (1 << i) != 0)
                            .map(|(_, s)| *s)
                            .collect(),
                    );
                    let image = interp_with(nts, body, &valuation.with(*var, set.clone()), mode)?;
                    if image.0.is_subset(&set.0) {
                        result = Some(match result {
                            None => set.0,
                            Some(acc) => acc.intersection(&set.0).copied().collect(),
                        });
                    }
                }
                StateSet(result.unwrap_or_default())
            }
        },
    })
}

/// Finite unrolling of a least fixpoint: depth 0 is `⊥`, each further level
/// substitutes the previous one into the body.
pub fn unroll(nts: &Nts, f: &Formula, depth: usize) -> Result<Formula> {
    let Formula::Mu { var, body } = f else {
        return Err(Error::Invalid("unroll expects a fixpoint formula".into()));
    };
    let mut acc = Formula::bot();
    for _ in 0..depth {
        acc = body.substitute_avoiding(nts, *var, &acc)?;
    }
    Ok(acc)
}

/// Translate a closed formula into a fixpoint-free one: homomorphic except
/// that each fixpoint is unrolled to the system's state count, which reaches
/// the least fixpoint on a finite lattice.
pub fn encode_fixpoint_free(nts: &Nts, f: &Formula) -> Result<Formula> {
    if !f.is_closed() {
        return Err(Error::Invalid("fixpoint encoding expects a closed formula".into()));
    }
    encode_rec(nts, f)
}

fn encode_rec(nts: &Nts, f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::Conj(items) => {
            Formula::Conj(items.iter().map(|i| encode_rec(nts, i)).collect::<Result<_>>()?)
        }
        Formula::Orbit { fix, template } => {
            Formula::Orbit { fix: *fix, template: Box::new(encode_rec(nts, template)?) }
        }
        Formula::Neg(inner) => encode_rec(nts, inner)?.neg(),
        Formula::Pred(p) => Formula::Pred(*p),
        Formula::May { act, body } => {
            Formula::May { act: act.clone(), body: Box::new(encode_rec(nts, body)?) }
        }
        Formula::Var(x) => Formula::Var(*x),
        Formula::Mu { var, body } => {
            let encoded_body = encode_rec(nts, body)?;
            let inner = Formula::Mu { var: *var, body: Box::new(encoded_body) };
            unroll(nts, &inner, nts.state_count())?
        }
    })
}

/// Reflexive-transitive closure of the unobservable transitions, plus the
/// derived weak labelled transitions.
#[derive(Clone, Debug)]
pub struct WeakClosure {
    tau_reach: Vec<BTreeSet<StateId>>,
    pub rounds: usize,
}

impl WeakClosure {
    pub fn new(nts: &Nts) -> WeakClosure {
        let n = nts.state_count();
        let mut reach: Vec<BTreeSet<StateId>> = nts.states().map(|s| [s].into()).collect();
        let mut rounds = 0;
        loop {
            let mut changed = false;
            for p in nts.states() {
                let mut additions = BTreeSet::new();
                for q in &reach[p.0 as usize] {
                    for r in nts.residuals_of(*q) {
                        if nts.is_tau(&r.act) && !reach[p.0 as usize].contains(&r.target) {
                            additions.insert(r.target);
                        }
                    }
                }
                if !additions.is_empty() {
                    reach[p.0 as usize].extend(additions);
                    changed = true;
                }
            }
            rounds += 1;
            if !changed || rounds > n + 1 {
                break;
            }
        }
        WeakClosure { tau_reach: reach, rounds }
    }

    /// `p ⇒ q`.
    pub fn tau_reaches(&self, p: StateId, q: StateId) -> bool {
        self.tau_reach[p.0 as usize].contains(&q)
    }

    pub fn tau_closure(&self, p: StateId) -> &BTreeSet<StateId> {
        &self.tau_reach[p.0 as usize]
    }

    /// `p ⇒α q` variants with binders fresh for `avoid ∪ supp(p)`.
    pub fn weak_transitions_from(
        &self,
        nts: &Nts,
        p: StateId,
        avoid: NameSet,
    ) -> Result<Vec<(ActLabel, StateId)>> {
        let mut out = BTreeSet::new();
        for mid in self.tau_closure(p) {
            for (act, q) in nts.transitions_from(*mid, avoid.union(nts.state_support(p)))? {
                for q2 in self.tau_closure(q) {
                    out.insert((act.clone(), *q2));
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// `p ⇒α̂ q`: the tau closure when the action is unobservable, the weak
    /// labelled transition otherwise.
    pub fn weak_hat(
        &self,
        nts: &Nts,
        p: StateId,
        act: &ActLabel,
        avoid: NameSet,
    ) -> Result<Vec<(ActLabel, StateId)>> {
        if nts.is_tau(act) {
            Ok(self.tau_closure(p).iter().map(|q| (act.clone(), *q)).collect())
        } else {
            Ok(self
                .weak_transitions_from(nts, p, avoid)?
                .into_iter()
                .filter(|(a, _)| a.ctor == act.ctor)
                .collect())
        }
    }
}

/// Direct evaluation of `⟨⟨α⟩⟩A` over the weak transition relation; agrees
/// with checking the unrolled disjunction encoding.
pub fn check_weak_modality(
    nts: &Nts,
    wc: &WeakClosure,
    p: StateId,
    act: &ActLabel,
    body: &Formula,
) -> Result<bool> {
    let canonical = body.canonical(nts)?;
    let mut memo = HashMap::new();
    weak_modality_eval(nts, wc, p, act, &canonical, &mut memo)
}

fn weak_modality_eval(
    nts: &Nts,
    wc: &WeakClosure,
    p: StateId,
    act: &ActLabel,
    body: &Formula,
    memo: &mut HashMap<(StateId, Formula), bool>,
) -> Result<bool> {
    if nts.is_tau(act) {
        for q in wc.tau_closure(p) {
            if eval(nts, *q, body, memo)? {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    for mid in wc.tau_closure(p) {
        for r in nts.residuals_of(*mid) {
            if let Some((q, moved_body)) =
                match_modality(nts, *mid, act, body, r, nts.state_support(p))?
            {
                for q2 in wc.tau_closure(q) {
                    if eval(nts, *q2, &moved_body, memo)? {
                        return Ok(true);
                    }
                }
            }
        }
    }
    Ok(false)
}

/// Evaluate a weak formula directly over the weak transition relation.
pub fn check_weak(nts: &Nts, wc: &WeakClosure, p: StateId, f: &WeakFormula) -> Result<bool> {
    let mut memo = HashMap::new();
    weak_eval(nts, wc, p, f, &mut memo)
}

fn weak_eval(
    nts: &Nts,
    wc: &WeakClosure,
    p: StateId,
    f: &WeakFormula,
    memo: &mut HashMap<(StateId, WeakFormula), bool>,
) -> Result<bool> {
    if let Some(v) = memo.get(&(p, f.clone())) {
        return Ok(*v);
    }
    let value = match f {
        WeakFormula::Conj(items) => {
            let mut all = true;
            for i in items {
                if !weak_eval(nts, wc, p, i, memo)? {
                    all = false;
                    break;
                }
            }
            all
        }
        WeakFormula::Neg(inner) => !weak_eval(nts, wc, p, inner, memo)?,
        WeakFormula::WMay { act, body } => {
            if nts.is_tau(act) {
                let mut found = false;
                for q in wc.tau_closure(p) {
                    if weak_eval(nts, wc, *q, body, memo)? {
                        found = true;
                        break;
                    }
                }
                found
            } else {
                let mut found = false;
                'outer: for mid in wc.tau_closure(p) {
                    for r in nts.residuals_of(*mid) {
                        if let Some((q, moved_body)) =
                            weak_match(nts, p, *mid, act, body, r)?
                        {
                            for q2 in wc.tau_closure(q) {
                                if weak_eval(nts, wc, *q2, &moved_body, memo)? {
                                    found = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                found
            }
        }
        WeakFormula::TauPred { body, pred } => {
            let mut found = false;
            for q in wc.tau_closure(p) {
                if nts.holds(*q, *pred)? && weak_eval(nts, wc, *q, body, memo)? {
                    found = true;
                    break;
                }
            }
            found
        }
    };
    memo.insert((p, f.clone()), value);
    Ok(value)
}

fn weak_match(
    nts: &Nts,
    start: StateId,
    mid: StateId,
    act: &ActLabel,
    body: &WeakFormula,
    r: &Residual,
) -> Result<Option<(StateId, WeakFormula)>> {
    if r.act.ctor != act.ctor || r.act.args.len() != act.args.len() {
        return Ok(None);
    }
    let binders = nts.bn(act);
    let formula_free = act.occurring().union(body.support(nts)).difference(binders);
    let avoid = nts
        .state_support(start)
        .union(nts.state_support(mid))
        .union(formula_free)
        .union(nts.residual_support(r));
    let (pf, _) = binder_renaming(nts.universe(), binders, avoid, |f| act.visit_names(f))?;
    let act_f = act.permute(&pf);
    let (pr, _) = binder_renaming(nts.universe(), nts.bn(&r.act), avoid, |f| r.act.visit_names(f))?;
    if act_f != r.act.permute(&pr) {
        return Ok(None);
    }
    Ok(Some((nts.permute_state(&pr, r.target), body.permute(nts, &pf))))
}

/// Evaluate an extended weak formula (preformulas allow disjunctions of
/// unguarded predicates).
pub fn check_ext_weak(nts: &Nts, wc: &WeakClosure, p: StateId, f: &ExtWeakFormula) -> Result<bool> {
    Ok(match f {
        ExtWeakFormula::Conj(items) => {
            for i in items {
                if !check_ext_weak(nts, wc, p, i)? {
                    return Ok(false);
                }
            }
            true
        }
        ExtWeakFormula::Neg(inner) => !check_ext_weak(nts, wc, p, inner)?,
        ExtWeakFormula::WMay { act, body } => {
            if nts.is_tau(act) {
                let mut found = false;
                for q in wc.tau_closure(p) {
                    if check_ext_weak(nts, wc, *q, body)? {
                        found = true;
                        break;
                    }
                }
                found
            } else {
                let mut found = false;
                'outer: for mid in wc.tau_closure(p) {
                    for r in nts.residuals_of(*mid) {
                        if let Some((q, moved)) = ext_weak_match(nts, p, *mid, act, body, r)? {
                            for q2 in wc.tau_closure(q) {
                                if check_ext_weak(nts, wc, *q2, &moved)? {
                                    found = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
                found
            }
        }
        ExtWeakFormula::WTau(pre) => {
            let mut found = false;
            for q in wc.tau_closure(p) {
                if check_preformula(nts, wc, *q, pre)? {
                    found = true;
                    break;
                }
            }
            found
        }
    })
}

fn check_preformula(nts: &Nts, wc: &WeakClosure, p: StateId, b: &Preformula) -> Result<bool> {
    Ok(match b {
        Preformula::And(e, rest) => {
            check_ext_weak(nts, wc, p, e)? && check_preformula(nts, wc, p, rest)?
        }
        Preformula::Pred(phi) => nts.holds(p, *phi)?,
        Preformula::Disj(items) => {
            for i in items {
                if check_preformula(nts, wc, p, i)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn ext_weak_match(
    nts: &Nts,
    start: StateId,
    mid: StateId,
    act: &ActLabel,
    body: &ExtWeakFormula,
    r: &Residual,
) -> Result<Option<(StateId, ExtWeakFormula)>> {
    if r.act.ctor != act.ctor || r.act.args.len() != act.args.len() {
        return Ok(None);
    }
    let binders = nts.bn(act);
    let formula_free = act.occurring().union(ext_weak_support(nts, body)).difference(binders);
    let avoid = nts
        .state_support(start)
        .union(nts.state_support(mid))
        .union(formula_free)
        .union(nts.residual_support(r));
    let (pf, _) = binder_renaming(nts.universe(), binders, avoid, |f| act.visit_names(f))?;
    let act_f = act.permute(&pf);
    let (pr, _) = binder_renaming(nts.universe(), nts.bn(&r.act), avoid, |f| r.act.visit_names(f))?;
    if act_f != r.act.permute(&pr) {
        return Ok(None);
    }
    Ok(Some((nts.permute_state(&pr, r.target), ext_weak_permute(nts, body, &pf))))
}

fn ext_weak_support(nts: &Nts, f: &ExtWeakFormula) -> NameSet {
    match f {
        ExtWeakFormula::Conj(items) => items
            .iter()
            .fold(NameSet::empty(), |acc, i| acc.union(ext_weak_support(nts, i))),
        ExtWeakFormula::Neg(inner) => ext_weak_support(nts, inner),
        ExtWeakFormula::WMay { act, body } => act
            .occurring()
            .union(ext_weak_support(nts, body))
            .difference(nts.bn(act)),
        ExtWeakFormula::WTau(pre) => pre_support(nts, pre),
    }
}

fn pre_support(nts: &Nts, b: &Preformula) -> NameSet {
    match b {
        Preformula::And(e, rest) => ext_weak_support(nts, e).union(pre_support(nts, rest)),
        Preformula::Pred(phi) => nts.pred_support(*phi),
        Preformula::Disj(items) => items
            .iter()
            .fold(NameSet::empty(), |acc, i| acc.union(pre_support(nts, i))),
    }
}

fn ext_weak_permute(nts: &Nts, f: &ExtWeakFormula, p: &crate::nominal::Perm) -> ExtWeakFormula {
    match f {
        ExtWeakFormula::Conj(items) => {
            ExtWeakFormula::Conj(items.iter().map(|i| ext_weak_permute(nts, i, p)).collect())
        }
        ExtWeakFormula::Neg(inner) => ext_weak_permute(nts, inner, p).neg(),
        ExtWeakFormula::WMay { act, body } => ExtWeakFormula::WMay {
            act: act.permute(p),
            body: Box::new(ext_weak_permute(nts, body, p)),
        },
        ExtWeakFormula::WTau(pre) => ExtWeakFormula::WTau(Box::new(pre_permute(nts, pre, p))),
    }
}

fn pre_permute(nts: &Nts, b: &Preformula, p: &crate::nominal::Perm) -> Preformula {
    match b {
        Preformula::And(e, rest) => {
            Preformula::And(ext_weak_permute(nts, e, p), Box::new(pre_permute(nts, rest, p)))
        }
        Preformula::Pred(phi) => Preformula::Pred(nts.permute_pred(p, *phi)),
        Preformula::Disj(items) => {
            Preformula::Disj(items.iter().map(|i| pre_permute(nts, i, p)).collect())
        }
    }
}

/// Evaluate an effect-consequence formula.
pub fn check_fl(nts: &Nts, reg: &EffectRegistry, p: StateId, f: &FlFormula) -> Result<bool> {
    Ok(match f {
        FlFormula::Conj(items) => {
            for i in items {
                if !check_fl(nts, reg, p, i)? {
                    return Ok(false);
                }
            }
            true
        }
        FlFormula::Neg(inner) => !check_fl(nts, reg, p, inner)?,
        FlFormula::EffPred { eff, pred } => nts.holds(reg.effect(*eff).apply(p), *pred)?,
        FlFormula::EffMay { eff, act, body } => {
            let q = reg.effect(*eff).apply(p);
            let mut found = false;
            for r in nts.residuals_of(q) {
                if let Some((target, moved)) =
                    fl_match(nts, reg, q, *eff, act, body, r)?
                {
                    if check_fl(nts, reg, target, &moved)? {
                        found = true;
                        break;
                    }
                }
            }
            found
        }
    })
}

fn fl_match(
    nts: &Nts,
    reg: &EffectRegistry,
    state: StateId,
    eff: crate::effects::EffectId,
    act: &ActLabel,
    body: &FlFormula,
    r: &Residual,
) -> Result<Option<(StateId, FlFormula)>> {
    if r.act.ctor != act.ctor || r.act.args.len() != act.args.len() {
        return Ok(None);
    }
    let binders = nts.bn(act);
    let formula_free = act.occurring().union(fl_support(nts, reg, body)).difference(binders);
    let avoid = nts
        .state_support(state)
        .union(reg.effect(eff).support(nts))
        .union(formula_free)
        .union(nts.residual_support(r));
    let (pf, _) = binder_renaming(nts.universe(), binders, avoid, |f| act.visit_names(f))?;
    let act_f = act.permute(&pf);
    let (pr, _) = binder_renaming(nts.universe(), nts.bn(&r.act), avoid, |f| r.act.visit_names(f))?;
    if act_f != r.act.permute(&pr) {
        return Ok(None);
    }
    Ok(Some((nts.permute_state(&pr, r.target), fl_permute(nts, reg, body, &pf)?)))
}

fn fl_support(nts: &Nts, reg: &EffectRegistry, f: &FlFormula) -> NameSet {
    match f {
        FlFormula::Conj(items) => items
            .iter()
            .fold(NameSet::empty(), |acc, i| acc.union(fl_support(nts, reg, i))),
        FlFormula::Neg(inner) => fl_support(nts, reg, inner),
        FlFormula::EffPred { eff, pred } => {
            reg.effect(*eff).support(nts).union(nts.pred_support(*pred))
        }
        FlFormula::EffMay { eff, act, body } => reg
            .effect(*eff)
            .support(nts)
            .union(act.occurring().union(fl_support(nts, reg, body)).difference(nts.bn(act))),
    }
}

fn fl_permute(
    nts: &Nts,
    reg: &EffectRegistry,
    f: &FlFormula,
    p: &crate::nominal::Perm,
) -> Result<FlFormula> {
    Ok(match f {
        FlFormula::Conj(items) => FlFormula::Conj(
            items
                .iter()
                .map(|i| fl_permute(nts, reg, i, p))
                .collect::<Result<_>>()?,
        ),
        FlFormula::Neg(inner) => fl_permute(nts, reg, inner, p)?.neg(),
        FlFormula::EffPred { eff, pred } => FlFormula::EffPred {
            eff: reg
                .permute_effect(nts, p, *eff)
                .ok_or_else(|| Error::Invalid("effect registry not equivariant".into()))?,
            pred: nts.permute_pred(p, *pred),
        },
        FlFormula::EffMay { eff, act, body } => FlFormula::EffMay {
            eff: reg
                .permute_effect(nts, p, *eff)
                .ok_or_else(|| Error::Invalid("effect registry not equivariant".into()))?,
            act: act.permute(p),
            body: Box::new(fl_permute(nts, reg, body, p)?),
        },
    })
}
