//! System transforms: state predicates as self-loop actions, effects as
//! explicit transitions, the companion formula transforms, and disjunction
//! elimination for extended weak formulas.

use std::collections::{BTreeMap, BTreeSet};

use crate::effects::{EffectId, EffectRegistry, LFunction, TableId};
use crate::error::{Error, Result};
use crate::formula::weak::{ExtWeakFormula, FlFormula, Preformula, WeakFormula};
use crate::formula::Formula;
use crate::nominal::{Name, NameSet, Perm};
use crate::nts::{ActCtorId, ActDecl, ActLabel, Nts, NtsBuilder, PredId, StateId};

/// The predicate-to-selfloop transform: actions are the original ones plus
/// one per predicate, predicates are gone, and each satisfying state gets a
/// self-loop labelled with its predicate.
pub struct STransformed {
    pub nts: Nts,
    pred_act: BTreeMap<PredId, ActLabel>,
}

/// Assign an action label to every member of an orbit of interned items,
/// compatibly with the transposition tables: the seed gets its support in
/// ascending order as arguments, its images the permuted vector.
fn orbit_action_args<T: Copy + Ord>(
    nts: &Nts,
    items: impl Iterator<Item = T>,
    supp: impl Fn(T) -> NameSet,
    transpose: impl Fn(&Perm, T) -> T,
) -> Vec<(T, Vec<Name>)> {
    let mut assigned: BTreeMap<T, Vec<Name>> = BTreeMap::new();
    let transpositions = nts.universe().transpositions();
    for seed in items {
        if assigned.contains_key(&seed) {
            continue;
        }
        let args: Vec<Name> = supp(seed).iter().collect();
        assigned.insert(seed, args.clone());
        let mut work = vec![seed];
        while let Some(cur) = work.pop() {
            let cur_args = assigned[&cur].clone();
            for t in &transpositions {
                let img = transpose(t, cur);
                if !assigned.contains_key(&img) {
                    let img_args = cur_args.iter().map(|n| t.apply(*n)).collect();
                    assigned.insert(img, img_args);
                    work.push(img);
                }
            }
        }
    }
    assigned.into_iter().collect()
}

/// Register one action constructor per orbit; returns the label for each
/// item. Constructors are namespaced with the given prefix, with a numeric
/// suffix on clashes.
fn register_orbit_actions<T: Copy + Ord>(
    nts: &Nts,
    b: &mut NtsBuilder,
    items: &[T],
    prefix: &str,
    display: impl Fn(T) -> String,
    supp: impl Fn(T) -> NameSet,
    transpose: impl Fn(&Perm, T) -> T,
) -> Result<BTreeMap<T, ActLabel>> {
    let assignments = orbit_action_args(nts, items.iter().copied(), &supp, &transpose);
    let arg_map: BTreeMap<T, Vec<Name>> = assignments.into_iter().collect();
    let mut labels = BTreeMap::new();
    let mut orbit_ctor: BTreeMap<T, ActCtorId> = BTreeMap::new();
    for item in items {
        if labels.contains_key(item) {
            continue;
        }
        // Collect the orbit and register its constructor once, named after
        // the least member.
        let mut orbit = BTreeSet::from([*item]);
        let mut work = vec![*item];
        while let Some(cur) = work.pop() {
            for t in nts.universe().transpositions() {
                let img = transpose(&t, cur);
                if orbit.insert(img) {
                    work.push(img);
                }
            }
        }
        let least = *orbit.iter().next().expect("non-empty orbit");
        let ctor = match orbit_ctor.get(&least) {
            Some(c) => *c,
            None => {
                let base = format!("{prefix}:{}", display(least));
                let mut name = base.clone();
                let mut suffix = 1;
                while b.lookup_act(&name).is_some() {
                    suffix += 1;
                    if suffix > 8 {
                        return Err(Error::LabelCollision(base));
                    }
                    name = format!("{base}:{suffix}");
                }
                let args = &arg_map[&least];
                let decl = ActDecl {
                    name,
                    arg_sorts: args.iter().map(|n| nts.universe().sort_of(*n)).collect(),
                    binding: vec![false; args.len()],
                };
                let c = b.add_act(decl)?;
                for member in &orbit {
                    orbit_ctor.insert(*member, c);
                }
                c
            }
        };
        for member in orbit {
            labels.insert(member, ActLabel::new(ctor, arg_map[&member].clone()));
        }
    }
    Ok(labels)
}

/// Build the transformed system. Predicate actions are namespaced with a
/// `pred:` prefix; on a clash a numeric suffix is tried before giving up.
pub fn s_transform(nts: &Nts) -> Result<STransformed> {
    let mut b = NtsBuilder::new(nts.universe().clone());
    for s in nts.states() {
        b.add_state(nts.state_name(s).to_string(), nts.state_support(s))?;
    }
    for c in nts.act_ctors() {
        b.add_act(nts.act_decl(c).clone())?;
    }
    let preds: Vec<PredId> = nts.preds().collect();
    let pred_act = register_orbit_actions(
        nts,
        &mut b,
        &preds,
        "pred",
        |p| nts.pred_name(p).to_string(),
        |p| nts.pred_support(p),
        |t, p| nts.permute_pred(t, p),
    )?;
    for (s, r) in nts.transitions() {
        b.add_trans(s, r.act.clone(), r.target);
    }
    for (s, phi) in nts.sat_pairs() {
        b.add_trans(s, pred_act[&phi].clone(), s);
    }
    for (a, nb) in transposition_pairs(nts) {
        for s in nts.states() {
            let img = nts.transpose_state(a, nb, s);
            if img != s {
                b.set_state_perm(a, nb, s, img)?;
            }
        }
    }
    Ok(STransformed { nts: b.build()?, pred_act })
}

fn transposition_pairs(nts: &Nts) -> Vec<(Name, Name)> {
    let u = nts.universe();
    let mut out = Vec::new();
    for a in u.names() {
        for b in u.names() {
            if a < b && u.sort_of(a) == u.sort_of(b) {
                out.push((a, b));
            }
        }
    }
    out
}

impl STransformed {
    pub fn pred_action(&self, p: PredId) -> &ActLabel {
        &self.pred_act[&p]
    }

    /// Is this action one of the predicate self-loop labels?
    pub fn is_pred_action(&self, act: &ActLabel) -> Option<PredId> {
        self.pred_act
            .iter()
            .find(|(_, a)| **a == *act)
            .map(|(p, _)| *p)
    }

    /// The formula transform: homomorphic except that a predicate becomes a
    /// may-modality on its self-loop action.
    pub fn formula(&self, f: &Formula) -> Formula {
        match f {
            Formula::Conj(items) => Formula::Conj(items.iter().map(|i| self.formula(i)).collect()),
            Formula::Orbit { fix, template } => {
                Formula::Orbit { fix: *fix, template: Box::new(self.formula(template)) }
            }
            Formula::Neg(inner) => self.formula(inner).neg(),
            Formula::Pred(p) => Formula::may(self.pred_act[p].clone(), Formula::top()),
            Formula::May { act, body } => {
                Formula::May { act: act.clone(), body: Box::new(self.formula(body)) }
            }
            Formula::Var(x) => Formula::Var(*x),
            Formula::Mu { var, body } => {
                Formula::Mu { var: *var, body: Box::new(self.formula(body)) }
            }
        }
    }

    /// The partial transform on weak formulas over the source system:
    /// defined only when every guarded predicate sits over a weak-tau body,
    /// `⟨⟨τ⟩⟩((⟨⟨τ⟩⟩A) ∧ φ) ↦ ⟨⟨φ⟩⟩S′(A)`.
    pub fn weak_formula_partial(&self, f: &WeakFormula) -> Option<WeakFormula> {
        match f {
            WeakFormula::Conj(items) => Some(WeakFormula::Conj(
                items
                    .iter()
                    .map(|i| self.weak_formula_partial(i))
                    .collect::<Option<_>>()?,
            )),
            WeakFormula::Neg(inner) => Some(self.weak_formula_partial(inner)?.neg()),
            WeakFormula::WMay { act, body } => {
                Some(WeakFormula::wmay(act.clone(), self.weak_formula_partial(body)?))
            }
            WeakFormula::TauPred { body, pred } => match &**body {
                WeakFormula::WMay { act, body: inner } if self.nts.is_tau(act) => Some(
                    WeakFormula::wmay(self.pred_act[pred].clone(), self.weak_formula_partial(inner)?),
                ),
                _ => None,
            },
        }
    }

    /// The inverse transform, total on weak formulas over the transformed
    /// system: `⟨⟨φ⟩⟩A ↦ ⟨⟨τ⟩⟩((⟨⟨τ⟩⟩ S′⁻¹(A)) ∧ φ)`, homomorphic elsewhere.
    pub fn weak_formula_inverse(&self, f: &WeakFormula) -> Result<WeakFormula> {
        let tau = self
            .nts
            .tau()
            .ok_or_else(|| Error::Invalid("transformed system lacks a tau action".into()))?;
        Ok(match f {
            WeakFormula::Conj(items) => WeakFormula::Conj(
                items
                    .iter()
                    .map(|i| self.weak_formula_inverse(i))
                    .collect::<Result<_>>()?,
            ),
            WeakFormula::Neg(inner) => self.weak_formula_inverse(inner)?.neg(),
            WeakFormula::WMay { act, body } => {
                let inner = self.weak_formula_inverse(body)?;
                match self.is_pred_action(act) {
                    Some(pred) => {
                        WeakFormula::tau_pred(WeakFormula::wmay(tau.clone(), inner), pred)
                    }
                    None => WeakFormula::wmay(act.clone(), inner),
                }
            }
            WeakFormula::TauPred { .. } => {
                return Err(Error::Invalid(
                    "weak formulas over the transformed system have no predicates".into(),
                ))
            }
        })
    }
}

/// The effect-to-transition transform: two state layers, one offering the
/// effects of its table, one offering the source state's actions.
pub struct LTransformed {
    pub nts: Nts,
    ef_states: BTreeMap<(TableId, StateId), StateId>,
    eff_act: BTreeMap<EffectId, ActLabel>,
}

pub fn l_transform(
    source: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    tables: &[TableId],
) -> Result<LTransformed> {
    let mut b = NtsBuilder::new(source.universe().clone());

    // The table list must be transposition-closed (registry equivariance).
    let table_set: BTreeSet<TableId> = tables.iter().copied().collect();
    for t in source.universe().transpositions() {
        for table in &table_set {
            let img = reg.permute_table(source, &t, *table).ok_or_else(|| {
                Error::Invalid("effect registry is not closed under transpositions".into())
            })?;
            if !table_set.contains(&img) {
                return Err(Error::RegistryNotClosed(
                    "reachable tables not closed under transpositions".into(),
                ));
            }
        }
    }

    let mut ef_states = BTreeMap::new();
    let mut ac_states = BTreeMap::new();
    for table in &table_set {
        let tsupp = reg.table_support(source, *table);
        for p in source.states() {
            let name = format!("ef({},{})", reg.table(*table).name, source.state_name(p));
            let id = b.add_state(name, tsupp.union(source.state_support(p)))?;
            ef_states.insert((*table, p), id);
        }
    }
    for table in &table_set {
        let tsupp = reg.table_support(source, *table);
        for f in &reg.table(*table).members {
            let fsupp = reg.effect(*f).support(source);
            for p in source.states() {
                let name = format!(
                    "ac({},{},{})",
                    reg.effect(*f).name,
                    reg.table(*table).name,
                    source.state_name(p)
                );
                let id = b.add_state(name, tsupp.union(fsupp).union(source.state_support(p)))?;
                ac_states.insert((*f, *table, p), id);
            }
        }
    }

    for c in source.act_ctors() {
        b.add_act(source.act_decl(c).clone())?;
    }

    let used_effects: Vec<EffectId> = table_set
        .iter()
        .flat_map(|t| reg.table(*t).members.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let eff_act = register_orbit_actions(
        source,
        &mut b,
        &used_effects,
        "eff",
        |f| reg.effect(f).name.clone(),
        |f| reg.effect(f).support(source),
        |t, f| reg.permute_effect(source, t, f).unwrap_or(f),
    )?;

    for p in source.preds() {
        b.add_pred(source.pred_name(p).to_string(), source.pred_support(p))?;
    }

    // ac(f,F,P) |- phi iff P |- phi; ef states satisfy nothing.
    for ((_, _, p), id) in &ac_states {
        for (s, phi) in source.sat_pairs() {
            if s == *p {
                b.add_sat(*id, phi);
            }
        }
    }

    // ef(F,P) --f--> ac(f,F,f(P)) for f in F.
    for ((table, p), ef_id) in &ef_states {
        for f in &reg.table(*table).members {
            let fp = reg.effect(*f).apply(*p);
            let ac_id = ac_states[&(*f, *table, fp)];
            b.add_trans(*ef_id, eff_act[f].clone(), ac_id);
        }
    }

    // ac(f,F,P) --alpha--> ef(L(alpha,F,f),P') with binders fresh for f, F.
    for ((f, table, p), ac_id) in &ac_states {
        let avoid = reg
            .table_support(source, *table)
            .union(reg.effect(*f).support(source));
        for (act, p2) in source.transitions_from(*p, avoid)? {
            let next = reg.l_apply(source, l, &act, *table, *f)?;
            let ef_id = *ef_states.get(&(next, p2)).ok_or_else(|| {
                Error::RegistryNotClosed(format!(
                    "table `{}` reached by L is outside the transform",
                    reg.table(next).name
                ))
            })?;
            b.add_trans(*ac_id, act, ef_id);
        }
    }

    // Orbit rows: transpositions act componentwise through the registry.
    for (a, nb) in transposition_pairs(source) {
        let t = Perm::swap(source.universe(), a, nb)?;
        for ((table, p), id) in &ef_states {
            let ti = reg
                .permute_table(source, &t, *table)
                .ok_or_else(|| Error::Invalid("registry not equivariant".into()))?;
            let img = ef_states[&(ti, source.permute_state(&t, *p))];
            if img != *id {
                b.set_state_perm(a, nb, *id, img)?;
            }
        }
        for ((f, table, p), id) in &ac_states {
            let fi = reg
                .permute_effect(source, &t, *f)
                .ok_or_else(|| Error::Invalid("registry not equivariant".into()))?;
            let ti = reg
                .permute_table(source, &t, *table)
                .ok_or_else(|| Error::Invalid("registry not equivariant".into()))?;
            let img = ac_states[&(fi, ti, source.permute_state(&t, *p))];
            if img != *id {
                b.set_state_perm(a, nb, *id, img)?;
            }
        }
        for p in source.preds() {
            let img = source.transpose_pred(a, nb, p);
            if img != p {
                b.set_pred_perm(a, nb, p, img)?;
            }
        }
    }

    Ok(LTransformed { nts: b.build()?, ef_states, eff_act })
}

impl LTransformed {
    pub fn ef_state(&self, table: TableId, p: StateId) -> StateId {
        self.ef_states[&(table, p)]
    }

    pub fn effect_action(&self, f: EffectId) -> &ActLabel {
        &self.eff_act[&f]
    }

    /// The formula transform: effects become actions, homomorphic elsewhere.
    pub fn formula(&self, f: &FlFormula) -> Formula {
        match f {
            FlFormula::Conj(items) => Formula::Conj(items.iter().map(|i| self.formula(i)).collect()),
            FlFormula::Neg(inner) => self.formula(inner).neg(),
            FlFormula::EffPred { eff, pred } => {
                Formula::may(self.eff_act[eff].clone(), Formula::Pred(*pred))
            }
            FlFormula::EffMay { eff, act, body } => Formula::may(
                self.eff_act[eff].clone(),
                Formula::may(act.clone(), self.formula(body)),
            ),
        }
    }
}

/// Disjunction elimination: rewrite an extended weak formula into an
/// equivalent plain weak formula by normalising preformulas and distributing
/// the weak tau over disjunctions.
pub fn delta(e: &ExtWeakFormula) -> WeakFormula {
    match e {
        ExtWeakFormula::Conj(items) => WeakFormula::Conj(items.iter().map(delta).collect()),
        ExtWeakFormula::Neg(inner) => delta(inner).neg(),
        ExtWeakFormula::WMay { act, body } => WeakFormula::wmay(act.clone(), delta(body)),
        ExtWeakFormula::WTau(pre) => small_delta(&delta_pre(pre)),
    }
}

/// Normal preformulas: a guarded conjunction with its predicate, or a
/// disjunction of normal preformulas.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum NormalPre {
    AndPred(WeakFormula, PredId),
    Disj(BTreeSet<NormalPre>),
}

fn delta_pre(b: &Preformula) -> NormalPre {
    match b {
        Preformula::And(e, rest) => eps(&delta(e), &delta_pre(rest)),
        Preformula::Pred(phi) => NormalPre::AndPred(WeakFormula::top(), *phi),
        Preformula::Disj(items) => NormalPre::Disj(items.iter().map(delta_pre).collect()),
    }
}

/// `δ`: turn a normal preformula into a weak formula.
fn small_delta(c: &NormalPre) -> WeakFormula {
    match c {
        NormalPre::AndPred(a, phi) => WeakFormula::tau_pred(a.clone(), *phi),
        NormalPre::Disj(items) => WeakFormula::disj(items.iter().map(small_delta)),
    }
}

/// `ε`: conjoin a weak formula onto a normal preformula.
fn eps(a: &WeakFormula, c: &NormalPre) -> NormalPre {
    match c {
        NormalPre::AndPred(a2, phi) => {
            NormalPre::AndPred(WeakFormula::conj2(a.clone(), a2.clone()), *phi)
        }
        NormalPre::Disj(items) => NormalPre::Disj(items.iter().map(|i| eps(a, i)).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{check, check_ext_weak, check_weak, WeakClosure};
    use crate::nominal::Universe;

    fn ex1() -> Nts {
        let u = Universe::single_sorted(["a", "b", "c"]).unwrap();
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
    fn s_transform_makes_selfloops_and_drops_preds() {
        let nts = ex1();
        let st = s_transform(&nts).unwrap();
        assert_eq!(st.nts.preds().count(), 0);
        assert!(st.nts.validate().ok(), "{:?}", st.nts.validate().violations);
        let q = st.nts.lookup_state("Q").unwrap();
        let phi = nts.lookup_pred("phi").unwrap();
        let loops: Vec<_> = st
            .nts
            .residuals_of(q)
            .iter()
            .filter(|r| r.act == *st.pred_action(phi) && r.target == q)
            .collect();
        assert_eq!(loops.len(), 1);
    }

    #[test]
    fn s_formula_preserves_satisfaction() {
        let nts = ex1();
        let st = s_transform(&nts).unwrap();
        let phi = nts.lookup_pred("phi").unwrap();
        let f = Formula::Pred(phi);
        for s in nts.states() {
            let s2 = st.nts.lookup_state(nts.state_name(s)).unwrap();
            assert_eq!(
                check(&nts, s, &f).unwrap(),
                check(&st.nts, s2, &st.formula(&f)).unwrap()
            );
        }
    }

    #[test]
    fn s_prime_inverse_round_trips_satisfaction() {
        let nts = ex1();
        let st = s_transform(&nts).unwrap();
        let phi = nts.lookup_pred("phi").unwrap();
        let probe = WeakFormula::wmay(st.pred_action(phi).clone(), WeakFormula::top());
        let back = st.weak_formula_inverse(&probe).unwrap();
        let wc_t = WeakClosure::new(&nts);
        let wc_s = WeakClosure::new(&st.nts);
        for s in nts.states() {
            let s2 = st.nts.lookup_state(nts.state_name(s)).unwrap();
            assert_eq!(
                check_weak(&st.nts, &wc_s, s2, &probe).unwrap(),
                check_weak(&nts, &wc_t, s, &back).unwrap()
            );
        }
    }

    #[test]
    fn delta_eliminates_disjunction() {
        let nts = ex1();
        let wc = WeakClosure::new(&nts);
        let phi = nts.lookup_pred("phi").unwrap();
        // <<tau>>(phi or phi') semantically equals the disjunction of the
        // guarded forms.
        let e = ExtWeakFormula::wtau(Preformula::Disj(
            [Preformula::Pred(phi)].into(),
        ));
        let w = delta(&e);
        for s in nts.states() {
            assert_eq!(
                check_ext_weak(&nts, &wc, s, &e).unwrap(),
                check_weak(&nts, &wc, s, &w).unwrap()
            );
        }
        // Disjunction-free formulas keep their shape.
        let plain = ExtWeakFormula::wtau(Preformula::And(
            ExtWeakFormula::top(),
            Box::new(Preformula::Pred(phi)),
        ));
        let mapped = delta(&plain);
        assert_eq!(
            mapped,
            WeakFormula::tau_pred(WeakFormula::conj2(WeakFormula::top(), WeakFormula::top()), phi)
        );
    }
}
