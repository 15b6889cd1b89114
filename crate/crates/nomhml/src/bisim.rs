//! Bisimilarity engines and formula synthesis.
//!
//! Strong bisimilarity is computed by partition refinement over
//! alpha-canonical transition signatures; the brute-force greatest-fixpoint
//! engines (pair removal) serve as independent oracles and as the only route
//! for the weak and effect-indexed variants, whose clauses recur through the
//! relation itself. Distinguishing formulas are read off the refinement or
//! removal round at which a pair separates.

use std::collections::{BTreeMap, BTreeSet};

use crate::check::WeakClosure;
use crate::effects::{EffectRegistry, LFunction, TableId};
use crate::error::{Error, Result};
use crate::formula::weak::{FlFormula, WeakFormula};
use crate::formula::Formula;
use crate::nominal::{NameSet, Nominal, Perm};
use crate::nts::{ActLabel, Nts, Residual, StateId};

/// A symmetric binary relation on states, diagonal included.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Relation {
    pairs: BTreeSet<(StateId, StateId)>,
}

impl Relation {
    pub fn full(nts: &Nts) -> Relation {
        let mut pairs = BTreeSet::new();
        for p in nts.states() {
            for q in nts.states() {
                pairs.insert((p, q));
            }
        }
        Relation { pairs }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (StateId, StateId)>) -> Relation {
        let mut set = BTreeSet::new();
        for (p, q) in pairs {
            set.insert((p, q));
            set.insert((q, p));
        }
        Relation { pairs: set }
    }

    pub fn contains(&self, p: StateId, q: StateId) -> bool {
        self.pairs.contains(&(p, q))
    }

    pub fn remove(&mut self, p: StateId, q: StateId) {
        self.pairs.remove(&(p, q));
        self.pairs.remove(&(q, p));
    }

    pub fn pairs(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Check the equivalence laws and closure under universe transpositions.
    pub fn is_equivariant_equivalence(&self, nts: &Nts) -> bool {
        let reflexive = nts.states().all(|p| self.contains(p, p));
        let symmetric = self.pairs().all(|(p, q)| self.contains(q, p));
        let transitive = self.pairs().all(|(p, q)| {
            nts.states()
                .filter(|r| self.contains(q, *r))
                .all(|r| self.contains(p, r))
        });
        let equivariant = nts.universe().transpositions().iter().all(|t| {
            self.pairs()
                .all(|(p, q)| self.contains(nts.permute_state(t, p), nts.permute_state(t, q)))
        });
        reflexive && symmetric && transitive && equivariant
    }
}

/// A family of relations indexed by effect tables.
#[derive(Clone, Debug)]
pub struct IndexedRelation {
    pub per_table: BTreeMap<TableId, Relation>,
}

impl IndexedRelation {
    pub fn at(&self, t: TableId) -> &Relation {
        &self.per_table[&t]
    }
}

/// Does the residual have an alpha-variant whose action is exactly `act`?
/// The renaming is forced positionally; returns the variant's target.
pub(crate) fn residual_answer(nts: &Nts, r: &Residual, act: &ActLabel) -> Option<StateId> {
    if r.act.ctor != act.ctor || r.act.args.len() != act.args.len() {
        return None;
    }
    let binders = nts.bn(&r.act);
    if binders.is_empty() {
        return (r.act == *act).then_some(r.target);
    }
    let free = nts.residual_support(r);
    let u = nts.universe();
    let mut moving: Vec<crate::nominal::Name> = Vec::new();
    let mut images: Vec<crate::nominal::Name> = Vec::new();
    for (x, y) in r.act.args.iter().zip(&act.args) {
        if binders.contains(*x) {
            match moving.iter().position(|m| m == x) {
                Some(i) => {
                    if images[i] != *y {
                        return None;
                    }
                }
                None => {
                    if u.sort_of(*x) != u.sort_of(*y) {
                        return None;
                    }
                    moving.push(*x);
                    images.push(*y);
                }
            }
        } else if x != y {
            return None;
        }
    }
    for (i, y) in images.iter().enumerate() {
        if free.contains(*y) || images[..i].contains(y) {
            return None;
        }
    }
    let mut p = Perm::identity(u.size());
    for (x, y) in moving.iter().zip(&images) {
        let cur = p.apply(*x);
        if cur != *y {
            p = Perm::swap(u, cur, *y).expect("sort checked").compose(&p);
        }
    }
    if r.act.permute(&p) != *act {
        return None;
    }
    Some(nts.permute_state(&p, r.target))
}

/// All strong answers of `q` to the action `act`.
fn answers(nts: &Nts, q: StateId, act: &ActLabel) -> Vec<StateId> {
    let mut out: Vec<StateId> = nts
        .residuals_of(q)
        .iter()
        .filter_map(|r| residual_answer(nts, r, act))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// All weak answers of `q` to `act`: `q ⇒act̂ q'`.
fn weak_answers(nts: &Nts, wc: &WeakClosure, q: StateId, act: &ActLabel) -> Vec<StateId> {
    let mut out: Vec<StateId> = if nts.is_tau(act) {
        wc.tau_closure(q).iter().copied().collect()
    } else {
        let mut acc = Vec::new();
        for mid in wc.tau_closure(q) {
            for r in nts.residuals_of(*mid) {
                if let Some(t) = residual_answer(nts, r, act) {
                    acc.extend(wc.tau_closure(t).iter().copied());
                }
            }
        }
        acc
    };
    out.sort();
    out.dedup();
    out
}

fn pred_profile(nts: &Nts, p: StateId) -> BTreeSet<crate::nts::PredId> {
    nts.preds().filter(|phi| nts.holds(p, *phi).unwrap_or(false)).collect()
}

/// Partition refinement history: entry 0 groups states by predicate profile,
/// each following entry splits on `(canonical action, target block)`
/// signatures, ending with the stable partition.
pub fn refinement_history(nts: &Nts) -> Result<Vec<Vec<usize>>> {
    let n = nts.state_count();
    let mut profiles: BTreeMap<BTreeSet<crate::nts::PredId>, usize> = BTreeMap::new();
    let mut current: Vec<usize> = Vec::with_capacity(n);
    for p in nts.states() {
        let profile = pred_profile(nts, p);
        let next = profiles.len();
        let id = *profiles.entry(profile).or_insert(next);
        current.push(id);
    }
    let mut history = vec![current.clone()];
    loop {
        let mut sig_blocks: BTreeMap<(usize, BTreeSet<(ActLabel, usize)>), usize> = BTreeMap::new();
        let mut next: Vec<usize> = Vec::with_capacity(n);
        for p in nts.states() {
            let mut sig = BTreeSet::new();
            for r in nts.residuals_of(p) {
                let key = nts.residual_key(r)?;
                sig.insert((key.act, current[key.target.0 as usize]));
            }
            let group = (current[p.0 as usize], sig);
            let fresh = sig_blocks.len();
            let id = *sig_blocks.entry(group).or_insert(fresh);
            next.push(id);
        }
        let stable = block_count(&next) == block_count(&current);
        current = next;
        history.push(current.clone());
        if stable {
            break;
        }
    }
    Ok(history)
}

fn block_count(blocks: &[usize]) -> usize {
    blocks.iter().collect::<BTreeSet<_>>().len()
}

/// Greatest strong bisimulation, by partition refinement.
pub fn strong_bisim(nts: &Nts) -> Result<Relation> {
    let history = refinement_history(nts)?;
    let blocks = history.last().expect("non-empty history");
    let mut pairs = BTreeSet::new();
    for p in nts.states() {
        for q in nts.states() {
            if blocks[p.0 as usize] == blocks[q.0 as usize] {
                pairs.insert((p, q));
            }
        }
    }
    Ok(Relation { pairs })
}

/// Brute-force greatest-fixpoint oracle: start from the full predicate-profile
/// relation and remove failing pairs until stable.
pub fn strong_bisim_oracle(nts: &Nts) -> Result<Relation> {
    let mut rel = Relation::from_pairs(
        nts.states()
            .flat_map(|p| nts.states().map(move |q| (p, q)))
            .filter(|(p, q)| pred_profile(nts, *p) == pred_profile(nts, *q)),
    );
    loop {
        let mut removals = Vec::new();
        for (p, q) in rel.pairs() {
            if p > q {
                continue;
            }
            if !simulates(nts, p, q, &rel)? || !simulates(nts, q, p, &rel)? {
                removals.push((p, q));
            }
        }
        if removals.is_empty() {
            break;
        }
        for (p, q) in removals {
            rel.remove(p, q);
        }
    }
    Ok(rel)
}

/// Every challenger of `p` (binders fresh for both states) is answered by `q`
/// with the same action into the relation.
fn simulates(nts: &Nts, p: StateId, q: StateId, rel: &Relation) -> Result<bool> {
    for (act, p2) in nts.transitions_from(p, nts.state_support(q))? {
        let ok = answers(nts, q, &act).into_iter().any(|q2| rel.contains(p2, q2));
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Re-verify that a relation is a strong bisimulation (not necessarily the
/// greatest one).
pub fn is_strong_bisimulation(nts: &Nts, rel: &Relation) -> Result<bool> {
    for (p, q) in rel.pairs() {
        if pred_profile(nts, p) != pred_profile(nts, q) {
            return Ok(false);
        }
        if !simulates(nts, p, q, rel)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Weak bisimilarity with the round at which each pair was removed.
pub struct WeakBisim {
    pub relation: Relation,
    removed_at: BTreeMap<(StateId, StateId), usize>,
    pub rounds: usize,
}

/// Greatest weak bisimulation: weak simulation plus weak static implication,
/// computed by pair removal (the static clause recurs through the relation,
/// which rules out plain refinement).
pub fn weak_bisim(nts: &Nts, wc: &WeakClosure) -> Result<WeakBisim> {
    let mut rel = Relation::full(nts);
    let mut removed_at = BTreeMap::new();
    let mut round = 0;
    loop {
        round += 1;
        let mut removals = Vec::new();
        for (p, q) in rel.pairs() {
            if p > q {
                continue;
            }
            if !weak_clauses(nts, wc, p, q, &rel)? || !weak_clauses(nts, wc, q, p, &rel)? {
                removals.push((p, q));
            }
        }
        if removals.is_empty() {
            break;
        }
        for (p, q) in removals {
            rel.remove(p, q);
            removed_at.insert((p, q), round);
            removed_at.insert((q, p), round);
        }
    }
    Ok(WeakBisim { relation: rel, removed_at, rounds: round })
}

fn weak_clauses(nts: &Nts, wc: &WeakClosure, p: StateId, q: StateId, rel: &Relation) -> Result<bool> {
    // Weak simulation.
    for (act, p2) in nts.transitions_from(p, nts.state_support(q))? {
        let ok = weak_answers(nts, wc, q, &act).into_iter().any(|q2| rel.contains(p2, q2));
        if !ok {
            return Ok(false);
        }
    }
    // Weak static implication.
    for phi in nts.preds() {
        if nts.holds(p, phi)? {
            let ok = wc
                .tau_closure(q)
                .iter()
                .any(|q2| nts.holds(*q2, phi).unwrap_or(false) && rel.contains(p, *q2));
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Re-verify that a relation is a weak bisimulation.
pub fn is_weak_bisimulation(nts: &Nts, wc: &WeakClosure, rel: &Relation) -> Result<bool> {
    for (p, q) in rel.pairs() {
        if !weak_clauses(nts, wc, p, q, rel)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Effect-indexed bisimilarity with per-table removal rounds.
pub struct FlBisim {
    pub relations: IndexedRelation,
    removed_at: BTreeMap<(TableId, StateId, StateId), usize>,
    pub rounds: usize,
}

/// Greatest L-bisimulation over the reachable tables: for every effect in the
/// index table, effect-relativised static implication and simulation with the
/// successor index prescribed by the L-function.
pub fn fl_bisim(
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    tables: &[TableId],
) -> Result<FlBisim> {
    let mut rels: BTreeMap<TableId, Relation> = tables
        .iter()
        .map(|t| (*t, Relation::full(nts)))
        .collect();
    let mut removed_at = BTreeMap::new();
    let table_supports: BTreeMap<TableId, NameSet> = tables
        .iter()
        .map(|t| (*t, reg.table_support(nts, *t)))
        .collect();
    let mut round = 0;
    loop {
        round += 1;
        let mut removals: Vec<(TableId, StateId, StateId)> = Vec::new();
        for (table, rel) in &rels {
            for (p, q) in rel.pairs() {
                if p > q {
                    continue;
                }
                let fwd = fl_clauses(nts, reg, l, *table, table_supports[table], p, q, &rels)?;
                let bwd = fl_clauses(nts, reg, l, *table, table_supports[table], q, p, &rels)?;
                if !(fwd && bwd) {
                    removals.push((*table, p, q));
                }
            }
        }
        if removals.is_empty() {
            break;
        }
        for (table, p, q) in removals {
            rels.get_mut(&table).expect("known table").remove(p, q);
            removed_at.insert((table, p, q), round);
            removed_at.insert((table, q, p), round);
        }
    }
    Ok(FlBisim { relations: IndexedRelation { per_table: rels }, removed_at, rounds: round })
}

#[allow(clippy::too_many_arguments)]
fn fl_clauses(
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    table: TableId,
    table_supp: NameSet,
    p: StateId,
    q: StateId,
    rels: &BTreeMap<TableId, Relation>,
) -> Result<bool> {
    for f in reg.table(table).members.clone() {
        let fp = reg.effect(f).apply(p);
        let fq = reg.effect(f).apply(q);
        // Static implication under the effect.
        for phi in nts.preds() {
            if nts.holds(fp, phi)? && !nts.holds(fq, phi)? {
                return Ok(false);
            }
        }
        // Simulation with binders fresh for f(Q), the table and the effect.
        let avoid = nts
            .state_support(fq)
            .union(table_supp)
            .union(reg.effect(f).support(nts));
        for (act, p2) in nts.transitions_from(fp, avoid)? {
            let next = reg.l_apply(nts, l, &act, table, f)?;
            let next_rel = rels
                .get(&next)
                .ok_or_else(|| Error::RegistryNotClosed(format!("table {next:?} not reachable")))?;
            let ok = answers(nts, fq, &act).into_iter().any(|q2| next_rel.contains(p2, q2));
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Brute-force check that an indexed family is an L-bisimulation.
pub fn is_fl_bisimulation(
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    family: &IndexedRelation,
) -> Result<bool> {
    for (table, rel) in &family.per_table {
        let supp = reg.table_support(nts, *table);
        for (p, q) in rel.pairs() {
            if !fl_clauses(nts, reg, l, *table, supp, p, q, &family.per_table)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A distinguishing formula for states that are not strongly bisimilar:
/// `None` exactly when they are. The result's support is confined to the
/// first state's support by an orbit-conjunction wrap when needed.
pub fn distinguishing_formula(nts: &Nts, p: StateId, q: StateId) -> Result<Option<Formula>> {
    let history = refinement_history(nts)?;
    let blocks = history.last().expect("non-empty");
    if blocks[p.0 as usize] == blocks[q.0 as usize] {
        return Ok(None);
    }
    let mut memo = BTreeMap::new();
    let formula = synth_strong(nts, &history, p, q, &mut memo)?;
    Ok(Some(bound_support(nts, formula, p)))
}

fn separation_round(history: &[Vec<usize>], p: StateId, q: StateId) -> Option<usize> {
    history
        .iter()
        .position(|blocks| blocks[p.0 as usize] != blocks[q.0 as usize])
}

fn bound_support(nts: &Nts, f: Formula, p: StateId) -> Formula {
    if f.support(nts).is_subset(nts.state_support(p)) {
        f
    } else {
        Formula::orbit(nts.state_support(p), f)
    }
}

fn synth_strong(
    nts: &Nts,
    history: &[Vec<usize>],
    p: StateId,
    q: StateId,
    memo: &mut BTreeMap<(StateId, StateId), Formula>,
) -> Result<Formula> {
    if let Some(f) = memo.get(&(p, q)) {
        return Ok(f.clone());
    }
    let round = separation_round(history, p, q)
        .ok_or_else(|| Error::Invalid("states are bisimilar; nothing distinguishes them".into()))?;
    let formula = if round == 0 {
        // Predicate profiles differ.
        let phi = nts
            .preds()
            .find(|phi| nts.holds(p, *phi).unwrap_or(false) && !nts.holds(q, *phi).unwrap_or(false));
        match phi {
            Some(phi) => Formula::Pred(phi),
            None => {
                let phi = nts
                    .preds()
                    .find(|phi| nts.holds(q, *phi).unwrap_or(false) && !nts.holds(p, *phi).unwrap_or(false))
                    .expect("profiles differ");
                Formula::Pred(phi).neg()
            }
        }
    } else {
        let prev = &history[round - 1];
        match strong_challenger(nts, prev, p, q)? {
            Some((act, p2, qs)) => {
                let mut conjuncts = Vec::new();
                for q2 in qs {
                    conjuncts.push(synth_strong(nts, history, p2, q2, memo)?);
                }
                Formula::may(act, Formula::conj(conjuncts)?)
            }
            None => {
                let (act, q2, ps) = strong_challenger(nts, prev, q, p)?
                    .ok_or_else(|| Error::Invalid("separated pair without a challenger".into()))?;
                let mut conjuncts = Vec::new();
                for p2 in ps {
                    conjuncts.push(synth_strong(nts, history, q2, p2, memo)?);
                }
                Formula::may(act, Formula::conj(conjuncts)?).neg()
            }
        }
    };
    memo.insert((p, q), formula.clone());
    Ok(formula)
}

/// A challenger transition of `p` that `q` cannot answer into the given
/// partition: returns the action, the challenger target, and all of `q`'s
/// answers (each in a different block than the target).
fn strong_challenger(
    nts: &Nts,
    blocks: &[usize],
    p: StateId,
    q: StateId,
) -> Result<Option<(ActLabel, StateId, Vec<StateId>)>> {
    for (act, p2) in nts.transitions_from(p, nts.state_support(q))? {
        let qs = answers(nts, q, &act);
        if qs
            .iter()
            .all(|q2| blocks[p2.0 as usize] != blocks[q2.0 as usize])
        {
            return Ok(Some((act, p2, qs)));
        }
    }
    Ok(None)
}

/// A weak distinguishing formula, read off the removal round of the pair.
pub fn weak_distinguishing_formula(
    nts: &Nts,
    wc: &WeakClosure,
    wb: &WeakBisim,
    p: StateId,
    q: StateId,
) -> Result<Option<WeakFormula>> {
    if wb.relation.contains(p, q) {
        return Ok(None);
    }
    let mut memo = BTreeMap::new();
    let f = synth_weak(nts, wc, wb, p, q, &mut memo)?;
    Ok(Some(bound_support_weak(nts, f, p)))
}

fn bound_support_weak(nts: &Nts, f: WeakFormula, p: StateId) -> WeakFormula {
    let target = nts.state_support(p);
    if f.support(nts).is_subset(target) {
        return f;
    }
    // Conjunction over the orbit of the formula under permutations fixing
    // the state's support (the finite hull).
    let supp = f.support(nts);
    let orbit = crate::nominal::hull_by(nts.universe(), target, &f, supp, |x, perm| {
        x.permute(nts, perm)
    });
    WeakFormula::conj(orbit)
}

fn synth_weak(
    nts: &Nts,
    wc: &WeakClosure,
    wb: &WeakBisim,
    p: StateId,
    q: StateId,
    memo: &mut BTreeMap<(StateId, StateId), WeakFormula>,
) -> Result<WeakFormula> {
    if let Some(f) = memo.get(&(p, q)) {
        return Ok(f.clone());
    }
    let round = *wb
        .removed_at
        .get(&(p, q))
        .ok_or_else(|| Error::Invalid("states are weakly bisimilar".into()))?;
    let surviving = |a: StateId, b: StateId| {
        wb.relation.contains(a, b) || wb.removed_at.get(&(a, b)).is_some_and(|r| *r >= round)
    };
    // Forward static failure: p |- phi with no related phi-state reachable.
    for phi in nts.preds() {
        if nts.holds(p, phi)? {
            let answers: Vec<StateId> = wc
                .tau_closure(q)
                .iter()
                .filter(|q2| nts.holds(**q2, phi).unwrap_or(false))
                .copied()
                .collect();
            if answers.iter().all(|q2| !surviving(p, *q2)) {
                let mut conjuncts = Vec::new();
                for q2 in answers {
                    conjuncts.push(synth_weak(nts, wc, wb, p, q2, memo)?);
                }
                let f = WeakFormula::tau_pred(WeakFormula::conj(conjuncts), phi);
                memo.insert((p, q), f.clone());
                return Ok(f);
            }
        }
    }
    // Forward simulation failure.
    for (act, p2) in nts.transitions_from(p, nts.state_support(q))? {
        let qs = weak_answers(nts, wc, q, &act);
        if qs.iter().all(|q2| !surviving(p2, *q2)) {
            let mut conjuncts = Vec::new();
            for q2 in qs {
                conjuncts.push(synth_weak(nts, wc, wb, p2, q2, memo)?);
            }
            let f = WeakFormula::wmay(act, WeakFormula::conj(conjuncts));
            memo.insert((p, q), f.clone());
            return Ok(f);
        }
    }
    // Mirror image: a formula holding at q but not p, negated.
    for phi in nts.preds() {
        if nts.holds(q, phi)? {
            let answers: Vec<StateId> = wc
                .tau_closure(p)
                .iter()
                .filter(|p2| nts.holds(**p2, phi).unwrap_or(false))
                .copied()
                .collect();
            if answers.iter().all(|p2| !surviving(q, *p2)) {
                let mut conjuncts = Vec::new();
                for p2 in answers {
                    conjuncts.push(synth_weak(nts, wc, wb, q, p2, memo)?);
                }
                let f = WeakFormula::tau_pred(WeakFormula::conj(conjuncts), phi).neg();
                memo.insert((p, q), f.clone());
                return Ok(f);
            }
        }
    }
    for (act, q2) in nts.transitions_from(q, nts.state_support(p))? {
        let ps = weak_answers(nts, wc, p, &act);
        if ps.iter().all(|p2| !surviving(q2, *p2)) {
            let mut conjuncts = Vec::new();
            for p2 in ps {
                conjuncts.push(synth_weak(nts, wc, wb, q2, p2, memo)?);
            }
            let f = WeakFormula::wmay(act, WeakFormula::conj(conjuncts)).neg();
            memo.insert((p, q), f.clone());
            return Ok(f);
        }
    }
    Err(Error::Invalid(format!(
        "no distinguishing witness for removed pair ({}, {})",
        nts.state_name(p),
        nts.state_name(q)
    )))
}

/// An effect-consequence distinguishing formula at the given index table.
pub fn fl_distinguishing_formula(
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    fl: &FlBisim,
    table: TableId,
    p: StateId,
    q: StateId,
) -> Result<Option<FlFormula>> {
    if fl.relations.at(table).contains(p, q) {
        return Ok(None);
    }
    let mut memo = BTreeMap::new();
    Ok(Some(synth_fl(nts, reg, l, fl, table, p, q, &mut memo)?))
}

#[allow(clippy::too_many_arguments)]
fn synth_fl(
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    fl: &FlBisim,
    table: TableId,
    p: StateId,
    q: StateId,
    memo: &mut BTreeMap<(TableId, StateId, StateId), FlFormula>,
) -> Result<FlFormula> {
    if let Some(f) = memo.get(&(table, p, q)) {
        return Ok(f.clone());
    }
    let round = *fl
        .removed_at
        .get(&(table, p, q))
        .ok_or_else(|| Error::Invalid("states are L-bisimilar at this table".into()))?;
    let surviving = |t: TableId, a: StateId, b: StateId| {
        fl.relations.at(t).contains(a, b)
            || fl.removed_at.get(&(t, a, b)).is_some_and(|r| *r >= round)
    };
    let table_supp = reg.table_support(nts, table);
    for (p0, q0, negate) in [(p, q, false), (q, p, true)] {
        for f in reg.table(table).members.clone() {
            let fp = reg.effect(f).apply(p0);
            let fq = reg.effect(f).apply(q0);
            for phi in nts.preds() {
                if nts.holds(fp, phi)? && !nts.holds(fq, phi)? {
                    let formula = FlFormula::EffPred { eff: f, pred: phi };
                    let formula = if negate { formula.neg() } else { formula };
                    memo.insert((table, p, q), formula.clone());
                    return Ok(formula);
                }
            }
            let avoid = nts
                .state_support(fq)
                .union(table_supp)
                .union(reg.effect(f).support(nts));
            for (act, p2) in nts.transitions_from(fp, avoid)? {
                let next = reg.l_apply(nts, l, &act, table, f)?;
                let qs = answers(nts, fq, &act);
                if qs.iter().all(|q2| !surviving(next, p2, *q2)) {
                    let mut conjuncts = Vec::new();
                    for q2 in qs {
                        conjuncts.push(synth_fl(nts, reg, l, fl, next, p2, q2, memo)?);
                    }
                    let formula = FlFormula::EffMay {
                        eff: f,
                        act,
                        body: Box::new(FlFormula::conj(conjuncts)),
                    };
                    let formula = if negate { formula.neg() } else { formula };
                    memo.insert((table, p, q), formula.clone());
                    return Ok(formula);
                }
            }
        }
    }
    Err(Error::Invalid(format!(
        "no distinguishing witness for removed pair ({}, {}) at {table:?}",
        nts.state_name(p),
        nts.state_name(q)
    )))
}

/// Cap on `|universe|!` enumeration in the equivariant-function construction.
const PERM_ENUM_LIMIT: usize = 8;

fn all_perms_checked(nts: &Nts) -> Result<Vec<Perm>> {
    if nts.universe().size() > PERM_ENUM_LIMIT {
        return Err(Error::Invalid(format!(
            "characteristic formulas enumerate universe permutations; universe of {} exceeds {}",
            nts.universe().size(),
            PERM_ENUM_LIMIT
        )));
    }
    Ok(nts.universe().all_permutations())
}

/// The equivariant distinguishing function: the conjunction, over all
/// universe permutations, of the pulled-back distinguishing formulas for the
/// permuted pair.
fn equivariant_distinguisher(
    nts: &Nts,
    history: &[Vec<usize>],
    perms: &[Perm],
    p: StateId,
    q: StateId,
    memo: &mut BTreeMap<(StateId, StateId), Formula>,
) -> Result<Formula> {
    let mut conjuncts = BTreeSet::new();
    for perm in perms {
        let pp = nts.permute_state(perm, p);
        let qq = nts.permute_state(perm, q);
        let b = synth_strong(nts, history, pp, qq, memo)?;
        let b = bound_support(nts, b, pp);
        conjuncts.insert(b.permute(nts, &perm.inverse()));
    }
    Formula::conj(conjuncts)
}

/// A characteristic formula: satisfied by exactly the bisimilarity class of
/// `p`.
pub fn characteristic_formula(nts: &Nts, p: StateId) -> Result<Formula> {
    let history = refinement_history(nts)?;
    let blocks = history.last().expect("non-empty");
    let perms = all_perms_checked(nts)?;
    let mut memo = BTreeMap::new();
    let mut conjuncts = BTreeSet::new();
    for q in nts.states() {
        if blocks[p.0 as usize] != blocks[q.0 as usize] {
            conjuncts.insert(equivariant_distinguisher(nts, &history, &perms, p, q, &mut memo)?);
        }
    }
    Formula::conj(conjuncts)
}

/// Weak characteristic formula.
pub fn weak_characteristic_formula(
    nts: &Nts,
    wc: &WeakClosure,
    wb: &WeakBisim,
    p: StateId,
) -> Result<WeakFormula> {
    let perms = all_perms_checked(nts)?;
    let mut memo = BTreeMap::new();
    let mut conjuncts = BTreeSet::new();
    for q in nts.states() {
        if !wb.relation.contains(p, q) {
            let mut inner = BTreeSet::new();
            for perm in &perms {
                let pp = nts.permute_state(perm, p);
                let qq = nts.permute_state(perm, q);
                let b = synth_weak(nts, wc, wb, pp, qq, &mut memo)?;
                let b = bound_support_weak(nts, b, pp);
                inner.insert(b.permute(nts, &perm.inverse()));
            }
            conjuncts.insert(WeakFormula::Conj(inner));
        }
    }
    Ok(WeakFormula::Conj(conjuncts))
}

/// A formula denoting exactly the given bisimulation-closed state set: the
/// disjunction of the characteristic formulas of its members.
pub fn property_formula(nts: &Nts, states: &BTreeSet<StateId>) -> Result<Formula> {
    let rel = strong_bisim(nts)?;
    check_closed(nts, states, &rel)?;
    let mut disjuncts = Vec::new();
    for p in states {
        disjuncts.push(characteristic_formula(nts, *p)?);
    }
    Formula::disj(disjuncts)
}

/// Weak counterpart of [`property_formula`].
pub fn weak_property_formula(
    nts: &Nts,
    wc: &WeakClosure,
    wb: &WeakBisim,
    states: &BTreeSet<StateId>,
) -> Result<WeakFormula> {
    check_closed(nts, states, &wb.relation)?;
    let mut disjuncts = Vec::new();
    for p in states {
        disjuncts.push(weak_characteristic_formula(nts, wc, wb, *p)?);
    }
    Ok(WeakFormula::disj(disjuncts))
}

fn check_closed(nts: &Nts, states: &BTreeSet<StateId>, rel: &Relation) -> Result<()> {
    for p in states {
        for q in nts.states() {
            if rel.contains(*p, q) && !states.contains(&q) {
                return Err(Error::NotBisimClosed {
                    p: nts.state_name(*p).to_string(),
                    q: nts.state_name(q).to_string(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{check, check_weak};
    use crate::nominal::Universe;
    use crate::nts::{ActDecl, NtsBuilder};

    /// P -tau-> Q, Q |- phi.
    fn ex1() -> Nts {
        let u = Universe::single_sorted(["a", "b", "c"]).unwrap();
        let mut b = NtsBuilder::new(u);
        let p = b.add_state("P".into(), NameSet::empty()).unwrap();
        let q = b.add_state("Q".into(), NameSet::empty()).unwrap();
        let phi = b.add_pred("phi".into(), NameSet::empty()).unwrap();
        let tau = b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] }).unwrap();
        b.add_sat(q, phi);
        b.add_trans(p, ActLabel::new(tau, vec![]), q);
        b.build().unwrap()
    }

    #[test]
    fn identity_pairs_always_strongly_bisimilar() {
        let nts = ex1();
        let rel = strong_bisim(&nts).unwrap();
        for s in nts.states() {
            assert!(rel.contains(s, s));
        }
        assert!(rel.is_equivariant_equivalence(&nts));
        assert_eq!(rel, strong_bisim_oracle(&nts).unwrap());
        assert!(is_strong_bisimulation(&nts, &rel).unwrap());
    }

    #[test]
    fn ex1_weakly_bisimilar_with_witness() {
        let nts = ex1();
        let wc = WeakClosure::new(&nts);
        let wb = weak_bisim(&nts, &wc).unwrap();
        let p = nts.lookup_state("P").unwrap();
        let q = nts.lookup_state("Q").unwrap();
        assert!(wb.relation.contains(p, q));
        // The three-pair witness (plus identity) is itself a weak bisimulation.
        let witness = Relation::from_pairs([(p, q), (q, q), (p, p)]);
        assert!(is_weak_bisimulation(&nts, &wc, &witness).unwrap());
        // Strongly they differ, and a distinguishing formula certifies it.
        let d = distinguishing_formula(&nts, q, p).unwrap().unwrap();
        assert!(check(&nts, q, &d).unwrap());
        assert!(!check(&nts, p, &d).unwrap());
    }

    /// a.0 + a.0 vs a.0: strongly bisimilar.
    #[test]
    fn duplicate_summand_is_bisimilar() {
        let u = Universe::single_sorted(["a", "b", "c"]).unwrap();
        let mut b = NtsBuilder::new(u);
        let p = b.add_state("P".into(), NameSet::empty()).unwrap();
        let q = b.add_state("Q".into(), NameSet::empty()).unwrap();
        let z1 = b.add_state("Z1".into(), NameSet::empty()).unwrap();
        let z2 = b.add_state("Z2".into(), NameSet::empty()).unwrap();
        let a = b.add_act(ActDecl { name: "step".into(), arg_sorts: vec![], binding: vec![] }).unwrap();
        b.add_trans(p, ActLabel::new(a, vec![]), z1);
        b.add_trans(p, ActLabel::new(a, vec![]), z2);
        b.add_trans(q, ActLabel::new(a, vec![]), z1);
        let nts = b.build().unwrap();
        let rel = strong_bisim(&nts).unwrap();
        assert!(rel.contains(p, q));
        assert_eq!(rel, strong_bisim_oracle(&nts).unwrap());
        assert!(distinguishing_formula(&nts, p, q).unwrap().is_none());
    }

    #[test]
    fn characteristic_formula_denotes_the_class() {
        let nts = ex1();
        let rel = strong_bisim(&nts).unwrap();
        for p in nts.states() {
            let chi = characteristic_formula(&nts, p).unwrap();
            for q in nts.states() {
                assert_eq!(check(&nts, q, &chi).unwrap(), rel.contains(p, q));
            }
        }
    }

    #[test]
    fn property_formula_requires_closure() {
        let nts = ex1();
        let p = nts.lookup_state("P").unwrap();
        let q = nts.lookup_state("Q").unwrap();
        // {P} is closed (P and Q are not strongly bisimilar here).
        let f = property_formula(&nts, &[p].into()).unwrap();
        assert!(check(&nts, p, &f).unwrap());
        assert!(!check(&nts, q, &f).unwrap());
        // All states: equivalent to top.
        let all = property_formula(&nts, &nts.states().collect()).unwrap();
        for s in nts.states() {
            assert!(check(&nts, s, &all).unwrap());
        }
    }

    #[test]
    fn weak_distinguishing_formula_self_verifies() {
        // Q -step-> Z vs deadlocked P: not weakly bisimilar.
        let u = Universe::single_sorted(["a", "b", "c"]).unwrap();
        let mut b = NtsBuilder::new(u);
        let p = b.add_state("P".into(), NameSet::empty()).unwrap();
        let q = b.add_state("Q".into(), NameSet::empty()).unwrap();
        let z = b.add_state("Z".into(), NameSet::empty()).unwrap();
        b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] }).unwrap();
        let step = b.add_act(ActDecl { name: "step".into(), arg_sorts: vec![], binding: vec![] }).unwrap();
        b.add_trans(q, ActLabel::new(step, vec![]), z);
        let nts = b.build().unwrap();
        let wc = WeakClosure::new(&nts);
        let wb = weak_bisim(&nts, &wc).unwrap();
        assert!(!wb.relation.contains(p, q));
        let d = weak_distinguishing_formula(&nts, &wc, &wb, q, p).unwrap().unwrap();
        assert!(check_weak(&nts, &wc, q, &d).unwrap());
        assert!(!check_weak(&nts, &wc, p, &d).unwrap());
    }
}
