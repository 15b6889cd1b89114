//! Effects (total state-to-state functions), effect tables, the "later"
//! function L parameterising effect-indexed bisimilarities, and distinctions
//! for open bisimulation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::nominal::{Name, NameSet, Nominal, Perm};
use crate::nts::{ActCtorId, ActLabel, Nts, StateId};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct EffectId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TableId(pub u32);

/// A finitely supported total function on states.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Effect {
    pub name: String,
    map: Vec<StateId>,
    /// For substitution effects: the underlying name map (identity
    /// elsewhere), used by the open-bisimulation machinery.
    pub subst: Option<Vec<Name>>,
}

impl Effect {
    pub fn new(name: String, map: Vec<StateId>) -> Effect {
        Effect { name, map, subst: None }
    }

    pub fn with_subst(name: String, map: Vec<StateId>, subst: Vec<Name>) -> Effect {
        Effect { name, map, subst: Some(subst) }
    }

    pub fn apply(&self, s: StateId) -> StateId {
        self.map[s.0 as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, s)| s.0 as usize == i)
    }

    /// Conjugated effect `π·f = π ∘ f ∘ π⁻¹` as a state map.
    fn permute_map(&self, nts: &Nts, p: &Perm) -> Vec<StateId> {
        let inv = p.inverse();
        nts.states()
            .map(|s| nts.permute_state(p, self.apply(nts.permute_state(&inv, s))))
            .collect()
    }

    pub fn support(&self, nts: &Nts) -> NameSet {
        let occ = self.occurring(nts);
        crate::nominal::support_by(nts.universe(), occ, &self.map, |m, p| {
            let inv = p.inverse();
            nts.states()
                .map(|s| nts.permute_state(p, m[nts.permute_state(&inv, s).0 as usize]))
                .collect()
        })
    }

    fn occurring(&self, nts: &Nts) -> NameSet {
        let mut out = NameSet::empty();
        for s in nts.states() {
            out = out.union(nts.state_support(s)).union(nts.state_support(self.apply(s)));
        }
        if let Some(subst) = &self.subst {
            for (i, n) in subst.iter().enumerate() {
                if n.index() != i {
                    out.insert(Name(i as u8));
                    out.insert(*n);
                }
            }
        }
        out
    }
}

/// A named finitely supported set of effects; for the open instance it also
/// carries the distinction it denotes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EffectTable {
    pub name: String,
    pub members: BTreeSet<EffectId>,
    pub distinction: Option<Distinction>,
}

/// A symmetric irreflexive relation on names, stored as ordered pairs.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Distinction(BTreeSet<(Name, Name)>);

impl Distinction {
    pub fn empty() -> Distinction {
        Distinction(BTreeSet::new())
    }

    pub fn insert(&mut self, a: Name, b: Name) {
        if a == b {
            return;
        }
        let pair = if a < b { (a, b) } else { (b, a) };
        self.0.insert(pair);
    }

    pub fn distinguishes(&self, a: Name, b: Name) -> bool {
        let pair = if a < b { (a, b) } else { (b, a) };
        self.0.contains(&pair)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Name, Name)> + '_ {
        self.0.iter().copied()
    }

    /// `D + b`: distinguish `b` from every other universe name.
    pub fn plus(&self, u: &crate::nominal::Universe, b: Name) -> Distinction {
        let mut d = self.clone();
        for n in u.names() {
            if n != b {
                d.insert(b, n);
            }
        }
        d
    }

    /// `D - b`: drop every pair mentioning `b`.
    pub fn minus(&self, b: Name) -> Distinction {
        Distinction(self.0.iter().filter(|(x, y)| *x != b && *y != b).copied().collect())
    }

    /// `Dσ`: image under a substitution. Only meaningful when the
    /// substitution respects the distinction.
    pub fn image(&self, subst: &[Name]) -> Distinction {
        let mut d = Distinction::empty();
        for (a, b) in &self.0 {
            d.insert(subst[a.index()], subst[b.index()]);
        }
        d
    }

    /// Does a substitution respect the distinction?
    pub fn respects(&self, subst: &[Name]) -> bool {
        self.0.iter().all(|(a, b)| subst[a.index()] != subst[b.index()])
    }

    pub fn permute(&self, p: &Perm) -> Distinction {
        let mut d = Distinction::empty();
        for (a, b) in &self.0 {
            d.insert(p.apply(*a), p.apply(*b));
        }
        d
    }
}

/// The "later" function: which effects apply after a transition.
#[derive(Clone, Debug)]
pub struct LFunction {
    pub name: String,
    pub rule: LRule,
}

#[derive(Clone, Debug)]
pub enum LRule {
    /// Ignore all arguments (the early and hyper instances).
    Constant(TableId),
    /// Keyed by the action alone (the late instance); actions missing from
    /// the map use the default. Alpha-variants must all be present.
    ByAction { map: BTreeMap<ActLabel, TableId>, default: TableId },
    /// The open instance: distinction arithmetic driven by the action shape.
    Open { bound_out: ActCtorId, input: ActCtorId },
    /// Arbitrary finite rule table.
    General { map: BTreeMap<(ActLabel, TableId, EffectId), TableId>, default: TableId },
}

/// Registry of effects and effect tables; table ids index `tables`.
#[derive(Clone, Debug, Default)]
pub struct EffectRegistry {
    pub effects: Vec<Effect>,
    pub tables: Vec<EffectTable>,
}

impl EffectRegistry {
    pub fn effect(&self, f: EffectId) -> &Effect {
        &self.effects[f.0 as usize]
    }

    pub fn table(&self, t: TableId) -> &EffectTable {
        &self.tables[t.0 as usize]
    }

    pub fn add_effect(&mut self, e: Effect) -> EffectId {
        if let Some(i) = self.effects.iter().position(|x| x.map == e.map && x.subst == e.subst) {
            return EffectId(i as u32);
        }
        self.effects.push(e);
        EffectId(self.effects.len() as u32 - 1)
    }

    pub fn add_table(&mut self, t: EffectTable) -> TableId {
        if let Some(i) = self
            .tables
            .iter()
            .position(|x| x.members == t.members && x.distinction == t.distinction)
        {
            return TableId(i as u32);
        }
        self.tables.push(t);
        TableId(self.tables.len() as u32 - 1)
    }

    pub fn lookup_table(&self, name: &str) -> Result<TableId> {
        self.tables
            .iter()
            .position(|t| t.name == name)
            .map(|i| TableId(i as u32))
            .ok_or_else(|| Error::Lookup(format!("unknown effect table `{name}`")))
    }

    /// The identity effect, registering it if absent.
    pub fn identity(&mut self, nts: &Nts) -> EffectId {
        let map = nts.states().collect();
        let subst: Vec<Name> = nts.universe().names().collect();
        self.add_effect(Effect::with_subst("id".into(), map, subst))
    }

    /// Find the effect conjugate to `f` under `p`, if registered.
    pub fn permute_effect(&self, nts: &Nts, p: &Perm, f: EffectId) -> Option<EffectId> {
        let target_map = self.effect(f).permute_map(nts, p);
        let target_subst = self.effect(f).subst.as_ref().map(|s| {
            let inv = p.inverse();
            nts.universe()
                .names()
                .map(|n| p.apply(s[inv.apply(n).index()]))
                .collect::<Vec<_>>()
        });
        self.effects
            .iter()
            .position(|e| e.map == target_map && e.subst == target_subst)
            .map(|i| EffectId(i as u32))
    }

    /// Find the table conjugate to `t` under `p`, if registered.
    pub fn permute_table(&self, nts: &Nts, p: &Perm, t: TableId) -> Option<TableId> {
        let members: Option<BTreeSet<EffectId>> = self
            .table(t)
            .members
            .iter()
            .map(|f| self.permute_effect(nts, p, *f))
            .collect();
        let members = members?;
        let distinction = self.table(t).distinction.as_ref().map(|d| d.permute(p));
        self.tables
            .iter()
            .position(|x| x.members == members && x.distinction == distinction)
            .map(|i| TableId(i as u32))
    }

    pub fn table_support(&self, nts: &Nts, t: TableId) -> NameSet {
        let occ = self
            .table(t)
            .members
            .iter()
            .fold(NameSet::empty(), |acc, f| acc.union(self.effect(*f).support(nts)));
        crate::nominal::support_by(nts.universe(), occ, &t, |t, p| {
            self.permute_table(nts, p, *t).unwrap_or(TableId(u32::MAX))
        })
    }

    /// The distinction produced by the open L-function for one step.
    fn open_next(
        &self,
        nts: &Nts,
        bound_out: ActCtorId,
        input: ActCtorId,
        act: &ActLabel,
        table: TableId,
        eff: EffectId,
    ) -> Result<Distinction> {
        let d = self
            .table(table)
            .distinction
            .clone()
            .ok_or_else(|| Error::RegistryNotClosed("open L on a non-distinction table".into()))?;
        let subst = self
            .effect(eff)
            .subst
            .clone()
            .ok_or_else(|| Error::RegistryNotClosed("open L on a non-substitution effect".into()))?;
        let d_sigma = d.image(&subst);
        Ok(if act.ctor == bound_out {
            let b = *act
                .args
                .last()
                .ok_or_else(|| Error::RegistryNotClosed("bound output without an object".into()))?;
            d_sigma.plus(nts.universe(), b)
        } else if act.ctor == input {
            let b = *act
                .args
                .last()
                .ok_or_else(|| Error::RegistryNotClosed("input without an object".into()))?;
            d_sigma.minus(b)
        } else {
            d_sigma
        })
    }

    fn table_of_distinction(&self, d: &Distinction) -> Option<TableId> {
        self.tables
            .iter()
            .position(|t| t.distinction.as_ref() == Some(d))
            .map(|i| TableId(i as u32))
    }

    /// Register the table denoted by a distinction: all substitution effects
    /// respecting it.
    pub fn intern_distinction(&mut self, d: Distinction) -> TableId {
        if let Some(t) = self.table_of_distinction(&d) {
            return t;
        }
        let members: BTreeSet<EffectId> = self
            .effects
            .iter()
            .enumerate()
            .filter(|(_, e)| e.subst.as_ref().is_some_and(|s| d.respects(s)))
            .map(|(i, _)| EffectId(i as u32))
            .collect();
        let name = format!("D{}", self.tables.len());
        self.add_table(EffectTable { name, members, distinction: Some(d) })
    }

    /// Evaluate the L-function. The registry must already contain the result
    /// table (see [`close_under`]).
    pub fn l_apply(
        &self,
        nts: &Nts,
        l: &LFunction,
        act: &ActLabel,
        table: TableId,
        eff: EffectId,
    ) -> Result<TableId> {
        match &l.rule {
            LRule::Constant(t) => Ok(*t),
            LRule::ByAction { map, default } => Ok(map.get(act).copied().unwrap_or(*default)),
            LRule::General { map, default } => {
                Ok(map.get(&(act.clone(), table, eff)).copied().unwrap_or(*default))
            }
            LRule::Open { bound_out, input } => {
                let next = self.open_next(nts, *bound_out, *input, act, table, eff)?;
                self.table_of_distinction(&next).ok_or_else(|| {
                    Error::RegistryNotClosed(format!("distinction {next:?} not registered"))
                })
            }
        }
    }

    /// Close the registry under the L-function from the given start tables,
    /// over every alpha-variant of every action the system can perform.
    /// Returns the reachable table ids.
    pub fn close_under(&mut self, nts: &Nts, l: &LFunction, start: &[TableId]) -> Result<Vec<TableId>> {
        const TABLE_CAP: usize = 4096;
        let variants = all_action_variants(nts)?;
        let mut reachable: BTreeSet<TableId> = start.iter().copied().collect();
        let mut work: Vec<TableId> = start.to_vec();
        while let Some(t) = work.pop() {
            let members: Vec<EffectId> = self.table(t).members.iter().copied().collect();
            for act in &variants {
                for f in &members {
                    let next = match &l.rule {
                        LRule::Open { bound_out, input } => {
                            let d = self.open_next(nts, *bound_out, *input, act, t, *f)?;
                            self.intern_distinction(d)
                        }
                        _ => self.l_apply(nts, l, act, t, *f)?,
                    };
                    if reachable.insert(next) {
                        work.push(next);
                    }
                    if reachable.len() > TABLE_CAP {
                        return Err(Error::RegistryNotClosed(format!(
                            "more than {TABLE_CAP} tables reachable"
                        )));
                    }
                }
            }
        }
        Ok(reachable.into_iter().collect())
    }

    /// Equivariance sweep: every transposition must map registered effects
    /// and tables to registered ones, and commute with the L-function.
    pub fn validate_equivariance(&self, nts: &Nts, l: Option<&LFunction>) -> Result<()> {
        for t in nts.universe().transpositions() {
            for (i, _) in self.effects.iter().enumerate() {
                if self.permute_effect(nts, &t, EffectId(i as u32)).is_none() {
                    return Err(Error::Invalid(format!(
                        "effect `{}` has no image under a universe transposition",
                        self.effects[i].name
                    )));
                }
            }
            for (i, _) in self.tables.iter().enumerate() {
                if self.permute_table(nts, &t, TableId(i as u32)).is_none() {
                    return Err(Error::Invalid(format!(
                        "effect table `{}` has no image under a universe transposition",
                        self.tables[i].name
                    )));
                }
            }
        }
        if let Some(l) = l {
            let variants = all_action_variants(nts)?;
            for t in nts.universe().transpositions() {
                for act in &variants {
                    for (ti, _) in self.tables.iter().enumerate() {
                        let table = TableId(ti as u32);
                        for f in self.table(table).members.clone() {
                            let lhs = self.l_apply(nts, l, act, table, f)?;
                            let lhs_img = self.permute_table(nts, &t, lhs);
                            let act_img = act.permute(&t);
                            let table_img = self.permute_table(nts, &t, table).unwrap();
                            let f_img = self.permute_effect(nts, &t, f).unwrap();
                            let rhs = self.l_apply(nts, l, &act_img, table_img, f_img)?;
                            if lhs_img != Some(rhs) {
                                return Err(Error::Invalid(format!(
                                    "L `{}` is not equivariant at action {}",
                                    l.name,
                                    nts.display_act(act)
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Every action of the system in every alpha-variant: binders replaced by all
/// injective assignments of universe names avoiding the action's free names.
pub fn all_action_variants(nts: &Nts) -> Result<Vec<ActLabel>> {
    let mut out = BTreeSet::new();
    for (_, r) in nts.transitions() {
        let binders = nts.bn(&r.act);
        let free = r.act.occurring().difference(binders);
        let variants = crate::nominal::hull_by(nts.universe(), free, &r.act, r.act.occurring(), |a, p| {
            a.permute(p)
        });
        for v in variants {
            // Keep only genuine alpha-variants: binders stay clear of the
            // free names.
            if nts.bn(&v).intersection(free).is_empty() {
                out.insert(v);
            }
        }
    }
    Ok(out.into_iter().collect())
}
