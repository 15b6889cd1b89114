//! Finite nominal transition systems: interned states and predicates with
//! declared supports and permutation orbits, actions with binding names, and
//! residual transitions stored in alpha-canonical form.

pub mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::nominal::{binder_renaming, Name, NameSet, Nominal, Perm, Sort, Universe};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PredId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ActCtorId(pub u32);

/// An action constructor: name, argument sorts, and which argument positions
/// are binding.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActDecl {
    pub name: String,
    pub arg_sorts: Vec<Sort>,
    pub binding: Vec<bool>,
}

impl ActDecl {
    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

/// An action: a constructor applied to universe names.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ActLabel {
    pub ctor: ActCtorId,
    pub args: Vec<Name>,
}

impl ActLabel {
    pub fn new(ctor: ActCtorId, args: Vec<Name>) -> ActLabel {
        ActLabel { ctor, args }
    }
}

impl Nominal for ActLabel {
    fn permute(&self, p: &Perm) -> Self {
        ActLabel { ctor: self.ctor, args: self.args.iter().map(|n| p.apply(*n)).collect() }
    }

    fn visit_names(&self, f: &mut dyn FnMut(Name)) {
        self.args.iter().for_each(|n| f(*n));
    }
}

/// A transition residual: the action and target state with the action's
/// binding names abstracted over both. Stored alpha-canonically, so equality
/// of residuals of the same source state is structural.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Residual {
    pub act: ActLabel,
    pub target: StateId,
}

#[derive(Clone, Debug)]
struct StateDecl {
    name: String,
    supp: NameSet,
}

#[derive(Clone, Debug)]
struct PredDecl {
    name: String,
    supp: NameSet,
}

/// A finite nominal transition system.
#[derive(Clone, Debug)]
pub struct Nts {
    universe: Universe,
    states: Vec<StateDecl>,
    preds: Vec<PredDecl>,
    acts: Vec<ActDecl>,
    sat: BTreeSet<(StateId, PredId)>,
    trans: BTreeSet<(StateId, Residual)>,
    by_source: Vec<Vec<Residual>>,
    transpositions: Vec<(Name, Name)>,
    state_perm: Vec<Vec<StateId>>,
    pred_perm: Vec<Vec<PredId>>,
    tau: Option<ActCtorId>,
}

impl Nts {
    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn preds(&self) -> impl Iterator<Item = PredId> {
        (0..self.preds.len() as u32).map(PredId)
    }

    pub fn act_ctors(&self) -> impl Iterator<Item = ActCtorId> {
        (0..self.acts.len() as u32).map(ActCtorId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0 as usize].name
    }

    pub fn pred_name(&self, p: PredId) -> &str {
        &self.preds[p.0 as usize].name
    }

    pub fn act_decl(&self, c: ActCtorId) -> &ActDecl {
        &self.acts[c.0 as usize]
    }

    pub fn state_support(&self, s: StateId) -> NameSet {
        self.states[s.0 as usize].supp
    }

    pub fn pred_support(&self, p: PredId) -> NameSet {
        self.preds[p.0 as usize].supp
    }

    pub fn lookup_state(&self, name: &str) -> Result<StateId> {
        self.states
            .iter()
            .position(|s| s.name == name)
            .map(|i| StateId(i as u32))
            .ok_or_else(|| Error::Lookup(format!("unknown state `{name}`")))
    }

    pub fn lookup_pred(&self, name: &str) -> Result<PredId> {
        self.preds
            .iter()
            .position(|p| p.name == name)
            .map(|i| PredId(i as u32))
            .ok_or_else(|| Error::Lookup(format!("unknown predicate `{name}`")))
    }

    pub fn lookup_act(&self, name: &str) -> Result<ActCtorId> {
        self.acts
            .iter()
            .position(|a| a.name == name)
            .map(|i| ActCtorId(i as u32))
            .ok_or_else(|| Error::Lookup(format!("unknown action `{name}`")))
    }

    /// The designated unobservable action, if the system declares one.
    pub fn tau(&self) -> Option<ActLabel> {
        self.tau.map(|c| ActLabel::new(c, vec![]))
    }

    pub fn is_tau(&self, act: &ActLabel) -> bool {
        Some(act.ctor) == self.tau
    }

    /// Binding names of an action.
    pub fn bn(&self, act: &ActLabel) -> NameSet {
        let decl = self.act_decl(act.ctor);
        act.args
            .iter()
            .zip(&decl.binding)
            .filter(|(_, b)| **b)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn act_support(&self, act: &ActLabel) -> NameSet {
        act.occurring()
    }

    /// `P ⊢ φ`.
    pub fn holds(&self, p: StateId, phi: PredId) -> Result<bool> {
        if p.0 as usize >= self.states.len() {
            return Err(Error::Lookup(format!("state id {} out of range", p.0)));
        }
        if phi.0 as usize >= self.preds.len() {
            return Err(Error::Lookup(format!("predicate id {} out of range", phi.0)));
        }
        Ok(self.sat.contains(&(p, phi)))
    }

    pub fn sat_pairs(&self) -> impl Iterator<Item = (StateId, PredId)> + '_ {
        self.sat.iter().copied()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &Residual)> {
        self.trans.iter().map(|(s, r)| (*s, r))
    }

    pub fn residuals_of(&self, p: StateId) -> &[Residual] {
        &self.by_source[p.0 as usize]
    }

    fn transposition_index(&self, a: Name, b: Name) -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        self.transpositions
            .iter()
            .position(|t| *t == key)
            .expect("same-sort universe transposition")
    }

    pub fn transpose_state(&self, a: Name, b: Name, s: StateId) -> StateId {
        if a == b {
            return s;
        }
        self.state_perm[self.transposition_index(a, b)][s.0 as usize]
    }

    pub fn transpose_pred(&self, a: Name, b: Name, p: PredId) -> PredId {
        if a == b {
            return p;
        }
        self.pred_perm[self.transposition_index(a, b)][p.0 as usize]
    }

    /// Apply a permutation to a state through the orbit tables.
    pub fn permute_state(&self, p: &Perm, s: StateId) -> StateId {
        let mut cur = s;
        for (a, b) in p.as_transpositions() {
            cur = self.transpose_state(a, b, cur);
        }
        cur
    }

    pub fn permute_pred(&self, p: &Perm, phi: PredId) -> PredId {
        let mut cur = phi;
        for (a, b) in p.as_transpositions() {
            cur = self.transpose_pred(a, b, cur);
        }
        cur
    }

    /// Canonical residual for a transition from `source`: binders renamed, in
    /// traversal order, to the least names fresh for the free names of the
    /// residual and for the source state.
    pub fn canonical_residual(&self, source: StateId, act: ActLabel, target: StateId) -> Result<Residual> {
        let binders = self.bn(&act);
        let free = act
            .occurring()
            .union(self.state_support(target))
            .difference(binders);
        let avoid = free.union(self.state_support(source));
        let target_supp = self.state_support(target);
        let (perm, _) = binder_renaming(&self.universe, binders, avoid, |f| {
            act.visit_names(f);
            target_supp.iter().for_each(&mut *f);
        })?;
        Ok(Residual { act: act.permute(&perm), target: self.permute_state(&perm, target) })
    }

    /// A source-independent canonical key for a residual, for comparing
    /// residuals across states: binders renamed to the least names fresh for
    /// the free names of the residual alone.
    pub fn residual_key(&self, r: &Residual) -> Result<Residual> {
        let binders = self.bn(&r.act);
        let free = r
            .act
            .occurring()
            .union(self.state_support(r.target))
            .difference(binders);
        let target_supp = self.state_support(r.target);
        let (perm, _) = binder_renaming(&self.universe, binders, free, |f| {
            r.act.visit_names(f);
            target_supp.iter().for_each(&mut *f);
        })?;
        Ok(Residual { act: r.act.permute(&perm), target: self.permute_state(&perm, r.target) })
    }

    /// Support of a residual as an abstraction (free names only).
    pub fn residual_support(&self, r: &Residual) -> NameSet {
        r.act
            .occurring()
            .union(self.state_support(r.target))
            .difference(self.bn(&r.act))
    }

    /// One alpha-variant per residual of `p`, with binders chosen fresh for
    /// `avoid ∪ supp(p)` (least-name deterministic choice).
    pub fn transitions_from(&self, p: StateId, avoid: NameSet) -> Result<Vec<(ActLabel, StateId)>> {
        let avoid = avoid.union(self.state_support(p));
        let mut out = Vec::new();
        for r in self.residuals_of(p) {
            let binders = self.bn(&r.act);
            let full_avoid = avoid.union(self.residual_support(r));
            let target_supp = self.state_support(r.target);
            let (perm, _) = binder_renaming(&self.universe, binders, full_avoid, |f| {
                r.act.visit_names(f);
                target_supp.iter().for_each(&mut *f);
            })?;
            out.push((r.act.permute(&perm), self.permute_state(&perm, r.target)));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Union of the declared supports and residual free names.
    pub fn support(&self) -> NameSet {
        let mut s = NameSet::empty();
        for st in &self.states {
            s = s.union(st.supp);
        }
        for pd in &self.preds {
            s = s.union(pd.supp);
        }
        for (_, r) in &self.trans {
            s = s.union(self.residual_support(r));
        }
        s
    }

    /// Largest support of any single state, predicate or residual. This is
    /// what the sizing rule must leave room for: swap tests and
    /// alpha-conversion work one value at a time.
    pub fn max_value_support(&self) -> usize {
        let states = self.states.iter().map(|s| s.supp.len());
        let preds = self.preds.iter().map(|p| p.supp.len());
        let residuals = self.trans.iter().map(|(_, r)| self.residual_support(r).len());
        states.chain(preds).chain(residuals).max().unwrap_or(0)
    }

    /// Validate the nominal transition system axioms; the report lists every
    /// violation with a witness.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let u = &self.universe;

        // Binding positions must not collide with free positions or repeat.
        for (src, r) in &self.trans {
            let decl = self.act_decl(r.act.ctor);
            let mut binder_names: Vec<Name> = Vec::new();
            for (n, b) in r.act.args.iter().zip(&decl.binding) {
                if *b {
                    if binder_names.contains(n) {
                        report.push(Violation::BinderClash {
                            state: self.state_name(*src).into(),
                            act: self.display_act(&r.act),
                            detail: "binding name repeated".into(),
                        });
                    }
                    binder_names.push(*n);
                }
            }
            for (n, b) in r.act.args.iter().zip(&decl.binding) {
                if !*b && binder_names.contains(n) {
                    report.push(Violation::BinderClash {
                        state: self.state_name(*src).into(),
                        act: self.display_act(&r.act),
                        detail: "binding name also occurs free in the action".into(),
                    });
                }
            }
        }

        // Orbit table laws: involution, disjoint commutation, conjugation.
        self.check_tables(&mut report);

        // Declared supports must agree with the swap test.
        for s in self.states() {
            let supp = self.state_support(s);
            self.check_declared_support(
                supp,
                |t| self.state_perm[*t][s.0 as usize].0 != s.0,
                &mut report,
                || Violation::DeclaredSupport { item: self.state_name(s).into() },
            );
        }
        for p in self.preds() {
            let supp = self.pred_support(p);
            self.check_declared_support(
                supp,
                |t| self.pred_perm[*t][p.0 as usize].0 != p.0,
                &mut report,
                || Violation::DeclaredSupport { item: self.pred_name(p).into() },
            );
        }

        // Equivariance of satisfaction and transitions under transpositions.
        for (ti, (a, b)) in self.transpositions.iter().enumerate() {
            for (s, phi) in &self.sat {
                let img = (self.state_perm[ti][s.0 as usize], self.pred_perm[ti][phi.0 as usize]);
                if !self.sat.contains(&img) {
                    report.push(Violation::SatNotEquivariant {
                        witness: (u.label(*a).into(), u.label(*b).into()),
                        state: self.state_name(*s).into(),
                        pred: self.pred_name(*phi).into(),
                    });
                }
            }
            let sw = Perm::swap(u, *a, *b).expect("same sort");
            for (s, r) in &self.trans {
                let src = self.state_perm[ti][s.0 as usize];
                let act = r.act.permute(&sw);
                let tgt = self.state_perm[ti][r.target.0 as usize];
                match self.canonical_residual(src, act, tgt) {
                    Ok(img) => {
                        if !self.trans.contains(&(src, img)) {
                            report.push(Violation::TransNotEquivariant {
                                witness: (u.label(*a).into(), u.label(*b).into()),
                                state: self.state_name(*s).into(),
                                act: self.display_act(&r.act),
                            });
                        }
                    }
                    Err(e) => report.push(Violation::Internal(e.to_string())),
                }
            }
        }

        // Stored residuals are canonical with binders fresh for the source.
        for (s, r) in &self.trans {
            let ok = self
                .canonical_residual(*s, r.act.clone(), r.target)
                .map(|c| c == *r)
                .unwrap_or(false);
            if !ok {
                report.push(Violation::Internal(format!(
                    "residual of {} not stored canonically",
                    self.state_name(*s)
                )));
            }
            if !self.bn(&r.act).intersection(self.state_support(*s)).is_empty() {
                report.push(Violation::Internal(format!(
                    "stored binder not fresh for source {}",
                    self.state_name(*s)
                )));
            }
        }

        // Universe sizing: room for the largest single value, the widest
        // binder, and two spare names.
        let need = self.max_value_support()
            + self
                .trans
                .iter()
                .map(|(_, r)| self.bn(&r.act).len())
                .max()
                .unwrap_or(0)
            + 2;
        if u.size() < need {
            report.push(Violation::Sizing { needed: need, have: u.size() });
        }

        report
    }

    fn check_tables(&self, report: &mut ValidationReport) {
        let u = &self.universe;
        let n_states = self.states.len();
        let trs = &self.transpositions;
        for (ti, (a, b)) in trs.iter().enumerate() {
            for s in 0..n_states {
                let once = self.state_perm[ti][s].0 as usize;
                if self.state_perm[ti][once].0 as usize != s {
                    report.push(Violation::TableLaw {
                        law: "involution".into(),
                        witness: format!("({} {}) on {}", u.label(*a), u.label(*b), self.states[s].name),
                    });
                }
            }
        }
        for (ti, (a, b)) in trs.iter().enumerate() {
            for (tj, (c, d)) in trs.iter().enumerate() {
                if tj <= ti {
                    continue;
                }
                let disjoint = a != c && a != d && b != c && b != d;
                for s in 0..n_states {
                    let ij = self.state_perm[tj][self.state_perm[ti][s].0 as usize];
                    let ji = self.state_perm[ti][self.state_perm[tj][s].0 as usize];
                    if disjoint {
                        if ij != ji {
                            report.push(Violation::TableLaw {
                                law: "disjoint commutation".into(),
                                witness: format!(
                                    "({} {}),({} {}) on {}",
                                    u.label(*a),
                                    u.label(*b),
                                    u.label(*c),
                                    u.label(*d),
                                    self.states[s].name
                                ),
                            });
                        }
                    } else {
                        // (a b)(c d)(a b) is itself a transposition.
                        let sw = Perm::swap(u, *a, *b).expect("same sort");
                        let (e, f) = (sw.apply(*c), sw.apply(*d));
                        if (e, f) == (*c, *d) || (f, e) == (*c, *d) {
                            continue;
                        }
                        let tk = self.transposition_index(e, f);
                        let lhs = self.state_perm[ti]
                            [self.state_perm[tj][self.state_perm[ti][s].0 as usize].0 as usize];
                        if lhs != self.state_perm[tk][s] {
                            report.push(Violation::TableLaw {
                                law: "conjugation".into(),
                                witness: format!(
                                    "({} {}),({} {}) on {}",
                                    u.label(*a),
                                    u.label(*b),
                                    u.label(*c),
                                    u.label(*d),
                                    self.states[s].name
                                ),
                            });
                        }
                    }
                }
            }
        }
    }

    fn check_declared_support(
        &self,
        supp: NameSet,
        moved_by: impl Fn(&usize) -> bool,
        report: &mut ValidationReport,
        make: impl Fn() -> Violation,
    ) {
        let u = &self.universe;
        for (ti, (a, b)) in self.transpositions.iter().enumerate() {
            let outside = !supp.contains(*a) && !supp.contains(*b);
            if outside && moved_by(&ti) {
                report.push(make());
                return;
            }
        }
        for n in supp.iter() {
            let witness = self.transpositions.iter().enumerate().any(|(ti, (a, b))| {
                let other = if *a == n { Some(*b) } else if *b == n { Some(*a) } else { None };
                match other {
                    Some(o) => !supp.contains(o) && moved_by(&ti),
                    None => false,
                }
            });
            let spare_exists = u
                .names_of_sort(u.sort_of(n))
                .any(|m| m != n && !supp.contains(m));
            if spare_exists && !witness {
                report.push(make());
                return;
            }
        }
    }

    pub fn display_act(&self, act: &ActLabel) -> String {
        let decl = self.act_decl(act.ctor);
        if act.args.is_empty() {
            decl.name.clone()
        } else {
            let args: Vec<&str> = act.args.iter().map(|n| self.universe.label(*n)).collect();
            format!("{}({})", decl.name, args.join(","))
        }
    }

    /// Tagged disjoint union of two systems over the same universe. Action
    /// constructors and predicates with identical declarations are shared;
    /// states are kept apart under the `l.`/`r.` prefixes.
    pub fn disjoint_union(a: &Nts, b: &Nts) -> Result<Nts> {
        if a.universe != b.universe {
            return Err(Error::Universe("disjoint union requires a common universe".into()));
        }
        let mut builder = NtsBuilder::new(a.universe.clone());
        for s in a.states() {
            builder.add_state(format!("l.{}", a.state_name(s)), a.state_support(s))?;
        }
        for s in b.states() {
            builder.add_state(format!("r.{}", b.state_name(s)), b.state_support(s))?;
        }
        let off = a.states.len() as u32;
        let mut pred_map_b: BTreeMap<PredId, PredId> = BTreeMap::new();
        for p in a.preds() {
            builder.add_pred(a.pred_name(p).to_string(), a.pred_support(p))?;
        }
        for p in b.preds() {
            let id = match a.preds.iter().position(|d| d.name == b.pred_name(p)) {
                Some(i) => {
                    if a.preds[i].supp != b.pred_support(p) {
                        return Err(Error::Invalid(format!(
                            "predicate `{}` declared with different supports",
                            b.pred_name(p)
                        )));
                    }
                    PredId(i as u32)
                }
                None => builder.add_pred(b.pred_name(p).to_string(), b.pred_support(p))?,
            };
            pred_map_b.insert(p, id);
        }
        let mut act_map_b: BTreeMap<ActCtorId, ActCtorId> = BTreeMap::new();
        for c in a.act_ctors() {
            builder.add_act(a.act_decl(c).clone())?;
        }
        for c in b.act_ctors() {
            let decl = b.act_decl(c);
            let id = match a.acts.iter().position(|d| d.name == decl.name) {
                Some(i) => {
                    if a.acts[i] != *decl {
                        return Err(Error::Invalid(format!(
                            "action `{}` declared with different signatures",
                            decl.name
                        )));
                    }
                    ActCtorId(i as u32)
                }
                None => builder.add_act(decl.clone())?,
            };
            act_map_b.insert(c, id);
        }
        for (s, phi) in &a.sat {
            builder.add_sat(*s, *phi);
        }
        for (s, phi) in &b.sat {
            builder.add_sat(StateId(s.0 + off), pred_map_b[phi]);
        }
        for (s, r) in &a.trans {
            builder.add_trans(*s, r.act.clone(), r.target);
        }
        for (s, r) in &b.trans {
            let act = ActLabel::new(act_map_b[&r.act.ctor], r.act.args.clone());
            builder.add_trans(StateId(s.0 + off), act, StateId(r.target.0 + off));
        }
        for (ti, (x, y)) in a.transpositions.iter().enumerate() {
            for s in a.states() {
                builder.set_state_perm(*x, *y, s, a.state_perm[ti][s.0 as usize])?;
            }
            for s in b.states() {
                let img = b.state_perm[ti][s.0 as usize];
                builder.set_state_perm(*x, *y, StateId(s.0 + off), StateId(img.0 + off))?;
            }
            for p in a.preds() {
                builder.set_pred_perm(*x, *y, p, a.pred_perm[ti][p.0 as usize])?;
            }
            for p in b.preds() {
                builder.set_pred_perm(*x, *y, pred_map_b[&p], pred_map_b[&b.pred_perm[ti][p.0 as usize]])?;
            }
        }
        builder.build()
    }
}

/// Builder used by the parser, the front ends and the transforms.
#[derive(Clone, Debug)]
pub struct NtsBuilder {
    universe: Universe,
    states: Vec<StateDecl>,
    preds: Vec<PredDecl>,
    acts: Vec<ActDecl>,
    sat: BTreeSet<(StateId, PredId)>,
    raw_trans: Vec<(StateId, ActLabel, StateId)>,
    state_perm: BTreeMap<(Name, Name), BTreeMap<StateId, StateId>>,
    pred_perm: BTreeMap<(Name, Name), BTreeMap<PredId, PredId>>,
}

impl NtsBuilder {
    pub fn new(universe: Universe) -> NtsBuilder {
        NtsBuilder {
            universe,
            states: Vec::new(),
            preds: Vec::new(),
            acts: Vec::new(),
            sat: BTreeSet::new(),
            raw_trans: Vec::new(),
            state_perm: BTreeMap::new(),
            pred_perm: BTreeMap::new(),
        }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn add_state(&mut self, name: String, supp: NameSet) -> Result<StateId> {
        if self.states.iter().any(|s| s.name == name) {
            return Err(Error::Invalid(format!("duplicate state `{name}`")));
        }
        self.states.push(StateDecl { name, supp });
        Ok(StateId(self.states.len() as u32 - 1))
    }

    pub fn add_pred(&mut self, name: String, supp: NameSet) -> Result<PredId> {
        if self.preds.iter().any(|p| p.name == name) {
            return Err(Error::Invalid(format!("duplicate predicate `{name}`")));
        }
        self.preds.push(PredDecl { name, supp });
        Ok(PredId(self.preds.len() as u32 - 1))
    }

    pub fn add_act(&mut self, decl: ActDecl) -> Result<ActCtorId> {
        if self.acts.iter().any(|a| a.name == decl.name) {
            return Err(Error::Invalid(format!("duplicate action `{}`", decl.name)));
        }
        if decl.binding.len() != decl.arg_sorts.len() {
            return Err(Error::Invalid(format!(
                "action `{}`: one binding flag per argument required",
                decl.name
            )));
        }
        self.acts.push(decl);
        Ok(ActCtorId(self.acts.len() as u32 - 1))
    }

    pub fn lookup_state(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name).map(|i| StateId(i as u32))
    }

    pub fn lookup_act(&self, name: &str) -> Option<ActCtorId> {
        self.acts.iter().position(|a| a.name == name).map(|i| ActCtorId(i as u32))
    }

    pub fn lookup_pred(&self, name: &str) -> Option<PredId> {
        self.preds.iter().position(|p| p.name == name).map(|i| PredId(i as u32))
    }

    pub fn add_sat(&mut self, s: StateId, p: PredId) {
        self.sat.insert((s, p));
    }

    pub fn add_trans(&mut self, source: StateId, act: ActLabel, target: StateId) {
        self.raw_trans.push((source, act, target));
    }

    pub fn set_state_perm(&mut self, a: Name, b: Name, s: StateId, image: StateId) -> Result<()> {
        if self.universe.sort_of(a) != self.universe.sort_of(b) {
            return Err(Error::Universe("orbit row for a cross-sort pair".into()));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.state_perm.entry(key).or_default().insert(s, image);
        self.state_perm.entry(key).or_default().insert(image, s);
        Ok(())
    }

    pub fn set_pred_perm(&mut self, a: Name, b: Name, p: PredId, image: PredId) -> Result<()> {
        if self.universe.sort_of(a) != self.universe.sort_of(b) {
            return Err(Error::Universe("orbit row for a cross-sort pair".into()));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pred_perm.entry(key).or_default().insert(p, image);
        self.pred_perm.entry(key).or_default().insert(image, p);
        Ok(())
    }

    pub fn build(self) -> Result<Nts> {
        let u = self.universe.clone();
        let transpositions: Vec<(Name, Name)> = {
            let mut out = Vec::new();
            for a in u.names() {
                for b in u.names() {
                    if a < b && u.sort_of(a) == u.sort_of(b) {
                        out.push((a, b));
                    }
                }
            }
            out
        };
        let mut state_perm = Vec::with_capacity(transpositions.len());
        let mut pred_perm = Vec::with_capacity(transpositions.len());
        for key in &transpositions {
            // Omitted rows default to identity; the validator flags states
            // whose declared support disagrees.
            let rows = self.state_perm.get(key);
            let col: Vec<StateId> = (0..self.states.len() as u32)
                .map(StateId)
                .map(|id| rows.and_then(|m| m.get(&id)).copied().unwrap_or(id))
                .collect();
            state_perm.push(col);
            let rows = self.pred_perm.get(key);
            let col: Vec<PredId> = (0..self.preds.len() as u32)
                .map(PredId)
                .map(|id| rows.and_then(|m| m.get(&id)).copied().unwrap_or(id))
                .collect();
            pred_perm.push(col);
        }

        for decl in &self.acts {
            for s in &decl.arg_sorts {
                if s.0 as usize >= u.sort_count() {
                    return Err(Error::Invalid(format!("action `{}`: bad sort", decl.name)));
                }
            }
        }

        let tau = self
            .acts
            .iter()
            .position(|a| a.name == "tau" && a.arity() == 0)
            .map(|i| ActCtorId(i as u32));

        let mut nts = Nts {
            universe: u,
            states: self.states,
            preds: self.preds,
            acts: self.acts,
            sat: self.sat,
            trans: BTreeSet::new(),
            by_source: Vec::new(),
            transpositions,
            state_perm,
            pred_perm,
            tau,
        };

        for (source, act, target) in &self.raw_trans {
            let decl = nts.act_decl(act.ctor);
            if act.args.len() != decl.arity() {
                return Err(Error::Invalid(format!(
                    "action `{}` expects {} arguments, got {}",
                    decl.name,
                    decl.arity(),
                    act.args.len()
                )));
            }
            for (n, s) in act.args.iter().zip(decl.arg_sorts.clone()) {
                if nts.universe.sort_of(*n) != s {
                    return Err(Error::Invalid(format!(
                        "action `{}`: argument `{}` has the wrong sort",
                        nts.act_decl(act.ctor).name,
                        nts.universe.label(*n)
                    )));
                }
            }
            let r = nts.canonical_residual(*source, act.clone(), *target)?;
            nts.trans.insert((*source, r));
        }
        let mut by_source = vec![Vec::new(); nts.states.len()];
        for (s, r) in &nts.trans {
            by_source[s.0 as usize].push(r.clone());
        }
        nts.by_source = by_source;
        Ok(nts)
    }
}

/// Validation outcome; `ok()` means no violations.
#[derive(Default, Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum Violation {
    SatNotEquivariant { witness: (String, String), state: String, pred: String },
    TransNotEquivariant { witness: (String, String), state: String, act: String },
    TableLaw { law: String, witness: String },
    DeclaredSupport { item: String },
    BinderClash { state: String, act: String, detail: String },
    Sizing { needed: usize, have: usize },
    Internal(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SatNotEquivariant { witness, state, pred } => write!(
                f,
                "satisfaction not equivariant: ({} {}) maps {} |- {} outside the relation",
                witness.0, witness.1, state, pred
            ),
            Violation::TransNotEquivariant { witness, state, act } => write!(
                f,
                "transitions not equivariant: ({} {}) maps the {act}-transition of {state} outside the relation",
                witness.0, witness.1
            ),
            Violation::TableLaw { law, witness } => {
                write!(f, "orbit tables violate the {law} law at {witness}")
            }
            Violation::DeclaredSupport { item } => {
                write!(f, "declared support of `{item}` disagrees with the swap test")
            }
            Violation::BinderClash { state, act, detail } => {
                write!(f, "transition of {state} with action {act}: {detail}")
            }
            Violation::Sizing { needed, have } => write!(
                f,
                "universe too small: {have} names, need at least {needed} (support + binders + 2 spares)"
            ),
            Violation::Internal(msg) => write!(f, "{msg}"),
        }
    }
}
