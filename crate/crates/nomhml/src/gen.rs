//! Seed-deterministic random systems and formulas for the adequacy and
//! fixpoint test batteries.
//!
//! Random systems use states and predicates with empty support, so any
//! transition set closed under permutations of its action arguments is
//! equivariant by construction.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator RNG; fixed so seeds stay stable across builds.
pub type GenRng = ChaCha8Rng;

use crate::effects::{Effect, EffectRegistry, EffectTable, LFunction, LRule, TableId};
use crate::error::Result;
use crate::formula::weak::{ExtWeakFormula, FlFormula, Preformula, WeakFormula};
use crate::formula::Formula;
use crate::nominal::{NameSet, Nominal, Sort, Universe};
use crate::nts::{ActDecl, ActLabel, Nts, NtsBuilder};

#[derive(Clone, Copy, Debug)]
pub struct SystemConfig {
    pub states: usize,
    pub names: usize,
    pub preds: usize,
    /// Probability that a given (state, action shape) pair has a transition.
    pub density: f64,
    /// Include the binding action shape.
    pub with_binders: bool,
    /// Include the unobservable action.
    pub with_tau: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { states: 8, names: 4, preds: 2, density: 0.3, with_binders: true, with_tau: true }
    }
}

/// A random valid system: empty-support states, equivariant transitions.
pub fn random_nts(seed: u64, cfg: SystemConfig) -> Result<Nts> {
    let mut rng = GenRng::seed_from_u64(seed);
    let labels: Vec<String> = (0..cfg.names).map(|i| format!("n{i}")).collect();
    let u = Universe::single_sorted(labels)?;
    let mut b = NtsBuilder::new(u.clone());
    for i in 0..cfg.states {
        b.add_state(format!("S{i}"), NameSet::empty())?;
    }
    for i in 0..cfg.preds {
        b.add_pred(format!("p{i}"), NameSet::empty())?;
    }
    let tau = if cfg.with_tau {
        Some(b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] })?)
    } else {
        None
    };
    let step = b.add_act(ActDecl { name: "step".into(), arg_sorts: vec![], binding: vec![] })?;
    let out = b.add_act(ActDecl {
        name: "out".into(),
        arg_sorts: vec![Sort(0)],
        binding: vec![false],
    })?;
    let bind = if cfg.with_binders {
        Some(b.add_act(ActDecl {
            name: "open".into(),
            arg_sorts: vec![Sort(0)],
            binding: vec![true],
        })?)
    } else {
        None
    };

    for s in 0..cfg.states {
        for p in 0..cfg.preds {
            if rng.gen_bool(0.4) {
                b.add_sat(crate::nts::StateId(s as u32), crate::nts::PredId(p as u32));
            }
        }
    }

    let state = |i: usize| crate::nts::StateId(i as u32);
    for s in 0..cfg.states {
        if let Some(tau) = tau {
            if rng.gen_bool(cfg.density) {
                let t = rng.gen_range(0..cfg.states);
                b.add_trans(state(s), ActLabel::new(tau, vec![]), state(t));
            }
        }
        if rng.gen_bool(cfg.density) {
            let t = rng.gen_range(0..cfg.states);
            b.add_trans(state(s), ActLabel::new(step, vec![]), state(t));
        }
        if rng.gen_bool(cfg.density) {
            // States have empty support, so the full orbit of the action
            // argument must be present for equivariance.
            let t = rng.gen_range(0..cfg.states);
            for n in u.names() {
                b.add_trans(state(s), ActLabel::new(out, vec![n]), state(t));
            }
        }
        if let Some(bind) = bind {
            if rng.gen_bool(cfg.density) {
                let t = rng.gen_range(0..cfg.states);
                // A binding argument: a single residual up to alpha.
                b.add_trans(state(s), ActLabel::new(bind, vec![crate::nominal::Name(0)]), state(t));
            }
        }
    }
    b.build()
}

/// A random unlabelled-feeling graph (single no-argument action), used
/// against the reachability oracles.
pub fn random_graph(seed: u64, states: usize, density: f64) -> Result<Nts> {
    random_nts(
        seed,
        SystemConfig {
            states,
            names: 3,
            preds: 1,
            density,
            with_binders: false,
            with_tau: false,
        },
    )
}

#[derive(Clone, Copy, Debug)]
pub struct FormulaConfig {
    pub depth: usize,
    pub width: usize,
    pub orbit_probability: f64,
}

impl Default for FormulaConfig {
    fn default() -> Self {
        FormulaConfig { depth: 4, width: 3, orbit_probability: 0.2 }
    }
}

/// A random closed fixpoint-free formula over the system's vocabulary.
pub fn random_formula(rng: &mut GenRng, nts: &Nts, cfg: FormulaConfig) -> Result<Formula> {
    let acts = crate::formula::system_actions_avoiding(nts, NameSet::empty())?;
    Ok(rand_formula(rng, nts, &acts, cfg.depth, cfg))
}

fn rand_formula(
    rng: &mut GenRng,
    nts: &Nts,
    acts: &[ActLabel],
    depth: usize,
    cfg: FormulaConfig,
) -> Formula {
    let preds: Vec<_> = nts.preds().collect();
    if depth == 0 {
        return match preds.is_empty() || rng.gen_bool(0.3) {
            true => Formula::top(),
            false => Formula::Pred(preds[rng.gen_range(0..preds.len())]),
        };
    }
    match rng.gen_range(0..10) {
        0 | 1 => {
            let n = rng.gen_range(0..=cfg.width);
            let items: Vec<Formula> = (0..n)
                .map(|_| rand_formula(rng, nts, acts, depth - 1, cfg))
                .collect();
            Formula::conj(items).unwrap_or_else(|_| Formula::top())
        }
        2 | 3 => rand_formula(rng, nts, acts, depth - 1, cfg).neg(),
        4 if !preds.is_empty() => Formula::Pred(preds[rng.gen_range(0..preds.len())]),
        _ if acts.is_empty() => rand_formula(rng, nts, acts, depth - 1, cfg).neg(),
        _ => {
            let act = acts[rng.gen_range(0..acts.len())].clone();
            let body = rand_formula(rng, nts, acts, depth - 1, cfg);
            let may = Formula::may(act, body);
            if rng.gen_bool(cfg.orbit_probability) {
                let supp = may.support(nts);
                if supp.len() > 1 {
                    // Fix a strict subset of the support.
                    let keep: NameSet = supp.iter().take(supp.len() - 1).collect();
                    return Formula::orbit(keep, may);
                }
            }
            may
        }
    }
}

/// A random weak formula (predicates only under a guarded weak tau).
pub fn random_weak_formula(rng: &mut GenRng, nts: &Nts, cfg: FormulaConfig) -> Result<WeakFormula> {
    let acts = crate::formula::system_actions_avoiding(nts, NameSet::empty())?;
    Ok(rand_weak(rng, nts, &acts, cfg.depth, cfg))
}

fn rand_weak(
    rng: &mut GenRng,
    nts: &Nts,
    acts: &[ActLabel],
    depth: usize,
    cfg: FormulaConfig,
) -> WeakFormula {
    let preds: Vec<_> = nts.preds().collect();
    if depth == 0 {
        return WeakFormula::top();
    }
    match rng.gen_range(0..10) {
        0 | 1 => {
            let n = rng.gen_range(0..=cfg.width);
            WeakFormula::conj((0..n).map(|_| rand_weak(rng, nts, acts, depth - 1, cfg)))
        }
        2 | 3 => rand_weak(rng, nts, acts, depth - 1, cfg).neg(),
        4 | 5 if !preds.is_empty() => {
            let pred = preds[rng.gen_range(0..preds.len())];
            WeakFormula::tau_pred(rand_weak(rng, nts, acts, depth - 1, cfg), pred)
        }
        _ if acts.is_empty() => rand_weak(rng, nts, acts, depth - 1, cfg).neg(),
        _ => {
            let act = acts[rng.gen_range(0..acts.len())].clone();
            WeakFormula::wmay(act, rand_weak(rng, nts, acts, depth - 1, cfg))
        }
    }
}

/// A random extended weak formula (preformulas may hold disjunctions).
pub fn random_ext_weak_formula(
    rng: &mut GenRng,
    nts: &Nts,
    cfg: FormulaConfig,
) -> Result<ExtWeakFormula> {
    let acts = crate::formula::system_actions_avoiding(nts, NameSet::empty())?;
    Ok(rand_ext(rng, nts, &acts, cfg.depth, cfg))
}

fn rand_ext(
    rng: &mut GenRng,
    nts: &Nts,
    acts: &[ActLabel],
    depth: usize,
    cfg: FormulaConfig,
) -> ExtWeakFormula {
    if depth == 0 {
        return ExtWeakFormula::top();
    }
    match rng.gen_range(0..10) {
        0 | 1 => {
            let n = rng.gen_range(0..=cfg.width);
            ExtWeakFormula::Conj(
                (0..n).map(|_| rand_ext(rng, nts, acts, depth - 1, cfg)).collect(),
            )
        }
        2 | 3 => rand_ext(rng, nts, acts, depth - 1, cfg).neg(),
        4 | 5 if nts.preds().count() > 0 => {
            ExtWeakFormula::wtau(rand_pre(rng, nts, acts, depth - 1, cfg))
        }
        _ if acts.is_empty() => rand_ext(rng, nts, acts, depth - 1, cfg).neg(),
        _ => {
            let act = acts[rng.gen_range(0..acts.len())].clone();
            ExtWeakFormula::wmay(act, rand_ext(rng, nts, acts, depth - 1, cfg))
        }
    }
}

fn rand_pre(
    rng: &mut GenRng,
    nts: &Nts,
    acts: &[ActLabel],
    depth: usize,
    cfg: FormulaConfig,
) -> Preformula {
    let preds: Vec<_> = nts.preds().collect();
    let pred = || Preformula::Pred(preds[0]);
    if depth == 0 || preds.is_empty() {
        return pred();
    }
    match rng.gen_range(0..6) {
        0 | 1 => Preformula::Pred(preds[rng.gen_range(0..preds.len())]),
        2 | 3 => Preformula::And(
            rand_ext(rng, nts, acts, depth - 1, cfg),
            Box::new(rand_pre(rng, nts, acts, depth - 1, cfg)),
        ),
        _ => {
            let n = rng.gen_range(1..=cfg.width.max(1));
            Preformula::Disj(
                (0..n).map(|_| rand_pre(rng, nts, acts, depth - 1, cfg)).collect(),
            )
        }
    }
}

/// A random effect-consequence formula in the grammar rooted at `table`.
pub fn random_fl_formula(
    rng: &mut GenRng,
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    table: TableId,
    cfg: FormulaConfig,
) -> Result<FlFormula> {
    rand_fl(rng, nts, reg, l, table, cfg.depth, cfg)
}

fn rand_fl(
    rng: &mut GenRng,
    nts: &Nts,
    reg: &EffectRegistry,
    l: &LFunction,
    table: TableId,
    depth: usize,
    cfg: FormulaConfig,
) -> Result<FlFormula> {
    let members: Vec<_> = reg.table(table).members.iter().copied().collect();
    let preds: Vec<_> = nts.preds().collect();
    if depth == 0 || members.is_empty() {
        return Ok(FlFormula::top());
    }
    Ok(match rng.gen_range(0..10) {
        0 | 1 => {
            let n = rng.gen_range(0..=cfg.width);
            let mut items = Vec::new();
            for _ in 0..n {
                items.push(rand_fl(rng, nts, reg, l, table, depth - 1, cfg)?);
            }
            FlFormula::conj(items)
        }
        2 | 3 => rand_fl(rng, nts, reg, l, table, depth - 1, cfg)?.neg(),
        4 | 5 if !preds.is_empty() => FlFormula::EffPred {
            eff: members[rng.gen_range(0..members.len())],
            pred: preds[rng.gen_range(0..preds.len())],
        },
        _ => {
            let eff = members[rng.gen_range(0..members.len())];
            // Challenger actions with binders fresh for the table and effect.
            let avoid = reg
                .table_support(nts, table)
                .union(reg.effect(eff).support(nts));
            let acts = crate::formula::system_actions_avoiding(nts, avoid)?;
            if acts.is_empty() {
                return rand_fl(rng, nts, reg, l, table, depth - 1, cfg).map(FlFormula::neg);
            }
            let act = acts[rng.gen_range(0..acts.len())].clone();
            let next = reg.l_apply(nts, l, &act, table, eff)?;
            FlFormula::EffMay {
                eff,
                act,
                body: Box::new(rand_fl(rng, nts, reg, l, next, depth - 1, cfg)?),
            }
        }
    })
}

/// A random equivariant effect registry over an empty-support-state system:
/// constant and identity state maps are always equivariant there.
pub fn random_effects(rng: &mut GenRng, nts: &Nts, effects: usize, tables: usize) -> EffectRegistry {
    let mut reg = EffectRegistry::default();
    let id = reg.identity(nts);
    let n = nts.state_count();
    let mut ids = vec![id];
    for i in 0..effects {
        let kind = rng.gen_range(0..3);
        let map: Vec<crate::nts::StateId> = match kind {
            // Constant map.
            0 => {
                let t = crate::nts::StateId(rng.gen_range(0..n) as u32);
                (0..n).map(|_| t).collect()
            }
            // A swap of two states with everything else fixed; states have
            // empty support so this commutes with every permutation.
            1 => {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                (0..n)
                    .map(|s| {
                        if s == a {
                            crate::nts::StateId(b as u32)
                        } else if s == b {
                            crate::nts::StateId(a as u32)
                        } else {
                            crate::nts::StateId(s as u32)
                        }
                    })
                    .collect()
            }
            // A random retraction.
            _ => {
                let img: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                img.into_iter().map(|s| crate::nts::StateId(s as u32)).collect()
            }
        };
        ids.push(reg.add_effect(Effect::new(format!("f{i}"), map)));
    }
    for i in 0..tables.max(1) {
        let mut members: BTreeSet<crate::effects::EffectId> = [id].into();
        for f in &ids {
            if rng.gen_bool(0.5) {
                members.insert(*f);
            }
        }
        reg.add_table(EffectTable { name: format!("F{i}"), members, distinction: None });
    }
    reg
}

/// A random L-function over the registry, keyed by action constructor shape
/// (equivariant because the tables contain only empty-support effects).
pub fn random_l(rng: &mut GenRng, nts: &Nts, reg: &EffectRegistry) -> LFunction {
    let tables: Vec<TableId> = (0..reg.tables.len() as u32).map(TableId).collect();
    let mut map = std::collections::BTreeMap::new();
    for (_, r) in nts.transitions() {
        let variants = crate::nominal::hull_by(
            nts.universe(),
            NameSet::empty(),
            &r.act,
            r.act.occurring(),
            |a, p| a.permute(p),
        );
        // One target table per constructor orbit keeps L equivariant.
        let target = tables[rng.gen_range(0..tables.len())];
        for v in variants {
            map.insert(v, target);
        }
    }
    let default = tables[rng.gen_range(0..tables.len())];
    LFunction { name: "LR".into(), rule: LRule::ByAction { map, default } }
}

pub fn rng_from_seed(seed: u64) -> GenRng {
    GenRng::seed_from_u64(seed)
}
