//! Monadic pi-calculus front end: parser, early and late operational
//! semantics, bounded state-space generation, and substitution effects for
//! the effect-indexed bisimilarities.
//!
//! Output is `a<b>.P`, input `a(x).P`, match `[a=b]P`, restriction
//! `new x. P`, bounded replication `!n.P`. Early input enumerates every
//! universe name; a restriction contributes the union of its transitions
//! over all fresh choices of the bound name, which keeps the generated
//! system equivariant.

use std::collections::{BTreeMap, BTreeSet};

use crate::effects::{Effect, EffectRegistry, EffectTable, LFunction, LRule, TableId};
use crate::error::{Error, Result};
use crate::nominal::{Name, NameSet, Perm, Sort, Universe};
use crate::nts::{ActCtorId, ActDecl, ActLabel, Nts, NtsBuilder, StateId};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Semantics {
    Early,
    Late,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum PiTerm {
    Nil,
    Tau(Box<PiTerm>),
    /// `a<b>.P`
    Out(Name, Name, Box<PiTerm>),
    /// `a(x).P`, `x` binds into the continuation.
    In(Name, Name, Box<PiTerm>),
    /// `[a=b]P`
    Match(Name, Name, Box<PiTerm>),
    Sum(Vec<PiTerm>),
    Par(Vec<PiTerm>),
    /// `new x. P`
    Nu(Name, Box<PiTerm>),
    /// Bounded replication: up to `n` parallel unfoldings.
    Rep(u32, Box<PiTerm>),
}

impl PiTerm {
    pub fn free_names(&self) -> NameSet {
        match self {
            PiTerm::Nil => NameSet::empty(),
            PiTerm::Tau(p) => p.free_names(),
            PiTerm::Out(a, b, p) => {
                let mut s = p.free_names();
                s.insert(*a);
                s.insert(*b);
                s
            }
            PiTerm::In(a, x, p) => {
                let mut s = p.free_names();
                s.remove(*x);
                s.insert(*a);
                s
            }
            PiTerm::Match(a, b, p) => {
                let mut s = p.free_names();
                s.insert(*a);
                s.insert(*b);
                s
            }
            PiTerm::Sum(items) | PiTerm::Par(items) => items
                .iter()
                .fold(NameSet::empty(), |acc, t| acc.union(t.free_names())),
            PiTerm::Nu(x, p) => {
                let mut s = p.free_names();
                s.remove(*x);
                s
            }
            PiTerm::Rep(_, p) => p.free_names(),
        }
    }

    /// Simultaneous capture-avoiding substitution of names, given as a total
    /// map over the universe.
    pub fn subst(&self, u: &Universe, map: &[Name]) -> Result<PiTerm> {
        let at = |n: Name| map[n.index()];
        Ok(match self {
            PiTerm::Nil => PiTerm::Nil,
            PiTerm::Tau(p) => PiTerm::Tau(Box::new(p.subst(u, map)?)),
            PiTerm::Out(a, b, p) => PiTerm::Out(at(*a), at(*b), Box::new(p.subst(u, map)?)),
            PiTerm::Match(a, b, p) => PiTerm::Match(at(*a), at(*b), Box::new(p.subst(u, map)?)),
            PiTerm::Sum(items) => PiTerm::Sum(
                items.iter().map(|t| t.subst(u, map)).collect::<Result<_>>()?,
            ),
            PiTerm::Par(items) => PiTerm::Par(
                items.iter().map(|t| t.subst(u, map)).collect::<Result<_>>()?,
            ),
            PiTerm::In(a, x, p) => {
                let (x2, p2) = subst_under_binder(u, *x, p, map)?;
                PiTerm::In(at(*a), x2, Box::new(p2))
            }
            PiTerm::Nu(x, p) => {
                let (x2, p2) = subst_under_binder(u, *x, p, map)?;
                PiTerm::Nu(x2, Box::new(p2))
            }
            PiTerm::Rep(n, p) => PiTerm::Rep(*n, Box::new(p.subst(u, map)?)),
        })
    }

    /// Rename the free occurrences of a single name.
    pub fn rename(&self, u: &Universe, from: Name, to: Name) -> Result<PiTerm> {
        let mut map: Vec<Name> = u.names().collect();
        map[from.index()] = to;
        self.subst(u, &map)
    }

    pub fn permute(&self, u: &Universe, p: &Perm) -> Result<PiTerm> {
        let map: Vec<Name> = u.names().map(|n| p.apply(n)).collect();
        self.subst(u, &map)
    }

    /// Structural-congruence normal form with canonical bound names.
    pub fn normalize(&self, u: &Universe) -> Result<PiTerm> {
        Ok(match self {
            PiTerm::Nil => PiTerm::Nil,
            PiTerm::Tau(p) => PiTerm::Tau(Box::new(p.normalize(u)?)),
            PiTerm::Out(a, b, p) => PiTerm::Out(*a, *b, Box::new(p.normalize(u)?)),
            PiTerm::Match(a, b, p) => {
                let p = p.normalize(u)?;
                if a == b {
                    p
                } else if p == PiTerm::Nil {
                    PiTerm::Nil
                } else {
                    PiTerm::Match(*a, *b, Box::new(p))
                }
            }
            PiTerm::Sum(items) => {
                let mut out = Vec::new();
                for t in items {
                    match t.normalize(u)? {
                        PiTerm::Nil => {}
                        PiTerm::Sum(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                match out.len() {
                    0 => PiTerm::Nil,
                    1 => out.pop().expect("len checked"),
                    _ => PiTerm::Sum(out),
                }
            }
            PiTerm::Par(items) => {
                let mut out = Vec::new();
                for t in items {
                    match t.normalize(u)? {
                        PiTerm::Nil => {}
                        PiTerm::Par(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                match out.len() {
                    0 => PiTerm::Nil,
                    1 => out.pop().expect("len checked"),
                    _ => PiTerm::Par(out),
                }
            }
            PiTerm::In(a, x, p) => {
                let p = p.normalize(u)?;
                let mut avoid = p.free_names();
                avoid.remove(*x);
                avoid.insert(*a);
                let canonical = u.fresh(avoid, u.sort_of(*x))?;
                let body = p.rename(u, *x, canonical)?.normalize(u)?;
                PiTerm::In(*a, canonical, Box::new(body))
            }
            PiTerm::Nu(x, p) => {
                let p = p.normalize(u)?;
                if p == PiTerm::Nil {
                    return Ok(PiTerm::Nil);
                }
                if !p.free_names().contains(*x) {
                    return Ok(p);
                }
                let mut avoid = p.free_names();
                avoid.remove(*x);
                let canonical = u.fresh(avoid, u.sort_of(*x))?;
                let body = p.rename(u, *x, canonical)?.normalize(u)?;
                PiTerm::Nu(canonical, Box::new(body))
            }
            PiTerm::Rep(n, p) => {
                let p = p.normalize(u)?;
                if *n == 0 || p == PiTerm::Nil {
                    PiTerm::Nil
                } else {
                    PiTerm::Rep(*n, Box::new(p))
                }
            }
        })
    }
}

fn subst_under_binder(
    u: &Universe,
    x: Name,
    body: &PiTerm,
    map: &[Name],
) -> Result<(Name, PiTerm)> {
    let mut body_free = body.free_names();
    body_free.remove(x);
    let image: NameSet = body_free.iter().map(|n| map[n.index()]).collect();
    let (x2, body2) = if image.contains(x) {
        let avoid = image.union(body.free_names());
        let fresh = u.fresh(avoid, u.sort_of(x))?;
        (fresh, body.rename(u, x, fresh)?)
    } else {
        (x, body.clone())
    };
    let mut inner: Vec<Name> = map.to_vec();
    inner[x2.index()] = x2;
    Ok((x2, body2.subst(u, &inner)?))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum PiAct {
    Tau,
    /// Free output `a<b>`.
    Out(Name, Name),
    /// Early free input `a b` (the received name is part of the label).
    FreeIn(Name, Name),
    /// Late input `a(x)`; the placeholder binds into the target.
    LateIn(Name, Name),
    /// Bound output `a(nu x)`; the extruded name binds into the target.
    BOut(Name, Name),
}

impl PiAct {
    fn binder(&self) -> Option<Name> {
        match self {
            PiAct::LateIn(_, x) | PiAct::BOut(_, x) => Some(*x),
            _ => None,
        }
    }

    fn mentions(&self, n: Name) -> bool {
        match self {
            PiAct::Tau => false,
            PiAct::Out(a, b) | PiAct::FreeIn(a, b) | PiAct::LateIn(a, b) | PiAct::BOut(a, b) => {
                *a == n || *b == n
            }
        }
    }
}

/// Strong transitions of a term under the chosen semantics, deduplicated up
/// to alpha by renaming binding objects to the least fresh name.
pub fn transitions(t: &PiTerm, u: &Universe, sem: Semantics) -> Result<Vec<(PiAct, PiTerm)>> {
    let mut raw = Vec::new();
    step(t, u, sem, &mut raw)?;
    let mut out = Vec::with_capacity(raw.len());
    for (act, target) in raw {
        match act.binder() {
            Some(z) => {
                let mut free = target.free_names();
                free.remove(z);
                free = free.union(act_free(&act));
                let canonical = u.fresh(free, u.sort_of(z))?;
                out.push((rebind(&act, canonical), target.rename(u, z, canonical)?));
            }
            None => out.push((act, target)),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn step(t: &PiTerm, u: &Universe, sem: Semantics, out: &mut Vec<(PiAct, PiTerm)>) -> Result<()> {
    match t {
        PiTerm::Nil => {}
        PiTerm::Tau(p) => out.push((PiAct::Tau, (**p).clone())),
        PiTerm::Out(a, b, p) => out.push((PiAct::Out(*a, *b), (**p).clone())),
        PiTerm::In(a, x, p) => match sem {
            Semantics::Early => {
                for v in u.names() {
                    let target = p.rename(u, *x, v)?;
                    out.push((PiAct::FreeIn(*a, v), target));
                }
            }
            Semantics::Late => out.push((PiAct::LateIn(*a, *x), (**p).clone())),
        },
        PiTerm::Match(a, b, p) => {
            if a == b {
                step(p, u, sem, out)?;
            }
        }
        PiTerm::Sum(items) => {
            for item in items {
                step(item, u, sem, out)?;
            }
        }
        PiTerm::Par(items) => par_step(items, u, sem, out)?,
        PiTerm::Nu(x, p) => nu_step(*x, p, u, sem, out)?,
        PiTerm::Rep(n, p) => {
            if *n > 0 {
                let unfolded =
                    PiTerm::Par(vec![(**p).clone(), PiTerm::Rep(n - 1, p.clone())]);
                step(&unfolded, u, sem, out)?;
            }
        }
    }
    Ok(())
}

fn par_step(
    items: &[PiTerm],
    u: &Universe,
    sem: Semantics,
    out: &mut Vec<(PiAct, PiTerm)>,
) -> Result<()> {
    let others_free = |skip: usize| -> NameSet {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .fold(NameSet::empty(), |acc, (_, t)| acc.union(t.free_names()))
    };
    let per_child: Vec<Vec<(PiAct, PiTerm)>> = items
        .iter()
        .map(|item| transitions(item, u, sem))
        .collect::<Result<_>>()?;

    // Interleaving, with bound names converted away from the bystanders.
    for (i, steps) in per_child.iter().enumerate() {
        for (act, p2) in steps {
            let (act, p2) = match act.binder() {
                Some(z) if others_free(i).contains(z) => {
                    let avoid = others_free(i)
                        .union(p2.free_names())
                        .union(act_free(act));
                    let fresh = u.fresh(avoid, u.sort_of(z))?;
                    (rebind(act, fresh), p2.rename(u, z, fresh)?)
                }
                _ => (*act, p2.clone()),
            };
            let mut rest = items.to_vec();
            rest[i] = p2;
            out.push((act, PiTerm::Par(rest)));
        }
    }

    // Communication.
    for i in 0..items.len() {
        for j in 0..items.len() {
            if i == j {
                continue;
            }
            for (ai, pi) in &per_child[i] {
                let PiAct::Out(a, b) = ai else { continue };
                match sem {
                    Semantics::Early => {
                        for (aj, pj) in &per_child[j] {
                            if *aj == PiAct::FreeIn(*a, *b) {
                                let mut rest = items.to_vec();
                                rest[i] = pi.clone();
                                rest[j] = pj.clone();
                                out.push((PiAct::Tau, PiTerm::Par(rest)));
                            }
                        }
                    }
                    Semantics::Late => {
                        for (aj, pj) in &per_child[j] {
                            if let PiAct::LateIn(c, x) = aj {
                                if c == a {
                                    let mut rest = items.to_vec();
                                    rest[i] = pi.clone();
                                    rest[j] = pj.rename(u, *x, *b)?;
                                    out.push((PiAct::Tau, PiTerm::Par(rest)));
                                }
                            }
                        }
                    }
                }
            }
            // Scope closure: bound output met by an input.
            for (ai, pi) in &per_child[i] {
                let PiAct::BOut(a, z) = ai else { continue };
                let avoid = items
                    .iter()
                    .fold(NameSet::empty(), |acc, t| acc.union(t.free_names()))
                    .union(pi.free_names())
                    .union(NameSet::singleton(*a));
                let fresh = u.fresh(avoid, u.sort_of(*z))?;
                let pi_fresh = pi.rename(u, *z, fresh)?;
                match sem {
                    Semantics::Early => {
                        for (aj, pj) in &per_child[j] {
                            if *aj == PiAct::FreeIn(*a, fresh) {
                                let mut rest = items.to_vec();
                                rest[i] = pi_fresh.clone();
                                rest[j] = pj.clone();
                                out.push((PiAct::Tau, PiTerm::Nu(fresh, Box::new(PiTerm::Par(rest)))));
                            }
                        }
                    }
                    Semantics::Late => {
                        for (aj, pj) in &per_child[j] {
                            if let PiAct::LateIn(c, x) = aj {
                                if c == a {
                                    let mut rest = items.to_vec();
                                    rest[i] = pi_fresh.clone();
                                    rest[j] = pj.rename(u, *x, fresh)?;
                                    out.push((
                                        PiAct::Tau,
                                        PiTerm::Nu(fresh, Box::new(PiTerm::Par(rest))),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn act_free(act: &PiAct) -> NameSet {
    match act {
        PiAct::Tau => NameSet::empty(),
        PiAct::Out(a, b) | PiAct::FreeIn(a, b) => [*a, *b].into_iter().collect(),
        PiAct::LateIn(a, _) | PiAct::BOut(a, _) => NameSet::singleton(*a),
    }
}

fn rebind(act: &PiAct, fresh: Name) -> PiAct {
    match act {
        PiAct::LateIn(a, _) => PiAct::LateIn(*a, fresh),
        PiAct::BOut(a, _) => PiAct::BOut(*a, fresh),
        other => *other,
    }
}

/// Transitions of a restriction: the union over every fresh choice of the
/// bound name, so that inputs may still receive any universe name.
fn nu_step(
    x: Name,
    p: &PiTerm,
    u: &Universe,
    sem: Semantics,
    out: &mut Vec<(PiAct, PiTerm)>,
) -> Result<()> {
    let outer_free = {
        let mut s = p.free_names();
        s.remove(x);
        s
    };
    for z in u.names_of_sort(u.sort_of(x)) {
        if outer_free.contains(z) {
            continue;
        }
        let body = p.rename(u, x, z)?;
        for (act, p2) in transitions(&body, u, sem)? {
            // Actions whose subject or free object is the bound name stay
            // internal, except that a free output of it opens the scope.
            match act {
                PiAct::Out(a, b) if b == z && a != z => {
                    out.push((PiAct::BOut(a, z), p2.clone()));
                    continue;
                }
                _ => {}
            }
            if let Some(bound) = act.binder() {
                if bound == z {
                    // The inner binder clashes with the restricted name;
                    // move it out of the way.
                    let avoid = p2
                        .free_names()
                        .union(act_free(&act))
                        .union(NameSet::singleton(z));
                    let fresh = u.fresh(avoid, u.sort_of(bound))?;
                    let act2 = rebind(&act, fresh);
                    let p3 = p2.rename(u, bound, fresh)?;
                    if !act2.mentions(z) {
                        out.push((act2, PiTerm::Nu(z, Box::new(p3))));
                    }
                    continue;
                }
            }
            if !act.mentions(z) {
                out.push((act, PiTerm::Nu(z, Box::new(p2))));
            }
        }
    }
    Ok(())
}

/// Exploration bounds.
#[derive(Clone, Copy, Debug)]
pub struct GenBudget {
    pub max_states: usize,
}

impl Default for GenBudget {
    fn default() -> Self {
        GenBudget { max_states: 512 }
    }
}

pub struct Generated {
    pub nts: Nts,
    /// One state per requested root term, in order.
    pub roots: Vec<StateId>,
    pub truncated: Vec<StateId>,
    pub terms: Vec<PiTerm>,
    pub semantics: Semantics,
}

impl Generated {
    pub fn root(&self) -> StateId {
        self.roots[0]
    }
}

struct ActCtors {
    tau: ActCtorId,
    out: ActCtorId,
    free_in: Option<ActCtorId>,
    late_in: Option<ActCtorId>,
    bout: ActCtorId,
}

fn declare_actions(b: &mut NtsBuilder, sem: Semantics) -> Result<ActCtors> {
    let tau = b.add_act(ActDecl { name: "tau".into(), arg_sorts: vec![], binding: vec![] })?;
    let out = b.add_act(ActDecl {
        name: "out".into(),
        arg_sorts: vec![Sort(0), Sort(0)],
        binding: vec![false, false],
    })?;
    let free_in = match sem {
        Semantics::Early => Some(b.add_act(ActDecl {
            name: "in".into(),
            arg_sorts: vec![Sort(0), Sort(0)],
            binding: vec![false, false],
        })?),
        Semantics::Late => None,
    };
    let late_in = match sem {
        Semantics::Late => Some(b.add_act(ActDecl {
            name: "lin".into(),
            arg_sorts: vec![Sort(0), Sort(0)],
            binding: vec![false, true],
        })?),
        Semantics::Early => None,
    };
    let bout = b.add_act(ActDecl {
        name: "bout".into(),
        arg_sorts: vec![Sort(0), Sort(0)],
        binding: vec![false, true],
    })?;
    Ok(ActCtors { tau, out, free_in, late_in, bout })
}

fn to_label(ctors: &ActCtors, act: &PiAct) -> ActLabel {
    match act {
        PiAct::Tau => ActLabel::new(ctors.tau, vec![]),
        PiAct::Out(a, b) => ActLabel::new(ctors.out, vec![*a, *b]),
        PiAct::FreeIn(a, b) => ActLabel::new(ctors.free_in.expect("early"), vec![*a, *b]),
        PiAct::LateIn(a, x) => ActLabel::new(ctors.late_in.expect("late"), vec![*a, *x]),
        PiAct::BOut(a, x) => ActLabel::new(ctors.bout, vec![*a, *x]),
    }
}

/// Explore the state space from a single root.
pub fn generate(
    term: &PiTerm,
    u: &Universe,
    sem: Semantics,
    budget: GenBudget,
    substs: &[Vec<Name>],
) -> Result<Generated> {
    generate_many(std::slice::from_ref(term), u, sem, budget, substs)
}

/// Explore the joint state space of several root terms, whole orbits at a
/// time, closing the state set under the given substitutions so they become
/// total effects.
pub fn generate_many(
    roots: &[PiTerm],
    u: &Universe,
    sem: Semantics,
    budget: GenBudget,
    substs: &[Vec<Name>],
) -> Result<Generated> {
    let mut terms: Vec<PiTerm> = Vec::new();
    let mut index: BTreeMap<PiTerm, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, PiAct, usize)> = Vec::new();
    fn intern(t: PiTerm, terms: &mut Vec<PiTerm>, index: &mut BTreeMap<PiTerm, usize>) -> usize {
        if let Some(i) = index.get(&t) {
            return *i;
        }
        terms.push(t.clone());
        index.insert(t, terms.len() - 1);
        terms.len() - 1
    }

    let mut root_ids = Vec::with_capacity(roots.len());
    for term in roots {
        let root_term = term.normalize(u)?;
        root_ids.push(intern(root_term, &mut terms, &mut index));
    }
    let mut expanded: BTreeSet<usize> = BTreeSet::new();

    loop {
        let Some(seed) = (0..terms.len()).find(|i| !expanded.contains(i)) else { break };
        let mut orbit = BTreeSet::from([seed]);
        let mut work = vec![seed];
        while let Some(cur) = work.pop() {
            for t in u.transpositions() {
                let img_term = terms[cur].permute(u, &t)?.normalize(u)?;
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
            for (a, target) in transitions(&terms[s], u, sem)? {
                let target = target.normalize(u)?;
                let id = intern(target, &mut terms, &mut index);
                edges.push((s, a, id));
            }
            for sigma in substs {
                let img = terms[s].subst(u, sigma)?.normalize(u)?;
                intern(img, &mut terms, &mut index);
            }
        }
        if terms.len() > budget.max_states {
            break;
        }
    }

    // Totality closure: every state keeps its transposition and substitution
    // images in the system (frontier states stay transition-free).
    let mut i = 0;
    while i < terms.len() {
        for t in u.transpositions() {
            let img = terms[i].permute(u, &t)?.normalize(u)?;
            intern(img, &mut terms, &mut index);
        }
        for sigma in substs {
            let img = terms[i].subst(u, sigma)?.normalize(u)?;
            intern(img, &mut terms, &mut index);
        }
        i += 1;
    }

    let mut b = NtsBuilder::new(u.clone());
    let ctors = declare_actions(&mut b, sem)?;
    for t in terms.iter() {
        b.add_state(print_term(t, u), t.free_names())?;
    }
    for (s, a, q) in &edges {
        b.add_trans(StateId(*s as u32), to_label(&ctors, a), StateId(*q as u32));
    }
    for tr in u.transpositions() {
        let (x, y) = tr.as_transpositions()[0];
        for (i, t) in terms.iter().enumerate() {
            let img_term = t.permute(u, &tr)?.normalize(u)?;
            let img = index[&img_term];
            if img != i {
                b.set_state_perm(x, y, StateId(i as u32), StateId(img as u32))?;
            }
        }
    }
    let nts = b.build()?;
    let truncated: Vec<StateId> = (0..terms.len())
        .filter(|i| !expanded.contains(i))
        .map(|i| StateId(i as u32))
        .collect();
    Ok(Generated {
        nts,
        roots: root_ids.into_iter().map(|i| StateId(i as u32)).collect(),
        truncated,
        terms,
        semantics: sem,
    })
}

pub fn print_term(t: &PiTerm, u: &Universe) -> String {
    match t {
        PiTerm::Nil => "0".into(),
        PiTerm::Tau(p) => format!("tau.{}", print_atom(p, u)),
        PiTerm::Out(a, b, p) => format!("{}<{}>.{}", u.label(*a), u.label(*b), print_atom(p, u)),
        PiTerm::In(a, x, p) => format!("{}({}).{}", u.label(*a), u.label(*x), print_atom(p, u)),
        PiTerm::Match(a, b, p) => format!("[{}={}]{}", u.label(*a), u.label(*b), print_atom(p, u)),
        PiTerm::Sum(items) => items
            .iter()
            .map(|t| print_atom(t, u))
            .collect::<Vec<_>>()
            .join(" + "),
        PiTerm::Par(items) => items
            .iter()
            .map(|t| print_atom(t, u))
            .collect::<Vec<_>>()
            .join(" | "),
        PiTerm::Nu(x, p) => format!("new {}. {}", u.label(*x), print_atom(p, u)),
        PiTerm::Rep(n, p) => format!("!{n}.{}", print_atom(p, u)),
    }
}

fn print_atom(t: &PiTerm, u: &Universe) -> String {
    match t {
        PiTerm::Sum(_) | PiTerm::Par(_) => format!("({})", print_term(t, u)),
        _ => print_term(t, u),
    }
}

/// Which substitution effects to close the system under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffectSpec {
    /// Just the identity.
    Identity,
    /// The identity and every single-name substitution `{x := n}`.
    Singles,
    /// Every substitution moving at most `max_moved` names.
    All { max_moved: usize },
}

/// Enumerate the substitution vectors for a spec; always includes the
/// identity and is closed under conjugation by universe permutations.
pub fn substitution_vectors(u: &Universe, spec: EffectSpec) -> Vec<Vec<Name>> {
    let identity: Vec<Name> = u.names().collect();
    let mut out = vec![identity.clone()];
    match spec {
        EffectSpec::Identity => {}
        EffectSpec::Singles => {
            for x in u.names() {
                for n in u.names_of_sort(u.sort_of(x)) {
                    if n != x {
                        let mut v = identity.clone();
                        v[x.index()] = n;
                        out.push(v);
                    }
                }
            }
        }
        EffectSpec::All { max_moved } => {
            let names: Vec<Name> = u.names().collect();
            let mut stack = vec![(identity.clone(), 0usize, 0usize)];
            while let Some((vec, idx, moved)) = stack.pop() {
                if idx == names.len() {
                    if moved > 0 {
                        out.push(vec);
                    }
                    continue;
                }
                let x = names[idx];
                // Leave x in place.
                stack.push((vec.clone(), idx + 1, moved));
                if moved < max_moved {
                    for n in u.names_of_sort(u.sort_of(x)) {
                        if n != x {
                            let mut v = vec.clone();
                            v[x.index()] = n;
                            stack.push((v, idx + 1, moved + 1));
                        }
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Effects and standard effect tables for a generated pi system.
pub struct PiEffects {
    pub registry: EffectRegistry,
    /// `{id}`.
    pub id_table: TableId,
    /// All registered substitutions.
    pub full_table: TableId,
    /// `subst_x` per universe name.
    pub subst_tables: BTreeMap<Name, TableId>,
    /// The empty distinction (open instance); equal to `full_table` in
    /// membership but carrying distinction structure.
    pub d0_table: TableId,
}

/// Realise the substitution vectors as total state maps over the generated
/// system and build the standard effect tables.
pub fn substitution_effects(gen: &Generated, substs: &[Vec<Name>]) -> Result<PiEffects> {
    let u = gen.nts.universe();
    let mut registry = EffectRegistry::default();
    let mut ids: Vec<crate::effects::EffectId> = Vec::new();
    for sigma in substs {
        let mut map = Vec::with_capacity(gen.terms.len());
        for t in &gen.terms {
            let img = t.subst(u, sigma)?.normalize(u)?;
            let id = gen
                .terms
                .iter()
                .position(|x| *x == img)
                .ok_or_else(|| Error::Invalid(
                    "system not closed under its substitution effects; regenerate with them".into(),
                ))?;
            map.push(StateId(id as u32));
        }
        let name = subst_name(u, sigma);
        ids.push(registry.add_effect(Effect::with_subst(name, map, sigma.clone())));
    }
    let id_eff = registry.identity(&gen.nts);
    let id_table = registry.add_table(EffectTable {
        name: "id".into(),
        members: [id_eff].into(),
        distinction: None,
    });
    let full_table = registry.add_table(EffectTable {
        name: "subst".into(),
        members: ids.iter().copied().collect(),
        distinction: None,
    });
    let mut subst_tables = BTreeMap::new();
    for x in u.names() {
        let members: BTreeSet<crate::effects::EffectId> = ids
            .iter()
            .copied()
            .filter(|f|

                registry
                    .effect(*f)
                    .subst
                    .as_ref()
                    .is_some_and(|s| s.iter().enumerate().all(|(i, n)| i == x.index() || n.index() == i)))
            .collect();
        let table = registry.add_table(EffectTable {
            name: format!("subst_{}", u.label(x)),
            members,
            distinction: None,
        });
        subst_tables.insert(x, table);
    }
    let d0_table = registry.intern_distinction(crate::effects::Distinction::empty());
    Ok(PiEffects { registry, id_table, full_table, subst_tables, d0_table })
}

fn subst_name(u: &Universe, sigma: &[Name]) -> String {
    let moved: Vec<String> = sigma
        .iter()
        .enumerate()
        .filter(|(i, n)| n.index() != *i)
        .map(|(i, n)| format!("{}:={}", u.label(Name(i as u8)), u.label(*n)))
        .collect();
    if moved.is_empty() {
        "id".into()
    } else {
        format!("{{{}}}", moved.join(","))
    }
}

/// The early instance: no effects before or after transitions.
pub fn l_early(pe: &PiEffects) -> LFunction {
    LFunction { name: "LE".into(), rule: LRule::Constant(pe.id_table) }
}

/// The hyper instance: every substitution at every step.
pub fn l_hyper(pe: &PiEffects) -> LFunction {
    LFunction { name: "LH".into(), rule: LRule::Constant(pe.full_table) }
}

/// The late instance: after an input `a(x)`, all substitutions for `x`.
pub fn l_late(gen: &Generated, pe: &PiEffects) -> Result<LFunction> {
    let u = gen.nts.universe();
    let lin = gen.nts.lookup_act("lin")?;
    let mut map = BTreeMap::new();
    for a in u.names() {
        for x in u.names() {
            if a != x {
                map.insert(ActLabel::new(lin, vec![a, x]), pe.subst_tables[&x]);
            }
        }
    }
    Ok(LFunction { name: "LL".into(), rule: LRule::ByAction { map, default: pe.id_table } })
}

/// The open instance: distinction arithmetic over the action shape.
pub fn l_open(gen: &Generated) -> Result<LFunction> {
    let bout = gen.nts.lookup_act("bout")?;
    let lin = gen.nts.lookup_act("lin")?;
    Ok(LFunction { name: "LO".into(), rule: LRule::Open { bound_out: bout, input: lin } })
}

/// A parsed pi program (a single expression over raw identifiers).
#[derive(Clone, Debug)]
pub enum Expr {
    Nil,
    Tau(Box<Expr>),
    Out(String, String, Box<Expr>),
    In(String, String, Box<Expr>),
    Match(String, String, Box<Expr>),
    Sum(Box<Expr>, Box<Expr>),
    Par(Box<Expr>, Box<Expr>),
    Nu(String, Box<Expr>),
    Rep(u32, Box<Expr>),
}

impl Expr {
    pub fn mentioned_names(&self) -> BTreeSet<String> {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            match e {
                Expr::Nil => {}
                Expr::Tau(p) | Expr::Rep(_, p) => walk(p, out),
                Expr::Out(a, b, p) | Expr::In(a, b, p) | Expr::Match(a, b, p) => {
                    out.insert(a.clone());
                    out.insert(b.clone());
                    walk(p, out);
                }
                Expr::Sum(l, r) | Expr::Par(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Nu(x, p) => {
                    out.insert(x.clone());
                    walk(p, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut out);
        out
    }

    pub fn resolve(&self, u: &Universe) -> Result<PiTerm> {
        let name = |n: &str| {
            u.lookup(n)
                .ok_or_else(|| Error::Universe(format!("name `{n}` is not in the universe")))
        };
        Ok(match self {
            Expr::Nil => PiTerm::Nil,
            Expr::Tau(p) => PiTerm::Tau(Box::new(p.resolve(u)?)),
            Expr::Out(a, b, p) => PiTerm::Out(name(a)?, name(b)?, Box::new(p.resolve(u)?)),
            Expr::In(a, x, p) => PiTerm::In(name(a)?, name(x)?, Box::new(p.resolve(u)?)),
            Expr::Match(a, b, p) => PiTerm::Match(name(a)?, name(b)?, Box::new(p.resolve(u)?)),
            Expr::Sum(l, r) => PiTerm::Sum(vec![l.resolve(u)?, r.resolve(u)?]),
            Expr::Par(l, r) => PiTerm::Par(vec![l.resolve(u)?, r.resolve(u)?]),
            Expr::Nu(x, p) => PiTerm::Nu(name(x)?, Box::new(p.resolve(u)?)),
            Expr::Rep(n, p) => PiTerm::Rep(*n, Box::new(p.resolve(u)?)),
        })
    }
}

/// Parse a `.pi` source file (one process expression; `#` comments).
pub fn parse_pi(src: &str) -> Result<Expr> {
    let mut p = PiParser::new(src)?;
    let e = p.parse_sum()?;
    if p.current != PTok::Eof {
        return p.error(format!("trailing input at {:?}", p.current));
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq)]
enum PTok {
    Ident(String),
    Num(u32),
    Dot,
    Plus,
    Bar,
    Bang,
    LParen,
    RParen,
    LAngle,
    RAngle,
    LBrack,
    RBrack,
    Eq,
    Zero,
    Eof,
}

struct PiParser<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
    current: PTok,
}

impl<'a> PiParser<'a> {
    fn new(src: &'a str) -> Result<PiParser<'a>> {
        let mut p = PiParser { src, pos: 0, line: 1, col: 1, current: PTok::Eof };
        p.current = p.lex()?;
        Ok(p)
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

    fn lex(&mut self) -> Result<PTok> {
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
        let Some(c) = self.peek_char() else { return Ok(PTok::Eof) };
        Ok(match c {
            '.' => {
                self.bump();
                PTok::Dot
            }
            '+' => {
                self.bump();
                PTok::Plus
            }
            '|' => {
                self.bump();
                PTok::Bar
            }
            '!' => {
                self.bump();
                PTok::Bang
            }
            '(' => {
                self.bump();
                PTok::LParen
            }
            ')' => {
                self.bump();
                PTok::RParen
            }
            '<' => {
                self.bump();
                PTok::LAngle
            }
            '>' => {
                self.bump();
                PTok::RAngle
            }
            '[' => {
                self.bump();
                PTok::LBrack
            }
            ']' => {
                self.bump();
                PTok::RBrack
            }
            '=' => {
                self.bump();
                PTok::Eq
            }
            '0' => {
                self.bump();
                PTok::Zero
            }
            c if c.is_ascii_digit() => {
                let mut n = 0u32;
                while let Some(c) = self.peek_char() {
                    if let Some(d) = c.to_digit(10) {
                        n = n * 10 + d;
                        self.bump();
                    } else {
                        break;
                    }
                }
                PTok::Num(n)
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
                PTok::Ident(s)
            }
            other => return self.error(format!("unexpected character `{other}`")),
        })
    }

    fn advance(&mut self) -> Result<PTok> {
        let next = self.lex()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expect(&mut self, tok: PTok) -> Result<()> {
        if self.current == tok {
            self.advance()?;
            Ok(())
        } else {
            self.error(format!("expected {tok:?}, found {:?}", self.current))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.advance()? {
            PTok::Ident(s) => Ok(s),
            other => self.error(format!("expected a name, found {other:?}")),
        }
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut acc = self.parse_par()?;
        while self.current == PTok::Plus {
            self.advance()?;
            let rhs = self.parse_par()?;
            acc = Expr::Sum(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_par(&mut self) -> Result<Expr> {
        let mut acc = self.parse_prefix()?;
        while self.current == PTok::Bar {
            self.advance()?;
            let rhs = self.parse_prefix()?;
            acc = Expr::Par(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn parse_prefix(&mut self) -> Result<Expr> {
        match self.current.clone() {
            PTok::Zero => {
                self.advance()?;
                Ok(Expr::Nil)
            }
            PTok::LParen => {
                self.advance()?;
                let inner = self.parse_sum()?;
                self.expect(PTok::RParen)?;
                Ok(inner)
            }
            PTok::Bang => {
                self.advance()?;
                let PTok::Num(n) = self.advance()? else {
                    return self.error("expected a bound after `!` (bounded replication)");
                };
                self.expect(PTok::Dot)?;
                let body = self.parse_prefix()?;
                Ok(Expr::Rep(n, Box::new(body)))
            }
            PTok::LBrack => {
                self.advance()?;
                let a = self.ident()?;
                self.expect(PTok::Eq)?;
                let b = self.ident()?;
                self.expect(PTok::RBrack)?;
                let body = self.parse_prefix()?;
                Ok(Expr::Match(a, b, Box::new(body)))
            }
            PTok::Ident(name) => {
                if name == "new" {
                    self.advance()?;
                    let x = self.ident()?;
                    self.expect(PTok::Dot)?;
                    let body = self.parse_prefix()?;
                    return Ok(Expr::Nu(x, Box::new(body)));
                }
                if name == "tau" {
                    self.advance()?;
                    self.expect(PTok::Dot)?;
                    let body = self.parse_prefix()?;
                    return Ok(Expr::Tau(Box::new(body)));
                }
                self.advance()?;
                match self.current.clone() {
                    PTok::LAngle => {
                        self.advance()?;
                        let b = self.ident()?;
                        self.expect(PTok::RAngle)?;
                        self.expect(PTok::Dot)?;
                        let cont = self.parse_prefix()?;
                        Ok(Expr::Out(name, b, Box::new(cont)))
                    }
                    PTok::LParen => {
                        self.advance()?;
                        let x = self.ident()?;
                        self.expect(PTok::RParen)?;
                        self.expect(PTok::Dot)?;
                        let cont = self.parse_prefix()?;
                        Ok(Expr::In(name, x, Box::new(cont)))
                    }
                    other => self.error(format!(
                        "expected `<obj>` or `(var)` after channel `{name}`, found {other:?}"
                    )),
                }
            }
            other => self.error(format!("unexpected token {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u4() -> Universe {
        Universe::single_sorted(["a", "b", "c", "d"]).unwrap()
    }

    fn u6() -> Universe {
        Universe::single_sorted(["a", "b", "c", "d", "e", "f"]).unwrap()
    }

    fn term(src: &str, u: &Universe) -> PiTerm {
        parse_pi(src).unwrap().resolve(u).unwrap()
    }

    #[test]
    fn parses_the_constructs() {
        let u = u4();
        let t = term("a(b).b<c>.0 + new d. a<d>.0", &u);
        match t {
            PiTerm::Sum(_) => {}
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn early_input_enumerates_universe_names() {
        let u = u4();
        let t = term("a(b).0", &u).normalize(&u).unwrap();
        let steps = transitions(&t, &u, Semantics::Early).unwrap();
        assert_eq!(steps.len(), 4);
        assert!(steps.iter().all(|(a, _)| matches!(a, PiAct::FreeIn(_, _))));
    }

    #[test]
    fn late_input_is_a_single_binding_transition() {
        let u = u4();
        let t = term("a(b).0", &u).normalize(&u).unwrap();
        let steps = transitions(&t, &u, Semantics::Late).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(matches!(steps[0].0, PiAct::LateIn(_, _)));
    }

    #[test]
    fn bound_output_opens_the_scope() {
        let u = u4();
        let t = term("new b. a<b>.0", &u).normalize(&u).unwrap();
        let steps = transitions(&t, &u, Semantics::Early).unwrap();
        assert_eq!(steps.len(), 1);
        let PiAct::BOut(subj, _) = steps[0].0 else {
            panic!("expected a bound output, got {:?}", steps[0].0)
        };
        assert_eq!(subj, u.lookup("a").unwrap());
    }

    #[test]
    fn restriction_does_not_block_unrelated_inputs() {
        let u = u4();
        // The bound name is canonically renamed; inputs must still receive
        // every universe name.
        let t = term("new d. (a(b).d<a>.0)", &u).normalize(&u).unwrap();
        let steps = transitions(&t, &u, Semantics::Early).unwrap();
        let received: BTreeSet<Name> = steps
            .iter()
            .filter_map(|(a, _)| match a {
                PiAct::FreeIn(_, v) => Some(*v),
                _ => None,
            })
            .collect();
        assert_eq!(received.len(), 4, "{steps:?}");
    }

    #[test]
    fn communication_and_close() {
        let u = u4();
        let t = term("a<b>.0 | a(c).c<a>.0", &u).normalize(&u).unwrap();
        let steps = transitions(&t, &u, Semantics::Early).unwrap();
        assert!(steps.iter().any(|(a, _)| *a == PiAct::Tau));
        // Scope closure: new b. a<b>.0 | a(c).0 has a tau with restriction.
        let t2 = term("(new b. a<b>.0) | a(c).0", &u).normalize(&u).unwrap();
        let steps2 = transitions(&t2, &u, Semantics::Early).unwrap();
        assert!(steps2.iter().any(|(a, _)| *a == PiAct::Tau), "{steps2:?}");
    }

    #[test]
    fn early_system_generates_and_validates() {
        let u = u6();
        let t = term("a(b).b<a>.0", &u);
        let generated = generate(&t, &u, Semantics::Early, GenBudget::default(), &[]).unwrap();
        assert!(generated.truncated.is_empty());
        let report = generated.nts.validate();
        assert!(report.ok(), "{:?}", report.violations);
    }

    #[test]
    fn late_system_generates_and_validates() {
        let u = u6();
        let t = term("a(b).b<a>.0", &u);
        let substs = substitution_vectors(&u, EffectSpec::Singles);
        let generated = generate(&t, &u, Semantics::Late, GenBudget::default(), &substs).unwrap();
        assert!(generated.truncated.is_empty());
        let report = generated.nts.validate();
        assert!(report.ok(), "{:?}", report.violations);
        let pe = substitution_effects(&generated, &substs).unwrap();
        pe.registry.validate_equivariance(&generated.nts, None).unwrap();
    }

    #[test]
    fn identity_effect_maps_states_to_themselves() {
        let u = u4();
        let t = term("a<b>.0", &u);
        let substs = substitution_vectors(&u, EffectSpec::Identity);
        let generated = generate(&t, &u, Semantics::Early, GenBudget::default(), &substs).unwrap();
        let pe = substitution_effects(&generated, &substs).unwrap();
        let id_members: Vec<_> = pe.registry.table(pe.id_table).members.iter().copied().collect();
        assert_eq!(id_members.len(), 1);
        for s in generated.nts.states() {
            assert_eq!(pe.registry.effect(id_members[0]).apply(s), s);
        }
    }
}
