//! Names, permutations, support, freshness and name abstraction over a fixed
//! finite universe.
//!
//! Everything downstream works relative to a [`Universe`]: a finite list of
//! named atoms, each with a sort. Supports and orbits are computed by swap
//! tests against the universe, which is exact as long as the universe leaves
//! two spare names per sort (the sizing rule enforced by the system
//! validator).

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Sort tag of a name. Single-sorted universes use sort 0 throughout.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Sort(pub u8);

/// An atom: an index into the universe.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(pub u8);

impl Name {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Hard cap on universe size; [`NameSet`] is a bitmask over it.
pub const MAX_UNIVERSE: usize = 16;

/// The fixed finite name universe a system is loaded over.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Universe {
    labels: Vec<String>,
    sorts: Vec<Sort>,
    sort_labels: Vec<String>,
}

impl Universe {
    /// Universe with a single default sort.
    pub fn single_sorted<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Universe> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let sorts = vec![Sort(0); labels.len()];
        Universe::new(labels, sorts, vec!["name".to_string()])
    }

    pub fn new(labels: Vec<String>, sorts: Vec<Sort>, sort_labels: Vec<String>) -> Result<Universe> {
        if labels.len() > MAX_UNIVERSE {
            return Err(Error::Universe(format!(
                "universe has {} names, the maximum is {MAX_UNIVERSE}",
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Universe("universe must not be empty".into()));
        }
        if sorts.len() != labels.len() {
            return Err(Error::Universe("one sort per name required".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Universe(format!("duplicate universe name `{l}`")));
            }
        }
        for s in &sorts {
            if s.0 as usize >= sort_labels.len() {
                return Err(Error::Universe(format!("sort tag {} out of range", s.0)));
            }
        }
        Ok(Universe { labels, sorts, sort_labels })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn names(&self) -> impl Iterator<Item = Name> + '_ {
        (0..self.labels.len() as u8).map(Name)
    }

    pub fn all_names(&self) -> NameSet {
        let mut s = NameSet::empty();
        for n in self.names() {
            s.insert(n);
        }
        s
    }

    pub fn sort_of(&self, n: Name) -> Sort {
        self.sorts[n.index()]
    }

    pub fn label(&self, n: Name) -> &str {
        &self.labels[n.index()]
    }

    pub fn sort_label(&self, s: Sort) -> &str {
        &self.sort_labels[s.0 as usize]
    }

    pub fn sort_count(&self) -> usize {
        self.sort_labels.len()
    }

    pub fn lookup(&self, label: &str) -> Option<Name> {
        self.labels.iter().position(|l| l == label).map(|i| Name(i as u8))
    }

    pub fn lookup_sort(&self, label: &str) -> Option<Sort> {
        self.sort_labels.iter().position(|l| l == label).map(|i| Sort(i as u8))
    }

    pub fn names_of_sort(&self, s: Sort) -> impl Iterator<Item = Name> + '_ {
        self.names().filter(move |n| self.sort_of(*n) == s)
    }

    /// All same-sort transpositions `(a b)` with `a < b`.
    pub fn transpositions(&self) -> Vec<Perm> {
        let mut out = Vec::new();
        for a in self.names() {
            for b in self.names() {
                if a < b && self.sort_of(a) == self.sort_of(b) {
                    out.push(Perm::swap(self, a, b).expect("same sort"));
                }
            }
        }
        out
    }

    /// All sort-preserving permutations of the universe. Exponential in the
    /// universe size; callers guard with a size check.
    pub fn all_permutations(&self) -> Vec<Perm> {
        let mut out = vec![Perm::identity(self.size())];
        for s in 0..self.sort_count() {
            let names: Vec<Name> = self.names_of_sort(Sort(s as u8)).collect();
            let perms_of_sort = permutations_of(&names);
            let mut next = Vec::with_capacity(out.len() * perms_of_sort.len());
            for base in &out {
                for assignment in &perms_of_sort {
                    let mut map = base.map.clone();
                    for (from, to) in names.iter().zip(assignment) {
                        map[from.index()] = to.0;
                    }
                    next.push(Perm { map });
                }
            }
            out = next;
        }
        out
    }

    /// Least name of the given sort outside `avoid`.
    pub fn fresh(&self, avoid: NameSet, sort: Sort) -> Result<Name> {
        self.names_of_sort(sort)
            .find(|n| !avoid.contains(*n))
            .ok_or(Error::FreshnessExhausted { sort: self.sort_label(sort).to_string() })
    }
}

fn permutations_of(items: &[Name]) -> Vec<Vec<Name>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest: Vec<Name> = items.to_vec();
        rest.remove(i);
        for mut tail in permutations_of(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// A finite set of names, stored as a bitmask over the universe.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NameSet(pub u16);

impl NameSet {
    pub fn empty() -> NameSet {
        NameSet(0)
    }

    pub fn singleton(n: Name) -> NameSet {
        NameSet(1 << n.0)
    }

    pub fn insert(&mut self, n: Name) {
        self.0 |= 1 << n.0;
    }

    pub fn remove(&mut self, n: Name) {
        self.0 &= !(1 << n.0);
    }

    pub fn contains(self, n: Name) -> bool {
        self.0 & (1 << n.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: NameSet) -> NameSet {
        NameSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NameSet) -> NameSet {
        NameSet(self.0 & other.0)
    }

    pub fn difference(self, other: NameSet) -> NameSet {
        NameSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: NameSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Name> {
        (0..MAX_UNIVERSE as u8).map(Name).filter(move |n| self.contains(*n))
    }
}

impl FromIterator<Name> for NameSet {
    fn from_iter<I: IntoIterator<Item = Name>>(iter: I) -> NameSet {
        let mut s = NameSet::empty();
        for n in iter {
            s.insert(n);
        }
        s
    }
}

impl fmt::Debug for NameSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A sort-preserving bijection on the universe.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Perm {
    map: Vec<u8>,
}

impl Perm {
    pub fn identity(universe_size: usize) -> Perm {
        Perm { map: (0..universe_size as u8).collect() }
    }

    /// The transposition `(a b)`. Errors unless the names share a sort.
    pub fn swap(u: &Universe, a: Name, b: Name) -> Result<Perm> {
        if u.sort_of(a) != u.sort_of(b) {
            return Err(Error::Universe(format!(
                "cannot swap `{}` and `{}`: different sorts",
                u.label(a),
                u.label(b)
            )));
        }
        let mut p = Perm::identity(u.size());
        p.map[a.index()] = b.0;
        p.map[b.index()] = a.0;
        Ok(p)
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i as u8 == v)
    }

    pub fn apply(&self, n: Name) -> Name {
        Name(self.map[n.index()])
    }

    pub fn apply_set(&self, s: NameSet) -> NameSet {
        s.iter().map(|n| self.apply(n)).collect()
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Perm) -> Perm {
        let map = other.map.iter().map(|&v| self.map[v as usize]).collect();
        Perm { map }
    }

    pub fn inverse(&self) -> Perm {
        let mut map = vec![0u8; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            map[v as usize] = i as u8;
        }
        Perm { map }
    }

    /// Decomposition into transpositions, in application order: permuting a
    /// value by each pair in sequence (first element of the vector first)
    /// equals applying `self`.
    pub fn as_transpositions(&self) -> Vec<(Name, Name)> {
        let mut out = Vec::new();
        let mut seen = vec![false; self.map.len()];
        for start in 0..self.map.len() {
            if seen[start] || self.map[start] as usize == start {
                seen[start] = true;
                continue;
            }
            // Cycle (c0 c1 ... cm) becomes (c0 c1), (c0 c2), ..., (c0 cm).
            let mut cur = start;
            loop {
                seen[cur] = true;
                let next = self.map[cur] as usize;
                if next == start {
                    break;
                }
                out.push((Name(start as u8), Name(next as u8)));
                cur = next;
            }
        }
        out
    }

    /// True if the permutation fixes every name in `s`.
    pub fn fixes(&self, s: NameSet) -> bool {
        s.iter().all(|n| self.apply(n) == n)
    }
}

/// Values with a structural permutation action.
///
/// `occurring` must over-approximate the support (for datatype-like values:
/// exactly the names textually present); `visit_names` fixes the canonical
/// traversal order used when choosing binder representatives.
pub trait Nominal: Clone + Eq {
    fn permute(&self, p: &Perm) -> Self;

    fn visit_names(&self, f: &mut dyn FnMut(Name));

    fn occurring(&self) -> NameSet {
        let mut s = NameSet::empty();
        self.visit_names(&mut |n| s.insert(n));
        s
    }

    /// Minimal support, by the swap test: `a` is in the support iff some
    /// same-sort `b` outside the occurring names has `(a b)·x ≠ x`.
    fn support(&self, u: &Universe) -> NameSet {
        support_by(u, self.occurring(), self, |x, p| x.permute(p))
    }
}

/// Swap-test support computation against an explicit occurring set.
pub fn support_by<T: Eq>(
    u: &Universe,
    occurring: NameSet,
    x: &T,
    permute: impl Fn(&T, &Perm) -> T,
) -> NameSet {
    let mut supp = NameSet::empty();
    for a in occurring.iter() {
        let sort = u.sort_of(a);
        let moved = u
            .names_of_sort(sort)
            .filter(|b| *b != a && !occurring.contains(*b))
            .any(|b| {
                let sw = Perm::swap(u, a, b).expect("same sort");
                permute(x, &sw) != *x
            });
        if moved {
            supp.insert(a);
        }
    }
    supp
}

/// The orbit `{π·x | π fixes every name in fix}`, enumerated through
/// injective sort-preserving maps from `supp \ fix` into `universe \ fix`.
pub fn hull_by<T: Clone + Ord>(
    u: &Universe,
    fix: NameSet,
    x: &T,
    supp: NameSet,
    permute: impl Fn(&T, &Perm) -> T,
) -> BTreeSet<T> {
    let moving: Vec<Name> = supp.difference(fix).iter().collect();
    let mut out = BTreeSet::new();
    let mut targets: Vec<Name> = Vec::with_capacity(moving.len());
    enumerate_injections(u, fix, &moving, &mut targets, &mut |assignment| {
        let p = extend_to_permutation(u, fix, &moving, assignment);
        out.insert(permute(x, &p));
    });
    out
}

fn enumerate_injections(
    u: &Universe,
    fix: NameSet,
    moving: &[Name],
    chosen: &mut Vec<Name>,
    emit: &mut impl FnMut(&[Name]),
) {
    if chosen.len() == moving.len() {
        emit(chosen);
        return;
    }
    let next = moving[chosen.len()];
    for cand in u.names_of_sort(u.sort_of(next)) {
        if fix.contains(cand) || chosen.contains(&cand) {
            continue;
        }
        chosen.push(cand);
        enumerate_injections(u, fix, moving, chosen, emit);
        chosen.pop();
    }
}

/// Complete an injective map on `moving` to a permutation fixing `fix`.
/// Any completion acts identically on values supported by `fix ∪ moving`.
fn extend_to_permutation(u: &Universe, fix: NameSet, moving: &[Name], images: &[Name]) -> Perm {
    let mut map: Vec<Option<u8>> = vec![None; u.size()];
    for n in fix.iter() {
        map[n.index()] = Some(n.0);
    }
    for (from, to) in moving.iter().zip(images) {
        map[from.index()] = Some(to.0);
    }
    for s in 0..u.sort_count() {
        let sort = Sort(s as u8);
        let used: BTreeSet<u8> = u
            .names_of_sort(sort)
            .filter_map(|n| map[n.index()])
            .collect();
        let mut free = u.names_of_sort(sort).filter(|n| !used.contains(&n.0));
        for n in u.names_of_sort(sort) {
            if map[n.index()].is_none() {
                map[n.index()] = Some(free.next().expect("counting").0);
            }
        }
    }
    Perm { map: map.into_iter().map(|v| v.expect("total")).collect() }
}

/// Extend an injective sort-preserving map, given as parallel slices, to a
/// permutation of the universe.
pub fn injection_to_perm(u: &Universe, from: &[Name], to: &[Name]) -> Result<Perm> {
    if from.len() != to.len() {
        return Err(Error::Universe("injection with mismatched lengths".into()));
    }
    for (i, (f, t)) in from.iter().zip(to).enumerate() {
        if u.sort_of(*f) != u.sort_of(*t) {
            return Err(Error::Universe("injection does not preserve sorts".into()));
        }
        if from[..i].contains(f) || to[..i].contains(t) {
            return Err(Error::Universe("injection with repeated names".into()));
        }
    }
    Ok(extend_to_permutation(u, NameSet::empty(), from, to))
}

/// A binder renaming: canonical fresh targets for `binders`, ordered by first
/// occurrence in the given traversal, avoiding `avoid`. Binders absent from
/// the traversal come last in id order.
pub fn binder_renaming(
    u: &Universe,
    binders: NameSet,
    avoid: NameSet,
    visit: impl Fn(&mut dyn FnMut(Name)),
) -> Result<(Perm, NameSet)> {
    let mut ordered: Vec<Name> = Vec::new();
    visit(&mut |n| {
        if binders.contains(n) && !ordered.contains(&n) {
            ordered.push(n);
        }
    });
    for n in binders.iter() {
        if !ordered.contains(&n) {
            ordered.push(n);
        }
    }
    let mut p = Perm::identity(u.size());
    let mut taken = avoid;
    let mut new_binders = NameSet::empty();
    for b in &ordered {
        let target = u.fresh(taken, u.sort_of(*b))?;
        taken.insert(target);
        new_binders.insert(target);
        let current = p.apply(*b);
        if current != target {
            p = Perm::swap(u, current, target)?.compose(&p);
        }
    }
    Ok((p, new_binders))
}

/// A value with a finite set of names abstracted; equality is alpha.
///
/// Constructed values are kept in canonical form: binders renamed, in
/// traversal order, to the least universe names fresh for the support of the
/// abstraction.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Abstraction<T: Nominal> {
    binders: NameSet,
    body: T,
}

impl<T: Nominal> Abstraction<T> {
    pub fn new(u: &Universe, binders: NameSet, body: T) -> Result<Abstraction<T>> {
        Self::new_avoiding(u, binders, body, NameSet::empty())
    }

    /// Canonical form whose binders additionally avoid `avoid`.
    pub fn new_avoiding(u: &Universe, binders: NameSet, body: T, avoid: NameSet) -> Result<Abstraction<T>> {
        let supp = body.support(u).difference(binders);
        let (p, new_binders) =
            binder_renaming(u, binders, supp.union(avoid), |f| body.visit_names(f))?;
        Ok(Abstraction { binders: new_binders, body: body.permute(&p) })
    }

    pub fn binders(&self) -> NameSet {
        self.binders
    }

    pub fn body(&self) -> &T {
        &self.body
    }

    pub fn support(&self, u: &Universe) -> NameSet {
        self.body.support(u).difference(self.binders)
    }

    /// Re-canonicalise; the identity on values built by the constructors.
    pub fn canonical(&self, u: &Universe) -> Result<Abstraction<T>> {
        Abstraction::new(u, self.binders, self.body.clone())
    }

    /// An alpha-variant whose binders avoid `avoid` (least fresh choices).
    pub fn variant_avoiding(&self, u: &Universe, avoid: NameSet) -> Result<(NameSet, T)> {
        let supp = self.support(u);
        let (p, new_binders) =
            binder_renaming(u, self.binders, supp.union(avoid), |f| self.body.visit_names(f))?;
        Ok((new_binders, self.body.permute(&p)))
    }
}

impl<T: Nominal> Nominal for Abstraction<T> {
    fn permute(&self, p: &Perm) -> Self {
        // Structural action; the result is re-canonicalised lazily by users
        // holding a universe. For same-support canonical forms this is only
        // used transiently inside support computations.
        Abstraction { binders: p.apply_set(self.binders), body: self.body.permute(p) }
    }

    fn visit_names(&self, f: &mut dyn FnMut(Name)) {
        self.binders.iter().for_each(&mut *f);
        self.body.visit_names(f);
    }
}

impl Nominal for Name {
    fn permute(&self, p: &Perm) -> Self {
        p.apply(*self)
    }

    fn visit_names(&self, f: &mut dyn FnMut(Name)) {
        f(*self);
    }
}

impl Nominal for NameSet {
    fn permute(&self, p: &Perm) -> Self {
        p.apply_set(*self)
    }

    fn visit_names(&self, f: &mut dyn FnMut(Name)) {
        self.iter().for_each(&mut *f);
    }
}

impl<A: Nominal, B: Nominal> Nominal for (A, B) {
    fn permute(&self, p: &Perm) -> Self {
        (self.0.permute(p), self.1.permute(p))
    }

    fn visit_names(&self, f: &mut dyn FnMut(Name)) {
        self.0.visit_names(f);
        self.1.visit_names(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u6() -> Universe {
        Universe::single_sorted(["a", "b", "c", "x", "y", "z"]).unwrap()
    }

    fn name(u: &Universe, l: &str) -> Name {
        u.lookup(l).unwrap()
    }

    #[test]
    fn identity_and_composition_laws() {
        let u = u6();
        let a = name(&u, "a");
        let b = name(&u, "b");
        let c = name(&u, "c");
        let ab = Perm::swap(&u, a, b).unwrap();
        let bc = Perm::swap(&u, b, c).unwrap();
        let set: NameSet = [a, c].into_iter().collect();
        assert_eq!(set.permute(&Perm::identity(u.size())), set);
        assert_eq!(set.permute(&ab.compose(&bc)), set.permute(&bc).permute(&ab));
        assert_eq!(ab.compose(&ab.inverse()), Perm::identity(u.size()));
    }

    #[test]
    fn swap_rejects_cross_sort() {
        let u = Universe::new(
            vec!["a".into(), "x".into()],
            vec![Sort(0), Sort(1)],
            vec!["chan".into(), "var".into()],
        )
        .unwrap();
        assert!(Perm::swap(&u, Name(0), Name(1)).is_err());
    }

    #[test]
    fn transposition_decomposition_reconstructs() {
        let u = u6();
        for p in u.all_permutations() {
            let mut q = Perm::identity(u.size());
            for (a, b) in p.as_transpositions() {
                q = Perm::swap(&u, a, b).unwrap().compose(&q);
            }
            assert_eq!(q, p);
        }
    }

    #[test]
    fn support_of_whole_universe_is_empty() {
        let u = u6();
        let all = u.all_names();
        assert_eq!(all.support(&u), NameSet::empty());
    }

    #[test]
    fn support_of_single_name_is_itself() {
        let u = u6();
        let a = name(&u, "a");
        assert_eq!(a.support(&u), NameSet::singleton(a));
        assert_eq!(NameSet::singleton(a).support(&u), NameSet::singleton(a));
    }

    #[test]
    fn support_is_equivariant() {
        let u = u6();
        let set: NameSet = [name(&u, "a"), name(&u, "x")].into_iter().collect();
        for t in u.transpositions() {
            assert_eq!(set.permute(&t).support(&u), t.apply_set(set.support(&u)));
        }
    }

    #[test]
    fn fresh_is_least_unused() {
        let u = u6();
        assert_eq!(u.fresh(NameSet::empty(), Sort(0)).unwrap(), Name(0));
        let avoid: NameSet = [Name(0), Name(1)].into_iter().collect();
        assert_eq!(u.fresh(avoid, Sort(0)).unwrap(), Name(2));
        assert!(matches!(
            u.fresh(u.all_names(), Sort(0)),
            Err(Error::FreshnessExhausted { .. })
        ));
    }

    #[test]
    fn abstraction_identifies_alpha_variants() {
        let u = u6();
        let a = name(&u, "a");
        let x = name(&u, "x");
        let y = name(&u, "y");
        // [x](a, x) vs [y](a, y): pure renaming.
        let one = Abstraction::new(&u, NameSet::singleton(x), (a, x)).unwrap();
        let two = Abstraction::new(&u, NameSet::singleton(y), (a, y)).unwrap();
        assert_eq!(one, two);
        assert_eq!(one.support(&u), NameSet::singleton(a));
        // Binder unused in the body: still alpha-equal under renaming.
        let p = Abstraction::new(&u, NameSet::singleton(x), NameSet::singleton(a)).unwrap();
        let q = Abstraction::new(&u, NameSet::singleton(y), NameSet::singleton(a)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn abstraction_distinguishes_capture() {
        let u = u6();
        let a = name(&u, "a");
        let x = name(&u, "x");
        // [x](x, x) vs [x](a, x): not alpha-equal.
        let one = Abstraction::new(&u, NameSet::singleton(x), (x, x)).unwrap();
        let two = Abstraction::new(&u, NameSet::singleton(x), (a, x)).unwrap();
        assert_ne!(one, two);
    }

    #[test]
    fn canonical_is_idempotent_and_rename_invariant() {
        let u = u6();
        let a = name(&u, "a");
        let x = name(&u, "x");
        let abs = Abstraction::new(&u, NameSet::singleton(x), (a, x)).unwrap();
        assert_eq!(abs.canonical(&u).unwrap(), abs);
        for t in u.transpositions() {
            if t.fixes(abs.support(&u)) {
                let renamed = Abstraction::new(
                    &u,
                    t.apply_set(NameSet::singleton(x)),
                    (a, x).permute(&t),
                )
                .unwrap();
                assert_eq!(renamed, abs);
            }
        }
    }

    #[test]
    fn hull_fixing_support_is_singleton() {
        let u = u6();
        let set: NameSet = [name(&u, "a"), name(&u, "b")].into_iter().collect();
        let h = hull_by(&u, set, &set, set, |x, p| x.permute(p));
        assert_eq!(h.len(), 1);
        assert!(h.contains(&set));
    }

    #[test]
    fn hull_is_closed_under_fixing_permutations() {
        let u = u6();
        let a = name(&u, "a");
        let fix = NameSet::singleton(a);
        let pair = (a, name(&u, "x"));
        let supp = pair.support(&u);
        let h = hull_by(&u, fix, &pair, supp, |x, p| x.permute(p));
        // One element per choice of the moving name.
        assert_eq!(h.len(), 5);
        for p in u.all_permutations() {
            if p.fixes(fix) {
                for el in &h {
                    assert!(h.contains(&el.permute(&p)));
                }
            }
        }
    }
}
