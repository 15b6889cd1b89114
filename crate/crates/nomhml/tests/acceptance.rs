//! Acceptance suite: one test per shipped criterion. Each test prints a
//! single pass line (visible with `--nocapture`); a failing assertion marks
//! the criterion failed.

use std::collections::BTreeSet;

use nomhml::bisim::{
    self, characteristic_formula, distinguishing_formula, fl_bisim, fl_distinguishing_formula,
    is_fl_bisimulation, is_strong_bisimulation, is_weak_bisimulation, property_formula,
    strong_bisim, strong_bisim_oracle, weak_bisim, weak_characteristic_formula,
    weak_distinguishing_formula, weak_property_formula, Relation,
};
use nomhml::check::{
    check, check_ext_weak, check_fl, check_weak, check_weak_modality, encode_fixpoint_free,
    interp, interp_tarski, unroll, StateSet, Valuation, WeakClosure,
};
use nomhml::effects::TableId;
use nomhml::formula::syntax::{lower, lower_weak, parse};
use nomhml::formula::weak::WeakFormula;
use nomhml::formula::{self, Formula, VarId};
use nomhml::gen::{
    self, random_formula, random_graph, random_nts, random_weak_formula, rng_from_seed,
    FormulaConfig, SystemConfig,
};
use nomhml::nominal::{
    hull_by, support_by, Abstraction, Name, NameSet, Nominal, Perm, Sort, Universe,
};
use nomhml::nts::{format, ActLabel, Nts, StateId};
use nomhml::pi::{self, EffectSpec, Semantics};
use nomhml::transform::{delta, l_transform, s_transform};
use rand::Rng;

fn fixture(name: &str) -> Nts {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let nts = format::parse(&src).unwrap_or_else(|e| panic!("{path}: {e}"));
    let report = nts.validate();
    assert!(report.ok(), "{name}: {:?}", report.violations);
    nts
}

fn pi_fixture(name: &str, u: &Universe) -> pi::PiTerm {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    pi::parse_pi(&src).unwrap().resolve(u).unwrap()
}

fn state(nts: &Nts, name: &str) -> StateId {
    nts.lookup_state(name).unwrap()
}

fn weak_f(nts: &Nts, src: &str) -> WeakFormula {
    lower_weak(&parse(src).unwrap(), nts).unwrap()
}

fn strong_f(nts: &Nts, src: &str) -> Formula {
    lower(&parse(src).unwrap(), nts).unwrap()
}

/// Criterion 1: group-action, support-minimality and alpha-equivalence laws,
/// exhaustively over all transpositions of a 6-name universe, on at least
/// 500 generated values.
#[test]
fn criterion_1_nominal_kernel_laws() {
    let u = Universe::single_sorted(["a", "b", "c", "d", "e", "f"]).unwrap();
    let transpositions = u.transpositions();
    let mut rng = rng_from_seed(0xC0FFEE);
    let mut checked = 0usize;

    // Name sets.
    for _ in 0..200 {
        let set: NameSet = u.names().filter(|_| rng.gen_bool(0.5)).collect();
        laws(&u, &transpositions, &set);
        checked += 1;
    }
    // Action-like values: pairs of names with positional structure.
    for _ in 0..200 {
        let a = Name(rng.gen_range(0..6));
        let b = Name(rng.gen_range(0..6));
        laws(&u, &transpositions, &(a, b));
        checked += 1;
    }
    // Abstractions: one or two binders over a pair body.
    for _ in 0..150 {
        let a = Name(rng.gen_range(0..6));
        let b = Name(rng.gen_range(0..6));
        let binder: NameSet = [Name(rng.gen_range(0..6))].into_iter().collect();
        let abs = Abstraction::new(&u, binder, (a, b)).unwrap();
        laws(&u, &transpositions, &abs);
        // Alpha-equivalence: renaming the binder to any name fresh for the
        // support yields the same canonical value.
        let supp = abs.support(&u);
        for t in &transpositions {
            if t.fixes(supp) {
                let renamed =
                    Abstraction::new(&u, t.apply_set(abs.binders()), abs.body().permute(t)).unwrap();
                assert_eq!(renamed, abs);
            }
        }
        assert_eq!(abs.canonical(&u).unwrap(), abs);
        checked += 1;
    }
    assert!(checked >= 500, "only {checked} values generated");

    // Freshness and hull closure.
    for k in 0..6 {
        let avoid: NameSet = (0..k).map(Name).collect();
        let fresh = u.fresh(avoid, Sort(0)).unwrap();
        assert!(!avoid.contains(fresh));
        assert_eq!(fresh, Name(k));
    }
    let fix: NameSet = [Name(0)].into_iter().collect();
    let value = (Name(0), Name(3));
    let orbit = hull_by(&u, fix, &value, value.support(&u), |x, p| x.permute(p));
    for p in u.all_permutations() {
        if p.fixes(fix) {
            for el in &orbit {
                assert!(orbit.contains(&el.permute(&p)));
            }
        }
    }
    println!("acceptance: criterion 1 (nominal kernel laws) PASS ({checked} values)");
}

fn laws<T: Nominal + std::fmt::Debug>(u: &Universe, transpositions: &[Perm], x: &T) {
    assert_eq!(x.permute(&Perm::identity(u.size())), *x);
    for s in transpositions {
        for t in transpositions {
            assert_eq!(x.permute(&s.compose(t)), x.permute(t).permute(s), "composition on {x:?}");
        }
    }
    let supp = x.support(u);
    // Support correctness: transpositions outside the support fix the value.
    for t in transpositions {
        if t.fixes(supp) {
            assert_eq!(x.permute(t), *x, "support too small on {x:?}");
        }
    }
    // Minimality: every support member is moved by some swap with a name
    // outside the occurring set.
    let occ = x.occurring();
    for a in supp.iter() {
        let witness = u
            .names_of_sort(u.sort_of(a))
            .filter(|b| *b != a && !occ.contains(*b))
            .any(|b| x.permute(&Perm::swap(u, a, b).unwrap()) != *x);
        assert!(witness, "support not minimal at {a:?} on {x:?}");
    }
    // Equivariance of support.
    for t in transpositions {
        assert_eq!(x.permute(t).support(u), t.apply_set(supp));
    }
}

/// Criterion 2: the shipped fixtures reproduce every stated verdict.
#[test]
fn criterion_2_paper_fixtures() {
    // Example 1: weakly bisimilar, with the three-pair witness.
    let ex1 = fixture("ex1.nts");
    let wc = WeakClosure::new(&ex1);
    let wb = weak_bisim(&ex1, &wc).unwrap();
    let (p, q) = (state(&ex1, "P"), state(&ex1, "Q"));
    assert!(wb.relation.contains(p, q));
    let witness = Relation::from_pairs([(p, q), (q, q)]);
    assert_eq!(witness.len(), 3);
    assert!(is_weak_bisimulation(&ex1, &wc, &witness).unwrap());
    assert!(check_weak(&ex1, &wc, p, &weak_f(&ex1, "wmay<<tau>> pred(phi)")).unwrap());
    assert!(!check(&ex1, p, &strong_f(&ex1, "pred(phi)")).unwrap());
    assert!(check(&ex1, p, &strong_f(&ex1, "wmay<<tau>> pred(phi)")).unwrap());

    // Example 2: not weakly bisimilar; the reported formula separates.
    let ex2 = fixture("ex2.nts");
    let wc2 = WeakClosure::new(&ex2);
    let wb2 = weak_bisim(&ex2, &wc2).unwrap();
    let (p2, q2) = (state(&ex2, "P"), state(&ex2, "Q"));
    assert!(!wb2.relation.contains(p2, q2));
    let sep2 = weak_f(&ex2, "wmay<<tau>> and{wmay<<tau>> pred(phi0); pred(phi1)}");
    assert!(check_weak(&ex2, &wc2, p2, &sep2).unwrap());
    assert!(!check_weak(&ex2, &wc2, q2, &sep2).unwrap());
    let ours2 = weak_distinguishing_formula(&ex2, &wc2, &wb2, p2, q2).unwrap().unwrap();
    assert!(check_weak(&ex2, &wc2, p2, &ours2).unwrap());
    assert!(!check_weak(&ex2, &wc2, q2, &ours2).unwrap());
    // Strongly the pair already fails static implication.
    assert!(!strong_bisim(&ex2).unwrap().contains(p2, q2));

    // Example 3: not weakly bisimilar; the reported formula separates.
    let ex3 = fixture("ex3.nts");
    let wc3 = WeakClosure::new(&ex3);
    let wb3 = weak_bisim(&ex3, &wc3).unwrap();
    let (p3, q3) = (state(&ex3, "P"), state(&ex3, "Q"));
    assert!(!wb3.relation.contains(p3, q3));
    let sep3 = weak_f(&ex3, "wmay<<tau>> and{wmay<<alpha>> true; pred(phi)}");
    assert!(check_weak(&ex3, &wc3, p3, &sep3).unwrap());
    assert!(!check_weak(&ex3, &wc3, q3, &sep3).unwrap());

    // Example 4: all three states weakly bisimilar without the conjunction
    // predicate, split by it.
    let ex4 = fixture("ex4.nts");
    let wc4 = WeakClosure::new(&ex4);
    let wb4 = weak_bisim(&ex4, &wc4).unwrap();
    for (a, b) in [("P0", "P1"), ("P0", "Q"), ("P1", "Q")] {
        assert!(wb4.relation.contains(state(&ex4, a), state(&ex4, b)), "{a} vs {b}");
    }
    let ex4c = fixture("ex4_conj.nts");
    let wc4c = WeakClosure::new(&ex4c);
    let wb4c = weak_bisim(&ex4c, &wc4c).unwrap();
    assert!(wb4c.relation.contains(state(&ex4c, "P0"), state(&ex4c, "P1")));
    assert!(!wb4c.relation.contains(state(&ex4c, "P0"), state(&ex4c, "Q")));
    assert!(!wb4c.relation.contains(state(&ex4c, "P1"), state(&ex4c, "Q")));

    // Pi-calculus formulas: the late relay satisfies the binding-input
    // formula, alpha-variants coincide, and the early system satisfies the
    // orbit conjunction whose support is exactly the two channels.
    let u = Universe::single_sorted(["a", "b", "n", "m", "v", "w"]).unwrap();
    let relay = pi_fixture("relay.pi", &u);
    let late = pi::generate(&relay, &u, Semantics::Late, pi::GenBudget::default(), &[]).unwrap();
    assert!(late.nts.validate().ok());
    let f_late = strong_f(&late.nts, "may<lin(a;v)> may<out(b,v)> true");
    let f_late2 = strong_f(&late.nts, "may<lin(a;w)> may<out(b,w)> true");
    assert_eq!(
        f_late.canonical(&late.nts).unwrap(),
        f_late2.canonical(&late.nts).unwrap()
    );
    assert!(check(&late.nts, late.root(), &f_late).unwrap());

    let early = pi::generate(&relay, &u, Semantics::Early, pi::GenBudget::default(), &[]).unwrap();
    assert!(early.nts.validate().ok());
    let orbit = strong_f(&early.nts, "orbit fix{a,b} may<in(a,n)> may<out(b,n)> true");
    let fix: NameSet = [u.lookup("a").unwrap(), u.lookup("b").unwrap()].into_iter().collect();
    assert_eq!(orbit.support(&early.nts), fix);
    assert!(check(&early.nts, early.root(), &orbit).unwrap());

    println!("acceptance: criterion 2 (paper fixtures) PASS");
}

/// The satisfaction battery: a relation is adequate for a formula battery
/// when two states are related exactly if they agree on every formula.
fn strong_agreement_matches(
    nts: &Nts,
    rel: &Relation,
    formulas: &[Formula],
) -> nomhml::Result<()> {
    let mut table: Vec<Vec<bool>> = Vec::new();
    for f in formulas {
        table.push(nts.states().map(|s| check(nts, s, f).unwrap()).collect());
    }
    for p in nts.states() {
        for q in nts.states() {
            let agree = table.iter().all(|row| row[p.0 as usize] == row[q.0 as usize]);
            assert_eq!(
                rel.contains(p, q),
                agree,
                "adequacy mismatch at ({}, {})",
                nts.state_name(p),
                nts.state_name(q)
            );
        }
    }
    Ok(())
}

/// Criterion 3: strong adequacy on 25 random systems.
#[test]
fn criterion_3_strong_adequacy() {
    for seed in 0..25u64 {
        let cfg = SystemConfig {
            states: 6 + (seed as usize % 7),
            names: 3 + (seed as usize % 3),
            preds: 2,
            density: 0.25 + 0.05 * (seed % 4) as f64,
            with_binders: seed % 2 == 0,
            with_tau: true,
        };
        let nts = random_nts(seed, cfg).unwrap();
        assert!(nts.state_count() <= 12);

        let rel = strong_bisim(&nts).unwrap();
        let oracle = strong_bisim_oracle(&nts).unwrap();
        assert_eq!(rel, oracle, "seed {seed}: refinement disagrees with the oracle");
        assert!(is_strong_bisimulation(&nts, &rel).unwrap());
        assert!(rel.is_equivariant_equivalence(&nts));

        // 1000 seeded random formulas, plus a self-verified distinguishing
        // formula for every non-bisimilar pair.
        let mut rng = rng_from_seed(seed.wrapping_mul(77));
        let mut battery: Vec<Formula> = (0..1000)
            .map(|_| random_formula(&mut rng, &nts, FormulaConfig::default()).unwrap())
            .collect();
        for p in nts.states() {
            for q in nts.states() {
                if !rel.contains(p, q) {
                    let d = distinguishing_formula(&nts, p, q).unwrap().unwrap();
                    assert!(check(&nts, p, &d).unwrap(), "seed {seed}: witness fails at p");
                    assert!(!check(&nts, q, &d).unwrap(), "seed {seed}: witness holds at q");
                    assert!(
                        d.support(&nts).is_subset(nts.state_support(p)),
                        "seed {seed}: witness support exceeds the state support"
                    );
                    battery.push(d);
                } else {
                    assert!(distinguishing_formula(&nts, p, q).unwrap().is_none());
                }
            }
        }
        strong_agreement_matches(&nts, &rel, &battery).unwrap();
    }
    println!("acceptance: criterion 3 (strong adequacy, 25 systems) PASS");
}

/// Criterion 4: weak and effect-indexed adequacy on 15 random systems each,
/// plus the weak-answer and interpolation lemmas exhaustively.
#[test]
fn criterion_4_weak_and_fl_adequacy() {
    for seed in 100..115u64 {
        let cfg = SystemConfig {
            states: 5 + (seed as usize % 5),
            names: 3,
            preds: 2,
            density: 0.3,
            with_binders: seed % 2 == 0,
            with_tau: true,
        };
        let nts = random_nts(seed, cfg).unwrap();
        let wc = WeakClosure::new(&nts);
        let wb = weak_bisim(&nts, &wc).unwrap();

        let mut rng = rng_from_seed(seed.wrapping_mul(13));
        let mut battery: Vec<WeakFormula> = (0..1000)
            .map(|_| random_weak_formula(&mut rng, &nts, FormulaConfig::default()).unwrap())
            .collect();
        for p in nts.states() {
            for q in nts.states() {
                if !wb.relation.contains(p, q) {
                    let d = weak_distinguishing_formula(&nts, &wc, &wb, p, q).unwrap().unwrap();
                    assert!(check_weak(&nts, &wc, p, &d).unwrap());
                    assert!(!check_weak(&nts, &wc, q, &d).unwrap());
                    battery.push(d);
                }
            }
        }
        let mut table: Vec<Vec<bool>> = Vec::new();
        for f in &battery {
            table.push(nts.states().map(|s| check_weak(&nts, &wc, s, f).unwrap()).collect());
        }
        for p in nts.states() {
            for q in nts.states() {
                let agree = table.iter().all(|row| row[p.0 as usize] == row[q.0 as usize]);
                assert_eq!(wb.relation.contains(p, q), agree, "seed {seed}");
            }
        }

        // Weak answers to weak challenges, exhaustively on related pairs.
        for (p, q) in wb.relation.pairs() {
            for (act, p2) in wc
                .weak_transitions_from(&nts, p, nts.state_support(q))
                .unwrap()
            {
                let answered = wc
                    .weak_hat(&nts, q, &act, nts.state_support(p))
                    .unwrap()
                    .into_iter()
                    .any(|(b, q2)| b == act && wb.relation.contains(p2, q2));
                assert!(answered, "seed {seed}: weak challenge unanswered");
            }
            for q2 in wc.tau_closure(p) {
                // tau challenges are included above only for labelled
                // actions; the silent case:
                let answered = wc.tau_closure(q).iter().any(|q3| wb.relation.contains(*q2, *q3));
                assert!(answered, "seed {seed}: silent challenge unanswered");
            }
        }

        // Interpolation: p => s => r with p ~ r forces s ~ r.
        for p in nts.states() {
            for s in wc.tau_closure(p) {
                for r in wc.tau_closure(*s) {
                    if wb.relation.contains(p, *r) {
                        assert!(wb.relation.contains(*s, *r), "seed {seed}: interpolation fails");
                    }
                }
            }
        }
    }

    // Effect-indexed adequacy over random registries and L-functions.
    for seed in 200..215u64 {
        let cfg = SystemConfig {
            states: 5 + (seed as usize % 4),
            names: 3,
            preds: 2,
            density: 0.3,
            with_binders: false,
            with_tau: true,
        };
        let nts = random_nts(seed, cfg).unwrap();
        let mut rng = rng_from_seed(seed.wrapping_mul(31));
        let reg = gen::random_effects(&mut rng, &nts, 4, 3);
        let l = gen::random_l(&mut rng, &nts, &reg);
        reg.validate_equivariance(&nts, Some(&l)).unwrap();
        let tables: Vec<TableId> = (0..reg.tables.len() as u32).map(TableId).collect();
        let fl = fl_bisim(&nts, &reg, &l, &tables).unwrap();
        assert!(is_fl_bisimulation(&nts, &reg, &l, &fl.relations).unwrap());

        let start = tables[0];
        let mut battery = Vec::new();
        for _ in 0..1000 {
            battery.push(
                gen::random_fl_formula(&mut rng, &nts, &reg, &l, start, FormulaConfig::default())
                    .unwrap(),
            );
        }
        for p in nts.states() {
            for q in nts.states() {
                if !fl.relations.at(start).contains(p, q) {
                    let d = fl_distinguishing_formula(&nts, &reg, &l, &fl, start, p, q)
                        .unwrap()
                        .unwrap();
                    assert!(check_fl(&nts, &reg, p, &d).unwrap(), "seed {seed}");
                    assert!(!check_fl(&nts, &reg, q, &d).unwrap(), "seed {seed}");
                    battery.push(d);
                }
            }
        }
        let mut table: Vec<Vec<bool>> = Vec::new();
        for f in &battery {
            table.push(nts.states().map(|s| check_fl(&nts, &reg, s, f).unwrap()).collect());
        }
        for p in nts.states() {
            for q in nts.states() {
                let agree = table.iter().all(|row| row[p.0 as usize] == row[q.0 as usize]);
                assert_eq!(fl.relations.at(start).contains(p, q), agree, "seed {seed}");
            }
        }
    }
    println!("acceptance: criterion 4 (weak and F/L adequacy, 15+15 systems) PASS");
}

/// Criterion 5: characteristic formulas denote classes; property formulas
/// denote exactly the closed subsets.
#[test]
fn criterion_5_characteristic_and_property() {
    for seed in 300..310u64 {
        let cfg = SystemConfig {
            states: 4 + (seed as usize % 4),
            names: 3,
            preds: 2,
            density: 0.3,
            with_binders: seed % 2 == 0,
            with_tau: false,
        };
        let nts = random_nts(seed, cfg).unwrap();
        let rel = strong_bisim(&nts).unwrap();
        for p in nts.states() {
            let chi = characteristic_formula(&nts, p).unwrap();
            for q in nts.states() {
                assert_eq!(
                    check(&nts, q, &chi).unwrap(),
                    rel.contains(p, q),
                    "seed {seed}: characteristic formula of {} at {}",
                    nts.state_name(p),
                    nts.state_name(q)
                );
            }
        }
    }

    // Every bisimulation-closed subset of a small system is denoted exactly
    // by its property formula.
    let nts = random_nts(999, SystemConfig {
        states: 6,
        names: 3,
        preds: 2,
        density: 0.35,
        with_binders: false,
        with_tau: false,
    })
    .unwrap();
    let rel = strong_bisim(&nts).unwrap();
    let classes: Vec<BTreeSet<StateId>> = {
        let mut seen: Vec<BTreeSet<StateId>> = Vec::new();
        for p in nts.states() {
            if !seen.iter().any(|c| c.contains(&p)) {
                seen.push(nts.states().filter(|q| rel.contains(p, *q)).collect());
            }
        }
        seen
    };
    for mask in 0u32..(1 << classes.len()) {
        let subset: BTreeSet<StateId> = classes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .flat_map(|(_, c)| c.iter().copied())
            .collect();
        let f = property_formula(&nts, &subset).unwrap();
        for s in nts.states() {
            assert_eq!(check(&nts, s, &f).unwrap(), subset.contains(&s), "mask {mask}");
        }
    }
    // A non-closed subset is rejected with a witness.
    if let Some(class) = classes.iter().find(|c| c.len() > 1) {
        let mut bad = class.clone();
        let dropped = *bad.iter().next_back().unwrap();
        bad.remove(&dropped);
        assert!(matches!(
            property_formula(&nts, &bad),
            Err(nomhml::Error::NotBisimClosed { .. })
        ));
    }

    // The weak counterparts on a fixture.
    let ex2 = fixture("ex2.nts");
    let wc = WeakClosure::new(&ex2);
    let wb = weak_bisim(&ex2, &wc).unwrap();
    for p in ex2.states() {
        let chi = weak_characteristic_formula(&ex2, &wc, &wb, p).unwrap();
        for q in ex2.states() {
            assert_eq!(check_weak(&ex2, &wc, q, &chi).unwrap(), wb.relation.contains(p, q));
        }
    }
    let class: BTreeSet<StateId> =
        ex2.states().filter(|q| wb.relation.contains(state(&ex2, "P"), *q)).collect();
    let wprop = weak_property_formula(&ex2, &wc, &wb, &class).unwrap();
    for s in ex2.states() {
        assert_eq!(check_weak(&ex2, &wc, s, &wprop).unwrap(), class.contains(&s));
    }
    println!("acceptance: criterion 5 (characteristic and property formulas) PASS");
}

/// Criterion 6: fixpoint machinery against the prefixpoint oracle, the
/// unrolling ladder, and graph-reachability oracles.
#[test]
fn criterion_6_fixpoints() {
    // Kleene equals the Tarski-style enumeration on small systems.
    for seed in 400..408u64 {
        let nts = random_nts(seed, SystemConfig {
            states: 5 + (seed as usize % 6),
            names: 3,
            preds: 2,
            density: 0.3,
            with_binders: false,
            with_tau: true,
        })
        .unwrap();
        assert!(nts.state_count() <= 12);
        let x = VarId(0);
        let phi = nts.preds().next().unwrap();
        let ef = Formula::mu(
            x,
            Formula::disj2(Formula::Pred(phi), formula::next(&nts, &Formula::Var(x)).unwrap()),
        );
        let kleene = interp(&nts, &ef, &Valuation::default()).unwrap();
        let tarski = interp_tarski(&nts, &ef, &Valuation::default()).unwrap();
        assert_eq!(kleene, tarski, "seed {seed}");

        // The unrolling ladder equals the iterated map, with the fixpoint
        // reached at the state count.
        let body = Formula::disj2(Formula::Pred(phi), formula::next(&nts, &Formula::Var(x)).unwrap());
        let mut iterate = StateSet::default();
        for gamma in 0..=nts.state_count() {
            let unrolled = unroll(&nts, &ef, gamma).unwrap();
            assert!(unrolled.is_fixpoint_free());
            let lhs = interp(&nts, &unrolled, &Valuation::default()).unwrap();
            assert_eq!(lhs, iterate, "seed {seed}, gamma {gamma}");
            let next = interp(&nts, &body, &Valuation::default().with(x, iterate.clone())).unwrap();
            iterate = next;
        }
        let at_bound = interp(
            &nts,
            &unroll(&nts, &ef, nts.state_count()).unwrap(),
            &Valuation::default(),
        )
        .unwrap();
        assert_eq!(at_bound, kleene, "seed {seed}: unrolling at the state count");

        // The fixpoint-free encoding agrees with the fixpoint semantics.
        let encoded = encode_fixpoint_free(&nts, &ef).unwrap();
        assert!(encoded.is_fixpoint_free());
        for s in nts.states() {
            assert_eq!(check(&nts, s, &encoded).unwrap(), kleene.contains(s));
        }

        // The trivial fixpoint is empty.
        let bottom = interp(&nts, &Formula::mu(x, Formula::Var(x)), &Valuation::default()).unwrap();
        assert!(bottom.0.is_empty());
    }

    // Reachability encodings against graph oracles on 20 random graphs.
    for seed in 500..520u64 {
        let nts = random_graph(seed, 6 + (seed as usize % 5), 0.35).unwrap();
        let phi = nts.preds().next().unwrap();
        let x = VarId(0);
        let ef = Formula::mu(
            x,
            Formula::disj2(Formula::Pred(phi), formula::next(&nts, &Formula::Var(x)).unwrap()),
        );
        let ag = Formula::nu(
            x,
            Formula::conj2(Formula::Pred(phi), formula::next_all(&nts, &Formula::Var(x)).unwrap()),
        );
        let ef_set = interp(&nts, &ef, &Valuation::default()).unwrap();
        let ag_set = interp(&nts, &ag, &Valuation::default()).unwrap();
        for s in nts.states() {
            let reachable = reachable_from(&nts, s);
            let can_reach_phi = reachable.iter().any(|t| nts.holds(*t, phi).unwrap());
            assert_eq!(ef_set.contains(s), can_reach_phi, "seed {seed}: EF at {s:?}");
            let always_phi = reachable.iter().all(|t| nts.holds(*t, phi).unwrap());
            assert_eq!(ag_set.contains(s), always_phi, "seed {seed}: AG at {s:?}");
        }
    }
    println!("acceptance: criterion 6 (fixpoints) PASS");
}

fn reachable_from(nts: &Nts, start: StateId) -> BTreeSet<StateId> {
    let mut out = BTreeSet::from([start]);
    let mut work = vec![start];
    while let Some(s) = work.pop() {
        for r in nts.residuals_of(s) {
            if out.insert(r.target) {
                work.push(r.target);
            }
        }
    }
    out
}

/// Criterion 7: the predicate-to-selfloop and effect-to-transition
/// transforms, the weak-formula inverse, and the naive-map regressions.
#[test]
fn criterion_7_transforms() {
    let fixtures = ["ex1.nts", "ex2.nts", "ex3.nts", "ex4.nts", "ex4_conj.nts", "counterex1.nts", "counterex2.nts"];
    let mut systems: Vec<Nts> = fixtures.iter().map(|f| fixture(f)).collect();
    for seed in 600..610u64 {
        systems.push(
            random_nts(seed, SystemConfig {
                states: 5,
                names: 3,
                preds: 2,
                density: 0.3,
                with_binders: false,
                with_tau: true,
            })
            .unwrap(),
        );
    }

    for (i, nts) in systems.iter().enumerate() {
        let st = s_transform(nts).unwrap();
        assert!(st.nts.validate().ok());
        assert_eq!(st.nts.preds().count(), 0);
        let to = |s: StateId| st.nts.lookup_state(nts.state_name(s)).unwrap();

        // Strong round trip.
        let rel_t = strong_bisim(nts).unwrap();
        let rel_s = strong_bisim(&st.nts).unwrap();
        for p in nts.states() {
            for q in nts.states() {
                assert_eq!(rel_t.contains(p, q), rel_s.contains(to(p), to(q)), "system {i}");
            }
        }
        // Weak round trip.
        let wc_t = WeakClosure::new(nts);
        let wc_s = WeakClosure::new(&st.nts);
        let wb_t = weak_bisim(nts, &wc_t).unwrap();
        let wb_s = weak_bisim(&st.nts, &wc_s).unwrap();
        for p in nts.states() {
            for q in nts.states() {
                assert_eq!(
                    wb_t.relation.contains(p, q),
                    wb_s.relation.contains(to(p), to(q)),
                    "system {i}: weak round trip"
                );
            }
        }
        // Satisfaction is preserved along the formula transform.
        let mut rng = rng_from_seed(4000 + i as u64);
        for _ in 0..60 {
            let f = random_formula(&mut rng, nts, FormulaConfig::default()).unwrap();
            let mapped = st.formula(&f);
            for s in nts.states() {
                assert_eq!(
                    check(nts, s, &f).unwrap(),
                    check(&st.nts, to(s), &mapped).unwrap(),
                    "system {i}"
                );
            }
        }
        // The weak-formula inverse round-trips satisfaction.
        for _ in 0..40 {
            let f = random_weak_formula(&mut rng, &st.nts, FormulaConfig::default()).unwrap();
            let back = st.weak_formula_inverse(&f).unwrap();
            for s in nts.states() {
                assert_eq!(
                    check_weak(&st.nts, &wc_s, to(s), &f).unwrap(),
                    check_weak(nts, &wc_t, s, &back).unwrap(),
                    "system {i}: inverse transform"
                );
            }
        }
    }

    // First naive map: phi-modal prefix instead of the guarded conjunction.
    let c1 = fixture("counterex1.nts");
    let st1 = s_transform(&c1).unwrap();
    let p = state(&c1, "P");
    let sp = st1.nts.lookup_state("P").unwrap();
    let phi = c1.lookup_pred("phi").unwrap();
    let wc1t = WeakClosure::new(&c1);
    let wc1s = WeakClosure::new(&st1.nts);
    let no_alpha_s = weak_f(&st1.nts, "not wmay<<alpha>> true");
    let naive1 = WeakFormula::wmay(st1.pred_action(phi).clone(), no_alpha_s);
    assert!(check_weak(&st1.nts, &wc1s, sp, &naive1).unwrap());
    let no_alpha_t = weak_f(&c1, "not wmay<<alpha>> true");
    let direct1 = WeakFormula::tau_pred(no_alpha_t, phi);
    assert!(!check_weak(&c1, &wc1t, p, &direct1).unwrap());
    // The faithful inverse agrees instead.
    let back1 = st1.weak_formula_inverse(&naive1).unwrap();
    assert!(check_weak(&c1, &wc1t, p, &back1).unwrap());

    // Second naive map: guarding with a phi-loop probe instead of the
    // predicate itself.
    let c2 = fixture("counterex2.nts");
    let st2 = s_transform(&c2).unwrap();
    let p2 = state(&c2, "P");
    let sp2 = st2.nts.lookup_state("P").unwrap();
    let phi2 = c2.lookup_pred("phi").unwrap();
    let wc2t = WeakClosure::new(&c2);
    let wc2s = WeakClosure::new(&st2.nts);
    let alpha_s = weak_f(&st2.nts, "wmay<<alpha>> true");
    let probe = WeakFormula::wmay(st2.pred_action(phi2).clone(), WeakFormula::top());
    let naive2 = WeakFormula::wmay(
        st2.nts.tau().unwrap(),
        WeakFormula::conj2(alpha_s, probe),
    );
    assert!(check_weak(&st2.nts, &wc2s, sp2, &naive2).unwrap());
    let alpha_t = weak_f(&c2, "wmay<<alpha>> true");
    let direct2 = WeakFormula::tau_pred(alpha_t, phi2);
    assert!(!check_weak(&c2, &wc2t, p2, &direct2).unwrap());

    // Thm-8.9-style spot check: a weak property over the source system is
    // expressible over the transformed one.
    let ex1 = fixture("ex1.nts");
    let st = s_transform(&ex1).unwrap();
    let wc_t = WeakClosure::new(&ex1);
    let wc_s = WeakClosure::new(&st.nts);
    let wb_s = weak_bisim(&st.nts, &wc_s).unwrap();
    let a = weak_f(&ex1, "wmay<<tau>> pred(phi)");
    let denote: BTreeSet<StateId> = ex1
        .states()
        .filter(|s| check_weak(&ex1, &wc_t, *s, &a).unwrap())
        .map(|s| st.nts.lookup_state(ex1.state_name(s)).unwrap())
        .collect();
    let a_prime = weak_property_formula(&st.nts, &wc_s, &wb_s, &denote).unwrap();
    for s in ex1.states() {
        let s2 = st.nts.lookup_state(ex1.state_name(s)).unwrap();
        assert_eq!(
            check_weak(&ex1, &wc_t, s, &a).unwrap(),
            check_weak(&st.nts, &wc_s, s2, &a_prime).unwrap()
        );
    }

    // Effect-to-transition transform on a pi-derived system.
    let u = Universe::single_sorted(["a", "b", "v", "w", "z"]).unwrap();
    let p_term = pi_fixture("latepair_p.pi", &u);
    let q_term = pi_fixture("latepair_q.pi", &u);
    let substs = pi::substitution_vectors(&u, EffectSpec::Singles);
    let gen2 = pi::generate_many(
        &[p_term, q_term],
        &u,
        Semantics::Late,
        pi::GenBudget { max_states: 600 },
        &substs,
    )
    .unwrap();
    assert!(gen2.truncated.is_empty());
    let pe = pi::substitution_effects(&gen2, &substs).unwrap();
    let ll = pi::l_late(&gen2, &pe).unwrap();
    let mut reg = pe.registry.clone();
    let tables = reg.close_under(&gen2.nts, &ll, &[pe.id_table]).unwrap();
    let fl = fl_bisim(&gen2.nts, &reg, &ll, &tables).unwrap();
    let lt = l_transform(&gen2.nts, &reg, &ll, &tables).unwrap();
    assert!(lt.nts.validate().ok(), "{:?}", lt.nts.validate().violations);
    assert!(lt
        .nts
        .transitions()
        .all(|(_, r)| !lt.nts.act_decl(r.act.ctor).name.starts_with("eff:")
            || lt.nts.bn(&r.act).is_empty()));

    // Satisfaction is preserved into the transform (random effect formulas).
    let mut rng = rng_from_seed(77);
    for _ in 0..120 {
        let f = gen::random_fl_formula(&mut rng, &gen2.nts, &reg, &ll, pe.id_table, FormulaConfig::default())
            .unwrap();
        let mapped = lt.formula(&f);
        for s in [gen2.roots[0], gen2.roots[1]] {
            assert_eq!(
                check_fl(&gen2.nts, &reg, s, &f).unwrap(),
                check(&lt.nts, lt.ef_state(pe.id_table, s), &mapped).unwrap()
            );
        }
    }
    // Bisimilarity in the transform coincides with the indexed bisimilarity.
    let rel_lt = strong_bisim(&lt.nts).unwrap();
    for p in gen2.nts.states() {
        for q in gen2.nts.states() {
            assert_eq!(
                rel_lt.contains(lt.ef_state(pe.id_table, p), lt.ef_state(pe.id_table, q)),
                fl.relations.at(pe.id_table).contains(p, q),
                "effect transform round trip at ({}, {})",
                gen2.nts.state_name(p),
                gen2.nts.state_name(q)
            );
        }
    }
    println!("acceptance: criterion 7 (transforms) PASS");
}

/// Criterion 8: disjunction elimination agrees semantically on 200 random
/// extended weak formulas, with output in the plain weak grammar.
#[test]
fn criterion_8_disjunction_elimination() {
    let fixtures = ["ex1.nts", "ex2.nts", "ex3.nts", "ex4.nts"];
    let mut count = 0;
    for name in fixtures {
        let nts = fixture(name);
        let wc = WeakClosure::new(&nts);
        let mut rng = rng_from_seed(0xD15);
        for _ in 0..50 {
            let e = gen::random_ext_weak_formula(&mut rng, &nts, FormulaConfig::default()).unwrap();
            let w = delta(&e);
            // Output is a weak formula by type; it must also expand into the
            // core logic.
            w.to_formula(&nts).unwrap();
            for s in nts.states() {
                assert_eq!(
                    check_ext_weak(&nts, &wc, s, &e).unwrap(),
                    check_weak(&nts, &wc, s, &w).unwrap(),
                    "{name}"
                );
            }
            count += 1;
        }
    }
    assert_eq!(count, 200);
    println!("acceptance: criterion 8 (disjunction elimination, 200 formulas) PASS");
}

/// Criterion 9: the pi-calculus bisimilarity variants.
#[test]
fn criterion_9_pi_variants() {
    // {id}/L_E coincides with strong bisimilarity on early fixtures.
    let u = Universe::single_sorted(["a", "b", "v", "w", "z"]).unwrap();
    for file in ["relay.pi", "latepair_p.pi", "latepair_q.pi"] {
        let term = pi_fixture(file, &u);
        let substs = pi::substitution_vectors(&u, EffectSpec::Identity);
        let g = pi::generate(&term, &u, Semantics::Early, pi::GenBudget { max_states: 600 }, &substs)
            .unwrap();
        assert!(g.truncated.is_empty(), "{file}");
        let pe = pi::substitution_effects(&g, &substs).unwrap();
        let le = pi::l_early(&pe);
        let fl = fl_bisim(&g.nts, &pe.registry, &le, &[pe.id_table]).unwrap();
        let strong = strong_bisim(&g.nts).unwrap();
        for p in g.nts.states() {
            for q in g.nts.states() {
                assert_eq!(
                    fl.relations.at(pe.id_table).contains(p, q),
                    strong.contains(p, q),
                    "{file}: early instance differs from strong bisimilarity"
                );
            }
        }
    }

    // The classic pair: identified under the early instance, separated under
    // the late one.
    let p_term = pi_fixture("latepair_p.pi", &u);
    let q_term = pi_fixture("latepair_q.pi", &u);
    let substs = pi::substitution_vectors(&u, EffectSpec::Singles);
    let g = pi::generate_many(
        &[p_term, q_term],
        &u,
        Semantics::Late,
        pi::GenBudget { max_states: 600 },
        &substs,
    )
    .unwrap();
    assert!(g.truncated.is_empty());
    let pe = pi::substitution_effects(&g, &substs).unwrap();
    pe.registry.validate_equivariance(&g.nts, None).unwrap();
    let (p, q) = (g.roots[0], g.roots[1]);

    let le = pi::l_early(&pe);
    let fl_e = fl_bisim(&g.nts, &pe.registry, &le, &[pe.id_table]).unwrap();
    assert!(
        fl_e.relations.at(pe.id_table).contains(p, q),
        "early instance must identify the pair"
    );

    let ll = pi::l_late(&g, &pe).unwrap();
    let mut reg_l = pe.registry.clone();
    let tables_l = reg_l.close_under(&g.nts, &ll, &[pe.id_table]).unwrap();
    let fl_l = fl_bisim(&g.nts, &reg_l, &ll, &tables_l).unwrap();
    assert!(
        !fl_l.relations.at(pe.id_table).contains(p, q),
        "late instance must separate the pair"
    );
    // Cross-check with a self-verified distinguishing formula.
    let d = fl_distinguishing_formula(&g.nts, &reg_l, &ll, &fl_l, pe.id_table, p, q)
        .unwrap()
        .unwrap();
    assert!(check_fl(&g.nts, &reg_l, p, &d).unwrap());
    assert!(!check_fl(&g.nts, &reg_l, q, &d).unwrap());

    // Hyperbisimilarity refines early equivalence.
    let u4 = Universe::single_sorted(["a", "b", "v", "w"]).unwrap();
    let hp = pi_fixture("latepair_p.pi", &u4);
    let hq = pi_fixture("latepair_q.pi", &u4);
    let substs_all = pi::substitution_vectors(&u4, EffectSpec::All { max_moved: 2 });
    let gh = pi::generate_many(
        &[hp, hq],
        &u4,
        Semantics::Late,
        pi::GenBudget { max_states: 800 },
        &substs_all,
    )
    .unwrap();
    assert!(gh.truncated.is_empty());
    let peh = pi::substitution_effects(&gh, &substs_all).unwrap();
    let lh = pi::l_hyper(&peh);
    let fl_h = fl_bisim(&gh.nts, &peh.registry, &lh, &[peh.full_table]).unwrap();
    let le_h = pi::l_early(&peh);
    let mut reg_eq = peh.registry.clone();
    let tables_eq = reg_eq.close_under(&gh.nts, &le_h, &[peh.full_table]).unwrap();
    let fl_eq = fl_bisim(&gh.nts, &reg_eq, &le_h, &tables_eq).unwrap();
    for (a, b) in fl_h.relations.at(peh.full_table).pairs() {
        assert!(
            fl_eq.relations.at(peh.full_table).contains(a, b),
            "hyperbisimilar pair not early-equivalent"
        );
    }

    // Open bisimulation under the empty distinction separates a pair that
    // the late instance identifies.
    let uo = Universe::single_sorted(["a", "c", "u", "v", "w"]).unwrap();
    let op = pi_fixture("openpair_p.pi", &uo);
    let oq = pi_fixture("openpair_q.pi", &uo);
    let osubsts = pi::substitution_vectors(&uo, EffectSpec::Singles);
    let go = pi::generate_many(
        &[op, oq],
        &uo,
        Semantics::Late,
        pi::GenBudget { max_states: 800 },
        &osubsts,
    )
    .unwrap();
    assert!(go.truncated.is_empty());
    let peo = pi::substitution_effects(&go, &osubsts).unwrap();
    let (po, qo) = (go.roots[0], go.roots[1]);

    let llo = pi::l_late(&go, &peo).unwrap();
    let mut reg_late = peo.registry.clone();
    let tables_late = reg_late.close_under(&go.nts, &llo, &[peo.id_table]).unwrap();
    let fl_late = fl_bisim(&go.nts, &reg_late, &llo, &tables_late).unwrap();
    assert!(
        fl_late.relations.at(peo.id_table).contains(po, qo),
        "late instance must identify the open pair"
    );

    let lo = pi::l_open(&go).unwrap();
    let mut reg_open = peo.registry.clone();
    let tables_open = reg_open.close_under(&go.nts, &lo, &[peo.d0_table]).unwrap();
    let fl_open = fl_bisim(&go.nts, &reg_open, &lo, &tables_open).unwrap();
    assert!(
        !fl_open.relations.at(peo.d0_table).contains(po, qo),
        "open instance must separate the pair"
    );
    // Oracle cross-check: the open family is a genuine L-bisimulation.
    assert!(is_fl_bisimulation(&go.nts, &reg_open, &lo, &fl_open.relations).unwrap());

    // Distinction algebra sanity.
    let mut d0 = nomhml::effects::Distinction::empty();
    let (na, nc) = (uo.lookup("a").unwrap(), uo.lookup("c").unwrap());
    d0.insert(na, nc);
    let plus = d0.plus(&uo, uo.lookup("u").unwrap());
    let minus = plus.minus(uo.lookup("u").unwrap());
    assert!(minus.distinguishes(na, nc));
    assert!(!minus.pairs().any(|(x, y)| x == uo.lookup("u").unwrap() || y == uo.lookup("u").unwrap()));

    println!("acceptance: criterion 9 (pi variants) PASS");
}

/// The weak-modality evaluators agree with the unrolled disjunction
/// encoding (used throughout the weak criteria above).
#[test]
fn weak_modality_direct_equals_encoding() {
    for name in ["ex1.nts", "ex2.nts", "ex3.nts", "ex4.nts"] {
        let nts = fixture(name);
        let wc = WeakClosure::new(&nts);
        let tau = nts.tau().unwrap();
        let mut rng = rng_from_seed(42);
        for _ in 0..30 {
            let body = random_formula(&mut rng, &nts, FormulaConfig { depth: 2, ..Default::default() })
                .unwrap();
            let encoded = formula::wmay(&nts, &tau, &body).unwrap();
            for s in nts.states() {
                assert_eq!(
                    check_weak_modality(&nts, &wc, s, &tau, &body).unwrap(),
                    check(&nts, s, &encoded).unwrap(),
                    "{name}"
                );
            }
        }
        // Saturation: the closure stabilises within the state count.
        assert!(wc.rounds <= nts.state_count() + 1);
        // <<alpha>><<tau>>A is equivalent to <<alpha>>A.
        if nts.lookup_act("alpha").is_ok() {
            let alpha = ActLabel::new(nts.lookup_act("alpha").unwrap(), vec![]);
            for s in nts.states() {
                let one = weak_f(&nts, "wmay<<alpha>> wmay<<tau>> true");
                let two = weak_f(&nts, "wmay<<alpha>> true");
                assert_eq!(
                    check_weak(&nts, &wc, s, &one).unwrap(),
                    check_weak(&nts, &wc, s, &two).unwrap()
                );
            }
            let _ = alpha;
        }
    }
    println!("acceptance: weak modality cross-check PASS");
}
