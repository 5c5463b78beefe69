use std::collections::BTreeSet;

use excouple::analysis::exact_tv_values;
use excouple::solver::{difference_generators, generate_subgroup, gs_membership, GpVerdict};
use excouple::{AtomGuard, AtomicMeasure, GroupCtx, GroupElement, Rational};

fn check_equivalence(ctx: GroupCtx, literal: &str, xs: Vec<GroupElement>, n_max: usize) {
    let mu = AtomicMeasure::<Rational>::parse_literal(ctx.clone(), literal).unwrap();
    let atoms: Vec<_> = mu.sorted_atoms().into_iter().map(|(g, _)| g).collect();
    let gens = difference_generators(&ctx, &atoms).unwrap();
    let closure = generate_subgroup(&ctx, &gens, n_max).unwrap();
    for x in xs {
        let v = gs_membership(&mu, &x, n_max, AtomGuard::default()).unwrap();
        assert_eq!(
            v.gs_yes(),
            closure.contains(&x),
            "{ctx} {literal}: x = {}",
            ctx.format_element(&x)
        );
        assert_eq!(v.gs_yes(), v.gp_yes());
    }
}

#[test]
fn overlap_verdicts_match_difference_subgroup() {
    let z = GroupCtx::lattice(1).unwrap();
    let range = |lo: i64, hi: i64| (lo..=hi).map(GroupElement::int).collect::<Vec<_>>();
    check_equivalence(z.clone(), "0=1/2 2=1/2", range(-20, 20), 24);
    check_equivalence(z.clone(), "1=1/3 4=2/3", range(-12, 12), 16);
    check_equivalence(z, "-2=1/4 3=3/4", range(-15, 15), 20);

    for (m, literal) in [(6u64, "0=1/2 2=1/2"), (12, "3=1/2 7=1/2"), (8, "2=1/3 6=2/3")] {
        let c = GroupCtx::cyclic(m).unwrap();
        check_equivalence(c, literal, (0..m).map(GroupElement::Residue).collect(), 2 * m as usize);
    }

    let z2 = GroupCtx::lattice(2).unwrap();
    let pts = (-4..=4)
        .flat_map(|a| (-4..=4).map(move |b| GroupElement::lattice(&[a, b])))
        .collect();
    check_equivalence(z2, "(0,0)=1/2 (1,1)=1/4 (2,0)=1/4", pts, 12);

    let zc = GroupCtx::product(vec![GroupCtx::lattice(1).unwrap(), GroupCtx::cyclic(4).unwrap()]).unwrap();
    let pts = (-3..=3)
        .flat_map(|a| (0..4).map(move |r| GroupElement::Tuple(vec![GroupElement::int(a), GroupElement::Residue(r)])))
        .collect();
    check_equivalence(zc, "[0;0]=1/2 [1;2]=1/2", pts, 12);
}

#[test]
fn yes_verdicts_are_monotone_in_n() {
    let z = GroupCtx::lattice(1).unwrap();
    let mu = AtomicMeasure::<Rational>::parse_literal(z.clone(), "0=1/2 3=1/2").unwrap();
    let guard = AtomGuard::default();
    for k in -3..=3 {
        let x = GroupElement::int(3 * k);
        let v = gs_membership(&mu, &x, 12, guard).unwrap();
        let GpVerdict::Yes { n0 } = v.in_gp else {
            panic!("3ℤ shift {x:?} should overlap")
        };
        let x_inv = z.inv(&x).unwrap();
        for n in n0..=12 {
            let pow = mu.power(n, guard).unwrap();
            assert!(!pow.meet(&pow.shift(&x_inv).unwrap()).unwrap().is_zero());
        }
    }
}

#[test]
fn free_group_possible_but_no_decay() {
    let f2 = GroupCtx::free(2).unwrap();
    let mu = AtomicMeasure::<f64>::parse_literal(f2.clone(), "a=1/4 A=1/4 b=1/4 B=1/4").unwrap();
    let x = f2.parse_element("ab").unwrap();
    let v = gs_membership(&mu, &x, 4, AtomGuard::default()).unwrap();
    assert_eq!(v.in_gp, GpVerdict::Yes { n0: 1 });
    let tv = exact_tv_values(&mu, &x, 12, AtomGuard::default()).unwrap();
    assert!(tv.iter().all(|&t| t >= 0.3), "{tv:?}");
}

#[test]
fn closure_of_differences_is_symmetric() {
    let f2 = GroupCtx::free(2).unwrap();
    let atoms: Vec<_> = ["a", "b"].iter().map(|s| f2.parse_element(s).unwrap()).collect();
    let gens = difference_generators(&f2, &atoms).unwrap();
    assert!(gens.contains(&f2.identity()));
    let inverted: BTreeSet<_> = gens.iter().map(|g| f2.inv(g).unwrap()).collect();
    assert_eq!(gens, inverted);
    let c = generate_subgroup(&f2, &gens, 3).unwrap();
    assert!(!c.complete);
    for g in &c.elements {
        assert!(c.contains(&f2.inv(g).unwrap()));
    }
}
