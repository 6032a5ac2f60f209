use num_traits::One;
use proptest::prelude::*;

use eigenmeasure::cartan::{classify, normalize_params, AmbientGroup, CartanParams};
use eigenmeasure::eigenspace::counting_measure;
use eigenmeasure::measure::family_of_group;
use eigenmeasure::modarith::{is_square_unit, sqrt_hensel, MatMod, Prime, Rat};
use eigenmeasure::subgroup::{close, lift_group, Budget, FiniteSubgroup, SubgroupSpec};

fn p(l: u64) -> Prime {
    Prime::new(l).unwrap()
}

fn small_prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5, 7])
}

fn ambient(l: u64, kind: u8, d: i64) -> Option<AmbientGroup> {
    let ell = p(l);
    Some(match kind {
        0 => AmbientGroup::gl2(ell),
        1 => AmbientGroup::cartan(normalize_params(0, d, ell).ok()?, ell),
        _ => AmbientGroup::normalizer(normalize_params(0, d, ell).ok()?, ell),
    })
}

/// Shapes raw entries into an element of `amb`: `(x, dy; y, x + cy)` in
/// the Cartan, and `(z, cz - dw; w, -z)` in the other coset of a normalizer
/// for odd-indexed generators.
fn shaped(amb: AmbientGroup, i: usize, e: [i64; 4]) -> [i64; 4] {
    let small = |v: i64| v % 1000;
    let (x, y) = (small(e[0]), small(e[1]));
    match amb.params() {
        None => e,
        Some(p) if amb.is_normalizer() && i % 2 == 1 => [x, p.c() * x - p.d() * y, y, -x],
        Some(p) => [x, p.d() * y, y, x + p.c() * y],
    }
}

/// The subgroup generated by the invertible shaped elements among `raw`
/// (reduced mod `l^level`), or `None` when the spec is rejected.
fn subgroup(amb: AmbientGroup, level: u32, raw: &[[i64; 4]]) -> Option<FiniteSubgroup> {
    let gens: Vec<MatMod> = raw
        .iter()
        .enumerate()
        .filter_map(|(i, e)| MatMod::new(amb.ell(), level, shaped(amb, i, *e)).ok())
        .filter(|m| m.is_invertible() && amb.contains(m).unwrap_or(false))
        .collect();
    let spec = SubgroupSpec::new(amb, level, gens).ok()?;
    close(&spec, &Budget::default()).ok()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn det_is_multiplicative(l in small_prime(), n in 1u32..5, x in any::<[i64; 4]>(), y in any::<[i64; 4]>()) {
        let (a, b) = (MatMod::new(p(l), n, x).unwrap(), MatMod::new(p(l), n, y).unwrap());
        let m = a.modulus() as u128;
        let prod = a.mul(&b).unwrap();
        prop_assert_eq!(prod.det() as u128, (a.det() as u128 * b.det() as u128) % m);
    }

    #[test]
    fn inverse_is_two_sided(l in small_prime(), n in 1u32..5, x in any::<[i64; 4]>()) {
        let a = MatMod::new(p(l), n, x).unwrap();
        match a.inverse() {
            Some(inv) => {
                prop_assert!(a.mul(&inv).unwrap().is_identity());
                prop_assert!(inv.mul(&a).unwrap().is_identity());
            }
            None => prop_assert!(!a.is_invertible()),
        }
    }

    #[test]
    fn square_unit_test_matches_search(l in small_prime(), d in -500i64..500) {
        let ell = p(l);
        prop_assume!(d.rem_euclid(l as i64) != 0);
        let m = if l == 2 { 8 } else { (l as i64).pow(3) };
        let found = (0..m).any(|x| (x * x - d).rem_euclid(m) == 0);
        prop_assert_eq!(is_square_unit(d, ell).unwrap(), found);
    }

    #[test]
    fn hensel_root_squares_back(l in small_prime(), u in 1i64..200, k in 0u32..3, prec in 1u32..6) {
        let ell = p(l);
        prop_assume!(u % l as i64 != 0);
        let d = u * u * (l as i64).pow(2 * k);
        let r = sqrt_hensel(d, ell, prec).unwrap();
        let modulus = (l as i128).pow(prec + 2 * k);
        let v = r.value() as i128;
        prop_assert_eq!((v * v - d as i128).rem_euclid(modulus), 0);
    }

    #[test]
    fn type_is_invariant_under_unit_squares(l in prop::sample::select(vec![3u64, 5, 7]), d in -60i64..60, u in 1i64..30) {
        let ell = p(l);
        prop_assume!(d != 0 && u % l as i64 != 0);
        let base = normalize_params(0, d, ell).unwrap();
        let scaled = normalize_params(0, u * u * d, ell).unwrap();
        prop_assert_eq!(classify(&base, ell), classify(&scaled, ell));
    }

    #[test]
    fn closure_is_idempotent(l in prop::sample::select(vec![2u64, 3]), kind in 0u8..3, d in 1i64..13,
                             raw in prop::collection::vec(any::<[i64; 4]>(), 1..4)) {
        let amb = ambient(l, kind, d).unwrap();
        let level = amb.min_prec().max(if l == 2 { 2 } else { 1 });
        if let Some(g) = subgroup(amb, level, &raw) {
            let again = close(&SubgroupSpec::new(amb, level, g.elements().to_vec()).unwrap(), &Budget::default()).unwrap();
            prop_assert_eq!(again.elements(), g.elements());
            let order = amb.order(level).unwrap();
            prop_assert!((order % g.len() as u64) == 0u64.into());
        }
    }

    #[test]
    fn lifting_multiplies_by_tangent_size(l in prop::sample::select(vec![2u64, 3]), kind in 0u8..3, d in 1i64..13,
                                          raw in prop::collection::vec(any::<[i64; 4]>(), 1..3)) {
        let amb = ambient(l, kind, d).unwrap();
        if let Some(g) = subgroup(amb, amb.min_prec(), &raw) {
            let up = lift_group(&g, g.prec() + 1, &Budget::default()).unwrap();
            prop_assert_eq!(up.len() as u64, g.len() as u64 * l.pow(amb.dim()));
        }
    }

    #[test]
    fn families_have_unit_mass_and_match_counts(l in prop::sample::select(vec![2u64, 3]), kind in 0u8..3, d in 1i64..13,
                                                raw in prop::collection::vec(any::<[i64; 4]>(), 1..3)) {
        let amb = ambient(l, kind, d).unwrap();
        let level = if kind == 0 { 1 } else { amb.min_prec().max(2) };
        if let Some(g) = subgroup(amb, level, &raw) {
            let budget = Budget::default();
            let fam = family_of_group(&g, &budget).unwrap();
            prop_assert_eq!(fam.total_mass(), Rat::one());
            // the lifted group describes the same open subgroup
            let up = lift_group(&g, g.prec() + 1, &budget).unwrap();
            let lifted = family_of_group(&up, &budget).unwrap();
            for a in 0..5 {
                for b in 0..6 {
                    prop_assert_eq!(lifted.evaluate(a, b).unwrap(), fam.evaluate(a, b).unwrap());
                }
            }
            for (a, b) in [(0u32, 0u32), (0, 1), (1, 0)] {
                let n = (a + b + 1).max(g.prec());
                let big = lift_group(&g, n, &budget).unwrap();
                prop_assert_eq!(counting_measure(&big, a, b).unwrap(), fam.evaluate(a, b).unwrap());
            }
        }
    }

    #[test]
    fn counting_measure_stabilizes(l in prop::sample::select(vec![2u64, 3]), a in 0u32..2, b in 0u32..2) {
        let amb = AmbientGroup::cartan(CartanParams::new(0, 2, p(l)).unwrap(), p(l));
        let g = close(&SubgroupSpec::full(amb, 1).unwrap(), &Budget::default()).unwrap();
        let budget = Budget::default();
        let n = a + b + 1;
        let lo = counting_measure(&lift_group(&g, n, &budget).unwrap(), a, b).unwrap();
        let hi = counting_measure(&lift_group(&g, n + 1, &budget).unwrap(), a, b).unwrap();
        prop_assert_eq!(lo, hi);
    }
}
