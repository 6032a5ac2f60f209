//! The 1-eigenspace strata `M_{a,b}`: classification of single matrices and
//! the brute-force counting oracle.

use std::fmt;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::cartan::{complement_shape, AmbientGroup, CartanType};
use crate::error::{Error, Result};
use crate::modarith::{det_shifted_val_unchecked, mulmod, reduce_i64, valuation, MatMod, Rat, TruncVal};
use crate::subgroup::{lift_group, reduce_group, Budget, FiniteSubgroup};

/// `ker(M - I) = Z/l^a x Z/l^(a+b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct KernelShape {
    pub a: u32,
    pub b: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ShapeAtPrecision {
    Determined(KernelShape),
    /// Only lower bounds are known at this precision.
    Undetermined {
        a_min: u32,
        b_min: u32,
    },
}

impl fmt::Display for ShapeAtPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeAtPrecision::Determined(k) => write!(f, "(a, b) = ({}, {})", k.a, k.b),
            ShapeAtPrecision::Undetermined { a_min, b_min } => write!(f, "a >= {a_min}, b >= {b_min}"),
        }
    }
}

pub fn classify_matrix(m: &MatMod) -> ShapeAtPrecision {
    let a = m.identity_level();
    if a == m.prec() {
        return ShapeAtPrecision::Undetermined { a_min: a, b_min: 0 };
    }
    match det_shifted_val_unchecked(m, a) {
        TruncVal::Exact(k) => ShapeAtPrecision::Determined(KernelShape { a, b: k - 2 * a }),
        TruncVal::AtLeast(_) => ShapeAtPrecision::Undetermined {
            a_min: a,
            b_min: m.prec() - a,
        },
    }
}

#[inline]
fn is_shape(m: &MatMod, a: u32, b: u32) -> bool {
    classify_matrix(m) == ShapeAtPrecision::Determined(KernelShape { a, b })
}

/// `#M_{a,b}(n)` for `n = G.prec > a + b`.
pub fn mab_count(g: &FiniteSubgroup, a: u32, b: u32) -> Result<u64> {
    if g.prec() <= a + b {
        return Err(Error::Precision(format!(
            "counting ({a}, {b}) needs precision above {}, got {}",
            a + b,
            g.prec()
        )));
    }
    Ok(g.elements().par_iter().filter(|m| is_shape(m, a, b)).count() as u64)
}

/// `mu_{a,b}(n) = #M_{a,b}(n) / #G(n)`, which equals `mu_{a,b}` once `n > a + b`.
pub fn counting_measure(g: &FiniteSubgroup, a: u32, b: u32) -> Result<Rat> {
    let count = mab_count(g, a, b)?;
    Ok(Rat::new(count.into(), g.len().into()))
}

/// Membership in `H_{a,b}(n)` at `n = M.prec`, the set whose lifts are
/// counted by the general lifting law.
pub fn h_conditions(m: &MatMod, a: u32, b: u32) -> bool {
    let n = m.prec();
    if a > 0 && !m.is_identity_mod(a.min(n)) {
        return false;
    }
    if n <= a {
        return true;
    }
    if m.is_identity_mod(a + 1) {
        return false;
    }
    let det = det_shifted_val_unchecked(m, a);
    if n <= a + b {
        det.is_at_least(a + n)
    } else {
        det.is_exactly(2 * a + b)
    }
}

/// Membership in `N_{a,b}(n)` for an element `(z, dw; w, -z)` of the
/// complement of a ramified Cartan `(0, d)` at `l = 2`; there `M mod 2^n`
/// fixes `det(M - I) = 1 - z^2 + d w^2` modulo `2^(n+1)`.
pub fn n_conditions_two(m: &MatMod, d: i64, a: u32, b: u32) -> bool {
    let n = m.prec();
    if !m.is_identity_mod(a) || m.is_identity_mod(a + 1) {
        return false;
    }
    let q = m.modulus() * 2;
    let e = m.entries();
    let (z, w) = (e[0], e[2]);
    let val = (1 + q - mulmod(z, z, q) + mulmod(reduce_i64(d, q), mulmod(w, w, q), q)) % q;
    let det = if val == 0 {
        TruncVal::AtLeast(n + 1)
    } else {
        TruncVal::Exact(valuation(val, m.ell()))
    };
    if n < 2 * a + b {
        det.is_at_least(n + 1)
    } else {
        det.is_exactly(2 * a + b)
    }
}

/// Whether `m` lies in the non-Cartan coset of a ramified normalizer at `l = 2`.
fn uses_n_conditions(amb: &AmbientGroup, m: &MatMod) -> Option<i64> {
    let p = amb.params()?;
    (amb.is_normalizer()
        && amb.ell().is_two()
        && amb.cartan_type() == Some(CartanType::Ramified)
        && complement_shape(m, &p))
    .then_some(p.d())
}

/// Lifting-law membership at `M.prec`: `N_{a,b}` on the complement of a
/// ramified normalizer at `l = 2`, `H_{a,b}` everywhere else.
pub fn lift_conditions(amb: &AmbientGroup, m: &MatMod, a: u32, b: u32) -> bool {
    match uses_n_conditions(amb, m) {
        Some(d) => n_conditions_two(m, d, a, b),
        None => h_conditions(m, a, b),
    }
}

/// Elements of `G(n+1)` above `M` (at precision `n`) satisfying the
/// lifting-law conditions at precision `n + 1`.
pub fn lift_count_empirical(g: &FiniteSubgroup, m: &MatMod, a: u32, b: u32) -> Result<u64> {
    let amb = g.ambient();
    let lifts = lifts_in_group(g, m)?;
    Ok(lifts.iter().filter(|x| lift_conditions(&amb, x, a, b)).count() as u64)
}

/// The elements of `G(M.prec + 1)` reducing to `M`.
pub fn lifts_in_group(g: &FiniteSubgroup, m: &MatMod) -> Result<Vec<MatMod>> {
    let amb = g.ambient();
    let n = m.prec();
    if m.ell() != amb.ell() {
        return Err(Error::Precision(format!("{m} is not over Z_{}", amb.ell())));
    }
    if g.prec() <= n {
        if !g.contains(&m.reduce(g.prec())?) {
            return Err(Error::Domain(format!("{m} does not reduce into G")));
        }
        let mut out = Vec::new();
        amb.for_each_lift(m, |x| out.push(x));
        return Ok(out);
    }
    let up = if g.prec() == n + 1 {
        g.clone()
    } else {
        reduce_group(g, n + 1)?
    };
    let out: Vec<MatMod> = up
        .elements()
        .iter()
        .filter(|x| x.reduce(n).map(|r| r == *m).unwrap_or(false))
        .copied()
        .collect();
    if out.is_empty() {
        return Err(Error::Domain(format!("{m} is not in the reduction of G")));
    }
    Ok(out)
}

/// The reduction `M_{a,b}(n)` of the stratum, computed from `G` at a
/// precision above both `n` and `a + b`.
pub fn stratum_reduction(g: &FiniteSubgroup, a: u32, b: u32, n: u32, budget: &Budget) -> Result<Vec<MatMod>> {
    let p = (a + b + 1).max(n).max(g.prec());
    let big = lift_group(g, p, budget)?;
    let mut out: Vec<MatMod> = big
        .elements()
        .iter()
        .filter(|m| is_shape(m, a, b))
        .map(|m| m.reduce(n))
        .collect::<Result<_>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// For each `M` in `M_{a,b}(n)`, the number of its lifts lying in `M_{a,b}(n+1)`.
pub fn stratum_lift_counts(g: &FiniteSubgroup, a: u32, b: u32, n: u32, budget: &Budget) -> Result<Vec<(MatMod, u64)>> {
    let lower = stratum_reduction(g, a, b, n, budget)?;
    let upper = stratum_reduction(g, a, b, n + 1, budget)?;
    let mut counts: Vec<(MatMod, u64)> = lower.iter().map(|m| (*m, 0)).collect();
    for x in &upper {
        let r = x.reduce(n)?;
        let i = lower
            .binary_search(&r)
            .map_err(|_| Error::Internal(format!("{x} reduces outside the stratum")))?;
        counts[i].1 += 1;
    }
    Ok(counts)
}

/// Per-`b` counts of `Determined(a, b)` among the elements of `G(p)`, and
/// `#G(p)`. Never materializes `G(p)`: lifts are walked depth first and
/// branches that cannot stay congruent to `I` mod `l^a` are pruned.
pub fn scan_row(g: &FiniteSubgroup, a: u32, p: u32, budget: &Budget) -> Result<(Vec<u64>, BigUint)> {
    let amb = g.ambient();
    let ell = amb.ell();
    let dim = amb.dim();
    if p < g.prec() {
        return Err(Error::Precision(format!(
            "scan precision {p} is below the group precision {}",
            g.prec()
        )));
    }
    ell.pow(p)?;
    let start: Vec<MatMod> = g
        .elements()
        .iter()
        .filter(|m| m.is_identity_mod(a.min(g.prec())))
        .copied()
        .collect();
    let total = BigUint::from(g.len()) * ell.big_pow(dim * (p - g.prec()));
    let free_from = a.min(p).max(g.prec());
    let leaves = BigUint::from(start.len()) * ell.big_pow(dim * (p - free_from));
    if leaves > BigUint::from(budget.max_scan()) {
        return Err(Error::Resource {
            ell: ell.get(),
            prec: p,
            detail: format!("scan of {leaves} matrices exceeds the budget of {}", budget.max_scan()),
        });
    }
    let width = (p - a.min(p)) as usize;
    let mut counts = vec![0u64; width];
    if start.is_empty() || width == 0 {
        return Ok((counts, total));
    }
    let mut frontier = start;
    let mut prec = g.prec();
    while prec < p && frontier.len() < 4096 {
        let mut next = Vec::with_capacity(frontier.len() * 16);
        for m in &frontier {
            amb.for_each_lift(m, |x| {
                if x.is_identity_mod(a) {
                    next.push(x)
                }
            });
        }
        frontier = next;
        prec += 1;
    }
    let partial = frontier
        .par_iter()
        .fold(
            || vec![0u64; width],
            |mut acc, m| {
                walk(&amb, m, a, p, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; width],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(u, v)| *u += v);
                x
            },
        );
    counts.iter_mut().zip(partial).for_each(|(u, v)| *u += v);
    Ok((counts, total))
}

fn walk(amb: &AmbientGroup, m: &MatMod, a: u32, p: u32, acc: &mut [u64]) {
    if m.prec() == p {
        if let ShapeAtPrecision::Determined(k) = classify_matrix(m) {
            if k.a == a {
                acc[k.b as usize] += 1;
            }
        }
        return;
    }
    amb.for_each_lift(m, |x| {
        if x.is_identity_mod(a) {
            walk(amb, &x, a, p, acc)
        }
    });
}

/// `mu_{a,b}` for `b = 0..=b_max` by exhaustive counting at precision
/// `max(a + b_max + 1, G.prec)`.
pub fn oracle_row(g: &FiniteSubgroup, a: u32, b_max: u32, budget: &Budget) -> Result<Vec<Rat>> {
    let p = (a + b_max + 1).max(g.prec());
    let (counts, total) = scan_row(g, a, p, budget)?;
    let total = num_bigint::BigInt::from(total);
    Ok((0..=b_max)
        .map(|b| Rat::new(counts[b as usize].into(), total.clone()))
        .collect())
}

pub fn oracle_measure(g: &FiniteSubgroup, a: u32, b: u32, budget: &Budget) -> Result<Rat> {
    Ok(oracle_row(g, a, b, budget)?.pop().expect("row is nonempty"))
}

/// Whether `M_{a,b}` is empty, decided from `G(n0)`.
///
/// For `GL2` and unramified Cartans this intersects `G(n0)` with the
/// lifting-law sets; for the other ambients it counts directly at
/// precision `a + b + 1`.
pub fn is_empty_mab(g: &FiniteSubgroup, a: u32, b: u32, budget: &Budget) -> Result<bool> {
    let amb = g.ambient();
    let n0 = g.prec();
    let unramified = !amb.is_normalizer() && amb.cartan_type() != Some(CartanType::Ramified);
    if !unramified {
        let (counts, _) = scan_row(g, a, (a + b + 1).max(n0), budget)?;
        return Ok(counts[b as usize] == 0);
    }
    if a >= n0 {
        return Ok(b > 0 && amb.tangent_cards().t_sing_nonzero == 0);
    }
    let hit = if a + b < n0 {
        g.elements().par_iter().any(|m| is_shape(m, a, b))
    } else {
        g.elements().par_iter().any(|m| h_conditions(m, a, b))
    };
    Ok(!hit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::CartanParams;
    use crate::modarith::{rat_from_str, Prime};
    use crate::subgroup::{close, SubgroupSpec};

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn full(amb: AmbientGroup, n: u32) -> FiniteSubgroup {
        close(&SubgroupSpec::full(amb, n).unwrap(), &Budget::default()).unwrap()
    }

    fn r(s: &str) -> Rat {
        rat_from_str(s).unwrap()
    }

    #[test]
    fn classify_examples() {
        let m = MatMod::from_rows(p(3), 3, [[1, 9], [3, 1]]).unwrap();
        assert_eq!(
            classify_matrix(&m),
            ShapeAtPrecision::Determined(KernelShape { a: 1, b: 1 })
        );
        let i = MatMod::identity(p(5), 2).unwrap();
        assert_eq!(
            classify_matrix(&i),
            ShapeAtPrecision::Undetermined { a_min: 2, b_min: 0 }
        );
        let m = MatMod::from_rows(p(2), 1, [[2, 1], [1, 1]]).unwrap();
        assert_eq!(
            classify_matrix(&m),
            ShapeAtPrecision::Determined(KernelShape { a: 0, b: 0 })
        );
        let m = MatMod::from_rows(p(3), 2, [[1, 3], [0, 1]]).unwrap();
        assert_eq!(
            classify_matrix(&m),
            ShapeAtPrecision::Undetermined { a_min: 1, b_min: 1 }
        );
    }

    #[test]
    fn counting_examples() {
        let gl = full(AmbientGroup::gl2(p(2)), 1);
        assert_eq!(mab_count(&gl, 0, 0).unwrap(), 2);
        assert_eq!(counting_measure(&gl, 0, 0).unwrap(), r("1/3"));
        assert!(mab_count(&gl, 0, 1).is_err());
        let split = full(AmbientGroup::cartan(CartanParams::new(0, 1, p(3)).unwrap(), p(3)), 1);
        assert_eq!(mab_count(&split, 0, 0).unwrap(), 1);
        let ns = AmbientGroup::cartan(CartanParams::new(0, 2, p(3)).unwrap(), p(3));
        assert_eq!(counting_measure(&full(ns, 1), 0, 0).unwrap(), r("7/8"));
        let ns3 = full(ns, 3);
        for (a, b) in [(0, 1), (1, 1), (0, 2)] {
            assert_eq!(mab_count(&ns3, a, b).unwrap(), 0);
        }
    }

    #[test]
    fn lift_count_examples() {
        let three = p(3);
        let amb = AmbientGroup::normalizer(CartanParams::new(0, 3, three).unwrap(), three);
        let g = full(amb, 1);
        let m = MatMod::from_rows(three, 1, [[1, 3], [1, 1]]).unwrap();
        assert_eq!(lift_count_empirical(&g, &m, 0, 1).unwrap(), 9);
        let m = MatMod::from_rows(three, 1, [[1, -3], [1, -1]]).unwrap();
        assert_eq!(lift_count_empirical(&g, &m, 0, 1).unwrap(), 6);
        let gl = full(AmbientGroup::gl2(three), 1);
        let i = MatMod::identity(three, 1).unwrap();
        assert_eq!(lift_count_empirical(&gl, &i, 1, 0).unwrap(), 48);
        assert_eq!(lift_count_empirical(&gl, &i, 1, 2).unwrap(), 32);
    }

    #[test]
    fn lift_count_rejects_foreign_matrix() {
        let three = p(3);
        let split = AmbientGroup::cartan(CartanParams::new(0, 1, three).unwrap(), three);
        let triv = close(
            &SubgroupSpec::new(split, 1, vec![MatMod::identity(three, 1).unwrap()]).unwrap(),
            &Budget::default(),
        )
        .unwrap();
        let m = MatMod::from_rows(three, 1, [[2, 0], [0, 2]]).unwrap();
        assert!(matches!(lift_count_empirical(&triv, &m, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn oracle_matches_materialized_count() {
        let b = Budget::default();
        let g = crate::subgroup::tests::worked_example();
        for a in 0..=2 {
            let row = oracle_row(&g, a, 2, &b).unwrap();
            for (bb, mu) in row.iter().enumerate() {
                let big = lift_group(&g, (a + bb as u32 + 1).max(2), &b).unwrap();
                assert_eq!(*mu, counting_measure(&big, a, bb as u32).unwrap(), "({a}, {bb})");
            }
        }
        assert_eq!(oracle_measure(&g, 0, 0, &b).unwrap(), r("1/3"));
        assert_eq!(oracle_measure(&g, 1, 0, &b).unwrap(), r("1/12"));
    }

    #[test]
    fn emptiness_examples() {
        let b = Budget::default();
        let two = p(2);
        let split = full(AmbientGroup::cartan(CartanParams::new(1, 0, two).unwrap(), two), 1);
        for bb in 0..4 {
            assert!(is_empty_mab(&split, 0, bb, &b).unwrap());
        }
        let gl = full(AmbientGroup::gl2(p(3)), 1);
        for (a, bb) in [(0, 0), (0, 3), (2, 0), (2, 2)] {
            assert!(!is_empty_mab(&gl, a, bb, &b).unwrap());
        }
        let g = crate::subgroup::tests::worked_example();
        assert!(is_empty_mab(&g, 0, 1, &b).unwrap());
        assert!(is_empty_mab(&g, 1, 1, &b).unwrap());
        assert!(!is_empty_mab(&g, 0, 2, &b).unwrap());
    }
}
