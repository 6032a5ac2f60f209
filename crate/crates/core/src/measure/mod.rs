//! Measure families: partitions of `N^2` into admissible cells carrying
//! exact constants `c` with `mu_{a,b} = c * l^-(dim*a + b)`.

mod closed;
mod engine;
mod lifts;

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::modarith::{rat_to_string, Prime, Rat};

pub use closed::{closed_form_gl2, closed_form_nonsplit, closed_form_normalizer, closed_form_split};
pub use engine::{family, family_gl2_or_unramified, family_normalizer, family_of_group, family_ramified};
pub use lifts::{f_general, f_normalizer_complement};

/// A subset of `N` that is finite or an upward-closed tail.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NatSet {
    Finite(Vec<u32>),
    Tail(u32),
}

impl NatSet {
    pub fn single(n: u32) -> Self {
        NatSet::Finite(vec![n])
    }

    pub fn range(lo: u32, hi_inclusive: u32) -> Self {
        NatSet::Finite((lo..=hi_inclusive).collect())
    }

    pub fn all() -> Self {
        NatSet::Tail(0)
    }

    pub fn contains(&self, n: u32) -> bool {
        match self {
            NatSet::Finite(v) => v.binary_search(&n).is_ok(),
            NatSet::Tail(k) => n >= *k,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, NatSet::Finite(v) if v.is_empty())
    }

    pub fn min(&self) -> Option<u32> {
        match self {
            NatSet::Finite(v) => v.first().copied(),
            NatSet::Tail(k) => Some(*k),
        }
    }

    /// Largest value at which membership can change.
    fn horizon(&self) -> u32 {
        match self {
            NatSet::Finite(v) => v.last().copied().unwrap_or(0),
            NatSet::Tail(k) => *k,
        }
    }

    pub fn intersect(&self, other: &NatSet) -> NatSet {
        match (self, other) {
            (NatSet::Tail(x), NatSet::Tail(y)) => NatSet::Tail(*x.max(y)),
            (NatSet::Finite(v), s) | (s, NatSet::Finite(v)) => {
                NatSet::Finite(v.iter().copied().filter(|n| s.contains(*n)).collect())
            }
        }
    }

    /// `{n - k : n in S, n >= k}`.
    pub fn shift_down(&self, k: u32) -> NatSet {
        match self {
            NatSet::Finite(v) => NatSet::Finite(v.iter().filter(|n| **n >= k).map(|n| n - k).collect()),
            NatSet::Tail(t) => NatSet::Tail(t.saturating_sub(k)),
        }
    }

    /// `{n + k : n in S}`.
    pub fn shift_up(&self, k: u32) -> NatSet {
        match self {
            NatSet::Finite(v) => NatSet::Finite(v.iter().map(|n| n + k).collect()),
            NatSet::Tail(t) => NatSet::Tail(t + k),
        }
    }

    /// `sum_{n in S} x^n` for `0 < x < 1`.
    pub fn geometric_sum(&self, x: &Rat) -> Rat {
        match self {
            NatSet::Finite(v) => v.iter().map(|n| pow_rat(x, *n)).fold(Rat::zero(), |s, t| s + t),
            NatSet::Tail(k) => pow_rat(x, *k) / (Rat::one() - x),
        }
    }
}

impl fmt::Display for NatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatSet::Finite(v) => {
                let items: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            NatSet::Tail(k) => write!(f, ">={k}"),
        }
    }
}

fn pow_rat(x: &Rat, n: u32) -> Rat {
    num_traits::pow(x.clone(), n as usize)
}

/// A product `A x B` of two nonempty admissible subsets of `N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdmissibleSet {
    pub a_set: NatSet,
    pub b_set: NatSet,
}

impl AdmissibleSet {
    pub fn new(a_set: NatSet, b_set: NatSet) -> Self {
        AdmissibleSet { a_set, b_set }
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.a_set.contains(a) && self.b_set.contains(b)
    }

    pub fn is_empty(&self) -> bool {
        self.a_set.is_empty() || self.b_set.is_empty()
    }

    pub fn intersect(&self, other: &AdmissibleSet) -> AdmissibleSet {
        AdmissibleSet::new(self.a_set.intersect(&other.a_set), self.b_set.intersect(&other.b_set))
    }
}

impl fmt::Display for AdmissibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a in {} x b in {}", self.a_set, self.b_set)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureCell {
    pub region: AdmissibleSet,
    pub constant: Rat,
    pub provenance: String,
}

impl MeasureCell {
    pub fn new(a_set: NatSet, b_set: NatSet, constant: Rat, provenance: impl Into<String>) -> Self {
        MeasureCell {
            region: AdmissibleSet::new(a_set, b_set),
            constant,
            provenance: provenance.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureFamily {
    ell: Prime,
    dim: u32,
    cells: Vec<MeasureCell>,
}

impl MeasureFamily {
    /// Builds a family and checks that it is an exact partition of `N^2`
    /// with nonnegative constants and total mass 1.
    pub fn new(ell: Prime, dim: u32, cells: Vec<MeasureCell>) -> Result<Self> {
        let fam = Self::new_unchecked(ell, dim, cells);
        fam.verify_partition()?;
        let mass = fam.total_mass();
        if mass != Rat::one() {
            return Err(Error::Internal(format!(
                "total mass is {} instead of 1",
                rat_to_string(&mass)
            )));
        }
        Ok(fam)
    }

    /// Builds a family without the partition and mass checks.
    pub fn new_unchecked(ell: Prime, dim: u32, mut cells: Vec<MeasureCell>) -> Self {
        cells.retain(|c| !c.region.is_empty());
        cells.sort_by_key(|c| (c.region.a_set.min(), c.region.b_set.min()));
        MeasureFamily { ell, dim, cells }
    }

    pub fn ell(&self) -> Prime {
        self.ell
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn cells(&self) -> &[MeasureCell] {
        &self.cells
    }

    pub fn law(&self) -> String {
        format!("c * {}^-({}a+b)", self.ell, self.dim)
    }

    pub fn cell_at(&self, a: u32, b: u32) -> Result<&MeasureCell> {
        self.cells
            .iter()
            .find(|c| c.region.contains(a, b))
            .ok_or_else(|| Error::Partition(format!("no cell contains ({a}, {b})")))
    }

    /// `mu_{a,b}`.
    pub fn evaluate(&self, a: u32, b: u32) -> Result<Rat> {
        let cell = self.cell_at(a, b)?;
        let e = self.dim as i64 * a as i64 + b as i64;
        Ok(&cell.constant * self.ell.rat_pow(-e))
    }

    /// `sum_{a,b} mu_{a,b}`, with tails summed as geometric series.
    pub fn total_mass(&self) -> Rat {
        let xa = self.ell.rat_pow(-(self.dim as i64));
        let xb = self.ell.rat_pow(-1);
        self.cells
            .iter()
            .map(|c| &c.constant * c.region.a_set.geometric_sum(&xa) * c.region.b_set.geometric_sum(&xb))
            .fold(Rat::zero(), |s, t| s + t)
    }

    /// Checks pairwise disjointness, covering and nonnegativity. Membership
    /// is constant beyond the largest finite value or tail start, so a
    /// finite grid decides it.
    pub fn verify_partition(&self) -> Result<()> {
        for c in &self.cells {
            if c.constant.is_negative() {
                return Err(Error::Partition(format!("negative constant on {}", c.region)));
            }
        }
        let k = self
            .cells
            .iter()
            .map(|c| c.region.a_set.horizon().max(c.region.b_set.horizon()))
            .max()
            .unwrap_or(0)
            + 1;
        for a in 0..=k {
            for b in 0..=k {
                let hits = self.cells.iter().filter(|c| c.region.contains(a, b)).count();
                if hits != 1 {
                    return Err(Error::Partition(format!("({a}, {b}) lies in {hits} cells")));
                }
            }
        }
        Ok(())
    }

    /// Common refinement of `w1 * self + w2 * other`.
    pub fn weighted_sum(&self, w1: &Rat, other: &MeasureFamily, w2: &Rat) -> Result<MeasureFamily> {
        if self.ell != other.ell || self.dim != other.dim {
            return Err(Error::Precondition(
                "families over different groups cannot be added".into(),
            ));
        }
        Ok(MeasureFamily::new_unchecked(
            self.ell,
            self.dim,
            combine(&self.cells, w1, &other.cells, w2),
        ))
    }
}

pub(crate) fn combine(x: &[MeasureCell], w1: &Rat, y: &[MeasureCell], w2: &Rat) -> Vec<MeasureCell> {
    let mut out = Vec::new();
    for c in x {
        for d in y {
            let region = c.region.intersect(&d.region);
            if region.is_empty() {
                continue;
            }
            let provenance = if d.constant.is_zero() {
                c.provenance.clone()
            } else if c.constant.is_zero() {
                d.provenance.clone()
            } else {
                format!("{} + {}", c.provenance, d.provenance)
            };
            out.push(MeasureCell {
                region,
                constant: w1 * &c.constant + w2 * &d.constant,
                provenance,
            });
        }
    }
    out
}
