//! Finite reductions `G(n)` of open subgroups: closure from generators,
//! lifting along the preimage convention, index bookkeeping and the split
//! of a normalizer subgroup into its two cosets.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::Zero;

use crate::cartan::{cartan_shape, complement_shape, AmbientGroup};
use crate::error::{Error, Result};
use crate::modarith::MatMod;

/// Enumeration guard, counted in stored matrix entries (four per matrix).
/// Streaming scans, which store nothing, may visit up to `SCAN_FACTOR` times
/// as many matrices as the materialization limit allows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_entries: u64,
}

pub const DEFAULT_BUDGET_ENTRIES: u64 = 100_000_000;
const SCAN_FACTOR: u64 = 100;

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_entries: DEFAULT_BUDGET_ENTRIES,
        }
    }
}

impl Budget {
    pub fn new(max_entries: u64) -> Self {
        Budget { max_entries }
    }

    pub fn max_elements(&self) -> u64 {
        self.max_entries / 4
    }

    pub fn max_scan(&self) -> u64 {
        self.max_elements().saturating_mul(SCAN_FACTOR)
    }

    pub(crate) fn check_elements(&self, predicted: &BigUint, amb: &AmbientGroup, prec: u32) -> Result<()> {
        if *predicted > BigUint::from(self.max_elements()) {
            return Err(Error::Resource {
                ell: amb.ell().get(),
                prec,
                detail: format!("{predicted} matrices exceed the budget of {} entries", self.max_entries),
            });
        }
        Ok(())
    }
}

/// An open subgroup given as the preimage of the group generated by
/// `generators` modulo `l^level`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupSpec {
    ambient: AmbientGroup,
    level: u32,
    generators: Vec<MatMod>,
}

impl SubgroupSpec {
    /// An empty generator list stands for the whole ambient group.
    pub fn new(ambient: AmbientGroup, level: u32, generators: Vec<MatMod>) -> Result<Self> {
        if level == 0 {
            return Err(Error::Spec("level must be positive".into()));
        }
        if ambient.is_normalizer() && level < ambient.min_prec() {
            return Err(Error::Spec(format!(
                "{ambient} needs level at least {} (its cosets overlap mod 2)",
                ambient.min_prec()
            )));
        }
        for g in &generators {
            if g.ell() != ambient.ell() || g.prec() != level {
                return Err(Error::Spec(format!(
                    "generator {g} is not a matrix mod {}^{level}",
                    ambient.ell()
                )));
            }
            if !g.is_invertible() {
                return Err(Error::Spec(format!("generator {g} is not invertible")));
            }
            if !ambient.contains(g)? {
                return Err(Error::Spec(format!("generator {g} is not in {ambient}")));
            }
        }
        Ok(SubgroupSpec {
            ambient,
            level,
            generators,
        })
    }

    pub fn full(ambient: AmbientGroup, level: u32) -> Result<Self> {
        Self::new(ambient, level, Vec::new())
    }

    pub fn ambient(&self) -> AmbientGroup {
        self.ambient
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn generators(&self) -> &[MatMod] {
        &self.generators
    }
}

/// The reduction `G(n)` as a sorted element array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSubgroup {
    ambient: AmbientGroup,
    prec: u32,
    elements: Vec<MatMod>,
}

impl FiniteSubgroup {
    /// Caller guarantees `elements` is a sorted, duplicate-free subgroup of
    /// the ambient reduction at `prec`.
    pub(crate) fn from_sorted(ambient: AmbientGroup, prec: u32, elements: Vec<MatMod>) -> Self {
        debug_assert!(elements.windows(2).all(|w| w[0] < w[1]));
        FiniteSubgroup {
            ambient,
            prec,
            elements,
        }
    }

    pub(crate) fn from_unsorted(ambient: AmbientGroup, prec: u32, mut elements: Vec<MatMod>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        FiniteSubgroup {
            ambient,
            prec,
            elements,
        }
    }

    pub fn ambient(&self) -> AmbientGroup {
        self.ambient
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn elements(&self) -> &[MatMod] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, m: &MatMod) -> bool {
        self.elements.binary_search(m).is_ok()
    }

    /// Same elements viewed inside another ambient group (used when a
    /// normalizer subgroup lies in the Cartan).
    pub fn retagged(&self, ambient: AmbientGroup) -> Result<FiniteSubgroup> {
        for m in &self.elements {
            if !ambient.contains(m)? {
                return Err(Error::Precondition(format!("{m} is not in {ambient}")));
            }
        }
        Ok(FiniteSubgroup {
            ambient,
            prec: self.prec,
            elements: self.elements.clone(),
        })
    }
}

/// Closure of the generators under multiplication, or the full ambient
/// reduction when there are none.
pub fn close(spec: &SubgroupSpec, budget: &Budget) -> Result<FiniteSubgroup> {
    let amb = spec.ambient;
    let n = spec.level;
    if spec.generators.is_empty() {
        let order = amb.order(n)?;
        budget.check_elements(&order, &amb, n)?;
        return Ok(FiniteSubgroup::from_sorted(amb, n, amb.enumerate(n)?));
    }
    let limit = budget.max_elements();
    let id = MatMod::identity(amb.ell(), n)?;
    let mut seen: HashSet<MatMod> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(id);
    queue.push_back(id);
    while let Some(x) = queue.pop_front() {
        for g in &spec.generators {
            let y = x.mul_same(g);
            if seen.insert(y) {
                if seen.len() as u64 > limit {
                    return Err(Error::Resource {
                        ell: amb.ell().get(),
                        prec: n,
                        detail: format!("closure exceeds {limit} elements"),
                    });
                }
                queue.push_back(y);
            }
        }
    }
    Ok(FiniteSubgroup::from_unsorted(amb, n, seen.into_iter().collect()))
}

/// `G(n)` for `n >= G.prec`: every ambient lift of every element.
pub fn lift_group(g: &FiniteSubgroup, n: u32, budget: &Budget) -> Result<FiniteSubgroup> {
    if n < g.prec {
        return Err(Error::Precision(format!(
            "cannot lift from precision {} down to {n}",
            g.prec
        )));
    }
    let amb = g.ambient;
    let predicted = BigUint::from(g.len()) * amb.ell().big_pow(amb.dim() * (n - g.prec));
    budget.check_elements(&predicted, &amb, n)?;
    let mut level = g.elements.clone();
    for _ in g.prec..n {
        let mut next = Vec::with_capacity(level.len() * amb.ell().get().pow(amb.dim()) as usize);
        for x in &level {
            amb.for_each_lift(x, |y| next.push(y));
        }
        level = next;
    }
    Ok(FiniteSubgroup::from_unsorted(amb, n, level))
}

/// Image of `G(prec)` modulo `l^n` for `n <= prec`.
pub fn reduce_group(g: &FiniteSubgroup, n: u32) -> Result<FiniteSubgroup> {
    let elements = g.elements.iter().map(|m| m.reduce(n)).collect::<Result<Vec<_>>>()?;
    Ok(FiniteSubgroup::from_unsorted(g.ambient, n, elements))
}

/// Index in the ambient group and the level (the working precision, by the
/// preimage convention).
pub fn index_and_level(g: &FiniteSubgroup) -> Result<(BigUint, u32)> {
    let order = g.ambient.order(g.prec)?;
    let size = BigUint::from(g.len());
    if size.is_zero() || !(&order % &size).is_zero() {
        return Err(Error::Internal(format!(
            "{} elements do not divide the ambient order {order}",
            g.len()
        )));
    }
    Ok((order / size, g.prec))
}

/// `Some(n - 1)` when `G(n)` is already the full preimage of its reduction
/// mod `l^(n-1)`, meaning the supplied level is not minimal.
pub fn smaller_level(g: &FiniteSubgroup) -> Result<Option<u32>> {
    let amb = g.ambient;
    let floor = if amb.is_normalizer() { amb.min_prec() } else { 1 };
    if g.prec <= floor {
        return Ok(None);
    }
    let below = reduce_group(g, g.prec - 1)?;
    let full = BigUint::from(below.len()) * amb.ell().big_pow(amb.dim());
    Ok((full == BigUint::from(g.len())).then_some(g.prec - 1))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetSplit {
    pub in_cartan: Vec<MatMod>,
    pub in_complement: Vec<MatMod>,
}

impl CosetSplit {
    pub fn contained_in_cartan(&self) -> bool {
        self.in_complement.is_empty()
    }
}

/// Split a normalizer subgroup into `G n C` and `G n (N \ C)`.
pub fn coset_split(g: &FiniteSubgroup) -> Result<CosetSplit> {
    let amb = g.ambient;
    let Some(p) = amb.params().filter(|_| amb.is_normalizer()) else {
        return Err(Error::Precondition(format!("{amb} is not a normalizer")));
    };
    if g.prec < amb.min_prec() {
        return Err(Error::Precondition(format!(
            "precision {} is below {}",
            g.prec,
            amb.min_prec()
        )));
    }
    let mut split = CosetSplit {
        in_cartan: Vec::new(),
        in_complement: Vec::new(),
    };
    for m in &g.elements {
        match (cartan_shape(m, &p), complement_shape(m, &p)) {
            (true, false) => split.in_cartan.push(*m),
            (false, true) => split.in_complement.push(*m),
            _ => return Err(Error::Internal(format!("{m} does not lie in exactly one coset"))),
        }
    }
    Ok(split)
}
