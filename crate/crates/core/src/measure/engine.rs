//! The family engine: base counts in `G(n0)` extended by the lifting laws,
//! direct counting for ramified Cartans, and the coset split for normalizers.

use num_traits::One;
use rayon::prelude::*;

use crate::cartan::{AmbientGroup, AmbientKind, CartanParams, CartanType};
use crate::eigenspace::{classify_matrix, h_conditions, n_conditions_two, oracle_row, KernelShape, ShapeAtPrecision};
use crate::error::{Error, Result};
use crate::modarith::{is_square_unit, mulmod, sqrt_hensel, valuation, MatMod, Rat};
use crate::subgroup::{close, coset_split, lift_group, Budget, FiniteSubgroup, SubgroupSpec};

use super::{combine, MeasureCell, MeasureFamily, NatSet};

fn ratio(num: usize, den: usize) -> Rat {
    Rat::new(num.into(), den.into())
}

/// The measure family of the open subgroup described by `spec`.
pub fn family(spec: &SubgroupSpec, budget: &Budget) -> Result<MeasureFamily> {
    family_of_group(&close(spec, budget)?, budget)
}

/// The measure family of the preimage of `g`, where `g.prec()` is a level.
pub fn family_of_group(g: &FiniteSubgroup, budget: &Budget) -> Result<MeasureFamily> {
    let amb = g.ambient();
    let cells = match amb.kind() {
        AmbientKind::Gl2 => unramified_cells(g),
        AmbientKind::Cartan(p) => cartan_cells(g, &p, budget)?,
        AmbientKind::Normalizer(p) => normalizer_cells(g, &p, budget)?,
    };
    MeasureFamily::new(amb.ell(), amb.dim(), cells)
}

pub fn family_gl2_or_unramified(g: &FiniteSubgroup) -> Result<MeasureFamily> {
    let amb = g.ambient();
    if amb.is_normalizer() || amb.cartan_type() == Some(CartanType::Ramified) {
        return Err(Error::Precondition(format!("{amb} is not GL2 or an unramified Cartan")));
    }
    MeasureFamily::new(amb.ell(), amb.dim(), unramified_cells(g))
}

pub fn family_ramified(g: &FiniteSubgroup, budget: &Budget) -> Result<MeasureFamily> {
    let amb = g.ambient();
    match amb.kind() {
        AmbientKind::Cartan(p) if amb.cartan_type() == Some(CartanType::Ramified) => {
            MeasureFamily::new(amb.ell(), 2, ramified_cells(g, &p, budget)?)
        }
        _ => Err(Error::Precondition(format!("{amb} is not a ramified Cartan"))),
    }
}

pub fn family_normalizer(g: &FiniteSubgroup, budget: &Budget) -> Result<MeasureFamily> {
    let amb = g.ambient();
    match amb.kind() {
        AmbientKind::Normalizer(p) => MeasureFamily::new(amb.ell(), 2, normalizer_cells(g, &p, budget)?),
        _ => Err(Error::Precondition(format!("{amb} is not a normalizer"))),
    }
}

fn cartan_cells(g: &FiniteSubgroup, p: &CartanParams, budget: &Budget) -> Result<Vec<MeasureCell>> {
    if g.ambient().cartan_type() == Some(CartanType::Ramified) {
        ramified_cells(g, p, budget)
    } else {
        Ok(unramified_cells(g))
    }
}

/// `GL2` or an unramified Cartan, from counts in `G(n0)`:
/// * `a + b < n0`: the count itself;
/// * `a < n0 <= a + b`: `#H_{a,b}(n0)` times the lifting factor `(l-1) l^-(a+b+1-n0)`;
/// * `a >= n0`: only the identity survives mod `l^n0`, so the tangent space decides.
fn unramified_cells(g: &FiniteSubgroup) -> Vec<MeasureCell> {
    let amb = g.ambient();
    let ell = amb.ell();
    let l = ell.get() as i64;
    let dim = amb.dim() as i64;
    let n0 = g.prec();
    let order = g.len();
    let tc = amb.tangent_cards();
    let shapes: Vec<ShapeAtPrecision> = g.elements().par_iter().map(classify_matrix).collect();
    let mut cells = Vec::new();
    for a in 0..n0 {
        for b in 0..n0 - a {
            let target = ShapeAtPrecision::Determined(KernelShape { a, b });
            let count = shapes.iter().filter(|s| **s == target).count();
            let c = ratio(count, order) * ell.rat_pow(dim * a as i64 + b as i64);
            cells.push(MeasureCell::new(
                NatSet::single(a),
                NatSet::single(b),
                c,
                format!("count mod {ell}^{n0}"),
            ));
        }
        let count = g.elements().par_iter().filter(|m| h_conditions(m, a, n0 - a)).count();
        let c = ratio(count, order)
            * Rat::from_integer((l - 1).into())
            * ell.rat_pow(n0 as i64 - a as i64 - 1 + dim * a as i64);
        cells.push(MeasureCell::new(
            NatSet::single(a),
            NatSet::Tail(n0 - a),
            c,
            format!("lifting law from mod {ell}^{n0}"),
        ));
    }
    let scale = ell.rat_pow(dim * (n0 as i64 - 1)) / Rat::from_integer(order.into());
    let units = Rat::from_integer(tc.t_units.into()) * &scale;
    let sing = Rat::from_integer((tc.t_sing_nonzero * (l as u64 - 1)).into()) * &scale;
    cells.push(MeasureCell::new(
        NatSet::Tail(n0),
        NatSet::single(0),
        units,
        "tangent space, invertible part",
    ));
    cells.push(MeasureCell::new(
        NatSet::Tail(n0),
        NatSet::Tail(1),
        sing,
        "tangent space, singular part",
    ));
    cells
}

/// Ramified Cartan `(0, d)` with `d = m l^v`. Rows `a <= n0` are counted
/// directly up to the last `b` that can be nonzero; row `n0` extends to all
/// `a >= n0` with the same constant. When `v` is even and `m` a square, the
/// strata with `b > v` are read off an isomorphic subgroup of a split
/// Cartan.
fn ramified_cells(g: &FiniteSubgroup, p: &CartanParams, budget: &Budget) -> Result<Vec<MeasureCell>> {
    let ell = g.ambient().ell();
    let lifted;
    let g = if ell.is_two() && g.prec() < 2 {
        lifted = lift_group(g, 2, budget)?;
        &lifted
    } else {
        g
    };
    let n0 = g.prec();
    let d = p.d();
    let v = valuation(d.unsigned_abs(), ell);
    let unit = d / ell.pow(v)? as i64;
    let square = v.is_multiple_of(2) && is_square_unit(unit, ell)?;
    let direct_max = if v.is_multiple_of(2) && !square && ell.is_two() {
        v + 2
    } else {
        v
    };

    let mut cells = Vec::new();
    for a in 0..=n0 {
        let row = oracle_row(g, a, direct_max, budget)?;
        let a_set = if a < n0 { NatSet::single(a) } else { NatSet::Tail(n0) };
        for (b, mu) in row.into_iter().enumerate() {
            let c = mu * ell.rat_pow(2 * a as i64 + b as i64);
            cells.push(MeasureCell::new(
                a_set.clone(),
                NatSet::single(b as u32),
                c,
                format!("direct count mod {ell}^{}", (a + direct_max + 1).max(n0)),
            ));
        }
    }
    if !square {
        cells.push(MeasureCell::new(
            NatSet::all(),
            NatSet::Tail(direct_max + 1),
            Rat::from_integer(0.into()),
            "empty stratum",
        ));
        return Ok(cells);
    }
    let k = v / 2;
    let g1 = split_model(g, d, k, budget)?;
    if !ell.is_two() {
        cells.extend(pull_back(unramified_cells(&g1), k, v, "split model"));
    } else {
        cells.push(MeasureCell::new(
            NatSet::all(),
            NatSet::range(v + 1, v + 2),
            Rat::from_integer(0.into()),
            "empty stratum",
        ));
        let g2 = diagonal_model(&g1, budget)?;
        cells.extend(pull_back(unramified_cells(&g2), k + 1, v + 2, "diagonal model"));
    }
    Ok(cells)
}

/// Cells of a model family, moved by `(a, b) -> (a - da, b + db)` and
/// restricted to `b > db`.
fn pull_back(cells: Vec<MeasureCell>, da: u32, db: u32, tag: &str) -> Vec<MeasureCell> {
    cells
        .into_iter()
        .filter_map(|c| {
            let a_set = c.region.a_set.shift_down(da);
            let b_set = c.region.b_set.shift_up(db).intersect(&NatSet::Tail(db + 1));
            let cell = MeasureCell::new(a_set, b_set, c.constant, format!("{tag}: {}", c.provenance));
            (!cell.region.is_empty()).then_some(cell)
        })
        .collect()
}

/// Image of `G` inside the Cartan `(0, 1)` under `(X, dY; Y, X) -> (X, sY; sY, X)`
/// with `s^2 = d`, `v(s) = k`. The image has level `n0 + k`.
fn split_model(g: &FiniteSubgroup, d: i64, k: u32, budget: &Budget) -> Result<FiniteSubgroup> {
    let ell = g.ambient().ell();
    let n1 = g.prec() + k;
    let up = lift_group(g, n1, budget)?;
    let s = sqrt_hensel(d, ell, g.prec())?;
    debug_assert_eq!(s.prec(), n1);
    let md = ell.pow(n1)?;
    let target = AmbientGroup::cartan(CartanParams::new(0, 1, ell)?, ell);
    let elements = up
        .elements()
        .iter()
        .map(|m| {
            let e = m.entries();
            let y = mulmod(e[2], s.value(), md);
            MatMod::from_reduced(ell, n1, md, [e[0], y, y, e[0]])
        })
        .collect();
    Ok(FiniteSubgroup::from_unsorted(target, n1, elements))
}

/// For `l = 2`: image of a subgroup of the Cartan `(0, 1)` under
/// `(X, Y; Y, X) -> diag(X + Y, X - Y)`, written in the split Cartan `(1, 0)`
/// as `(alpha, 0; beta - alpha, beta)`. The image has one more level.
fn diagonal_model(g: &FiniteSubgroup, budget: &Budget) -> Result<FiniteSubgroup> {
    let ell = g.ambient().ell();
    let n2 = g.prec() + 1;
    let up = lift_group(g, n2, budget)?;
    let md = ell.pow(n2)?;
    let target = AmbientGroup::cartan(CartanParams::new(1, 0, ell)?, ell);
    let elements = up
        .elements()
        .iter()
        .map(|m| {
            let e = m.entries();
            let alpha = (e[0] + e[2]) % md;
            let beta = (e[0] + md - e[2]) % md;
            MatMod::from_reduced(ell, n2, md, [alpha, 0, (beta + md - alpha) % md, beta])
        })
        .collect();
    Ok(FiniteSubgroup::from_unsorted(target, n2, elements))
}

/// Normalizer subgroups: half the family of `G n C` inside `C`, plus the
/// complement coset counted in `G(n0)` and extended geometrically.
fn normalizer_cells(g: &FiniteSubgroup, p: &CartanParams, budget: &Budget) -> Result<Vec<MeasureCell>> {
    let amb = g.ambient();
    let cartan = amb.cartan_part().expect("normalizers have a Cartan");
    let split = coset_split(g)?;
    if split.contained_in_cartan() {
        return cartan_cells(&g.retagged(cartan)?, p, budget);
    }
    let inner = FiniteSubgroup::from_sorted(cartan, g.prec(), split.in_cartan.clone());
    let inner_cells = cartan_cells(&inner, p, budget)?;
    let ramified_two = amb.ell().is_two() && amb.cartan_type() == Some(CartanType::Ramified);
    let comp = if ramified_two {
        complement_cells_two(g, &split.in_complement, p.d())
    } else {
        complement_cells(g, &split.in_complement)
    };
    Ok(combine(&inner_cells, &Rat::new(1.into(), 2.into()), &comp, &Rat::one()))
}

/// Complement coset, `l` odd or `C` unramified: only `a = 0` occurs; for
/// `b >= n0` the stratum mod `l^n0` no longer depends on `b` and each further
/// step keeps a fraction `1/l`.
fn complement_cells(g: &FiniteSubgroup, comp: &[MatMod]) -> Vec<MeasureCell> {
    let ell = g.ambient().ell();
    let l = ell.get() as i64;
    let n0 = g.prec();
    let order = g.len();
    let mut cells = Vec::new();
    for b in 0..n0 {
        let target = ShapeAtPrecision::Determined(KernelShape { a: 0, b });
        let count = comp.iter().filter(|m| classify_matrix(m) == target).count();
        let c = ratio(count, order) * ell.rat_pow(b as i64);
        cells.push(MeasureCell::new(
            NatSet::single(0),
            NatSet::single(b),
            c,
            format!("coset count mod {ell}^{n0}"),
        ));
    }
    let base = comp.iter().filter(|m| h_conditions(m, 0, n0)).count();
    let c = ratio(base, order) * Rat::from_integer((l - 1).into()) * ell.rat_pow(n0 as i64 - 1);
    cells.push(MeasureCell::new(
        NatSet::single(0),
        NatSet::Tail(n0),
        c,
        format!("coset lifting law from mod {ell}^{n0}"),
    ));
    cells.push(MeasureCell::new(
        NatSet::Tail(1),
        NatSet::all(),
        Rat::from_integer(0.into()),
        "coset, empty stratum",
    ));
    cells
}

/// Complement coset of a ramified Cartan at `l = 2`: `a` is 0 or 1, and
/// once `2a + b > n0` each further step halves the count.
fn complement_cells_two(g: &FiniteSubgroup, comp: &[MatMod], d: i64) -> Vec<MeasureCell> {
    let ell = g.ambient().ell();
    let n0 = g.prec();
    let order = g.len();
    let mut cells = Vec::new();
    for a in 0..=1u32 {
        let last = n0 - 2 * a;
        for b in 0..=last {
            let count = comp.iter().filter(|m| n_conditions_two(m, d, a, b)).count();
            let c = ratio(count, order) * ell.rat_pow(2 * a as i64 + b as i64);
            cells.push(MeasureCell::new(
                NatSet::single(a),
                NatSet::single(b),
                c,
                format!("coset count mod 2^{n0}"),
            ));
        }
        let base = comp.iter().filter(|m| n_conditions_two(m, d, a, n0 + 1)).count();
        let c = ratio(base, order) * ell.rat_pow(n0 as i64);
        cells.push(MeasureCell::new(
            NatSet::single(a),
            NatSet::Tail(last + 1),
            c,
            format!("coset lifting law from mod 2^{n0}"),
        ));
    }
    cells.push(MeasureCell::new(
        NatSet::Tail(2),
        NatSet::all(),
        Rat::from_integer(0.into()),
        "coset, empty stratum",
    ));
    cells
}
