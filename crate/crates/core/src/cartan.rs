//! Cartan subgroups of `GL2(Z_l)`, their normalizers, and the ambient groups
//! the measure engine works in.
//!
//! A Cartan subgroup is described by integer parameters `(c, d)` with
//! `w^2 = c w + d`; its elements are the invertible matrices
//! `(x, d y; y, x + c y)`. The other coset of its normalizer consists of the
//! invertible matrices `(z, -d w + c z; w, -z)`.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modarith::{is_square_unit, mulmod, reduce_i64, sqrt_hensel, MatMod, Prime};

/// Normal-form parameters `(c, d)`: either `c = 0, d != 0`, or `l = 2`,
/// `c = 1` and `d` zero or odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CartanParams {
    c: i64,
    d: i64,
}

impl CartanParams {
    pub fn new(c: i64, d: i64, ell: Prime) -> Result<Self> {
        match c {
            0 if d != 0 => Ok(CartanParams { c, d }),
            0 => Err(Error::InvalidRing("c = 0 and d = 0 give a non-reduced algebra".into())),
            1 if ell.is_two() && (d == 0 || d % 2 != 0) => Ok(CartanParams { c, d }),
            _ => Err(Error::InvalidRing(format!(
                "({c}, {d}) is not in normal form for l = {ell}; run classify to normalize"
            ))),
        }
    }

    pub fn c(&self) -> i64 {
        self.c
    }

    pub fn d(&self) -> i64 {
        self.d
    }
}

impl fmt::Display for CartanParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.c, self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CartanType {
    Split,
    Nonsplit,
    Ramified,
}

impl fmt::Display for CartanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CartanType::Split => "split",
            CartanType::Nonsplit => "nonsplit",
            CartanType::Ramified => "ramified",
        })
    }
}

/// Bring arbitrary parameters `(c0, d0)` of a quadratic ring to normal form.
pub fn normalize_params(c0: i64, d0: i64, ell: Prime) -> Result<CartanParams> {
    let (c0w, d0w) = (c0 as i128, d0 as i128);
    let narrow =
        |v: i128| i64::try_from(v).map_err(|_| Error::InvalidRing(format!("normalized parameter {v} overflows")));
    if c0 % 2 == 0 {
        let d = narrow(d0w + (c0w / 2) * (c0w / 2))?;
        return CartanParams::new(0, d, ell);
    }
    if !ell.is_two() {
        // Completing the square gives d0 + c0^2/4; scaling by the unit square
        // 4 keeps the ring and makes the parameter integral.
        let d = narrow(c0w * c0w + 4 * d0w)?;
        return CartanParams::new(0, d, ell);
    }
    let d1 = narrow(d0w + (c0w * c0w - 1) / 4)?;
    if d1 % 2 != 0 {
        CartanParams::new(1, d1, ell)
    } else {
        // w^2 = w + d1 has discriminant 1 + 4 d1, an odd square in Z_2, so
        // the ring is Z_2 x Z_2.
        CartanParams::new(1, 0, ell)
    }
}

pub fn classify(p: &CartanParams, ell: Prime) -> CartanType {
    if ell.is_two() {
        return match (p.c, p.d) {
            (1, 0) => CartanType::Split,
            (1, _) => CartanType::Nonsplit,
            _ => CartanType::Ramified,
        };
    }
    if p.d.rem_euclid(ell.get() as i64) == 0 {
        CartanType::Ramified
    } else if is_square_unit(p.d, ell).expect("d is a unit") {
        CartanType::Split
    } else {
        CartanType::Nonsplit
    }
}

/// Cardinalities of the mod-`l` tangent space `T`, of its invertible
/// elements, and of its nonzero singular elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TangentCard {
    pub t_all: u64,
    pub t_units: u64,
    pub t_sing_nonzero: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AmbientKind {
    Gl2,
    Cartan(CartanParams),
    Normalizer(CartanParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AmbientGroup {
    kind: AmbientKind,
    ell: Prime,
    cartan_type: Option<CartanType>,
}

impl fmt::Display for AmbientGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.cartan_type) {
            (AmbientKind::Gl2, _) => write!(f, "GL2(Z_{})", self.ell),
            (AmbientKind::Cartan(p), Some(t)) => write!(f, "{t} Cartan {p} over Z_{}", self.ell),
            (AmbientKind::Normalizer(p), Some(t)) => write!(f, "normalizer of {t} Cartan {p} over Z_{}", self.ell),
            _ => unreachable!("Cartan ambients always carry a type"),
        }
    }
}

impl AmbientGroup {
    pub fn gl2(ell: Prime) -> Self {
        AmbientGroup {
            kind: AmbientKind::Gl2,
            ell,
            cartan_type: None,
        }
    }

    pub fn cartan(params: CartanParams, ell: Prime) -> Self {
        AmbientGroup {
            kind: AmbientKind::Cartan(params),
            ell,
            cartan_type: Some(classify(&params, ell)),
        }
    }

    pub fn normalizer(params: CartanParams, ell: Prime) -> Self {
        AmbientGroup {
            kind: AmbientKind::Normalizer(params),
            ell,
            cartan_type: Some(classify(&params, ell)),
        }
    }

    pub fn kind(&self) -> AmbientKind {
        self.kind
    }

    pub fn ell(&self) -> Prime {
        self.ell
    }

    pub fn cartan_type(&self) -> Option<CartanType> {
        self.cartan_type
    }

    pub fn params(&self) -> Option<CartanParams> {
        match self.kind {
            AmbientKind::Gl2 => None,
            AmbientKind::Cartan(p) | AmbientKind::Normalizer(p) => Some(p),
        }
    }

    pub fn is_normalizer(&self) -> bool {
        matches!(self.kind, AmbientKind::Normalizer(_))
    }

    /// The Cartan subgroup itself, for a Cartan or normalizer ambient.
    pub fn cartan_part(&self) -> Option<AmbientGroup> {
        self.params().map(|p| AmbientGroup::cartan(p, self.ell))
    }

    pub fn dim(&self) -> u32 {
        match self.kind {
            AmbientKind::Gl2 => 4,
            _ => 2,
        }
    }

    /// Smallest working precision: the two cosets of the normalizer of a
    /// ramified Cartan overlap modulo 2, and the ramified engines at `l = 2`
    /// need at least modulus 4.
    pub fn min_prec(&self) -> u32 {
        if self.ell.is_two() && self.cartan_type == Some(CartanType::Ramified) {
            2
        } else {
            1
        }
    }

    pub fn tangent_cards(&self) -> TangentCard {
        let l = self.ell.get();
        match (self.kind, self.cartan_type) {
            (AmbientKind::Gl2, _) => TangentCard {
                t_all: l.pow(4),
                t_units: l * (l - 1) * (l - 1) * (l + 1),
                t_sing_nonzero: (l + 1) * (l * l - 1),
            },
            (_, Some(CartanType::Split)) => TangentCard {
                t_all: l * l,
                t_units: (l - 1) * (l - 1),
                t_sing_nonzero: 2 * (l - 1),
            },
            (_, Some(CartanType::Nonsplit)) => TangentCard {
                t_all: l * l,
                t_units: l * l - 1,
                t_sing_nonzero: 0,
            },
            (_, Some(CartanType::Ramified)) => TangentCard {
                t_all: l * l,
                t_units: l * (l - 1),
                t_sing_nonzero: l - 1,
            },
            _ => unreachable!("Cartan ambients always carry a type"),
        }
    }

    /// `#G'(n)` for this ambient group.
    pub fn order(&self, n: u32) -> Result<BigUint> {
        if n == 0 {
            return Err(Error::Precondition("precision must be positive".into()));
        }
        let l = self.ell.get();
        match self.kind {
            AmbientKind::Gl2 => Ok(self.ell.big_pow(4 * (n - 1)) * BigUint::from((l * l - 1) * (l * l - l))),
            AmbientKind::Cartan(_) => Ok(self.cartan_order(n)),
            AmbientKind::Normalizer(_) => {
                if n < self.min_prec() {
                    return Err(Error::Precondition(format!(
                        "the cosets of a ramified normalizer at l = 2 are only disjoint from modulus 4 on (got n = {n})"
                    )));
                }
                Ok(self.cartan_order(n) * 2u32)
            }
        }
    }

    fn cartan_order(&self, n: u32) -> BigUint {
        BigUint::from(self.tangent_cards().t_units) * self.ell.big_pow(2 * (n - 1))
    }

    /// Membership of an invertible matrix in the reduction of the ambient.
    pub fn contains(&self, m: &MatMod) -> Result<bool> {
        check_same_ell(m, self.ell)?;
        if !m.is_invertible() {
            return Err(Error::Precondition(format!("{m} is not invertible")));
        }
        Ok(match self.kind {
            AmbientKind::Gl2 => true,
            AmbientKind::Cartan(p) => cartan_shape(m, &p),
            AmbientKind::Normalizer(p) => cartan_shape(m, &p) || complement_shape(m, &p),
        })
    }

    /// Representative of the non-identity coset of the Cartan in its
    /// normalizer, `(1, c; 0, -1)`.
    pub fn coset_representative(&self, prec: u32) -> Result<Option<MatMod>> {
        match self.params() {
            None => Ok(None),
            Some(p) => MatMod::from_rows(self.ell, prec, [[1, p.c], [0, -1]]).map(Some),
        }
    }

    /// All elements of `G'(prec)`, sorted.
    pub fn enumerate(&self, prec: u32) -> Result<Vec<MatMod>> {
        let ell = self.ell;
        let m = ell.pow(prec)?;
        let mut out = Vec::new();
        match self.kind {
            AmbientKind::Gl2 => {
                let l = ell.get();
                let mut level: Vec<MatMod> = Vec::new();
                for a in 0..l {
                    for b in 0..l {
                        for c in 0..l {
                            for d in 0..l {
                                let x = MatMod::from_reduced(ell, 1, l, [a, b, c, d]);
                                if x.is_invertible() {
                                    level.push(x);
                                }
                            }
                        }
                    }
                }
                for _ in 1..prec {
                    let mut next = Vec::with_capacity(level.len() * (l as usize).pow(4));
                    for x in &level {
                        self.for_each_lift(x, |y| next.push(y));
                    }
                    level = next;
                }
                out = level;
            }
            AmbientKind::Cartan(p) => push_shape(&mut out, ell, prec, m, &p, Coset::Cartan),
            AmbientKind::Normalizer(p) => {
                push_shape(&mut out, ell, prec, m, &p, Coset::Cartan);
                push_shape(&mut out, ell, prec, m, &p, Coset::Complement);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Visit every lift of `m` (an element of `G'(n)`) to `G'(n+1)`.
    #[inline]
    pub fn for_each_lift(&self, m: &MatMod, mut visit: impl FnMut(MatMod)) {
        let ell = m.ell();
        let l = ell.get();
        let q = m.modulus();
        let prec = m.prec() + 1;
        let big = q * l;
        match self.kind {
            AmbientKind::Gl2 => {
                let e = m.entries();
                for t0 in 0..l {
                    for t1 in 0..l {
                        for t2 in 0..l {
                            for t3 in 0..l {
                                visit(MatMod::from_reduced(
                                    ell,
                                    prec,
                                    big,
                                    [e[0] + q * t0, e[1] + q * t1, e[2] + q * t2, e[3] + q * t3],
                                ));
                            }
                        }
                    }
                }
            }
            AmbientKind::Cartan(p) => lift_shape(m, &p, Coset::Cartan, big, &mut visit),
            AmbientKind::Normalizer(p) => {
                let in_c = cartan_shape(m, &p);
                let in_n = complement_shape(m, &p);
                if in_c {
                    lift_shape(m, &p, Coset::Cartan, big, &mut visit);
                }
                if in_n && !in_c {
                    lift_shape(m, &p, Coset::Complement, big, &mut visit);
                } else if in_n {
                    // Both shapes match only modulo 2 for a ramified Cartan;
                    // emit the complement lifts that are not Cartan lifts.
                    let mut seen = Vec::new();
                    lift_shape(m, &p, Coset::Cartan, big, &mut |x| seen.push(x));
                    lift_shape(m, &p, Coset::Complement, big, &mut |x| {
                        if !seen.contains(&x) {
                            visit(x)
                        }
                    });
                }
            }
        }
    }
}

fn check_same_ell(m: &MatMod, ell: Prime) -> Result<()> {
    if m.ell() != ell {
        return Err(Error::Precision(format!(
            "matrix over Z/{}, ambient over Z_{ell}",
            m.ell()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Coset {
    Cartan,
    Complement,
}

#[inline]
fn shape_matrix(ell: Prime, prec: u32, m: u64, p: &CartanParams, coset: Coset, u: u64, v: u64) -> MatMod {
    let c = reduce_i64(p.c, m);
    let d = reduce_i64(p.d, m);
    match coset {
        // (x, d y; y, x + c y)
        Coset::Cartan => MatMod::from_reduced(ell, prec, m, [u, mulmod(d, v, m), v, (u + mulmod(c, v, m)) % m]),
        // (z, -d w + c z; w, -z)
        Coset::Complement => {
            let top = (mulmod(c, u, m) + m - mulmod(d, v, m)) % m;
            MatMod::from_reduced(ell, prec, m, [u, top, v, (m - u) % m])
        }
    }
}

fn push_shape(out: &mut Vec<MatMod>, ell: Prime, prec: u32, m: u64, p: &CartanParams, coset: Coset) {
    for u in 0..m {
        for v in 0..m {
            let x = shape_matrix(ell, prec, m, p, coset, u, v);
            if x.is_invertible() {
                out.push(x);
            }
        }
    }
}

#[inline]
fn lift_shape(m: &MatMod, p: &CartanParams, coset: Coset, big: u64, visit: &mut impl FnMut(MatMod)) {
    let ell = m.ell();
    let l = ell.get();
    let q = m.modulus();
    let e = m.entries();
    for s in 0..l {
        for t in 0..l {
            visit(shape_matrix(
                ell,
                m.prec() + 1,
                big,
                p,
                coset,
                e[0] + q * s,
                e[2] + q * t,
            ));
        }
    }
}

#[inline]
pub(crate) fn cartan_shape(m: &MatMod, p: &CartanParams) -> bool {
    let md = m.modulus();
    let e = m.entries();
    let c = reduce_i64(p.c, md);
    let d = reduce_i64(p.d, md);
    e[1] == mulmod(d, e[2], md) && e[3] == (e[0] + mulmod(c, e[2], md)) % md
}

#[inline]
pub(crate) fn complement_shape(m: &MatMod, p: &CartanParams) -> bool {
    let md = m.modulus();
    let e = m.entries();
    let c = reduce_i64(p.c, md);
    let d = reduce_i64(p.d, md);
    e[1] == (mulmod(c, e[0], md) + md - mulmod(d, e[2], md)) % md && e[3] == (md - e[0]) % md
}

/// Whether `M` lies in `C(n)`.
pub fn in_cartan(m: &MatMod, p: &CartanParams) -> Result<bool> {
    if !m.is_invertible() {
        return Err(Error::Precondition(format!("{m} is not invertible")));
    }
    Ok(cartan_shape(m, p))
}

/// Whether `M` lies in `(N \ C)(n)`.
pub fn in_complement(m: &MatMod, p: &CartanParams) -> Result<bool> {
    if !m.is_invertible() {
        return Err(Error::Precondition(format!("{m} is not invertible")));
    }
    Ok(complement_shape(m, p))
}

/// Diagonal model of a split Cartan: `(x, d y; y, x) -> diag(x - y sqrt d, x + y sqrt d)`
/// for odd `l`, and `(x, 0; y, x + y) -> diag(x, x + y)` for `l = 2`.
pub fn split_diagonalize(m: &MatMod, p: &CartanParams) -> Result<MatMod> {
    let ell = m.ell();
    if classify(p, ell) != CartanType::Split {
        return Err(Error::Precondition(format!(
            "parameters {p} do not give a split Cartan"
        )));
    }
    if !in_cartan(m, p)? {
        return Err(Error::Precondition(format!("{m} is not in the Cartan {p}")));
    }
    let md = m.modulus();
    let e = m.entries();
    let (x, y) = (e[0], e[2]);
    if ell.is_two() {
        return Ok(MatMod::from_reduced(ell, m.prec(), md, [x, 0, 0, (x + y) % md]));
    }
    let s = sqrt_hensel(p.d, ell, m.prec())?.value();
    let ys = mulmod(y, s, md);
    Ok(MatMod::from_reduced(
        ell,
        m.prec(),
        md,
        [(x + md - ys) % md, 0, 0, (x + ys) % md],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    fn params(c: i64, d: i64, ell: u64) -> CartanParams {
        CartanParams::new(c, d, p(ell)).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_params(0, 5, p(5)).unwrap(), params(0, 5, 5));
        assert_eq!(normalize_params(2, 1, p(3)).unwrap(), params(0, 2, 3));
        assert_eq!(normalize_params(1, 1, p(2)).unwrap(), params(1, 1, 2));
        assert_eq!(normalize_params(1, 1, p(3)).unwrap(), params(0, 5, 3));
        assert_eq!(normalize_params(3, 2, p(2)).unwrap(), params(1, 0, 2));
        assert!(matches!(normalize_params(0, 0, p(5)), Err(Error::InvalidRing(_))));
        assert!(matches!(normalize_params(2, -1, p(3)), Err(Error::InvalidRing(_))));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&params(0, 4, 5), p(5)), CartanType::Split);
        assert_eq!(classify(&params(0, 2, 5), p(5)), CartanType::Nonsplit);
        assert_eq!(classify(&params(0, 10, 5), p(5)), CartanType::Ramified);
        assert_eq!(classify(&params(1, 1, 2), p(2)), CartanType::Nonsplit);
        assert_eq!(classify(&params(1, 0, 2), p(2)), CartanType::Split);
        assert_eq!(classify(&params(0, 3, 2), p(2)), CartanType::Ramified);
    }

    #[test]
    fn tangent_card_examples() {
        let gl = AmbientGroup::gl2(p(2)).tangent_cards();
        assert_eq!((gl.t_all, gl.t_units, gl.t_sing_nonzero), (16, 6, 9));
        let split = AmbientGroup::cartan(params(0, 1, 3), p(3)).tangent_cards();
        assert_eq!((split.t_all, split.t_units, split.t_sing_nonzero), (9, 4, 4));
        for ell in [2u64, 3, 5, 7] {
            let ns = if ell == 2 {
                params(1, 1, 2)
            } else {
                params(0, if ell == 7 { 3 } else { 2 }, ell)
            };
            let amb = AmbientGroup::normalizer(ns, p(ell));
            assert_eq!(amb.cartan_type(), Some(CartanType::Nonsplit));
            assert_eq!(amb.tangent_cards().t_sing_nonzero, 0);
        }
    }

    #[test]
    fn order_examples() {
        let ns = AmbientGroup::cartan(params(0, 2, 3), p(3));
        assert_eq!(ns.order(2).unwrap(), BigUint::from(72u32));
        assert_eq!(AmbientGroup::gl2(p(2)).order(2).unwrap(), BigUint::from(96u32));
        assert_eq!(
            AmbientGroup::cartan(params(0, 5, 5), p(5)).order(1).unwrap(),
            BigUint::from(20u32)
        );
        let ram2 = AmbientGroup::normalizer(params(0, 3, 2), p(2));
        assert!(ram2.order(1).is_err());
        assert_eq!(ram2.order(2).unwrap(), BigUint::from(16u32));
    }

    #[test]
    fn membership_examples() {
        let ell = p(3);
        let pr = params(0, 3, 3);
        let i = MatMod::identity(ell, 2).unwrap();
        assert!(in_cartan(&i, &pr).unwrap());
        assert!(!in_complement(&i, &pr).unwrap());
        let m = MatMod::from_rows(ell, 2, [[1, 3], [1, 1]]).unwrap();
        assert!(in_cartan(&m, &pr).unwrap());
        assert!(!in_complement(&m, &pr).unwrap());
        let m = MatMod::from_rows(ell, 2, [[1, -3], [1, -1]]).unwrap();
        assert!(in_complement(&m, &pr).unwrap());
        assert!(!in_cartan(&m, &pr).unwrap());
        let singular = MatMod::from_rows(ell, 2, [[0, 0], [0, 1]]).unwrap();
        assert!(in_cartan(&singular, &pr).is_err());
    }

    #[test]
    fn diagonal_model_examples() {
        let ell = p(5);
        let pr = params(0, 4, 5);
        let m = MatMod::from_rows(ell, 1, [[1, 4], [1, 1]]).unwrap();
        let d = split_diagonalize(&m, &pr).unwrap();
        assert_eq!(d.entries(), [4, 0, 0, 3]);
        let i = MatMod::identity(ell, 2).unwrap();
        assert!(split_diagonalize(&i, &pr).unwrap().is_identity());
        let two = p(2);
        let m = MatMod::from_rows(two, 2, [[1, 0], [2, 3]]).unwrap();
        assert_eq!(split_diagonalize(&m, &params(1, 0, 2)).unwrap().entries(), [1, 0, 0, 3]);
        assert!(split_diagonalize(&m, &params(1, 1, 2)).is_err());
    }

    #[test]
    fn normal_form_is_enforced() {
        assert!(CartanParams::new(1, 2, p(2)).is_err());
        assert!(CartanParams::new(1, 1, p(3)).is_err());
        assert!(CartanParams::new(0, 0, p(3)).is_err());
    }
}
