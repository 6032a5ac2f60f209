//! Exact arithmetic over `Z/l^n Z` and `Q`.
//!
//! Residues and 2x2 matrices carry their precision explicitly; combining
//! values of different precision is an error. Valuations of quantities that
//! are only known modulo a power of `l` come back as [`TruncVal`], which
//! distinguishes an exact valuation from a lower bound.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Exact rationals in lowest terms with positive denominator.
pub type Rat = BigRational;

/// Moduli must stay below this bound so products fit in `u128`.
const MAX_MODULUS: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    pub fn new(ell: u64) -> Result<Self> {
        if ell < 2 || !is_prime(ell) {
            return Err(Error::Domain(format!("{ell} is not prime")));
        }
        Ok(Prime(ell))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn is_two(self) -> bool {
        self.0 == 2
    }

    /// `l^k` as a machine word, refusing moduli that would overflow the
    /// residue arithmetic.
    pub fn pow(self, k: u32) -> Result<u64> {
        let mut acc: u64 = 1;
        for _ in 0..k {
            acc = acc
                .checked_mul(self.0)
                .filter(|v| *v <= MAX_MODULUS)
                .ok_or_else(|| Error::Resource {
                    ell: self.0,
                    prec: k,
                    detail: "modulus exceeds machine-word arithmetic".into(),
                })?;
        }
        Ok(acc)
    }

    pub fn big_pow(self, k: u32) -> BigUint {
        num_traits::pow(BigUint::from(self.0), k as usize)
    }

    /// `l^e` as a rational, for any sign of `e`.
    pub fn rat_pow(self, e: i64) -> Rat {
        let p = BigInt::from(num_traits::pow(BigUint::from(self.0), e.unsigned_abs() as usize));
        if e >= 0 {
            Rat::from_integer(p)
        } else {
            Rat::new(BigInt::one(), p)
        }
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut k = 2u64;
    while k * k <= n {
        if n.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

/// `l`-adic valuation of a nonzero integer.
pub fn valuation(mut x: u64, ell: Prime) -> u32 {
    debug_assert!(x != 0);
    let mut v = 0;
    while x.is_multiple_of(ell.0) {
        x /= ell.0;
        v += 1;
    }
    v
}

fn valuation_i64(x: i64, ell: Prime) -> u32 {
    valuation(x.unsigned_abs(), ell)
}

#[inline]
pub(crate) fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub(crate) fn reduce_i64(x: i64, m: u64) -> u64 {
    x.rem_euclid(m as i64) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m`, if it exists.
pub(crate) fn invmod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// A valuation known either exactly or only as a lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TruncVal {
    /// Every lift to `Z_l` has exactly this valuation.
    Exact(u32),
    /// The quantity vanishes modulo `l^n`; nothing more is known.
    AtLeast(u32),
}

impl TruncVal {
    /// True when the valuation is certainly `>= n`.
    pub fn is_at_least(self, n: u32) -> bool {
        match self {
            TruncVal::Exact(k) => k >= n,
            TruncVal::AtLeast(k) => k >= n,
        }
    }

    pub fn is_exactly(self, n: u32) -> bool {
        self == TruncVal::Exact(n)
    }
}

impl fmt::Display for TruncVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncVal::Exact(k) => write!(f, "={k}"),
            TruncVal::AtLeast(k) => write!(f, ">={k}"),
        }
    }
}

/// An element of `Z/l^prec Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Residue {
    value: u64,
    prec: u32,
    ell: Prime,
}

impl Residue {
    pub fn new(value: i64, ell: Prime, prec: u32) -> Result<Self> {
        if prec == 0 {
            return Err(Error::Precondition("residue precision must be positive".into()));
        }
        let m = ell.pow(prec)?;
        Ok(Residue {
            value: reduce_i64(value, m),
            prec,
            ell,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn ell(&self) -> Prime {
        self.ell
    }

    pub fn modulus(&self) -> u64 {
        // Construction already checked that this fits.
        self.ell.pow(self.prec).expect("modulus checked at construction")
    }

    pub fn valuation(&self) -> TruncVal {
        if self.value == 0 {
            TruncVal::AtLeast(self.prec)
        } else {
            TruncVal::Exact(valuation(self.value, self.ell))
        }
    }

    fn check(&self, other: &Residue) -> Result<u64> {
        if self.ell != other.ell || self.prec != other.prec {
            return Err(Error::Precision(format!(
                "residues mod {}^{} and {}^{}",
                self.ell, self.prec, other.ell, other.prec
            )));
        }
        Ok(self.modulus())
    }

    pub fn add(&self, other: &Residue) -> Result<Residue> {
        let m = self.check(other)?;
        Ok(Residue {
            value: ((self.value as u128 + other.value as u128) % m as u128) as u64,
            ..*self
        })
    }

    pub fn sub(&self, other: &Residue) -> Result<Residue> {
        let m = self.check(other)?;
        Ok(Residue {
            value: (self.value + (m - other.value)) % m,
            ..*self
        })
    }

    pub fn mul(&self, other: &Residue) -> Result<Residue> {
        let m = self.check(other)?;
        Ok(Residue {
            value: mulmod(self.value, other.value, m),
            ..*self
        })
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}^{}", self.value, self.ell, self.prec)
    }
}

/// A 2x2 matrix over `Z/l^prec Z`, entries stored row-major.
///
/// Field order makes the derived `Ord` compare entries first, which is what
/// the sorted element arrays of finite subgroups rely on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatMod {
    e: [u64; 4],
    prec: u32,
    ell: Prime,
    modulus: u64,
}

impl MatMod {
    pub fn new(ell: Prime, prec: u32, entries: [i64; 4]) -> Result<Self> {
        if prec == 0 {
            return Err(Error::Precondition("matrix precision must be positive".into()));
        }
        let m = ell.pow(prec)?;
        Ok(MatMod {
            e: entries.map(|x| reduce_i64(x, m)),
            prec,
            ell,
            modulus: m,
        })
    }

    pub fn from_rows(ell: Prime, prec: u32, rows: [[i64; 2]; 2]) -> Result<Self> {
        Self::new(ell, prec, [rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
    }

    /// Entries must already be reduced modulo `modulus = l^prec`.
    #[inline]
    pub(crate) fn from_reduced(ell: Prime, prec: u32, modulus: u64, e: [u64; 4]) -> Self {
        debug_assert!(e.iter().all(|x| *x < modulus));
        MatMod { e, prec, ell, modulus }
    }

    pub fn identity(ell: Prime, prec: u32) -> Result<Self> {
        Self::new(ell, prec, [1, 0, 0, 1])
    }

    pub fn entries(&self) -> [u64; 4] {
        self.e
    }

    pub fn entry(&self, row: usize, col: usize) -> Residue {
        Residue {
            value: self.e[2 * row + col],
            prec: self.prec,
            ell: self.ell,
        }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn ell(&self) -> Prime {
        self.ell
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn mul(&self, other: &MatMod) -> Result<MatMod> {
        if self.prec != other.prec || self.ell != other.ell {
            return Err(Error::Precision(format!(
                "matrices mod {}^{} and {}^{}",
                self.ell, self.prec, other.ell, other.prec
            )));
        }
        Ok(self.mul_same(other))
    }

    #[inline]
    pub(crate) fn mul_same(&self, other: &MatMod) -> MatMod {
        let m = self.modulus as u128;
        let [a, b, c, d] = self.e.map(|x| x as u128);
        let [p, q, r, s] = other.e.map(|x| x as u128);
        let e = [
            ((a * p + b * r) % m) as u64,
            ((a * q + b * s) % m) as u64,
            ((c * p + d * r) % m) as u64,
            ((c * q + d * s) % m) as u64,
        ];
        MatMod { e, ..*self }
    }

    #[inline]
    pub fn det(&self) -> u64 {
        let m = self.modulus;
        let ad = mulmod(self.e[0], self.e[3], m);
        let bc = mulmod(self.e[1], self.e[2], m);
        (ad + m - bc) % m
    }

    pub fn det_residue(&self) -> Residue {
        Residue {
            value: self.det(),
            prec: self.prec,
            ell: self.ell,
        }
    }

    #[inline]
    pub fn is_invertible(&self) -> bool {
        !self.det().is_multiple_of(self.ell.0)
    }

    pub fn inverse(&self) -> Option<MatMod> {
        let m = self.modulus;
        let inv = invmod(self.det(), m)?;
        let [a, b, c, d] = self.e;
        let neg = |x: u64| (m - x) % m;
        let e = [
            mulmod(d, inv, m),
            mulmod(neg(b), inv, m),
            mulmod(neg(c), inv, m),
            mulmod(a, inv, m),
        ];
        Some(MatMod { e, ..*self })
    }

    /// Reduction to a lower precision.
    pub fn reduce(&self, prec: u32) -> Result<MatMod> {
        if prec == 0 || prec > self.prec {
            return Err(Error::Precision(format!(
                "cannot reduce mod {}^{} to {}^{prec}",
                self.ell, self.prec, self.ell
            )));
        }
        let m = self.ell.pow(prec)?;
        Ok(MatMod {
            e: self.e.map(|x| x % m),
            prec,
            ell: self.ell,
            modulus: m,
        })
    }

    /// `M == I (mod l^k)`; `k` is capped at the precision.
    #[inline]
    pub fn is_identity_mod(&self, k: u32) -> bool {
        if k == 0 {
            return true;
        }
        let k = k.min(self.prec);
        let q = if k == self.prec {
            self.modulus
        } else {
            self.ell.pow(k).expect("below modulus")
        };
        let m = self.modulus;
        ((self.e[0] + m - 1) % m).is_multiple_of(q)
            && self.e[1].is_multiple_of(q)
            && self.e[2].is_multiple_of(q)
            && ((self.e[3] + m - 1) % m).is_multiple_of(q)
    }

    /// Largest `k <= prec` with `M == I (mod l^k)`.
    pub fn identity_level(&self) -> u32 {
        let m = self.modulus;
        let diffs = [(self.e[0] + m - 1) % m, self.e[1], self.e[2], (self.e[3] + m - 1) % m];
        diffs
            .iter()
            .filter(|x| **x != 0)
            .map(|x| valuation(*x, self.ell))
            .min()
            .unwrap_or(self.prec)
    }

    pub fn is_identity(&self) -> bool {
        self.e == [1 % self.modulus, 0, 0, 1 % self.modulus]
    }
}

impl fmt::Display for MatMod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]] mod {}^{}",
            self.e[0], self.e[1], self.e[2], self.e[3], self.ell, self.prec
        )
    }
}

/// Valuation of `det(M - I)` for `M == I (mod l^a)`.
///
/// Writing `M - I = l^a N` with `N` known mod `l^(prec-a)`, the determinant
/// `l^(2a) det N` is known mod `l^(a+prec)`.
pub fn det_shifted_val(m: &MatMod, a: u32) -> Result<TruncVal> {
    if a > m.prec {
        return Err(Error::Precondition(format!("shift {a} exceeds precision {}", m.prec)));
    }
    if !m.is_identity_mod(a) {
        return Err(Error::Precondition(format!(
            "{m} is not congruent to I mod {}^{a}",
            m.ell
        )));
    }
    Ok(det_shifted_val_unchecked(m, a))
}

#[inline]
pub(crate) fn det_shifted_val_unchecked(m: &MatMod, a: u32) -> TruncVal {
    let rest = m.prec - a;
    if rest == 0 {
        return TruncVal::AtLeast(2 * a);
    }
    let q = m.ell.pow(a).expect("below modulus");
    let small = m.modulus / q;
    let md = m.modulus;
    let n = [
        (m.e[0] + md - 1) % md / q,
        m.e[1] / q,
        m.e[2] / q,
        (m.e[3] + md - 1) % md / q,
    ];
    let det = (mulmod(n[0], n[3], small) + small - mulmod(n[1], n[2], small)) % small;
    if det == 0 {
        TruncVal::AtLeast(a + m.prec)
    } else {
        TruncVal::Exact(2 * a + valuation(det, m.ell))
    }
}

/// Whether the integer `d` (prime to `l`) is a square in `Z_l^x`.
pub fn is_square_unit(d: i64, ell: Prime) -> Result<bool> {
    if d.rem_euclid(ell.0 as i64) == 0 {
        return Err(Error::Precondition(format!("{d} is divisible by {ell}")));
    }
    if ell.is_two() {
        return Ok(d.rem_euclid(8) == 1);
    }
    let r = reduce_i64(d, ell.0);
    Ok(powmod(r, (ell.0 - 1) / 2, ell.0) == 1)
}

/// A square root of `d = l^(2k) m` in `Z_l`, returned modulo `l^(prec+k)`,
/// so that its square is correct modulo `l^(prec+2k)`.
///
/// The residue is the reduction of a genuine `l`-adic root; of the two roots
/// the one with the smaller representative is returned.
pub fn sqrt_hensel(d: i64, ell: Prime, prec: u32) -> Result<Residue> {
    if prec == 0 {
        return Err(Error::Precondition("precision must be positive".into()));
    }
    if d == 0 {
        return Err(Error::Domain("0 has no unit part".into()));
    }
    let v = valuation_i64(d, ell);
    if v % 2 == 1 {
        return Err(Error::Domain(format!("{d} has odd {ell}-adic valuation")));
    }
    let k = v / 2;
    let unit = d / (ell.pow(v)? as i64);
    if !is_square_unit(unit, ell)? {
        return Err(Error::Domain(format!("{d} is not a square in Z_{ell}")));
    }
    let m = ell.pow(prec)?;
    let u = if ell.is_two() {
        sqrt_unit_two(unit, prec)
    } else {
        sqrt_unit_odd(unit, ell, prec)?
    };
    let canon = {
        let other = (m - u) % m;
        if other == 0 {
            u
        } else {
            u.min(other)
        }
    };
    let scale = ell.pow(k)? as i64;
    Residue::new((canon as i64) * scale, ell, prec + k)
}

fn sqrt_unit_odd(unit: i64, ell: Prime, prec: u32) -> Result<u64> {
    let p = ell.0;
    let target = reduce_i64(unit, p);
    let mut r = (1..p)
        .find(|t| mulmod(*t, *t, p) == target)
        .ok_or_else(|| Error::Domain("no root mod l".into()))?;
    // Newton step one digit at a time: r <- r - (r^2 - unit) / (2r).
    for j in 1..prec {
        let q = ell.pow(j)?;
        let next = ell.pow(j + 1)?;
        let f = (mulmod(r, r, next) as i128 - reduce_i64(unit, next) as i128).rem_euclid(next as i128) as u64;
        let quotient = f / q;
        let inv2r = invmod(mulmod(2, r, p), p).expect("2r is a unit");
        let t = (p - mulmod(quotient % p, inv2r, p)) % p;
        r += t * q;
    }
    Ok(r)
}

fn sqrt_unit_two(unit: i64, prec: u32) -> u64 {
    // Invariant: r^2 == unit (mod 2^(j+1)); then r == +-sqrt(unit) (mod 2^j).
    let mut r: u64 = 1;
    let mut j = 2;
    while j < prec {
        let check = 1u64 << (j + 2);
        if !(mulmod(r, r, check) + check - reduce_i64(unit, check)).is_multiple_of(check) {
            r += 1 << j;
        }
        j += 1;
    }
    r % (1u64 << prec)
}

/// Render a rational as `num/den` in lowest terms, always with a denominator.
pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parse `num/den` or a bare integer.
pub fn rat_from_str(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rat::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Rat::from_integer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn prime_rejects_composites() {
        assert!(Prime::new(9).is_err());
        assert!(Prime::new(1).is_err());
        assert!(Prime::new(7).is_ok());
    }

    #[test]
    fn mat_mul_examples() {
        let ell = p(2);
        let i = MatMod::identity(ell, 3).unwrap();
        assert_eq!(i.mul(&i).unwrap(), i);
        let a = MatMod::from_rows(ell, 2, [[3, 3], [0, 1]]).unwrap();
        let b = MatMod::from_rows(ell, 2, [[1, 1], [3, 0]]).unwrap();
        // 3*1+3*3 = 12, 3*1+3*0 = 3, 0+3 = 3, 0.
        assert_eq!(a.mul(&b).unwrap(), MatMod::from_rows(ell, 2, [[0, 3], [3, 0]]).unwrap());
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).unwrap().is_identity());
    }

    #[test]
    fn mat_mul_rejects_mixed_precision() {
        let a = MatMod::identity(p(3), 1).unwrap();
        let b = MatMod::identity(p(3), 2).unwrap();
        assert!(matches!(a.mul(&b), Err(Error::Precision(_))));
    }

    #[test]
    fn det_shifted_val_examples() {
        let i = MatMod::identity(p(5), 3).unwrap();
        assert_eq!(det_shifted_val(&i, 3).unwrap(), TruncVal::AtLeast(6));
        let m = MatMod::from_rows(p(3), 3, [[1, 9], [3, 1]]).unwrap();
        assert_eq!(det_shifted_val(&m, 1).unwrap(), TruncVal::Exact(3));
        let m = MatMod::from_rows(p(2), 1, [[2, 1], [1, 1]]).unwrap();
        assert_eq!(det_shifted_val(&m, 0).unwrap(), TruncVal::Exact(0));
        assert!(matches!(det_shifted_val(&m, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn square_unit_examples() {
        assert!(is_square_unit(4, p(5)).unwrap());
        assert!(!is_square_unit(2, p(5)).unwrap());
        assert!(is_square_unit(17, p(2)).unwrap());
        assert!(!is_square_unit(3, p(2)).unwrap());
        assert!(is_square_unit(10, p(5)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(sqrt_hensel(9, p(5), 2).unwrap().value(), 3);
        assert_eq!(sqrt_hensel(6, p(5), 2).unwrap().value(), 9);
        let r = sqrt_hensel(17, p(2), 3).unwrap();
        assert_eq!((r.value(), r.prec()), (1, 3));
        assert!(matches!(sqrt_hensel(2, p(5), 2), Err(Error::Domain(_))));
        assert!(matches!(sqrt_hensel(5, p(5), 2), Err(Error::Domain(_))));
        // 25 * 6 = 150: root 5 * 9 modulo 5^3.
        let r = sqrt_hensel(150, p(5), 2).unwrap();
        assert_eq!((r.value(), r.prec()), (45, 3));
    }

    #[test]
    fn residue_ops_check_precision() {
        let a = Residue::new(7, p(3), 2).unwrap();
        let b = Residue::new(5, p(3), 2).unwrap();
        assert_eq!(a.mul(&b).unwrap().value(), 35 % 9);
        assert_eq!(a.sub(&b).unwrap().value(), 2);
        assert_eq!(Residue::new(-1, p(3), 2).unwrap().value(), 8);
        assert!(a.add(&Residue::new(1, p(3), 3).unwrap()).is_err());
        assert_eq!(Residue::new(18, p(3), 3).unwrap().valuation(), TruncVal::Exact(2));
        assert_eq!(Residue::new(27, p(3), 3).unwrap().valuation(), TruncVal::AtLeast(3));
    }

    #[test]
    fn rat_formatting() {
        assert_eq!(rat_to_string(&Rat::from_integer(0.into())), "0/1");
        assert_eq!(rat_to_string(&Rat::new(2.into(), 6.into())), "1/3");
        assert_eq!(rat_from_str("4/12"), Some(Rat::new(1.into(), 3.into())));
        assert_eq!(rat_from_str("x"), None);
    }
}
