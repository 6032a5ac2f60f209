//! Number of lifts from level `n` to level `n + 1` inside a stratum.

use crate::cartan::TangentCard;
use crate::error::{Error, Result};
use crate::modarith::Prime;

/// Lifts of an element of `H_{a,b}(n)` to `H_{a,b}(n+1)`, for `GL2` and
/// unramified Cartans (and their normalizers).
pub fn f_general(n: u32, a: u32, b: u32, tc: &TangentCard, ell: Prime) -> u64 {
    let l = ell.get();
    if n < a {
        1
    } else if n == a {
        if b == 0 {
            tc.t_units
        } else {
            tc.t_sing_nonzero
        }
    } else if n < a + b {
        tc.t_all / l
    } else if n == a + b {
        tc.t_all - tc.t_all / l
    } else {
        tc.t_all
    }
}

/// Lifts of an element of the complement stratum of a ramified normalizer.
pub fn f_normalizer_complement(n: u32, a: u32, b: u32, ell: Prime) -> Result<u64> {
    let l = ell.get();
    if ell.is_two() {
        if a > 1 {
            return Err(Error::Precondition(format!(
                "the complement stratum is empty for a = {a} > 1"
            )));
        }
        return Ok(if n < 2 * a + b { 2 } else { 4 });
    }
    if a > 0 {
        return Err(Error::Precondition(format!(
            "the complement stratum is empty for a = {a} > 0 and odd l"
        )));
    }
    Ok(match n.cmp(&b) {
        std::cmp::Ordering::Less => l,
        std::cmp::Ordering::Equal => l * (l - 1),
        std::cmp::Ordering::Greater => l * l,
    })
}
