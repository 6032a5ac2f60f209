//! Families of the full ambient groups in closed form.

use crate::cartan::CartanType;
use crate::error::{Error, Result};
use crate::modarith::{Prime, Rat};

use super::{combine, MeasureCell, MeasureFamily, NatSet};

fn q(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

fn cells4(c00: Rat, c0b: Rat, ca0: Rat, cab: Rat, tag: &str) -> Vec<MeasureCell> {
    vec![
        MeasureCell::new(NatSet::single(0), NatSet::single(0), c00, tag),
        MeasureCell::new(NatSet::single(0), NatSet::Tail(1), c0b, tag),
        MeasureCell::new(NatSet::Tail(1), NatSet::single(0), ca0, tag),
        MeasureCell::new(NatSet::Tail(1), NatSet::Tail(1), cab, tag),
    ]
}

pub fn closed_form_gl2(ell: Prime) -> Result<MeasureFamily> {
    let l = ell.get() as i64;
    MeasureFamily::new(
        ell,
        4,
        cells4(
            q(l * l * l - 2 * l * l - l + 3, (l - 1) * (l - 1) * (l + 1)),
            q(l * l - l - 1, l * (l - 1)),
            q(1, 1),
            q(l + 1, l),
            "closed form, GL2",
        ),
    )
}

pub fn closed_form_split(ell: Prime) -> Result<MeasureFamily> {
    MeasureFamily::new(ell, 2, split_cells(ell))
}

pub fn closed_form_nonsplit(ell: Prime) -> Result<MeasureFamily> {
    MeasureFamily::new(ell, 2, nonsplit_cells(ell))
}

fn split_cells(ell: Prime) -> Vec<MeasureCell> {
    let l = ell.get() as i64;
    cells4(
        q((l - 2) * (l - 2), (l - 1) * (l - 1)),
        q(2 * (l - 2), l - 1),
        q(1, 1),
        q(2, 1),
        "closed form, split Cartan",
    )
}

fn nonsplit_cells(ell: Prime) -> Vec<MeasureCell> {
    let l = ell.get() as i64;
    let tag = "closed form, nonsplit Cartan";
    vec![
        MeasureCell::new(NatSet::single(0), NatSet::single(0), q(l * l - 2, l * l - 1), tag),
        MeasureCell::new(NatSet::Tail(1), NatSet::single(0), q(1, 1), tag),
        MeasureCell::new(NatSet::all(), NatSet::Tail(1), q(0, 1), tag),
    ]
}

/// Full normalizer of a split or nonsplit Cartan: half the Cartan family
/// plus the complement coset, which lives on `a = 0`.
pub fn closed_form_normalizer(ell: Prime, kind: CartanType) -> Result<MeasureFamily> {
    let l = ell.get() as i64;
    let cartan = match kind {
        CartanType::Split => split_cells(ell),
        CartanType::Nonsplit => nonsplit_cells(ell),
        CartanType::Ramified => {
            return Err(Error::Precondition(
                "no closed form is available for ramified normalizers".into(),
            ))
        }
    };
    let tag = "closed form, normalizer coset";
    let coset = vec![
        MeasureCell::new(NatSet::single(0), NatSet::single(0), q(l - 2, l - 1), tag),
        MeasureCell::new(NatSet::single(0), NatSet::Tail(1), q(1, 1), tag),
        MeasureCell::new(NatSet::Tail(1), NatSet::all(), q(0, 1), tag),
    ];
    let half = q(1, 2);
    MeasureFamily::new(ell, 2, combine(&cartan, &half, &coset, &half))
}
