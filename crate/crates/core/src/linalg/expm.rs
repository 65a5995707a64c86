//! Matrix exponential by scaling and squaring with the [13/13] Padé
//! approximant.
//!
//! For small `||A||` no squaring happens and every entry of the result is a
//! sum of terms whose magnitude is governed by the sparsity structure of `A`:
//! an entry at graph distance `d` only collects products of at least `d`
//! factors. Rounding errors are then relative to the entry itself, which is
//! what short-time power-law fits need.

use crate::{CMatrix, C64};

const THETA_13: f64 = 5.371920351148152;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub(crate) fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` for a square matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    debug_assert!(a.is_square());
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = if squarings > 0 {
        a * C64::new(0.5f64.powi(squarings), 0.0)
    } else {
        a.clone()
    };

    let ident = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(B13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for ||A|| <= theta_13");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
