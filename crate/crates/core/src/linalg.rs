//! Dense complex matrix exponential and the first phi-function, used for the
//! exact linear propagator of the kinetic step.

use nalgebra::DMatrix;
use num_complex::Complex64;

type CMat = DMatrix<Complex64>;

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a Taylor series run to round-off.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = norm1(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(s), 0.0);
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        result += &term;
        if norm1(&term) < 1e-18 * norm1(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Returns `(exp(A), phi1(A))` with `phi1(A) = A^{-1}(exp(A) - I)`, read off
/// the exponential of the block matrix `[[A, I], [0, 0]]`.
pub fn expm_phi1(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut aug = CMat::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        aug[(i, n + i)] = Complex64::new(1.0, 0.0);
    }
    let e = expm(&aug);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    )
}
