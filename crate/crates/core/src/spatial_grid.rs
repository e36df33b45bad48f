//! Uniform periodic grid on `[0, L)` with Fourier differentiation and
//! discrete Sobolev norms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SimError};

/// Real values at the grid nodes.
pub type ScalarField = Vec<f64>;
/// Velocity-like field; the spatial dimension is one, so it is a scalar field.
pub type VectorField = Vec<f64>;

/// Immutable periodic grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    nx: usize,
    length: f64,
    dx: f64,
    nodes: Vec<f64>,
    /// Angular wavenumbers in FFT order.
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("length", &self.length)
            .finish()
    }
}

impl Grid {
    /// `nx` must be even and at least 8, `length` positive.
    pub fn new(nx: usize, length: f64) -> Result<Self> {
        if nx < 8 || !nx.is_multiple_of(2) {
            return Err(SimError::Config(format!(
                "grid size must be even and >= 8 (got {nx})"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SimError::Config(format!(
                "domain length must be positive (got {length})"
            )));
        }
        let dx = length / nx as f64;
        let nodes = (0..nx).map(|j| j as f64 * dx).collect();
        let base = 2.0 * PI / length;
        let wavenumbers = (0..nx)
            .map(|j| {
                let m = if j <= nx / 2 { j as f64 } else { j as f64 - nx as f64 };
                base * m
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            nx,
            length,
            dx,
            nodes,
            wavenumbers,
            forward: planner.plan_fft_forward(nx),
            inverse: planner.plan_fft_inverse(nx),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Index of the Nyquist mode in FFT order.
    pub fn nyquist(&self) -> usize {
        self.nx / 2
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Unnormalized forward transform.
    pub fn fft(&self, field: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(field.len(), self.nx);
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse of [`Grid::fft`], keeping the real part.
    pub fn ifft(&self, mut spectrum: Vec<Complex64>) -> ScalarField {
        self.inverse.process(&mut spectrum);
        let s = 1.0 / self.nx as f64;
        spectrum.iter().map(|z| z.re * s).collect()
    }

    /// Applies a real-even or odd Fourier multiplier. `symbol(k, nyquist)`
    /// receives the wavenumber and whether it is the Nyquist mode.
    pub fn apply_symbol(&self, field: &[f64], symbol: impl Fn(f64, bool) -> Complex64) -> ScalarField {
        let mut spectrum = self.fft(field);
        let ny = self.nyquist();
        for (j, z) in spectrum.iter_mut().enumerate() {
            *z *= symbol(self.wavenumbers[j], j == ny);
        }
        self.ifft(spectrum)
    }

    /// `m`-th derivative. Odd orders annihilate the Nyquist mode so the
    /// result stays real and skew-adjoint.
    pub fn derivative(&self, field: &[f64], m: u32) -> ScalarField {
        if m == 0 {
            return field.to_vec();
        }
        self.apply_symbol(field, |k, ny| {
            if ny && m % 2 == 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(m)
            }
        })
    }

    /// `sum_{m <= k} |d^m u|^2_{L^2}`; negative `k` gives 0.
    pub fn sobolev_norm_sq(&self, field: &[f64], k: i32) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let spectrum = self.fft(field);
        let ny = self.nyquist();
        let scale = self.length / (self.nx as f64 * self.nx as f64);
        spectrum.iter()
            .enumerate()
            .map(|(j, z)| {
                let k2 = self.wavenumbers[j] * self.wavenumbers[j];
                let mut w = 0.0;
                let mut p = 1.0;
                for m in 0..=k {
                    if !(j == ny && m % 2 == 1) {
                        w += p;
                    }
                    p *= k2;
                }
                w * z.norm_sqr()
            })
            .sum::<f64>()
            * scale
    }

    /// `int f g dx` by the trapezoidal rule.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.dx * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        self.inner(f, f)
    }

    /// Average value over the period.
    pub fn mean(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() / self.nx as f64
    }

    /// `int f dx = mean * L`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.mean(field) * self.length
    }

    pub fn max_abs(&self, field: &[f64]) -> f64 {
        field.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn build_grid(nx: usize, length: f64) -> Result<Grid> {
    Grid::new(nx, length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bandlimited(grid: &Grid, rng: &mut ChaCha8Rng, kmax: usize) -> ScalarField {
        let coeffs: Vec<(f64, f64)> = (0..=kmax)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        grid.sample(|x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
                .sum()
        })
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn construction() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        assert_abs_diff_eq!(g.dx(), PI / 32.0, epsilon = 1e-15);
        assert!(matches!(Grid::new(7, 2.0 * PI), Err(SimError::Config(_))));
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        let g = Grid::new(8, 1.0).unwrap();
        for &k in g.wavenumbers() {
            let m = k / (2.0 * PI);
            assert_abs_diff_eq!(m, m.round(), epsilon = 1e-12);
        }
    }

    #[test]
    fn derivatives_of_sine() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let s = g.sample(f64::sin);
        assert!(max_err(&g.derivative(&s, 1), &g.sample(f64::cos)) < 1e-12);
        assert!(max_err(&g.derivative(&s, 2), &g.sample(|x| -x.sin())) < 1e-12);
        let c = vec![2.5; 64];
        assert!(g.derivative(&c, 1).iter().all(|x| *x == 0.0 || x.abs() < 1e-15));
    }

    /// Sixth-order centered differences on a fine auxiliary spacing.
    #[test]
    fn derivative_matches_finite_difference_oracle() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let f = |x: f64| x.sin().exp();
        let d = g.derivative(&g.sample(f), 1);
        let h = 1e-3;
        for (j, &x) in g.nodes().iter().enumerate() {
            let fd = (-f(x - 3.0 * h) + 9.0 * f(x - 2.0 * h) - 45.0 * f(x - h) + 45.0 * f(x + h)
                - 9.0 * f(x + 2.0 * h)
                + f(x + 3.0 * h))
                / (60.0 * h);
            assert_abs_diff_eq!(d[j], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn spectral_accuracy() {
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| {
                let g = Grid::new(n, 2.0 * PI).unwrap();
                let d = g.derivative(&g.sample(|x| x.sin().exp()), 1);
                max_err(&d, &g.sample(|x| x.cos() * x.sin().exp())).max(1e-300)
            })
            .collect();
        // algebraic rate would give a fixed ratio; spectral ratios grow
        assert!(errs[0] / errs[1] > 1e3, "{errs:?}");
        assert!(errs[1] < 1e-10, "{errs:?}");
        assert!(errs[2] <= errs[1].max(1e-13));
    }

    #[test]
    fn sobolev_norms() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let s = g.sample(f64::sin);
        assert_abs_diff_eq!(g.sobolev_norm_sq(&s, 0), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(g.sobolev_norm_sq(&s, 1), 2.0 * PI, epsilon = 1e-12);
        assert_eq!(g.sobolev_norm_sq(&vec![0.0; 64], 4), 0.0);
        assert_eq!(g.sobolev_norm_sq(&s, -1), 0.0);
        let f = g.sample(|x| (2.0 * x).cos() + 0.3);
        let direct: f64 = (0..=3)
            .map(|m| g.l2_norm_sq(&g.derivative(&f, m)))
            .sum();
        assert_abs_diff_eq!(g.sobolev_norm_sq(&f, 3), direct, epsilon = 1e-9);
    }

    #[test]
    fn means() {
        let g = Grid::new(32, 2.0 * PI).unwrap();
        assert_abs_diff_eq!(g.mean(&vec![3.0; 32]), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.mean(&g.sample(f64::sin)), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.mean(&g.sample(|x| 1.0 + 0.5 * x.cos())), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.integrate(&vec![1.0; 32]), 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn integration_by_parts() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f = random_bandlimited(&g, &mut rng, 20);
            let h = random_bandlimited(&g, &mut rng, 20);
            let s = g.inner(&g.derivative(&f, 1), &h) + g.inner(&f, &g.derivative(&h, 1));
            assert!(s.abs() < 1e-10);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn derivative_has_zero_mean(seed in 0u64..1000, m in 1u32..5) {
                let g = Grid::new(32, 2.0 * PI).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_bandlimited(&g, &mut rng, 15);
                prop_assert!(g.mean(&g.derivative(&f, m)).abs() < 1e-10);
            }

            #[test]
            fn sobolev_is_monotone_in_order(seed in 0u64..1000) {
                let g = Grid::new(32, 2.0 * PI).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_bandlimited(&g, &mut rng, 10);
                let mut prev = 0.0;
                for k in 0..5 {
                    let s = g.sobolev_norm_sq(&f, k);
                    prop_assert!(s >= prev);
                    prev = s;
                }
            }
        }
    }
}
