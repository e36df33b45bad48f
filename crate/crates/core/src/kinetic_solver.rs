//! Time stepper for the coupled kinetic-fluid system.
//!
//! The scaled particle equation for `h = f / sqrt(M)` reads
//!
//! ```text
//! dh/dt = -(1/eps) v dh/dx - (1/eps^2) L h - (u/eps) D h,     D = d/dv - v/2,
//! ```
//!
//! and the fluid feels the drag `(1/eps) (c1 - eps u c0)`.
//!
//! The linear part (transport plus relaxation) is integrated exactly per
//! Fourier mode: for wavenumber `k` the Hermite coefficients obey
//! `d c/dt = A_k c` with `A_k = -(i k/eps) V - Lambda/eps^2`, `V` the
//! truncated tridiagonal velocity matrix. The drag ladder term is frozen over
//! the step and enters through `phi1`. Exact propagation keeps the scheme
//! uniformly accurate as `eps -> 0`; splitting transport from relaxation
//! would put an `O(dt/eps^2)` error on the limiting diffusion coefficient.
//!
//! The fluid is advanced afterwards with the step-averaged drag recovered
//! from the particle momentum balance, so that
//! `mean(rho u) + eps mean(c1)` is conserved to round-off.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fluid_core::{fluid_step, FluidState, PhysParams};
use crate::linalg::expm_phi1;
use crate::spatial_grid::{Grid, ScalarField, VectorField};
use crate::velocity_basis::{HermiteCoeffs, VelocityBasis};

/// Hermite coefficients at every grid node, stored mode-major
/// (`data[n * nx + j]`), so each mode is a contiguous spatial field.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField {
    nx: usize,
    modes: usize,
    data: Vec<f64>,
}

impl HermiteField {
    pub fn zeros(nx: usize, modes: usize) -> Self {
        Self { nx, modes, data: vec![0.0; nx * modes] }
    }

    /// `h = psi_0` everywhere, i.e. `f = M`.
    pub fn maxwellian(nx: usize, modes: usize) -> Self {
        let mut h = Self::zeros(nx, modes);
        h.mode_mut(0).fill(1.0);
        h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Spatial field of coefficient `n`.
    pub fn mode(&self, n: usize) -> &[f64] {
        &self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn mode_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn set_mode(&mut self, n: usize, values: &[f64]) {
        self.mode_mut(n).copy_from_slice(values);
    }

    /// Coefficients at node `j`.
    pub fn node(&self, j: usize) -> HermiteCoeffs {
        HermiteCoeffs::from_vec((0..self.modes).map(|n| self.data[n * self.nx + j]).collect())
    }

    pub fn set_node(&mut self, j: usize, c: &HermiteCoeffs) {
        for (n, &v) in c.c.iter().enumerate() {
            self.data[n * self.nx + j] = v;
        }
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.data[n * self.nx + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self {
            nx: self.nx,
            modes: self.modes,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { nx: self.nx, modes: self.modes, data: self.data.iter().map(|a| s * a).collect() }
    }
}

/// Full state of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub h: HermiteField,
    pub fluid: FluidState,
    pub t: f64,
    pub step: usize,
    pub params: PhysParams,
}

impl KineticState {
    /// `(M, u = 0, rho = 1)`.
    pub fn equilibrium(nx: usize, modes: usize, params: PhysParams) -> Self {
        Self {
            h: HermiteField::maxwellian(nx, modes),
            fluid: FluidState::rest(nx),
            t: 0.0,
            step: 0,
            params,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite()
            && self.fluid.rho.iter().chain(&self.fluid.u).all(|x| x.is_finite())
    }
}

/// Mean kinetic mass, mean fluid mass and mean combined momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedTotals {
    pub mass_kinetic: f64,
    pub mass_fluid: f64,
    pub momentum: f64,
}

/// Density `c0` and first moment `c1` at every node.
pub fn kinetic_moments(state: &KineticState) -> (ScalarField, ScalarField) {
    (state.h.mode(0).to_vec(), state.h.mode(1).to_vec())
}

/// `(1/eps)(c1 - eps u c0)` at every node.
pub fn drag_source(state: &KineticState) -> VectorField {
    let eps = state.params.eps;
    let (c0, c1) = (state.h.mode(0), state.h.mode(1));
    (0..state.h.nx())
        .map(|j| (c1[j] - eps * state.fluid.u[j] * c0[j]) / eps)
        .collect()
}

pub fn conserved_totals(grid: &Grid, state: &KineticState) -> ConservedTotals {
    let eps = state.params.eps;
    ConservedTotals {
        mass_kinetic: grid.mean(state.h.mode(0)),
        mass_fluid: grid.mean(&state.fluid.rho),
        momentum: grid.mean(&state.fluid.momentum()) + eps * grid.mean(state.h.mode(1)),
    }
}

/// Largest step allowed by the transport CFL policy.
pub fn cfl_dt(grid: &Grid, modes: usize, eps: f64, cfl: f64) -> f64 {
    cfl * eps * grid.dx() / (2.0 * modes as f64).sqrt()
}

/// Stepper switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Drop `v dh/dx` (and the fluid update) to isolate relaxation.
    pub frozen_transport: bool,
    /// Exponential damping of the top tenth of the Hermite modes.
    pub filter: bool,
    /// CFL factor for the time-step check.
    pub cfl: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { frozen_transport: false, filter: false, cfl: 0.5 }
    }
}

/// Exact propagators for a fixed `(grid, N, eps, dt)`.
#[derive(Debug, Clone)]
pub struct KineticStepper {
    grid: Grid,
    params: PhysParams,
    modes: usize,
    dt: f64,
    opts: StepOptions,
    /// Per non-negative wavenumber index: `exp(dt A_k)` and `dt phi1(dt A_k)`,
    /// both `modes x modes`.
    expo: Vec<DMatrix<Complex64>>,
    phi: Vec<DMatrix<Complex64>>,
    filter: Vec<f64>,
}

impl KineticStepper {
    pub fn new(
        grid: &Grid,
        basis: &VelocityBasis,
        params: &PhysParams,
        dt: f64,
        opts: StepOptions,
    ) -> Result<Self> {
        if basis.dv() != 1 {
            return Err(SimError::Config(format!(
                "the kinetic solver runs with one velocity dimension (got dv = {})",
                basis.dv()
            )));
        }
        params.validate()?;
        let modes = basis.modes();
        let limit = cfl_dt(grid, modes, params.eps, opts.cfl);
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(SimError::Config(format!(
                "time step {dt:.3e} violates the transport CFL bound {limit:.3e}"
            )));
        }
        let eps = params.eps;
        let half = grid.nx() / 2;
        let mut expo = Vec::with_capacity(half + 1);
        let mut phi = Vec::with_capacity(half + 1);
        for j in 0..=half {
            let k = if opts.frozen_transport || j == half { 0.0 } else { grid.wavenumbers()[j] };
            let mut a = DMatrix::<Complex64>::zeros(modes, modes);
            for n in 0..modes {
                a[(n, n)] = Complex64::new(-(n as f64) / (eps * eps), 0.0);
                if n + 1 < modes {
                    let off = Complex64::new(0.0, -k / eps * ((n + 1) as f64).sqrt());
                    a[(n, n + 1)] = off;
                    a[(n + 1, n)] = off;
                }
            }
            let (e, p) = expm_phi1(&(a * Complex64::new(dt, 0.0)));
            expo.push(e);
            phi.push(p * Complex64::new(dt, 0.0));
        }
        let cut = (0.9 * modes as f64).floor() as usize;
        let filter = (0..modes)
            .map(|n| {
                if !opts.filter || n < cut {
                    1.0
                } else {
                    let s = (n - cut + 1) as f64 / (modes - cut) as f64;
                    (-36.0 * s.powi(8)).exp()
                }
            })
            .collect();
        Ok(Self { grid: grid.clone(), params: *params, modes, dt, opts, expo, phi, filter })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    /// Advances particles and fluid by one step.
    pub fn step(&self, state: &KineticState) -> Result<KineticState> {
        if state.h.modes() != self.modes || state.h.nx() != self.grid.nx() {
            return Err(SimError::Shape {
                what: "kinetic state",
                expected: self.modes * self.grid.nx(),
                got: state.h.modes() * state.h.nx(),
            });
        }
        let nx = self.grid.nx();
        let eps = self.params.eps;
        let n_modes = self.modes;

        // Drag ladder source G_n = (u/eps) sqrt(n) c_{n-1}.
        let u = &state.fluid.u;
        let mut spec_h: Vec<Vec<Complex64>> = Vec::with_capacity(n_modes);
        let mut spec_g: Vec<Vec<Complex64>> = Vec::with_capacity(n_modes);
        for n in 0..n_modes {
            spec_h.push(self.grid.fft(state.h.mode(n)));
            if n == 0 {
                spec_g.push(vec![Complex64::new(0.0, 0.0); nx]);
            } else {
                let s = (n as f64).sqrt() / eps;
                let prev = state.h.mode(n - 1);
                let g: Vec<f64> = (0..nx).map(|j| s * u[j] * prev[j]).collect();
                spec_g.push(self.grid.fft(&g));
            }
        }

        let half = nx / 2;
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); nx]; n_modes];
        let mut hv = vec![Complex64::new(0.0, 0.0); n_modes];
        for j in 0..=half {
            let (e, p) = (&self.expo[j], &self.phi[j]);
            for r in 0..n_modes {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n_modes {
                    acc += e[(r, c)] * spec_h[c][j] + p[(r, c)] * spec_g[c][j];
                }
                hv[r] = acc;
            }
            for r in 0..n_modes {
                out[r][j] = hv[r];
                if j != 0 && j != half {
                    out[r][nx - j] = hv[r].conj();
                }
            }
        }
        let mut h = HermiteField::zeros(nx, n_modes);
        for (n, spectrum) in out.into_iter().enumerate() {
            let vals = self.grid.ifft(spectrum);
            let f = self.filter[n];
            for (dst, v) in h.mode_mut(n).iter_mut().zip(vals) {
                *dst = f * v;
            }
        }

        if !h.is_finite() {
            return Err(SimError::Divergence {
                step: state.step + 1,
                t: state.t + self.dt,
                what: "non-finite Hermite coefficient".into(),
            });
        }
        let fluid = if self.opts.frozen_transport {
            state.fluid.clone()
        } else {
            let s = self.averaged_drag(&state.h, &h);
            fluid_step(&self.grid, &self.params, &state.fluid, &s, self.dt)?
        };

        let next = KineticState {
            h,
            fluid,
            t: state.t + self.dt,
            step: state.step + 1,
            params: self.params,
        };
        if !next.is_finite() {
            return Err(SimError::Divergence {
                step: next.step,
                t: next.t,
                what: "non-finite value in kinetic or fluid state".into(),
            });
        }
        Ok(next)
    }

    /// Step-averaged drag `-(eps/dt) (c1_new - c1_old) - d/dx (c0 + sqrt2 c2)`,
    /// the flux taken at the mean of the two levels.
    fn averaged_drag(&self, old: &HermiteField, new: &HermiteField) -> VectorField {
        let nx = self.grid.nx();
        let eps = self.params.eps;
        let r2 = std::f64::consts::SQRT_2;
        let flux: Vec<f64> = (0..nx)
            .map(|j| {
                0.5 * (old.get(0, j) + new.get(0, j) + r2 * (old.get(2, j) + new.get(2, j)))
            })
            .collect();
        let dflux = self.grid.derivative(&flux, 1);
        (0..nx)
            .map(|j| -(eps / self.dt) * (new.get(1, j) - old.get(1, j)) - dflux[j])
            .collect()
    }
}

/// One coupled step; builds the propagators on every call.
pub fn imex_step(
    grid: &Grid,
    basis: &VelocityBasis,
    state: &KineticState,
    dt: f64,
    opts: StepOptions,
) -> Result<KineticState> {
    KineticStepper::new(grid, basis, &state.params, dt, opts)?.step(state)
}
