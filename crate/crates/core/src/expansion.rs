//! Expansion of the coupled solution around the limit state.
//!
//! ```text
//! f   = (1 + m0) M + eps [(1 + m0) u0 - dm0/dx] v M + eps g sqrt(M)
//! u   = u0 + eps u_r
//! rho = 1 + h0 + eps rho_r
//! ```
//!
//! In Hermite coefficients of `f/sqrt(M)` the background is
//! `c0 = 1 + m0` and `c1 = eps ((1 + m0) u0 - dm0/dx)`, nothing else.

use crate::error::{Result, SimError};
use crate::fluid_core::{check_positive, lame_apply, FluidState, NssState, PhysParams};
use crate::kinetic_solver::{HermiteField, KineticState};
use crate::spatial_grid::{Grid, ScalarField, VectorField};
use crate::velocity_basis::{HermiteCoeffs, Ladder, VelocityBasis};

/// Remainder `(g, u, rho)` of the expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderState {
    pub g: HermiteField,
    pub u: VectorField,
    pub rho: ScalarField,
}

impl RemainderState {
    pub fn zeros(nx: usize, modes: usize) -> Self {
        Self { g: HermiteField::zeros(nx, modes), u: vec![0.0; nx], rho: vec![0.0; nx] }
    }

    /// Density moment of `g`.
    pub fn a(&self) -> ScalarField {
        self.g.mode(0).to_vec()
    }

    /// Momentum moment of `g`.
    pub fn b(&self) -> VectorField {
        self.g.mode(1).to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.g.is_finite() && self.u.iter().chain(&self.rho).all(|x| x.is_finite())
    }
}

/// `g0/sqrt(M)` and `g1` as Hermite fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub g0_over_sqrt_m: HermiteField,
    pub g1: HermiteField,
}

impl Background {
    /// `(1 + m0) u0 - dm0/dx`.
    pub fn c1(&self) -> &[f64] {
        self.g1.mode(1)
    }
}

/// `(1 + m0) u0 - dm0/dx`.
pub fn background_flux(grid: &Grid, nss: &NssState) -> ScalarField {
    let dm = grid.derivative(&nss.m0, 1);
    (0..grid.nx()).map(|j| (1.0 + nss.m0[j]) * nss.u0[j] - dm[j]).collect()
}

pub fn build_background(grid: &Grid, basis: &VelocityBasis, nss: &NssState) -> Background {
    let nx = grid.nx();
    let modes = basis.len();
    let mut g0 = HermiteField::zeros(nx, modes);
    let c0: Vec<f64> = nss.m0.iter().map(|m| 1.0 + m).collect();
    g0.set_mode(0, &c0);
    let mut g1 = HermiteField::zeros(nx, modes);
    g1.set_mode(1, &background_flux(grid, nss));
    Background { g0_over_sqrt_m: g0, g1 }
}

/// Assembles the coupled state from the limit state and a remainder.
/// `eps = 0` is accepted and yields the leading-order state.
pub fn compose_expansion(
    grid: &Grid,
    basis: &VelocityBasis,
    params: &PhysParams,
    nss: &NssState,
    rem: &RemainderState,
    eps: f64,
) -> KineticState {
    let nx = grid.nx();
    let bg = build_background(grid, basis, nss);
    let mut h = HermiteField::zeros(nx, basis.len());
    for n in 0..basis.len() {
        let (b0, b1, g) = (bg.g0_over_sqrt_m.mode(n), bg.g1.mode(n), rem.g.mode(n));
        let vals: Vec<f64> = (0..nx).map(|j| b0[j] + eps * b1[j] + eps * g[j]).collect();
        h.set_mode(n, &vals);
    }
    let u = (0..nx).map(|j| nss.u0[j] + eps * rem.u[j]).collect();
    let rho = (0..nx).map(|j| 1.0 + nss.h0[j] + eps * rem.rho[j]).collect();
    KineticState {
        h,
        fluid: FluidState { rho, u },
        t: 0.0,
        step: 0,
        params: params.with_eps(if eps > 0.0 { eps } else { params.eps }),
    }
}

/// Composed initial data; rejects a non-positive fluid density.
pub fn well_prepared_initial(
    grid: &Grid,
    basis: &VelocityBasis,
    params: &PhysParams,
    nss: &NssState,
    rem: &RemainderState,
    eps: f64,
) -> Result<KineticState> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(SimError::Config(format!("ε must lie in [0, 1] (got {eps})")));
    }
    let s = compose_expansion(grid, basis, params, nss, rem, eps);
    check_positive(&s.fluid.rho, "initial fluid density")
        .map_err(|e| SimError::Config(e.to_string()))?;
    Ok(s)
}

/// Inverse of [`compose_expansion`]; the fluid remainder density is
/// `(rho - (1 + h0)) / eps`.
pub fn extract_remainder(
    grid: &Grid,
    basis: &VelocityBasis,
    kin: &KineticState,
    nss: &NssState,
    eps: f64,
) -> Result<RemainderState> {
    if !(eps > 0.0) {
        return Err(SimError::Domain(format!("remainder needs ε > 0 (got {eps})")));
    }
    let nx = grid.nx();
    let bg = build_background(grid, basis, nss);
    let mut g = HermiteField::zeros(nx, basis.len());
    for n in 0..basis.len() {
        let (b0, b1, h) = (bg.g0_over_sqrt_m.mode(n), bg.g1.mode(n), kin.h.mode(n));
        let vals: Vec<f64> = (0..nx).map(|j| (h[j] - b0[j] - eps * b1[j]) / eps).collect();
        g.set_mode(n, &vals);
    }
    let u = (0..nx).map(|j| (kin.fluid.u[j] - nss.u0[j]) / eps).collect();
    let rho = (0..nx)
        .map(|j| (kin.fluid.rho[j] - (1.0 + nss.h0[j])) / eps)
        .collect();
    Ok(RemainderState { g, u, rho })
}

/// Time derivatives of the limit state: forward differences of two states,
/// or zero for steady verification.
#[derive(Debug, Clone, PartialEq)]
pub struct NssRates {
    pub dm0: ScalarField,
    pub du0: VectorField,
    pub dh0: ScalarField,
    /// Rate of `(1 + h0) u0`.
    pub dq: VectorField,
}

impl NssRates {
    pub fn steady(nx: usize) -> Self {
        Self { dm0: vec![0.0; nx], du0: vec![0.0; nx], dh0: vec![0.0; nx], dq: vec![0.0; nx] }
    }

    pub fn from_pair(now: &NssState, next: &NssState, dt: f64) -> Self {
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect()
        };
        let q = |s: &NssState| -> Vec<f64> {
            s.h0.iter().zip(&s.u0).map(|(h, u)| (1.0 + h) * u).collect()
        };
        Self {
            dm0: diff(&now.m0, &next.m0),
            du0: diff(&now.u0, &next.u0),
            dh0: diff(&now.h0, &next.h0),
            dq: diff(&q(now), &q(next)),
        }
    }
}

/// L2 norms of the order-by-order equations of the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertResiduals {
    /// `v f0_x + (u0 f0)_v - (M (f1/M)_v)_v`.
    pub r_minus1: f64,
    /// Particle density equation of the limit system.
    pub r_zero: f64,
    /// Momentum equation of the limit system.
    pub r_mom: f64,
    /// Fluid continuity equation of the limit system.
    pub r_cont: f64,
}

fn l2(grid: &Grid, f: &[f64]) -> f64 {
    grid.l2_norm_sq(f).sqrt()
}

pub fn hilbert_residual(
    grid: &Grid,
    basis: &VelocityBasis,
    params: &PhysParams,
    nss: &NssState,
    rates: &NssRates,
) -> Result<HilbertResiduals> {
    if basis.dv() != 1 {
        return Err(SimError::Config("expansion residuals use dv = 1".into()));
    }
    let nx = grid.nx();
    let bg = build_background(grid, basis, nss);
    let f0 = &bg.g0_over_sqrt_m;
    let dx_f0 = {
        let mut d = HermiteField::zeros(nx, basis.len());
        d.set_mode(0, &grid.derivative(f0.mode(0), 1));
        d
    };
    // Node by node: v d_x f0 + u0 D f0 + L f1, all in h-coefficients.
    let mut sq = 0.0;
    for j in 0..nx {
        let vdx = basis.apply_ladder(&dx_f0.node(j), Ladder::MultiplyV, 0)?;
        let drift = basis.apply_ladder(&f0.node(j), Ladder::Drift, 0)?;
        let lf1 = basis.apply_l(&bg.g1.node(j));
        let r: HermiteCoeffs = HermiteCoeffs::from_vec(
            (0..basis.len())
                .map(|n| vdx.c[n] + nss.u0[j] * drift.c[n] + lf1.c[n])
                .collect(),
        );
        sq += r.norm_sq();
    }
    let r_minus1 = (sq * grid.dx()).sqrt();

    let rho0: Vec<f64> = nss.h0.iter().map(|h| 1.0 + h).collect();
    check_positive(&rho0, "1 + h0")?;
    let flux_m: Vec<f64> = (0..nx).map(|j| (1.0 + nss.m0[j]) * nss.u0[j]).collect();
    let dflux_m = grid.derivative(&flux_m, 1);
    let lap_m = grid.derivative(&nss.m0, 2);
    let rz: Vec<f64> = (0..nx).map(|j| rates.dm0[j] + dflux_m[j] - lap_m[j]).collect();

    let q: Vec<f64> = (0..nx).map(|j| rho0[j] * nss.u0[j]).collect();
    let mflux: Vec<f64> = (0..nx)
        .map(|j| q[j] * nss.u0[j] + params.a * rho0[j].powf(params.gamma) + nss.m0[j])
        .collect();
    let dmflux = grid.derivative(&mflux, 1);
    let lu = lame_apply(grid, params, &nss.u0);
    let rm: Vec<f64> = (0..nx).map(|j| rates.dq[j] + dmflux[j] + lu[j]).collect();

    let dq = grid.derivative(&q, 1);
    let rc: Vec<f64> = (0..nx).map(|j| rates.dh0[j] + dq[j]).collect();

    Ok(HilbertResiduals { r_minus1, r_zero: l2(grid, &rz), r_mom: l2(grid, &rm), r_cont: l2(grid, &rc) })
}
