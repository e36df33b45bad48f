//! Energy and dissipation functionals, residuals of the remainder system and
//! of the macroscopic `(a, b)` system, the pressure Taylor defect, and the
//! convergence errors against the limit state.
//!
//! Everything here is one-dimensional in `x` and `v`. Derivative orders are
//! capped by [`DiagConfig`]: `order_x` plays the role of the top `x` order
//! for the remainder, `m0` is measured two orders higher and `(u0, h0)` one
//! order higher, never above six. Negative orders denote empty sums.
//!
//! Time derivatives come from a [`TimePair`]: a forward difference between
//! the frame at `t` and the frame one step later. A steady pair (identical
//! frames) sets every time derivative to zero.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::expansion::{background_flux, RemainderState};
use crate::fluid_core::{check_positive, lame_apply, NssState, PhysParams};
use crate::kinetic_solver::{HermiteField, KineticState};
use crate::spatial_grid::{Grid, ScalarField};
use crate::velocity_basis::VelocityBasis;

/// Largest derivative order in `x`.
pub const MAX_ORDER_X: u32 = 6;

/// Positive weights of the functionals; all default to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub k1: f64,
    /// `K_{1,|alpha|}`, uniform in `|alpha|`.
    pub k1_alpha: f64,
    pub k2_alpha: f64,
    pub k3_alpha: f64,
    /// `C_bar_{alpha,beta}`, uniform.
    pub c_bar: f64,
    /// `lambda_1 .. lambda_6` of the total functional.
    pub lambda: [f64; 6],
}

impl Default for Weights {
    fn default() -> Self {
        Self { k1: 1.0, k1_alpha: 1.0, k2_alpha: 1.0, k3_alpha: 1.0, c_bar: 1.0, lambda: [1.0; 6] }
    }
}

/// Orders, weights and the measured coercivity constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    pub order_x: u32,
    pub order_v: u32,
    pub weights: Weights,
    pub c0_empirical: Option<f64>,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self { order_x: 4, order_v: 1, weights: Weights::default(), c0_empirical: None }
    }
}

impl DiagConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.order_x > MAX_ORDER_X {
            v.push(format!("diagnostics.order_x: must be <= {MAX_ORDER_X} (got {})", self.order_x));
        }
        if self.order_v > self.order_x.max(1) {
            v.push(format!(
                "diagnostics.order_v: must not exceed max(order_x, 1) (got {})",
                self.order_v
            ));
        }
        let w = &self.weights;
        let named = [
            ("k1", w.k1),
            ("k1_alpha", w.k1_alpha),
            ("k2_alpha", w.k2_alpha),
            ("k3_alpha", w.k3_alpha),
            ("c_bar", w.c_bar),
        ];
        for (name, x) in named {
            if !(x > 0.0) {
                v.push(format!("diagnostics.weights.{name}: must be > 0 (got {x})"));
            }
        }
        for (i, l) in w.lambda.iter().enumerate() {
            if !(*l > 0.0) {
                v.push(format!("diagnostics.weights.lambda[{i}]: must be > 0 (got {l})"));
            }
        }
        if let Some(c0) = self.c0_empirical {
            if !(c0 > 0.0) {
                v.push(format!("diagnostics.c0_empirical: must be > 0 (got {c0})"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(v))
        }
    }

    fn ox(&self) -> i32 {
        self.order_x as i32
    }

    /// Order used for `m0`.
    fn om(&self) -> i32 {
        (self.order_x + 2).min(MAX_ORDER_X) as i32
    }

    /// Order used for `u0` and `h0`.
    fn ou(&self) -> i32 {
        (self.order_x + 1).min(MAX_ORDER_X) as i32
    }
}

/// Remainder and limit state at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub rem: &'a RemainderState,
    pub nss: &'a NssState,
}

/// Two frames `dt` apart; derivatives are forward differences.
#[derive(Debug, Clone, Copy)]
pub struct TimePair<'a> {
    pub now: Frame<'a>,
    pub next: Frame<'a>,
    pub dt: f64,
}

impl<'a> TimePair<'a> {
    pub fn new(now: Frame<'a>, next: Frame<'a>, dt: f64) -> Self {
        Self { now, next, dt }
    }

    /// Both frames equal: all time derivatives vanish.
    pub fn steady(frame: Frame<'a>) -> Self {
        Self { now: frame, next: frame, dt: 1.0 }
    }

    fn rate(&self, now: &[f64], next: &[f64]) -> Vec<f64> {
        now.iter().zip(next).map(|(a, b)| (b - a) / self.dt).collect()
    }
}

// ---------------------------------------------------------------------------
// Field helpers

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn l2(grid: &Grid, f: &[f64]) -> f64 {
    grid.l2_norm_sq(f).sqrt()
}

/// `sum_n |F_n|^2_{H^k_x}` over all Hermite modes.
fn hx(grid: &Grid, f: &HermiteField, k: i32) -> f64 {
    if k < 0 {
        return 0.0;
    }
    (0..f.modes()).map(|n| grid.sobolev_norm_sq(f.mode(n), k)).sum()
}

/// `v F` without truncation (one extra mode).
fn mulv_exact(f: &HermiteField) -> HermiteField {
    let n_in = f.modes();
    let mut out = HermiteField::zeros(f.nx(), n_in + 1);
    for n in 0..=n_in {
        let mut vals = vec![0.0; f.nx()];
        if n >= 1 {
            let s = (n as f64).sqrt();
            for (v, x) in vals.iter_mut().zip(f.mode(n - 1)) {
                *v += s * x;
            }
        }
        if n + 1 < n_in {
            let s = ((n + 1) as f64).sqrt();
            for (v, x) in vals.iter_mut().zip(f.mode(n + 1)) {
                *v += s * x;
            }
        }
        out.set_mode(n, &vals);
    }
    out
}

/// `dF/dv` without truncation (one extra mode).
fn ddv_exact(f: &HermiteField) -> HermiteField {
    let n_in = f.modes();
    let mut out = HermiteField::zeros(f.nx(), n_in + 1);
    for n in 0..=n_in {
        let mut vals = vec![0.0; f.nx()];
        if n >= 1 {
            let s = 0.5 * (n as f64).sqrt();
            for (v, x) in vals.iter_mut().zip(f.mode(n - 1)) {
                *v -= s * x;
            }
        }
        if n + 1 < n_in {
            let s = 0.5 * ((n + 1) as f64).sqrt();
            for (v, x) in vals.iter_mut().zip(f.mode(n + 1)) {
                *v += s * x;
            }
        }
        out.set_mode(n, &vals);
    }
    out
}

/// `sum_{|alpha| <= k} |d^alpha F|_nu^2` integrated in `x`.
fn nu_x(grid: &Grid, f: &HermiteField, k: i32) -> f64 {
    if k < 0 {
        return 0.0;
    }
    hx(grid, f, k) + hx(grid, &ddv_exact(f), k) + hx(grid, &mulv_exact(f), k)
}

/// `(I - P) g`.
fn micro(g: &HermiteField) -> HermiteField {
    let mut m = g.clone();
    m.mode_mut(0).fill(0.0);
    m.mode_mut(1).fill(0.0);
    m
}

/// `Gamma((I - P) g) = sqrt(2) c2`.
fn gamma_field(g: &HermiteField) -> Vec<f64> {
    g.mode(2).iter().map(|c| SQRT_2 * c).collect()
}

fn weight_field(nss: &NssState, rem: &RemainderState, eps: f64) -> Vec<f64> {
    (0..nss.h0.len()).map(|j| 1.0 + nss.h0[j] + eps * rem.rho[j]).collect()
}

fn require_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(SimError::Domain(format!("functional requires ε > 0 (got {eps})")))
    }
}

fn require_1d(basis: &VelocityBasis) -> Result<()> {
    if basis.dv() == 1 {
        Ok(())
    } else {
        Err(SimError::Config("diagnostics are implemented for dv = 1".into()))
    }
}

// ---------------------------------------------------------------------------
// Global functionals

/// `|g|^2_{H^k_{x,v}} + |(u, rho)|^2_{H^k} + |m0|^2_{H^{k+2}} + |(u0, h0)|^2_{H^{k+1}}`.
pub fn energy_e(
    grid: &Grid,
    basis: &VelocityBasis,
    cfg: &DiagConfig,
    rem: &RemainderState,
    nss: &NssState,
) -> Result<f64> {
    require_1d(basis)?;
    let ox = cfg.ox();
    let mut g_block = 0.0;
    let mut dg = rem.g.clone();
    for beta in 0..=(cfg.order_v as i32).min(ox) {
        if beta > 0 {
            dg = ddv_exact(&dg);
        }
        g_block += hx(grid, &dg, ox - beta);
    }
    Ok(g_block
        + grid.sobolev_norm_sq(&rem.u, ox)
        + grid.sobolev_norm_sq(&rem.rho, ox)
        + grid.sobolev_norm_sq(&nss.m0, cfg.om())
        + grid.sobolev_norm_sq(&nss.u0, cfg.ou())
        + grid.sobolev_norm_sq(&nss.h0, cfg.ou()))
}

/// The `1/eps^2` block of the dissipation.
pub fn stiff_block(
    grid: &Grid,
    cfg: &DiagConfig,
    rem: &RemainderState,
    eps: f64,
) -> Result<f64> {
    require_eps(eps)?;
    let ox = cfg.ox();
    let mut block = 0.0;
    let mut dg = micro(&rem.g);
    for beta in 0..=(cfg.order_v as i32).min(ox) {
        if beta > 0 {
            dg = ddv_exact(&dg);
        }
        block += nu_x(grid, &dg, ox - beta);
    }
    let slip: Vec<f64> = (0..grid.nx()).map(|j| rem.g.get(1, j) - eps * rem.u[j]).collect();
    block += grid.sobolev_norm_sq(&slip, ox);
    Ok(block / (eps * eps))
}

/// Dissipation functional at the `now` frame of `pair`.
pub fn dissipation_d(
    grid: &Grid,
    basis: &VelocityBasis,
    cfg: &DiagConfig,
    pair: &TimePair,
    eps: f64,
) -> Result<f64> {
    require_1d(basis)?;
    let stiff = stiff_block(grid, cfg, pair.now.rem, eps)?;
    let (rem, nss) = (pair.now.rem, pair.now.nss);
    let (ox, om, ou) = (cfg.ox(), cfg.om(), cfg.ou());
    let d = |f: &[f64]| grid.derivative(f, 1);
    let h = |f: &[f64], k: i32| grid.sobolev_norm_sq(f, k);

    let du = pair.rate(&rem.u, &pair.next.rem.u);
    let dm0 = pair.rate(&nss.m0, &pair.next.nss.m0);
    let du0 = pair.rate(&nss.u0, &pair.next.nss.u0);
    let ux = d(&rem.u);
    let bx = d(rem.g.mode(1));
    let u0x = d(&nss.u0);

    Ok(stiff
        + 2.0 * h(&ux, ox)
        + 2.0 * h(&bx, ox - 1) / eps
        + h(&du, ox - 1)
        + h(&d(&rem.rho), ox - 1)
        + h(&d(rem.g.mode(0)), ox - 1)
        + h(&d(&nss.m0), om - 1)
        + h(&u0x, om - 1)
        + h(&d(&dm0), ou - 1)
        + h(&du0, ou - 1)
        + h(&d(&nss.h0), ou - 1)
        + h(&u0x, ou - 1))
}

// ---------------------------------------------------------------------------
// Macroscopic functional

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroEnergy {
    /// Functional minus its conserved baseline.
    pub e_ma: f64,
    /// `K1 (2A/(gamma-1)) int (1 + gamma h0) dx`, constant along the flow.
    pub baseline: f64,
    /// Signed `K3` cross terms, included in `e_ma`.
    pub cross: f64,
    pub d_ma: f64,
}

/// Macroscopic energy and dissipation of the limit state. `rates` supplies
/// `(d m0/dt, d u0/dt)`; pass zeros for a steady evaluation.
pub fn macro_energy(
    grid: &Grid,
    params: &PhysParams,
    cfg: &DiagConfig,
    nss: &NssState,
    rates: Option<(&[f64], &[f64])>,
) -> Result<MacroEnergy> {
    let nx = grid.nx();
    let rho: Vec<f64> = nss.h0.iter().map(|h| 1.0 + h).collect();
    check_positive(&rho, "1 + h0")?;
    let w = &cfg.weights;
    let (om, ou) = (cfg.om(), cfg.ou());
    let nth = |f: &[f64], k: i32| grid.derivative(f, k as u32);

    let mut e = grid.l2_norm_sq(&nth(&nss.m0, om));
    for a in 1..=ou {
        e += w.k1_alpha
            * (grid.l2_norm_sq(&nth(&nss.h0, a))
                + grid.l2_norm_sq(&nth(&nss.m0, a))
                + grid.l2_norm_sq(&nth(&nss.u0, a)));
    }
    for a in 0..ou {
        e += w.k2_alpha * grid.l2_norm_sq(&nth(&nss.u0, a + 1));
    }
    let mut cross = 0.0;
    for a in 1..=ou {
        let lhs = nth(&nss.h0, a);
        let rhs: Vec<f64> = nth(&nss.u0, a - 1)
            .iter()
            .zip(&rho)
            .map(|(u, r)| u * r * r)
            .collect();
        cross += w.k3_alpha * grid.inner(&lhs, &rhs);
    }
    e += cross;

    let c = 2.0 * params.a / (params.gamma - 1.0);
    let kinetic: f64 = (0..nx).map(|j| rho[j] * nss.u0[j] * nss.u0[j]).sum::<f64>() * grid.dx();
    let baseline_int: f64 = nss.h0.iter().map(|h| 1.0 + params.gamma * h).sum::<f64>() * grid.dx();
    let relative: f64 = (0..nx)
        .map(|j| rho[j].powf(params.gamma) - 1.0 - params.gamma * nss.h0[j])
        .sum::<f64>()
        * grid.dx();
    e += w.k1 * (grid.l2_norm_sq(&nss.m0) + kinetic + c * relative);
    let baseline = w.k1 * c * baseline_int;

    let zeros = vec![0.0; nx];
    let (dm0, du0) = rates.unwrap_or((&zeros, &zeros));
    let h = |f: &[f64], k: i32| grid.sobolev_norm_sq(f, k);
    let d = |f: &[f64]| grid.derivative(f, 1);
    let u0x = d(&nss.u0);
    let d_ma = h(&d(&nss.m0), om - 1)
        + h(&u0x, om - 1)
        + h(&d(dm0), ou - 1)
        + h(du0, ou - 1)
        + h(&d(&nss.h0), ou - 1)
        + h(&u0x, ou - 1);

    Ok(MacroEnergy { e_ma: e, baseline, cross, d_ma })
}

// ---------------------------------------------------------------------------
// Microscopic functionals

/// Named micro functionals. Cross terms are included in their functional
/// and also listed on their own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroFunctionals {
    pub e_k: [f64; 4],
    pub e_f: f64,
    pub d_k: [f64; 4],
    pub d_f: f64,
    /// `(2/(2mu+lambda)) sum <d^a rho, w^2 d^{a-1} u>` inside `e_k[2]`.
    pub cross_k3: f64,
    /// `2 sum <d^a (2 b_x), d^a Gamma>` inside `e_f`.
    pub cross_gamma: f64,
    /// `eps sum <d^{a+1} a, d^a b>` inside `e_f`.
    pub cross_ab: f64,
}

impl MicroFunctionals {
    pub fn as_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for i in 0..4 {
            m.insert(format!("E_mi_K_{}", i + 1), self.e_k[i]);
            m.insert(format!("D_mi_K_{}", i + 1), self.d_k[i]);
        }
        m.insert("E_mi_F".into(), self.e_f);
        m.insert("D_mi_F".into(), self.d_f);
        m.insert("cross_K3".into(), self.cross_k3);
        m.insert("cross_Gamma".into(), self.cross_gamma);
        m.insert("cross_ab".into(), self.cross_ab);
        m
    }
}

pub fn micro_functionals(
    grid: &Grid,
    basis: &VelocityBasis,
    params: &PhysParams,
    cfg: &DiagConfig,
    pair: &TimePair,
    eps: f64,
) -> Result<MicroFunctionals> {
    require_1d(basis)?;
    require_eps(eps)?;
    if cfg.order_v < 1 {
        return Err(SimError::Config(
            "mixed x-v micro functionals need diagnostics.order_v >= 1".into(),
        ));
    }
    let (rem, nss) = (pair.now.rem, pair.now.nss);
    let ox = cfg.ox();
    let w = weight_field(nss, rem, eps);
    check_positive(&w, "1 + h0 + ε rho")?;
    let h = |f: &[f64], k: i32| grid.sobolev_norm_sq(f, k);
    let d = |f: &[f64]| grid.derivative(f, 1);
    let nth = |f: &[f64], k: i32| grid.derivative(f, k as u32);
    let wt = &cfg.weights;

    let a = rem.g.mode(0);
    let b = rem.g.mode(1);
    let ux = d(&rem.u);
    let mic = micro(&rem.g);
    let gam = gamma_field(&rem.g);

    // E_K1
    let mut weighted_u = 0.0;
    for al in 0..=ox {
        let du = nth(&rem.u, al);
        weighted_u += (0..grid.nx()).map(|j| w[j] * du[j] * du[j]).sum::<f64>() * grid.dx();
    }
    let e1 = hx(grid, &rem.g, ox) + weighted_u + params.a * params.gamma * h(&rem.rho, ox);
    // E_K2
    let e2 = (params.mu + (params.mu + params.lambda)) * h(&ux, ox - 1);
    // E_K3
    let mut cross_k3 = 0.0;
    for al in 1..=ox {
        let lhs = nth(&rem.rho, al);
        let rhs: Vec<f64> = nth(&rem.u, al - 1).iter().zip(&w).map(|(u, w)| w * w * u).collect();
        cross_k3 += grid.inner(&lhs, &rhs);
    }
    cross_k3 *= 2.0 / params.nu();
    let e3 = h(&d(&rem.rho), ox - 1) + cross_k3;
    // E_K4 and D_K4: beta + beta1 <= order_v, |alpha| + |beta| <= ox - 1
    let mut e4 = 0.0;
    let mut d4 = 0.0;
    let mut dv_mic = mic.clone();
    for beta in 0..(cfg.order_v as i32) {
        dv_mic = ddv_exact(&dv_mic);
        let k = ox - 1 - beta;
        e4 += wt.c_bar * hx(grid, &dv_mic, k);
        d4 += nu_x(grid, &dv_mic, k);
    }
    d4 /= eps * eps;
    // E_F
    let bx2: Vec<f64> = d(b).iter().map(|x| 2.0 * x).collect();
    let mut cross_gamma = 0.0;
    let mut cross_ab = 0.0;
    for al in 0..ox {
        cross_gamma += 2.0 * grid.inner(&nth(&bx2, al), &nth(&gam, al));
        cross_ab += eps * grid.inner(&nth(a, al + 1), &nth(b, al));
    }
    let e_f = h(a, ox - 1) + h(b, ox - 1) + cross_gamma + cross_ab;

    // D_K1 .. D_K3
    let slip: Vec<f64> = (0..grid.nx()).map(|j| b[j] - eps * rem.u[j]).collect();
    let d1 = (nu_x(grid, &mic, ox) + h(&slip, ox)) / (eps * eps) + 2.0 * h(&ux, ox);
    let du = pair.rate(&rem.u, &pair.next.rem.u);
    let d2 = h(&du, ox - 1);
    let d3 = h(&d(&rem.rho), ox - 1);
    let d_f = 2.0 * h(&d(b), ox - 1) / eps + h(&d(a), ox - 1);

    Ok(MicroFunctionals {
        e_k: [e1, e2, e3, e4],
        e_f,
        d_k: [d1, d2, d3, d4],
        d_f,
        cross_k3,
        cross_gamma,
        cross_ab,
    })
}

// ---------------------------------------------------------------------------
// Residuals

/// L2 norms of the three remainder equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderResiduals {
    pub res_g: f64,
    pub res_u: f64,
    pub res_rho: f64,
}

/// Truncated `v F` (top mode dropped).
fn mulv_trunc(f: &HermiteField) -> HermiteField {
    let n_modes = f.modes();
    let full = mulv_exact(f);
    let mut out = HermiteField::zeros(f.nx(), n_modes);
    for n in 0..n_modes {
        out.set_mode(n, full.mode(n));
    }
    out
}

/// Truncated `c(x) D F` with `D = d/dv - v/2`: `(D F)_n = -sqrt(n) F_{n-1}`.
fn drift_trunc(f: &HermiteField, c: &[f64]) -> HermiteField {
    let mut out = HermiteField::zeros(f.nx(), f.modes());
    for n in 1..f.modes() {
        let s = (n as f64).sqrt();
        let vals: Vec<f64> = f.mode(n - 1).iter().zip(c).map(|(x, c)| -s * c * x).collect();
        out.set_mode(n, &vals);
    }
    out
}

fn dx_field(grid: &Grid, f: &HermiteField) -> HermiteField {
    let mut out = HermiteField::zeros(f.nx(), f.modes());
    for n in 0..f.modes() {
        out.set_mode(n, &grid.derivative(f.mode(n), 1));
    }
    out
}

/// Degree-one field with coefficient `c` on `psi_1`.
fn psi1_field(c: &[f64], modes: usize) -> HermiteField {
    let mut f = HermiteField::zeros(c.len(), modes);
    f.set_mode(1, c);
    f
}

pub fn remainder_residual(
    grid: &Grid,
    basis: &VelocityBasis,
    params: &PhysParams,
    pair: &TimePair,
    eps: f64,
) -> Result<RemainderResiduals> {
    require_1d(basis)?;
    require_eps(eps)?;
    let nx = grid.nx();
    let modes = basis.len();
    let (rem, nss) = (pair.now.rem, pair.now.nss);
    let g = &rem.g;
    let (u, rho) = (&rem.u, &rem.rho);
    let (m0, u0, h0) = (&nss.m0, &nss.u0, &nss.h0);

    let c1bg = background_flux(grid, nss);
    let g1 = psi1_field(&c1bg, modes);
    let dt_c1bg = pair.rate(&c1bg, &background_flux(grid, pair.next.nss));

    // (I - P0)(v d_x g1): only the psi_2 part survives.
    let mut ip0_vdx_g1 = HermiteField::zeros(nx, modes);
    let dc1 = grid.derivative(&c1bg, 1);
    ip0_vdx_g1.set_mode(2, &dc1.iter().map(|x| SQRT_2 * x).collect::<Vec<_>>());
    let vdx_g = mulv_trunc(&dx_field(grid, g));
    let u0_d_g1 = drift_trunc(&g1, u0);
    let u0_d_g = drift_trunc(g, u0);
    let u_d_g1 = drift_trunc(&g1, u);
    let u_d_g = drift_trunc(g, u);

    let mut sq = 0.0;
    for n in 0..modes {
        let gn = g.mode(n);
        let dg = pair.rate(gn, pair.next.rem.g.mode(n));
        for j in 0..nx {
            let um0 = if n == 1 { u[j] * m0[j] } else { 0.0 };
            let r0 = -ip0_vdx_g1.get(n, j) - vdx_g.get(n, j) - u0_d_g1.get(n, j) - u0_d_g.get(n, j) + um0;
            let dt_g1 = if n == 1 { dt_c1bg[j] } else { 0.0 };
            let r1 = -dt_g1 - u_d_g1.get(n, j) - u_d_g.get(n, j);
            let src = if n == 1 { u[j] / eps } else { 0.0 };
            let res = dg[j] - src + n as f64 * gn[j] / (eps * eps) - r0 / eps - r1;
            sq += res * res;
        }
    }
    let res_g = (sq * grid.dx()).sqrt();

    // fluid remainder
    let w = weight_field(nss, rem, eps);
    check_positive(&w, "1 + h0 + ε rho")?;
    let du = pair.rate(u, &pair.next.rem.u);
    let du0 = pair.rate(u0, &pair.next.nss.u0);
    let ux = grid.derivative(u, 1);
    let u0x = grid.derivative(u0, 1);
    let lu = lame_apply(grid, params, u);
    let p_full: Vec<f64> = w.iter().map(|r| params.a * r.powf(params.gamma)).collect();
    let p_bg: Vec<f64> = h0.iter().map(|h| params.a * (1.0 + h).powf(params.gamma)).collect();
    let r2: Vec<f64> = grid.derivative(&sub(&p_full, &p_bg), 1).iter().map(|x| -x).collect();
    let a = g.mode(0);
    let b = g.mode(1);
    let res_u: Vec<f64> = (0..nx)
        .map(|j| {
            let r3 = -((rho[j] * du0[j] + rho[j] * u0[j] * u0x[j] + u[j] * m0[j] + u0[j] * a[j])
                + eps * (u[j] * ux[j] + h0[j] * u[j] * ux[j] + u[j] * a[j])
                + eps * eps * rho[j] * u[j] * ux[j]);
            w[j] * (du[j] + u0[j] * ux[j] + u[j] * u0x[j]) + lu[j]
                - (b[j] - eps * u[j]) / eps
                - r2[j] / eps
                - r3
        })
        .collect();

    let drho = pair.rate(rho, &pair.next.rem.rho);
    let flux: Vec<f64> = (0..nx)
        .map(|j| h0[j] * u[j] + rho[j] * u0[j] + u[j] + eps * rho[j] * u[j])
        .collect();
    let dflux = grid.derivative(&flux, 1);
    let res_rho: Vec<f64> = (0..nx).map(|j| drho[j] + dflux[j]).collect();

    Ok(RemainderResiduals { res_g, res_u: l2(grid, &res_u), res_rho: l2(grid, &res_rho) })
}

/// L2 norms of the `(a, b)` continuity, momentum and stress relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbResiduals {
    pub res_cont: f64,
    pub res_mom: f64,
    pub res_stress: f64,
}

pub fn ab_residual(
    grid: &Grid,
    basis: &VelocityBasis,
    pair: &TimePair,
    eps: f64,
) -> Result<AbResiduals> {
    require_1d(basis)?;
    require_eps(eps)?;
    if basis.len() < 4 {
        return Err(SimError::Config("stress relation needs at least 4 Hermite modes".into()));
    }
    let nx = grid.nx();
    let (rem, nss) = (pair.now.rem, pair.now.nss);
    let (next_rem, next_nss) = (pair.next.rem, pair.next.nss);
    let g = &rem.g;
    let a = g.mode(0);
    let b = g.mode(1);
    let u = &rem.u;
    let (m0, u0) = (&nss.m0, &nss.u0);
    let d = |f: &[f64]| grid.derivative(f, 1);

    let da = pair.rate(a, next_rem.g.mode(0));
    let db = pair.rate(b, next_rem.g.mode(1));
    let ax = d(a);
    let bx = d(b);
    let cont: Vec<f64> = (0..nx).map(|j| eps * da[j] + bx[j]).collect();

    let gam = gamma_field(g);
    let dgam = pair.rate(&gam, &gamma_field(&next_rem.g));
    let gam_x = d(&gam);
    let u0m0: Vec<f64> = (0..nx).map(|j| u0[j] * m0[j]).collect();
    let next_u0m0: Vec<f64> = (0..nx).map(|j| next_nss.u0[j] * next_nss.m0[j]).collect();
    let d_u0m0 = pair.rate(&u0m0, &next_u0m0);
    let du0 = pair.rate(u0, &next_nss.u0);
    let dm0x = pair.rate(&d(m0), &d(&next_nss.m0));
    let mom: Vec<f64> = (0..nx)
        .map(|j| {
            let r4 = u0[j] * a[j] + u[j] * m0[j];
            let r5 = -(d_u0m0[j] + du0[j] - dm0x[j] - u[j] * a[j]);
            db[j] + ax[j] / eps + (b[j] - eps * u[j]) / (eps * eps) + gam_x[j] / eps - r4 / eps - r5
        })
        .collect();

    let c1bg = background_flux(grid, nss);
    let c1bg_x = d(&c1bg);
    let c3x = d(g.mode(3));
    let six = 6f64.sqrt();
    let stress: Vec<f64> = (0..nx)
        .map(|j| {
            let gamma_l = -(2.0 * c1bg_x[j] + six * c3x[j] - 2.0 * u0[j] * c1bg[j]) / eps
                + 2.0 * u[j] * c1bg[j];
            2.0 * bx[j] / eps - 2.0 * (u0[j] / eps + u[j]) * b[j] + dgam[j]
                + 2.0 * gam[j] / (eps * eps)
                - gamma_l
        })
        .collect();

    Ok(AbResiduals {
        res_cont: l2(grid, &cont),
        res_mom: l2(grid, &mom),
        res_stress: l2(grid, &stress),
    })
}

/// `d^alpha[(1+h0+eps rho)^gamma] - d^alpha[(1+h0)^gamma]
///  - gamma eps (1+h0+eps rho)^{gamma-1} d^alpha rho`.
pub fn pressure_defect(
    grid: &Grid,
    params: &PhysParams,
    h0: &[f64],
    rho: &[f64],
    eps: f64,
    alpha: u32,
) -> Result<ScalarField> {
    if alpha > 4 {
        return Err(SimError::Config(format!("defect order must be <= 4 (got {alpha})")));
    }
    let gmm = params.gamma;
    let full: Vec<f64> = (0..grid.nx()).map(|j| 1.0 + h0[j] + eps * rho[j]).collect();
    let bg: Vec<f64> = h0.iter().map(|h| 1.0 + h).collect();
    check_positive(&full, "1 + h0 + ε rho")?;
    check_positive(&bg, "1 + h0")?;
    let pf: Vec<f64> = full.iter().map(|r| r.powf(gmm)).collect();
    let pb: Vec<f64> = bg.iter().map(|r| r.powf(gmm)).collect();
    if alpha == 0 {
        // pointwise form avoids the FFT round trip
        return Ok((0..grid.nx())
            .map(|j| pf[j] - pb[j] - gmm * eps * full[j].powf(gmm - 1.0) * rho[j])
            .collect());
    }
    let dpf = grid.derivative(&pf, alpha);
    let dpb = grid.derivative(&pb, alpha);
    let drho = grid.derivative(rho, alpha);
    Ok((0..grid.nx())
        .map(|j| dpf[j] - dpb[j] - gmm * eps * full[j].powf(gmm - 1.0) * drho[j])
        .collect())
}

// ---------------------------------------------------------------------------
// Convergence errors

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceErrors {
    /// `sup |f - (1 + m0) M|` over grid and quadrature nodes.
    pub err_f: f64,
    /// `sup |f - (1 + m0) M - eps g1 sqrt(M)|`, i.e. `eps sup |g sqrt(M)|`.
    pub err_f_corrected: f64,
    pub err_u: f64,
    pub err_rho: f64,
}

pub fn convergence_errors(
    grid: &Grid,
    basis: &VelocityBasis,
    kin: &KineticState,
    nss: &NssState,
) -> Result<ConvergenceErrors> {
    require_1d(basis)?;
    let nx = grid.nx();
    let modes = basis.len();
    let eps = kin.params.eps;
    let psi = basis.psi_at_nodes();
    let c1bg = background_flux(grid, nss);
    let mut err_f: f64 = 0.0;
    let mut err_fc: f64 = 0.0;
    for j in 0..nx {
        for k in 0..modes {
            let mut val = 0.0;
            for n in 0..modes {
                let mut c = kin.h.get(n, j);
                if n == 0 {
                    c -= 1.0 + nss.m0[j];
                }
                val += c * psi[k * modes + n];
            }
            err_f = err_f.max(val.abs());
            let corr = val - eps * c1bg[j] * psi[k * modes + 1];
            err_fc = err_fc.max(corr.abs());
        }
    }
    let err_u = (0..nx).fold(0.0f64, |m, j| m.max((kin.fluid.u[j] - nss.u0[j]).abs()));
    let err_rho = (0..nx).fold(0.0f64, |m, j| {
        m.max((kin.fluid.rho[j] - 1.0 - nss.h0[j]).abs())
    });
    Ok(ConvergenceErrors { err_f, err_f_corrected: err_fc, err_u, err_rho })
}

// ---------------------------------------------------------------------------
// Reports

/// Everything evaluated at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    /// Global energy of the remainder plus limit state.
    pub e_total: f64,
    /// Global dissipation.
    pub d_total: f64,
    pub e_ma: f64,
    pub d_ma: f64,
    pub e_ma_baseline: f64,
    pub micro: MicroFunctionals,
    /// Weighted sum of the micro and macro functionals.
    pub e_weighted: f64,
    pub d_weighted: f64,
    pub errors: ConvergenceErrors,
    pub mass_kinetic: f64,
    pub mass_fluid: f64,
    pub momentum: f64,
}

/// Weighted total `sum lambda_i E_mi,K,i + lambda_5 E_mi,F + lambda_6 E_ma`
/// and the matching dissipation.
pub fn weighted_totals(cfg: &DiagConfig, micro: &MicroFunctionals, mac: &MacroEnergy) -> (f64, f64) {
    let l = &cfg.weights.lambda;
    let e = (0..4).map(|i| l[i] * micro.e_k[i]).sum::<f64>() + l[4] * micro.e_f + l[5] * mac.e_ma;
    let d = micro.d_k.iter().sum::<f64>() + micro.d_f + mac.d_ma;
    (e, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{compose_expansion, extract_remainder};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup() -> (Grid, VelocityBasis, PhysParams) {
        (Grid::new(32, 2.0 * PI).unwrap(), VelocityBasis::new(1, 8).unwrap(), PhysParams::default())
    }

    fn cfg0() -> DiagConfig {
        DiagConfig { order_x: 0, order_v: 0, ..Default::default() }
    }

    fn random_smooth(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(-amp..amp)).collect();
        grid.sample(|x| c[0] * x.cos() + c[1] * x.sin() + c[2] * (2.0 * x).cos() + c[3] * (3.0 * x).sin())
    }

    fn random_remainder(grid: &Grid, modes: usize, rng: &mut ChaCha8Rng) -> RemainderState {
        let mut r = RemainderState::zeros(grid.nx(), modes);
        for n in 0..modes {
            let f = random_smooth(grid, rng, 0.5);
            r.g.set_mode(n, &f);
        }
        r.u = random_smooth(grid, rng, 0.5);
        r.rho = random_smooth(grid, rng, 0.5);
        r
    }

    #[test]
    fn config_validation() {
        assert!(DiagConfig::default().validate().is_ok());
        let mut c = DiagConfig { order_x: 7, ..Default::default() };
        c.weights.lambda[2] = 0.0;
        let v = c.violations();
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn energy_examples() {
        let (g, b, _) = setup();
        let z = RemainderState::zeros(32, 8);
        let eq = NssState::equilibrium(32);
        assert_eq!(energy_e(&g, &b, &DiagConfig::default(), &z, &eq).unwrap(), 0.0);

        let mut r = RemainderState::zeros(32, 8);
        r.g.mode_mut(2).fill(1.0);
        assert_abs_diff_eq!(energy_e(&g, &b, &cfg0(), &r, &eq).unwrap(), 2.0 * PI, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_remainder(&g, 8, &mut rng);
        let nss = NssState::equilibrium(32);
        let e1 = energy_e(&g, &b, &DiagConfig::default(), &r, &nss).unwrap();
        let mut r2 = r.clone();
        r2.g = r.g.scaled(2.0);
        let mut rz = r.clone();
        rz.g = r.g.scaled(0.0);
        let e_rest = energy_e(&g, &b, &DiagConfig::default(), &rz, &nss).unwrap();
        let e2 = energy_e(&g, &b, &DiagConfig::default(), &r2, &nss).unwrap();
        assert_abs_diff_eq!(e2 - e_rest, 4.0 * (e1 - e_rest), epsilon = 1e-9);
    }

    /// The H^1_{x,v} g-block of a field constant in x reduces to
    /// `|g|^2 + |dg/dv|^2`, the latter by an independent quadrature.
    #[test]
    fn energy_velocity_derivative_block() {
        let (g, b, _) = setup();
        let mut r = RemainderState::zeros(32, 8);
        r.g.mode_mut(3).fill(1.0);
        let cfg = DiagConfig { order_x: 1, order_v: 1, ..Default::default() };
        let e = energy_e(&g, &b, &cfg, &r, &NssState::equilibrium(32)).unwrap();
        // d psi_3/dv = (sqrt3 psi_2 - 2 psi_4)/2 -> |.|^2 = 3/4 + 1
        assert_abs_diff_eq!(e, 2.0 * PI * (1.0 + 1.75), epsilon = 1e-12);
    }

    #[test]
    fn dissipation_examples() {
        let (g, b, _) = setup();
        let eq = NssState::equilibrium(32);
        let eps = 0.1;
        // g = a psi0 + eps u psi1, constant in x
        let mut r = RemainderState::zeros(32, 8);
        r.g.mode_mut(0).fill(0.3);
        r.u.fill(0.7);
        r.g.mode_mut(1).fill(eps * 0.7);
        let pair = TimePair::steady(Frame { rem: &r, nss: &eq });
        let d = dissipation_d(&g, &b, &DiagConfig::default(), &pair, eps).unwrap();
        assert!(d.abs() < 1e-20, "{d}");

        let mut r = RemainderState::zeros(32, 8);
        r.g.mode_mut(2).fill(1.0);
        let s = stiff_block(&g, &cfg0(), &r, eps).unwrap();
        assert_abs_diff_eq!(s, 7.25 * 2.0 * PI / (eps * eps), epsilon = 1e-9);
        let s2 = stiff_block(&g, &cfg0(), &r, eps / 2.0).unwrap();
        assert_abs_diff_eq!(s2, 4.0 * s, epsilon = 1e-9);
        assert!(matches!(stiff_block(&g, &cfg0(), &r, 0.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn stiff_block_kernel() {
        let (g, _, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eps = 0.2;
        let mut r = RemainderState::zeros(32, 8);
        r.g.set_mode(0, &random_smooth(&g, &mut rng, 1.0));
        r.u = random_smooth(&g, &mut rng, 1.0);
        r.g.set_mode(1, &r.u.iter().map(|u| eps * u).collect::<Vec<_>>());
        let cfg = DiagConfig::default();
        assert!(stiff_block(&g, &cfg, &r, eps).unwrap() < 1e-20);
        r.g.mode_mut(4)[3] = 1e-3;
        assert!(stiff_block(&g, &cfg, &r, eps).unwrap() > 0.0);
    }

    #[test]
    fn macro_energy_examples() {
        let (g, _, p) = setup();
        let cfg = DiagConfig::default();
        let m = macro_energy(&g, &p, &cfg, &NssState::equilibrium(32), None).unwrap();
        assert_abs_diff_eq!(m.e_ma, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.baseline, 2.0 / (p.gamma - 1.0) * 2.0 * PI, epsilon = 1e-12);
        assert_eq!(m.d_ma, 0.0);

        // m0 = delta cos x: each derivative of cos has squared norm pi.
        let delta = 0.01;
        let nss = NssState { m0: g.sample(|x| delta * x.cos()), ..NssState::equilibrium(32) };
        let m = macro_energy(&g, &p, &cfg, &nss, None).unwrap();
        // top order + 5 K1 terms + K1 |m0|^2
        let oracle = delta * delta * PI * (1.0 + 5.0 + 1.0);
        assert_abs_diff_eq!(m.e_ma, oracle, epsilon = 1e-10);

        let u = NssState { u0: g.sample(|x| 0.01 * x.sin()), ..NssState::equilibrium(32) };
        let u2 = NssState { u0: g.sample(|x| 0.02 * x.sin()), ..NssState::equilibrium(32) };
        let (e1, e2) = (
            macro_energy(&g, &p, &cfg, &u, None).unwrap().e_ma,
            macro_energy(&g, &p, &cfg, &u2, None).unwrap().e_ma,
        );
        assert_abs_diff_eq!(e2, 4.0 * e1, epsilon = 1e-12);
        let bad = NssState { h0: vec![-2.0; 32], ..NssState::equilibrium(32) };
        assert!(macro_energy(&g, &p, &cfg, &bad, None).is_err());
    }

    #[test]
    fn micro_functional_examples() {
        let (g, b, p) = setup();
        let eq = NssState::equilibrium(32);
        let cfg = DiagConfig::default();
        let z = RemainderState::zeros(32, 8);
        let pair = TimePair::steady(Frame { rem: &z, nss: &eq });
        let m = micro_functionals(&g, &b, &p, &cfg, &pair, 0.1).unwrap();
        assert!(m.e_k.iter().chain(&m.d_k).chain([&m.e_f, &m.d_f]).all(|x| *x == 0.0));

        let mut r = RemainderState::zeros(32, 8);
        r.g.set_mode(1, &g.sample(|x| 0.01 * x.sin()));
        let pair = TimePair::steady(Frame { rem: &r, nss: &eq });
        let m = micro_functionals(&g, &b, &p, &cfg, &pair, 0.1).unwrap();
        assert_eq!(m.cross_gamma, 0.0);

        // D_K1 stiff part equals the stiff block of the dissipation
        let mut r = RemainderState::zeros(32, 8);
        r.g.mode_mut(2).fill(1.0);
        let pair = TimePair::steady(Frame { rem: &r, nss: &eq });
        let m = micro_functionals(&g, &b, &p, &cfg, &pair, 0.1).unwrap();
        let c_x = DiagConfig { order_v: 0, ..cfg };
        let s = stiff_block(&g, &c_x, &r, 0.1).unwrap();
        assert_abs_diff_eq!(m.d_k[0], s, epsilon = 1e-9 * s);

        let c = DiagConfig { order_v: 0, ..cfg };
        assert!(matches!(
            micro_functionals(&g, &b, &p, &c, &pair, 0.1),
            Err(SimError::Config(_))
        ));
        assert!(micro_functionals(&g, &b, &p, &cfg, &pair, 0.0).is_err());
    }

    #[test]
    fn pressure_defect_examples() {
        let (g, _, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h0 = random_smooth(&g, &mut rng, 0.1);
        let rho = random_smooth(&g, &mut rng, 1.0);
        let p2 = PhysParams { gamma: 2.0, ..Default::default() };
        let eps = 0.07;
        let b0 = pressure_defect(&g, &p2, &h0, &rho, eps, 0).unwrap();
        for j in 0..32 {
            assert_abs_diff_eq!(b0[j], -eps * eps * rho[j] * rho[j], epsilon = 1e-12);
        }
        for alpha in 0..=4 {
            let z = pressure_defect(&g, &p2, &h0, &rho, 0.0, alpha).unwrap();
            assert!(z.iter().all(|x| x.abs() < 1e-12));
        }
        assert!(pressure_defect(&g, &p2, &h0, &rho, eps, 5).is_err());

        let p53 = PhysParams { gamma: 5.0 / 3.0, ..Default::default() };
        let cosx = g.sample(f64::cos);
        let zero = vec![0.0; 32];
        let s = |e: f64| g.max_abs(&pressure_defect(&g, &p53, &zero, &cosx, e, 0).unwrap());
        let ratio = s(0.01) / s(0.005);
        assert!((ratio / 4.0 - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn residuals_vanish_at_equilibrium() {
        let (g, b, p) = setup();
        let eq = NssState::equilibrium(32);
        let z = RemainderState::zeros(32, 8);
        let pair = TimePair::steady(Frame { rem: &z, nss: &eq });
        let r = remainder_residual(&g, &b, &p, &pair, 0.1).unwrap();
        assert_eq!((r.res_g, r.res_u, r.res_rho), (0.0, 0.0, 0.0));
        let ab = ab_residual(&g, &b, &pair, 0.1).unwrap();
        assert_eq!((ab.res_cont, ab.res_mom, ab.res_stress), (0.0, 0.0, 0.0));
        assert!(ab_residual(&g, &b, &pair, 0.0).is_err());
    }

    #[test]
    fn ab_continuity_self_consistency() {
        let (g, b, _) = setup();
        let eq = NssState::equilibrium(32);
        let mut r = RemainderState::zeros(32, 8);
        let bf = g.sample(|x| 0.2 * (2.0 * x).sin());
        r.g.set_mode(1, &bf);
        let pair = TimePair::steady(Frame { rem: &r, nss: &eq });
        let ab = ab_residual(&g, &b, &pair, 0.1).unwrap();
        let oracle = l2(&g, &g.sample(|x| 0.4 * (2.0 * x).cos()));
        assert_abs_diff_eq!(ab.res_cont, oracle, epsilon = 1e-12);
    }

    /// The `(a, b)` relations are moments of the `g` equation, so on any
    /// pair of states they are bounded by the `g` residual: the continuity
    /// and momentum relations by `eps * res_g` and `res_g`, the stress
    /// relation by `sqrt(2) res_g`.
    #[test]
    fn ab_relations_are_moments_of_the_g_equation() {
        let (g, b, p) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let nss0 = NssState {
            m0: random_smooth(&g, &mut rng, 0.05),
            u0: random_smooth(&g, &mut rng, 0.05),
            h0: random_smooth(&g, &mut rng, 0.05),
        };
        let nss1 = NssState {
            m0: random_smooth(&g, &mut rng, 0.05),
            u0: random_smooth(&g, &mut rng, 0.05),
            h0: random_smooth(&g, &mut rng, 0.05),
        };
        let r0 = random_remainder(&g, 8, &mut rng);
        let r1 = random_remainder(&g, 8, &mut rng);
        let eps = 0.3;
        let pair = TimePair::new(Frame { rem: &r0, nss: &nss0 }, Frame { rem: &r1, nss: &nss1 }, 0.01);
        let rr = remainder_residual(&g, &b, &p, &pair, eps).unwrap();
        let ab = ab_residual(&g, &b, &pair, eps).unwrap();
        assert!(ab.res_cont <= eps * rr.res_g * (1.0 + 1e-10));
        assert!(ab.res_mom <= rr.res_g * (1.0 + 1e-10));
        assert!(ab.res_stress <= SQRT_2 * rr.res_g * (1.0 + 1e-10));
    }

    #[test]
    fn convergence_error_examples() {
        let (g, b, p) = setup();
        let eq = NssState::equilibrium(32);
        let kin = KineticState::equilibrium(32, 8, p);
        let e = convergence_errors(&g, &b, &kin, &eq).unwrap();
        assert_eq!((e.err_f, e.err_u, e.err_rho), (0.0, 0.0, 0.0));

        let nss = NssState {
            m0: g.sample(|x| 0.05 * x.cos()),
            u0: g.sample(|x| 0.05 * x.sin()),
            h0: g.sample(|x| 0.05 * x.cos()),
        };
        let eps = 0.1;
        let kin = compose_expansion(&g, &b, &p, &nss, &RemainderState::zeros(32, 8), eps);
        let e = convergence_errors(&g, &b, &kin, &nss).unwrap();
        assert!(e.err_u < 1e-15 && e.err_rho < 1e-15);
        assert!(e.err_f_corrected < 1e-15);
        let c1 = background_flux(&g, &nss);
        let psi = b.psi_at_nodes();
        let oracle = c1.iter().fold(0.0f64, |m, c| {
            (0..8).fold(m, |m, k| m.max((eps * c * psi[k * 8 + 1]).abs()))
        });
        assert_abs_diff_eq!(e.err_f, oracle, epsilon = 1e-15);
        let back = extract_remainder(&g, &b, &kin, &nss, eps).unwrap();
        assert!(back.g.as_slice().iter().all(|x| x.abs() < 1e-14));
    }
}
