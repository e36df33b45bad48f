//! Property suite behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{random_smooth, SimConfig};
use super::run::run_single;
use crate::diagnostics::{
    energy_e, macro_energy, micro_functionals, weighted_totals, Frame, TimePair,
};
use crate::error::Result;
use crate::expansion::{hilbert_residual, NssRates, RemainderState};
use crate::fluid_core::NssState;
use crate::velocity_basis::{HermiteCoeffs, Ladder, VelocityBasis};

pub const COERCIVITY_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    /// `max |L psi_n - n psi_n|` with `L = -d^2/dv^2 + v^2/4 - 1/2` built
    /// from ladder operators.
    pub l_eigen_err: f64,
    /// `max |P P g - P g|` over random `g`.
    pub projection_err: f64,
    /// `max |<L f, g> - <f, L g>| / (|f| |g|)` over random pairs.
    pub self_adjoint_err: f64,
    /// Smallest coercivity quotient per seed.
    pub c0_per_seed: Vec<f64>,
    pub c0: f64,
    /// `(max - min) / mean` across seeds.
    pub c0_spread: f64,
    /// Range of `E / weighted total` over random states.
    pub equivalence_range: (f64, f64),
    pub hilbert_r_minus1_max: f64,
    /// Ledger constant from a run of the configured scenario.
    pub ledger_constant: Option<f64>,
    pub e_initial: f64,
    pub e_max: f64,
    pub e_final: f64,
}

/// `L` through the differential form, on a basis two modes wider than the
/// input so no truncation reaches the compared entries.
fn l_by_ladders(wide: &VelocityBasis, c: &[f64]) -> Result<Vec<f64>> {
    let mut padded = vec![0.0; wide.len()];
    padded[..c.len()].copy_from_slice(c);
    let h = HermiteCoeffs::from_vec(padded);
    let d2 = wide.apply_ladder(&wide.apply_ladder(&h, Ladder::DDv, 0)?, Ladder::DDv, 0)?;
    let v2 = wide.apply_ladder(&wide.apply_ladder(&h, Ladder::MultiplyV, 0)?, Ladder::MultiplyV, 0)?;
    Ok((0..c.len())
        .map(|n| -d2.c[n] + 0.25 * v2.c[n] - 0.5 * h.c[n])
        .collect())
}

pub fn identity_errors(modes: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let basis = VelocityBasis::new(1, modes)?;
    let wide = VelocityBasis::new(1, modes + 2)?;
    let mut eig: f64 = 0.0;
    for n in 0..modes {
        let e = HermiteCoeffs::unit(modes, n);
        let l = l_by_ladders(&wide, &e.c)?;
        for (k, x) in l.iter().enumerate() {
            let want = if k == n { n as f64 } else { 0.0 };
            eig = eig.max((x - want).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proj: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for _ in 0..100 {
        let f: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fc = HermiteCoeffs::from_vec(f.clone());
        let p1: Vec<f64> = f.iter().zip(&basis.micro(&fc).c).map(|(a, m)| a - m).collect();
        let p1c = HermiteCoeffs::from_vec(p1.clone());
        let p2: Vec<f64> = p1.iter().zip(&basis.micro(&p1c).c).map(|(a, m)| a - m).collect();
        proj = proj.max(p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        // The top mode leaks through v^2 on the wide basis; compare on the
        // first modes - 1 entries where both sides are exact.
        let mut ft = f.clone();
        let mut gt = g.clone();
        ft[modes - 1] = 0.0;
        gt[modes - 1] = 0.0;
        let lf = l_by_ladders(&wide, &ft)?;
        let lg = l_by_ladders(&wide, &gt)?;
        let lhs: f64 = lf.iter().zip(&gt).map(|(a, b)| a * b).sum();
        let rhs: f64 = ft.iter().zip(&lg).map(|(a, b)| a * b).sum();
        let norm = (ft.iter().map(|x| x * x).sum::<f64>() * gt.iter().map(|x| x * x).sum::<f64>()).sqrt();
        adj = adj.max((lhs - rhs).abs() / norm);
    }
    Ok((eig, proj, adj))
}

/// Smallest coercivity quotient over random coefficient vectors.
pub fn empirical_c0(modes: usize, samples: usize, seed: u64) -> Result<f64> {
    let basis = VelocityBasis::new(1, modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c0 = f64::INFINITY;
    for _ in 0..samples {
        let c: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = basis.coercivity_ratio(&HermiteCoeffs::from_vec(c))?;
        c0 = c0.min(r.ratio);
    }
    Ok(c0)
}

/// Range of `E / weighted total` over random small states.
pub fn equivalence_range(cfg: &SimConfig, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let grid = cfg.build_grid()?;
    let basis = cfg.build_basis()?;
    let eps = cfg.physics.eps;
    let modes = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let nss = NssState {
            m0: random_smooth(&grid, &mut rng, 0.05),
            u0: random_smooth(&grid, &mut rng, 0.05),
            h0: random_smooth(&grid, &mut rng, 0.05),
        };
        let mut rem = RemainderState::zeros(grid.nx(), modes);
        for n in 0..modes.min(8) {
            let f = random_smooth(&grid, &mut rng, 0.05);
            rem.g.set_mode(n, &f);
        }
        rem.u = random_smooth(&grid, &mut rng, 0.05);
        rem.rho = random_smooth(&grid, &mut rng, 0.05);
        let pair = TimePair::steady(Frame { rem: &rem, nss: &nss });
        let e = energy_e(&grid, &basis, &cfg.diagnostics, &rem, &nss)?;
        let mac = macro_energy(&grid, &cfg.physics, &cfg.diagnostics, &nss, None)?;
        let mic = micro_functionals(&grid, &basis, &cfg.physics, &cfg.diagnostics, &pair, eps)?;
        let (w, _) = weighted_totals(&cfg.diagnostics, &mic, &mac);
        let ratio = e / w;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

pub fn hilbert_max(cfg: &SimConfig, samples: usize, seed: u64) -> Result<f64> {
    let grid = cfg.build_grid()?;
    let basis = cfg.build_basis()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let nss = NssState {
            m0: random_smooth(&grid, &mut rng, 0.1),
            u0: random_smooth(&grid, &mut rng, 0.1),
            h0: vec![0.0; grid.nx()],
        };
        let r = hilbert_residual(&grid, &basis, &cfg.physics, &nss, &NssRates::steady(grid.nx()))?;
        worst = worst.max(r.r_minus1);
    }
    Ok(worst)
}

pub fn run_check(cfg: &SimConfig, seed: u64) -> Result<CheckReport> {
    cfg.validate()?;
    let modes = cfg.velocity.n_hermite;
    let (l_eigen_err, projection_err, self_adjoint_err) = identity_errors(modes, seed)?;
    let c0_per_seed = vec![
        empirical_c0(modes, COERCIVITY_SAMPLES, seed)?,
        empirical_c0(modes, COERCIVITY_SAMPLES, seed.wrapping_add(1))?,
    ];
    let c0 = c0_per_seed.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = c0_per_seed.iter().cloned().fold(0.0, f64::max);
    let mean = c0_per_seed.iter().sum::<f64>() / c0_per_seed.len() as f64;
    let mut diag_cfg = cfg.clone();
    diag_cfg.diagnostics.c0_empirical = Some(c0);
    let equivalence_range = equivalence_range(&diag_cfg, 100, seed)?;
    let hilbert_r_minus1_max = hilbert_max(cfg, 20, seed)?;
    let run = run_single(&diag_cfg, None)?;
    Ok(CheckReport {
        l_eigen_err,
        projection_err,
        self_adjoint_err,
        c0_per_seed,
        c0,
        c0_spread: (cmax - c0) / mean,
        equivalence_range,
        hilbert_r_minus1_max,
        ledger_constant: run.summary.ledger_constant,
        e_initial: run.summary.e_initial,
        e_max: run.summary.e_max,
        e_final: run.summary.e_final,
    })
}
