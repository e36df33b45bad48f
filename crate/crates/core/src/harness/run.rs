//! One coupled run co-evolved with the limit system, with diagnostics at
//! every reporting step.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::SimConfig;
use super::write_file;
use crate::diagnostics::{
    ab_residual, convergence_errors, dissipation_d, energy_e, macro_energy, micro_functionals,
    remainder_residual, weighted_totals, AbResiduals, ConvergenceErrors, DiagConfig,
    EnergyReport, Frame, RemainderResiduals, TimePair,
};
use crate::error::{Result, SimError};
use crate::expansion::{extract_remainder, well_prepared_initial};
use crate::fluid_core::{nss_step, NssState, PhysParams};
use crate::kinetic_solver::{conserved_totals, KineticState, KineticStepper, StepOptions};
use crate::spatial_grid::Grid;
use crate::velocity_basis::VelocityBasis;

/// Column order of `timeseries.csv`.
pub const TIMESERIES_HEADER: &str =
    "t,E_total,D_total,E_ma,D_ma,err_f,err_u,err_rho,mass_kin,mass_fluid,momentum";

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub errors: ConvergenceErrors,
    pub e_initial: f64,
    pub e_final: f64,
    pub e_max: f64,
    /// Left Riemann sum of the dissipation over the reporting times.
    pub dissipation_integral: f64,
    /// Largest `C` with `E(t) + C int D <= 1.01 E(0)` at every reporting time.
    pub ledger_constant: Option<f64>,
    pub mass_kin_drift: f64,
    pub mass_fluid_drift: f64,
    pub momentum_drift: f64,
    pub remainder_residuals: RemainderResiduals,
    pub ab_residuals: AbResiduals,
    pub runtime_s: f64,
    pub config: SimConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<EnergyReport>,
    pub final_kinetic: KineticState,
    pub final_nss: NssState,
    pub summary: RunSummary,
}

/// Everything fixed for one run.
struct Setup {
    grid: Grid,
    basis: VelocityBasis,
    params: PhysParams,
    dt: f64,
    steps: usize,
}

fn setup(cfg: &SimConfig) -> Result<Setup> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let basis = cfg.build_basis()?;
    let params = cfg.physics;
    let (dt, steps) = cfg.time_step(&grid, params.eps);
    Ok(Setup { grid, basis, params, dt, steps })
}

fn step_options(cfg: &SimConfig) -> StepOptions {
    StepOptions { cfl: cfg.time.cfl, ..Default::default() }
}

/// Diagnostics for the pair `(now, next)`, reported at the `now` time.
#[allow(clippy::too_many_arguments)]
fn report(
    s: &Setup,
    diag: &DiagConfig,
    kin: &KineticState,
    kin_next: &KineticState,
    nss: &NssState,
    nss_next: &NssState,
    residuals: bool,
) -> Result<(EnergyReport, Option<(RemainderResiduals, AbResiduals)>)> {
    let eps = s.params.eps;
    let rem = extract_remainder(&s.grid, &s.basis, kin, nss, eps)?;
    let rem_next = extract_remainder(&s.grid, &s.basis, kin_next, nss_next, eps)?;
    let pair = TimePair::new(
        Frame { rem: &rem, nss },
        Frame { rem: &rem_next, nss: nss_next },
        s.dt,
    );
    let e_total = energy_e(&s.grid, &s.basis, diag, &rem, nss)?;
    let d_total = dissipation_d(&s.grid, &s.basis, diag, &pair, eps)?;
    let dm0: Vec<f64> = (0..s.grid.nx()).map(|j| (nss_next.m0[j] - nss.m0[j]) / s.dt).collect();
    let du0: Vec<f64> = (0..s.grid.nx()).map(|j| (nss_next.u0[j] - nss.u0[j]) / s.dt).collect();
    let mac = macro_energy(&s.grid, &s.params, diag, nss, Some((&dm0, &du0)))?;
    let micro = micro_functionals(&s.grid, &s.basis, &s.params, diag, &pair, eps)?;
    let (e_weighted, d_weighted) = weighted_totals(diag, &micro, &mac);
    let errors = convergence_errors(&s.grid, &s.basis, kin, nss)?;
    let totals = conserved_totals(&s.grid, kin);
    let res = if residuals {
        Some((
            remainder_residual(&s.grid, &s.basis, &s.params, &pair, eps)?,
            ab_residual(&s.grid, &s.basis, &pair, eps)?,
        ))
    } else {
        None
    };
    Ok((
        EnergyReport {
            t: kin.t,
            e_total,
            d_total,
            e_ma: mac.e_ma,
            d_ma: mac.d_ma,
            e_ma_baseline: mac.baseline,
            micro,
            e_weighted,
            d_weighted,
            errors,
            mass_kinetic: totals.mass_kinetic,
            mass_fluid: totals.mass_fluid,
            momentum: totals.momentum,
        },
        res,
    ))
}

/// Largest `C` such that `E_n + C S_n <= 1.01 E_0` for all reports, where
/// `S_n` is the accumulated dissipation. `None` if no positive `C` works.
pub fn fit_ledger_constant(times: &[f64], e: &[f64], d: &[f64]) -> Option<f64> {
    let e0 = *e.first()?;
    if !(e0 > 0.0) {
        return None;
    }
    let bound = 1.01 * e0;
    let mut acc = 0.0;
    let mut c = f64::INFINITY;
    for n in 1..e.len() {
        acc += d[n - 1] * (times[n] - times[n - 1]);
        let slack = bound - e[n];
        if slack < 0.0 {
            return None;
        }
        if acc > 0.0 {
            c = c.min(slack / acc);
        }
    }
    (c.is_finite() && c > 0.0).then_some(c)
}

pub fn timeseries_csv(reports: &[EnergyReport]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in reports {
        let row = [
            r.t,
            r.e_total,
            r.d_total,
            r.e_ma,
            r.d_ma,
            r.errors.err_f,
            r.errors.err_u,
            r.errors.err_rho,
            r.mass_kinetic,
            r.mass_fluid,
            r.momentum,
        ];
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn dump_last_good(dir: &Path, kin: &KineticState, nss: &NssState) -> Result<()> {
    ensure_dir(dir)?;
    let modes: Vec<&[f64]> = (0..kin.h.modes()).map(|n| kin.h.mode(n)).collect();
    let dump = serde_json::json!({
        "t": kin.t,
        "step": kin.step,
        "rho": kin.fluid.rho,
        "u": kin.fluid.u,
        "hermite_modes": modes,
        "nss": { "m0": nss.m0, "u0": nss.u0, "h0": nss.h0 },
    });
    write_file(&dir.join("last_good.json"), &serde_json::to_string_pretty(&dump).unwrap())
}

fn as_divergence(e: SimError, kin: &KineticState, dt: f64) -> SimError {
    match e {
        SimError::State(what) => SimError::Divergence { step: kin.step + 1, t: kin.t + dt, what },
        e => e,
    }
}

/// Runs the configured scenario to `t_final`. With `out` set, writes
/// `timeseries.csv` and `summary.json` there (and `last_good.json` on
/// divergence).
pub fn run_single(cfg: &SimConfig, out: Option<&Path>) -> Result<RunOutput> {
    let clock = Instant::now();
    let s = setup(cfg)?;
    let nss0 = cfg.initial_nss(&s.grid);
    let rem0 = cfg.initial_remainder(&s.grid);
    let kin0 = well_prepared_initial(&s.grid, &s.basis, &s.params, &nss0, &rem0, s.params.eps)?;
    let stepper = KineticStepper::new(&s.grid, &s.basis, &s.params, s.dt, step_options(cfg))?;

    let mut reports = Vec::new();
    let mut residuals = None;
    let (mut kin, mut nss) = (kin0, nss0);
    // One extra step past the end supplies the forward difference at t_final.
    for n in 0..=s.steps {
        // Positivity loss mid-run is a blow-up like a non-finite value.
        let kin_next = match stepper.step(&kin).map_err(|e| as_divergence(e, &kin, s.dt)) {
            Ok(k) => k,
            Err(e) => {
                if let (Some(dir), SimError::Divergence { .. }) = (out, &e) {
                    dump_last_good(dir, &kin, &nss)?;
                }
                return Err(e);
            }
        };
        let nss_next = nss_step(&s.grid, &s.params, &nss, s.dt)?;
        let last = n == s.steps;
        if n % cfg.output.report_every == 0 || last {
            let (r, res) = report(&s, &cfg.diagnostics, &kin, &kin_next, &nss, &nss_next, last)?;
            reports.push(r);
            if res.is_some() {
                residuals = res;
            }
        }
        if last {
            break;
        }
        kin = kin_next;
        nss = nss_next;
    }

    let (res_rem, res_ab) = residuals.expect("final report carries residuals");
    let first = &reports[0];
    let fin = reports.last().unwrap();
    let drift = |f: fn(&EnergyReport) -> f64| {
        reports.iter().map(|r| (f(r) - f(first)).abs()).fold(0.0, f64::max)
    };
    let times: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let es: Vec<f64> = reports.iter().map(|r| r.e_total).collect();
    let ds: Vec<f64> = reports.iter().map(|r| r.d_total).collect();
    let dissipation_integral =
        (1..reports.len()).map(|n| ds[n - 1] * (times[n] - times[n - 1])).sum();
    let summary = RunSummary {
        eps: s.params.eps,
        dt: s.dt,
        steps: s.steps,
        t_final: kin.t,
        errors: fin.errors,
        e_initial: first.e_total,
        e_final: fin.e_total,
        e_max: es.iter().cloned().fold(0.0, f64::max),
        dissipation_integral,
        ledger_constant: fit_ledger_constant(&times, &es, &ds),
        mass_kin_drift: drift(|r| r.mass_kinetic),
        mass_fluid_drift: drift(|r| r.mass_fluid),
        momentum_drift: drift(|r| r.momentum),
        remainder_residuals: res_rem,
        ab_residuals: res_ab,
        runtime_s: clock.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("timeseries.csv"), &timeseries_csv(&reports))?;
        write_file(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary).unwrap())?;
    }
    Ok(RunOutput { reports, final_kinetic: kin, final_nss: nss, summary })
}

/// Kinetic run only, compared against a precomputed limit state at
/// `t_final`. Used by sweeps, where the limit trajectory is shared.
pub fn run_against(
    cfg: &SimConfig,
    nss_initial: &NssState,
    nss_final: &NssState,
) -> Result<(ConvergenceErrors, KineticState)> {
    let s = setup(cfg)?;
    let rem0 = cfg.initial_remainder(&s.grid);
    let mut kin = well_prepared_initial(&s.grid, &s.basis, &s.params, nss_initial, &rem0, s.params.eps)?;
    let stepper = KineticStepper::new(&s.grid, &s.basis, &s.params, s.dt, step_options(cfg))?;
    for _ in 0..s.steps {
        kin = stepper.step(&kin)?;
    }
    let errors = convergence_errors(&s.grid, &s.basis, &kin, nss_final)?;
    Ok((errors, kin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Profile;

    fn small(profile: Profile) -> SimConfig {
        let mut c = SimConfig::default();
        c.grid.nx = 16;
        c.velocity.n_hermite = 8;
        c.initial.profile = profile;
        c.physics.eps = 0.5;
        c.diagnostics.order_x = 2;
        c
    }

    #[test]
    fn equilibrium_ten_steps() {
        let mut c = small(Profile::Equilibrium);
        let grid = c.build_grid().unwrap();
        let (dt, _) = c.time_step(&grid, 0.5);
        c.time.t_final = 10.0 * dt;
        let out = run_single(&c, None).unwrap();
        assert_eq!(out.summary.steps, 10);
        let csv = timeseries_csv(&out.reports);
        assert_eq!(csv.lines().count(), 12);
        for r in &out.reports {
            assert!(r.errors.err_f < 1e-12 && r.errors.err_u < 1e-12 && r.errors.err_rho < 1e-12);
        }
    }

    #[test]
    fn deterministic_output() {
        let mut c = small(Profile::Random);
        c.initial.seed = 9;
        c.time.t_final = 0.02;
        let a = timeseries_csv(&run_single(&c, None).unwrap().reports);
        let b = timeseries_csv(&run_single(&c, None).unwrap().reports);
        assert_eq!(a, b);
    }

    #[test]
    fn ledger_constant_fit() {
        let t = [0.0, 1.0, 2.0];
        // min((1.01 - 0.8) / 0.1, (1.01 - 0.7) / 0.2) = 1.55
        let c = fit_ledger_constant(&t, &[1.0, 0.8, 0.7], &[0.1, 0.1, 0.1]).unwrap();
        assert!((c - 1.55).abs() < 1e-12);
        assert_eq!(fit_ledger_constant(&t, &[1.0, 1.2, 0.7], &[0.1, 0.1, 0.1]), None);
        assert_eq!(fit_ledger_constant(&t, &[0.0, 0.0, 0.0], &[0.0; 3]), None);
    }
}
