//! Convergence study over a decreasing list of `eps`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::SimConfig;
use super::run::run_against;
use super::write_file;
use crate::diagnostics::ConvergenceErrors;
use crate::error::{Result, SimError};
use crate::fluid_core::nss_step;

pub const SWEEP_HEADER: &str = "eps,err_f,err_u,err_rho,runtime_s";

/// Least-squares line through `(log eps, log err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    /// Root-sum-square of the fit residuals in log space.
    pub residual: f64,
}

pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps.len() != errors.len() || eps.len() < 2 {
        return Err(SimError::Domain(format!(
            "rate fit needs two or more matching samples (got {} and {})",
            eps.len(),
            errors.len()
        )));
    }
    if eps.iter().chain(errors).any(|x| !(*x > 0.0)) {
        return Err(SimError::Domain("rate fit needs positive inputs".into()));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SimError::Domain("rate fit needs distinct eps values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(RateFit { slope, residual })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepMember {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub errors: ConvergenceErrors,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRates {
    pub err_f: RateFit,
    /// After removing the known `eps g1 sqrt(M)` gap.
    pub err_f_corrected: RateFit,
    pub err_u: RateFit,
    pub err_rho: RateFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub members: Vec<SweepMember>,
    pub rates: Option<SweepRates>,
    pub config: SimConfig,
}

/// Fits all error columns; `None` with fewer than two members.
pub fn fit_members(members: &[SweepMember]) -> Result<Option<SweepRates>> {
    if members.len() < 2 {
        return Ok(None);
    }
    let eps: Vec<f64> = members.iter().map(|m| m.eps).collect();
    let col = |f: fn(&ConvergenceErrors) -> f64| -> Vec<f64> {
        members.iter().map(|m| f(&m.errors)).collect()
    };
    Ok(Some(SweepRates {
        err_f: fit_rate(&eps, &col(|e| e.err_f))?,
        err_f_corrected: fit_rate(&eps, &col(|e| e.err_f_corrected))?,
        err_u: fit_rate(&eps, &col(|e| e.err_u))?,
        err_rho: fit_rate(&eps, &col(|e| e.err_rho))?,
    }))
}

pub fn sweep_csv(members: &[SweepMember]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for m in members {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.6}",
            m.eps, m.errors.err_f, m.errors.err_u, m.errors.err_rho, m.runtime_s
        );
    }
    out
}

/// Runs every `eps` in `cfg.sweep.eps` concurrently against one shared
/// limit trajectory, stepped at the finest member's time step. If a member
/// fails, the finished members are still written before the error returns.
pub fn run_sweep(cfg: &SimConfig, out: Option<&Path>) -> Result<SweepReport> {
    cfg.validate()?;
    let eps_list = cfg.sweep.eps.clone();
    if eps_list.len() < 2 {
        return Err(SimError::Config("sweep.eps needs at least two values".into()));
    }
    let grid = cfg.build_grid()?;
    let finest = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let (dt_ref, steps_ref) = cfg.time_step(&grid, finest);
    let nss0 = cfg.initial_nss(&grid);
    let mut nss_t = nss0.clone();
    for _ in 0..steps_ref {
        nss_t = nss_step(&grid, &cfg.physics, &nss_t, dt_ref)?;
    }

    let results: Vec<Result<SweepMember>> = eps_list
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let mut c = cfg.clone();
            c.physics.eps = eps;
            let (dt, steps) = c.time_step(&grid, eps);
            let (errors, _) = run_against(&c, &nss0, &nss_t)?;
            Ok(SweepMember { eps, dt, steps, errors, runtime_s: clock.elapsed().as_secs_f64() })
        })
        .collect();

    let mut members = Vec::new();
    let mut failure = None;
    for r in results {
        match r {
            Ok(m) => members.push(m),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    let rates = if failure.is_none() { fit_members(&members)? } else { None };
    let report = SweepReport { members, rates, config: cfg.clone() };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| SimError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        write_file(&dir.join("sweep.csv"), &sweep_csv(&report.members))?;
        write_file(&dir.join("sweep.json"), &serde_json::to_string_pretty(&report).unwrap())?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_rate_examples() {
        let f = fit_rate(&[0.1, 0.05], &[0.2, 0.1]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.residual < 1e-12);
        let f = fit_rate(&[0.1, 0.05], &[0.04, 0.01]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let f = fit_rate(&[0.1, 0.05, 0.025], &[0.1, 0.052, 0.0249]).unwrap();
        // closed form: sum (x - mx)(y - my) / sum (x - mx)^2 with x = ln eps
        let ln2 = 2f64.ln();
        let oracle = ((0.1f64).ln() - (0.0249f64).ln()) / (2.0 * ln2);
        assert!((f.slope - oracle).abs() < 1e-12, "{}", f.slope);
        assert!((f.slope - 1.003).abs() < 1e-3 && f.residual < 0.05);
    }

    #[test]
    fn fit_rate_rejects_bad_input() {
        assert!(fit_rate(&[0.1], &[0.1]).is_err());
        assert!(fit_rate(&[0.1, 0.05], &[0.1, 0.0]).is_err());
        assert!(fit_rate(&[0.1, 0.05], &[0.1]).is_err());
    }

    #[test]
    fn synthetic_errors_proportional_to_eps() {
        let members: Vec<SweepMember> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&eps| SweepMember {
                eps,
                dt: 0.0,
                steps: 0,
                errors: ConvergenceErrors {
                    err_f: 3.0 * eps,
                    err_f_corrected: 0.5 * eps,
                    err_u: eps,
                    err_rho: 7.0 * eps,
                },
                runtime_s: 0.0,
            })
            .collect();
        let r = fit_members(&members).unwrap().unwrap();
        for f in [r.err_f, r.err_f_corrected, r.err_u, r.err_rho] {
            assert!((f.slope - 1.0).abs() < 1e-12);
        }
        assert!(fit_members(&members[..1]).unwrap().is_none());
    }
}
