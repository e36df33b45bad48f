//! Run configuration read from TOML. Every section is optional and falls
//! back to the reference scenario; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagConfig;
use crate::error::{Result, SimError};
use crate::expansion::RemainderState;
use crate::fluid_core::{NssState, PhysParams};
use crate::kinetic_solver::cfl_dt;
use crate::spatial_grid::Grid;
use crate::velocity_basis::VelocityBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 64, length: 2.0 * PI }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityConfig {
    pub n_hermite: usize,
    pub dv: usize,
}

impl Default for VelocityConfig {
    fn default() -> Self {
        Self { n_hermite: 32, dv: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Upper bound on the step; the transport bound may shrink it further.
    pub dt: Option<f64>,
    pub cfl: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_final: 0.5, dt: None, cfl: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `m0 = A_m cos kx`, `u0 = A_u sin kx`, `h0 = A_h cos kx`, `k = 2 pi / L`.
    Reference,
    /// Everything at rest.
    Equilibrium,
    /// Seeded random combination of the three lowest Fourier modes.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub profile: Profile,
    pub m0_amp: f64,
    pub u0_amp: f64,
    pub h0_amp: f64,
    /// Amplitude of a seeded random remainder; zero gives well-prepared data.
    pub remainder_amp: f64,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Reference,
            m0_amp: 0.05,
            u0_amp: 0.05,
            h0_amp: 0.05,
            remainder_amp: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps: vec![0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Diagnostics are written every this many steps (and at the end).
    pub report_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), report_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub physics: PhysParams,
    pub grid: GridConfig,
    pub velocity: VelocityConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub diagnostics: DiagConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl SimConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.physics.violations();
        let g = &self.grid;
        if g.nx < 8 || !g.nx.is_multiple_of(2) {
            v.push(format!("grid.nx: need an even value >= 8 (got {})", g.nx));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            v.push(format!("grid.length: need L > 0 (got {})", g.length));
        }
        if self.velocity.dv != 1 {
            v.push(format!("velocity.dv: the solver runs with dv = 1 (got {})", self.velocity.dv));
        }
        if self.velocity.n_hermite < 4 {
            v.push(format!("velocity.n_hermite: need N >= 4 (got {})", self.velocity.n_hermite));
        }
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            v.push(format!("time.t_final: need T > 0 (got {})", t.t_final));
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0) {
                v.push(format!("time.dt: need dt > 0 (got {dt})"));
            }
        }
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            v.push(format!("time.cfl: need 0 < cfl <= 1 (got {})", t.cfl));
        }
        let i = &self.initial;
        for (name, x) in [
            ("m0_amp", i.m0_amp),
            ("u0_amp", i.u0_amp),
            ("h0_amp", i.h0_amp),
            ("remainder_amp", i.remainder_amp),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("initial.{name}: need a finite value >= 0 (got {x})"));
            }
        }
        if i.h0_amp >= 1.0 {
            v.push(format!("initial.h0_amp: need < 1 to keep 1 + h0 > 0 (got {})", i.h0_amp));
        }
        if i.m0_amp >= 1.0 {
            v.push(format!("initial.m0_amp: need < 1 to keep 1 + m0 > 0 (got {})", i.m0_amp));
        }
        v.extend(self.diagnostics.violations());
        if 2 * self.diagnostics.order_x as usize + 4 > g.nx {
            v.push(format!(
                "diagnostics.order_x: {} is not resolvable on nx = {}",
                self.diagnostics.order_x, g.nx
            ));
        }
        let s = &self.sweep.eps;
        if s.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            v.push(format!("sweep.eps: values must lie in (0, 1] (got {s:?})"));
        }
        if s.windows(2).any(|w| w[1] >= w[0]) {
            v.push(format!("sweep.eps: values must be strictly decreasing (got {s:?})"));
        }
        if self.output.report_every == 0 {
            v.push("output.report_every: need >= 1 (got 0)".into());
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

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.length)
    }

    pub fn build_basis(&self) -> Result<VelocityBasis> {
        VelocityBasis::new(self.velocity.dv, self.velocity.n_hermite)
    }

    /// Step size at `eps`: the configured step capped by the transport bound,
    /// then shrunk so that a whole number of steps lands on `t_final`.
    pub fn time_step(&self, grid: &Grid, eps: f64) -> (f64, usize) {
        let bound = cfl_dt(grid, self.velocity.n_hermite, eps, self.time.cfl);
        let target = self.time.dt.map_or(bound, |d| d.min(bound));
        let steps = ((self.time.t_final / target) - 1e-9).ceil().max(1.0) as usize;
        (self.time.t_final / steps as f64, steps)
    }

    /// Limit-system initial state for the configured profile.
    pub fn initial_nss(&self, grid: &Grid) -> NssState {
        let i = &self.initial;
        let k = 2.0 * PI / grid.length();
        match i.profile {
            Profile::Equilibrium => NssState::equilibrium(grid.nx()),
            Profile::Reference => NssState {
                m0: grid.sample(|x| i.m0_amp * (k * x).cos()),
                u0: grid.sample(|x| i.u0_amp * (k * x).sin()),
                h0: grid.sample(|x| i.h0_amp * (k * x).cos()),
            },
            Profile::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(i.seed);
                NssState {
                    m0: random_smooth(grid, &mut rng, i.m0_amp),
                    u0: random_smooth(grid, &mut rng, i.u0_amp),
                    h0: random_smooth(grid, &mut rng, i.h0_amp),
                }
            }
        }
    }

    /// Remainder initial state; zero unless `remainder_amp > 0`.
    pub fn initial_remainder(&self, grid: &Grid) -> RemainderState {
        let modes = self.velocity.n_hermite;
        let mut r = RemainderState::zeros(grid.nx(), modes);
        let amp = self.initial.remainder_amp;
        if amp == 0.0 {
            return r;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.initial.seed.wrapping_add(1));
        for n in 0..modes.min(6) {
            let f = random_smooth(grid, &mut rng, amp);
            r.g.set_mode(n, &f);
        }
        r.u = random_smooth(grid, &mut rng, amp);
        r.rho = random_smooth(grid, &mut rng, amp);
        r
    }
}

/// Sum of the three lowest Fourier modes with coefficients in `[-amp, amp]`,
/// scaled so the sup norm stays below `amp`.
pub fn random_smooth(grid: &Grid, rng: &mut impl Rng, amp: f64) -> Vec<f64> {
    let k = 2.0 * PI / grid.length();
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..=1.0) * amp / 6.0).collect();
    grid.sample(|x| {
        (1..=3)
            .map(|m| {
                let t = k * m as f64 * x;
                c[2 * (m - 1)] * t.cos() + c[2 * m - 1] * t.sin()
            })
            .sum()
    })
}

pub fn parse_config(text: &str, origin: &str) -> Result<SimConfig> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = parse_config(
            "[physics]\neps = 0.1\n[grid]\nnx = 32\n[velocity]\nn_hermite = 16\n[time]\nt_final = 0.1\n",
            "inline",
        )
        .unwrap();
        assert_eq!(cfg.grid.nx, 32);
        assert_eq!(cfg.velocity.n_hermite, 16);
        assert_eq!(cfg.physics.gamma, 2.0);
        assert_eq!(cfg.diagnostics.order_x, 4);
        assert_eq!(cfg.output.report_every, 1);
    }

    #[test]
    fn invalid_gamma_is_named() {
        let err = parse_config("[physics]\ngamma = 0.5\n", "inline").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("γ > 1"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn all_violations_are_collected() {
        let err = parse_config("[physics]\ngamma = 0.5\nmu = -1.0\n[grid]\nnx = 7\n", "x").unwrap_err();
        match err {
            SimError::Validation(v) => assert!(v.len() >= 3, "{v:?}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors_carry_location() {
        let err = parse_config("[grid]\nnxx = 32\n", "cfg.toml").unwrap_err();
        assert!(matches!(err, SimError::Parse { .. }));
        let err = parse_config("[grid]\nnx = = 3\n", "cfg.toml").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_config(Path::new("/nonexistent/cfg.toml")).unwrap_err();
        assert!(matches!(err, SimError::Io { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn sweep_must_decrease() {
        let err = parse_config("[sweep]\neps = [0.05, 0.1]\n", "x").unwrap_err();
        assert!(err.to_string().contains("decreasing"));
    }

    #[test]
    fn time_step_lands_on_final_time() {
        let cfg = SimConfig::default();
        let grid = cfg.build_grid().unwrap();
        let (dt, n) = cfg.time_step(&grid, 0.1);
        assert!((dt * n as f64 - 0.5).abs() < 1e-12);
        assert!(dt <= cfl_dt(&grid, 32, 0.1, 0.5));
        let mut c2 = cfg.clone();
        c2.time.dt = Some(0.05);
        c2.time.t_final = 0.5;
        let (dt2, n2) = c2.time_step(&grid, 1.0);
        assert!(dt2 <= 0.05 + 1e-15 && (dt2 * n2 as f64 - 0.5).abs() < 1e-12);
    }
}
