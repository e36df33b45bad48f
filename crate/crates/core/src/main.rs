use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vfpcns::harness::{load_config, run_check, run_single, run_sweep, SimConfig};
use vfpcns::{Result, SimError};

#[derive(Parser)]
#[command(name = "vfpcns", version, about = "Two-phase kinetic/fluid solver and hydrodynamic-limit study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one coupled simulation and write timeseries.csv and summary.json.
    Run(Common),
    /// Run an ε-sweep and fit convergence rates; writes sweep.csv.
    Sweep(Common),
    /// Operator identities, empirical coercivity constant and energy ledger.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides initial.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ε values: the sweep list, or the single ε of a run.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

fn resolve(c: &Common, single_eps: bool) -> Result<SimConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => SimConfig::default(),
    };
    if let Some(dir) = &c.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = c.seed {
        cfg.initial.seed = seed;
    }
    if let Some(eps) = &c.eps {
        if single_eps {
            match eps.as_slice() {
                [e] => cfg.physics.eps = *e,
                _ => return Err(SimError::Config("run takes a single --eps value".into())),
            }
        } else {
            cfg.sweep.eps = eps.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = resolve(&c, true)?;
            let out = run_single(&cfg, Some(&cfg.output.dir))?;
            let s = &out.summary;
            println!("eps = {}  dt = {:.4e}  steps = {}", s.eps, s.dt, s.steps);
            println!(
                "err_f = {:.4e}  err_u = {:.4e}  err_rho = {:.4e}",
                s.errors.err_f, s.errors.err_u, s.errors.err_rho
            );
            println!("E(0) = {:.6e}  E(T) = {:.6e}  max E = {:.6e}", s.e_initial, s.e_final, s.e_max);
            println!(
                "drift: mass_kin {:.2e}  mass_fluid {:.2e}  momentum {:.2e}",
                s.mass_kin_drift, s.mass_fluid_drift, s.momentum_drift
            );
            println!("wrote {}", cfg.output.dir.display());
        }
        Command::Sweep(c) => {
            let cfg = resolve(&c, false)?;
            let rep = run_sweep(&cfg, Some(&cfg.output.dir))?;
            println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "eps", "err_f", "err_f-g1", "err_u", "err_rho");
            for m in &rep.members {
                let e = &m.errors;
                println!(
                    "{:>10.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                    m.eps, e.err_f, e.err_f_corrected, e.err_u, e.err_rho
                );
            }
            if let Some(r) = rep.rates {
                println!(
                    "slopes: err_f {:.3} (corrected {:.3})  err_u {:.3}  err_rho {:.3}",
                    r.err_f.slope, r.err_f_corrected.slope, r.err_u.slope, r.err_rho.slope
                );
            }
            println!("wrote {}", cfg.output.dir.join("sweep.csv").display());
        }
        Command::Check(c) => {
            let cfg = resolve(&c, true)?;
            let r = run_check(&cfg, cfg.initial.seed)?;
            let n = cfg.velocity.n_hermite;
            println!("L eigen-identity (N = {n}):   {:.2e}  {}", r.l_eigen_err, pass(r.l_eigen_err < 1e-12));
            println!("projection idempotence:      {:.2e}  {}", r.projection_err, pass(r.projection_err < 1e-12));
            println!("self-adjointness:            {:.2e}  {}", r.self_adjoint_err, pass(r.self_adjoint_err < 1e-12));
            println!(
                "empirical c0 = {:.6}  (per seed {:?}, spread {:.2}%)  {}",
                r.c0,
                r.c0_per_seed,
                100.0 * r.c0_spread,
                pass(r.c0 > 0.0 && r.c0_spread < 0.1)
            );
            println!(
                "E / weighted total over random states: [{:.4}, {:.4}]",
                r.equivalence_range.0, r.equivalence_range.1
            );
            println!("max r_minus1 over 20 states: {:.2e}", r.hilbert_r_minus1_max);
            println!(
                "E(0) = {:.6e}  max E = {:.6e}  E(T) = {:.6e}",
                r.e_initial, r.e_max, r.e_final
            );
            match r.ledger_constant {
                Some(c) => println!("fitted ledger constant C = {c:.6e}"),
                None => println!("fitted ledger constant C: none (bound violated)  FAIL"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
