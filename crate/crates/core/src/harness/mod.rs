//! Configuration, single runs, ε-sweeps and the property check behind the
//! command-line front end.

pub mod check;
pub mod config;
pub mod run;
pub mod sweep;

use std::path::Path;

use crate::error::{Result, SimError};

pub use check::{run_check, CheckReport};
pub use config::{load_config, parse_config, SimConfig};
pub use run::{run_single, RunOutput, RunSummary};
pub use sweep::{fit_rate, run_sweep, RateFit, SweepReport};

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })
}
