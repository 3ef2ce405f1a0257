//! Experiment orchestration for Floquet Hamiltonian learning: configuration,
//! grid execution and CSV output.

pub mod config;
pub mod engine;
pub mod output;

pub use config::{validate, Diagnostic, ExperimentConfig, ExperimentKind, Severity};
pub use engine::{run, Outcome, Record};

/// Environment variable that supplies the default worker count.
pub const JOBS_ENV: &str = "FLOQUET_LEARN_JOBS";

/// `--jobs`, else `FLOQUET_LEARN_JOBS`, else the number of logical CPUs.
pub fn resolve_jobs(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(j) = flag {
        anyhow::ensure!(j > 0, "--jobs must be at least 1");
        return Ok(j);
    }
    match std::env::var(JOBS_ENV) {
        Ok(v) => {
            let j: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("{JOBS_ENV}={v:?} is not a positive integer"))?;
            anyhow::ensure!(j > 0, "{JOBS_ENV} must be at least 1");
            Ok(j)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}
