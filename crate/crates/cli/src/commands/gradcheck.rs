use clap::Args;
use kcnet::doa::gradcheck::{run_gradcheck, GradcheckReport, GradcheckSizes};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const MAX_INPUT: usize = 8;
pub const MAX_HIDDEN: usize = 6;
pub const MAX_CLASSES: usize = 4;

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest input width drawn (2..=8).
    #[arg(long, default_value_t = 6)]
    pub max_input: usize,
    /// Largest hidden width drawn (2..=6).
    #[arg(long, default_value_t = 4)]
    pub max_hidden: usize,
    /// Largest class count drawn (2..=4).
    #[arg(long, default_value_t = 3)]
    pub max_classes: usize,
    #[arg(long, default_value_t = 5)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub inhibition: f64,
    /// Tolerance against the dense chain-rule oracle.
    #[arg(long, default_value_t = 1e-12)]
    pub oracle_tol: f64,
    /// Relative tolerance against finite differences.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_tol: f64,
}

#[derive(Debug, Serialize)]
pub struct GradcheckOutput {
    pub passed: bool,
    pub seed: u64,
    pub oracle_tol: f64,
    pub fd_tol: f64,
    #[serde(flatten)]
    pub report: GradcheckReport,
}

impl GradcheckArgs {
    pub fn sizes(&self) -> CliResult<GradcheckSizes> {
        let check = |name: &str, v: usize, max: usize| {
            if (2..=max).contains(&v) {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("--{name} must lie in 2..={max}, got {v}")))
            }
        };
        if self.max_samples == 0 {
            return Err(CliError::Usage("--max-samples must be at least 1".into()));
        }
        if self.instances == 0 {
            return Err(CliError::Usage("--instances must be at least 1".into()));
        }
        Ok(GradcheckSizes {
            max_input: check("max-input", self.max_input, MAX_INPUT)?,
            max_hidden: check("max-hidden", self.max_hidden, MAX_HIDDEN)?,
            max_classes: check("max-classes", self.max_classes, MAX_CLASSES)?,
            max_samples: self.max_samples,
        })
    }

    pub fn execute(&self) -> CliResult<GradcheckOutput> {
        let report = run_gradcheck(&self.sizes()?, self.seed, self.instances, self.inhibition);
        Ok(GradcheckOutput {
            passed: report.passed(self.oracle_tol, self.fd_tol),
            seed: self.seed,
            oracle_tol: self.oracle_tol,
            fd_tol: self.fd_tol,
            report,
        })
    }
}

pub fn run(args: GradcheckArgs) -> CliResult<()> {
    let out = args.execute()?;
    crate::emit(&serde_json::to_string_pretty(&out)?);
    if out.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "oracle deviation {:.3e}, finite-difference error {:.3e}",
            out.report.max_oracle_dev, out.report.max_fd_rel_err
        )))
    }
}
