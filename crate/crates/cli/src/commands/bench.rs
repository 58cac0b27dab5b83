use clap::Args;
use log::info;

use crate::config::{DataSection, ModelSection, Precision, RunConfig, RunSection};
use crate::data::load_train_test;
use crate::error::{CliError, CliResult};
use crate::model_file::Precise;
use crate::output::{self, RunOutput};

use super::train::{default_out_dir, train_replicate, ModelKind};

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataSection,
    #[command(flatten)]
    pub model: ModelSection,
    #[command(flatten)]
    pub run: RunSection,
    /// Step of a `--hidden lo..hi` sweep.
    #[arg(long, default_value_t = 500)]
    pub step: usize,
    /// Models to time, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModelKind::Kcnet, ModelKind::Elm])]
    pub models: Vec<ModelKind>,
    /// Ridge penalty for the ELM runs; `--lambda` applies to the others.
    #[arg(long, default_value_t = 0.0)]
    pub elm_lambda: f64,
}

impl BenchArgs {
    pub fn config_layer(&self) -> RunConfig {
        RunConfig {
            data: self.data.clone(),
            model: self.model.clone(),
            run: self.run.clone(),
            ..RunConfig::default()
        }
    }
}

/// Times every model at every width on a single worker thread.
pub fn run(args: &BenchArgs, cfg: RunConfig) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match cfg.run.precision.unwrap_or_default() {
        Precision::F64 => run_typed::<f64>(args, cfg),
        Precision::F32 => run_typed::<f32>(args, cfg),
    })
}

fn run_typed<T: Precise>(args: &BenchArgs, cfg: RunConfig) -> CliResult<()> {
    let seed = cfg.seed();
    let reps = cfg.reps()?;
    let widths = cfg.model.hidden_dim.unwrap_or(crate::config::Width::Fixed(6500)).sweep(args.step)?;
    if args.models.is_empty() {
        return Err(CliError::Usage("--models is empty".into()));
    }
    let data = load_train_test::<T>(&cfg.data, seed)?;
    let mut elm_cfg = cfg.clone();
    elm_cfg.model.ridge_lambda = Some(args.elm_lambda);

    let mut reports = Vec::new();
    for &b in &widths {
        for &kind in &args.models {
            let c = if kind == ModelKind::Elm { &elm_cfg } else { &cfg };
            for r in 0..reps {
                let rep = train_replicate(kind, c, &data, b, seed + r as u64)?;
                let t = rep.report.timings;
                info!(
                    "bench {} B={b} seed {}: configure {:.2}s train {:.2}s evaluate {:.2}s accuracy {:.4}",
                    kind.name(),
                    seed + r as u64,
                    t.configure_s,
                    t.train_s,
                    t.evaluate_s,
                    rep.report.accuracy
                );
                reports.push(rep.report);
            }
        }
    }

    let dir = cfg.run.out_dir.clone().unwrap_or_else(|| default_out_dir("bench", seed));
    let mut out = RunOutput::new(dir);
    out.add("config.toml", cfg.to_toml().into_bytes());
    out.add("bench.csv", output::bench_csv(&reports)?);
    out.add("reports.jsonl", output::reports_jsonl(&reports)?);
    out.add("summary.csv", output::summary_csv(&reports)?);
    out.commit()?;
    for row in &reports {
        crate::emit(&serde_json::to_string(&output::BenchRow::from(row))?);
    }
    Ok(())
}
