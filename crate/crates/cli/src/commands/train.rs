//! Training commands: plain KCNet, single-model input search, ensemble search, ELM.

use std::path::PathBuf;

use clap::ValueEnum;
use kcnet::baselines::ElmEncoder;
use kcnet::doa::{run_doa_from, run_ensemble_doa, DoaHistory};
use kcnet::eval::{Phase, PhaseTimer};
use kcnet::{sample_projection, ElmModel, EvalReport, KcNet, Scalar};
use log::info;
use ndarray::ArrayView2;
use serde::Serialize;

use crate::config::{Precision, RunConfig};
use crate::data::{load_train_test, TrainTest};
use crate::error::CliResult;
use crate::model_file::{Precise, SavedModel};
use crate::output::{self, HistoryRow, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Kcnet,
    Doa,
    Ensemble,
    Elm,
}

impl ModelKind {
    /// Name used in reports and the default output directory.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kcnet => "kcnet",
            ModelKind::Doa => "kcnet-doa",
            ModelKind::Ensemble => "kcnet-ensemble",
            ModelKind::Elm => "elm",
        }
    }
}

/// Outcome of one seeded replicate.
pub struct Replicate {
    pub model: SavedModel,
    pub report: EvalReport,
    /// Input-search histories, one per submodel (empty for plain models).
    pub histories: Vec<DoaHistory>,
}

fn evaluate<T: Scalar>(
    timer: &mut PhaseTimer,
    name: &str,
    hidden: usize,
    seed: u64,
    data: &TrainTest<T>,
    predict: impl FnOnce(ArrayView2<'_, T>) -> kcnet::Result<Vec<usize>>,
) -> CliResult<EvalReport> {
    let mut report = timer.time(Phase::Evaluate, || -> CliResult<EvalReport> {
        let pred = predict(data.test.features())?;
        let classes = data.train.n_classes();
        Ok(EvalReport::new(name, hidden, seed, &pred, data.test.labels(), classes, Default::default())?)
    })?;
    report.timings = timer.timings();
    Ok(report)
}

/// Trains and evaluates one replicate of `kind` with `hidden` units and `seed`.
pub fn train_replicate<T: Precise>(
    kind: ModelKind,
    cfg: &RunConfig,
    data: &TrainTest<T>,
    hidden: usize,
    seed: u64,
) -> CliResult<Replicate>
{
    let d = data.train.n_features();
    let mut timer = PhaseTimer::new();
    let name = kind.name();
    match kind {
        ModelKind::Elm => {
            let ec = cfg.elm_config(d, hidden, seed);
            let encoder = timer.time(Phase::Configure, || -> CliResult<_> {
                ec.validate()?;
                Ok(ElmEncoder::<T>::sample(&ec))
            })?;
            let model = timer.time(Phase::Train, || ElmModel::fit_with_encoder(&data.train, &ec, encoder))?;
            let report = evaluate(&mut timer, name, hidden, seed, data, |x| model.predict(x))?;
            Ok(Replicate {
                model: T::wrap_elm(model),
                report,
                histories: Vec::new(),
            })
        }
        ModelKind::Kcnet | ModelKind::Doa => {
            let mc = cfg.model_config(d, hidden, seed);
            let projection = timer.time(Phase::Configure, || sample_projection(&mc))?;
            let (model, histories) = timer.time(Phase::Train, || -> CliResult<_> {
                if kind == ModelKind::Kcnet {
                    Ok((KcNet::fit_with_projection(&data.train, &mc, projection)?, Vec::new()))
                } else {
                    let out = run_doa_from(&data.train, &mc, &cfg.doa_config(seed), projection)?;
                    Ok((out.model, vec![out.history]))
                }
            })?;
            let report = evaluate(&mut timer, name, hidden, seed, data, |x| model.predict(x))?;
            Ok(Replicate {
                model: T::wrap_kcnet(model),
                report,
                histories,
            })
        }
        ModelKind::Ensemble => {
            let mc = cfg.model_config(d, hidden, seed);
            let ens = cfg.ensemble_config(seed);
            timer.time(Phase::Configure, || -> CliResult<()> {
                mc.validate()?;
                for k in 0..ens.submodels.max(1) {
                    ens.submodel_config(&mc, k)?;
                }
                Ok(())
            })?;
            let out = timer.time(Phase::Train, || run_ensemble_doa(&data.train, &mc, &ens))?;
            let model = out.model;
            let report = evaluate(&mut timer, name, hidden, seed, data, |x| model.predict(x))?;
            Ok(Replicate {
                model: T::wrap_kcnet(model),
                report,
                histories: out.histories,
            })
        }
    }
}

/// Default run directory, `runs/<model>-s<seed>`.
pub fn default_out_dir(name: &str, seed: u64) -> PathBuf {
    PathBuf::from("runs").join(format!("{name}-s{seed}"))
}

pub fn run(kind: ModelKind, cfg: RunConfig) -> CliResult<()> {
    match cfg.run.precision.unwrap_or_default() {
        Precision::F64 => run_typed::<f64>(kind, cfg),
        Precision::F32 => run_typed::<f32>(kind, cfg),
    }
}

fn run_typed<T: Precise>(kind: ModelKind, cfg: RunConfig) -> CliResult<()>
{
    let seed = cfg.seed();
    let reps = cfg.reps()?;
    let hidden = cfg.hidden_dim()?;
    let data = load_train_test::<T>(&cfg.data, seed)?;
    let dir = cfg.run.out_dir.clone().unwrap_or_else(|| default_out_dir(kind.name(), seed));
    let mut out = RunOutput::new(dir);

    let mut reports = Vec::with_capacity(reps);
    let mut history = Vec::<HistoryRow>::new();
    for r in 0..reps {
        let rep_seed = seed + r as u64;
        let rep = train_replicate(kind, &cfg, &data, hidden, rep_seed)?;
        info!(
            "{} rep {r} seed {rep_seed}: accuracy {:.4}, weighted F1 {:.4}, {:.1}s",
            kind.name(),
            rep.report.accuracy,
            rep.report.weighted_f1,
            rep.report.timings.total()
        );
        for (k, h) in rep.histories.iter().enumerate() {
            history.extend(output::history_rows(r, k, h));
        }
        let file = if reps == 1 {
            "model.kcn".to_string()
        } else {
            format!("model-r{r}.kcn")
        };
        out.add(file, rep.model.to_bytes());
        reports.push(rep.report);
    }

    out.add("config.toml", cfg.to_toml().into_bytes());
    out.add("reports.jsonl", output::reports_jsonl(&reports)?);
    out.add("summary.csv", output::summary_csv(&reports)?);
    if matches!(kind, ModelKind::Doa | ModelKind::Ensemble) {
        out.add("history.csv", output::history_csv(&history)?);
    }
    let dir = out.commit()?;
    for row in output::summarize(&reports) {
        crate::emit(&serde_json::to_string(&row)?);
    }
    info!("wrote {}", dir.display());
    Ok(())
}
