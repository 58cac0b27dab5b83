use std::path::PathBuf;

use clap::Args;
use kcnet::eval::{Phase, PhaseTimer};
use kcnet::{Dataset, EvalReport, Scalar};

use crate::config::DataSection;
use crate::data::load_test;
use crate::error::CliResult;
use crate::model_file::SavedModel;
use crate::output::{self, RunOutput};

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Saved model file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataSection,
    /// Also write reports.jsonl into this directory.
    #[arg(long = "out")]
    pub out_dir: Option<PathBuf>,
}

fn test_set<T: Scalar>(data: &DataSection, classes: &[String]) -> CliResult<Dataset<T>> {
    Ok(load_test::<T>(data)?.align_classes(classes)?)
}

/// Scores a saved model on the test data.
pub fn evaluate_model(model: &SavedModel, data: &DataSection) -> CliResult<EvalReport> {
    let mut timer = PhaseTimer::new();
    let classes = model.class_labels().to_vec();
    let (pred, truth) = match model {
        SavedModel::KcNet64(m) => {
            let t = test_set::<f64>(data, &classes)?;
            (timer.time(Phase::Evaluate, || m.predict(t.features()))?, t.labels().to_vec())
        }
        SavedModel::KcNet32(m) => {
            let t = test_set::<f32>(data, &classes)?;
            (timer.time(Phase::Evaluate, || m.predict(t.features()))?, t.labels().to_vec())
        }
        SavedModel::Elm64(m) => {
            let t = test_set::<f64>(data, &classes)?;
            (timer.time(Phase::Evaluate, || m.predict(t.features()))?, t.labels().to_vec())
        }
        SavedModel::Elm32(m) => {
            let t = test_set::<f32>(data, &classes)?;
            (timer.time(Phase::Evaluate, || m.predict(t.features()))?, t.labels().to_vec())
        }
    };
    Ok(EvalReport::new(
        model.kind(),
        model.hidden_dim(),
        model.seed(),
        &pred,
        &truth,
        classes.len(),
        timer.timings(),
    )?)
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let model = SavedModel::load(&args.model)?;
    let report = evaluate_model(&model, &args.data)?;
    if let Some(dir) = args.out_dir {
        let mut out = RunOutput::new(dir);
        out.add("reports.jsonl", output::reports_jsonl(std::slice::from_ref(&report))?);
        out.commit()?;
    }
    crate::emit(&serde_json::to_string(&report)?);
    Ok(())
}
