//! Metrics, per-disease evaluation, regime pipelines and the ablation grid.

mod ablation;
mod metrics;
mod pipeline;
mod report;

pub use ablation::{run_ablation, run_toggles, AblationGrid, AblationRow, Toggles};
pub use metrics::{bleu_n, bleu_sentence, entity_f1};
pub use pipeline::{
    finish_run, initial_state, run_plan, run_regime, run_regimes, train_source, Benchmark, BenchmarkData,
    BenchmarkSpec, Plan, Regime, RunOutput,
};
pub use report::{config_digest, evaluate, render_table, DiseaseScores, EvalReport};
