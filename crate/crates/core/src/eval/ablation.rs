use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::meta::MetaConfig;
use crate::model::ModelConfig;

use super::{run_plan, Benchmark, EvalReport, Plan, RunOutput};

/// The four switches of the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Toggles {
    pub graph_reasoning: bool,
    pub copy_mechanism: bool,
    pub meta_transfer: bool,
    pub graph_evolving: bool,
}

impl Toggles {
    pub const ALL_ON: Toggles = Toggles {
        graph_reasoning: true,
        copy_mechanism: true,
        meta_transfer: true,
        graph_evolving: true,
    };

    /// The full model followed by each single-off variant.
    pub fn grid() -> Vec<(&'static str, Toggles)> {
        let on = Self::ALL_ON;
        vec![
            ("full", on),
            (
                "-graph reasoning",
                Toggles {
                    graph_reasoning: false,
                    ..on
                },
            ),
            (
                "-copy mechanism",
                Toggles {
                    copy_mechanism: false,
                    ..on
                },
            ),
            (
                "-meta transfer",
                Toggles {
                    meta_transfer: false,
                    ..on
                },
            ),
            (
                "-graph evolving",
                Toggles {
                    graph_evolving: false,
                    ..on
                },
            ),
        ]
    }

    pub fn model_config(self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            graph_reasoning: self.graph_reasoning,
            copy_mechanism: self.copy_mechanism,
            ..base.clone()
        }
    }

    pub fn plan(self) -> Plan {
        Plan {
            meta_transfer: self.meta_transfer,
            graph_evolving: self.graph_evolving,
            adapt: true,
        }
    }
}

/// One full train and evaluate run for a toggle setting.
pub fn run_toggles(bench: &Benchmark, base: &ModelConfig, meta: &MetaConfig, t: Toggles) -> Result<RunOutput> {
    run_plan(bench, &t.model_config(base), meta, t.plan())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub toggles: Toggles,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub rows: Vec<AblationRow>,
}

impl AblationGrid {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    /// One line per row with the four switches and average scores.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:18} {:>5} {:>5} {:>5} {:>5} | {:>8} {:>8} {:>8}",
            "setting", "MGR", "copy", "meta", "evol", "E-F1", "BLEU", "gen-F1"
        );
        let mark = |b: bool| if b { "x" } else { "-" };
        for r in &self.rows {
            let t = r.toggles;
            let _ = write!(
                out,
                "{:18} {:>5} {:>5} {:>5} {:>5} | ",
                r.label,
                mark(t.graph_reasoning),
                mark(t.copy_mechanism),
                mark(t.meta_transfer),
                mark(t.graph_evolving)
            );
            match (&r.report, &r.error) {
                (Some(rep), _) => {
                    let a = &rep.average;
                    let _ = writeln!(out, "{:8.2} {:8.2} {:8.2}", a.entity_f1, a.bleu, a.generation_f1);
                }
                (None, e) => {
                    let _ = writeln!(out, "failed: {}", e.as_deref().unwrap_or("unknown error"));
                }
            }
        }
        out
    }
}

/// Runs every row of the grid with shared seeds. A failing row is kept with
/// its error.
pub fn run_ablation(bench: &Benchmark, base: &ModelConfig, meta: &MetaConfig) -> AblationGrid {
    let rows = Toggles::grid()
        .into_iter()
        .map(|(label, t)| {
            let (report, error) = match run_toggles(bench, base, meta, t) {
                Ok(run) => (Some(run.report), None),
                Err(e) => {
                    log::error!("ablation row `{label}` failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            AblationRow {
                label: label.into(),
                toggles: t,
                report,
                error,
            }
        })
        .collect();
    AblationGrid { rows }
}
