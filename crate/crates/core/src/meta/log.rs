use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training event. Wall-clock time is left out so logs of identical
/// runs are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Iteration {
        phase: String,
        iteration: usize,
        loss: f64,
        tasks: usize,
    },
    Evolve {
        phase: String,
        iteration: usize,
        nodes: usize,
        edges: usize,
    },
    Validation {
        phase: String,
        round: usize,
        loss: f64,
        best: f64,
        patience: usize,
    },
    EarlyStop {
        phase: String,
        round: usize,
        best_round: usize,
    },
    Skipped {
        phase: String,
        what: String,
        reason: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub events: Vec<LogEvent>,
}

impl TrainLog {
    pub fn push(&mut self, e: LogEvent) {
        self.events.push(e);
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.events.extend(other.events);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Training losses of one phase, in order.
    pub fn losses(&self, phase: &str) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Iteration { phase: p, loss, .. } if p == phase => Some(*loss),
                _ => None,
            })
            .collect()
    }

    pub fn validation_losses(&self, phase: &str) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Validation { phase: p, loss, .. } if p == phase => Some(*loss),
                _ => None,
            })
            .collect()
    }
}
