//! Task construction, Reptile meta-training with interleaved graph
//! evolution, multi-task pretraining and target adaptation.

mod config;
mod log;
mod reptile;
mod tasks;
mod train;

pub use config::MetaConfig;
pub use log::{LogEvent, TrainLog};
pub use reptile::{inner_adapt, reptile_outer};
pub use tasks::{make_tasks, InstanceBank, Task};
pub use train::{adapt_to_target, meta_train, pretrain_multitask, GraphState, TrainOutcome};
