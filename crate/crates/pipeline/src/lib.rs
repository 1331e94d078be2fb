//! Training, fault localization, repair and evaluation around the edit
//! decoder.

pub mod config;
pub mod evaluate;
pub mod ochiai;
pub mod repair;
pub mod train;

pub use config::TrainConfig;
pub use evaluate::{evaluate, evaluate_oracle, evaluate_with, BugOutcome, EvalSummary, LocalizationMode};
pub use ochiai::{ochiai, ochiai_score, Suspicious, SuspiciousnessRanking};
pub use repair::{
    repair, true_faulty_statement, validate_patch, Localization, OracleReplay, PatchCandidate, PatchVerdict,
    RepairBudget, RepairError, RepairReport, ScoredScript, ScriptSource,
};
pub use train::{mean_nll, train, Dataset, EpochMetrics, TrainError, TrainOutcome, Trainer};
