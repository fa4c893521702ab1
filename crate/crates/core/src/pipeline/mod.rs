//! Orchestration: full runs, the three-stage sparse variant, scaling
//! benchmark and parameter search.

pub mod config;
pub mod manifest;
pub mod run;
pub mod scaling;
pub mod staged;
pub mod tune;

pub use config::{derive_seed, CalibrationConfig, Decomposition, PipelineConfig, CONFIG_VERSION, UNPARTITIONED_LIMIT};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use run::{
    baseline_metrics, build_subproblems, decompose, finish, load_solutions, preprocess_event, run_pipeline,
    save_solutions, solve_subproblems, tracks_and_metrics, write_bin_csv, BinRow, CandidateSummary, Preprocessed,
    Report, SectorCandidates, Solution, SubProblem, SubgraphSummary,
};
pub use scaling::{fit_exponential, scaling_benchmark, ExpFit, ScalingFit, ScalingPoint};
pub use staged::{run_staged_sparse, stage_one_subgraphs, StageReport, StagedReport};
pub use tune::{tune_params, Objective, TuneResult, TuneTrial};
