//! Simulation studies on synthetic ground truths.

mod lsem;
mod study;
mod truth;

pub use lsem::{fit_lsem, lsem_residual_bootstrap, Block, LsemBootstrap, LsemFit};
pub use study::{
    aggregate, desk_bcmf_config, fixed_groups, run_study, Aggregate, Failure, Heldout, Method, Record, SimReport,
    StudySpec, Target, REPORT_LABEL,
};
pub use truth::{
    generate_dataset, CovariateSpec, GroundTruth, LinearBlocks, Profile, SimDataset, StepNode, StepTree, Surface,
    TruthKind,
};
