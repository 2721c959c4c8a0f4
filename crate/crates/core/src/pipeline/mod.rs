//! Declarative stage graphs: load a JSON config, validate it, and execute
//! its stages in dependency order with a digest manifest.

mod config;
mod exec;
mod plan;

pub use config::{ArtifactKind, InputSpec, PipelineConfig, StageSpec};
pub use exec::{
    run_pipeline, run_pipeline_in, sha256, validate_config, PipelineOutput, MANIFEST_FILE,
};
pub use plan::{
    build_graph, output_slots, Diagnostic, Graph, Op, OutputSlot, Plan, PlannedStage, Source,
    DEFAULT_TOPK,
};
