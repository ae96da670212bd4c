//! End-to-end orchestration: configuration, synthetic world construction,
//! CSV ingestion and export, artifacts and manifests, and the stage runners
//! behind the command-line tool.

pub mod cli;
pub mod io;
pub mod manifest;
pub mod reports;

mod config;
mod stages;
mod world;

pub use config::{
    EnsembleConfig, Exp1Settings, Exp2Settings, IngestPaths, MetaConfigs, PopulationSizes, RunConfig, Toggles,
    WorldConfig,
};
pub use world::{attach_pb0, observed, source_normalizer, stage_seed, synth_bundles, train_sources, Role, SourceFit};
pub use stages::{EnsembleChoice, Exp1Document, Exp2Document, Pipeline, ReportDocument, Stage};
