//! Run configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MtlError, Result};
use crate::gbm::{RfecvConfig, TuningGrid};
use crate::lakesim::{CalibrationConfig, DriverConfig, ObservationDesign, PopulationConfig, TruthConfig};
use crate::mtl::{EnsembleSizeConfig, MetamodelConfig, PROFILE_COUNTS};
use crate::sourcemodel::{PgdlConfig, SourceKind};

/// Paths of externally supplied CSVs that replace the synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestPaths {
    pub lakes: PathBuf,
    pub drivers: PathBuf,
    pub observations: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSizes {
    pub sources: usize,
    pub targets: usize,
    /// target count for the expansion run
    pub expand_targets: usize,
    pub years: usize,
}

impl Default for PopulationSizes {
    fn default() -> Self {
        PopulationSizes { sources: 40, targets: 60, expand_targets: 200, years: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub population: PopulationConfig,
    pub drivers: DriverConfig,
    pub truth: TruthConfig,
    pub source_observations: ObservationDesign,
    pub target_observations: ObservationDesign,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            population: PopulationConfig::default(),
            drivers: DriverConfig::default(),
            truth: TruthConfig::default(),
            source_observations: ObservationDesign::default(),
            target_observations: ObservationDesign { interval_days: 5, ..ObservationDesign::default() },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfigs {
    pub pb: MetamodelConfig,
    pub pgdl: MetamodelConfig,
}

impl MetaConfigs {
    pub fn get(&self, family: SourceKind) -> &MetamodelConfig {
        match family {
            SourceKind::Pb => &self.pb,
            SourceKind::Pgdl => &self.pgdl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// cross-validate the size during `train-meta`; otherwise use `size`
    pub tune: bool,
    pub size: usize,
    pub search: EnsembleSizeConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { tune: true, size: 9, search: EnsembleSizeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp1Settings {
    pub random_draws: usize,
    pub max_rank: usize,
}

impl Default for Exp1Settings {
    fn default() -> Self {
        Exp1Settings { random_draws: 100, max_rank: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Exp2Settings {
    /// number of target lakes used, taken in id order among those with
    /// enough profiles
    pub lakes: usize,
    pub profile_counts: Vec<usize>,
    pub draws: usize,
    pub test_fraction: f64,
    /// fine-tuning settings for the sparse models; pretraining follows `pgdl`
    pub finetune_epochs: usize,
}

impl Default for Exp2Settings {
    fn default() -> Self {
        Exp2Settings {
            lakes: 4,
            profile_counts: PROFILE_COUNTS.to_vec(),
            draws: 5,
            test_fraction: 1.0 / 3.0,
            finetune_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub exp1: bool,
    pub exp2: bool,
    pub expand: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { exp1: true, exp2: true, expand: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub sizes: PopulationSizes,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub pgdl: PgdlConfig,
    #[serde(default)]
    pub metamodel: MetaConfigs,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub exp1: Exp1Settings,
    #[serde(default)]
    pub exp2: Exp2Settings,
    #[serde(default)]
    pub experiments: Toggles,
    /// real data replacing the synthetic world
    #[serde(default)]
    pub input: Option<IngestPaths>,
    /// excluded from the config hash
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Desk-scale defaults.
    pub fn desk(seed: u64) -> Self {
        RunConfig {
            seed,
            sizes: PopulationSizes::default(),
            world: WorldConfig::default(),
            calibration: CalibrationConfig::default(),
            pgdl: PgdlConfig::default(),
            metamodel: MetaConfigs::default(),
            ensemble: EnsembleConfig::default(),
            exp1: Exp1Settings::default(),
            exp2: Exp2Settings::default(),
            experiments: Toggles::default(),
            input: None,
            out: None,
        }
    }

    /// 145 sources, 305 targets, 1882 expansion targets, and the published
    /// metamodel settings.
    pub fn paper_scale(mut self) -> Self {
        self.sizes.sources = 145;
        self.sizes.targets = 305;
        self.sizes.expand_targets = 1882;
        for family in [SourceKind::Pb, SourceKind::Pgdl] {
            let mut m = MetamodelConfig::paper(family);
            m.tuning = Some(TuningGrid::paper());
            m.rfecv = Some(RfecvConfig::paper());
            match family {
                SourceKind::Pb => self.metamodel.pb = m,
                SourceKind::Pgdl => self.metamodel.pgdl = m,
            }
        }
        self.ensemble.search.holdout = 5;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| MtlError::Config(one_line(&e.to_string())))?;
        if !table.contains_key("seed") {
            return Err(MtlError::Config("seed is mandatory".into()));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| MtlError::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MtlError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.sources < 2 {
            return Err(MtlError::Config("need at least two source lakes".into()));
        }
        if self.sizes.years == 0 {
            return Err(MtlError::Config("years must be positive".into()));
        }
        if let Some(input) = &self.input {
            for p in [&input.lakes, &input.drivers, &input.observations] {
                if !p.exists() {
                    return Err(MtlError::Config(format!("input path {} does not exist", p.display())));
                }
            }
        }
        self.pgdl.pretrain.validate()?;
        self.pgdl.finetune.validate()?;
        if self.ensemble.size == 0 {
            return Err(MtlError::Config("ensemble size must be positive".into()));
        }
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        self.sizes.years * 365
    }

    /// SHA-256 of the canonical TOML form, excluding the output path.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out = None;
        hex::encode(Sha256::digest(canon.to_toml().as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
