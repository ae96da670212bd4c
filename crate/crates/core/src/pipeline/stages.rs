//! Stage runners. Each stage reads its inputs from the output directory,
//! writes its artifacts, and records them in the manifest.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io::{export_bundles, ingest, read_field, source_eligible, write_field};
use super::manifest::{content_hash, Manifest, ManifestEntry};
use super::reports::*;
use super::world::{attach_pb0, source_normalizer, stage_seed, synth_bundles, train_sources, Role, SourceFit};
use crate::error::{MtlError, Result};
use crate::metafeatures::{read_feature_table, write_feature_table, FeatureCatalog, LakeBundle, LakeProfile};
use crate::mtl::{
    build_transfer_matrix, experiment1, experiment2, rank_sources, train_metamodel, tune_ensemble_size, Exp1Config,
    Exp1Report, Exp1Summary, Exp2Config, Exp2Report, LakeEntry, Metamodel, RankedSources, SourceLake, TransferMatrix,
};
use crate::sourcemodel::{FeatureNormalizer, SourceKind, SourceModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Simulate,
    TrainSources,
    Matrix,
    TrainMeta,
    Exp1,
    Exp2,
    Expand,
    Report,
}

impl Stage {
    /// Stages in pipeline order.
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Simulate,
        Stage::TrainSources,
        Stage::Matrix,
        Stage::TrainMeta,
        Stage::Exp1,
        Stage::Exp2,
        Stage::Expand,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Simulate => "simulate",
            Stage::TrainSources => "train-sources",
            Stage::Matrix => "matrix",
            Stage::TrainMeta => "train-meta",
            Stage::Exp1 => "exp1",
            Stage::Exp2 => "exp2",
            Stage::Expand => "expand",
            Stage::Report => "report",
        }
    }
}

impl FromStr for Stage {
    type Err = MtlError;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| MtlError::Config(format!("unknown stage {s:?}")))
    }
}

const SOURCES_DIR: &str = "data/sources/";
const TARGETS_DIR: &str = "data/targets/";
const EXPAND_DIR: &str = "data/expand/";
const PB0_DIR: &str = "fields/pb0/";
const MODELS_DIR: &str = "models/";
const MATRIX_PB: &str = "matrix/pb.csv";
const MATRIX_PGDL: &str = "matrix/pgdl.csv";
const META_DIR: &str = "meta/";
const EXP1_SUMMARY: &str = "reports/exp1_summary.json";
const EXP2_SUMMARY: &str = "reports/exp2_summary.json";
const EXPAND_SUMMARY: &str = "reports/expand_summary.json";
const REPORT_JSON: &str = "reports/report.json";

fn matrix_path(family: SourceKind) -> &'static str {
    match family {
        SourceKind::Pb => MATRIX_PB,
        SourceKind::Pgdl => MATRIX_PGDL,
    }
}

fn family_key(family: SourceKind) -> &'static str {
    match family {
        SourceKind::Pb => "pb",
        SourceKind::Pgdl => "pgdl",
    }
}

/// Chosen ensemble size, persisted by `train-meta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleChoice {
    pub size: usize,
    pub tuned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Document {
    pub config_hash: String,
    pub summary: Exp1Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Document {
    pub config_hash: String,
    pub lakes: Vec<String>,
    pub treatments: Vec<crate::mtl::Exp2Treatment>,
    pub excluded: Vec<(String, usize)>,
    /// PGDL-MTL and ensemble medians from Experiment 1, when available
    pub exp1_medians: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config_hash: String,
    pub seed: u64,
    pub exp1: Option<Exp1Summary>,
    pub exp2: Option<Exp2Document>,
    pub expand: Option<Exp1Summary>,
    pub ensemble: Option<EnsembleChoice>,
}

/// A configured pipeline bound to an output directory.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub root: PathBuf,
    pub workers: usize,
    pub catalog: FeatureCatalog,
    hash: String,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, root: impl Into<PathBuf>, workers: usize) -> Result<Self> {
        cfg.validate()?;
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        let hash = cfg.hash();
        Ok(Pipeline { cfg, root, workers: workers.max(1), catalog: FeatureCatalog::default(), hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn in_pool<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| MtlError::Config(format!("cannot start {} workers: {e}", self.workers)))?;
        pool.install(f)
    }

    fn manifest(&self) -> Result<Manifest> {
        Manifest::load(&self.root)
    }

    fn require(&self, artifacts: &[&str]) -> Result<()> {
        self.manifest()?.require(artifacts, &self.hash)
    }

    fn record(&self, stage: Stage, artifacts: &[&str], inputs: &[&str]) -> Result<()> {
        let mut m = self.manifest()?;
        for a in artifacts {
            m.record(ManifestEntry {
                artifact: a.to_string(),
                stage: stage.name().into(),
                config_hash: self.hash.clone(),
                seed: self.cfg.seed,
                sha256: content_hash(&self.path(a))?,
                inputs: inputs.iter().map(|s| s.to_string()).collect(),
            });
        }
        m.save(&self.root)
    }

    fn reset_dir(&self, rel: &str) -> Result<PathBuf> {
        let dir = self.path(rel);
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Run one stage (all but `rank`).
    pub fn run(&self, stage: Stage) -> Result<()> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::Synth => self.synth(),
            Stage::Simulate => self.simulate(),
            Stage::TrainSources => self.train_sources(),
            Stage::Matrix => self.matrix(),
            Stage::TrainMeta => self.train_meta(),
            Stage::Exp1 => self.exp1().map(|_| ()),
            Stage::Exp2 => self.exp2().map(|_| ()),
            Stage::Expand => self.expand().map(|_| ()),
            Stage::Report => self.report().map(|_| ()),
        }
    }

    /// Every stage in order, skipping experiments switched off in the config.
    pub fn run_all(&self) -> Result<()> {
        for stage in Stage::ALL {
            let enabled = match stage {
                Stage::Exp1 => self.cfg.experiments.exp1,
                Stage::Exp2 => self.cfg.experiments.exp2,
                Stage::Expand => self.cfg.experiments.expand,
                _ => true,
            };
            if enabled {
                self.run(stage)?;
            }
        }
        Ok(())
    }

    pub fn synth(&self) -> Result<()> {
        self.in_pool(|| {
            let (sources, targets) = match &self.cfg.input {
                Some(inp) => {
                    let all = ingest(&inp.lakes, &inp.drivers, &inp.observations)?;
                    let (s, t): (Vec<LakeBundle>, Vec<LakeBundle>) = all.into_iter().partition(source_eligible);
                    log::info!("{} lakes eligible as sources, {} target-only", s.len(), t.len());
                    (s, t)
                }
                None => (
                    synth_bundles(&self.cfg, Role::Source, self.cfg.sizes.sources)?,
                    synth_bundles(&self.cfg, Role::Target, self.cfg.sizes.targets)?,
                ),
            };
            if sources.len() < 2 {
                return Err(MtlError::IncompleteSources(format!("only {} eligible source lakes", sources.len())));
            }
            export_bundles(&self.reset_dir(SOURCES_DIR)?, &sources)?;
            export_bundles(&self.reset_dir(TARGETS_DIR)?, &targets)?;
            std::fs::write(self.path("config.toml"), self.cfg.to_toml())?;
            self.record(Stage::Synth, &[SOURCES_DIR, TARGETS_DIR], &[])
        })
    }

    fn read_bundles(&self, dir: &str) -> Result<Vec<LakeBundle>> {
        let d = self.path(dir);
        ingest(&d.join("lakes.csv"), &d.join("drivers.csv"), &d.join("observations.csv"))
    }

    fn simulate_into(&self, bundles: &mut [LakeBundle], dir: &str) -> Result<()> {
        attach_pb0(bundles)?;
        let out = self.path(dir);
        std::fs::create_dir_all(&out)?;
        use rayon::prelude::*;
        bundles.par_iter().try_for_each(|b| {
            write_field(&out.join(format!("{}.csv", b.attributes.lake_id)), b.pb0_field.as_ref().expect("attached"))
        })
    }

    pub fn simulate(&self) -> Result<()> {
        self.require(&[SOURCES_DIR, TARGETS_DIR])?;
        self.in_pool(|| {
            self.reset_dir(PB0_DIR)?;
            for dir in [SOURCES_DIR, TARGETS_DIR] {
                let mut b = self.read_bundles(dir)?;
                self.simulate_into(&mut b, PB0_DIR)?;
            }
            self.record(Stage::Simulate, &[PB0_DIR], &[SOURCES_DIR, TARGETS_DIR])
        })
    }

    /// Bundles of a population with their PB0 fields attached.
    pub fn load_population(&self, dir: &str, fields: &str) -> Result<Vec<LakeBundle>> {
        use rayon::prelude::*;
        let mut bundles = self.read_bundles(dir)?;
        let fdir = self.path(fields);
        bundles.par_iter_mut().try_for_each(|b| {
            b.pb0_field = Some(read_field(&fdir.join(format!("{}.csv", b.attributes.lake_id)))?);
            Ok::<_, MtlError>(())
        })?;
        Ok(bundles)
    }

    pub fn train_sources(&self) -> Result<()> {
        self.require(&[SOURCES_DIR, PB0_DIR])?;
        self.in_pool(|| {
            let bundles = self.load_population(SOURCES_DIR, PB0_DIR)?;
            let normalizer = source_normalizer(&bundles)?;
            let trained = train_sources(&bundles, &normalizer, &self.cfg)?;
            let dir = self.reset_dir(MODELS_DIR)?;
            write_json(&dir.join("normalizer.json"), &normalizer)?;
            for (source, _) in &trained {
                for family in [SourceKind::Pb, SourceKind::Pgdl] {
                    let p = dir.join(family_key(family)).join(format!("{}.json", source.id()));
                    write_json(&p, source.model(family)?)?;
                }
            }
            let fits: Vec<SourceFit> = trained.into_iter().map(|(_, f)| f).collect();
            write_source_fits(&dir.join("sources.csv"), &fits)?;
            self.record(Stage::TrainSources, &[MODELS_DIR], &[SOURCES_DIR, PB0_DIR])
        })
    }

    fn load_model(&self, family: SourceKind, id: &str) -> Result<SourceModel> {
        let p = self.path(MODELS_DIR).join(family_key(family)).join(format!("{id}.json"));
        let text = std::fs::read_to_string(&p)
            .map_err(|_| MtlError::IncompleteSources(format!("no {} model for lake {id}", family.label())))?;
        let model: SourceModel = serde_json::from_str(&text)?;
        if model.kind() != family {
            return Err(MtlError::Schema { file: p.display().to_string(), detail: "model kind mismatch".into() });
        }
        Ok(model)
    }

    /// Source lakes with both trained models.
    pub fn load_sources(&self) -> Result<Vec<SourceLake>> {
        use rayon::prelude::*;
        self.require(&[SOURCES_DIR, PB0_DIR, MODELS_DIR])?;
        let bundles = self.load_population(SOURCES_DIR, PB0_DIR)?;
        bundles
            .into_par_iter()
            .map(|b| {
                let id = b.attributes.lake_id.to_string();
                Ok(SourceLake {
                    pb: Some(self.load_model(SourceKind::Pb, &id)?),
                    pgdl: Some(self.load_model(SourceKind::Pgdl, &id)?),
                    entry: LakeEntry::new(b)?,
                })
            })
            .collect()
    }

    pub fn load_normalizer(&self) -> Result<FeatureNormalizer> {
        let text = std::fs::read_to_string(self.path(MODELS_DIR).join("normalizer.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn matrix(&self) -> Result<()> {
        self.in_pool(|| {
            let sources = self.load_sources()?;
            for family in [SourceKind::Pb, SourceKind::Pgdl] {
                let m = build_transfer_matrix(&sources, family, &self.catalog)?;
                let p = self.path(matrix_path(family));
                std::fs::create_dir_all(p.parent().expect("has parent"))?;
                write_feature_table(&m.to_table(), std::fs::File::create(&p)?)?;
            }
            self.record(Stage::Matrix, &[MATRIX_PB, MATRIX_PGDL], &[SOURCES_DIR, PB0_DIR, MODELS_DIR])
        })
    }

    pub fn load_matrix(&self, family: SourceKind) -> Result<TransferMatrix> {
        let p = self.path(matrix_path(family));
        let table = read_feature_table(std::fs::File::open(&p)?)?;
        TransferMatrix::from_table(family, &self.catalog, table)
    }

    pub fn train_meta(&self) -> Result<()> {
        self.require(&[MATRIX_PB, MATRIX_PGDL])?;
        self.in_pool(|| {
            let dir = self.reset_dir(META_DIR)?;
            let mut pgdl = None;
            for family in [SourceKind::Pb, SourceKind::Pgdl] {
                let matrix = self.load_matrix(family)?;
                let meta = train_metamodel(&matrix, self.cfg.metamodel.get(family))?;
                let key = family_key(family);
                std::fs::write(dir.join(format!("{key}.txt")), meta.to_text())?;
                write_importances(&dir.join(format!("{key}_importance.csv")), &meta, &self.catalog)?;
                write_rfecv_curve(&dir.join(format!("{key}_rfecv.csv")), &meta)?;
                if family == SourceKind::Pgdl {
                    pgdl = Some((matrix, meta));
                }
            }
            let choice = if self.cfg.ensemble.tune {
                let (matrix, meta) = pgdl.expect("pgdl metamodel trained");
                let sources = self.load_sources()?;
                let search = crate::mtl::EnsembleSizeConfig {
                    seed: stage_seed(&self.cfg, "ensemble-size"),
                    ..self.cfg.ensemble.search.clone()
                };
                let res = tune_ensemble_size(&sources, &matrix, &meta, &self.catalog, &search)?;
                write_ensemble_sizes(&dir.join("ensemble_size.csv"), &res)?;
                EnsembleChoice { size: res.best, tuned: true }
            } else {
                EnsembleChoice { size: self.cfg.ensemble.size, tuned: false }
            };
            write_json(&dir.join("ensemble.json"), &choice)?;
            self.record(Stage::TrainMeta, &[META_DIR], &[MATRIX_PB, MATRIX_PGDL])
        })
    }

    pub fn load_metamodel(&self, family: SourceKind) -> Result<Metamodel> {
        let text = std::fs::read_to_string(self.path(META_DIR).join(format!("{}.txt", family_key(family))))?;
        Metamodel::from_text(&text)
    }

    pub fn ensemble_choice(&self) -> Result<EnsembleChoice> {
        let text = std::fs::read_to_string(self.path(META_DIR).join("ensemble.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Rank every source for `target_id` with the family's metamodel. The
    /// target may be any lake in the target, expansion or source data.
    pub fn rank(&self, target_id: &str, family: SourceKind) -> Result<RankedSources> {
        self.require(&[SOURCES_DIR, PB0_DIR, META_DIR])?;
        self.in_pool(|| {
            let mut candidates = vec![(TARGETS_DIR, PB0_DIR), (SOURCES_DIR, PB0_DIR)];
            if self.path(EXPAND_DIR).exists() {
                candidates.push((EXPAND_DIR, EXPAND_FIELDS_DIR));
            }
            let mut target = None;
            for (dir, fields) in candidates {
                let lakes = super::io::read_lakes(&self.path(dir).join("lakes.csv"))?;
                if lakes.iter().any(|l| l.lake_id.as_str() == target_id) {
                    let bundle = self
                        .load_population(dir, fields)?
                        .into_iter()
                        .find(|b| b.attributes.lake_id.as_str() == target_id)
                        .expect("listed lake");
                    target = Some(bundle);
                    break;
                }
            }
            let target = target.ok_or_else(|| MtlError::UnknownLake(target_id.to_string()))?;
            let target_profile = LakeProfile::of(&target)?;
            let sources = self.load_population(SOURCES_DIR, PB0_DIR)?;
            let profiles = sources.iter().map(LakeProfile::of).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&LakeProfile> = profiles.iter().collect();
            let meta = self.load_metamodel(family)?;
            let ranked = rank_sources(&meta, &target_profile, &refs, &self.catalog)?;
            let rel = format!("rank/{}_{}.csv", target_id, family_key(family));
            write_ranking(&self.path(&rel), &ranked)?;
            self.record(Stage::Report, &[&rel], &[SOURCES_DIR, PB0_DIR, META_DIR])?;
            Ok(ranked)
        })
    }

    fn exp1_config(&self, label: &str) -> Result<Exp1Config> {
        Ok(Exp1Config {
            ensemble_size: self.ensemble_choice()?.size,
            max_rank: self.cfg.exp1.max_rank,
            random_draws: self.cfg.exp1.random_draws,
            seed: stage_seed(&self.cfg, label),
        })
    }

    pub fn exp1(&self) -> Result<Exp1Report> {
        self.require(&[SOURCES_DIR, TARGETS_DIR, PB0_DIR, MODELS_DIR, META_DIR])?;
        self.in_pool(|| {
            let sources = self.load_sources()?;
            let targets = self.target_entries(TARGETS_DIR, PB0_DIR)?;
            let pb = self.load_metamodel(SourceKind::Pb)?;
            let pgdl = self.load_metamodel(SourceKind::Pgdl)?;
            let report = experiment1(&sources, &targets, Some(&pb), Some(&pgdl), &self.catalog, &self.exp1_config("exp1")?)?;
            let files = [
                "reports/exp1_targets.csv",
                "reports/exp1_ranks.csv",
                "reports/exp1_pairs.csv",
                "reports/exp1_methods.csv",
                EXP1_SUMMARY,
            ];
            write_exp1_targets(&self.path(files[0]), &report)?;
            write_exp1_ranks(&self.path(files[1]), &report)?;
            write_exp1_pairs(&self.path(files[2]), &report)?;
            write_method_summary(&self.path(files[3]), &report)?;
            write_json(&self.path(EXP1_SUMMARY), &Exp1Document { config_hash: self.hash.clone(), summary: report.summary() })?;
            self.record(Stage::Exp1, &files, &[SOURCES_DIR, TARGETS_DIR, PB0_DIR, MODELS_DIR, META_DIR])?;
            Ok(report)
        })
    }

    /// Observed lakes of a population as evaluation entries.
    fn target_entries(&self, dir: &str, fields: &str) -> Result<Vec<LakeEntry>> {
        use rayon::prelude::*;
        self.load_population(dir, fields)?
            .into_par_iter()
            .filter(|b| !b.observations.is_empty())
            .map(LakeEntry::new)
            .collect()
    }

    pub fn exp2(&self) -> Result<Exp2Report> {
        self.require(&[TARGETS_DIR, PB0_DIR, MODELS_DIR])?;
        self.in_pool(|| {
            let s = &self.cfg.exp2;
            let mut entries = self.target_entries(TARGETS_DIR, PB0_DIR)?;
            entries.sort_by(|a, b| a.id().cmp(b.id()));
            let need = s.profile_counts.iter().copied().max().unwrap_or(0);
            let pool_size = |e: &LakeEntry| {
                let n = e.bundle.observations.profile_dates().len();
                n - ((n as f64) * s.test_fraction).ceil() as usize
            };
            let (mut chosen, rest): (Vec<LakeEntry>, Vec<LakeEntry>) = entries.into_iter().partition(|e| pool_size(e) >= need);
            chosen.truncate(s.lakes);
            if chosen.len() < s.lakes {
                chosen.extend(rest.into_iter().filter(|e| pool_size(e) >= 1).take(s.lakes - chosen.len()));
            }
            let pgdl = crate::sourcemodel::PgdlConfig {
                finetune: TrainConfig { epochs: s.finetune_epochs, ..self.cfg.pgdl.finetune.clone() },
                ..self.cfg.pgdl.clone()
            };
            let cfg = Exp2Config {
                profile_counts: s.profile_counts.clone(),
                draws: s.draws,
                test_fraction: s.test_fraction,
                pgdl,
                seed: stage_seed(&self.cfg, "exp2"),
            };
            let report = experiment2(&chosen, &self.load_normalizer()?, &cfg)?;
            let exp1_medians = self.exp1_reference()?;
            let files = ["reports/exp2_treatments.csv", "reports/exp2_draws.csv", EXP2_SUMMARY];
            write_exp2_treatments(&self.path(files[0]), &report)?;
            write_exp2_draws(&self.path(files[1]), &report)?;
            write_json(
                &self.path(EXP2_SUMMARY),
                &Exp2Document {
                    config_hash: self.hash.clone(),
                    lakes: report.lakes.clone(),
                    treatments: report.treatments.clone(),
                    excluded: report.excluded.clone(),
                    exp1_medians,
                },
            )?;
            self.record(Stage::Exp2, &files, &[TARGETS_DIR, PB0_DIR, MODELS_DIR])?;
            Ok(report)
        })
    }

    /// PGDL-MTL and ensemble medians of a matching Experiment 1 run.
    fn exp1_reference(&self) -> Result<Vec<(String, f64)>> {
        let p = self.path(EXP1_SUMMARY);
        if !p.exists() || self.require(&[EXP1_SUMMARY]).is_err() {
            return Ok(Vec::new());
        }
        let doc: Exp1Document = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        Ok(doc
            .summary
            .methods
            .iter()
            .filter(|m| m.method.starts_with("PGDL"))
            .filter_map(|m| m.rmse.map(|q| (m.method.clone(), q.median)))
            .collect())
    }

    /// PGDL-MTL on a larger synthetic target population.
    pub fn expand(&self) -> Result<Exp1Report> {
        if self.cfg.input.is_some() {
            return Err(MtlError::Config("expand needs the synthetic world; no expansion population for ingested data".into()));
        }
        self.require(&[SOURCES_DIR, PB0_DIR, MODELS_DIR, META_DIR])?;
        self.in_pool(|| {
            let mut bundles = synth_bundles(&self.cfg, Role::Expand, self.cfg.sizes.expand_targets)?;
            export_bundles(&self.reset_dir(EXPAND_DIR)?, &bundles)?;
            self.reset_dir(EXPAND_FIELDS_DIR)?;
            self.simulate_into(&mut bundles, EXPAND_FIELDS_DIR)?;
            use rayon::prelude::*;
            let targets = bundles
                .into_par_iter()
                .filter(|b| !b.observations.is_empty())
                .map(LakeEntry::new)
                .collect::<Result<Vec<_>>>()?;
            let sources = self.load_sources()?;
            let pgdl = self.load_metamodel(SourceKind::Pgdl)?;
            let report = experiment1(&sources, &targets, None, Some(&pgdl), &self.catalog, &self.exp1_config("expand")?)?;
            write_exp1_targets(&self.path("reports/expand_targets.csv"), &report)?;
            write_method_summary(&self.path("reports/expand_methods.csv"), &report)?;
            write_json(&self.path(EXPAND_SUMMARY), &Exp1Document { config_hash: self.hash.clone(), summary: report.summary() })?;
            self.record(
                Stage::Expand,
                &[EXPAND_DIR, EXPAND_FIELDS_DIR, "reports/expand_targets.csv", "reports/expand_methods.csv", EXPAND_SUMMARY],
                &[SOURCES_DIR, PB0_DIR, MODELS_DIR, META_DIR],
            )?;
            Ok(report)
        })
    }

    /// Combine the experiment summaries into one document and a long-format
    /// CSV. Refuses inputs produced under different configs.
    pub fn report(&self) -> Result<ReportDocument> {
        let manifest = self.manifest()?;
        let inputs: Vec<&str> = [EXP1_SUMMARY, EXP2_SUMMARY, EXPAND_SUMMARY, META_DIR]
            .into_iter()
            .filter(|a| manifest.get(a).is_some())
            .collect();
        let hash = manifest.common_hash(&inputs)?;
        let read = |rel: &str| -> Result<Option<String>> {
            if inputs.contains(&rel) {
                Ok(Some(std::fs::read_to_string(self.path(rel))?))
            } else {
                Ok(None)
            }
        };
        let exp1 = read(EXP1_SUMMARY)?.map(|t| serde_json::from_str::<Exp1Document>(&t)).transpose()?;
        let exp2 = read(EXP2_SUMMARY)?.map(|t| serde_json::from_str::<Exp2Document>(&t)).transpose()?;
        let expand = read(EXPAND_SUMMARY)?.map(|t| serde_json::from_str::<Exp1Document>(&t)).transpose()?;
        for doc_hash in [exp1.as_ref().map(|d| &d.config_hash), exp2.as_ref().map(|d| &d.config_hash), expand.as_ref().map(|d| &d.config_hash)]
            .into_iter()
            .flatten()
        {
            if *doc_hash != hash {
                return Err(MtlError::Config(format!("mixed config hashes among inputs: {hash}, {doc_hash}")));
            }
        }
        let ensemble = if inputs.contains(&META_DIR) { Some(self.ensemble_choice()?) } else { None };
        let doc = ReportDocument {
            config_hash: hash,
            seed: manifest.get(inputs[0]).map(|e| e.seed).unwrap_or(self.cfg.seed),
            exp1: exp1.map(|d| d.summary),
            exp2,
            expand: expand.map(|d| d.summary),
            ensemble,
        };
        write_json(&self.path(REPORT_JSON), &doc)?;
        write_report_csv(&self.path("reports/report.csv"), &doc)?;
        let mut m = manifest;
        m.record(ManifestEntry {
            artifact: REPORT_JSON.into(),
            stage: Stage::Report.name().into(),
            config_hash: doc.config_hash.clone(),
            seed: doc.seed,
            sha256: content_hash(&self.path(REPORT_JSON))?,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        });
        m.record(ManifestEntry {
            artifact: "reports/report.csv".into(),
            stage: Stage::Report.name().into(),
            config_hash: doc.config_hash.clone(),
            seed: doc.seed,
            sha256: content_hash(&self.path("reports/report.csv"))?,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        });
        m.save(&self.root)?;
        Ok(doc)
    }
}

const EXPAND_FIELDS_DIR: &str = "fields/expand/";

/// Long format: experiment, method, quartiles.
fn write_report_csv(path: &Path, doc: &ReportDocument) -> Result<()> {
    use super::io::{fmt_f64, writer};
    let mut w = writer(path)?;
    w.write_record(["experiment", "method", "q1_rmse", "median_rmse", "q3_rmse", "n"])?;
    let mut row = |exp: &str, method: String, q: Option<crate::mtl::Quartiles>| -> Result<()> {
        let cells = match q {
            Some(q) => [fmt_f64(q.lower), fmt_f64(q.median), fmt_f64(q.upper), q.n.to_string()],
            None => [String::new(), String::new(), String::new(), "0".into()],
        };
        let mut rec = vec![exp.to_string(), method];
        rec.extend(cells);
        w.write_record(&rec)?;
        Ok(())
    };
    if let Some(s) = &doc.exp1 {
        for m in &s.methods {
            row("exp1", m.method.clone(), m.rmse)?;
        }
    }
    if let Some(e) = &doc.exp2 {
        for t in &e.treatments {
            row("exp2", format!("PGDL-{}-profiles", t.profiles), t.rmse)?;
        }
    }
    if let Some(s) = &doc.expand {
        for m in &s.methods {
            row("expand", m.method.clone(), m.rmse)?;
        }
    }
    w.flush()?;
    Ok(())
}
