//! The metamodel: boosted trees mapping pair meta-features to transfer RMSE.

use serde::{Deserialize, Serialize};

use super::matrix::{TransferMatrix, TransferRecord};
use crate::error::{MtlError, Result};
use crate::gbm::{fit, rfecv, tune, FitConfig, GbmEnsemble, RfecvConfig, RfecvResult, TuneResult, TuningGrid};
use crate::metafeatures::{pair_features, FeatureCatalog, LakeProfile};
use crate::sourcemodel::SourceKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetamodelConfig {
    /// final model settings when no tuning grid is given
    pub fit: FitConfig,
    /// absent in a config file means no tuning
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rfecv: Option<RfecvConfig>,
}

impl Default for MetamodelConfig {
    fn default() -> Self {
        MetamodelConfig {
            fit: FitConfig::default(),
            tuning: Some(TuningGrid::desk()),
            rfecv: Some(RfecvConfig::default()),
        }
    }
}

impl MetamodelConfig {
    /// Learning rate 0.05 with 4500 (PB) or 4900 (PGDL) trees, after RFECV
    /// with 3000 trees and 24 folds.
    pub fn paper(family: SourceKind) -> Self {
        let n_estimators = match family {
            SourceKind::Pb => 4500,
            SourceKind::Pgdl => 4900,
        };
        MetamodelConfig {
            fit: FitConfig { n_estimators, learning_rate: 0.05, ..FitConfig::default() },
            tuning: None,
            rfecv: Some(RfecvConfig::paper()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metamodel {
    pub family: SourceKind,
    pub catalog_version: String,
    pub feature_names: Vec<String>,
    /// catalog columns the ensemble reads, ascending
    pub selected: Vec<usize>,
    pub fit_config: FitConfig,
    pub ensemble: GbmEnsemble,
    pub tuning: Option<TuneResult>,
    pub selection: Option<RfecvResult>,
}

/// Feature selection, hyperparameter search, then a final fit on every pair.
pub fn train_metamodel(matrix: &TransferMatrix, config: &MetamodelConfig) -> Result<Metamodel> {
    matrix.validate()?;
    let (x, y) = matrix.design(|_| true)?;
    let selection = config.rfecv.as_ref().map(|c| rfecv(&x, &y, c)).transpose()?;
    let selected = selection.as_ref().map_or_else(|| (0..x.cols()).collect(), |s| s.selected.clone());
    let xs = x.select_cols(&selected);
    let tuning = config.tuning.as_ref().map(|g| tune(&xs, &y, g)).transpose()?;
    let fit_config = tuning.as_ref().map_or_else(|| config.fit.clone(), |t| t.best.clone());
    let ensemble = fit(&xs, &y, &fit_config)?.with_catalog(&matrix.catalog_version);
    Ok(Metamodel {
        family: matrix.family,
        catalog_version: matrix.catalog_version.clone(),
        feature_names: matrix.feature_names.clone(),
        selected,
        fit_config,
        ensemble,
        tuning,
        selection,
    })
}

impl Metamodel {
    /// Same features and settings, refit on the records passing `keep`.
    pub fn refit(&self, matrix: &TransferMatrix, keep: impl Fn(&TransferRecord) -> bool) -> Result<Metamodel> {
        let (x, y) = matrix.design(keep)?;
        let ensemble = fit(&x.select_cols(&self.selected), &y, &self.fit_config)?.with_catalog(&self.catalog_version);
        Ok(Metamodel { ensemble, tuning: None, selection: None, ..self.clone() })
    }

    /// Predicted transfer RMSE from a full catalog feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_names.len() {
            return Err(MtlError::Shape { expected: self.feature_names.len(), got: features.len() });
        }
        let x: Vec<f64> = self.selected.iter().map(|&i| features[i]).collect();
        self.ensemble.predict(&x)
    }

    pub fn selected_names(&self) -> Vec<&str> {
        self.selected.iter().map(|&i| self.feature_names[i].as_str()).collect()
    }

    /// Importance of each selected feature, by name.
    pub fn importances(&self) -> Vec<(String, f64)> {
        let w = self.ensemble.feature_importance().weights;
        self.selected.iter().zip(w).map(|(&i, w)| (self.feature_names[i].clone(), w)).collect()
    }

    /// Header lines naming the family, catalog, and selected columns,
    /// followed by the ensemble's own text form.
    pub fn to_text(&self) -> String {
        let sel: Vec<String> = self.selected.iter().map(|i| i.to_string()).collect();
        format!(
            "metamodel v1\nfamily {}\nfeatures {}\nselected {}\nfit {}\n{}",
            self.family.label().to_lowercase(),
            self.feature_names.join(","),
            sel.join(","),
            serde_json::to_string(&self.fit_config).unwrap_or_default(),
            self.ensemble.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parts = text.splitn(6, '\n');
        let mut line = |key: &str| -> Result<String> {
            let l = parts.next().ok_or_else(|| MtlError::Parse(format!("metamodel text ended before {key}")))?;
            l.strip_prefix(key)
                .map(|s| s.trim_start().to_string())
                .ok_or_else(|| MtlError::Parse(format!("expected {key}, found {l:?}")))
        };
        line("metamodel v1")?;
        let family: SourceKind = line("family")?.parse()?;
        let features = line("features")?;
        let selected = line("selected")?;
        let fit_config: FitConfig = serde_json::from_str(&line("fit")?)?;
        let rest = parts.next().ok_or_else(|| MtlError::Parse("metamodel text has no ensemble".into()))?;
        let ensemble = GbmEnsemble::from_text(rest)?;
        let feature_names: Vec<String> = features.split(',').map(str::to_string).collect();
        let selected = selected
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| MtlError::Parse(format!("bad column {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if selected.len() != ensemble.n_features || selected.iter().any(|&i| i >= feature_names.len()) {
            return Err(MtlError::Parse("selected columns do not match the ensemble".into()));
        }
        Ok(Metamodel {
            family,
            catalog_version: ensemble.catalog_version.clone(),
            feature_names,
            selected,
            fit_config,
            ensemble,
            tuning: None,
            selection: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSource {
    pub source_id: String,
    pub predicted_rmse: f64,
    /// 1-based
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSources {
    pub target_id: String,
    /// ascending predicted rmse; ties by source id
    pub sources: Vec<RankedSource>,
}

impl RankedSources {
    pub fn top(&self, n: usize) -> impl Iterator<Item = &RankedSource> {
        self.sources.iter().take(n)
    }

    pub fn predicted_for(&self, source_id: &str) -> Option<f64> {
        self.sources.iter().find(|s| s.source_id == source_id).map(|s| s.predicted_rmse)
    }
}

/// Order `scores` (source id, predicted rmse) ascending with id tie-breaks.
pub fn rank_by_score(target_id: &str, mut scores: Vec<(String, f64)>) -> RankedSources {
    scores.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    RankedSources {
        target_id: target_id.to_string(),
        sources: scores
            .into_iter()
            .enumerate()
            .map(|(i, (source_id, predicted_rmse))| RankedSource { source_id, predicted_rmse, rank: i + 1 })
            .collect(),
    }
}

/// Predict every source's transfer RMSE on `target` and rank them. The
/// target's observations are not used.
pub fn rank_sources(
    metamodel: &Metamodel,
    target: &LakeProfile,
    sources: &[&LakeProfile],
    catalog: &FeatureCatalog,
) -> Result<RankedSources> {
    if catalog.version != metamodel.catalog_version {
        return Err(MtlError::Config(format!(
            "metamodel uses catalog {}, not {}",
            metamodel.catalog_version, catalog.version
        )));
    }
    let scores = sources
        .iter()
        .filter(|s| s.lake_id != target.lake_id)
        .map(|s| {
            let x = pair_features(s, target, catalog)?;
            Ok((s.lake_id.clone(), metamodel.predict(&x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_score(&target.lake_id, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_ties_break_by_id() {
        let r = rank_by_score("t", vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 0.5)]);
        let ids: Vec<&str> = r.sources.iter().map(|s| s.source_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(r.sources.iter().map(|s| s.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn paper_defaults() {
        let pb = MetamodelConfig::paper(SourceKind::Pb);
        let pg = MetamodelConfig::paper(SourceKind::Pgdl);
        assert_eq!((pb.fit.learning_rate, pb.fit.n_estimators), (0.05, 4500));
        assert_eq!((pg.fit.learning_rate, pg.fit.n_estimators), (0.05, 4900));
        let r = pb.rfecv.unwrap();
        assert_eq!((r.fit.n_estimators, r.folds), (3000, 24));
    }
}
