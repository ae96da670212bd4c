//! All-pairs transfer matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{transfer_points, EvalPoints};
use crate::error::{MtlError, Result};
use crate::gbm::Matrix;
use crate::metafeatures::{pair_features, FeatureCatalog, FeatureRow, FeatureTable, LakeBundle, LakeProfile};
use crate::sourcemodel::{SourceKind, SourceModel};

/// A lake prepared for evaluation: data, cached profile, and observation points.
#[derive(Debug, Clone)]
pub struct LakeEntry {
    pub bundle: LakeBundle,
    pub profile: LakeProfile,
    /// `None` for lakes without observations
    pub points: Option<EvalPoints>,
}

impl LakeEntry {
    pub fn new(bundle: LakeBundle) -> Result<Self> {
        let profile = LakeProfile::of(&bundle)?;
        let points = if bundle.observations.is_empty() { None } else { Some(EvalPoints::new(&bundle)?) };
        Ok(LakeEntry { bundle, profile, points })
    }

    pub fn id(&self) -> &str {
        self.bundle.attributes.lake_id.as_str()
    }

    pub fn points(&self) -> Result<&EvalPoints> {
        self.points
            .as_ref()
            .ok_or_else(|| MtlError::NoData(format!("lake {} has no observations", self.id())))
    }
}

/// A monitored lake with its trained models.
#[derive(Debug, Clone)]
pub struct SourceLake {
    pub entry: LakeEntry,
    pub pb: Option<SourceModel>,
    pub pgdl: Option<SourceModel>,
}

impl SourceLake {
    pub fn id(&self) -> &str {
        self.entry.id()
    }

    pub fn model(&self, family: SourceKind) -> Result<&SourceModel> {
        match family {
            SourceKind::Pb => self.pb.as_ref(),
            SourceKind::Pgdl => self.pgdl.as_ref(),
        }
        .ok_or_else(|| MtlError::IncompleteSources(format!("lake {} has no {} model", self.id(), family.label())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub source_id: String,
    pub target_id: String,
    pub features: Vec<f64>,
    pub rmse: Option<f64>,
    pub predicted_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub family: SourceKind,
    pub catalog_version: String,
    pub feature_names: Vec<String>,
    /// ordered by (source_id, target_id)
    pub records: Vec<TransferRecord>,
}

impl TransferMatrix {
    /// Distinct lake ids appearing as sources, ascending.
    pub fn source_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.source_id.clone()).collect();
        ids.dedup();
        ids
    }

    /// Exactly n(n-1) ordered records, no self-pairs, every rmse realized.
    pub fn validate(&self) -> Result<()> {
        let ids = self.source_ids();
        let n = ids.len();
        if self.records.len() != n * n.saturating_sub(1) {
            return Err(MtlError::IncompleteSources(format!(
                "{} records for {n} sources; expected {}",
                self.records.len(),
                n * n.saturating_sub(1)
            )));
        }
        if self.records.iter().any(|r| r.source_id == r.target_id) {
            return Err(MtlError::Data("transfer matrix contains a self-pair".into()));
        }
        if !self.records.windows(2).all(|w| (&w[0].source_id, &w[0].target_id) < (&w[1].source_id, &w[1].target_id)) {
            return Err(MtlError::Data("transfer matrix records are not in (source, target) order".into()));
        }
        if let Some(r) = self.records.iter().find(|r| !r.rmse.is_some_and(|v| v >= 0.0 && v.is_finite())) {
            return Err(MtlError::Data(format!("pair {} -> {} has no realized rmse", r.source_id, r.target_id)));
        }
        Ok(())
    }

    /// Feature matrix and realized rmse, restricted to records passing `keep`.
    pub fn design(&self, keep: impl Fn(&TransferRecord) -> bool) -> Result<(Matrix, Vec<f64>)> {
        let rows: Vec<&TransferRecord> = self.records.iter().filter(|r| keep(r)).collect();
        let mut data = Vec::with_capacity(rows.len() * self.feature_names.len());
        let mut y = Vec::with_capacity(rows.len());
        for r in rows {
            data.extend_from_slice(&r.features);
            y.push(r.rmse.ok_or_else(|| MtlError::Data("unrealized rmse in training matrix".into()))?);
        }
        Ok((Matrix::new(y.len(), self.feature_names.len(), data)?, y))
    }

    pub fn to_table(&self) -> FeatureTable {
        FeatureTable {
            feature_names: self.feature_names.clone(),
            rows: self
                .records
                .iter()
                .map(|r| FeatureRow {
                    source_id: r.source_id.clone(),
                    target_id: r.target_id.clone(),
                    values: r.features.clone(),
                    rmse: r.rmse,
                })
                .collect(),
        }
    }

    pub fn from_table(family: SourceKind, catalog: &FeatureCatalog, table: FeatureTable) -> Result<Self> {
        let expected: Vec<String> = catalog.names().into_iter().map(str::to_string).collect();
        if table.feature_names != expected {
            return Err(MtlError::Schema {
                file: "transfer matrix".into(),
                detail: format!("feature columns do not match catalog {}", catalog.version),
            });
        }
        let mut records: Vec<TransferRecord> = table
            .rows
            .into_iter()
            .map(|r| TransferRecord {
                source_id: r.source_id,
                target_id: r.target_id,
                features: r.values,
                rmse: r.rmse,
                predicted_rmse: None,
            })
            .collect();
        records.sort_by(|a, b| (&a.source_id, &a.target_id).cmp(&(&b.source_id, &b.target_id)));
        let m = TransferMatrix {
            family,
            catalog_version: catalog.version.clone(),
            feature_names: table.feature_names,
            records,
        };
        m.validate()?;
        Ok(m)
    }
}

/// Apply each source's model to every other source lake, score it against
/// that lake's observations, and compute the pair's meta-features.
pub fn build_transfer_matrix(
    sources: &[SourceLake],
    family: SourceKind,
    catalog: &FeatureCatalog,
) -> Result<TransferMatrix> {
    let mut order: Vec<&SourceLake> = sources.iter().collect();
    order.sort_by(|a, b| a.id().cmp(b.id()));
    if order.windows(2).any(|w| w[0].id() == w[1].id()) {
        return Err(MtlError::Data("duplicate source lake id".into()));
    }
    for s in &order {
        s.model(family)?;
        s.entry.points()?;
    }
    let pairs: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|i| (0..order.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let records = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (s, t) = (order[i], order[j]);
            let points = t.entry.points()?;
            let pred = transfer_points(s.model(family)?, &t.entry.bundle, points)?;
            Ok(TransferRecord {
                source_id: s.id().to_string(),
                target_id: t.id().to_string(),
                features: pair_features(&s.entry.profile, &t.entry.profile, catalog)?,
                rmse: Some(points.rmse(&pred)),
                predicted_rmse: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMatrix {
        family,
        catalog_version: catalog.version.clone(),
        feature_names: catalog.names().into_iter().map(str::to_string).collect(),
        records,
    })
}
