//! Plot-ready CSV and JSON report writers. Rows are emitted in canonical
//! key order and floats in shortest round-trip form, so identical results
//! give identical bytes.

use std::path::Path;

use serde::Serialize;

use super::io::{fmt_f64, fmt_opt, writer};
use super::world::SourceFit;
use crate::error::Result;
use crate::metafeatures::FeatureCatalog;
use crate::mtl::{EnsembleSizeResult, Exp1Report, Exp2Report, Metamodel, Quartiles, RankedSources};

pub const EXP1_TARGET_HEADER: [&str; 20] = [
    "target_id",
    "max_depth_m",
    "n_obs",
    "pb0_rmse",
    "pb_mtl_rmse",
    "pb_top_source",
    "pb_ensemble_rmse",
    "pb_spearman",
    "pb_meta_rmse",
    "pb_random_median_rmse",
    "pb_best_rmse",
    "pgdl_mtl_rmse",
    "pgdl_top_source",
    "pgdl_ensemble_rmse",
    "pgdl_spearman",
    "pgdl_meta_rmse",
    "pgdl_random_median_rmse",
    "pgdl_best_rmse",
    "pb0_deep_rmse",
    "pgdl_ensemble_deep_rmse",
];

/// One row per target (the per-target table behind the method comparison).
pub fn write_exp1_targets(path: &Path, report: &Exp1Report) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EXP1_TARGET_HEADER)?;
    for r in &report.rows {
        let mut rec = vec![r.target_id.clone(), fmt_f64(r.max_depth), r.n_obs.to_string(), fmt_f64(r.pb0_rmse)];
        match &r.pb {
            Some(f) => rec.extend([
                fmt_f64(f.mtl_rmse),
                f.top_source.clone(),
                fmt_f64(f.ensemble_rmse),
                fmt_opt(f.spearman),
                fmt_f64(f.meta_rmse),
                fmt_f64(f.random_median),
                fmt_f64(f.best_rmse),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 7)),
        }
        match &r.pgdl {
            Some(f) => rec.extend([
                fmt_f64(f.mtl_rmse),
                f.top_source.clone(),
                fmt_f64(f.ensemble_rmse),
                fmt_opt(f.spearman),
                fmt_f64(f.meta_rmse),
                fmt_f64(f.random_median),
                fmt_f64(f.best_rmse),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 7)),
        }
        rec.push(fmt_opt(r.pb0_deep_rmse));
        rec.push(fmt_opt(r.pgdl.as_ref().and_then(|f| f.ensemble_deep_rmse)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: realized rmse of the source at each predicted rank.
pub fn write_exp1_ranks(path: &Path, report: &Exp1Report) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["target_id", "family", "rank", "rmse"])?;
    for r in &report.rows {
        for (fam, res) in [("PB", &r.pb), ("PGDL", &r.pgdl)] {
            if let Some(f) = res {
                for (k, v) in f.rank_rmse.iter().enumerate() {
                    w.write_record([r.target_id.clone(), fam.to_string(), (k + 1).to_string(), fmt_f64(*v)])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Every (target, source) pair with predicted and realized rmse.
pub fn write_exp1_pairs(path: &Path, report: &Exp1Report) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["target_id", "family", "source_id", "rank", "predicted_rmse", "realized_rmse"])?;
    for p in &report.pairs {
        w.write_record([
            p.target_id.clone(),
            p.family.label().to_string(),
            p.source_id.clone(),
            p.rank.to_string(),
            fmt_f64(p.predicted_rmse),
            fmt_f64(p.realized_rmse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn quartile_cells(q: Option<Quartiles>) -> [String; 4] {
    match q {
        Some(q) => [fmt_f64(q.lower), fmt_f64(q.median), fmt_f64(q.upper), q.n.to_string()],
        None => [String::new(), String::new(), String::new(), "0".into()],
    }
}

/// One row per method: quartiles across targets and wins over PB0.
pub fn write_method_summary(path: &Path, report: &Exp1Report) -> Result<()> {
    let summary = report.summary();
    let mut w = writer(path)?;
    w.write_record(["method", "q1_rmse", "median_rmse", "q3_rmse", "n_targets", "beats_pb0"])?;
    for m in &summary.methods {
        let mut rec = vec![m.method.clone()];
        rec.extend(quartile_cells(m.rmse));
        rec.push(m.beats_pb0.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exp2_treatments(path: &Path, report: &Exp2Report) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["profiles", "q1_rmse", "median_rmse", "q3_rmse", "n_lakes"])?;
    for t in &report.treatments {
        let mut rec = vec![t.profiles.to_string()];
        rec.extend(quartile_cells(t.rmse));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exp2_draws(path: &Path, report: &Exp2Report) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["lake_id", "profiles", "draw", "rmse"])?;
    let mut draws: Vec<_> = report.draws.iter().collect();
    draws.sort_by(|a, b| (&a.lake_id, a.profiles, a.draw).cmp(&(&b.lake_id, b.profiles, b.draw)));
    for d in draws {
        w.write_record([d.lake_id.clone(), d.profiles.to_string(), d.draw.to_string(), fmt_f64(d.rmse)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_source_fits(path: &Path, fits: &[SourceFit]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "lake_id",
        "pb0_rmse",
        "pb_rmse",
        "sw_factor",
        "momentum_coeff",
        "deep_mix_eff",
        "pgdl_pretrain_mse",
        "pgdl_finetune_mse",
    ])?;
    for f in fits {
        w.write_record([
            f.lake_id.clone(),
            fmt_f64(f.pb0_rmse),
            fmt_f64(f.pb_rmse),
            fmt_f64(f.params.sw_factor),
            fmt_f64(f.params.momentum_coeff),
            fmt_f64(f.params.deep_mix_eff),
            fmt_f64(f.pgdl_pretrain_mse),
            fmt_f64(f.pgdl_finetune_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Feature importances of the final metamodel, with display labels.
pub fn write_importances(path: &Path, meta: &Metamodel, catalog: &FeatureCatalog) -> Result<()> {
    let mut rows = meta.importances();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut w = writer(path)?;
    w.write_record(["feature", "label", "importance"])?;
    for (name, imp) in rows {
        let label = catalog.index_of(&name).map(|i| catalog.features[i].label.clone()).unwrap_or_default();
        w.write_record([name, label, fmt_f64(imp)])?;
    }
    w.flush()?;
    Ok(())
}

/// Cross-validated error by number of retained features.
pub fn write_rfecv_curve(path: &Path, meta: &Metamodel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n_features", "cv_mse", "eliminated"])?;
    if let Some(sel) = &meta.selection {
        for (i, (n, score)) in sel.curve.iter().enumerate() {
            let gone = sel.eliminated.get(i).map(|&j| meta.feature_names[j].clone()).unwrap_or_default();
            w.write_record([n.to_string(), fmt_f64(*score), gone])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ensemble_sizes(path: &Path, result: &EnsembleSizeResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "mean_rmse", "selected"])?;
    for (n, v) in &result.table {
        w.write_record([n.to_string(), fmt_f64(*v), (*n == result.best).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ranking(path: &Path, ranked: &RankedSources) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["target_id", "rank", "source_id", "predicted_rmse"])?;
    for s in &ranked.sources {
        w.write_record([ranked.target_id.clone(), s.rank.to_string(), s.source_id.clone(), fmt_f64(s.predicted_rmse)])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
