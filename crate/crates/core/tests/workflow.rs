//! End-to-end behaviour of the transfer workflow on a small synthetic world.

use std::sync::OnceLock;

use lakemtl::gbm::FitConfig;
use lakemtl::metafeatures::FeatureCatalog;
use lakemtl::mtl::*;
use lakemtl::pipeline::{attach_pb0, source_normalizer, synth_bundles, train_sources, Role, RunConfig};
use lakemtl::sourcemodel::SourceKind;
use lakemtl::MtlError;

struct World {
    sources: Vec<SourceLake>,
    targets: Vec<LakeEntry>,
}

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::desk(21);
    cfg.pgdl.hidden = 4;
    cfg.pgdl.pretrain.epochs = 2;
    cfg.pgdl.finetune.epochs = 2;
    cfg.calibration.max_iterations = 15;
    cfg
}

fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| {
        let cfg = small_config();
        let mut src = synth_bundles(&cfg, Role::Source, 10).unwrap();
        attach_pb0(&mut src).unwrap();
        let norm = source_normalizer(&src).unwrap();
        let sources = train_sources(&src, &norm, &cfg).unwrap().into_iter().map(|(s, _)| s).collect();
        let mut tgt = synth_bundles(&cfg, Role::Target, 4).unwrap();
        attach_pb0(&mut tgt).unwrap();
        let targets = tgt.into_iter().map(|b| LakeEntry::new(b).unwrap()).collect();
        World { sources, targets }
    })
}

fn quick_meta() -> MetamodelConfig {
    MetamodelConfig {
        fit: FitConfig { n_estimators: 30, learning_rate: 0.1, max_depth: 2, min_samples_leaf: 3, seed: 0 },
        tuning: None,
        rfecv: None,
    }
}

#[test]
fn matrix_has_every_ordered_pair_once() {
    let w = world();
    let five = &w.sources[..5];
    let m = build_transfer_matrix(five, SourceKind::Pb, &FeatureCatalog::default()).unwrap();
    assert_eq!(m.records.len(), 20);
    assert_eq!(pair_count(5), 20);
    assert_eq!(pair_count(145), 20880);
    assert!(m.records.iter().all(|r| r.source_id != r.target_id));
    let mut keys: Vec<(&str, &str)> = m.records.iter().map(|r| (r.source_id.as_str(), r.target_id.as_str())).collect();
    keys.dedup();
    assert_eq!(keys.len(), 20);
}

#[test]
fn missing_model_is_reported() {
    let w = world();
    let mut broken: Vec<SourceLake> = w.sources[..3].to_vec();
    broken[1].pgdl = None;
    let err = build_transfer_matrix(&broken, SourceKind::Pgdl, &FeatureCatalog::default()).unwrap_err();
    assert!(matches!(err, MtlError::IncompleteSources(_)), "{err}");
}

#[test]
fn matrix_table_round_trip() {
    let w = world();
    let cat = FeatureCatalog::default();
    let m = build_transfer_matrix(&w.sources[..4], SourceKind::Pb, &cat).unwrap();
    let mut buf = Vec::new();
    lakemtl::metafeatures::write_feature_table(&m.to_table(), &mut buf).unwrap();
    let back = lakemtl::metafeatures::read_feature_table(buf.as_slice()).unwrap();
    assert_eq!(TransferMatrix::from_table(SourceKind::Pb, &cat, back).unwrap(), m);
}

#[test]
fn oracle_scores_select_the_best_source() {
    let w = world();
    let m = build_transfer_matrix(&w.sources, SourceKind::Pb, &FeatureCatalog::default()).unwrap();
    for target in m.source_ids() {
        let scores: Vec<(String, f64)> = m
            .records
            .iter()
            .filter(|r| r.target_id == target)
            .map(|r| (r.source_id.clone(), r.rmse.unwrap()))
            .collect();
        let best = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        let ranked = rank_by_score(&target, scores);
        assert_eq!(ranked.sources[0].predicted_rmse, best);
        let mut ranks: Vec<usize> = ranked.sources.iter().map(|s| s.rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (1..=9).collect::<Vec<_>>());
    }
}

#[test]
fn metamodel_is_deterministic_and_fits() {
    let w = world();
    let m = build_transfer_matrix(&w.sources, SourceKind::Pb, &FeatureCatalog::default()).unwrap();
    let a = train_metamodel(&m, &quick_meta()).unwrap();
    let b = train_metamodel(&m, &quick_meta()).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(Metamodel::from_text(&a.to_text()).unwrap().to_text(), a.to_text());
    let (_, y) = m.design(|_| true).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    let mse = m.records.iter().map(|r| (a.predict(&r.features).unwrap() - r.rmse.unwrap()).powi(2)).sum::<f64>()
        / y.len() as f64;
    assert!(mse <= var, "training mse {mse} above variance {var}");
}

#[test]
fn held_out_lake_gets_finite_predictions() {
    let w = world();
    let m = build_transfer_matrix(&w.sources, SourceKind::Pb, &FeatureCatalog::default()).unwrap();
    let full = train_metamodel(&m, &quick_meta()).unwrap();
    let held = w.sources[3].id().to_string();
    let mm = full.refit(&m, |r| r.source_id != held && r.target_id != held).unwrap();
    for r in m.records.iter().filter(|r| r.source_id == held || r.target_id == held) {
        assert!(mm.predict(&r.features).unwrap().is_finite());
    }
}

#[test]
fn ensemble_size_search() {
    let w = world();
    let cat = FeatureCatalog::default();
    let m = build_transfer_matrix(&w.sources, SourceKind::Pb, &cat).unwrap();
    let meta = train_metamodel(&m, &quick_meta()).unwrap();
    let only3 = EnsembleSizeConfig { candidates: vec![3], holdout: 5, seed: 1 };
    assert_eq!(tune_ensemble_size(&w.sources, &m, &meta, &cat, &only3).unwrap().best, 3);
    let res = tune_ensemble_size(&w.sources, &m, &meta, &cat, &EnsembleSizeConfig::default()).unwrap();
    let min = res.table.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let first_min = res.table.iter().find(|r| r.1 == min).unwrap().0;
    assert_eq!(res.best, first_min);
    assert_eq!(res.folds, 2);
    let too_few = tune_ensemble_size(&w.sources[..9], &m, &meta, &cat, &only3).unwrap_err();
    assert!(matches!(too_few, MtlError::Config(_)));
}

#[test]
fn experiment1_rows_and_recomputed_diagnostics() {
    let w = world();
    let cat = FeatureCatalog::default();
    let pb = train_metamodel(&build_transfer_matrix(&w.sources, SourceKind::Pb, &cat).unwrap(), &quick_meta()).unwrap();
    let pg = train_metamodel(&build_transfer_matrix(&w.sources, SourceKind::Pgdl, &cat).unwrap(), &quick_meta()).unwrap();
    let cfg = Exp1Config { ensemble_size: 3, max_rank: 9, random_draws: 20, seed: 4 };
    let rep = experiment1(&w.sources, &w.targets, Some(&pb), Some(&pg), &cat, &cfg).unwrap();
    assert_eq!(rep.rows.len(), w.targets.len());
    let again = experiment1(&w.sources, &w.targets, Some(&pb), Some(&pg), &cat, &cfg).unwrap();
    assert_eq!(rep, again);
    for row in &rep.rows {
        for (fam, res) in [(SourceKind::Pb, row.pb.as_ref().unwrap()), (SourceKind::Pgdl, row.pgdl.as_ref().unwrap())] {
            let pairs: Vec<&PairResult> =
                rep.pairs.iter().filter(|p| p.target_id == row.target_id && p.family == fam).collect();
            assert_eq!(pairs.len(), w.sources.len());
            // independent recomputation from the persisted pairs
            let sq: f64 = pairs.iter().map(|p| (p.predicted_rmse - p.realized_rmse).powi(2)).sum();
            let meta_rmse = (sq / pairs.len() as f64).sqrt();
            assert!((meta_rmse - res.meta_rmse).abs() < 1e-9);
            let pred: Vec<f64> = pairs.iter().map(|p| p.predicted_rmse).collect();
            let real: Vec<f64> = pairs.iter().map(|p| p.realized_rmse).collect();
            if let Some(rs) = res.spearman {
                assert!((spearman(&pred, &real).unwrap() - rs).abs() < 1e-12);
            }
            let top = pairs.iter().find(|p| p.rank == 1).unwrap();
            assert_eq!(top.source_id, res.top_source);
            assert_eq!(top.realized_rmse, res.mtl_rmse);
            assert!(pairs.iter().all(|p| p.predicted_rmse >= top.predicted_rmse));
            assert_eq!(res.rank_rmse.len(), 9);
        }
    }
    let summary = rep.summary();
    assert_eq!(summary.n_targets, w.targets.len());
    assert!(summary.reference_medians.iter().any(|(m, v)| m == "PGDL-MTL-ensemble" && *v == 1.88));
}

#[test]
fn experiment2_uses_the_treatment_grid() {
    let w = world();
    let cfg = small_config();
    let norm = source_normalizer(&w.sources.iter().map(|s| s.entry.bundle.clone()).collect::<Vec<_>>()).unwrap();
    let e2 = Exp2Config {
        profile_counts: vec![1, 5, 1000],
        draws: 2,
        test_fraction: 1.0 / 3.0,
        pgdl: cfg.pgdl.clone(),
        seed: 9,
    };
    let rep = experiment2(&w.targets[..2], &norm, &e2).unwrap();
    assert_eq!(rep.treatments.len(), 3);
    assert_eq!(rep.draws.len(), 2 * 2 * 2);
    assert_eq!(rep.excluded.len(), 2);
    assert!(rep.median_at(1000).is_none());
    assert!(rep.median_at(1).is_some());
    assert_eq!(experiment2(&w.targets[..2], &norm, &e2).unwrap(), rep);
}
