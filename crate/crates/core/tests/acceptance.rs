//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 2 3`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use lakemtl::gbm::{fit, rfecv, FitConfig, Matrix, Node, RfecvConfig};
use lakemtl::lakesim::{calibrate, lake_truth, simulate, synth_drivers, LakeAttributes, Observation, ObservationSet, SimParams, TruthConfig};
use lakemtl::metafeatures::FeatureCatalog;
use lakemtl::mtl::{
    average_ranks, build_transfer_matrix, pair_count, penalty_ablation, rmse_values, spearman, Exp2Report, LakeEntry,
    SourceLake, PROFILE_COUNTS,
};
use lakemtl::pipeline::{attach_pb0, source_normalizer, synth_bundles, train_sources, Pipeline, Role, RunConfig};
use lakemtl::seed::rng_for;
use lakemtl::sourcemodel::{window_objective, SequenceRegressor, SourceKind, SourceModel, WindowProblem, N_DRIVERS};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut results: BTreeMap<u32, (String, Outcome, Duration, Duration)> = BTreeMap::new();
    let mut record = |n: u32, name: &str, limit_s: u64, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let took = t.elapsed();
        let out = match out {
            Ok(d) if took > Duration::from_secs(limit_s) => Err(format!("{d}; over the {limit_s} s budget")),
            other => other,
        };
        let line = line(n, name, &out, took);
        println!("{line}");
        results.insert(n, (name.to_string(), out, took, Duration::from_secs(limit_s)));
    };

    if run(1) {
        record(1, "gbm stump matches exhaustive search", 5, &mut gbm_oracle);
    }
    if run(2) {
        record(2, "metric closed forms", 1, &mut metric_exactness);
    }
    if run(3) {
        record(3, "sequence regressor gradients", 10, &mut gradient_check);
    }
    if run(4) {
        record(4, "transfer matrix cardinality", 120, &mut matrix_cardinality);
    }
    if run(9) {
        record(9, "calibration dominance", 300, &mut calibration_dominance);
    }
    if run(7) {
        record(7, "rfecv keeps max depth difference", 1200, &mut rfecv_recovery);
    }
    if run(8) {
        record(8, "physics penalty reduces inversions", 900, &mut penalty_effect);
    }
    if run(5) || run(6) || run(10) || run(11) {
        let dir = tempfile::tempdir().expect("temp dir");
        let a = dir.path().join("w8");
        let b = dir.path().join("w1");
        let cfg = desk_run_config();
        let t = Instant::now();
        let first = Pipeline::new(cfg.clone(), &a, 8).and_then(|p| p.run_all().map(|_| p));
        let run_time = t.elapsed();
        match first {
            Err(e) => {
                for (n, name) in [(5, "metamodel utility"), (6, "ensemble ordering"), (10, "sparsification trend"), (11, "determinism")] {
                    if run(n) {
                        record(n, name, u64::MAX, &mut || Err(format!("pipeline failed: {e}")));
                    }
                }
            }
            Ok(p) => {
                let doc = read_exp1(&a);
                if run(5) {
                    record(5, "metamodel utility", 1800, &mut || {
                        metamodel_utility(&doc).map(|d| format!("{d}; pipeline {:.0} s", run_time.as_secs_f64()))
                    });
                }
                if run(6) {
                    record(6, "ensemble ordering", 1800, &mut || ensemble_ordering(&doc));
                }
                if run(11) {
                    record(11, "determinism across worker counts", 3600, &mut || {
                        Pipeline::new(cfg.clone(), &b, 1)
                            .and_then(|p| p.run_all())
                            .map_err(|e| format!("second run failed: {e}"))?;
                        compare_runs(&a, &b)
                    });
                }
                if run(10) {
                    record(10, "sparsification trend", 2700, &mut || {
                        let rep = p.exp2().map_err(|e| e.to_string())?;
                        sparsification(&rep)
                    });
                }
            }
        }
    }

    let failed: Vec<u32> = results.iter().filter(|(_, r)| r.1.is_err()).map(|(n, _)| *n).collect();
    println!("\nacceptance summary");
    for (n, (name, out, took, _)) in &results {
        println!("{}", line(*n, name, out, *took));
    }
    println!("{} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn line(n: u32, name: &str, out: &Outcome, took: Duration) -> String {
    let (tag, detail) = match out {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    format!("criterion {n:>2} {tag} [{:>7.1} s] {name}: {detail}", took.as_secs_f64())
}

// 1 ---------------------------------------------------------------------

/// Split with the smallest summed squared error over every feature and every
/// midpoint between consecutive distinct values.
fn stump_oracle(x: &[Vec<f64>], y: &[f64]) -> Option<(usize, f64, f64, f64)> {
    let sse = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|a| (a - m).powi(2)).sum::<f64>(), m)
    };
    let mut best: Option<(f64, usize, f64, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<f64> = (0..y.len()).filter(|&i| x[i][f] <= t).map(|i| y[i]).collect();
            let right: Vec<f64> = (0..y.len()).filter(|&i| x[i][f] > t).map(|i| y[i]).collect();
            let (sl, ml) = sse(&left);
            let (sr, mr) = sse(&right);
            if best.is_none_or(|b| sl + sr < b.0) {
                best = Some((sl + sr, f, t, ml, mr));
            }
        }
    }
    best.map(|b| (b.1, b.2, b.3, b.4))
}

fn gbm_oracle() -> Outcome {
    let cfg = FitConfig { n_estimators: 1, learning_rate: 1.0, max_depth: 1, min_samples_leaf: 1, seed: 0 };
    for case in 0..20u64 {
        let mut rng = rng_for(case, "acceptance-gbm", "");
        let rows = rng.random_range(4..=64);
        let cols = rng.random_range(1..=6);
        let x: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() * 3.0 + rng.random_range(-1.0..1.0)).collect();
        let model = fit(&Matrix::from_rows(&x).unwrap(), &y, &cfg).map_err(|e| e.to_string())?;
        let (f, t, ml, mr) = stump_oracle(&x, &y).ok_or("oracle found no split")?;
        let tree = &model.trees[0];
        let Node::Split { feature, threshold, left, right, .. } = &tree.nodes[0] else {
            return Err(format!("case {case}: root is a leaf"));
        };
        let leaf = |i: usize| match tree.nodes[i] {
            Node::Leaf { value } => model.base + value,
            _ => f64::NAN,
        };
        if *feature != f || *threshold != t {
            return Err(format!("case {case}: split ({feature}, {threshold}) vs oracle ({f}, {t})"));
        }
        if (leaf(*left) - ml).abs() > 1e-9 || (leaf(*right) - mr).abs() > 1e-9 {
            return Err(format!("case {case}: leaf values differ"));
        }
    }
    Ok("20 datasets agree on split and leaf values".into())
}

// 2 ---------------------------------------------------------------------

fn metric_exactness() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let up: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
    let rev: Vec<f64> = a.iter().rev().copied().collect();
    let r0 = rmse_values(&a, &a).map_err(|e| e.to_string())?;
    let r1 = rmse_values(&up, &a).map_err(|e| e.to_string())?;
    let s1 = spearman(&a, &up).map_err(|e| e.to_string())?;
    let sm1 = spearman(&a, &rev).map_err(|e| e.to_string())?;
    let s08 = spearman(&a, &[2.0, 1.0, 4.0, 3.0, 5.0]).map_err(|e| e.to_string())?;
    let ranks = average_ranks(&[30.0, 10.0, 20.0, 30.0, 20.0, 30.0]);
    // hand computation: 10 -> 1, the two 20s share 2 and 3, the three 30s share 4, 5 and 6
    let hand = [5.0, 1.0, 2.5, 5.0, 2.5, 5.0];
    let ranks_ok = ranks.iter().zip(hand).all(|(r, h)| close(*r, h));
    check(
        close(r0, 0.0) && close(r1, 1.0) && close(s1, 1.0) && close(sm1, -1.0) && close(s08, 0.8) && ranks_ok,
        format!("rmse {r0} / {r1}, spearman {s1} / {sm1} / {s08}, tied ranks {ranks:?}"),
    )
}

// 3 ---------------------------------------------------------------------

/// Toy with well-separated temperatures so density differences are large
/// enough for finite differences to resolve.
fn gradient_check() -> Outcome {
    let mut model = SequenceRegressor::new(4, 11);
    let n = model.param_count();
    for (i, v) in model.params_mut().iter_mut().enumerate() {
        *v = 0.9 * (i as f64 * 1.37).sin();
    }
    // widen the head so outputs spread over several degrees
    model.params_mut()[n - 5..n - 1].iter_mut().for_each(|v| *v *= 6.0);
    model.set_output_bias(14.0);
    let drivers: Vec<[f64; N_DRIVERS]> = (0..5)
        .map(|t| std::array::from_fn(|j| ((t * 7 + j * 3) as f64 * 0.37).sin()))
        .collect();
    let depths = [-1.2, -0.3, 0.4, 1.5];
    let targets: Vec<(usize, usize, f64)> = (0..4).flat_map(|d| (0..5).map(move |t| (d, t, 14.0 - 2.5 * d as f64 + 0.5 * t as f64))).collect();
    let mut worst = [0.0f64; 2];
    for (k, (tg, lambda)) in [(&targets[..], 0.0), (&[][..], 1.0)].into_iter().enumerate() {
        let p = WindowProblem { drivers: &drivers, depths: &depths, targets: tg, physics_lambda: lambda };
        let obj = window_objective(&model, &p);
        if lambda > 0.0 && obj.penalty <= 0.0 {
            return Err("toy window has no density inversions".into());
        }
        for i in 0..n {
            let central = |h: f64| {
                let mut a = model.clone();
                a.params_mut()[i] += h;
                let mut b = model.clone();
                b.params_mut()[i] -= h;
                (window_objective(&a, &p).loss - window_objective(&b, &p).loss) / (2.0 * h)
            };
            // Richardson-extrapolated central difference, fourth order in h
            let fd = (4.0 * central(5e-3) - central(1e-2)) / 3.0;
            let g = obj.grad[i];
            let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-12);
            worst[k] = worst[k].max(rel);
        }
    }
    check(
        worst.iter().all(|w| *w <= 1e-4),
        format!("worst relative error over {n} parameters: mse {:.2e}, physics penalty {:.2e}", worst[0], worst[1]),
    )
}

// 4 ---------------------------------------------------------------------

fn matrix_cardinality() -> Outcome {
    let cfg = RunConfig::desk(4);
    let mut bundles = synth_bundles(&cfg, Role::Source, 5).map_err(|e| e.to_string())?;
    attach_pb0(&mut bundles).map_err(|e| e.to_string())?;
    let norm = source_normalizer(&bundles).map_err(|e| e.to_string())?;
    let sources: Vec<SourceLake> =
        train_sources(&bundles, &norm, &cfg).map_err(|e| e.to_string())?.into_iter().map(|s| s.0).collect();
    let mut counts = Vec::new();
    for family in [SourceKind::Pb, SourceKind::Pgdl] {
        let m = build_transfer_matrix(&sources, family, &FeatureCatalog::default()).map_err(|e| e.to_string())?;
        if m.records.iter().any(|r| r.source_id == r.target_id) {
            return Err("self-pair present".into());
        }
        m.validate().map_err(|e| e.to_string())?;
        counts.push(m.records.len());
    }
    check(
        counts == [20, 20] && pair_count(5) == 20 && pair_count(145) == 20880,
        format!("{counts:?} records for 5 sources; 145 sources give {}", pair_count(145)),
    )
}

// 9 ---------------------------------------------------------------------

fn calibration_dominance() -> Outcome {
    let mut cfg = RunConfig::desk(9);
    cfg.sizes.years = 1;
    let bundles = synth_bundles(&cfg, Role::Source, 12).map_err(|e| e.to_string())?;
    use rayon::prelude::*;
    let cals = bundles
        .par_iter()
        .map(|b| calibrate(&b.attributes, &b.drivers, &b.observations))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let dominated = cals.iter().filter(|c| c.rmse <= c.pb0_rmse).count();

    // noise-free observations from known parameters
    let lake = LakeAttributes::new("recovery", 11.0, 8e5, 0.7, 45.0).map_err(|e| e.to_string())?;
    let drivers = synth_drivers(&lake, 365, 9).map_err(|e| e.to_string())?;
    let truth = simulate(&lake, &drivers, &SimParams::new(1.1, 0.9, 0.35)).map_err(|e| e.to_string())?;
    let mut obs = Vec::new();
    for day in (100..300).step_by(6) {
        for k in 0..truth.n_depths() {
            obs.push(Observation { date: truth.date(day), depth: truth.depths()[k], temp: truth.get(k, day) });
        }
    }
    let obs = ObservationSet::new(obs).map_err(|e| e.to_string())?;
    let rec = calibrate(&lake, &drivers, &obs).map_err(|e| e.to_string())?;
    check(
        dominated == cals.len() && rec.rmse <= 0.05,
        format!("calibrated <= PB0 on {dominated}/{} lakes; self-recovery rmse {:.4} degC", cals.len(), rec.rmse),
    )
}

// 7 ---------------------------------------------------------------------

/// A population whose hidden parameters move linearly with depth and vary
/// little otherwise, so transfer error is driven by the depth gap. Sources use
/// their true parameters.
fn rfecv_recovery() -> Outcome {
    let catalog = FeatureCatalog::default();
    let target = catalog.index_of("max_depth_diff").ok_or("catalog lacks max_depth_diff")?;
    let mut hits = 0;
    let mut sizes = Vec::new();
    for seed in 0..10u64 {
        let mut cfg = RunConfig::desk(700 + seed);
        cfg.sizes.years = 1;
        cfg.world.truth = TruthConfig {
            sw: (0.7, 0.6, 0.01),
            momentum: (0.5, 1.2, 0.02),
            deep_mix: (0.1, 0.8, 0.01),
            clarity_log_sd: 0.0,
            shallow_depth: 2.0,
            deep_depth: 40.0,
            linear_depth: true,
        };
        cfg.world.population.clarity_range = (0.8, 0.9);
        cfg.world.population.latitude_range = (45.0, 45.5);
        let mut bundles = synth_bundles(&cfg, Role::Source, 14).map_err(|e| e.to_string())?;
        attach_pb0(&mut bundles).map_err(|e| e.to_string())?;
        let sources = bundles
            .into_iter()
            .map(|b| {
                let params = lake_truth(&b.attributes, cfg.seed, &cfg.world.truth).params;
                Ok(SourceLake { entry: LakeEntry::new(b)?, pb: Some(SourceModel::Pb { params }), pgdl: None })
            })
            .collect::<lakemtl::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let m = build_transfer_matrix(&sources, SourceKind::Pb, &catalog).map_err(|e| e.to_string())?;
        let (x, y) = m.design(|_| true).map_err(|e| e.to_string())?;
        let sel = rfecv(&x, &y, &RfecvConfig::default()).map_err(|e| e.to_string())?;
        sizes.push(sel.selected.len());
        if sel.selected.contains(&target) {
            hits += 1;
        }
    }
    check(hits >= 8, format!("selected in {hits}/10 seeds; subset sizes {sizes:?}"))
}

// 8 ---------------------------------------------------------------------

fn penalty_effect() -> Outcome {
    let cfg = RunConfig::desk(1);
    let mut bundles = synth_bundles(&cfg, Role::Target, 10).map_err(|e| e.to_string())?;
    attach_pb0(&mut bundles).map_err(|e| e.to_string())?;
    let norm = source_normalizer(&bundles).map_err(|e| e.to_string())?;
    let lakes: Vec<LakeEntry> = bundles.into_iter().map(LakeEntry::new).collect::<lakemtl::Result<_>>().map_err(|e| e.to_string())?;
    let rows = penalty_ablation(&lakes, &norm, &cfg.pgdl, &[0.0, 1.0], 1.0 / 3.0, cfg.seed).map_err(|e| e.to_string())?;
    let total = |l: f64| rows.iter().filter(|r| r.lambda == l).map(|r| r.inversions).sum::<usize>();
    let (off, on) = (total(0.0), total(1.0));
    let fewer = rows.chunks(2).filter(|c| c[1].inversions <= c[0].inversions).count();
    check(
        on <= off,
        format!("held-out inversions {on} with the penalty vs {off} without; no worse on {fewer}/10 lakes"),
    )
}

// 5, 6, 10, 11 ----------------------------------------------------------

fn desk_run_config() -> RunConfig {
    let mut cfg = RunConfig::desk(1);
    cfg.ensemble.tune = false;
    cfg.ensemble.size = 9;
    cfg.experiments.exp2 = false;
    cfg.experiments.expand = false;
    cfg
}

fn read_exp1(root: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(root.join("reports/exp1_summary.json")).unwrap_or_default();
    serde_json::from_str(&text).unwrap_or(serde_json::Value::Null)
}

fn metamodel_utility(doc: &serde_json::Value) -> Outcome {
    let fams = doc["summary"]["families"].as_array().ok_or("no family summaries")?;
    let mut details = Vec::new();
    let mut ok = !fams.is_empty();
    for f in fams {
        let rs = f["median_spearman"].as_f64().unwrap_or(f64::NAN);
        let beats = f["beats_random_fraction"].as_f64().unwrap_or(0.0);
        ok &= rs > 0.3 && beats >= 0.7;
        details.push(format!("{}: median r_s {rs:.3}, beats random on {:.0}%", f["family"], beats * 100.0));
    }
    check(ok, details.join("; "))
}

fn method_median(doc: &serde_json::Value, name: &str) -> Option<f64> {
    doc["summary"]["methods"].as_array()?.iter().find(|m| m["method"] == name)?["rmse"]["median"].as_f64()
}

fn ensemble_ordering(doc: &serde_json::Value) -> Outcome {
    let single = method_median(doc, "PGDL-MTL").ok_or("no PGDL-MTL median")?;
    let ens = method_median(doc, "PGDL-MTL-ensemble").ok_or("no ensemble median")?;
    let size = doc["summary"]["ensemble_size"].as_u64().unwrap_or(0);
    check(ens <= single && size == 9, format!("{size}-source ensemble median {ens:.3} vs single {single:.3} degC"))
}

fn compare_runs(a: &Path, b: &Path) -> Outcome {
    let mut compared = 0;
    let mut files: Vec<String> = std::fs::read_dir(a.join("reports"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| format!("reports/{}", e.file_name().to_string_lossy()))
        .filter(|f| f.ends_with(".csv"))
        .collect();
    files.sort();
    files.push("manifest.tsv".into());
    for f in &files {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        if x != y {
            return Err(format!("{f} differs between 8 and 1 workers"));
        }
        compared += 1;
    }
    Ok(format!("{compared} files byte-identical, manifest included"))
}

fn sparsification(rep: &Exp2Report) -> Outcome {
    let grid: Vec<usize> = rep.treatments.iter().map(|t| t.profiles).collect();
    let (one, fifty) = (rep.median_at(1), rep.median_at(50));
    let ok = grid == PROFILE_COUNTS && PROFILE_COUNTS == [1, 2, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50];
    match (one, fifty) {
        (Some(o), Some(f)) => check(
            ok && f <= o,
            format!("median rmse {f:.3} at 50 profiles vs {o:.3} at 1, {} lakes, grid {grid:?}", rep.lakes.len()),
        ),
        _ => Err(format!("missing treatments at 1 or 50 profiles; grid {grid:?}")),
    }
}
