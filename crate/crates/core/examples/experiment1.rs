//! Transfer to observed target lakes with single best and ensemble sources,
//! at a size that finishes in a few minutes.

use lakemtl::metafeatures::FeatureCatalog;
use lakemtl::mtl::{build_transfer_matrix, experiment1, train_metamodel, Exp1Config, LakeEntry, MetamodelConfig};
use lakemtl::pipeline::{attach_pb0, observed, source_normalizer, synth_bundles, train_sources, Role, RunConfig};
use lakemtl::sourcemodel::SourceKind;

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(5);
    cfg.pgdl.pretrain.epochs = 10;
    cfg.pgdl.finetune.epochs = 10;
    let mut src = synth_bundles(&cfg, Role::Source, 14)?;
    let mut tgt = observed(synth_bundles(&cfg, Role::Target, 10)?);
    attach_pb0(&mut src)?;
    attach_pb0(&mut tgt)?;
    let sources: Vec<_> = train_sources(&src, &source_normalizer(&src)?, &cfg)?.into_iter().map(|(s, _)| s).collect();
    let targets = tgt.into_iter().map(LakeEntry::new).collect::<lakemtl::Result<Vec<_>>>()?;

    let catalog = FeatureCatalog::default();
    let meta_cfg = MetamodelConfig { rfecv: None, ..MetamodelConfig::default() };
    let pb = train_metamodel(&build_transfer_matrix(&sources, SourceKind::Pb, &catalog)?, &meta_cfg)?;
    let pgdl = train_metamodel(&build_transfer_matrix(&sources, SourceKind::Pgdl, &catalog)?, &meta_cfg)?;

    let cfg1 = Exp1Config { ensemble_size: 5, ..Exp1Config::default() };
    let report = experiment1(&sources, &targets, Some(&pb), Some(&pgdl), &catalog, &cfg1)?;
    let summary = report.summary();
    for m in &summary.methods {
        if let Some(q) = m.rmse {
            println!("{:<20} median {:.2} degC  (IQR {:.2}-{:.2}), beats PB0 on {}", m.method, q.median, q.lower, q.upper, m.beats_pb0);
        }
    }
    for f in &summary.families {
        println!(
            "{}: median spearman {:?}, rank 1 beats random on {:.0}% of targets",
            f.family.label(),
            f.median_spearman.map(|v| (v * 100.0).round() / 100.0),
            100.0 * f.beats_random_fraction
        );
    }
    Ok(())
}
