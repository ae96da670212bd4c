//! Fit a metamodel on a small transfer matrix and rank sources for an
//! unmonitored lake.

use lakemtl::metafeatures::{FeatureCatalog, LakeProfile};
use lakemtl::mtl::{build_transfer_matrix, rank_sources, train_metamodel, LakeEntry, MetamodelConfig};
use lakemtl::pipeline::{attach_pb0, source_normalizer, synth_bundles, train_sources, Role, RunConfig};
use lakemtl::sourcemodel::SourceKind;

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(4);
    cfg.pgdl.pretrain.epochs = 5;
    cfg.pgdl.finetune.epochs = 5;
    let mut src = synth_bundles(&cfg, Role::Source, 12)?;
    attach_pb0(&mut src)?;
    let sources: Vec<_> = train_sources(&src, &source_normalizer(&src)?, &cfg)?.into_iter().map(|(s, _)| s).collect();
    let catalog = FeatureCatalog::default();
    let matrix = build_transfer_matrix(&sources, SourceKind::Pb, &catalog)?;

    let meta_cfg = MetamodelConfig { rfecv: None, ..MetamodelConfig::default() };
    let meta = train_metamodel(&matrix, &meta_cfg)?;
    println!("metamodel: {} features, {:?} trees", meta.selected_names().len(), meta.ensemble.trees.len());
    let mut imp = meta.importances();
    imp.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, w) in imp.iter().take(5) {
        println!("  {name:<28} {w:.3}");
    }

    let mut tgt = synth_bundles(&cfg, Role::Target, 2)?;
    attach_pb0(&mut tgt)?;
    let target = LakeEntry::new(tgt.remove(0))?;
    let profiles: Vec<&LakeProfile> = sources.iter().map(|s| &s.entry.profile).collect();
    let ranked = rank_sources(&meta, &target.profile, &profiles, &catalog)?;
    println!("\nsources for {} (depth {:.1} m)", ranked.target_id, target.profile.attributes[0]);
    for s in ranked.top(5) {
        let depth = sources.iter().find(|x| x.id() == s.source_id).map(|x| x.entry.profile.attributes[0]).unwrap_or(f64::NAN);
        println!("  #{} {}  predicted {:.2} degC  depth {depth:.1} m", s.rank, s.source_id, s.predicted_rmse);
    }
    Ok(())
}
