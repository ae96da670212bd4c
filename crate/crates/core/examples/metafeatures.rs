//! Describe two lakes and the meta-features of transferring between them.

use lakemtl::metafeatures::{pair_features, FeatureCatalog, LakeProfile};
use lakemtl::pipeline::{attach_pb0, synth_bundles, Role, RunConfig};

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(2);
    cfg.sizes.years = 1;
    let mut lakes = synth_bundles(&cfg, Role::Source, 2)?;
    attach_pb0(&mut lakes)?;
    let (s, t) = (LakeProfile::of(&lakes[0])?, LakeProfile::of(&lakes[1])?);
    println!("source {} depth {:.1} m, stratified {:.2}", s.lake_id, s.attributes[0], s.stratification);
    println!("target {} depth {:.1} m, stratified {:.2}", t.lake_id, t.attributes[0], t.stratification);

    let catalog = FeatureCatalog::default();
    let values = pair_features(&s, &t, &catalog)?;
    println!("\n{} features (catalog {})", catalog.len(), catalog.version);
    for (spec, v) in catalog.features.iter().zip(&values).take(16) {
        println!("  {:<28} {v:>12.4}", spec.name);
    }
    println!("  ...");
    Ok(())
}
