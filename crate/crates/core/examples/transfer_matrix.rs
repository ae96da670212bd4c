//! Train a handful of source lakes and score every ordered pair.

use lakemtl::metafeatures::{write_feature_table, FeatureCatalog};
use lakemtl::mtl::build_transfer_matrix;
use lakemtl::pipeline::{attach_pb0, source_normalizer, synth_bundles, train_sources, Role, RunConfig};
use lakemtl::sourcemodel::SourceKind;

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(3);
    cfg.pgdl.pretrain.epochs = 10;
    cfg.pgdl.finetune.epochs = 10;
    let mut bundles = synth_bundles(&cfg, Role::Source, 6)?;
    attach_pb0(&mut bundles)?;
    let trained = train_sources(&bundles, &source_normalizer(&bundles)?, &cfg)?;
    for (_, f) in &trained {
        println!("{}  PB0 {:.2}  PB {:.2}  PGDL fine-tune mse {:.2}", f.lake_id, f.pb0_rmse, f.pb_rmse, f.pgdl_finetune_mse);
    }
    let sources: Vec<_> = trained.into_iter().map(|(s, _)| s).collect();
    let catalog = FeatureCatalog::default();

    for family in [SourceKind::Pb, SourceKind::Pgdl] {
        let m = build_transfer_matrix(&sources, family, &catalog)?;
        let worst = m.records.iter().max_by(|a, b| a.rmse.partial_cmp(&b.rmse).unwrap()).unwrap();
        println!(
            "{}: {} pairs, worst {} -> {} at {:.2} degC",
            family.label(),
            m.records.len(),
            worst.source_id,
            worst.target_id,
            worst.rmse.unwrap_or(f64::NAN)
        );
        if family == SourceKind::Pb {
            let mut out = Vec::new();
            write_feature_table(&m.to_table(), &mut out)?;
            println!("csv header: {}", String::from_utf8_lossy(&out).lines().next().unwrap_or("").chars().take(80).collect::<String>());
        }
    }
    Ok(())
}
