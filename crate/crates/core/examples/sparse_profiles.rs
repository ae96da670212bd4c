//! Fine-tune on a shrinking number of profiles and watch the error grow.

use lakemtl::mtl::{experiment2, Exp2Config, LakeEntry};
use lakemtl::pipeline::{attach_pb0, source_normalizer, synth_bundles, Role, RunConfig};

fn main() -> lakemtl::Result<()> {
    let cfg = RunConfig::desk(6);
    let mut lakes = synth_bundles(&cfg, Role::Target, 2)?;
    attach_pb0(&mut lakes)?;
    let norm = source_normalizer(&lakes)?;
    let entries = lakes.into_iter().map(LakeEntry::new).collect::<lakemtl::Result<Vec<_>>>()?;

    let mut pgdl = cfg.pgdl.clone();
    pgdl.pretrain.epochs = 10;
    pgdl.finetune.epochs = 10;
    let e2 = Exp2Config { profile_counts: vec![1, 5, 20, 50], draws: 2, pgdl, ..Exp2Config::default() };
    let report = experiment2(&entries, &norm, &e2)?;
    for t in &report.treatments {
        match t.rmse {
            Some(q) => println!("{:>3} profiles: median {:.2} degC", t.profiles, q.median),
            None => println!("{:>3} profiles: no lake had enough data", t.profiles),
        }
    }
    Ok(())
}
