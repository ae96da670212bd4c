//! Run the staged pipeline behind the `mtl` tool on a small world, then
//! rank sources for one target from the saved artifacts.
//!
//! `cargo run --release --example pipeline -- [out_dir]`

use lakemtl::pipeline::{Pipeline, RunConfig, Stage};
use lakemtl::sourcemodel::SourceKind;

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(9);
    cfg.sizes.sources = 12;
    cfg.sizes.targets = 8;
    cfg.sizes.expand_targets = 10;
    cfg.pgdl.pretrain.epochs = 5;
    cfg.pgdl.finetune.epochs = 5;
    cfg.ensemble.tune = false;
    cfg.ensemble.size = 3;
    cfg.experiments.exp2 = false;
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("lakemtl-pipeline").display().to_string());

    let p = Pipeline::new(cfg, &out, 4)?;
    for stage in Stage::ALL {
        if stage == Stage::Exp2 {
            continue;
        }
        let t = std::time::Instant::now();
        p.run(stage)?;
        println!("{:<14} {:>6.1} s", stage.name(), t.elapsed().as_secs_f64());
    }
    let target = std::fs::read_to_string(p.path("data/targets/lakes.csv"))?
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').next())
        .map(str::to_string)
        .unwrap_or_default();
    let ranked = p.rank(&target, SourceKind::Pgdl)?;
    println!("\ntop sources for {target}:");
    for s in ranked.top(3) {
        println!("  #{} {} ({:.2} degC)", s.rank, s.source_id, s.predicted_rmse);
    }
    println!("artifacts in {out}, config hash {}", p.config_hash());
    Ok(())
}
