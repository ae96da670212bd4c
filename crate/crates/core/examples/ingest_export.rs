//! Write a synthetic population in the ingestion CSV layout, read it back,
//! and split it into eligible sources and target-only lakes.

use lakemtl::pipeline::io::{export_bundles, ingest, source_eligible};
use lakemtl::pipeline::{synth_bundles, Role, RunConfig};

fn main() -> lakemtl::Result<()> {
    let mut cfg = RunConfig::desk(8);
    cfg.sizes.years = 1;
    let lakes = synth_bundles(&cfg, Role::Source, 3)?;
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lakemtl-ingest"));
    std::fs::create_dir_all(&dir)?;
    export_bundles(&dir, &lakes)?;
    for f in ["lakes.csv", "drivers.csv", "observations.csv"] {
        let text = std::fs::read_to_string(dir.join(f))?;
        println!("{f}: {} rows, header {}", text.lines().count() - 1, text.lines().next().unwrap_or(""));
    }

    let back = ingest(&dir.join("lakes.csv"), &dir.join("drivers.csv"), &dir.join("observations.csv"))?;
    assert_eq!(back, lakes);
    for b in &back {
        println!(
            "{}: {} profiles, source eligible: {}",
            b.attributes.lake_id,
            b.observations.profile_dates().len(),
            source_eligible(b)
        );
    }
    Ok(())
}
