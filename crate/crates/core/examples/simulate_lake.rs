//! Simulate one synthetic lake with default parameters and write the field.
//!
//! `cargo run --example simulate_lake -- [out.csv]`

use lakemtl::lakesim::{simulate, stratification_fraction, synth_drivers, LakeAttributes, SimParams};
use lakemtl::pipeline::io::write_field;

fn main() -> lakemtl::Result<()> {
    let lake = LakeAttributes::new("demo", 12.0, 6e5, 0.8, 45.5)?;
    let drivers = synth_drivers(&lake, 365, 7)?;
    let field = simulate(&lake, &drivers, &SimParams::default())?;

    println!("{} depths x {} days from {}", field.n_depths(), field.n_dates(), field.start());
    println!("stratified on {:.0}% of days", 100.0 * stratification_fraction(&field)?);
    for day in [15, 105, 195, 285] {
        let surface = field.get(0, day);
        let bottom = field.get(field.n_depths() - 1, day);
        println!("{}  surface {surface:5.2}  bottom {bottom:5.2} degC", field.date(day));
    }
    if let Some(path) = std::env::args().nth(1) {
        write_field(path.as_ref(), &field)?;
        println!("wrote {path}");
    }
    Ok(())
}
