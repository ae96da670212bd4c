//! Calibrate the process-based model against noisy synthetic profiles.

use lakemtl::lakesim::{calibrate, lake_truth, sample_observations, synth_drivers, true_field};
use lakemtl::lakesim::{LakeAttributes, ObservationDesign, TruthConfig};

fn main() -> lakemtl::Result<()> {
    let lake = LakeAttributes::new("cal", 18.0, 2e6, 0.6, 46.0)?;
    let drivers = synth_drivers(&lake, 730, 3)?;
    let truth = lake_truth(&lake, 3, &TruthConfig::default());
    let obs = sample_observations(&true_field(&lake, &drivers, &truth)?, &lake, 3, &ObservationDesign::default())?;

    let cal = calibrate(&lake, &drivers, &obs)?;
    println!("{} observations on {} dates", obs.len(), obs.profile_dates().len());
    println!("hidden     {:?}", truth.params);
    println!("calibrated {:?}", cal.params);
    println!("rmse: PB0 {:.3} -> PB {:.3} degC ({} evaluations)", cal.pb0_rmse, cal.rmse, cal.evaluations);
    Ok(())
}
