//! Pretrain a recurrent model on simulator output, fine-tune it on
//! observations with the density penalty, and score it.

use lakemtl::lakesim::{lake_truth, sample_observations, simulate, synth_drivers, true_field};
use lakemtl::lakesim::{LakeAttributes, ObservationDesign, SimParams, TruthConfig};
use lakemtl::mtl::rmse;
use lakemtl::sourcemodel::{count_inversions, fit_normalizer, fit_pgdl, predict, PgdlConfig};

fn main() -> lakemtl::Result<()> {
    let lake = LakeAttributes::new("pgdl", 9.0, 4e5, 0.9, 44.0)?;
    let drivers = synth_drivers(&lake, 730, 5)?;
    let truth = lake_truth(&lake, 5, &TruthConfig::default());
    let obs = sample_observations(&true_field(&lake, &drivers, &truth)?, &lake, 5, &ObservationDesign::default())?;
    let pb0 = simulate(&lake, &drivers, &SimParams::default())?;
    let norm = fit_normalizer(&[(&lake, &drivers)])?;

    let mut config = PgdlConfig::default();
    config.pretrain.epochs = 15;
    config.finetune.epochs = 15;
    let (model, fit) = fit_pgdl(&lake, &drivers, &obs, &pb0, &norm, &config, 5)?;
    println!("pretrain mse {:.3} -> {:.3}", fit.pretrain.initial_mse, fit.pretrain.final_mse());
    println!("finetune mse {:.3} -> {:.3}", fit.finetune.initial_mse, fit.finetune.final_mse());

    let pred = predict(&model, &lake, &drivers, &lake.depth_grid())?;
    println!("rmse vs observations: PB0 {:.3}, PGDL {:.3} degC", rmse(&pb0, &obs)?, rmse(&pred, &obs)?);
    println!("density inversions over the record: {}", count_inversions(&pred, 0..pred.n_dates()));
    Ok(())
}
