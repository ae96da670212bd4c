//! Gradient boosted trees on a toy regression: grid search, recursive
//! feature elimination, importances and the text model format.

use lakemtl::gbm::{fit, rfecv, tune, FitConfig, Matrix, RfecvConfig, TuningGrid};
use lakemtl::seed::rng_for;
use rand::Rng;

fn main() -> lakemtl::Result<()> {
    let mut rng = rng_for(1, "example", "boosting");
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
    // only the first two columns matter
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + (6.0 * r[1]).sin() + 0.1 * rng.random::<f64>()).collect();
    let x = Matrix::from_rows(&rows)?;

    let tuned = tune(&x, &y, &TuningGrid::desk())?;
    println!("best: {} trees at learning rate {}", tuned.best.n_estimators, tuned.best.learning_rate);

    let sel = rfecv(&x, &y, &RfecvConfig { fit: FitConfig { n_estimators: 60, ..FitConfig::default() }, folds: 5 })?;
    println!("kept columns {:?}", sel.selected);
    for (k, mse) in &sel.curve {
        println!("  {k} features: cv mse {mse:.4}");
    }

    let model = fit(&x, &y, &tuned.best)?;
    println!("importances {:?}", model.feature_importance().weights.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());
    let text = model.to_text();
    println!("text form: {} lines, first: {:?}", text.lines().count(), text.lines().next().unwrap_or(""));
    Ok(())
}
