//! Metrics and a Diebold-Mariano matrix for three made-up forecasters.

use hybridcast::evaluation::{compute_metrics, dm_matrix, dm_test};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hybridcast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..300).map(|t| 60.0 + 30.0 * (t as f64 / 12.0).sin() + rng.random_range(-5.0..5.0)).collect();
    let sharp: Vec<f64> = y.iter().map(|v| v * (1.0 + rng.random_range(-0.05..0.05))).collect();
    let rough: Vec<f64> = y.iter().map(|v| v * (1.0 + rng.random_range(-0.15..0.15))).collect();
    let naive: Vec<f64> = std::iter::once(y[0]).chain(y[..y.len() - 1].iter().copied()).collect();

    let forecasts = vec![("sharp".to_string(), sharp), ("rough".to_string(), rough), ("naive".to_string(), naive)];
    for (name, f) in &forecasts {
        let m = compute_metrics(&y, f)?;
        println!("{name:<6} MAPE {:.4}  MAE {:.3}  RMSE {:.3}", m.mape, m.mae, m.rmse);
    }

    let r = dm_test(&y, &forecasts[0].1, &forecasts[2].1, 1, false)?;
    println!("\nsharp vs naive: DM = {:.3}, p = {:.3}", r.statistic.unwrap_or(f64::NAN), r.p_value.unwrap_or(f64::NAN));
    let h = dm_test(&y, &forecasts[0].1, &forecasts[2].1, 1, true)?;
    println!("with Harvey correction: DM = {:.3}, p = {:.3}\n", h.statistic.unwrap_or(f64::NAN), h.p_value.unwrap_or(f64::NAN));

    print!("{}", dm_matrix("h=1", &y, &forecasts, 1, false)?.to_tsv());
    Ok(())
}
