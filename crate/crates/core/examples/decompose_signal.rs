use hybridcast::decomposition::{ceemdan, emd, CeemdanParams, SiftConfig};

fn main() -> hybridcast::Result<()> {
    let n = 1024;
    let signal: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            (t / 4.0).sin() + 0.6 * (t / 40.0).sin() + 0.002 * t
        })
        .collect();

    let cfg = SiftConfig::default();
    let plain = emd(&signal, &cfg)?;
    println!("EMD: {} IMFs, reconstruction error {:.2e}", plain.imfs.len(), plain.reconstruction_error(&signal));

    let params = CeemdanParams {
        noise_ratio: 0.2,
        trials: 50,
        seed: 7,
    };
    let result = ceemdan(&signal, &params, &cfg)?;
    println!("CEEMDAN: {} IMFs, reconstruction error {:.2e}", result.imfs.len(), result.reconstruction_error(&signal));
    for (name, comp) in result.column_names().iter().zip(result.components()) {
        let energy = comp.iter().map(|v| v * v).sum::<f64>() / n as f64;
        println!("  {name:<8} mean power {energy:.4}");
    }
    Ok(())
}
