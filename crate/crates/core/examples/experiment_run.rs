//! A small end-to-end run through the same code path as `hybridcast run`.

use hybridcast::experiment::{cmd_run, ExperimentConfig};

fn main() -> hybridcast::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
seed = 1

[data]
synthetic_hours = 600

[decomposition]
trials = 10

[models]
names = ["LR", "GRU", "DeepTCN", "CEEMDAN-DeepTCN"]
horizons = [1, 3]

[train]
epochs = 5

[rnn]
hidden = 16
"#,
    )?;
    let out = std::env::temp_dir().join("hybridcast-example-run");
    let outcome = cmd_run(&cfg, 1, &out)?;
    for c in &outcome.cells {
        println!("{:<20} MAPE {:.4}", c.id.to_string(), c.metrics.mape);
    }
    if let Some(d) = &outcome.decomposition {
        println!("decomposition: {} IMFs", d.n_imfs);
    }
    println!("tables written to {}", out.display());
    Ok(())
}
