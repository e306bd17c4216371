//! Perturb one input step at a time and watch which ones reach the DeepTCN output.

use hybridcast::autodiff::Graph;
use hybridcast::datapipe::Batch;
use hybridcast::models::{DeepTcn, DeepTcnConfig, Forecaster, InputSpec};

fn main() -> hybridcast::Result<()> {
    let cfg = DeepTcnConfig::default();
    let history = 40;
    let spec = InputSpec {
        history,
        n_num: 2,
        cat_cardinalities: [12, 7, 24, 5],
        target_mean: 0.0,
        target_std: 1.0,
        target_min: 0.0,
        target_max: 1.0,
    };
    let model = DeepTcn::new(spec, &cfg, 0)?;
    println!("dilations {:?}, kernel {}, receptive field {}", cfg.dilations, cfg.kernel_size, cfg.receptive_field());
    for (i, b) in model.blocks().iter().enumerate() {
        println!("block {i}: {} -> {} channels, dilation {}, projection {}", b.in_channels, b.out_channels, b.dilation, b.projection.is_some());
    }

    let base = Batch {
        size: 1,
        history,
        n_num: 2,
        x_num: (0..history * 2).map(|i| (i as f64 * 0.3).cos()).collect(),
        x_cat: [vec![0; history], vec![1; history], (0..history).map(|t| t % 24).collect(), vec![0; history]],
        y: vec![0.0],
    };
    let eval = |b: &Batch| -> hybridcast::Result<f64> {
        let mut g = Graph::new();
        let bound = model.params().bind(&mut g, false);
        let y = model.forward(&mut g, &bound, b)?;
        Ok(g.value(y).data()[0])
    };
    let y0 = eval(&base)?;
    let mut reached = Vec::new();
    for step in 0..history {
        let mut b = base.clone();
        b.x_num[step * 2] += 1.0;
        if eval(&b)? != y0 {
            reached.push(history - 1 - step);
        }
    }
    println!("input ages that change the output: {}..={}", reached.iter().min().unwrap(), reached.iter().max().unwrap());
    Ok(())
}
