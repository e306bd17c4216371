//! Shared fixtures for the integration tests: central-difference gradient
//! checks, random batches and small brute-force oracles.

#![allow(dead_code)]

use hybridcast::autodiff::{Bound, Graph, ParamSet, Tensor, Var};
use hybridcast::datapipe::Batch;
use hybridcast::models::{
    build_model, gru_step, lstm_step, tcn_block_forward, EmbeddingSizes, Embeddings, GruCell, InputSpec, LstmCell, ModelConfig, ModelKind, TcnBlock,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

/// Outcome of one gradient-check family.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradSummary {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

impl GradSummary {
    pub fn passed(&self, wanted: usize) -> bool {
        self.checked >= wanted && self.worst < GRAD_TOL
    }
}

fn probe(params: &ParamSet, weights: &[f64], f: &dyn Fn(&mut Graph, &Bound) -> Var) -> f64 {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let out = f(&mut g, &bound);
    let loss = g.dot(out, weights).unwrap();
    g.value(loss).item()
}

/// Relative error `|a - n| / max(|a|, |n|)` between the analytic and the
/// central-difference gradient of `<w, f(params)>` over every parameter
/// entry, with `w` random. Returns `None` when some ReLU input lies within
/// a few probe steps of its kink, where the finite difference is invalid.
pub fn gradient_error(params: &mut ParamSet, rng: &mut ChaCha8Rng, f: &dyn Fn(&mut Graph, &Bound) -> Var) -> Option<f64> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, true);
    let out = f(&mut g, &bound);
    if g.relu_margin() < 20.0 * FD_STEP {
        return None;
    }
    let weights: Vec<f64> = (0..g.value(out).numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = g.dot(out, &weights).unwrap();
    g.backward(loss).unwrap();
    let mut analytic = Vec::new();
    let ids: Vec<_> = params.ids().collect();
    for &id in &ids {
        let n = params.value(id).numel();
        match g.grad(bound.get(id)) {
            Some(gr) => analytic.extend_from_slice(gr),
            None => analytic.extend(std::iter::repeat_n(0.0, n)),
        }
    }
    let mut numeric = Vec::with_capacity(analytic.len());
    for &id in &ids {
        for k in 0..params.value(id).numel() {
            let x0 = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = x0 + FD_STEP;
            let up = probe(params, &weights, f);
            params.value_mut(id).data_mut()[k] = x0 - FD_STEP;
            let down = probe(params, &weights, f);
            params.value_mut(id).data_mut()[k] = x0;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = na.max(nn);
    Some(if scale == 0.0 { 0.0 } else { diff / scale })
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, size: usize, history: usize, n_num: usize, cards: [usize; 4]) -> Batch {
    let x_num = (0..size * history * n_num).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x_cat = std::array::from_fn(|c| (0..size * history).map(|_| rng.random_range(0..cards[c])).collect());
    let y = (0..size).map(|_| rng.random_range(5.0..50.0)).collect();
    Batch {
        size,
        history,
        n_num,
        x_num,
        x_cat,
        y,
    }
}

pub fn unit_spec(history: usize, n_num: usize) -> InputSpec {
    InputSpec {
        history,
        n_num,
        cat_cardinalities: [12, 7, 24, 5],
        target_mean: 0.0,
        target_std: 1.0,
        target_min: 0.0,
        target_max: 1.0,
    }
}

/// Runs `instances` valid checks of one family, drawing fresh sizes and
/// values for every instance.
fn family(instances: usize, seed: u64, mut one: impl FnMut(&mut ChaCha8Rng) -> Option<f64>) -> GradSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = GradSummary::default();
    while s.checked < instances && s.skipped < 10 * instances {
        match one(&mut rng) {
            Some(e) => {
                s.checked += 1;
                s.worst = s.worst.max(e);
            }
            None => s.skipped += 1,
        }
    }
    s
}

/// Two or three residual blocks on a random `[B, C, L]` input; the input
/// itself is checked along with every block parameter.
pub fn check_tcn_stack(instances: usize, seed: u64) -> GradSummary {
    family(instances, seed, |rng| {
        let mut p = ParamSet::new();
        let b = rng.random_range(1..=2);
        let l = rng.random_range(4..=9);
        let k = rng.random_range(2..=3);
        let c0 = rng.random_range(1..=3);
        let n_blocks = rng.random_range(2..=3);
        let x = p.add("x", random_tensor(rng, &[b, c0, l]));
        let mut blocks = Vec::new();
        let mut c_in = c0;
        for i in 0..n_blocks {
            let c_out = rng.random_range(1..=3);
            let mut block_rng = ChaCha8Rng::seed_from_u64(rng.random());
            blocks.push(TcnBlock::new(&mut p, &format!("b{i}"), c_in, c_out, k, 1 << i, &mut block_rng));
            c_in = c_out;
        }
        for id in p.ids().collect::<Vec<_>>() {
            if p.name(id).ends_with(".b") {
                let t = random_tensor(rng, p.value(id).shape());
                *p.value_mut(id) = t;
            }
        }
        gradient_error(&mut p, rng, &|g, bound| {
            let mut h = bound.get(x);
            for block in &blocks {
                h = tcn_block_forward(g, bound, block, h).unwrap();
            }
            h
        })
    })
}

pub fn check_weight_norm(instances: usize, seed: u64) -> GradSummary {
    family(instances, seed, |rng| {
        let mut p = ParamSet::new();
        let (o, i, k) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=3));
        let v = p.add("v", random_tensor(rng, &[o, i, k]));
        let gain = p.add("g", random_tensor(rng, &[o]));
        gradient_error(&mut p, rng, &|g, bound| g.weight_norm(bound.get(v), bound.get(gain)).unwrap())
    })
}

pub fn check_dense_head(instances: usize, seed: u64) -> GradSummary {
    family(instances, seed, |rng| {
        let mut p = ParamSet::new();
        let (b, n_in, n_out) = (rng.random_range(1..=4), rng.random_range(1..=8), rng.random_range(1..=3));
        let x = p.add("x", random_tensor(rng, &[b, n_in]));
        let w = p.add("w", random_tensor(rng, &[n_out, n_in]));
        let bias = p.add("b", random_tensor(rng, &[n_out]));
        gradient_error(&mut p, rng, &|g, bound| g.affine(bound.get(x), bound.get(w), Some(bound.get(bias))).unwrap())
    })
}

pub fn check_embeddings(instances: usize, seed: u64) -> GradSummary {
    family(instances, seed, |rng| {
        let mut p = ParamSet::new();
        let cards = [rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4)];
        let sizes = EmbeddingSizes {
            month: rng.random_range(1..=3),
            day: rng.random_range(1..=3),
            hour: rng.random_range(1..=3),
            weather: rng.random_range(1..=3),
        };
        let mut init = ChaCha8Rng::seed_from_u64(rng.random());
        let emb = Embeddings::new(&mut p, cards, sizes, &mut init).unwrap();
        let (size, history) = (rng.random_range(1..=3), rng.random_range(1..=4));
        let batch = random_batch(rng, size, history, 2, cards);
        gradient_error(&mut p, rng, &|g, bound| emb.features(g, bound, &batch).unwrap())
    })
}

fn recurrent(instances: usize, seed: u64, lstm: bool) -> GradSummary {
    family(instances, seed, |rng| {
        let mut p = ParamSet::new();
        let (b, n_in, hidden) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
        let xs: Vec<_> = (0..3).map(|t| p.add(format!("x{t}"), random_tensor(rng, &[b, n_in]))).collect();
        let h0 = p.add("h0", random_tensor(rng, &[b, hidden]));
        let c0 = p.add("c0", random_tensor(rng, &[b, hidden]));
        let mut init = ChaCha8Rng::seed_from_u64(rng.random());
        if lstm {
            let cell = LstmCell::new(&mut p, hidden, n_in, &mut init);
            for id in [cell.b_f, cell.b_i, cell.b_c, cell.b_o] {
                *p.value_mut(id) = random_tensor(rng, &[hidden]);
            }
            gradient_error(&mut p, rng, &|g, bound| {
                let (mut h, mut c) = (bound.get(h0), bound.get(c0));
                for x in &xs {
                    (h, c) = lstm_step(g, bound, &cell, bound.get(*x), h, c).unwrap();
                }
                g.concat(&[h, c], 1).unwrap()
            })
        } else {
            let cell = GruCell::new(&mut p, hidden, n_in, &mut init);
            gradient_error(&mut p, rng, &|g, bound| {
                let mut h = bound.get(h0);
                for x in &xs {
                    h = gru_step(g, bound, &cell, bound.get(*x), h).unwrap();
                }
                h
            })
        }
    })
}

/// Three unrolled steps; initial states and every step input are checked.
pub fn check_lstm(instances: usize, seed: u64) -> GradSummary {
    recurrent(instances, seed, true)
}

pub fn check_gru(instances: usize, seed: u64) -> GradSummary {
    recurrent(instances, seed, false)
}

/// A whole model, embeddings to output, on a random batch.
pub fn check_model(kind: ModelKind, instances: usize, seed: u64) -> GradSummary {
    family(instances, seed, |rng| {
        let history = rng.random_range(2..=5);
        let n_num = rng.random_range(1..=3);
        let mut cfg = ModelConfig::default();
        cfg.bpnn.hidden = rng.random_range(1..=5);
        cfg.rnn.hidden = rng.random_range(1..=3);
        cfg.tcn.channels = vec![rng.random_range(1..=3), rng.random_range(1..=3)];
        cfg.tcn.dilations = vec![1, 2];
        let model = build_model(kind, unit_spec(history, n_num), &cfg, rng.random()).unwrap();
        let size = rng.random_range(1..=3);
        let batch = random_batch(rng, size, history, n_num, [12, 7, 24, 5]);
        let mut p = model.params().clone();
        gradient_error(&mut p, rng, &|g, bound| model.forward(g, bound, &batch).unwrap())
    })
}

/// Every gradient family with its label.
pub fn all_gradient_checks(instances: usize) -> Vec<(&'static str, GradSummary)> {
    vec![
        ("tcn block stack", check_tcn_stack(instances, 11)),
        ("weight norm", check_weight_norm(instances, 12)),
        ("dense head", check_dense_head(instances, 13)),
        ("embeddings", check_embeddings(instances, 14)),
        ("lstm 3 steps", check_lstm(instances, 15)),
        ("gru 3 steps", check_gru(instances, 16)),
        ("bpnn", check_model(ModelKind::Bpnn, instances, 17)),
        ("deep tcn", check_model(ModelKind::DeepTcn, instances, 18)),
    ]
}

/// Straight-loop MAPE, MAE and RMSE for targets away from zero.
pub fn metric_oracle(y: &[f64], p: &[f64]) -> [f64; 3] {
    let n = y.len() as f64;
    let (mut ape, mut ae, mut se) = (0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let e = y[i] - p[i];
        ape += (e / y[i]).abs();
        ae += e.abs();
        se += e * e;
    }
    [ape / n, ae / n, (se / n).sqrt()]
}

/// DM statistic from the full banded covariance sum
/// `(1/N^2) sum_{|s-t|<h} (d_s - m)(d_t - m)` rather than autocovariances.
pub fn dm_oracle(y: &[f64], a: &[f64], b: &[f64], h: usize) -> (f64, f64) {
    let n = y.len();
    let d: Vec<f64> = (0..n).map(|t| ((y[t] - a[t]) / y[t]).abs() - ((y[t] - b[t]) / y[t]).abs()).collect();
    let m = d.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for s in 0..n {
        for t in 0..n {
            if s.abs_diff(t) < h {
                acc += (d[s] - m) * (d[t] - m);
            }
        }
    }
    let var_mean = acc / (n * n) as f64;
    let stat = m / var_mean.sqrt();
    (stat, 2.0 * normal_upper_tail(stat.abs()))
}

/// `P(Z > z)` by composite Simpson integration of the standard normal density.
pub fn normal_upper_tail(z: f64) -> f64 {
    let steps = 20_000;
    let (lo, hi) = (0.0, z);
    let w = (hi - lo) / steps as f64;
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(lo) + phi(hi);
    for i in 1..steps {
        let x = lo + i as f64 * w;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(x);
    }
    0.5 - s * w / 3.0
}

/// Positive targets and two noisy forecasts of them.
pub fn forecast_triplet(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..200.0)).collect();
    let a = y.iter().map(|v| v * (1.0 + rng.random_range(-0.3..0.3))).collect();
    let b = y.iter().map(|v| v + rng.random_range(-20.0..20.0)).collect();
    (y, a, b)
}
