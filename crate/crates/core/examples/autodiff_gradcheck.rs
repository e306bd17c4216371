//! Build a tiny graph by hand, run backward, and compare against central differences.

use hybridcast::autodiff::{Graph, ParamSet, Tensor};

fn loss_of(params: &ParamSet, x: &Tensor) -> f64 {
    let mut g = Graph::new();
    let b = params.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let w = b.get(params.id("w").unwrap());
    let bias = b.get(params.id("b").unwrap());
    let h = g.affine(xv, w, Some(bias)).unwrap();
    let h = g.tanh(h);
    let s = g.sum(h);
    g.value(s).item()
}

fn main() {
    let mut params = ParamSet::new();
    let w = params.add("w", Tensor::new(vec![2, 3], vec![0.3, -0.2, 0.5, 0.1, 0.4, -0.6]).unwrap());
    let b = params.add("b", Tensor::from_vec(vec![0.05, -0.1]));
    let x = Tensor::new(vec![4, 3], (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();

    let mut g = Graph::new();
    let bound = params.bind(&mut g, true);
    let xv = g.constant(x.clone());
    let h = g.affine(xv, bound.get(w), Some(bound.get(b))).unwrap();
    let h = g.tanh(h);
    let loss = g.sum(h);
    g.backward(loss).unwrap();
    params.accumulate_grads(&g, &bound);

    println!("loss = {:.6}", g.value(loss).item());
    let eps = 1e-6;
    for id in [w, b] {
        for k in 0..params.value(id).numel() {
            let x0 = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = x0 + eps;
            let up = loss_of(&params, &x);
            params.value_mut(id).data_mut()[k] = x0 - eps;
            let down = loss_of(&params, &x);
            params.value_mut(id).data_mut()[k] = x0;
            let numeric = (up - down) / (2.0 * eps);
            println!("{}[{k}]  analytic {:+.8}  numeric {:+.8}", params.name(id), params.grad(id)[k], numeric);
        }
    }
}
