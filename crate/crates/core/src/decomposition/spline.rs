//! Natural cubic spline through sorted knots, evaluated on the integer grid.

/// Evaluates the natural cubic spline through `(xs[i], ys[i])` at
/// `0, 1, .., len-1`. Knots must be strictly increasing and there must be at
/// least two of them; with exactly two the spline is the connecting line.
pub(crate) fn natural_cubic_on_grid(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
    let n = xs.len();
    debug_assert!(n >= 2 && n == ys.len());
    debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));

    let m = second_derivatives(xs, ys);
    let mut out = Vec::with_capacity(len);
    let mut seg = 0;
    for t in 0..len {
        let x = t as f64;
        while seg + 2 < n && x > xs[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let value = a * ys[seg]
            + b * ys[seg + 1]
            + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
        out.push(value);
    }
    out
}

/// Second derivatives at the knots with natural end conditions (M_0 = M_{n-1} = 0),
/// solved by the Thomas algorithm.
fn second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    // Forward elimination; the sub-diagonal entry of row i is h_{i} = xs[i] - xs[i-1].
    for i in 1..inner {
        let lower = xs[i + 1] - xs[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[inner] = rhs[inner - 1] / diag[inner - 1];
    for i in (0..inner - 1).rev() {
        m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_knots_is_linear() {
        let v = natural_cubic_on_grid(&[0.0, 4.0], &[0.0, 8.0], 5);
        assert_eq!(v, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn interpolates_knots() {
        let xs = [-3.0, 0.0, 2.0, 5.0, 9.0, 12.0];
        let ys = [1.0, -2.0, 0.5, 3.0, -1.0, 0.0];
        let v = natural_cubic_on_grid(&xs, &ys, 10);
        for (x, y) in xs.iter().zip(&ys) {
            if *x >= 0.0 && *x < 10.0 {
                assert!((v[*x as usize] - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_straight_lines() {
        // Natural splines are exact for linear data.
        let xs = [-2.0, 1.0, 3.0, 7.0, 11.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x - 1.0).collect();
        let v = natural_cubic_on_grid(&xs, &ys, 10);
        for (t, val) in v.iter().enumerate() {
            assert!((val - (0.5 * t as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_solve() {
        // Independent check: assemble and solve the full natural-spline system.
        let xs = [0.0, 1.5, 4.0, 6.0, 9.0];
        let ys = [2.0, -1.0, 3.0, 0.0, 1.0];
        let n = xs.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        a[(0, 0)] = 1.0;
        a[(n - 1, n - 1)] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            a[(i, i - 1)] = h0;
            a[(i, i)] = 2.0 * (h0 + h1);
            a[(i, i + 1)] = h1;
            b[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        let expected = a.lu().solve(&b).unwrap();
        let got = second_derivatives(&xs, &ys);
        for i in 0..n {
            assert!((expected[i] - got[i]).abs() < 1e-12);
        }
    }
}
