use nalgebra::{DMatrix, DVector};

use super::{squeeze_head, Forecaster, InputSpec, ModelKind};
use crate::autodiff::{Bound, Graph, ParamId, ParamSet, Tensor, Var};
use crate::datapipe::{one_hot_code, Batch, SupervisedDataset};
use crate::error::{Error, Result};

/// Diagonal damping added to the normal equations.
pub const LR_RIDGE: f64 = 1e-8;

/// Regression features of one window: an intercept, every numeric input of
/// every step, then one-hot codes of the last step's categorical channels.
/// The weather one-hot has no slot for the unknown code.
pub fn lr_design_row(num: &[f64], last_cat: &[usize], cardinalities: [usize; 4]) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + num.len() + cardinalities.iter().sum::<usize>());
    row.push(1.0);
    row.extend_from_slice(num);
    for (c, (&code, &card)) in last_cat.iter().zip(&cardinalities).enumerate() {
        let width = if c == 3 { card - 1 } else { card };
        row.extend(one_hot_code(code, width));
    }
    row
}

/// Ordinary least squares on [`lr_design_row`] features.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    spec: InputSpec,
    params: ParamSet,
    beta: ParamId,
}

impl LinearRegression {
    pub fn new(spec: InputSpec) -> Self {
        let mut params = ParamSet::new();
        let beta = params.add_zeros("beta", &[1, Self::n_features(&spec)]);
        Self { spec, params, beta }
    }

    pub fn n_features(spec: &InputSpec) -> usize {
        1 + spec.history * spec.n_num + spec.cat_cardinalities.iter().sum::<usize>() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        self.params.value(self.beta).data()
    }

    pub fn set_coefficients(&mut self, beta: &[f64]) -> Result<()> {
        let dst = self.params.value_mut(self.beta).data_mut();
        if dst.len() != beta.len() {
            return Err(Error::Shape(format!("expected {} coefficients, got {}", dst.len(), beta.len())));
        }
        dst.copy_from_slice(beta);
        Ok(())
    }

    fn design(&self, batch: &Batch) -> Vec<f64> {
        let (t, c) = (batch.history, batch.n_num);
        let mut out = Vec::with_capacity(batch.size * Self::n_features(&self.spec));
        for i in 0..batch.size {
            let last = (i + 1) * t - 1;
            let cat: Vec<usize> = batch.x_cat.iter().map(|ch| ch[last]).collect();
            out.extend(lr_design_row(&batch.x_num[i * t * c..(i + 1) * t * c], &cat, self.spec.cat_cardinalities));
        }
        out
    }
}

/// Solves `(A^T A + ridge I) beta = A^T y` for row-major `A` with `k` columns.
pub(crate) fn solve_normal_equations(a: &[f64], y: &[f64], k: usize, ridge: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 || a.len() != n * k {
        return Err(Error::Shape(format!("design of {} values for {n} rows of {k} features", a.len())));
    }
    let a = DMatrix::from_row_slice(n, k, a);
    let y = DVector::from_column_slice(y);
    let mut ata = a.transpose() * &a;
    for i in 0..k {
        ata[(i, i)] += ridge;
    }
    let aty = a.transpose() * y;
    let beta = match ata.clone().cholesky() {
        Some(ch) => ch.solve(&aty),
        None => ata
            .lu()
            .solve(&aty)
            .ok_or_else(|| Error::Data("normal equations are singular".into()))?,
    };
    Ok(beta.iter().copied().collect())
}

impl Forecaster for LinearRegression {
    fn kind(&self) -> ModelKind {
        ModelKind::Lr
    }

    fn spec(&self) -> &InputSpec {
        &self.spec
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, bound: &Bound, batch: &Batch) -> Result<Var> {
        self.spec.check(batch)?;
        let k = Self::n_features(&self.spec);
        let x = g.constant(Tensor::new(vec![batch.size, k], self.design(batch))?);
        let y = g.affine(x, bound.get(self.beta), None)?;
        squeeze_head(g, y, batch.size)
    }

    fn fit_closed_form(&mut self, train: &SupervisedDataset) -> Result<bool> {
        let indices: Vec<usize> = (0..train.len()).collect();
        let batch = train.batch(&indices);
        self.spec.check(&batch)?;
        let k = Self::n_features(&self.spec);
        let beta = solve_normal_equations(&self.design(&batch), &batch.y, k, LR_RIDGE)?;
        self.set_coefficients(&beta)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::dataset;
    use super::*;

    #[test]
    fn affine_map_by_hand() {
        // beta0 = 1, beta1 = 2, x = 3
        let b = solve_normal_equations(&[1.0, 0.0, 1.0, 1.0], &[1.0, 3.0], 2, 0.0).unwrap();
        let y = b[0] + b[1] * 3.0;
        assert!((y - 7.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_exact_slope() {
        let xs = [0.5, 1.0, 2.0, 3.5, 4.0, 7.0];
        let a: Vec<f64> = xs.iter().flat_map(|x| [1.0, *x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let b = solve_normal_equations(&a, &y, 2, LR_RIDGE).unwrap();
        assert!((b[1] - 2.0).abs() < 1e-8);
        assert!(b[0].abs() < 1e-8);
    }

    #[test]
    fn five_point_oracle() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.2, 2.8, 4.5, 3.7, 5.5];
        // The damped 2x2 normal equations solved by Cramer's rule.
        let n = 5.0 + LR_RIDGE;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum::<f64>() + LR_RIDGE;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let intercept = (sy * sxx - sx * sxy) / det;
        let slope = (n * sxy - sx * sy) / det;
        let a: Vec<f64> = x.iter().flat_map(|v| [1.0, *v]).collect();
        let b = solve_normal_equations(&a, &y, 2, LR_RIDGE).unwrap();
        assert!((b[0] - intercept).abs() < 1e-8);
        assert!((b[1] - slope).abs() < 1e-8);
        // Undamped least squares: slope 0.75, intercept 1.49.
        assert!((slope - 0.75).abs() < 1e-6 && (intercept - 1.49).abs() < 1e-6);
    }

    #[test]
    fn noiseless_linear_target_fits_exactly() {
        let ds = dataset(200, 3);
        let spec = InputSpec::from_dataset(&ds).unwrap();
        let mut m = LinearRegression::new(spec);
        let k = LinearRegression::n_features(m.spec());
        let truth: Vec<f64> = (0..k).map(|j| ((j * 37 % 11) as f64 - 5.0) * 0.1).collect();
        m.set_coefficients(&truth).unwrap();
        let target = super::super::predict(&m, &ds, 64).unwrap();
        // Rebuild the rows with the generated target and refit.
        let mut rows = (*ds.rows).clone();
        for (i, y) in target.iter().enumerate() {
            rows.target[ds.target_row(i)] = *y;
        }
        let ds2 = SupervisedDataset {
            rows: std::sync::Arc::new(rows),
            ..ds.clone()
        };
        let mut fit = LinearRegression::new(InputSpec::from_dataset(&ds2).unwrap());
        assert!(fit.fit_closed_form(&ds2).unwrap());
        let p = super::super::predict(&fit, &ds2, 64).unwrap();
        let mae = p.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64;
        assert!(mae < 1e-8, "mae {mae}");
    }

    #[test]
    fn unknown_weather_is_all_zero() {
        let row = lr_design_row(&[0.5], &[0, 0, 0, 20], [12, 7, 24, 21]);
        assert_eq!(row.len(), 1 + 1 + 12 + 7 + 24 + 20);
        assert_eq!(row[2..].iter().sum::<f64>(), 3.0);
    }
}
