//! Weighted linear regression via the normal equations, with a scaled ridge
//! fallback when the system is singular.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.n_cols() != self.coefficients.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.coefficients.len(),
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|row| self.predict_row(row)).collect())
    }
}

/// Minimize `Σ w_t (y_t - b0 - b·x_t)^2`.
pub fn fit_linear(x: &Matrix, y: &[f64], w: &[f64]) -> Result<LinearModel, ModelError> {
    if x.n_rows() != y.len() || y.len() != w.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} rows, {} targets, {} weights",
            x.n_rows(),
            y.len(),
            w.len()
        )));
    }
    if x.n_rows() < 2 {
        return Err(ModelError::InsufficientData { needed: 2, got: x.n_rows() });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) || w.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    let m = x.n_cols() + 1; // intercept term first
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    let mut phi = vec![0.0; m];
    for (i, row) in x.rows().enumerate() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        phi[0] = 1.0;
        phi[1..].copy_from_slice(row);
        for r in 0..m {
            for c in 0..m {
                a[r * m + c] += wi * phi[r] * phi[c];
            }
            b[r] += wi * phi[r] * y[i];
        }
    }
    let solution = match solve(&mut a.clone(), &mut b.clone(), m) {
        Some(beta) => beta,
        None => {
            // Ridge fallback scaled by the Gram trace.
            let trace: f64 = (0..m).map(|i| a[i * m + i]).sum();
            let lambda = 1e-8 * trace / m as f64;
            let mut a2 = a.clone();
            for i in 0..m {
                a2[i * m + i] += lambda;
            }
            solve(&mut a2, &mut b.clone(), m).ok_or(ModelError::SingularSystem)?
        }
    };
    Ok(LinearModel { intercept: solution[0], coefficients: solution[1..].to_vec() })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..m {
        let pivot_row = (col..m)
            .max_by(|&r1, &r2| a[r1 * m + col].abs().partial_cmp(&a[r2 * m + col].abs()).unwrap())?;
        if a[pivot_row * m + col].abs() < 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for c in 0..m {
                a.swap(col * m + c, pivot_row * m + c);
            }
            b.swap(col, pivot_row);
        }
        for row in col + 1..m {
            let factor = a[row * m + col] / a[col * m + col];
            if factor == 0.0 {
                continue;
            }
            for c in col..m {
                a[row * m + c] -= factor * a[col * m + c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut beta = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for c in row + 1..m {
            acc -= a[row * m + c] * beta[c];
        }
        beta[row] = acc / a[row * m + row];
    }
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let x = Matrix::from_rows(&rows);
        let model = fit_linear(&x, &y, &[1.0; 10]).unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(model.intercept.abs() < 1e-9);
    }

    #[test]
    fn weighted_three_point_fit_matches_normal_equations_oracle() {
        // Points (0,0), (1,1), (2,4) with weights (1, 2, 1).
        // Normal equations for y = b0 + b1 x:
        //   [Σw, Σwx; Σwx, Σwx²][b0, b1] = [Σwy, Σwxy]
        //   [4, 4; 4, 6][b0, b1] = [6, 10]  =>  b1 = 2, b0 = -1/2.
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let model = fit_linear(&x, &[0.0, 1.0, 4.0], &[1.0, 2.0, 1.0]).unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((model.intercept + 0.5).abs() < 1e-9);
    }

    #[test]
    fn constant_column_falls_back_to_ridge() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 3.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] + 1.0).collect();
        let x = Matrix::from_rows(&rows);
        let model = fit_linear(&x, &y, &[1.0; 8]).unwrap();
        assert!(model.coefficients.iter().all(|c| c.is_finite()));
        let preds = model.predict(&x).unwrap();
        for (p, t) in preds.iter().zip(&y) {
            assert!((p - t).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![50.0]]);
        let y = [1.0, 2.0, 3.0, 999.0];
        let w = [1.0, 1.0, 1.0, 0.0];
        let model = fit_linear(&x, &y, &w).unwrap();
        assert!((model.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((model.intercept - 1.0).abs() < 1e-9);
    }
}
