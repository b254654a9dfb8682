//! Linear least squares and log-log slope fits used by every rate measurement.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Max absolute residual of the fitted model.
    pub max_residual: f64,
}

/// Solves min ‖X c − y‖₂ where `rows[i]` is the i-th row of X.
pub fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Option<LinearFit> {
    let m = rows.len();
    if m == 0 || m != y.len() {
        return None;
    }
    let n = rows[0].len();
    if m < n {
        return None;
    }
    let x = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let c = svd.solve(&yv, 1e-13).ok()?;
    let r = &x * &c - &yv;
    Some(LinearFit { coef: c.iter().copied().collect(), max_residual: r.amax() })
}

/// Slope of log(v) against log(h).
pub fn loglog_slope(h: &[f64], v: &[f64]) -> f64 {
    let rows: Vec<Vec<f64>> = h.iter().map(|h| vec![1.0, h.ln()]).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    lstsq(&rows, &y).map(|f| f.coef[1]).unwrap_or(f64::NAN)
}

/// Slope and intercept of y against x.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let rows: Vec<Vec<f64>> = x.iter().map(|x| vec![1.0, *x]).collect();
    lstsq(&rows, y).map(|f| (f.coef[1], f.coef[0])).unwrap_or((f64::NAN, f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let h = [0.1f64, 0.05, 0.025, 0.0125];
        let v: Vec<f64> = h.iter().map(|h| 3.0 * h.powf(2.5)).collect();
        assert!((loglog_slope(&h, &v) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn three_regressor_fit() {
        let h = [0.2f64, 0.1, 0.05, 0.025, 0.0125];
        let rows: Vec<Vec<f64>> = h.iter().map(|h| vec![1.0, h.ln(), -h.powf(-0.5)]).collect();
        let y: Vec<f64> = h.iter().map(|h| 0.3 + 0.75 * h.ln() - 2.0 * h.powf(-0.5)).collect();
        let f = lstsq(&rows, &y).unwrap();
        assert!((f.coef[1] - 0.75).abs() < 1e-10 && (f.coef[2] - 2.0).abs() < 1e-10);
    }
}
