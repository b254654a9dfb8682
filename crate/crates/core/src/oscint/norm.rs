use super::OscError;
use crate::num::C64;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevreyNorm {
    pub value: f64,
    /// Contribution of the top eighth of the resolved modes.
    pub truncation: f64,
}

/// Samples f at n uniform points of [0, period).
pub fn sample_periodic(f: &dyn Fn(f64) -> C64, period: f64, n: usize) -> Vec<C64> {
    (0..n).map(|k| f(period * k as f64 / n as f64)).collect()
}

/// √(Σ_j (1+|j|)² e^{2T|j|^{1/s}} |â_j|²) over the modes resolved by the samples.
pub fn gevrey_norm(samples: &[C64], s: f64, t: f64) -> Result<GevreyNorm, OscError> {
    let n = samples.len();
    if n < 8 || !n.is_power_of_two() {
        return Err(OscError::BadParameter(format!("need 2^k ≥ 8 samples, got {n}")));
    }
    if !(s >= 1.0) || !(t >= 0.0) {
        return Err(OscError::BadParameter(format!("need s ≥ 1 and T ≥ 0, got s = {s}, T = {t}")));
    }
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut total = 0.0;
    let mut top = 0.0;
    let mut worst = (0i64, 0.0f64);
    for (k, c) in buf.iter().enumerate() {
        let j = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
        let aj = j.unsigned_abs() as f64;
        let w = (1.0 + aj).powi(2) * (2.0 * t * aj.powf(1.0 / s)).exp();
        let term = w * (c.norm() / n as f64).powi(2);
        total += term;
        if aj > 3.0 * n as f64 / 8.0 {
            top += term;
        }
        if term > worst.1 {
            worst = (j, term);
        }
    }
    let value = total.sqrt();
    let truncation = top.sqrt();
    if !value.is_finite() || truncation > 0.1 * value {
        return Err(OscError::NormDiverges { mode: worst.0 });
    }
    Ok(GevreyNorm { value, truncation })
}
