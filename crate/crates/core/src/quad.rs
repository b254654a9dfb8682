//! Gauss-Legendre rules and polynomial interpolation on their nodes.

use crate::num::C64;
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// nodes in increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A panel rule on [0, 1]: nodes, weights, barycentric weights and the
/// spectral differentiation and integration matrices for its nodes.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary: Vec<f64>,
    /// `diff[j][k]` = ℓ_k'(t_j) on [0,1].
    pub diff: Vec<Vec<f64>>,
    /// `integ[j][k]` = ∫_0^{t_j} ℓ_k.
    pub integ: Vec<Vec<f64>>,
    /// `diff_end[k]` = ℓ_k'(t) at t = 0 and t = 1.
    pub diff_left: Vec<f64>,
    pub diff_right: Vec<f64>,
}

pub const PANEL_NODES: usize = 16;

pub fn panel16() -> &'static PanelRule {
    static RULE: OnceLock<PanelRule> = OnceLock::new();
    RULE.get_or_init(|| PanelRule::new(PANEL_NODES))
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let nodes: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let weights: Vec<f64> = w.iter().map(|t| 0.5 * t).collect();
        let bary: Vec<f64> = (0..n)
            .map(|k| {
                let mut p = 1.0;
                for j in 0..n {
                    if j != k {
                        p *= nodes[k] - nodes[j];
                    }
                }
                1.0 / p
            })
            .collect();
        let mut diff = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                if k != j {
                    let v = bary[k] / bary[j] / (nodes[j] - nodes[k]);
                    diff[j][k] = v;
                    s += v;
                }
            }
            diff[j][j] = -s;
        }
        // integration matrix by an auxiliary Gauss rule on each [0, t_j]
        let (ax, aw) = gauss_legendre(n + 4);
        let mut integ = vec![vec![0.0; n]; n];
        for j in 0..n {
            let tj = nodes[j];
            for (xa, wa) in ax.iter().zip(&aw) {
                let s = 0.5 * tj * (xa + 1.0);
                let l = lagrange_basis(&nodes, &bary, s);
                for k in 0..n {
                    integ[j][k] += 0.5 * tj * wa * l[k];
                }
            }
        }
        let diff_left = lagrange_basis_derivative(&nodes, &bary, 0.0);
        let diff_right = lagrange_basis_derivative(&nodes, &bary, 1.0);
        PanelRule { nodes, weights, bary, diff, integ, diff_left, diff_right }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of all Lagrange basis polynomials at `t` (panel coordinate).
    pub fn basis(&self, t: f64) -> Vec<f64> {
        lagrange_basis(&self.nodes, &self.bary, t)
    }
}

pub fn lagrange_basis(nodes: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    for k in 0..n {
        if t == nodes[k] {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            return v;
        }
    }
    let mut l = 1.0;
    for x in nodes {
        l *= t - x;
    }
    (0..n).map(|k| l * bary[k] / (t - nodes[k])).collect()
}

/// Derivatives of the Lagrange basis at a point that is not a node.
pub fn lagrange_basis_derivative(nodes: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    let n = nodes.len();
    let l = lagrange_basis(nodes, bary, t);
    let s: f64 = nodes.iter().map(|x| 1.0 / (t - x)).sum();
    (0..n).map(|k| l[k] * (s - 1.0 / (t - nodes[k]))).collect()
}

/// Composite Gauss-Legendre integral of `f` along the segment [a, b] in ℂ
/// with `panels` equal panels.
pub fn segment_integral<F>(f: &F, a: C64, b: C64, panels: usize) -> C64
where
    F: Fn(C64) -> C64 + ?Sized,
{
    let rule = panel16();
    let d = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let z0 = a + d * p as f64;
        let mut s = C64::new(0.0, 0.0);
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            s += f(z0 + d * *t) * *w;
        }
        acc += s * d;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        for deg in 0..32 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn panel_matrices_are_exact_on_polynomials() {
        let r = panel16();
        let f: Vec<f64> = r.nodes.iter().map(|t| t.powi(7) - 3.0 * t).collect();
        for j in 0..r.len() {
            let t = r.nodes[j];
            let d: f64 = (0..r.len()).map(|k| r.diff[j][k] * f[k]).sum();
            let i: f64 = (0..r.len()).map(|k| r.integ[j][k] * f[k]).sum();
            assert!((d - (7.0 * t.powi(6) - 3.0)).abs() < 1e-11);
            assert!((i - (t.powi(8) / 8.0 - 1.5 * t * t)).abs() < 1e-14);
        }
        let dl: f64 = (0..r.len()).map(|k| r.diff_left[k] * f[k]).sum();
        let dr: f64 = (0..r.len()).map(|k| r.diff_right[k] * f[k]).sum();
        assert!((dl + 3.0).abs() < 1e-9);
        assert!((dr - 4.0).abs() < 1e-9);
    }
}
