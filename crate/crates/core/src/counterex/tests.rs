use super::*;
use crate::num::c;

const GRID: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn one(l: f64) -> TriangularSystem {
    TriangularSystem::new(Symbol::one(), 1, l).unwrap()
}

/// Composite Simpson on the real line, the brute-force oracle.
fn simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, n: usize) -> C64 {
    let n = n + n % 2;
    let step = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + step * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0
}

fn psi_r(y: f64) -> C64 {
    c(y * y, 2.0 * y)
}

fn oracle_alpha(theta: &dyn Fn(f64) -> f64, x: f64, l: f64, h: f64) -> C64 {
    let f = |y: f64| ((psi_r(x) - psi_r(y)) / h).exp() * theta(y);
    -simpson(&f, x, l, 200_000) / h
}

#[test]
fn zero_theta_gives_zero_alpha() {
    let ts = TriangularSystem::new(Symbol::analytic("0").unwrap(), 1, 0.7).unwrap();
    let prof = alpha_solution(&ts, 0.05, Some(C64::new(0.0, 0.0))).unwrap();
    assert!(prof.sup() == 0.0);
    assert!(ts.criterion(0.4, 0.05).unwrap().value.norm() == 0.0);
}

#[test]
fn matrix_layout() {
    let ts = TriangularSystem::new(Symbol::analytic("x").unwrap(), 2, 1.0).unwrap();
    let m = ts.matrix(0.5, 0.1).unwrap();
    assert_eq!(m[(0, 0)], c(0.5, 1.0));
    assert_eq!(m[(1, 1)], c(-0.5, -1.0));
    assert!((m[(0, 1)] - c(0.005, 0.0)).norm() < 1e-15);
    assert_eq!(m[(1, 0)], C64::new(0.0, 0.0));
    assert!(matches!(ts.class(), SymbolClass::Analytic));
}

#[test]
fn analytic_alpha_matches_real_line_oracle() {
    let ts = TriangularSystem::new(Symbol::analytic("1 + x/2").unwrap(), 1, 0.5).unwrap();
    let h = 0.1;
    for x in [-0.5, -0.2, 0.0, 0.3, 0.45] {
        let a = ts.alpha(x, h, None).unwrap();
        let o = oracle_alpha(&|y| 1.0 + y / 2.0, x, 0.5, h);
        assert!((a - o).norm() < 1e-9 * (1.0 + o.norm()), "x = {x}: {a} vs {o}");
    }
}

#[test]
fn general_initial_value_solves_the_ode() {
    let ts = one(0.6);
    let h = 0.1;
    let a0 = c(0.3, -0.2);
    assert!((ts.alpha(0.0, h, Some(a0)).unwrap() - a0).norm() < 1e-12);
    for x in [-0.4, 0.2] {
        let e = 1e-4;
        let f = |t: f64| ts.alpha(t, h, Some(a0)).unwrap();
        let d = (f(x - 2.0 * e) - f(x + 2.0 * e) + (f(x + e) - f(x - e)) * 8.0) / (12.0 * e);
        let r = d * h - c(2.0 * x, 2.0) * f(x) - 1.0;
        assert!(r.norm() < 1e-7, "x = {x}: residual {}", r.norm());
    }
}

#[test]
fn cutoff_alpha_matches_oracle() {
    let h = 0.1;
    let cr = TriangularSystem::new(Symbol::Cr { r: 2 }, 1, 0.5).unwrap();
    let gv = TriangularSystem::new(Symbol::gevrey_s(2.0), 1, 0.5).unwrap();
    let tc = |y: f64| if y > 0.0 { y * y } else { 0.0 };
    let tg = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    for x in [-0.5, -0.1, 0.05, 0.3] {
        let (a, o) = (cr.alpha(x, h, None).unwrap(), oracle_alpha(&tc, x, 0.5, h));
        assert!((a - o).norm() < 1e-9 * (1.0 + o.norm()), "cr x = {x}: {a} vs {o}");
        let (a, o) = (gv.alpha(x, h, None).unwrap(), oracle_alpha(&tg, x, 0.5, h));
        assert!((a - o).norm() < 1e-9 * (1.0 + o.norm()), "gevrey x = {x}: {a} vs {o}");
    }
}

#[test]
fn criterion_matches_oracle() {
    let h = 0.1;
    let gv = TriangularSystem::new(Symbol::gevrey_s(2.0), 1, 0.5).unwrap();
    for x in [0.2, 0.5] {
        let q = one(0.5).criterion(x, h).unwrap().value;
        let o = simpson(&|y| ((c(x * x, 0.0) - psi_r(y)) / h).exp(), -x, x, 200_000) / h;
        assert!((q - o).norm() < 1e-9 * (1.0 + o.norm()), "{q} vs {o}");
        let q = gv.criterion(x, h).unwrap().value;
        let o = simpson(&|y| ((c(x * x, 0.0) - psi_r(y)) / h).exp() * (-1.0 / y).exp(), 1e-300, x, 200_000) / h;
        assert!((q - o).norm() < 1e-9 * (1.0 + o.norm()), "{q} vs {o}");
    }
}

#[test]
fn short_interval_alpha_bounded() {
    let ts = one(0.5);
    for h in [0.1, 0.05, 0.025] {
        let s = alpha_solution(&ts, h, None).unwrap().sup();
        assert!(s <= 5.0, "h = {h}: sup |α| = {s}");
    }
}

#[test]
fn long_interval_growth_rate() {
    let ts = one(1.5);
    let s = alpha_solution(&ts, 0.025, None).unwrap().sup();
    let rate = 0.025 * s.ln();
    assert!((rate - 1.25).abs() < 0.15 * 1.25, "h log sup |α| = {rate}");
}

#[test]
fn verdict_bounded_below_one() {
    let v = boundedness_certificate(&one(0.9), &GRID, DEFAULT_BOUND).unwrap();
    assert!(v.bounded, "{:?} {:?}", v.sup_ratio, v.sup_alpha);
    assert!(v.consistent());
    assert!(v.sup_alpha.iter().all(|s| *s <= DEFAULT_BOUND));
}

#[test]
fn verdict_unbounded_above_one() {
    let v = boundedness_certificate(&one(1.5), &GRID, DEFAULT_BOUND).unwrap();
    assert!(!v.bounded && v.consistent());
    let g = v.growth.unwrap();
    assert!((g.g - 1.25).abs() < 0.15 * 1.25 && g.residual < 0.15, "{g:?}");
}

#[test]
fn onset_is_monotone() {
    let gs: Vec<f64> = [1.1, 1.3, 1.5]
        .iter()
        .map(|l| boundedness_certificate(&one(*l), &GRID, DEFAULT_BOUND).unwrap().growth.unwrap().g)
        .collect();
    assert!(gs[0] <= gs[1] && gs[1] <= gs[2], "{gs:?}");
    for (g, l) in gs.iter().zip([1.1f64, 1.3, 1.5]) {
        assert!((g - (l * l - 1.0)).abs() < 0.15 * (l * l - 1.0), "L = {l}: g = {g}");
    }
}

#[test]
fn gevrey_verdict_unbounded() {
    let ts = TriangularSystem::new(Symbol::gevrey_s(2.0), 1, 0.5).unwrap();
    let v = boundedness_certificate(&ts, &GRID, DEFAULT_BOUND).unwrap();
    assert!(!v.bounded && v.consistent(), "{:?}", v.sup_ratio);
    let g = v.growth.unwrap();
    assert!(g.g > 0.0 && g.residual < 0.15, "{g:?}");
    // ρ(L, h) against h^{3/4} e^{L²/h − 2/√h}/h
    for h in GRID {
        let r = ts.criterion(0.5, h).unwrap().value.norm();
        let model = h.powf(0.75) * (0.25 / h - 2.0 / h.sqrt()).exp() / h;
        assert!((r / model).ln().abs() < 1.0, "h = {h}: {r} vs {model}");
    }
}

#[test]
fn cr_examples() {
    let v = cr_counterexample(2, 0.5, &GRID).unwrap();
    assert!(!v.bounded && v.consistent());
    let v = cr_counterexample(2, 0.5, &[0.05, 0.025, 0.0125, 0.00625]).unwrap();
    let g = v.growth.unwrap();
    assert!((g.g - 0.25).abs() < 0.15 * 0.25, "{g:?}");
    let v = cr_counterexample(5, 0.5, &GRID).unwrap();
    assert!(!v.bounded);
}

#[test]
fn triangular_reduction_sound() {
    let ts = one(0.9);
    for h in [0.1, 0.05] {
        let chk = triangular_check(&ts, h).unwrap();
        assert!(chk.offdiag_residual <= 1e-8, "h = {h}: {chk:?}");
    }
}

#[test]
fn resonance_examples() {
    let r = singular_resonance(&[C64::new(1.0, 0.0)], 0.5);
    assert!(!r.resonant);
    assert!((r.alpha_coeffs[1] - c(-2.0, 0.0)).norm() < 1e-15);
    assert!(singular_resonance(&[C64::new(1.0, 0.0)], 1.0).resonant);
    let r = singular_resonance(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 1.0 / 3.0);
    assert!(r.resonant && r.failing_index == Some(3));
    let z = singular_resonance(&[C64::new(0.0, 0.0); 4], 0.25);
    assert!(!z.resonant && z.alpha_coeffs.iter().all(|a| a.norm() == 0.0));
}
