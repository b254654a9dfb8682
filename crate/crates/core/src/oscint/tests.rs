use super::*;
use crate::mexpr::Expression;
use crate::num::{c, C64};
use std::f64::consts::PI;

fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    2.0 / PI.sqrt() * sum
}

fn quad_phase() -> Expression {
    Expression::parse("-pow(x,2) - 2*i*x").unwrap()
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn gaussian_segment_matches_erf() {
    let h = 0.1;
    let phi = Expression::parse("-pow(x,2)").unwrap();
    let v = quad_contour(&Symbol::one(), &phi, &Contour::segment(c(-1.0, 0.0), c(1.0, 0.0)).unwrap(), h).unwrap();
    let exact = (PI * h).sqrt() * erf(1.0 / h.sqrt());
    assert!((v.value.re - exact).abs() < 1e-13 && v.value.im.abs() < 1e-15);
    assert!((exact - 0.5604991).abs() < 1e-5);
}

#[test]
fn shifted_gaussian_on_long_segment() {
    let h = 0.2;
    let seg = Contour::segment(c(-20.0, 0.0), c(20.0, 0.0)).unwrap();
    let v = quad_contour(&Symbol::one(), &quad_phase(), &seg, h).unwrap();
    let exact = c((PI * h).sqrt() * (-1.0 / h).exp(), 0.0);
    assert!(rel(v.value, exact) < 1e-10);
    assert!((exact.re - 0.0053413).abs() < 1e-6);
    let back = quad_contour(&Symbol::one(), &quad_phase(), &seg.reversed(), h).unwrap();
    assert!((back.value + v.value).norm() < 1e-15);
}

#[test]
fn cauchy_independence_and_additivity() {
    let a = Symbol::analytic("cos(x) + pow(x,2)").unwrap();
    let phi = quad_phase();
    let h = 0.3;
    let p1 = Contour::new(vec![c(-1.5, 0.0), c(0.0, -0.7), c(1.5, 0.0)]).unwrap();
    let p2 = Contour::new(vec![c(-1.5, 0.0), c(-1.0, 0.4), c(1.0, -1.2), c(1.5, 0.0)]).unwrap();
    let v1 = quad_contour(&a, &phi, &p1, h).unwrap().value;
    let v2 = quad_contour(&a, &phi, &p2, h).unwrap().value;
    assert!(rel(v1, v2) < 1e-10);
    let left = Contour::segment(c(-1.5, 0.0), c(0.0, -0.7)).unwrap();
    let right = Contour::segment(c(0.0, -0.7), c(1.5, 0.0)).unwrap();
    let sum = quad_contour(&a, &phi, &left, h).unwrap().value + quad_contour(&a, &phi, &right, h).unwrap().value;
    assert!(rel(sum, v1) < 1e-13);
    assert_eq!(left.then(&right).unwrap().vertices, p1.vertices);
}

#[test]
fn saddle_quadrature_gaussian() {
    for h in [0.2, 0.1, 0.05] {
        let v = saddle_deformed_quad(&Symbol::one(), &quad_phase(), 2.0, h, None).unwrap();
        let exact = c((PI * h).sqrt() * (-1.0 / h).exp(), 0.0);
        // truncation to [−2, 2] costs O(e^{−3/h}) relative
        assert!(rel(v.value, exact) < 1e-12 + 10.0 * (-3.0 / h).exp(), "h={h}: {}", rel(v.value, exact));
    }
}

#[test]
fn first_order_zero_is_endpoint_dominated() {
    // (y+i) e^{−(y+i)²/h} has antiderivative −(h/2)e^{−(y+i)²/h}: I = i h e^{−x²/h} sin(2x/h)
    let a = Symbol::analytic("x + i").unwrap();
    // the pass at −i has height e^{−1/h}, so the reported error bar carries the cancellation
    for (x, h) in [(2.0, 0.1), (2.0, 0.05), (1.5, 0.2), (1.2, 0.1)] {
        let v = saddle_deformed_quad(&a, &quad_phase(), x, h, None).unwrap();
        let exact = c(0.0, h * (-x * x / h).exp() * (2.0 * x / h).sin());
        assert!((v.value - exact).norm() <= 10.0 * v.error + 1e-12 * exact.norm(), "x={x} h={h}");
        if x < 1.6 {
            assert!(rel(v.value, exact) < 1e-9, "x={x} h={h}");
        }
    }
}

#[test]
fn second_order_zero_gives_three_halves_power() {
    // ∫_ℝ (y+i)² e^{−(y+i)²/h} dy = √π h^{3/2}/2; the [−2,2] truncation adds O(e^{−3/h}) relative
    let a = Symbol::analytic("pow(x+i,2)").unwrap();
    for h in [0.1, 0.05] {
        let v = saddle_deformed_quad(&a, &quad_phase(), 2.0, h, None).unwrap();
        let exact = c(PI.sqrt() * h.powf(1.5) / 2.0 * (-1.0 / h).exp(), 0.0);
        assert!(rel(v.value, exact) < 1e-6, "h={h}: {}", rel(v.value, exact));
    }
}

#[test]
fn short_interval_bounded_by_endpoint_law() {
    for h in [0.2, 0.1, 0.05, 0.025] {
        let v = saddle_deformed_quad(&Symbol::one(), &quad_phase(), 0.5, h, None).unwrap();
        assert!(v.value.norm() <= 10.0 * h * (-0.25 / h).exp());
    }
}

#[test]
fn stationary_phase_examples() {
    let h = 0.07;
    let g = stationary_phase_estimate(&Symbol::one(), &Expression::parse("-pow(x,2)").unwrap(), c(0.0, 0.0), h, c(1.0, 0.0)).unwrap();
    assert!(rel(g, c((PI * h).sqrt(), 0.0)) < 1e-8);
    let s = stationary_phase_estimate(&Symbol::one(), &quad_phase(), c(0.0, -1.0), h, c(1.0, 0.0)).unwrap();
    assert!(rel(s, c((PI * h).sqrt() * (-1.0 / h).exp(), 0.0)) < 1e-8);
    let z = stationary_phase_estimate(&Symbol::analytic("x + i").unwrap(), &quad_phase(), c(0.0, -1.0), h, c(1.0, 0.0)).unwrap();
    assert_eq!(z, c(0.0, 0.0));
    assert!(matches!(
        stationary_phase_estimate(&Symbol::one(), &Expression::parse("x").unwrap(), c(0.0, 0.0), h, c(1.0, 0.0)),
        Err(OscError::DegenerateSaddle(_))
    ));
}

#[test]
fn gevrey_integral_matches_real_axis() {
    for (theta, h) in [(1.0, 0.2), (2.0, 0.3), (0.5, 0.25)] {
        let deformed = gevrey_halfline_integral(theta, h).unwrap();
        let f = |y: C64| -> Result<C64, crate::mexpr::EvalError> {
            if y.re <= 0.0 {
                return Ok(c(0.0, 0.0));
            }
            Ok(((y * y + c(0.0, 2.0) * y) / -h - y.powf(-theta)).exp())
        };
        let direct = quad_fn(&f, &Contour::segment(c(0.0, 0.0), c(8.0, 0.0)).unwrap()).unwrap();
        assert!((deformed - direct.value).norm() < 1e-9 * deformed.norm().max(direct.error), "θ={theta} h={h}: {deformed} vs {}", direct.value);
    }
}

#[test]
fn gevrey_law_for_s_two() {
    let hs = [0.05, 0.025, 0.0125, 0.00625, 0.003125];
    let fit = gevrey_halfline_asymptotics(1.0, &hs).unwrap();
    assert!((fit.c - 2.0).abs() <= 0.2, "c = {}", fit.c);
    assert!((fit.p - 0.75).abs() <= 0.1, "p = {}", fit.p);
    let inv = fit.inv_s_free.unwrap();
    assert!((inv - 0.5).abs() <= 0.05, "1/s = {inv}");
}

#[test]
fn gevrey_stretch_exponent_ordered_by_theta() {
    let hs = [0.05, 0.025, 0.0125, 0.00625, 0.003125];
    let inv: Vec<f64> = [4.0, 2.0, 1.0].iter().map(|t| gevrey_halfline_asymptotics(*t, &hs).unwrap().inv_s_free.unwrap()).collect();
    assert!(inv[0] > inv[1] && inv[1] > inv[2], "{inv:?}");
}

#[test]
fn cr_integral_follows_boundary_law() {
    // leading term r!(h/2i)^{r+1} from the endpoint y = 0
    for r in [1u32, 3] {
        let h = 0.005;
        let v = cr_halfline_integral(r, 2.0, h).unwrap();
        let fact: f64 = (1..=r).map(|k| k as f64).product();
        let lead = C64::new(h / 2.0, 0.0).powi(r as i32 + 1) * C64::new(0.0, -1.0).powi(r as i32 + 1) * fact;
        assert!(rel(v, lead) < 0.05 * r as f64, "r={r}: {}", rel(v, lead));
        let fit = cr_halfline_rate(r, &[0.05, 0.025, 0.0125, 0.00625, 0.003125]).unwrap();
        assert!((fit.p - (r + 1) as f64).abs() < 0.15, "r={r}: p={}", fit.p);
    }
}

#[test]
fn zero_signal_rejected() {
    assert!(matches!(fit_law(&[0.1, 0.05, 0.025], &[c(0.0, 0.0); 3], 0.5), Err(OscError::ZeroSignal)));
}

#[test]
fn gevrey_norm_examples() {
    let one = sample_periodic(&|_| c(1.0, 0.0), 2.0 * PI, 64);
    assert!((gevrey_norm(&one, 2.0, 1.5).unwrap().value - 1.0).abs() < 1e-14);
    let cosine = sample_periodic(&|y| c(y.cos(), 0.0), 2.0 * PI, 64);
    for t in [0.0, 0.5, 2.0] {
        let n = gevrey_norm(&cosine, 2.0, t).unwrap().value;
        assert!((n - 2f64.sqrt() * t.exp()).abs() < 1e-12 * n);
    }
    let theta = 1.0;
    let bump = |y: f64| {
        if y <= 0.0 || y >= 2.0 {
            c(0.0, 0.0)
        } else {
            c((-y.powf(-theta) - (2.0 - y).powf(-theta)).exp(), 0.0)
        }
    };
    let samples = sample_periodic(&bump, 4.0, 1024);
    let mut prev = 0.0;
    let mut diverged = false;
    for t in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        match gevrey_norm(&samples, 2.0, t) {
            Ok(n) => {
                assert!(!diverged && n.value > prev);
                prev = n.value;
            }
            Err(OscError::NormDiverges { .. }) => diverged = true,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(prev > 0.0 && diverged);
}
