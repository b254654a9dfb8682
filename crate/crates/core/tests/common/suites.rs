//! Property suites over the invariant checkers, run on a deterministic proptest runner.

use super::strategies::*;
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use semidiag::checks;
use semidiag::exactdiag::{solve_finite, Diamond, SolveOptions, System};
use semidiag::mexpr::{Expression, MatrixFunction};
use semidiag::num::C64;
use semidiag::oscint::{Contour, Symbol};
use semidiag::spectral::GroupingRule;
use std::cell::Cell;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub tol: f64,
    pub cases: u32,
    pub skipped: u32,
    pub worst: f64,
    pub failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn run<S: Strategy>(name: &'static str, tol: f64, cases: u32, strategy: S, check: impl Fn(S::Value) -> Result<Option<f64>, String>) -> SuiteReport {
    let config = Config { cases, failure_persistence: None, max_global_rejects: 4 * cases, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let worst = Cell::new(0.0f64);
    let ran = Cell::new(0u32);
    let skipped = Cell::new(0u32);
    let result = runner.run(&strategy, |v| match check(v) {
        Ok(Some(d)) => {
            ran.set(ran.get() + 1);
            worst.set(worst.get().max(d));
            if d <= tol {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("defect {d:.3e} above {tol:.0e}")))
            }
        }
        Ok(None) => {
            skipped.set(skipped.get() + 1);
            Err(TestCaseError::reject("outside the suite's domain"))
        }
        Err(e) => Err(TestCaseError::fail(e)),
    });
    SuiteReport { name, tol, cases: ran.get(), skipped: skipped.get(), worst: worst.get(), failure: result.err().map(|e| e.to_string()) }
}

pub fn projector_algebra(cases: u32) -> SuiteReport {
    run("projector algebra", 1e-12, cases, split_matrix(), |m| checks::projector_defect(&m, &GroupingRule::SignOfRealPart).map(Some).map_err(|e| e.to_string()))
}

pub fn dichotomy_algebra(cases: u32) -> SuiteReport {
    run("three-way projector algebra", 1e-12, cases, dichotomy_matrix(), |m| checks::dichotomy_defect(&m, 0.1).map(Some).map_err(|e| e.to_string()))
}

pub fn similarity(cases: u32) -> SuiteReport {
    run("projectors under similarity", 1e-8, cases, split_and_similarity(), |(m, s, si)| checks::similarity_defect(&m, &s, &si).map(Some).map_err(|e| e.to_string()))
}

pub fn sylvester_vs_kronecker(cases: u32) -> SuiteReport {
    run("Sylvester vs Kronecker", 1e-10, cases, sylvester_blocks(), |(a11, a22, c12, c21)| {
        checks::sylvester_kron_gap(&a11, &a22, &c12, &c21).map(Some).map_err(|e| e.to_string())
    })
}

/// Cases whose ∫|f| exceeds 10 |∫f| are skipped.
pub fn contour_independence(cases: u32) -> SuiteReport {
    run("Cauchy contour independence", 1e-10, cases, contour_case(), |c| {
        let phi = Expression::parse(&c.phase).map_err(|e| e.to_string())?;
        let a = Symbol::analytic(&c.amplitude).map_err(|e| e.to_string())?;
        let (l, r) = (C64::new(-1.0, 0.0), C64::new(1.0, 0.0));
        let straight = Contour::segment(l, r).map_err(|e| e.to_string())?;
        let bent = Contour::new(vec![l, c.via[0], c.via[1], r]).map_err(|e| e.to_string())?;
        let g = checks::contour_gap(&a, &phi, &straight, &bent, c.h).map_err(|e| e.to_string())?;
        Ok((g.cancellation <= 10.0).then_some(g.gap))
    })
}

pub fn kato_invariance(cases: u32) -> SuiteReport {
    run("Kato invariance", 1e-8, cases, kato_family(), |(n, src)| {
        let refs: Vec<&str> = src.iter().map(String::as_str).collect();
        let a = MatrixFunction::from_strs(n, &refs).map_err(|e| e.to_string())?;
        let grid: Vec<C64> = (0..=200).map(|i| C64::new(i as f64 / 200.0, 0.0)).collect();
        checks::kato_invariance(&a, 0.1, grid, &GroupingRule::SignOfRealPart).map(Some).map_err(|e| e.to_string())
    })
}

pub fn conjugator_certificates(cases: u32) -> SuiteReport {
    run("conjugator certificates", 1e-8, cases, conjugator_case(), |c| {
        let to_fn = |s: &[String]| {
            let refs: Vec<&str> = s.iter().map(String::as_str).collect();
            MatrixFunction::from_strs(2, &refs).map_err(|e| e.to_string())
        };
        let sys = System::new(to_fn(&c.a)?, Some(to_fn(&c.theta)?), 1, 1).map_err(|e| e.to_string())?;
        let conj = solve_finite(&sys, C64::new(0.0, 0.0), c.h, &Diamond::new(0.2, 0.1), &SolveOptions::default()).map_err(|e| e.to_string())?;
        let cert = checks::certificate(&conj);
        if cert.is_nan() {
            return Err("no certified points".into());
        }
        Ok(Some(cert))
    })
}

pub type Suite = fn(u32) -> SuiteReport;

pub const ALL: [Suite; 7] = [projector_algebra, dichotomy_algebra, similarity, sylvester_vs_kronecker, contour_independence, kato_invariance, conjugator_certificates];
