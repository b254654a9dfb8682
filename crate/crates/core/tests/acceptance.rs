//! Acceptance run: one PASS/FAIL line per criterion, tolerances and runtime budgets pinned here.

mod common;

use common::suites;
use semidiag::experiment::Prepared;
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Clone, Copy)]
enum Pred {
    Le(f64),
    Ge(f64),
    Near(f64, f64),
    True,
}

impl Pred {
    fn holds(self, v: &Value) -> bool {
        match (self, v) {
            (Pred::True, Value::Bool(b)) => *b,
            (Pred::Le(t), v) => v.as_f64().is_some_and(|x| x <= t),
            (Pred::Ge(t), v) => v.as_f64().is_some_and(|x| x >= t),
            (Pred::Near(c, tol), v) => v.as_f64().is_some_and(|x| (x - c).abs() <= tol),
            _ => false,
        }
    }

    fn describe(self) -> String {
        match self {
            Pred::Le(t) if t < 1e-3 => format!("≤ {t:e}"),
            Pred::Le(t) => format!("≤ {t}"),
            Pred::Ge(t) => format!("≥ {t}"),
            Pred::Near(c, tol) => format!("= {c} ± {tol}"),
            Pred::True => "true".into(),
        }
    }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget_s: f64,
    runs: &'static [(&'static str, &'static [(&'static str, Pred)])],
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: "1",
        title: "repeated-diagonalization order law",
        budget_s: 30.0,
        runs: &[("01_repeated_order_law", &[("order_slope_1", Pred::Near(1.0, 0.15)), ("order_slope_2", Pred::Near(2.0, 0.15)), ("order_slope_3", Pred::Near(3.0, 0.15))])],
    },
    Criterion {
        id: "2",
        title: "exact conjugator at a finite point",
        budget_s: 60.0,
        runs: &[("02_exact_finite", &[("certificate_max", Pred::Le(1e-8)), ("picard_ratio_max", Pred::Le(0.9)), ("t_minus_i_slope", Pred::Near(1.0, 0.15))])],
    },
    Criterion {
        id: "3",
        title: "exact conjugator at infinity",
        budget_s: 60.0,
        runs: &[("03_exact_infinity", &[("closed_form_error_max", Pred::Le(1e-8)), ("certificate_max", Pred::Le(1e-8)), ("decay_rate_min", Pred::Ge(0.9))])],
    },
    Criterion {
        id: "4",
        title: "singular point series and resonances",
        budget_s: 10.0,
        runs: &[("04_singular_point", &[("series_error_max", Pred::Le(1e-8)), ("certificate_max", Pred::Le(1e-8)), ("resonance_exact", Pred::True)])],
    },
    Criterion {
        id: "5",
        title: "oscillatory Gaussian oracle",
        budget_s: 5.0,
        runs: &[("05_gaussian_oracle", &[("closed_form_rel_error_max", Pred::Le(1e-6))])],
    },
    Criterion {
        id: "6",
        title: "three quadratic-phase regimes",
        budget_s: 30.0,
        runs: &[
            ("06a_endpoint_regime", &[("endpoint_ratio_max", Pred::Le(10.0))]),
            ("06b_saddle_constant", &[("leading_constant_rel_error", Pred::Le(0.02))]),
            ("06c_vanishing_amplitude", &[("slope_vs_reference", Pred::Near(0.5, 0.1))]),
        ],
    },
    Criterion {
        id: "7",
        title: "Gevrey and C^r decay laws",
        budget_s: 120.0,
        runs: &[
            ("07a_gevrey_law", &[("inv_s", Pred::Near(0.5, 0.05)), ("c", Pred::Near(2.0, 0.2)), ("p", Pred::Near(0.75, 0.1))]),
            ("07b_cr_power_law", &[("p_r1", Pred::Near(1.0, 0.15)), ("p_r3", Pred::Near(3.0, 0.15))]),
        ],
    },
    Criterion {
        id: "8",
        title: "counterexample dichotomy",
        budget_s: 120.0,
        runs: &[
            ("08a_counterexample_short", &[("bounded", Pred::True), ("consistent", Pred::True), ("offdiag_residual_max", Pred::Le(1e-8))]),
            ("08b_counterexample_long", &[("unbounded", Pred::True), ("growth_g", Pred::Near(1.25, 0.2)), ("consistent", Pred::True)]),
            ("08c_counterexample_gevrey", &[("unbounded", Pred::True), ("consistent", Pred::True)]),
            ("08d_counterexample_cr", &[("unbounded", Pred::True), ("consistent", Pred::True)]),
        ],
    },
    Criterion {
        id: "9",
        title: "stable manifold",
        budget_s: 30.0,
        runs: &[
            ("09a_manifold_logistic", &[("closed_form_error_max", Pred::Le(1e-8)), ("decay_margin", Pred::Ge(-0.05))]),
            ("09b_manifold_saddle", &[("tangency_slope", Pred::Near(2.0, 0.2))]),
        ],
    },
];

const PROPERTY_BUDGET_S: f64 = 600.0;
const PROPERTY_CASES: u32 = 256;
const CERTIFICATE_CASES: u32 = 48;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/acceptance").join(format!("{name}.json"))
}

fn show(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
        None => v.to_string(),
    }
}

fn run_criterion(c: &Criterion) -> bool {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for (file, checks) in c.runs {
        let result = Prepared::from_path(&config_path(file)).and_then(|p| p.run());
        let (report, _) = match result {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                details.push(format!("{file}: error: {e}"));
                continue;
            }
        };
        for (metric, pred) in *checks {
            let v = report.metrics.get(*metric).cloned().unwrap_or(Value::Null);
            let pass = pred.holds(&v);
            ok &= pass;
            details.push(format!("{} {file}: {metric} = {} (want {})", if pass { "ok  " } else { "MISS" }, show(&v), pred.describe()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let in_budget = secs <= c.budget_s;
    ok &= in_budget;
    println!("{} criterion {}: {} ({secs:.2} s, budget {} s)", if ok { "PASS" } else { "FAIL" }, c.id, c.title, c.budget_s);
    for d in details {
        println!("      {d}");
    }
    ok
}

fn run_properties() -> bool {
    let start = Instant::now();
    let reports: Vec<_> = suites::ALL
        .iter()
        .enumerate()
        .map(|(i, s)| s(if i + 1 == suites::ALL.len() { CERTIFICATE_CASES } else { PROPERTY_CASES }))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let ok = reports.iter().all(|r| r.passed() && r.cases > 0) && secs <= PROPERTY_BUDGET_S;
    println!("{} criterion 10: property suites ({secs:.2} s, budget {PROPERTY_BUDGET_S} s)", if ok { "PASS" } else { "FAIL" });
    for r in &reports {
        let status = if r.passed() { "ok  " } else { "MISS" };
        println!("      {status} {}: {} cases, {} skipped, worst defect {:.2e} (tol {:.0e})", r.name, r.cases, r.skipped, r.worst, r.tol);
        if let Some(f) = &r.failure {
            println!("           {f}");
        }
    }
    ok
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut passed = CRITERIA.iter().map(run_criterion).filter(|ok| *ok).count();
    passed += run_properties() as usize;
    let total = CRITERIA.len() + 1;
    println!("acceptance: {passed}/{total} criteria passed in {:.1} s", start.elapsed().as_secs_f64());
    if passed == total {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
