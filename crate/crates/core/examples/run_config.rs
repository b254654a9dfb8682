//! Runs an experiment config through the library API and writes its artifacts.
//!
//! cargo run --release --example run_config -- configs/examples/resonance_scan.json out/

use semidiag::experiment::{run_to_dir, Prepared};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/examples/resonance_scan.json").into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| std::env::temp_dir().join("semidiag-run-config").to_string_lossy().into_owned()));
    let prepared = Prepared::from_path(&config)?;
    let report = run_to_dir(&prepared, &out)?;
    for (k, v) in &report.metrics {
        println!("{k:<28} {v}");
    }
    for a in &report.assertions {
        println!("{} {} {:?} {}", if a.passed { "PASS" } else { "FAIL" }, a.metric, a.op, a.value);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
