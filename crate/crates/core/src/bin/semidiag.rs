use clap::{Parser, Subcommand};
use semidiag::experiment::{run_to_dir, ExperimentError, Prepared};
use semidiag::mexpr::builtin_registry;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "semidiag", version, about = "Conjugators for semiclassical ODE systems: experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json plus CSV/plot data into the output directory.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's `out`, else semidiag-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent solves.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List builtin systems and vector fields whose name contains FILTER.
    ListBuiltins { filter: Option<String> },
    /// Check a config and print it with every default filled in.
    Validate { config: PathBuf },
}

const FIELDS: [(&str, &str, &str); 2] = [("logistic", "", "u' = u^2 - u"), ("saddle", "", "(u1, u2)' = (-u1 + u1 u2, u2 + u1^2)")];

fn fail(e: ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMIDIAG_LOG", "warn")).format_timestamp(None).init();
    execute(Cli::parse())
}

fn builtin_rows(filter: &str) -> Vec<(&'static str, &'static str, &'static str, &'static str)> {
    let mut rows: Vec<_> = builtin_registry().iter().map(|b| ("matrix", b.name, b.args, b.about)).collect();
    rows.extend(FIELDS.iter().map(|(n, a, d)| ("field", *n, *a, *d)));
    rows.retain(|r| r.1.contains(filter));
    rows
}

fn execute(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Run { config, out, jobs } => {
            if let Some(n) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            let prepared = match Prepared::from_path(&config) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let name = prepared.config.name.clone().unwrap_or_default();
            let dir = out.or_else(|| prepared.config.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("semidiag-out").join(&name));
            let report = match run_to_dir(&prepared, &dir) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for (k, v) in &report.metrics {
                if v.is_number() || v.is_boolean() {
                    println!("{k} = {v}");
                }
            }
            for a in &report.assertions {
                let tol = a.tol.map(|t| format!(" ± {t}")).unwrap_or_default();
                println!("{} {} {:?} {}{tol} (actual {})", if a.passed { "PASS" } else { "FAIL" }, a.metric, a.op, a.value, a.actual);
            }
            println!("{name}: {} in {:.2} s, report in {}", if report.passed { "passed" } else { "FAILED" }, report.runtime_seconds, dir.display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::ListBuiltins { filter } => {
            println!("{:<8} {:<26} {:<42} description", "type", "name", "args");
            for (t, n, a, d) in builtin_rows(&filter.unwrap_or_default()) {
                println!("{t:<8} {n:<26} {a:<42} {d}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match Prepared::from_path(&config) {
            Ok(p) => {
                println!("{}", serde_json::to_string_pretty(&p.config).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn code(args: &[&str]) -> ExitCode {
        execute(Cli::try_parse_from(std::iter::once("semidiag").chain(args.iter().copied())).unwrap())
    }

    fn config(rel: &str) -> String {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(rel).to_string_lossy().into_owned()
    }

    fn scratch(tag: &str) -> PathBuf {
        std::env::temp_dir().join(format!("semidiag-cli-{tag}-{}", std::process::id()))
    }

    fn write(tag: &str, body: &str) -> String {
        let p = scratch(tag).with_extension("json");
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn exit_codes() {
        let out = scratch("out");
        let out_s = out.to_string_lossy().into_owned();
        assert_eq!(code(&["validate", &config("examples/resonance_scan.json")]), ExitCode::SUCCESS);
        assert_eq!(code(&["run", &config("examples/resonance_scan.json"), "--out", &out_s]), ExitCode::SUCCESS);
        assert!(out.join("report.json").exists());
        assert_eq!(code(&["validate", "/nonexistent/config.json"]), ExitCode::from(2));
        assert_eq!(code(&["run", &write("bad", "{\"kind\": \"resonance\",")]), ExitCode::from(2));
        assert_eq!(code(&["validate", &write("unknown", r#"{"kind": "osc_cr", "params": {"q": 1}}"#)]), ExitCode::from(2));
        assert_eq!(code(&["run", &config("acceptance/06c_vanishing_amplitude.json"), "--out", &out_s]), ExitCode::from(3));
        let shared = r#"{"kind": "exact_finite", "params": {"system": {"a": {"builtin": "constant", "args": {"M": [[1, 0, 0], [0, -1, 0], [0, 0, 1]]}}, "m": 2}, "contour_check": false}}"#;
        assert_eq!(code(&["run", &write("shared", shared), "--out", &out_s]), ExitCode::from(3));
        std::fs::remove_dir_all(&out).unwrap();
        for t in ["bad", "unknown", "shared"] {
            std::fs::remove_file(scratch(t).with_extension("json")).unwrap();
        }
    }

    #[test]
    fn builtin_filter() {
        let all = builtin_rows("");
        assert!(all.iter().any(|r| r.1 == "constant") && all.iter().any(|r| r.1 == "logistic"));
        let tanh = builtin_rows("tanh");
        assert!(!tanh.is_empty() && tanh.iter().all(|r| r.1.contains("tanh")));
        assert!(builtin_rows("no-such-builtin").is_empty());
        assert_eq!(code(&["list-builtins", "no-such-builtin"]), ExitCode::SUCCESS);
    }

    #[test]
    fn rejects_unknown_subcommands() {
        assert!(Cli::try_parse_from(["semidiag", "frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["semidiag", "run"]).is_err());
    }
}
