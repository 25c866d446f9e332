//! `qsdlab`: batch experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

mod pipeline;
mod spec;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qsdlab::qsd::{auto_box, qsd_eigen_oracle};
use qsdlab::reproduce::{birth_death_suite, feller_suite, summarize, CriterionOutcome};
use qsdlab::State;

use pipeline::{execute, Mode, Outcome};
use spec::{ExperimentSpec, Model};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "qsdlab", version, about = "Quasi-stationary distributions and Lyapunov criteria for absorbed Markov processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Overrides the seed of the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "QSDLAB_THREADS")]
    threads: Option<usize>,
    /// Format of the report printed on stdout.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory (overrides the spec).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Directory for the CSV artifacts and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Fixed box sides, comma separated (e.g. `1,1`).
    #[arg(long = "box", value_delimiter = ',')]
    r#box: Option<Vec<u32>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter selection, the requested checks, then estimation.
    Run(SpecArgs),
    /// Parameter selection and the requested checks only.
    Check(SpecArgs),
    /// Estimation only.
    Estimate(SpecArgs),
    /// Acceptance suite for birth-death chains.
    #[command(name = "reproduce-thm-3-2")]
    ReproduceBd(ReproduceArgs),
    /// Acceptance suite for Feller diffusions.
    #[command(name = "reproduce-thm-4-2")]
    ReproduceFeller(ReproduceArgs),
    /// Eigen-oracle QSD of a birth-death chain on a box.
    Oracle(OracleArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => with_threads(&a.common, || run_spec(&a, Mode::Run)),
        Command::Check(a) => with_threads(&a.common, || run_spec(&a, Mode::Check)),
        Command::Estimate(a) => with_threads(&a.common, || run_spec(&a, Mode::Estimate)),
        Command::ReproduceBd(a) => with_threads(&a.common, || reproduce(&a, "reproduce-thm-3-2", birth_death_suite)),
        Command::ReproduceFeller(a) => with_threads(&a.common, || reproduce(&a, "reproduce-thm-4-2", feller_suite)),
        Command::Oracle(a) => with_threads(&a.common, || oracle(&a)),
    };
    ExitCode::from(code)
}

fn with_threads(common: &Common, f: impl FnOnce() -> u8 + Send) -> u8 {
    match common.threads {
        Some(0) => invalid("--threads must be positive"),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(e) => invalid(&format!("thread pool: {e}")),
        },
        None => f(),
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn invalid(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    EXIT_INVALID
}

/// Reads and validates a spec, reporting problems as `path:line: message`.
fn load(path: &Path, seed: Option<u64>) -> Result<(ExperimentSpec, Model, String), u8> {
    let text = fs::read_to_string(path).map_err(|e| invalid(&format!("{}: {e}", path.display())))?;
    let fail = |e: spec::SpecError| match e.line {
        Some(l) => invalid(&format!("{}:{l}: {}", path.display(), e.message)),
        None => invalid(&format!("{}: {}", path.display(), e.message)),
    };
    let mut spec = ExperimentSpec::parse(&text).map_err(fail)?;
    let model = spec.validate(&text).map_err(fail)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok((spec, model, text))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn versions() -> Value {
    json!({ "qsdlab": qsdlab::VERSION, "qsdlab-cli": env!("CARGO_PKG_VERSION") })
}

fn write_all(dir: &Path, files: &[(String, String)], manifest: &Value) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(|e| format!("{name}: {e}"))?;
    }
    let mut m = serde_json::to_string_pretty(manifest).expect("json");
    m.push('\n');
    fs::write(dir.join("manifest.json"), m).map_err(|e| format!("manifest.json: {e}"))
}

fn run_spec(a: &SpecArgs, mode: Mode) -> u8 {
    let start = Instant::now();
    let (spec, model, text) = match load(&a.spec, a.common.seed) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let Some(dir) = a.out.clone().or_else(|| spec.output.clone()) else {
        return invalid("no output directory: set \"output\" in the spec or pass --out");
    };
    if mode == Mode::Estimate && spec.estimation.is_none() {
        return invalid(&format!("{}: the spec has no estimation block", a.spec.display()));
    }
    let mut out = execute(&spec, &model, mode);
    let violated: Vec<Value> = out.violated().map(|c| c.to_json()).collect();
    if !violated.is_empty() {
        out.artifacts.push(("counterexamples.json".into(), serde_json::to_string_pretty(&violated).expect("json") + "\n"));
    }
    let code = if out.success() { EXIT_OK } else { EXIT_VIOLATED };
    out.wall_times.insert("total".into(), start.elapsed().as_secs_f64());
    let manifest = json!({
        "schema": spec::SCHEMA,
        "command": match mode { Mode::Run => "run", Mode::Check => "check", Mode::Estimate => "estimate" },
        "spec": a.spec.display().to_string(),
        "spec_sha256": sha256_hex(text.as_bytes()),
        "seed": spec.seed,
        "versions": versions(),
        "wall_times": out.wall_times,
        "artifacts": out.artifacts.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "exit_code": code,
    });
    if let Err(e) = write_all(&dir, &out.artifacts, &manifest) {
        return invalid(&e);
    }
    print_outcome(&out, a.common.format, code);
    if !violated.is_empty() {
        eprintln!("violated certificate(s); counterexamples in {}", dir.join("counterexamples.json").display());
    }
    for e in &out.estimation_errors {
        eprintln!("estimation failed: {e}");
    }
    code
}

fn print_outcome(out: &Outcome, format: Format, code: u8) {
    match format {
        Format::Csv => {
            emit("item,result");
            for (k, v) in &out.summary {
                emit(&format!("{k},\"{v}\""));
            }
            for e in &out.estimation_errors {
                emit(&format!("estimation_error,\"{e}\""));
            }
            emit(&format!("exit_code,{code}"));
        }
        Format::Json => {
            let items: serde_json::Map<String, Value> = out.summary.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
            let v = json!({ "results": items, "estimation_errors": out.estimation_errors, "exit_code": code });
            emit(&serde_json::to_string_pretty(&v).expect("json"));
        }
    }
}

fn reproduce(a: &ReproduceArgs, command: &str, suite: fn(u64) -> Vec<CriterionOutcome>) -> u8 {
    let start = Instant::now();
    let seed = a.common.seed.unwrap_or(qsdlab::reproduce::DEFAULT_SEED);
    let outcomes = suite(seed);
    let (table, all_pass) = summarize(&outcomes);
    match a.common.format {
        Format::Csv => println!("{table}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&outcomes).expect("json")),
    }
    let code = if all_pass { EXIT_OK } else { EXIT_VIOLATED };
    if let Some(dir) = &a.out {
        let files: Vec<(String, String)> = outcomes.iter().flat_map(|c| c.artifacts.iter().map(|x| (x.name.clone(), x.body.clone()))).collect();
        let wall: serde_json::Map<String, Value> = outcomes.iter().map(|c| (format!("criterion_{}", c.id), json!(c.seconds))).collect();
        let manifest = json!({
            "schema": spec::SCHEMA,
            "command": command,
            "seed": seed,
            "versions": versions(),
            "wall_times": wall,
            "total_seconds": start.elapsed().as_secs_f64(),
            "artifacts": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            "outcomes": outcomes,
            "exit_code": code,
        });
        if let Err(e) = write_all(dir, &files, &manifest) {
            return invalid(&e);
        }
    }
    code
}

fn oracle(a: &OracleArgs) -> u8 {
    let (spec, model, _) = match load(&a.spec, a.common.seed) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let Model::Bd(m) = model else {
        return invalid("the eigen oracle needs a birth-death chain");
    };
    let cfg = spec.estimation.map(|e| e.oracle).unwrap_or_default();
    let fixed = a.r#box.clone().or(cfg.r#box);
    if fixed.as_ref().is_some_and(|b| b.len() != m.dim()) {
        return invalid(&format!("box needs {} sides", m.dim()));
    }
    let res = match fixed {
        Some(b) => qsd_eigen_oracle(&m, b),
        None => auto_box(&m, cfg.start, cfg.step, cfg.tol, cfg.max_side),
    };
    let o = match res {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VIOLATED;
        }
    };
    let est = o.estimate();
    match a.common.format {
        Format::Csv => {
            emit(&format!("# lambda0 = {:.12e}", o.lambda0));
            emit(est.to_csv(|s| s.coords_f64()).trim_end());
        }
        Format::Json => {
            let atoms: Vec<Value> = est.measure.atoms().iter().map(|(s, w)| json!({ "state": s.coords(), "mass": w })).collect();
            let v = json!({ "lambda0": o.lambda0, "qsd": atoms, "diagnostics": est.diagnostics_json() });
            emit(&serde_json::to_string_pretty(&v).expect("json"));
        }
    }
    EXIT_OK
}
