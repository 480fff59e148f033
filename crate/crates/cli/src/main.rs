use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use mpsent::canonical::canonicalize;
use mpsent::config::Config;
use mpsent::entanglement::{entropy, region_spectrum, LogBase};
use mpsent::error::Error as LibError;
use mpsent::mps::{random_tensor, read_mps_json, toy_fractional_mps, Mps};
use mpsent::suite::{run_suite, SuiteOptions};
use mpsent::sweep::{injectivity_rows, random_truncation_cases, run_truncation_cases, truncation_grid};
use mpsent::symmetry::{analyze_symmetry, Spin};
use mpsent::transfer::tensor_spectrum;

const EXIT_FAIL: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "mpsent", version, about = "Matrix product state entanglement and truncation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override a tolerance, e.g. `peripheral=1e-6`. Repeatable.
    #[arg(long = "tolerance", value_name = "KEY=VALUE")]
    tolerances: Vec<String>,
    /// Override a resource cap, e.g. `region=4096`. Repeatable.
    #[arg(long = "cap", value_name = "KEY=VALUE")]
    caps: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Canonical form, transfer spectrum, symmetry and entropies of one state.
    Analyze(AnalyzeArgs),
    /// Run the numerical checks, one line each.
    VerifySuite(SuiteArgs),
    /// Parameter sweeps written as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// MPS in the JSON file layout.
    #[arg(long, conflicts_with_all = ["toy", "random"])]
    file: Option<PathBuf>,
    /// Fractional-magnetization toy model, `p=3,q=1`.
    #[arg(long, conflicts_with = "random")]
    toy: Option<String>,
    /// Gaussian random tensor, `D=3,d=2`.
    #[arg(long)]
    random: Option<String>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Region lengths in sites, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    l: Vec<usize>,
    /// Renyi indices reported next to the von Neumann entropy.
    #[arg(long = "renyi", value_delimiter = ',', default_values_t = [2.0])]
    renyi: Vec<f64>,
    /// Spin per site; defaults to `(d - 1)/2`.
    #[arg(long)]
    spin: Option<String>,
    /// Use the infinite-chain environment instead of the ring of `N` sites.
    #[arg(long)]
    thermodynamic: bool,
    #[arg(long = "log-base", default_value = "e")]
    log_base: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Sections to run, comma separated (default all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Bond dimension for the random-instance sections.
    #[arg(long = "D")]
    bond_dim: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SweepKind {
    Truncation,
    Injectivity,
}

#[derive(Args, Debug)]
struct SweepArgs {
    kind: SweepKind,
    #[arg(long = "D", value_delimiter = ',', default_values_t = [4usize, 6])]
    dims: Vec<usize>,
    #[arg(long = "d", value_delimiter = ',', default_values_t = [2usize])]
    phys: Vec<usize>,
    #[arg(long = "L", value_delimiter = ',', default_values_t = [3usize, 4, 5])]
    l: Vec<usize>,
    /// Seeds per grid cell (truncation grid mode).
    #[arg(long, default_value_t = 1)]
    per_cell: usize,
    /// Random truncation instances instead of a grid: count of draws with
    /// `D ≤ max(--D)`, `L ≤ max(--L)`, `d` from `--d`.
    #[arg(long)]
    instances: Option<usize>,
    /// Trials per `(D, d)` in the injectivity survey.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_kv(spec: &str) -> anyhow::Result<Vec<(String, String)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{kv}`"))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn kv_usize(pairs: &[(String, String)], key: &str) -> anyhow::Result<usize> {
    let v = pairs.iter().find(|(k, _)| k == key).ok_or_else(|| anyhow!("missing `{key}=`"))?;
    v.1.parse().with_context(|| format!("`{key}` must be a non-negative integer"))
}

fn build_config(common: &Common) -> anyhow::Result<Config> {
    let mut cfg = Config::default();
    for spec in &common.tolerances {
        for (k, v) in parse_kv(spec)? {
            cfg.set_tolerance(&k, v.parse().with_context(|| format!("tolerance `{k}` must be a number"))?)?;
        }
    }
    for spec in &common.caps {
        for (k, v) in parse_kv(spec)? {
            cfg.set_cap(&k, v.parse().with_context(|| format!("cap `{k}` must be a non-negative integer"))?)?;
        }
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_state(a: &AnalyzeArgs) -> anyhow::Result<(Mps, Value)> {
    if let Some(path) = &a.file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut mps = read_mps_json(&text)?;
        if let Some(n) = a.n {
            let t = mps.uniform_tensor().ok_or_else(|| anyhow!("--N only applies to uniform states"))?.clone();
            mps = Mps::uniform(t, n)?;
        }
        return Ok((mps, json!({ "file": path.display().to_string() })));
    }
    if let Some(spec) = &a.toy {
        let kv = parse_kv(spec)?;
        let (p, q) = (kv_usize(&kv, "p")?, kv_usize(&kv, "q")?);
        let n = a.n.unwrap_or(4 * p);
        return Ok((toy_fractional_mps(p, q, n)?, json!({ "toy": { "p": p, "q": q } })));
    }
    if let Some(spec) = &a.random {
        let kv = parse_kv(spec)?;
        let (dim, d) = (kv_usize(&kv, "D")?, kv_usize(&kv, "d")?);
        if dim == 0 || d == 0 {
            bail!("random state needs D >= 1 and d >= 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
        let t = random_tensor(d, dim, &mut rng);
        return Ok((Mps::uniform(t, a.n.unwrap_or(12))?, json!({ "random": { "D": dim, "d": d } })));
    }
    bail!("one of --file, --toy or --random is required")
}

/// Library failures that belong to the analysis rather than to the input are
/// recorded in the report instead of aborting it.
fn soft<T: Serialize>(r: Result<T, LibError>) -> anyhow::Result<Value> {
    match r {
        Ok(v) => Ok(serde_json::to_value(v)?),
        Err(e) if e.is_cap() => Err(e.into()),
        Err(e) => Ok(json!({ "error": e.to_string() })),
    }
}

fn analyze(a: &AnalyzeArgs) -> anyhow::Result<u8> {
    let cfg = build_config(&a.common)?;
    let base: LogBase = a.log_base.parse()?;
    let (mps, source) = load_state(a)?;
    let spin: Spin = match &a.spin {
        Some(s) => s.parse()?,
        None => Spin::from_twice(mps.phys_dim().saturating_sub(1) as u32),
    };
    let (canonical, spectrum, symmetry) = match mps.uniform_tensor() {
        Some(t) => (
            soft(canonicalize(t, &cfg).map(|cf| cf.summary()))?,
            soft(tensor_spectrum(t, cfg.tol.peripheral).map(|s| s.report()))?,
            if spin.dim() == mps.phys_dim() {
                soft(analyze_symmetry(&mps, spin, 1, &cfg, a.common.seed))?
            } else {
                json!({ "error": format!("spin {} does not match d = {}", spin.value(), mps.phys_dim()) })
            },
        ),
        None => (Value::Null, Value::Null, Value::Null),
    };
    let mut entropies = Vec::new();
    for &l in &a.l {
        let spec = region_spectrum(&mps, l, &cfg, a.thermodynamic)?;
        entropies.push(serde_json::to_value(entropy(&spec, &a.renyi, base)?)?);
    }
    let report = json!({
        "seed": a.common.seed,
        "source": source,
        "d": mps.phys_dim(),
        "D": mps.bond_dim(),
        "N": mps.n_sites(),
        "canonical": canonical,
        "spectrum": spectrum,
        "symmetry": symmetry,
        "entropy": entropies,
    });
    emit(&a.common.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(0)
}

fn verify_suite(a: &SuiteArgs) -> anyhow::Result<u8> {
    let cfg = build_config(&a.common)?;
    let opts = SuiteOptions { only: a.only.clone(), bond_dim: a.bond_dim, seed: a.common.seed };
    let report = run_suite(&opts, &cfg)?;
    println!("{report}");
    if let Some(path) = &a.common.out {
        let v = json!({ "seed": a.common.seed, "pass": report.pass(), "checks": report.checks });
        fs::write(path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if report.pass() { 0 } else { EXIT_FAIL })
}

fn csv_text<T: Serialize>(header: &[&str], rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn sweep(a: &SweepArgs) -> anyhow::Result<u8> {
    let cfg = build_config(&a.common)?;
    let seed = a.common.seed;
    match a.kind {
        SweepKind::Truncation => {
            let cases = match a.instances {
                Some(count) => {
                    let max_dim = a.dims.iter().copied().max().unwrap_or(0);
                    let max_l = a.l.iter().copied().max().unwrap_or(0);
                    if count > 0 && (max_dim < 2 || max_l < 1 || a.phys.is_empty()) {
                        bail!("random truncation sweep needs max D >= 2, max L >= 1 and at least one d");
                    }
                    if count == 0 { Vec::new() } else { random_truncation_cases(count, max_dim, max_l, &a.phys, seed) }
                }
                None => truncation_grid(&a.phys, &a.dims, &a.l, a.per_cell, seed),
            };
            let rows = run_truncation_cases(&cases, &cfg)?;
            let header = [
                "seed", "D", "D_tilde", "L", "d", "delta", "bound1", "actual1", "bound2", "actual2", "lemma9_lhs",
                "lemma9_rhs",
            ];
            let (rows, reports): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            emit(&a.common.out, &csv_text(&header, &rows)?)?;
            Ok(if reports.iter().all(|r| r.pass()) { 0 } else { EXIT_FAIL })
        }
        SweepKind::Injectivity => {
            let rows = injectivity_rows(&a.dims, &a.phys, a.trials, seed, &cfg)?;
            let header = ["D", "d", "trials", "seed", "L_min", "L_log_ratio", "length", "count"];
            emit(&a.common.out, &csv_text(&header, &rows)?)?;
            Ok(0)
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<LibError>() {
        Some(l) if l.is_cap() => EXIT_CAP,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::VerifySuite(a) => verify_suite(a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_lists() {
        let kv = parse_kv("p=3, q=1").unwrap();
        assert_eq!(kv_usize(&kv, "p").unwrap(), 3);
        assert_eq!(kv_usize(&kv, "q").unwrap(), 1);
        assert!(kv_usize(&kv, "r").is_err());
        assert!(parse_kv("p3").is_err());
        assert!(parse_kv("").unwrap().is_empty());
    }

    #[test]
    fn overrides_reach_the_config() {
        let common = Common {
            seed: 0,
            tolerances: vec!["peripheral=1e-6,clip=1e-12".into()],
            caps: vec!["region=64".into()],
            out: None,
        };
        let cfg = build_config(&common).unwrap();
        assert_eq!(cfg.tol.peripheral, 1e-6);
        assert_eq!(cfg.tol.clip, 1e-12);
        assert_eq!(cfg.caps.region, 64);
    }

    #[test]
    fn cap_errors_map_to_their_own_code() {
        let cap: anyhow::Error = LibError::CapExceeded { what: "region", required: 10, cap: 1 }.into();
        assert_eq!(exit_code_for(&cap), EXIT_CAP);
        assert_eq!(exit_code_for(&anyhow!("bad input")), EXIT_INPUT);
        let wrapped = anyhow::Error::from(LibError::CapExceeded { what: "region", required: 10, cap: 1 }).context("sweep");
        assert_eq!(exit_code_for(&wrapped), EXIT_CAP);
    }
}
