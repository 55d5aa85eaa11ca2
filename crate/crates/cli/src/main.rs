//! `ctxmatch` — sample instances, run matchers, sweep phase diagrams and
//! run the empirical bound checks.
//!
//! Exit codes: 0 success, 1 property failure, 2 bad arguments, 3 enumeration
//! cap exceeded, 4 I/O.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ctxmatch::combinatorics::{count_derangements, orbit_size};
use ctxmatch::estimators::{run_estimator, Anneal, EstimatorKind, Init, LocalSearchConfig};
use ctxmatch::experiments::verify::{self, OrbitSize, PartitionRule};
use ctxmatch::experiments::{run_phase_sweep, SweepConfig};
use ctxmatch::hamiltonian::hamiltonian;
use ctxmatch::model::sample_instance;
use ctxmatch::{Error, Instance, ModelParams, TOOL_VERSION};

#[derive(Parser, Debug)]
#[command(
    name = "ctxmatch",
    version,
    about = "Contextual Gaussian graph matching simulations"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true, env = "CTXMATCH_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample an instance and write it as JSON.
    Sample(SampleArgs),
    /// Run an estimator on a stored or freshly sampled instance.
    Match(MatchArgs),
    /// Phase-diagram sweep from a JSON config.
    Sweep(SweepArgs),
    /// Run an empirical verification suite.
    Verify(VerifyArgs),
    /// Count derangements of n points, or permutations with exactly t unfixed points.
    Derange(DerangeArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    eta: f64,
}

#[derive(Args, Debug)]
struct MatchArgs {
    /// Instance JSON written by `sample`.
    #[arg(long, conflicts_with_all = ["n", "d", "rho", "eta"])]
    inst: Option<PathBuf>,
    #[arg(long, required_unless_present = "inst")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "inst")]
    d: Option<usize>,
    #[arg(long, allow_negative_numbers = true, required_unless_present = "inst")]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true, required_unless_present = "inst")]
    eta: Option<f64>,
    #[arg(long, default_value = "exhaustive", value_parser = parse_estimator)]
    estimator: EstimatorKind,
    /// Ball radius for `--estimator ball`.
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Feature)]
    init: InitArg,
    /// Simulated annealing before the final descent.
    #[arg(long)]
    anneal: bool,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.97)]
    cooling: f64,
    /// Add the Hamiltonian breakdown of the estimate.
    #[arg(long)]
    explain: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum InitArg {
    Identity,
    Feature,
    Random,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    EstimatorKind::parse(s).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Suite {
    Hstar,
    Laplace,
    Tails,
    Partition,
    Converse,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Orbit sizes (`hstar`: integers or `n`; `laplace`: one integer) or
    /// tail thresholds (`tails`), comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// `hstar`: also run at 2n and check the 99th percentiles.
    #[arg(long)]
    scaling: bool,
    #[arg(long, default_value_t = 1.0)]
    var1: f64,
    #[arg(long, default_value_t = 1.0)]
    var2: f64,
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    /// Slack of the partition rule; 1 puts no signal in either channel.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    graph_share: f64,
    /// `converse`: smallest passing mean count.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct DerangeArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    t: Option<u64>,
}

/// Terminal failure: message and exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn bad_args(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::EnumerationCap { .. } => 3,
            Error::Io(_) => 4,
            Error::NoExactMatch(_) => 1,
            _ => 2,
        };
        let message = match &e {
            Error::ParameterDomain { name, reason } => {
                format!("invalid value for --{}: {reason}", name.replace('_', "-"))
            }
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 4,
        message: format!("{}: {e}", path.display()),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ctxmatch: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(Failure::bad_args(
                "invalid value for --threads: must be positive",
            ));
        }
        pool = pool.num_threads(threads);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::bad_args(format!("invalid value for --threads: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Sample(a) => cmd_sample(&cli.common, a),
        Command::Match(a) => cmd_match(&cli.common, a),
        Command::Sweep(a) => cmd_sweep(&cli.common, a),
        Command::Verify(a) => cmd_verify(&cli.common, a),
        Command::Derange(a) => cmd_derange(&cli.common, a),
    }
}

fn log_config(command: &str, common: &Common, config: Value) {
    let resolved = json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "seed": common.seed,
        "out": common.out.as_ref().map(|p| p.display().to_string()),
        "threads": rayon::current_num_threads(),
        "config": config,
    });
    eprintln!("ctxmatch: resolved config {resolved}");
}

fn require_format(common: &Common, allowed: &[Format], command: &str) -> Result<Format, Failure> {
    let f = common.format.unwrap_or(allowed[0]);
    if !allowed.contains(&f) {
        return Err(Failure::bad_args(format!(
            "invalid value for --format: {command} does not support {f:?}"
        )));
    }
    Ok(f)
}

fn emit(common: &Common, text: &str) -> Result<(), Failure> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure {
                    code: 4,
                    message: format!("stdout: {e}"),
                })
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn cmd_sample(common: &Common, a: &SampleArgs) -> Outcome {
    require_format(common, &[Format::Json], "sample")?;
    let params = ModelParams::new(a.n, a.d, a.rho, a.eta)?;
    log_config("sample", common, json!(params));
    let inst = sample_instance(params, common.seed)?;
    emit(common, &inst.to_json())?;
    Ok(0)
}

fn cmd_match(common: &Common, a: &MatchArgs) -> Outcome {
    require_format(common, &[Format::Json], "match")?;
    let inst = match &a.inst {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Instance::from_json(&text)?
        }
        None => {
            let (n, d, rho, eta) = (a.n.unwrap(), a.d.unwrap(), a.rho.unwrap(), a.eta.unwrap());
            sample_instance(ModelParams::new(n, d, rho, eta)?, common.seed)?
        }
    };
    let init = match a.init {
        InitArg::Identity => Init::Identity,
        InitArg::Feature => Init::Feature,
        InitArg::Random => Init::Random,
    };
    let local = LocalSearchConfig {
        init,
        restarts: a.restarts,
        max_sweeps: a.max_sweeps,
        anneal: a.anneal.then_some(Anneal {
            t0: a.t0,
            cooling: a.cooling,
        }),
        seed: common.seed,
    };
    let config = json!({
        "instance": a.inst.as_ref().map(|p| p.display().to_string()),
        "params": inst.params,
        "instance_seed": inst.seed,
        "estimator": a.estimator.name(),
        "r": a.r,
        "local_search": local,
        "explain": a.explain,
    });
    log_config("match", common, config.clone());

    let result = run_estimator(&inst, a.estimator, a.r, &local)?;
    let mut out = result.to_json_value();
    if a.explain {
        let sigma = inst.to_identity_frame(&result.estimate)?;
        let breakdown = hamiltonian(&inst.relabel_to_identity(), &sigma)?;
        out["explain"] = breakdown.summary_json();
    }
    out["meta"] = json!({ "tool_version": TOOL_VERSION, "seed": common.seed, "config": config });
    emit(common, &pretty(&out))?;
    Ok(0)
}

fn cmd_sweep(common: &Common, a: &SweepArgs) -> Outcome {
    let format = require_format(common, &[Format::Csv, Format::Json], "sweep")?;
    let text = fs::read_to_string(&a.config).map_err(|e| io_failure(&a.config, e))?;
    let config: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::bad_args(format!("--config {}: {e}", a.config.display())))?;
    log_config("sweep", common, json!(config));
    if let Some(cap) = config.estimator.max_n() {
        if config.n > cap {
            return Err(Error::EnumerationCap { n: config.n, cap }.into());
        }
    }
    let result = run_phase_sweep(&config)?;
    match format {
        Format::Csv => {
            emit(common, &result.to_csv())?;
            if let Some(out) = &common.out {
                let mut meta = out.clone().into_os_string();
                meta.push(".meta.json");
                let meta = PathBuf::from(meta);
                fs::write(&meta, pretty(&result.meta_json())).map_err(|e| io_failure(&meta, e))?;
            }
        }
        Format::Json => {
            let v = json!({ "cells": result.cells, "meta": result.meta_json() });
            emit(common, &pretty(&v))?;
        }
    }
    Ok(0)
}

fn model_params(
    a: &VerifyArgs,
    defaults: (usize, usize, f64, f64),
) -> Result<ModelParams, Failure> {
    Ok(ModelParams::new(
        a.n.unwrap_or(defaults.0),
        a.d.unwrap_or(defaults.1),
        a.rho.unwrap_or(defaults.2),
        a.eta.unwrap_or(defaults.3),
    )?)
}

fn parse_f64_list(values: &[String], flag: &str) -> Result<Vec<f64>, Failure> {
    values
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Failure::bad_args(format!("invalid value for --{flag}: {s:?}")))
        })
        .collect()
}

fn cmd_verify(common: &Common, a: &VerifyArgs) -> Outcome {
    require_format(common, &[Format::Json], "verify")?;
    let seed = common.seed;
    let report = match a.suite {
        Suite::Hstar => {
            let params = model_params(a, (200, 500, 0.3, 0.2))?;
            let ts = if a.t.is_empty() {
                vec![OrbitSize::Fixed(2)]
            } else {
                a.t.iter()
                    .map(|s| s.parse::<OrbitSize>())
                    .collect::<Result<Vec<_>, _>>()?
            };
            let trials = a.trials.unwrap_or(5000);
            log_config(
                "verify",
                common,
                json!({
                    "suite": "hstar", "params": params,
                    "t": ts.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                    "trials": trials, "scaling": a.scaling,
                }),
            );
            if a.scaling {
                verify::verify_hstar_scaling(params, &ts, trials, seed)?
            } else {
                verify::verify_hstar_concentration(params, &ts, trials, seed)?
            }
        }
        Suite::Laplace => {
            let params = model_params(a, (100, 300, 0.2, 0.2))?;
            let t = match a.t.as_slice() {
                [] => 4,
                [one] => one
                    .parse()
                    .map_err(|_| Failure::bad_args(format!("invalid value for --t: {one:?}")))?,
                _ => {
                    return Err(Failure::bad_args(
                        "invalid value for --t: laplace takes one orbit size",
                    ))
                }
            };
            let trials = a.trials.unwrap_or(2000);
            log_config(
                "verify",
                common,
                json!({
                    "suite": "laplace", "params": params, "t": t, "trials": trials,
                }),
            );
            verify::verify_laplace_bound(params, t, trials, seed)?
        }
        Suite::Tails => {
            let alphas = if a.alpha.is_empty() {
                vec![0.0, 0.25, 1.0]
            } else {
                a.alpha.clone()
            };
            let ts = if a.t.is_empty() {
                vec![1.0, 2.5, 3.0]
            } else {
                parse_f64_list(&a.t, "t")?
            };
            let trials = a.trials.unwrap_or(1_000_000);
            log_config(
                "verify",
                common,
                json!({
                    "suite": "tails", "var1": a.var1, "var2": a.var2,
                    "alpha": alphas, "t": ts, "trials": trials,
                }),
            );
            verify::verify_gaussian_tail_grid(a.var1, a.var2, &alphas, &ts, trials, seed)?
        }
        Suite::Partition => {
            if a.n_min > a.n_max {
                return Err(Failure::bad_args(format!(
                    "invalid value for --n-min: {} exceeds --n-max {}",
                    a.n_min, a.n_max
                )));
            }
            let rule = PartitionRule {
                epsilon: a.epsilon,
                d: a.d.unwrap_or(4),
                graph_share: a.graph_share,
            };
            let ns: Vec<usize> = (a.n_min..=a.n_max).collect();
            let trials = a.trials.unwrap_or(20);
            log_config(
                "verify",
                common,
                json!({
                    "suite": "partition", "n_values": ns, "rule": rule, "trials": trials,
                }),
            );
            verify::partition_trend(&ns, rule, trials, seed)?
        }
        Suite::Converse => {
            let n = a.n.unwrap_or(500);
            let trials = a.trials.unwrap_or(200);
            log_config(
                "verify",
                common,
                json!({
                    "suite": "converse", "n": n, "graph_share": a.graph_share,
                    "threshold": a.threshold, "trials": trials,
                }),
            );
            verify::converse_transpositions(n, a.graph_share, trials, a.threshold, seed)?
        }
    };
    emit(common, &pretty(&report.to_json_with_meta()))?;
    if report.pass {
        Ok(0)
    } else {
        eprintln!(
            "ctxmatch: property failed: suite {}: {}",
            report.suite, report.metrics
        );
        Ok(1)
    }
}

fn cmd_derange(common: &Common, a: &DerangeArgs) -> Outcome {
    let format = require_format(common, &[Format::Csv, Format::Json], "derange")?;
    log_config("derange", common, json!({ "n": a.n, "t": a.t }));
    let count = match a.t {
        None => count_derangements(a.n),
        Some(t) => orbit_size(a.n, t)?,
    };
    let text = match format {
        Format::Csv => format!("{count}\n"),
        Format::Json => pretty(&json!({
            "n": a.n,
            "t": a.t,
            "count": count.to_string(),
            "meta": { "tool_version": TOOL_VERSION, "seed": common.seed },
        })),
    };
    emit(common, &text)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctxmatch::permutation::lexicographic;

    fn run_args(args: &[&str]) -> Result<u8, (u8, String)> {
        let argv = std::iter::once("ctxmatch").chain(args.iter().copied());
        let cli = Cli::try_parse_from(argv).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
        run(&cli).map_err(|f| (f.code, f.message))
    }

    fn out_path(dir: &tempfile::TempDir, name: &str) -> String {
        dir.path().join(name).display().to_string()
    }

    #[test]
    fn sample_is_byte_identical_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (out_path(&dir, "a.json"), out_path(&dir, "b.json"));
        for p in [&a, &b] {
            let args = [
                "sample", "--n", "4", "--d", "2", "--rho", "0.5", "--eta", "0.5", "--seed", "7",
                "--out", p,
            ];
            assert_eq!(run_args(&args), Ok(0));
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn sample_round_trips_through_the_loader() {
        let dir = tempfile::tempdir().unwrap();
        let p = out_path(&dir, "i.json");
        let args = [
            "sample", "--n", "6", "--d", "3", "--rho", "0.9", "--eta", "0", "--seed", "1", "--out",
            &p,
        ];
        assert_eq!(run_args(&args), Ok(0));
        let text = fs::read_to_string(&p).unwrap();
        let inst = Instance::from_json(&text).unwrap();
        assert_eq!(inst.to_json(), text);
        assert_eq!(
            inst,
            sample_instance(ModelParams::new(6, 3, 0.9, 0.0).unwrap(), 1).unwrap()
        );
    }

    #[test]
    fn out_of_domain_flag_is_named() {
        let (code, msg) = run_args(&[
            "sample", "--n", "4", "--d", "2", "--rho", "1.5", "--eta", "0",
        ])
        .unwrap_err();
        assert_eq!(code, 2);
        assert!(msg.contains("--rho"), "{msg}");
        let (code, msg) =
            run_args(&["sample", "--n", "4", "--d", "0", "--rho", "0", "--eta", "0"]).unwrap_err();
        assert_eq!(code, 2);
        assert!(msg.contains("--d"), "{msg}");
        // parse errors also exit 2
        assert_eq!(run_args(&["sample", "--n", "x"]).unwrap_err().0, 2);
        assert_eq!(
            run_args(&["derange", "--n", "4", "--threads", "0"])
                .unwrap_err()
                .0,
            2
        );
    }

    #[test]
    fn unwritable_output_is_an_io_failure() {
        let args = [
            "sample",
            "--n",
            "2",
            "--d",
            "1",
            "--rho",
            "0",
            "--eta",
            "0",
            "--out",
            "/nonexistent/dir/x.json",
        ];
        assert_eq!(run_args(&args).unwrap_err().0, 4);
        assert_eq!(
            run_args(&["match", "--inst", "/nonexistent/i.json"])
                .unwrap_err()
                .0,
            4
        );
    }

    #[test]
    fn exhaustive_beyond_cap_exits_3() {
        let (code, msg) = run_args(&[
            "match", "--n", "12", "--d", "2", "--rho", "0.5", "--eta", "0.5",
        ])
        .unwrap_err();
        assert_eq!(code, 3);
        assert!(msg.contains("enumeration cap n ≤ 10"), "{msg}");
        let (code, _) = run_args(&[
            "match",
            "--n",
            "8",
            "--d",
            "2",
            "--rho",
            "0.5",
            "--eta",
            "0.5",
            "--estimator",
            "ball",
        ])
        .unwrap_err();
        assert_eq!(code, 3);
    }

    fn match_json(args: &[&str]) -> Value {
        let dir = tempfile::tempdir().unwrap();
        let p = out_path(&dir, "m.json");
        let mut full = vec!["match"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--out", &p]);
        assert_eq!(run_args(&full), Ok(0));
        serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap()
    }

    #[test]
    fn feature_estimator_is_exact_on_copied_features() {
        let v = match_json(&[
            "--n",
            "15",
            "--d",
            "3",
            "--rho",
            "0.1",
            "--eta",
            "1",
            "--estimator",
            "feature",
        ]);
        assert_eq!(v["exact"], true);
        assert_eq!(v["overlap"], 15);
        for key in [
            "estimator",
            "exact",
            "overlap",
            "n",
            "objective",
            "wall_time_ms",
            "mapping",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn exhaustive_and_zero_ball_agree() {
        let dir = tempfile::tempdir().unwrap();
        let inst = out_path(&dir, "i.json");
        let args = [
            "sample", "--n", "5", "--d", "3", "--rho", "0.5", "--eta", "0.5", "--seed", "3",
            "--out", &inst,
        ];
        assert_eq!(run_args(&args), Ok(0));
        let a = match_json(&["--inst", &inst, "--estimator", "exhaustive"]);
        let b = match_json(&["--inst", &inst, "--estimator", "ball", "--r", "0"]);
        assert_eq!(a["mapping"], b["mapping"]);
    }

    #[test]
    fn explain_reports_the_breakdown() {
        let v = match_json(&[
            "--n",
            "5",
            "--d",
            "3",
            "--rho",
            "0.5",
            "--eta",
            "0.5",
            "--explain",
        ]);
        let e = &v["explain"];
        for key in ["v", "v_star_g", "v_g", "v_star_f", "v_f"] {
            assert!(e[key].is_f64(), "missing {key}");
        }
        assert!((e["v"].as_f64().unwrap() - v["objective"].as_f64().unwrap()).abs() < 1e-9);
        assert_eq!(v["meta"]["tool_version"], TOOL_VERSION);
    }

    #[test]
    fn local_search_flags_are_used() {
        let v = match_json(&[
            "--n",
            "12",
            "--d",
            "20",
            "--rho",
            "0.6",
            "--eta",
            "0.6",
            "--estimator",
            "local",
            "--restarts",
            "3",
            "--init",
            "random",
            "--anneal",
        ]);
        assert_eq!(v["meta"]["config"]["local_search"]["restarts"], 3);
        assert!(v["certificate"]["locally_optimal"].as_bool().unwrap());
    }

    fn derange(args: &[&str]) -> String {
        let dir = tempfile::tempdir().unwrap();
        let p = out_path(&dir, "d.txt");
        let mut full = vec!["derange"];
        full.extend_from_slice(args);
        full.extend_from_slice(&["--out", &p]);
        assert_eq!(run_args(&full), Ok(0));
        fs::read_to_string(&p).unwrap()
    }

    #[test]
    fn derangement_counts_match_enumeration() {
        let d4 = lexicographic(4)
            .filter(|p| p.iter().enumerate().all(|(i, &v)| i != v))
            .count();
        assert_eq!(derange(&["--n", "4"]), format!("{d4}\n"));
        let s53 = lexicographic(5)
            .filter(|p| p.iter().enumerate().filter(|&(i, &v)| i != v).count() == 3)
            .count();
        assert_eq!(derange(&["--n", "5", "--t", "3"]), format!("{s53}\n"));
        let v: Value = serde_json::from_str(&derange(&["--n", "30", "--format", "json"])).unwrap();
        assert_eq!(v["count"], "97581073836835777732377428235481");
        assert_eq!(
            run_args(&["derange", "--n", "3", "--t", "4"])
                .unwrap_err()
                .0,
            2
        );
    }

    #[test]
    fn partition_suite_without_signal_reports_log_factorials() {
        let dir = tempfile::tempdir().unwrap();
        let p = out_path(&dir, "r.json");
        let args = [
            "verify",
            "--suite",
            "partition",
            "--n-max",
            "6",
            "--trials",
            "3",
            "--out",
            &p,
        ];
        assert_eq!(run_args(&args), Ok(0));
        let v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["suite"], "partition");
        assert_eq!(v["pass"], true);
        let rows = v["metrics"]["per_n"].as_array().unwrap();
        assert_eq!(rows.len(), 5);
        for row in rows {
            let n = row["n"].as_u64().unwrap();
            let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            assert!((row["mean_log_z"].as_f64().unwrap() - ln_fact).abs() < 1e-12);
        }
        assert_eq!(v["params"]["seed"], 0);
        assert_eq!(v["params"]["trials"], 3);
    }

    #[test]
    fn failed_property_exits_1() {
        // an impossible threshold cannot be met
        let args = [
            "verify",
            "--suite",
            "converse",
            "--n",
            "20",
            "--trials",
            "2",
            "--threshold",
            "1e9",
            "--out",
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = out_path(&dir, "c.json");
        let mut full = args.to_vec();
        full.push(&p);
        assert_eq!(run_args(&full), Ok(1));
    }

    #[test]
    fn sweep_reads_json_config_and_writes_csv_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = out_path(&dir, "sweep.json");
        fs::write(
            &cfg,
            r#"{"n": 5, "d": 30, "x_grid": [0.0, 1.0], "y_grid": [0.0, 4.0], "trials": 5,
                "estimator": "exhaustive", "base_seed": 1, "epsilon_lines": [0.1]}"#,
        )
        .unwrap();
        let csv = out_path(&dir, "out.csv");
        assert_eq!(run_args(&["sweep", "--config", &cfg, "--out", &csv]), Ok(0));
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with(
            "x,y,rho,eta,n,d,trials,estimator,exact_rate,se_exact,mean_overlap,base_seed,region\n"
        ));
        let meta: Value =
            serde_json::from_str(&fs::read_to_string(format!("{csv}.meta.json")).unwrap()).unwrap();
        assert_eq!(meta["base_seed"], 1);
        assert_eq!(meta["tool_version"], TOOL_VERSION);

        fs::write(
            &cfg,
            r#"{"n": 12, "d": 3, "x_grid": [1.0], "y_grid": [1.0], "trials": 1,
                "estimator": "exhaustive", "base_seed": 0}"#,
        )
        .unwrap();
        let (code, msg) = run_args(&["sweep", "--config", &cfg]).unwrap_err();
        assert_eq!(code, 3);
        assert!(msg.contains("n ≤ 10"), "{msg}");
        fs::write(&cfg, "{not json").unwrap();
        assert_eq!(run_args(&["sweep", "--config", &cfg]).unwrap_err().0, 2);
    }

    #[test]
    fn readme_sweep_example_is_valid() {
        let readme =
            fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
        let section = &readme[readme.find("### Sweep configuration").unwrap()..];
        let start = section.find("```json\n").unwrap() + "```json\n".len();
        let block = &section[start..start + section[start..].find("```").unwrap()];
        let config: SweepConfig = serde_json::from_str(block).unwrap();
        config.validate().unwrap();
        assert_eq!(config.estimator, EstimatorKind::Exhaustive);
    }

    #[test]
    fn format_is_checked_per_command() {
        let (code, msg) = run_args(&[
            "sample", "--n", "2", "--d", "1", "--rho", "0", "--eta", "0", "--format", "csv",
        ])
        .unwrap_err();
        assert_eq!(code, 2);
        assert!(msg.contains("--format"));
    }
}
