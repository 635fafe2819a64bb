//! The `mfe` command-line front end.
//!
//! | command       | writes                                           | exit codes                     |
//! |---------------|--------------------------------------------------|--------------------------------|
//! | `solve`       | q_table.csv, measure.csv, policy.csv, report.json | 0 converged, 2 max-iter, 3 max-iter and not contractive |
//! | `verify`      | certificate.json                                 | 0 pass, 4 fail                 |
//! | `constants`   | constants.json                                   | 0                              |
//! | `contraction` | contraction.json                                 | 0                              |
//! | `simulate`    | nagent.csv                                       | 0                              |
//! | `replay`      | the replayed command's artifacts                 | 0 hashes match, 5 mismatch     |
//!
//! Every command exits 1 on configuration or input errors and writes
//! `<command>_manifest.json` to its output directory on success and on failure.

pub mod io;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{estimate_contraction, PerturbationMode, SolveOptions};
use crate::inner_opt::GreedyPolicy;
use crate::measure_ot::StateMeasure;
use crate::mfe_average::solve_average_default;
use crate::mfe_discounted::solve_discounted_default;
use crate::model::{estimate_constants, load_model, Criterion, Model};
use crate::qfunction::MfePair;
use crate::verify::{certify, nagent_gap, solve_frozen_mdp, tail_bound};
use io::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_NOT_CONTRACTIVE: i32 = 3;
pub const EXIT_VERIFY_FAIL: i32 = 4;
pub const EXIT_REPLAY_MISMATCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "mfe", version, about = "Mean-field equilibria by value iteration on (Q, mu)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Compute an equilibrium.
    Solve(SolveArgs),
    /// Check solver artifacts in --out against the model.
    Verify(VerifyArgs),
    /// Estimate model constants and the contraction modulus.
    Constants(CommonArgs),
    /// Measure distance ratios of the equilibrium operator on random pairs.
    Contraction(ContractionArgs),
    /// Simulate finite populations playing the equilibrium policy.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest and compare artifact hashes.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct CommonArgs {
    /// Model document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "mfe-out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random probe measures used for constant estimation.
    #[arg(long, default_value_t = 16)]
    probes: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ContractionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 100, 1000])]
    agents: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    rollouts: usize,
    /// Simulation horizon; by default long enough that the discounted tail is below 1e-6.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the replayed artifacts (default: `replay` next to the manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    /// SHA-256 of the file; JSON files are hashed without wall-clock fields.
    pub sha256: String,
}

/// Record of one invocation, written next to its artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub invocation: serde_json::Value,
    pub config_path: String,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub tolerances: serde_json::Value,
    pub artifacts: Vec<ArtifactRecord>,
    pub version: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub wall_clock_secs: f64,
}

/// Entry point for the binary: parses `std::env::args`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Replay(args) => replay(&args),
        cmd => execute(&cmd),
    }
}

struct Outcome {
    code: i32,
    artifacts: Vec<&'static str>,
}

fn execute(cmd: &Command) -> i32 {
    let started = Instant::now();
    let common = common_args(cmd);
    let result = fs::create_dir_all(&common.out).map_err(Error::from).and_then(|_| dispatch(cmd));
    let (code, artifacts, error) = match result {
        Ok(o) => (o.code, o.artifacts, None),
        Err(e) => {
            eprintln!("error: {e}");
            (EXIT_INPUT, Vec::new(), Some(e.to_string()))
        }
    };
    if let Err(e) = write_manifest(cmd, code, &artifacts, error, started.elapsed().as_secs_f64()) {
        eprintln!("error: cannot write manifest: {e}");
    }
    code
}

fn common_args(cmd: &Command) -> &CommonArgs {
    match cmd {
        Command::Solve(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Constants(a) => a,
        Command::Contraction(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Replay(_) => unreachable!("replay records no manifest"),
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Solve(_) => "solve",
        Command::Verify(_) => "verify",
        Command::Constants(_) => "constants",
        Command::Contraction(_) => "contraction",
        Command::Simulate(_) => "simulate",
        Command::Replay(_) => "replay",
    }
}

fn write_manifest(cmd: &Command, code: i32, artifacts: &[&str], error: Option<String>, secs: f64) -> Result<()> {
    let common = common_args(cmd);
    fs::create_dir_all(&common.out)?;
    let config_sha256 = fs::read(&common.config).ok().map(|b| sha256_hex(&b));
    let tolerances = match cmd {
        Command::Solve(a) => serde_json::json!({ "tol": a.tol, "max_iter": a.max_iter }),
        Command::Verify(a) => serde_json::json!({ "tol": a.tol }),
        Command::Simulate(a) => serde_json::json!({ "tol": a.tol, "max_iter": a.max_iter }),
        _ => serde_json::json!({}),
    };
    let artifacts = artifacts
        .iter()
        .map(|name| {
            Ok(ArtifactRecord { path: (*name).to_string(), sha256: content_hash(&common.out.join(name))? })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command_name(cmd).into(),
        invocation: serde_json::to_value(cmd)?,
        config_path: common.config.display().to_string(),
        config_sha256,
        seed: common.seed,
        tolerances,
        artifacts,
        version: env!("CARGO_PKG_VERSION").into(),
        exit_code: code,
        error,
        wall_clock_secs: secs,
    };
    write_json(&common.out.join(manifest_name(command_name(cmd))), &manifest)
}

fn load(common: &CommonArgs) -> Result<Model> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", common.config.display())))?;
    load_model(&text)
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Contraction(a) => cmd_contraction(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Replay(_) => unreachable!("handled before dispatch"),
    }
}

/// Solution in the shape shared by both criteria.
struct Solved {
    pair: MfePair,
    policy: GreedyPolicy,
    report: serde_json::Value,
    converged: bool,
    contractive: bool,
}

fn solve_model(model: &Model, common: &CommonArgs, tol: f64, max_iter: usize) -> Result<Solved> {
    let constants = estimate_constants(model, common.probes, common.seed)?;
    let options = SolveOptions { tol, max_iter, constants: Some(constants), probes: common.probes, seed: common.seed };
    match model.criterion() {
        Criterion::Discounted => {
            let (pair, policy, report) = solve_discounted_default(model, &options)?;
            Ok(Solved {
                converged: report.converged,
                contractive: report.k_used < 1.0,
                report: serde_json::to_value(&report)?,
                pair,
                policy,
            })
        }
        Criterion::Average => {
            let (sol, report) = solve_average_default(model, &options)?;
            let mut value = serde_json::to_value(&report)?;
            value["gain"] = serde_json::json!(sol.gain);
            Ok(Solved {
                converged: report.converged,
                contractive: report.k_used < 1.0,
                report: value,
                pair: MfePair::new(sol.q_star, sol.mu_star),
                policy: sol.policy,
            })
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<Outcome> {
    let model = load(&a.common)?;
    let solved = solve_model(&model, &a.common, a.tol, a.max_iter)?;
    let out = &a.common.out;
    write_q_table(&out.join(Q_TABLE), &solved.pair.q, &model)?;
    write_measure(&out.join(MEASURE), &solved.pair.mu)?;
    write_policy(&out.join(POLICY), &solved.policy)?;
    write_json(&out.join(REPORT), &solved.report)?;
    let code = if solved.converged {
        EXIT_OK
    } else if solved.contractive {
        EXIT_MAX_ITER
    } else {
        EXIT_NOT_CONTRACTIVE
    };
    if !solved.contractive {
        eprintln!("warning: estimated contraction modulus is not below 1");
    }
    Ok(Outcome { code, artifacts: vec![Q_TABLE, MEASURE, POLICY, REPORT] })
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let model = load(&a.common)?;
    let out = &a.common.out;
    for name in [Q_TABLE, MEASURE, POLICY] {
        if !out.join(name).is_file() {
            return Err(Error::Schema(format!("missing artifact {}", out.join(name).display())));
        }
    }
    let q = read_q_table(&out.join(Q_TABLE), &model)?;
    let mu = read_measure(&out.join(MEASURE), model.n_states())?;
    let policy = read_policy(&out.join(POLICY), &model)?;
    let cert = certify(&model, &MfePair::new(q, mu), &policy, a.tol)?;
    write_json(&out.join(CERTIFICATE), &cert)?;
    if !cert.pass {
        eprintln!(
            "verification failed: exploitability {:e}, invariance residual {:e}, tolerance {:e}",
            cert.exploitability, cert.invariance_residual, a.tol
        );
    }
    Ok(Outcome { code: if cert.pass { EXIT_OK } else { EXIT_VERIFY_FAIL }, artifacts: vec![CERTIFICATE] })
}

fn cmd_constants(a: &CommonArgs) -> Result<Outcome> {
    let model = load(a)?;
    let constants = estimate_constants(&model, a.probes, a.seed)?;
    write_json(&a.out.join(CONSTANTS), &constants)?;
    Ok(Outcome { code: EXIT_OK, artifacts: vec![CONSTANTS] })
}

fn cmd_contraction(a: &ContractionArgs) -> Result<Outcome> {
    let model = load(&a.common)?;
    let constants = estimate_constants(&model, a.common.probes, a.common.seed)?;
    let estimate = estimate_contraction(&model, &constants, a.pairs, a.common.seed, PerturbationMode::Joint)?;
    write_json(&a.common.out.join(CONTRACTION), &estimate)?;
    Ok(Outcome { code: EXIT_OK, artifacts: vec![CONTRACTION] })
}

/// Smallest horizon with discounted tail below `1e-6`, or 500 steps for the average criterion.
fn default_horizon(model: &Model, mu: &StateMeasure) -> usize {
    match model.criterion() {
        Criterion::Discounted => {
            let beta = model.xi();
            let n = model.n_states();
            let mut m = 0.0_f64;
            for nu in std::iter::once(mu.clone()).chain((0..n).map(|i| StateMeasure::dirac(n, i))) {
                for x in 0..n {
                    for k in 0..model.n_actions() {
                        m = m.max(model.cost_at(x, k, &nu));
                    }
                }
            }
            (1..100_000).find(|&t| tail_bound(beta, t, m) <= 1e-6).unwrap_or(100_000)
        }
        Criterion::Average => 500,
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let model = load(&a.common)?;
    let solved = solve_model(&model, &a.common, a.tol, a.max_iter)?;
    if !solved.converged {
        return Err(Error::Parameter("equilibrium solve did not converge; nothing to simulate".into()));
    }
    let mu = &solved.pair.mu;
    let horizon = a.horizon.unwrap_or_else(|| default_horizon(&model, mu));
    // Validates the frozen problem once before the sweep.
    solve_frozen_mdp(&model, mu)?;
    let mut rows = Vec::with_capacity(a.agents.len());
    for &n in &a.agents {
        let run = nagent_gap(&model, &solved.policy, mu, n, horizon, a.rollouts, a.common.seed)?;
        rows.push(NagentRow { n, mean_cost: run.mean_cost, gap: run.gap_estimate, stderr: run.std_error });
    }
    write_nagent(&a.common.out.join(NAGENT), &rows)?;
    Ok(Outcome { code: EXIT_OK, artifacts: vec![NAGENT] })
}

fn replay(a: &ReplayArgs) -> i32 {
    match replay_inner(a) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn replay_inner(a: &ReplayArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let mut cmd: Command = serde_json::from_value(manifest.invocation.clone())?;
    let config = fs::read(&common_args(&cmd).config)?;
    if manifest.config_sha256.as_deref() != Some(sha256_hex(&config).as_str()) {
        return Err(Error::Schema("config content differs from the manifest's hash".into()));
    }
    let out = a.out.clone().unwrap_or_else(|| a.manifest.parent().unwrap_or(Path::new(".")).join("replay"));
    fs::create_dir_all(&out)?;
    if let Command::Verify(v) = &cmd {
        for name in [Q_TABLE, MEASURE, POLICY] {
            let src = v.common.out.join(name);
            if src.is_file() {
                fs::copy(&src, out.join(name))?;
            }
        }
    }
    set_out(&mut cmd, out.clone());
    let code = execute(&cmd);
    let mut matched = true;
    for art in &manifest.artifacts {
        let hash = content_hash(&out.join(&art.path)).unwrap_or_default();
        let same = hash == art.sha256;
        println!("{} {}", if same { "match   " } else { "MISMATCH" }, art.path);
        matched &= same;
    }
    if code != manifest.exit_code {
        println!("exit code {code} differs from recorded {}", manifest.exit_code);
        matched = false;
    }
    Ok(if matched { EXIT_OK } else { EXIT_REPLAY_MISMATCH })
}

fn set_out(cmd: &mut Command, out: PathBuf) {
    match cmd {
        Command::Solve(a) => a.common.out = out,
        Command::Verify(a) => a.common.out = out,
        Command::Constants(a) => a.out = out,
        Command::Contraction(a) => a.common.out = out,
        Command::Simulate(a) => a.common.out = out,
        Command::Replay(_) => {}
    }
}
