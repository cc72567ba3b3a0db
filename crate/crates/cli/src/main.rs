//! `blotto`: solve graph Blotto games from JSON configs.
//!
//! Exit codes: 0 when the run converged (or the tool check passed), 2 when
//! the loop stopped at its iteration or time cap, 1 on any error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use blotto_core::baselines::run_all;
use blotto_core::best_response::{formulate, solve_br, BestResponseProblem};
use blotto_core::config::GameConfig;
use blotto_core::doa::{self, DoaResult, DoaStatus, TraceRecord};
use blotto_core::payoff::{elimination_oracle, pi_oi, IntrinsicMatrix, ZERO_TOL};
use blotto_core::{Game, MixedStrategy, Player};
use blotto_optim::mps::emit_mps;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "blotto", version, about = "Equilibria of Colonel Blotto games on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the double oracle loop; writes result.json and trace.csv.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Solve, then evaluate the six perturbation baselines; writes trials.csv.
    Baselines {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Trials per baseline and scheme (default: from the config).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compare the outcome interface with step-by-step elimination on
    /// random inputs.
    OracleCheck {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Entries are drawn from [-range, range].
        #[arg(long, default_value_t = 5.0)]
        range: f64,
    },
    /// Solve one best-response MILP.
    BestResponse {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Responder::One)]
        player: Responder,
        /// The opponent's mix.
        #[arg(long, value_enum, default_value_t = Against::Stay)]
        against: Against,
        /// Also write the MILP in MPS format.
        #[arg(long)]
        emit_mps: Option<PathBuf>,
    },
    /// Re-run a config over several values of C; one trace per value plus
    /// sweep.csv.
    CSweep {
        config: PathBuf,
        /// Comma-separated values of C.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Clone)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Subgame probabilities below this are dropped before best responses.
    #[arg(long)]
    prune: Option<f64>,
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Responder {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum Against {
    /// The opponent keeps its initial distribution.
    Stay,
    /// Uniform over the opponent's reachable vertices.
    Uniform,
}

impl RunFlags {
    fn apply(&self, config: &mut GameConfig) -> Result<()> {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(e) = self.epsilon {
            config.epsilon = e;
        }
        if let Some(m) = self.max_iter {
            config.max_iterations = m;
        }
        if let Some(p) = self.prune {
            config.prune_threshold = p;
        }
        let errs = config.validate();
        if !errs.is_empty() {
            let list: Vec<String> = errs.iter().map(|e| format!("{}: {}", e.path, e.message)).collect();
            bail!("invalid settings: {}", list.join("; "));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct RunResult<'a> {
    version: &'static str,
    status: DoaStatus,
    value: f64,
    lower: f64,
    upper: f64,
    gap: f64,
    iterations: usize,
    x: &'a MixedStrategy,
    y: &'a MixedStrategy,
    trace: &'a [TraceRecord],
    config: &'a GameConfig,
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    #[serde(rename = "U_l")]
    lower: f64,
    #[serde(rename = "U_u")]
    upper: f64,
    subgame_value: f64,
    support_x: usize,
    support_y: usize,
    elapsed_ms: u64,
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in trace {
        w.serialize(TraceRow {
            iteration: r.iteration,
            lower: r.lower,
            upper: r.upper,
            subgame_value: r.subgame_value,
            support_x: r.support_x,
            support_y: r.support_y,
            elapsed_ms: (r.elapsed_secs * 1000.0).round() as u64,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn status_code(status: DoaStatus) -> u8 {
    match status {
        DoaStatus::Converged => 0,
        _ => 2,
    }
}

/// Runs the loop and writes `<stem>.json` and `<stem>.csv` into `out_dir`.
fn solve_and_write(config: &GameConfig, out_dir: &Path, stem: &str) -> Result<(Game, DoaResult)> {
    let game = config.game()?;
    let result = doa::run(&game, config.doa_config())?;
    fs::create_dir_all(out_dir)?;
    let out = RunResult {
        version: env!("CARGO_PKG_VERSION"),
        status: result.status,
        value: result.value,
        lower: result.lower,
        upper: result.upper,
        gap: result.gap(),
        iterations: result.iterations,
        x: &result.x,
        y: &result.y,
        trace: &result.trace,
        config,
    };
    write_json(&out_dir.join(format!("{stem}.json")), &out)?;
    write_trace(&out_dir.join(format!("{stem}.csv")), &result.trace)?;
    println!(
        "{:?}: value {:.6}, bounds [{:.6}, {:.6}], {} iterations",
        result.status, result.value, result.lower, result.upper, result.iterations
    );
    Ok((game, result))
}

fn solve(path: &Path, flags: &RunFlags) -> Result<u8> {
    let mut config = GameConfig::load(path)?;
    flags.apply(&mut config)?;
    let (_, result) = solve_and_write(&config, &flags.out_dir, "result")?;
    // The trace file keeps the name the tools expect.
    fs::rename(flags.out_dir.join("result.csv"), flags.out_dir.join("trace.csv"))?;
    Ok(status_code(result.status))
}

fn baselines(path: &Path, flags: &RunFlags, trials: Option<usize>) -> Result<u8> {
    let mut config = GameConfig::load(path)?;
    flags.apply(&mut config)?;
    let (game, result) = solve_and_write(&config, &flags.out_dir, "result")?;
    fs::rename(flags.out_dir.join("result.csv"), flags.out_dir.join("trace.csv"))?;
    let trials = trials.unwrap_or(config.baselines.trials);
    if trials == 0 {
        bail!("--trials must be positive");
    }
    info!("running baselines with {trials} trials against value {:.6}", result.value);
    let report = run_all(
        &game,
        &result.x,
        &result.y,
        trials,
        config.baselines.repetitions,
        config.seed,
        &config.br_options(),
    )?;
    let path = flags.out_dir.join("trials.csv");
    report.write_csv(BufWriter::new(File::create(&path)?))?;
    write_json(&flags.out_dir.join("trials_summary.json"), &report.summaries())?;
    println!("{:<18} {:<16} {:>10} {:>10} {:>10}", "baseline", "scheme", "mean", "median", "vs value");
    for s in report.summaries() {
        println!(
            "{:<18} {:<16} {:>10.5} {:>10.5} {:>+10.5}",
            s.baseline,
            s.scheme.to_string(),
            s.mean,
            s.median,
            s.mean - result.value
        );
    }
    Ok(status_code(result.status))
}

fn oracle_check(samples: usize, seed: u64, range: f64) -> Result<u8> {
    if !(range.is_finite() && range > 0.0) {
        bail!("--range must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agree = 0usize;
    for _ in 0..samples {
        let delta: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-range..=range));
        let i = IntrinsicMatrix::cyclic(
            rng.gen_range(1.0..4.0) + f64::EPSILON,
            rng.gen_range(1.0..4.0) + f64::EPSILON,
            rng.gen_range(1.0..4.0) + f64::EPSILON,
        )?;
        let pi = pi_oi(delta, &i)?;
        let sign = if pi.abs() < ZERO_TOL { 0 } else { pi.signum() as i8 };
        let elim = elimination_oracle(delta, &i)?;
        if sign == elim.sign {
            agree += 1;
        } else {
            println!("disagree: delta {delta:?}, pi {pi}, elimination {}", elim.sign);
        }
    }
    println!("agreements: {agree}/{samples}");
    println!("disagreements: {}", samples - agree);
    Ok(if agree == samples { 0 } else { 1 })
}

fn best_response(path: &Path, player: Responder, against: Against, emit: Option<&Path>) -> Result<u8> {
    let config = GameConfig::load(path)?;
    let game = config.game()?;
    let responder = match player {
        Responder::One => Player::One,
        Responder::Two => Player::Two,
    };
    let space = game.space(responder.other());
    let opponent = match against {
        Against::Stay => MixedStrategy::pure(
            space.stay().cloned().unwrap_or_else(|| space.joint_vertices()[0].clone()),
        ),
        Against::Uniform => {
            let v = space.joint_vertices();
            MixedStrategy::new(v.to_vec(), vec![1.0 / v.len() as f64; v.len()])?
        }
    };
    let problem = BestResponseProblem {
        responder,
        space: game.space(responder),
        opponent: &opponent,
        model: game.model(),
    };
    let opts = config.br_options();
    if let Some(mps) = emit {
        let f = formulate(&problem, &opts)?;
        let mut w = BufWriter::new(File::create(mps).with_context(|| format!("creating {}", mps.display()))?);
        emit_mps(&f.milp, "BLOTTOBR", &mut w)?;
        w.flush()?;
        println!("wrote {}", mps.display());
    }
    let br = solve_br(&problem, &opts, &[])?;
    #[derive(Serialize)]
    struct Out<'a> {
        value: f64,
        bound: f64,
        certified: bool,
        nodes: usize,
        strategy: &'a blotto_core::Strategy,
    }
    let out = Out { value: br.value, bound: br.bound, certified: br.certified, nodes: br.nodes, strategy: &br.strategy };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

#[derive(Serialize)]
struct SweepRow {
    c: f64,
    status: String,
    value: f64,
    lower: f64,
    upper: f64,
    iterations: usize,
}

fn c_sweep(path: &Path, values: &[f64], flags: &RunFlags) -> Result<u8> {
    let mut config = GameConfig::load(path)?;
    flags.apply(&mut config)?;
    let mut rows = Vec::new();
    let mut code = 0;
    for &c in values {
        let mut cfg = config.clone();
        cfg.c = c;
        flags.apply(&mut cfg)?;
        let (_, r) = solve_and_write(&cfg, &flags.out_dir, &format!("trace_c{c}"))?;
        // The result JSON of each run is kept next to its trace.
        code = code.max(status_code(r.status));
        rows.push(SweepRow {
            c,
            status: format!("{:?}", r.status),
            value: r.value,
            lower: r.lower,
            upper: r.upper,
            iterations: r.iterations,
        });
    }
    let mut w = csv::Writer::from_path(flags.out_dir.join("sweep.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(code)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { config, run } => solve(&config, &run),
        Command::Baselines { config, run, trials } => baselines(&config, &run, trials),
        Command::OracleCheck { samples, seed, range } => oracle_check(samples, seed, range),
        Command::BestResponse { config, player, against, emit_mps } => {
            best_response(&config, player, against, emit_mps.as_deref())
        }
        Command::CSweep { config, values, run } => c_sweep(&config, &values, &run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
