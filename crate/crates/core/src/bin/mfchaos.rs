use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use mfchaos::artifact::Artifact;
use mfchaos::bench::{fit_loglog, mn_hat, run_bench, BenchContext};
use mfchaos::cmkv::{value_iteration, MeanFieldArtifact, MeanFieldSolution, SimplexGrid};
use mfchaos::config::Config;
use mfchaos::lift::{lift_gap, GapEvaluation, GapReport, LiftMode};
use mfchaos::lipschitz::sweep_lipschitz_constants;
use mfchaos::nagent::{solve_vn, ClassIndex};
use mfchaos::space::Metric;
use mfchaos::{Error, ModelSpec};

/// Solvers and benchmarks for N-agent cooperative MDPs and their mean-field limit.
#[derive(Parser)]
#[command(name = "mfchaos", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; the built-in reference model when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set solver.q=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for every random stream (overrides bench.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MFCHAOS_OUT", default_value = "mfchaos-out", global = true)]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model and print its constants.
    ValidateModel,
    /// Solve the mean-field problem on the simplex grid.
    SolveMkv,
    /// Solve the N-agent problem exactly.
    SolveNagent {
        #[arg(long)]
        n: usize,
    },
    /// Evaluate a lifted mean-field policy against the N-agent optimum.
    Lift {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "feedback")]
        mode: LiftMode,
        /// Initial joint state as comma-separated state indices; every
        /// class representative when omitted.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<usize>>,
        /// Mean-field artifact from `solve-mkv`; solved afresh when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Run the full benchmark and write CSV tables and a JSON summary.
    BenchChaos,
    /// Estimate M_N on the state-action space.
    EstimateMn {
        /// Sample sizes; `bench.rate_n_list` when omitted.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Trials per candidate; `bench.mn_trials` when omitted.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } | Error::Domain(_) | Error::IndexOutOfRange { .. } | Error::LengthMismatch { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.common.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(c: &Common) -> mfchaos::Result<Config> {
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("bench.seed={seed}"));
    }
    let cfg = match &c.config {
        Some(path) => Config::load(path, &overrides)?,
        None => Config::from_toml_str(mfchaos::config::REFERENCE_TOML, &overrides)?,
    };
    info!("resolved config:\n{}", cfg.resolved_toml());
    info!("seed = {}", cfg.bench.seed);
    Ok(cfg)
}

fn write<T: Serialize + serde::de::DeserializeOwned>(cfg: &Config, out: &Path, name: &str, kind: &str, body: T) -> mfchaos::Result<()> {
    let path = out.join(name);
    Artifact::new(kind, cfg.resolved_json(), body).write(&path)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn solve_mean_field(cfg: &Config, model: &ModelSpec) -> mfchaos::Result<MeanFieldSolution> {
    let grid = Arc::new(SimplexGrid::new(model.n_states(), cfg.solver.q)?);
    value_iteration(model, grid, cfg.solver.family()?, cfg.solver.tol)
}

#[derive(Serialize, serde::Deserialize)]
struct ModelReport {
    diameter_states: f64,
    diameter_actions: f64,
    gamma: f64,
    reward_range: f64,
    beta: f64,
    k_big_f: f64,
    k_f: f64,
    k_big_f_hat: f64,
    k_f_hat: f64,
}

#[derive(Serialize, serde::Deserialize)]
struct ClassValue {
    counts: Vec<usize>,
    value: f64,
    action_counts: Vec<Vec<usize>>,
}

#[derive(Serialize, serde::Deserialize)]
struct NAgentReport {
    n: usize,
    tol: f64,
    residual: f64,
    sweeps: usize,
    classes: Vec<ClassValue>,
}

#[derive(Serialize, serde::Deserialize)]
struct MnReport {
    n: usize,
    m_n_hat: f64,
    stderr: f64,
}

fn run(cli: &Cli) -> mfchaos::Result<()> {
    let cfg = load_config(&cli.common)?;
    let out = &cli.common.out;
    let model = cfg.model.build()?;
    match &cli.command {
        Command::ValidateModel => {
            let lip = sweep_lipschitz_constants(&model, model.noise().idio_size())?;
            let report = ModelReport {
                diameter_states: model.states().diameter(),
                diameter_actions: model.actions().diameter(),
                gamma: model.gamma(),
                reward_range: model.reward_range(),
                beta: model.beta(),
                k_big_f: model.k_big_f(),
                k_f: model.k_f(),
                k_big_f_hat: lip.k_big_f_hat,
                k_f_hat: lip.k_f_hat,
            };
            println!("Δ_X = {}", report.diameter_states);
            println!("Δ_A = {}", report.diameter_actions);
            println!("γ   = {}", report.gamma);
            println!("Δ_f = {}", report.reward_range);
            println!("K_F = {} (estimate {:.6}), K_f = {} (estimate {:.6})", report.k_big_f, report.k_big_f_hat, report.k_f, report.k_f_hat);
            write(&cfg, out, "model.json", "model_report", report)
        }
        Command::SolveMkv => {
            let sol = solve_mean_field(&cfg, &model)?;
            println!(
                "sweeps {}  residual {:.3e}  family gap {:.3e}  epsilon {:.3e}",
                sol.sweeps, sol.residual, sol.family_gap, sol.epsilon
            );
            write(&cfg, out, "mean_field.json", "mean_field_solution", sol.to_artifact())
        }
        Command::SolveNagent { n } => {
            let sol = solve_vn(&model, *n, cfg.solver.tol)?;
            let idx = ClassIndex::new(*n, model.n_states());
            let classes = (0..idx.len())
                .map(|c| ClassValue {
                    counts: idx.counts(c).to_vec(),
                    value: sol.table.values[c],
                    action_counts: sol.choices[c].clone(),
                })
                .collect::<Vec<_>>();
            for c in &classes {
                println!("{:?}  V_N = {:.9}", c.counts, c.value);
            }
            let report = NAgentReport { n: *n, tol: sol.tol, residual: sol.residual, sweeps: sol.sweeps, classes };
            write(&cfg, out, &format!("nagent_{n}.json"), "nagent_solution", report)
        }
        Command::Lift { n, mode, x0, policy } => {
            let sol = match policy {
                Some(path) => {
                    let art: Artifact<MeanFieldArtifact> = Artifact::read(path)?;
                    MeanFieldSolution::from_artifact(&art.body, model.states())?
                }
                None => solve_mean_field(&cfg, &model)?,
            };
            let m = mn_hat(model.product(), *n, cfg.bench.mn_trials, cfg.bench.seed)?.value;
            let starts: Vec<Vec<usize>> = match x0 {
                Some(x) => {
                    if x.len() != *n {
                        return Err(Error::LengthMismatch { expected: *n, got: x.len() });
                    }
                    vec![x.clone()]
                }
                None => {
                    let idx = ClassIndex::new(*n, model.n_states());
                    (0..idx.len()).map(|c| idx.representative(c)).collect()
                }
            };
            if *mode == LiftMode::Randomized {
                println!("action-Lipschitz K {:.6}", mfchaos::bench::coupling_constant(&model, &sol.policy));
            }
            let eval = GapEvaluation::Exact { tol: cfg.solver.tol };
            let reports = starts
                .iter()
                .map(|x| lift_gap(&model, &sol.policy, *mode, x, eval, m, sol.epsilon))
                .collect::<mfchaos::Result<Vec<GapReport>>>()?;
            for r in &reports {
                println!("x0 {:?}  V_N {:.6}  V_lift {:.6}  gap {:.3e}", r.x0, r.v_n, r.v_lift, r.gap);
                if r.gap < -mfchaos::bench::GAP_SLACK {
                    warn!("lifted policy exceeds V_N at {:?} by {:.3e}", r.x0, -r.gap);
                }
            }
            write(&cfg, out, &format!("lift_{n}_{}.json", mode.as_str()), "lift_gap", reports)
        }
        Command::BenchChaos => {
            let ctx = BenchContext::new(&cfg)?;
            let o = run_bench(&ctx, out)?;
            for (name, c) in &o.summary.checks {
                println!("{:<20} {}  {}", name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
            info!("wrote bench tables to {}", out.display());
            Ok(())
        }
        Command::EstimateMn { n, trials } => {
            let n_list = n.clone().unwrap_or_else(|| cfg.bench.rate_n_list.clone());
            let trials = trials.unwrap_or(cfg.bench.mn_trials);
            let space = model.product();
            let rows = n_list
                .iter()
                .map(|&k| {
                    let e = mn_hat(space, k, trials, cfg.bench.seed)?;
                    println!("N = {k:>5}  M_N ≈ {:.6} ± {:.1e}", e.value, e.stderr);
                    Ok(MnReport { n: k, m_n_hat: e.value, stderr: e.stderr })
                })
                .collect::<mfchaos::Result<Vec<_>>>()?;
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.m_n_hat)).collect();
            match fit_loglog(&points) {
                Ok(fit) => println!("log-log slope {:.4}", fit.slope),
                Err(e) => warn!("no rate fit: {e}"),
            }
            write(&cfg, out, "mn.json", "mn_estimate", rows)
        }
    }
}
