#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gigopt::config::{InstanceConfig, PolicyConfig};
use gigopt::experiments::{self, baseline_policies, instances::EARNINGS_SIGMA, ExperimentId, ExperimentSpec, Table};
use gigopt::fluid::{brute_force_oracle, solve_fluid};
use gigopt::noisy::{detect_double_threshold, surplus_curve, NoisyInstance};
use gigopt::par::Execution;
use gigopt::policy::{cyclic_steady_state, experienced_distribution, fairness_audit};
use gigopt::sim::{additive_loss_sweep, simulate, InitialCondition, SimConfig};
use gigopt::{Error, MarketInstance, Policy, RewardDistribution};

const EXIT_UNKNOWN_EXPERIMENT: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "gigopt", version, about = "Compensation design for platforms with churning workers")]
struct Cli {
    /// Run replications on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Start {
    Empty,
    Stationary,
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long, default_value_t = 5000)]
    periods: usize,
    /// Defaults to ten expected sojourns of the slowest type.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Charge each worker the reward actually drawn instead of the mean.
    #[arg(long)]
    realized_cost: bool,
    #[arg(long, value_enum, default_value_t = Start::Empty)]
    start: Start,
    /// Subtract a zero-mean linear correction from per-period profit.
    #[arg(long)]
    control_variate: bool,
}

impl SimArgs {
    fn config(&self, theta: f64, execution: Execution) -> SimConfig {
        SimConfig {
            theta,
            periods: self.periods,
            burn_in: self.burn_in,
            replications: self.reps,
            seed: self.seed,
            realized_cost: self.realized_cost,
            initial: match self.start {
                Start::Empty => InitialCondition::Empty,
                Start::Stationary => InitialCondition::Stationary,
            },
            control_variate: self.control_variate,
            keep_trace: false,
            execution,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal stationary reward distribution of an instance.
    FluidSolve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also enumerate distributions with weights in multiples of 1/G.
        #[arg(long)]
        oracle: Option<usize>,
    },
    /// Simulate a policy in a market of size theta.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Additive loss against the fluid optimum across market sizes.
    SweepTheta {
        #[arg(long)]
        instance: PathBuf,
        /// `name=policy.json`; defaults to the fluid, fixed-wage and lottery policies.
        #[arg(long = "policy")]
        policies: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128,256,512,1024,2048,4096")]
        thetas: Vec<f64>,
        /// Standard deviation of the default lottery.
        #[arg(long, default_value_t = EARNINGS_SIGMA)]
        sigma: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Periodic steady state of a cyclic policy.
    CyclicEval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Largest gap between the reward distributions types experience over windows of tau periods.
    FairnessAudit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
    },
    /// Optimal policy and surplus metrics across noise levels.
    NoisyAnalyze {
        #[arg(long)]
        instance: PathBuf,
        /// `start:step:end`
        #[arg(long, default_value = "0:0.25:25")]
        eps: String,
        /// Report crossings of myopic and rational surplus on stderr.
        #[arg(long)]
        detect_crossovers: bool,
        #[arg(long, default_value_t = 0.05)]
        rel_tol: f64,
    },
    /// Regenerate an experiment's tables and plots.
    Reproduce {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        reps: Option<usize>,
        /// `key=value` parameter override; repeatable.
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Exit with status 3 when a check fails.
        #[arg(long)]
        check: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<MarketInstance> {
    Ok(InstanceConfig::from_json(&read(path)?)?)
}

fn load_policy(path: &Path, inst: &MarketInstance) -> Result<Policy> {
    Ok(PolicyConfig::from_json(&read(path)?, inst.rewards())?)
}

fn atoms(x: &RewardDistribution) -> Value {
    x.atoms().iter().map(|&(r, p)| json!({"r": r, "p": p})).collect()
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn print_json(v: &Value) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad range {s:?}"))?;
    let [start, step, end] = parts[..] else {
        bail!("range must be start:step:end, got {s:?}")
    };
    if !(step > 0.0) || end < start {
        bail!("range {s:?} is empty");
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + step * k as f64).collect())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Cmd::FluidSolve { instance, tol, oracle } => {
            let inst = load_instance(&instance)?;
            let sol = solve_fluid(&inst, tol)?;
            let mut out = json!({
                "support": atoms(&sol.distribution),
                "profit": sol.profit,
                "supply": sol.supply_by_type,
                "expected_reward": sol.expected_reward,
                "dispersion": sol.dispersion,
            });
            if let Some(g) = oracle {
                let o = brute_force_oracle(&inst, g)?;
                out["oracle"] = json!({
                    "support": atoms(&o.distribution),
                    "profit": o.profit,
                    "lipschitz": o.lipschitz,
                });
            }
            print_json(&out)?;
        }
        Cmd::Simulate { instance, policy, theta, sim } => {
            let inst = load_instance(&instance)?;
            let policy = load_policy(&policy, &inst)?;
            let res = simulate(&inst, &policy, &sim.config(theta, exec))?;
            print_json(&serde_json::to_value(res)?)?;
        }
        Cmd::SweepTheta { instance, policies, thetas, sigma, sim } => {
            let inst = load_instance(&instance)?;
            let named = if policies.is_empty() {
                baseline_policies(&inst, sigma, exec)?
            } else {
                policies
                    .iter()
                    .map(|spec| {
                        let (name, path) = spec
                            .split_once('=')
                            .with_context(|| format!("policy must be name=path, got {spec:?}"))?;
                        Ok((name.to_string(), load_policy(Path::new(path), &inst)?))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let points = additive_loss_sweep(&inst, &named, &thetas, &sim.config(1.0, exec))?;
            let mut t = Table::new(&["policy", "theta", "loss", "se", "reps"]);
            for p in points {
                t.push(vec![p.policy.into(), p.theta.into(), p.loss.into(), p.se.into(), p.reps.into()]);
            }
            emit(&String::from_utf8(t.to_csv()?)?)?;
        }
        Cmd::CyclicEval { instance, policy } => {
            let inst = load_instance(&instance)?;
            let xs: Vec<RewardDistribution> = match load_policy(&policy, &inst)? {
                Policy::Static(x) => vec![x],
                Policy::Cyclic(xs) => xs,
                _ => bail!("cyclic-eval needs a static or cyclic policy"),
            };
            let ss = cyclic_steady_state(&inst, &xs)?;
            let experienced = (0..inst.num_types())
                .map(|i| Ok(atoms(&experienced_distribution(&inst, &xs, i)?)))
                .collect::<Result<Vec<_>>>()?;
            print_json(&json!({
                "supply_by_type": ss.supply_by_type,
                "supply": ss.supply,
                "profit": ss.profit,
                "average_profit": ss.average_profit,
                "experienced": experienced,
            }))?;
        }
        Cmd::FairnessAudit { instance, policy, tau, delta, horizon } => {
            let inst = load_instance(&instance)?;
            let policy = load_policy(&policy, &inst)?;
            let n0 = vec![0.0; inst.num_types()];
            let report = fairness_audit(&inst, &policy, tau, horizon, &n0, delta)?;
            print_json(&serde_json::to_value(report)?)?;
        }
        Cmd::NoisyAnalyze { instance, eps, detect_crossovers, rel_tol } => {
            let inst: NoisyInstance = serde_json::from_str(&read(&instance)?)?;
            let grid = parse_range(&eps)?;
            let curve = surplus_curve(&inst, &grid)?;
            let mut t = Table::new(&[
                "eps",
                "x_star",
                "profit",
                "surplus",
                "welfare",
                "rational_surplus",
                "myopic_surplus",
            ]);
            for c in &curve.points {
                t.push(vec![
                    c.eps.into(),
                    c.x_star.into(),
                    c.profit.into(),
                    c.surplus.into(),
                    c.welfare.into(),
                    c.rational_surplus.into(),
                    c.myopic_surplus.into(),
                ]);
            }
            emit(&String::from_utf8(t.to_csv()?)?)?;
            if detect_crossovers {
                let rational: Vec<f64> = curve.points.iter().map(|c| c.rational_surplus).collect();
                let myopic: Vec<f64> = curve.points.iter().map(|c| c.myopic_surplus).collect();
                let report = detect_double_threshold(&rational, &myopic, rel_tol)?;
                let at: Vec<f64> = report.indices.iter().map(|&k| grid[k]).collect();
                eprintln!("{}", json!({"crossovers": report.count, "eps": at}));
            }
        }
        Cmd::Reproduce { id, out, seed, reps, overrides, check } => {
            let id: ExperimentId = match id.parse() {
                Ok(id) => id,
                Err(e) => {
                    let known: Vec<&str> = ExperimentId::ALL.iter().map(|i| i.as_str()).collect();
                    eprintln!("error: {e}; known experiments: {}", known.join(", "));
                    return Ok(ExitCode::from(EXIT_UNKNOWN_EXPERIMENT));
                }
            };
            let mut spec = ExperimentSpec::new(id, out.unwrap_or_else(|| Path::new("results").join(id.as_str())));
            spec.seed = seed;
            spec.reps = reps;
            spec.execution = exec;
            for o in &overrides {
                let (k, v) = o
                    .split_once('=')
                    .with_context(|| format!("override must be key=value, got {o:?}"))?;
                spec.overrides.push((k.trim().to_string(), v.to_string()));
            }
            let manifest = experiments::run_experiment(&spec)?;
            let mut summary = String::new();
            for c in &manifest.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                summary += &format!("{status} {}: {}\n", c.name, c.detail);
            }
            summary += &format!(
                "wrote {} files to {} in {:.1}s\n",
                manifest.files.len(),
                spec.output_dir.display(),
                manifest.wall_time_seconds
            );
            emit(&summary)?;
            if check && !manifest.passed() {
                return Ok(ExitCode::from(EXIT_CHECK_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            if let Some(Error::UnknownExperiment(_)) = e.downcast_ref::<Error>() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_UNKNOWN_EXPERIMENT);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
