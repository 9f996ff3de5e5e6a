//! Subcommands of the `teachlab` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use teachlab::analysis::{
    compute_condition_stats, exclusion_filter, generate_synthetic_logs, load_records, optimal_length, permutation_test,
    shortest_success_path, SynthConfig, SyntheticTeacher, DO_NOTHING_THRESHOLD,
};
use teachlab::log::{read_log_file, write_log_file};
use teachlab::optimal::{
    monte_carlo_logs, reference_learners, solve_value_iteration, teaching_dimension, verify_equivalence, MonteCarloSummary,
    RealizedTeacherPolicy, SolverConfig, DEFAULT_MARGIN,
};
use teachlab::session::{LearnerCondition, SessionStore};
use teachlab::{dog_env, replay, EnvConfig, EnvModel, EpisodeConfig, LearnerSpec, TeachingGoal};

#[derive(Debug, Parser)]
#[command(name = "teachlab", version, about = "Teach tabular learners with rewards: solver, simulation, analysis and session service")]
pub struct Cli {
    /// Root seed. Drawn at random and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Environment as JSON (an `EnvConfig`); the dog garden by default.
    #[arg(long, global = true, value_name = "FILE")]
    pub env: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the abstract teaching MDP and print the teaching dimension.
    Solve(SolveArgs),
    /// Monte Carlo estimate of steps under the optimal teacher for one learner.
    Simulate(SimulateArgs),
    /// Teach several learners with the same optimal policy and compare.
    Equivalence(EquivalenceArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Analyze experiment logs.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Generate synthetic participants.
    Synth(SynthArgs),
    /// Check that logs replay exactly.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Write the value table and optimal placements as JSON.
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    /// Step cap per episode; 0 means no cap.
    #[arg(long, default_value_t = 0)]
    pub max_steps: u64,
    /// Largest allowed |reward|; unbounded when omitted.
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    pub margin: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Learner: a condition tag (Q0, Q1, Q45, Q9, AS1, AS2) or `q:ALPHA:GAMMA`, `as1[:KAPPA]`, `as2`.
    #[arg(long, default_value = "q:0.1:0.9")]
    pub learner: String,
    #[command(flatten)]
    pub teach: TeachArgs,
    /// Write every episode log here (NDJSON).
    #[arg(long, value_name = "FILE")]
    pub logs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    /// Learners to compare; the reference set when omitted.
    #[arg(long, value_delimiter = ',')]
    pub learners: Vec<String>,
    #[command(flatten)]
    pub teach: TeachArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory for per-session logs; nothing is persisted when unset.
    #[arg(long, env = "TEACHLAB_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Exclusion rules and the per-condition table.
    Stats(StatsArgs),
    /// Feedback permutation test for one participant.
    Permute(PermuteArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of NDJSON logs.
    #[arg(long = "in", env = "TEACHLAB_DATA_DIR")]
    pub input: PathBuf,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Minimum steps for a success to count; computed from the solver when omitted.
    #[arg(long)]
    pub optimal_length: Option<usize>,
    /// Do-nothing steps on one dog that drop a participant (36 or the stricter 37).
    #[arg(long, default_value_t = DO_NOTHING_THRESHOLD)]
    pub do_nothing_threshold: usize,
    /// Skip the exclusion rules.
    #[arg(long)]
    pub no_exclude: bool,
}

#[derive(Debug, Args)]
pub struct PermuteArgs {
    #[arg(long = "in", env = "TEACHLAB_DATA_DIR")]
    pub input: PathBuf,
    #[arg(long)]
    pub participant: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "Q0")]
    pub learner: String,
    /// `optimal`, `random` or `noisy:P` (placement flipped with probability P).
    #[arg(long, default_value = "optimal")]
    pub teacher: String,
    #[arg(long, default_value_t = 30)]
    pub dogs: usize,
    #[arg(long, default_value_t = 3)]
    pub dogs_per_participant: usize,
    #[arg(long)]
    pub sync: bool,
    #[arg(long, default_value_t = 40)]
    pub max_steps: u64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Output NDJSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// NDJSON log file.
    #[arg(long = "in")]
    pub input: PathBuf,
}

/// Parse a condition tag or a learner spec string.
pub fn parse_learner(s: &str) -> Result<LearnerSpec> {
    if let Ok(c) = s.parse::<LearnerCondition>() {
        return Ok(c.spec());
    }
    s.parse::<LearnerSpec>().with_context(|| format!("unknown learner {s:?}"))
}

pub fn parse_teacher(s: &str) -> Result<SyntheticTeacher> {
    match s.split_once(':') {
        None if s == "optimal" => Ok(SyntheticTeacher::Optimal),
        None if s == "random" => Ok(SyntheticTeacher::Random),
        Some(("noisy", p)) => Ok(SyntheticTeacher::Noisy { p_flip: p.parse().with_context(|| format!("bad flip probability {p:?}"))? }),
        _ => bail!("unknown teacher {s:?}; expected optimal, random or noisy:P"),
    }
}

fn load_env(path: Option<&Path>) -> Result<EnvModel> {
    match path {
        None => Ok(dog_env()),
        Some(p) => {
            let cfg: EnvConfig = serde_json::from_reader(File::open(p).with_context(|| format!("opening {}", p.display()))?)?;
            Ok(EnvModel::from_config(cfg)?)
        }
    }
}

fn episode_config(t: &TeachArgs, seed: u64) -> EpisodeConfig {
    EpisodeConfig { epsilon: t.epsilon, max_steps: if t.max_steps == 0 { u64::MAX } else { t.max_steps }, seed, r_max: t.r_max }
}

fn summary_line(s: &MonteCarloSummary) -> String {
    format!(
        "{:<14} episodes {:>6}  success {:>6.2}%  mean steps {:.4}  se {:.4}  95% CI ({:.4}, {:.4})  max |r| {:.4}",
        s.learner.to_string(),
        s.n_episodes,
        100.0 * s.success_rate,
        s.mean_steps,
        s.std_err,
        s.ci95.0,
        s.ci95.1,
        s.max_abs_reward
    )
}

/// Run a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed.unwrap_or_else(rand_seed);
    writeln!(out, "seed: {seed}")?;
    let env = load_env(cli.env.as_deref())?;
    let goal = TeachingGoal::dog();
    match cli.command {
        Command::Solve(a) => {
            let start = Instant::now();
            let vt = solve_value_iteration(&env, &goal, SolverConfig { epsilon: a.epsilon, tol: a.tol, ..Default::default() })?;
            let td = teaching_dimension(&vt, &env);
            writeln!(out, "abstract states: {}", vt.mdp().len())?;
            writeln!(out, "sweeps: {}  residual: {:.2e}  time: {:?}", vt.iterations(), vt.residual(), start.elapsed())?;
            writeln!(out, "teaching dimension (epsilon = {}): {td:.6}", a.epsilon)?;
            if let Some(path) = a.dump {
                serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &vt.dump())?;
                writeln!(out, "value table written to {}", path.display())?;
            }
        }
        Command::Simulate(a) => {
            let spec = parse_learner(&a.learner)?;
            let vt = Arc::new(solve_value_iteration(&env, &goal, SolverConfig { epsilon: a.teach.epsilon, ..Default::default() })?);
            let policy = RealizedTeacherPolicy::new(vt.clone(), spec, a.teach.margin, a.teach.r_max)?;
            let cfg = episode_config(&a.teach, seed);
            let logs = monte_carlo_logs(&env, &goal, &policy, a.teach.episodes, cfg, |l| l)?;
            let steps = logs.iter().map(|l| l.outcome.and_then(|o| o.steps_used())).collect();
            let max_r = logs.iter().flat_map(|l| &l.steps).fold(0.0_f64, |m, s| m.max(s.feedback.value.abs()));
            let summary = MonteCarloSummary::from_outcomes(spec, steps, max_r);
            writeln!(out, "teaching dimension (solver): {:.6}", teaching_dimension(&vt, &env))?;
            writeln!(out, "{}", summary_line(&summary))?;
            if let Some(path) = a.logs {
                write_log_file(&path, &logs)?;
                writeln!(out, "{} logs written to {}", logs.len(), path.display())?;
            }
        }
        Command::Equivalence(a) => {
            let specs = if a.learners.is_empty() {
                reference_learners()
            } else {
                a.learners.iter().map(|s| parse_learner(s)).collect::<Result<_>>()?
            };
            let vt = Arc::new(solve_value_iteration(&env, &goal, SolverConfig { epsilon: a.teach.epsilon, ..Default::default() })?);
            let report = verify_equivalence(&env, &goal, vt, &specs, a.teach.margin, a.teach.episodes, episode_config(&a.teach, seed))?;
            writeln!(out, "teaching dimension (solver): {:.6}", report.teaching_dimension)?;
            for s in &report.summaries {
                writeln!(out, "{}", summary_line(s))?;
            }
            writeln!(out, "all pairwise 95% intervals overlap: {}", if report.all_overlap { "yes" } else { "no" })?;
        }
        Command::Serve(a) => {
            let store = Arc::new(SessionStore::new(a.data_dir.clone())?);
            let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad host or port")?;
            if let Some(d) = &a.data_dir {
                writeln!(out, "session logs go to {}", d.display())?;
            }
            out.flush()?;
            tokio::runtime::Runtime::new()?.block_on(crate::http::serve(store, addr))?;
        }
        Command::Analyze(AnalyzeCommand::Stats(a)) => {
            let records = load_records(&a.input)?;
            let records = if a.no_exclude {
                records
            } else {
                let len = match a.optimal_length {
                    Some(l) => l,
                    None => optimal_length(&env, &goal, 0.1)?,
                };
                let report = exclusion_filter(&records, len, a.do_nothing_threshold);
                writeln!(
                    out,
                    "optimal length {len} (lucky-path minimum {}), do-nothing threshold {}",
                    shortest_success_path(&env, &goal).map_or("-".into(), |n| n.to_string()),
                    a.do_nothing_threshold
                )?;
                writeln!(
                    out,
                    "kept {} dogs from {} participants; {} exclusions",
                    report.kept_dogs(),
                    report.kept.len(),
                    report.excluded.len()
                )?;
                for e in &report.excluded {
                    let dog = e.dog.map_or("all dogs".into(), |d| format!("dog {d}"));
                    writeln!(out, "  excluded {} ({dog}): {:?}", e.participant_id, e.reason)?;
                }
                report.kept
            };
            let stats = compute_condition_stats(&records);
            write!(out, "{}", stats.to_table())?;
            if let Some(path) = a.out {
                stats.write_csv(File::create(&path)?)?;
                writeln!(out, "table written to {}", path.display())?;
            }
        }
        Command::Analyze(AnalyzeCommand::Permute(a)) => {
            let records = load_records(&a.input)?;
            let p = records
                .iter()
                .find(|r| r.participant_id == a.participant)
                .with_context(|| format!("no participant {:?}", a.participant))?;
            let result = permutation_test(p, a.n, seed)?;
            writeln!(
                out,
                "participant {}: {} of {} simulated learners reached the target ({:.1}%)",
                result.participant_id,
                result.n_target_reached,
                result.n_simulations,
                100.0 * result.fraction_reached()
            )?;
        }
        Command::Synth(a) => {
            let spec = parse_learner(&a.learner)?;
            let teacher = parse_teacher(&a.teacher)?;
            let cfg = SynthConfig {
                dogs_per_participant: a.dogs_per_participant,
                sync: a.sync,
                episode: EpisodeConfig { epsilon: a.epsilon, max_steps: a.max_steps, ..Default::default() },
                ..Default::default()
            };
            let records = generate_synthetic_logs(&env, spec, teacher, a.dogs, seed, &cfg)?;
            let logs: Vec<_> = records.iter().flat_map(|r| r.logs.iter().cloned()).collect();
            write_log_file(&a.out, &logs)?;
            let wins = logs.iter().filter(|l| l.outcome.is_some_and(|o| o.is_success())).count();
            writeln!(out, "{} participants, {} dogs, {} successes written to {}", records.len(), logs.len(), wins, a.out.display())?;
        }
        Command::Replay(a) => {
            let logs = read_log_file(&a.input)?;
            let mut bad = 0;
            for (i, log) in logs.iter().enumerate() {
                match replay(log) {
                    Ok(_) => writeln!(out, "episode {i}: ok ({} steps, {:?})", log.steps.len(), log.outcome)?,
                    Err(e) => {
                        bad += 1;
                        writeln!(out, "episode {i}: {e}")?;
                    }
                }
            }
            if bad > 0 {
                bail!("{bad} of {} episodes failed replay", logs.len());
            }
        }
    }
    Ok(())
}

fn rand_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    teachlab::rng::split_seed(t as u64, std::process::id() as u64)
}
