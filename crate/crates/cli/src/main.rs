//! `s2d`: command-line front end for sparse-to-dense reward experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use s2d_core::agents::SnapshotFile;
use s2d_core::envs::EnvSpec;
use s2d_core::harness::config::env_preset;
use s2d_core::harness::{compare_report, emit_plot, run_experiment, ExperimentConfig, Manifest, RunSummary};
use s2d_core::landscape::{cross_density_run, CrossDensitySpec};
use s2d_core::reward::{check_s2d_conditions, Density, StageReward};
use s2d_core::sharpness::{agent_sharpness, SharpnessConfig};
use s2d_core::Error;

#[derive(Parser)]
#[command(name = "s2d", version, about = "Sparse-to-dense reward transition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed experiment from a TOML config (or a previous manifest).
    Train(TrainArgs),
    /// Paired-branch landscape protocol around a reward transition.
    CrossDensity(CrossArgs),
    /// Sharpness of a saved snapshot over its stored evaluation batch.
    Sharpness(SharpArgs),
    /// Exact tabular checks.
    Oracle {
        #[command(subcommand)]
        check: OracleCommand,
    },
    /// Render a landscape CSV as an SVG heatmap with contours.
    Plot(PlotArgs),
    /// Compare finished runs by schedule.
    Report(ReportArgs),
}

#[derive(Args)]
struct Source {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the exact configuration recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the seed list, e.g. `--seeds 0,1,2`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl Source {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.manifest) {
            (Some(p), None) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            (None, Some(p)) => Manifest::load(p).with_context(|| format!("reading {}", p.display()))?.config,
            _ => return Err(Error::Config(vec!["give --config or --manifest".into()]).into()),
        };
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = &self.seeds {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if s.is_empty() || sorted.len() != s.len() {
                return Err(Error::Config(vec!["--seeds: must be nonempty and free of duplicates".into()]).into());
            }
            cfg.seeds = s.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    source: Source,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialDensity {
    Sparse,
    Dense,
}

#[derive(Args)]
struct CrossArgs {
    #[command(flatten)]
    source: Source,
    /// Reward density before the transition.
    #[arg(long, value_enum)]
    initial: InitialDensity,
    /// Transition time in the budget's unit (defaults to the config's transition or landscape anchor).
    #[arg(long)]
    transition: Option<u64>,
}

#[derive(Args)]
struct SharpArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Certify that potential-based shaping keeps the optimal policies of the sparse reward.
    CheckPbrs {
        /// gridworld-4x4 or gridworld-10x10.
        #[arg(long, default_value = "gridworld-4x4")]
        env: String,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the input path with an .svg extension.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories (each holding summary.json).
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = args.source.load()?;
    let art = run_experiment(&cfg)?;
    for s in &art.summary.seeds {
        match &s.error {
            None => println!(
                "seed {:>4}  episodes {:>6}  final return {:>9.4}  success {:.3}  sharpness {}",
                s.seed,
                s.episodes,
                s.final_return,
                s.success_rate,
                s.sharpness.map_or("-".into(), |v| format!("{v:.6}"))
            ),
            Some(e) => println!("seed {:>4}  FAILED: {e}", s.seed),
        }
    }
    println!("artifacts: {}", art.dir.display());
    if let Some((seed, e)) = art.failures.into_iter().next() {
        return Err(anyhow::Error::from(e).context(format!("seed {seed} failed")));
    }
    Ok(())
}

fn cross_density(args: CrossArgs) -> anyhow::Result<()> {
    let cfg = args.source.load()?;
    let probe = cfg.landscape.as_ref().map(|l| l.probe.clone()).unwrap_or_default();
    let transition = args
        .transition
        .or_else(|| cfg.curriculum.transitions.first().copied())
        .or_else(|| cfg.landscape.as_ref().map(|l| l.anchor))
        .ok_or_else(|| Error::Config(vec!["--transition: no transition in the config; pass one".into()]))?;
    let (initial, tag) = match args.initial {
        InitialDensity::Sparse => (Density::Sparse, "sparse"),
        InitialDensity::Dense => (Density::Dense, "dense"),
    };
    let spec = CrossDensitySpec {
        env: cfg.env.clone(),
        agent: cfg.agent.clone(),
        initial,
        transition,
        unit: cfg.budget.unit,
        budget: cfg.budget,
        probe,
    };
    let root = cfg.output_dir.join(format!("{}-cross-{tag}", cfg.run_id));
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let r = cross_density_run(&spec, seed, &cfg.run_id)?;
        let dir = root.join(format!("seed_{seed}"));
        for branch in [&r.keep, &r.switch] {
            for g in &branch.grids {
                write(&dir.join(format!("{}_{}.csv", branch.schedule, g.metadata.checkpoint)), &g.to_csv())?;
            }
            write(&dir.join(format!("{}_depth.json", branch.schedule)), &serde_json::to_string_pretty(&branch.depth)?)?;
            println!(
                "seed {seed:>4}  {:<10}  depths {:?}",
                branch.schedule.to_string(),
                branch.depth.depths.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>()
            );
        }
        results.push(serde_json::json!({
            "seed": seed,
            "keep": r.keep.depth,
            "switch": r.switch.depth,
        }));
    }
    write(&root.join("cross_density.json"), &serde_json::to_string_pretty(&results)?)?;
    println!("artifacts: {}", root.display());
    Ok(())
}

fn sharpness(args: SharpArgs) -> anyhow::Result<()> {
    let snap = SnapshotFile::load(&args.snapshot).with_context(|| format!("reading {}", args.snapshot.display()))?;
    let cfg = SharpnessConfig { rho: args.rho, p: args.p, batch_size: snap.eval_batch.len().max(1) };
    let s = agent_sharpness(&snap.agent, &snap.eval_batch, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn check_pbrs(env: &str, gamma: f64, tol: f64) -> anyhow::Result<()> {
    let spec = env_preset(env)
        .filter(|e| matches!(e, EnvSpec::Gridworld(_)))
        .ok_or_else(|| Error::Config(vec![format!("--env: {env:?} is not a gridworld preset")]))?;
    let grid = spec.as_gridworld()?;
    let stages = [StageReward::sparse(grid), StageReward::shaped(grid, gamma)];
    let cert = check_s2d_conditions(&spec, &stages, gamma, tol)?;
    println!("{}", serde_json::to_string_pretty(&cert)?);
    if !(cert.eq1_ok && cert.eq2_ok && cert.q_shift_ok) {
        bail!("certificate failed");
    }
    Ok(())
}

fn plot(args: PlotArgs) -> anyhow::Result<()> {
    let csv = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let svg = emit_plot(&csv)?;
    let out = args.output.unwrap_or_else(|| args.input.with_extension("svg"));
    write(&out, &svg)?;
    println!("{}", out.display());
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let runs = args
        .runs
        .iter()
        .map(|d| RunSummary::load(d).with_context(|| format!("reading run {}", d.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rep = compare_report(&runs)?;
    print!("{}", rep.to_text());
    if let Some(p) = args.json {
        write(&p, &serde_json::to_string_pretty(&rep)?)?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        Some(Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::CrossDensity(a) => cross_density(a),
        Command::Sharpness(a) => sharpness(a),
        Command::Oracle { check: OracleCommand::CheckPbrs { env, gamma, tol } } => check_pbrs(&env, gamma, tol),
        Command::Plot(a) => plot(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
