use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use collusion_core::config::parse_config_at;
use collusion_core::harness::sweep::{note_session, preset_points, Scale, PRESETS};
use collusion_core::market::verify_bne;
use collusion_core::note::{bubble_probe, exploration_horizon, threshold_estimate};
use collusion_core::output::{analyze, emit_results, read_manifest, verify_digests};
use collusion_core::{run_experiment, ExperimentConfig, ExperimentSummary, SessionSeed};

#[derive(Parser)]
#[command(name = "collusion", version, about = "Q-learning pricing agents under coarse and fine buyer signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run(RunArgs),
    /// Run every point of a named preset.
    Sweep(SweepArgs),
    /// Recompute metrics from a stored run and compare with the originals.
    Analyze(AnalyzeArgs),
    /// Run the single-state environment with trace diagnostics.
    Note(NoteArgs),
    /// Print benchmarks and check the competitive profile for profitable deviations.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Reduced grids, session counts and period caps.
    #[arg(long)]
    desk_scale: bool,
}

impl Common {
    fn scale(&self) -> Scale {
        if self.desk_scale {
            Scale::Desk
        } else {
            Scale::Full
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(n) = self.sessions {
            cfg.sessions = n;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    preset: String,
    /// Parent directory; one subdirectory per grid point.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoteArgs {
    /// Defaults to the baseline single-state environment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sessions whose traces are written.
    #[arg(long, default_value_t = 1)]
    traced: usize,
    /// Estimate the minimum-action threshold from a note-min-action sweep directory.
    #[arg(long, conflicts_with_all = ["config", "out"])]
    threshold: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    desk_scale: bool,
}

fn load(path: &Path, scale: Scale) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config_at(&text, scale).with_context(|| format!("parsing {}", path.display()))
}

fn report(summary: &ExperimentSummary) {
    let a = &summary.aggregates;
    let ci = a.ci.as_ref().map_or_else(|| "NA".to_string(), |d| format!("{:.4}", d.mean));
    println!("sessions {} converged {} mean CI {ci}", a.sessions, a.converged);
}

fn execute(cfg: &ExperimentConfig, common: &Common, out: &Path, preset: Option<&str>, coords: &[(String, f64)]) -> Result<()> {
    let summary = run_experiment(cfg, common.parallel)?;
    let manifest = emit_results(&summary, out, preset, coords)?;
    report(&summary);
    println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = load(&args.config, args.common.scale())?;
    args.common.apply(&mut cfg);
    execute(&cfg, &args.common, &args.out, None, &[])
}

fn sweep(args: &SweepArgs) -> Result<()> {
    if !PRESETS.contains(&args.preset.as_str()) {
        bail!("unknown preset `{}`; available: {}", args.preset, PRESETS.join(", "));
    }
    let root = args.out.clone().unwrap_or_else(|| PathBuf::from("results").join(&args.preset));
    let points = preset_points(&args.preset, args.common.scale(), args.common.seed.unwrap_or(0))?;
    for (i, point) in points.iter().enumerate() {
        let mut cfg = point.experiment.clone();
        if let Some(n) = args.common.sessions {
            cfg.sessions = n;
        }
        let dir = root.join(format!("{i:03}-{}", point.label));
        print!("{}: ", point.label);
        execute(&cfg, &args.common, &dir, Some(&args.preset), &point.coordinates)?;
    }
    Ok(())
}

fn analyze_cmd(args: &AnalyzeArgs) -> Result<bool> {
    let analysis = analyze(&args.out)?;
    for check in &analysis.checks {
        println!("{} {}", check.name, if check.identical { "identical" } else { "DIFFERS" });
    }
    let tampered = verify_digests(&args.out)?;
    for name in &tampered {
        println!("{name} digest mismatch");
    }
    report(&analysis.summary);
    Ok(analysis.all_identical() && tampered.is_empty())
}

fn threshold(dir: &Path) -> Result<()> {
    let mut points = Vec::new();
    let mut entries: Vec<PathBuf> =
        fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?.map(|e| Ok(e?.path())).collect::<Result<_>>()?;
    entries.sort();
    for path in entries.into_iter().filter(|p| p.join("manifest.json").is_file()) {
        let manifest = read_manifest(&path)?;
        let Some(&(_, low)) = manifest.coordinates.iter().find(|(name, _)| name == "minAction") else {
            continue;
        };
        let analysis = analyze(&path)?;
        let ci = analysis.summary.aggregates.ci.as_ref().map_or(f64::NAN, |d| d.mean);
        println!("minAction {low} mean CI {ci:.4}");
        points.push((low, ci));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let estimate = threshold_estimate(&points)?;
    println!("threshold {estimate:.4}");
    Ok(())
}

fn note(args: &NoteArgs) -> Result<()> {
    if let Some(dir) = &args.threshold {
        return threshold(dir);
    }
    let scale = args.common.scale();
    let mut cfg = match &args.config {
        Some(path) => load(path, scale)?,
        None => {
            let sessions = if scale == Scale::Desk { 50 } else { 100 };
            ExperimentConfig::new(note_session(scale), sessions, 0)
        }
    };
    args.common.apply(&mut cfg);
    cfg.trace_sessions = args.traced.min(cfg.sessions);
    let horizon = exploration_horizon(cfg.session.beta);
    for s in 0..cfg.trace_sessions as u64 {
        let b = bubble_probe(&cfg.session, SessionSeed::new(cfg.master_seed, s), None)?;
        println!(
            "session {s} at period {horizon}: mean Q {:.4} range [{:.4}, {:.4}]",
            b.mean_q, b.min_q, b.max_q
        );
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("results").join("note"));
    execute(&cfg, &args.common, &out, None, &[])
}

fn verify(args: &VerifyArgs) -> Result<()> {
    let scale = if args.desk_scale { Scale::Desk } else { Scale::Full };
    let cfg = load(&args.config, scale)?;
    let market = cfg.session.market.build()?;
    let b = market.benchmarks();
    println!("pi_N = {}", tidy(b.nash_profit));
    println!("pi_M = {}", tidy(b.monopoly_profit));
    for (firm, prices) in b.monopoly_prices.iter().enumerate() {
        let list: Vec<String> = prices.iter().map(|&p| tidy(p)).collect();
        println!("firm {firm} monopoly prices by signal: {}", list.join(" "));
    }
    let nash = market.nash_profile();
    let verdict = verify_bne(&market, &nash)?;
    if verdict.is_equilibrium() {
        println!("competitive profile: no profitable deviation");
    } else {
        for d in &verdict.deviations {
            println!(
                "competitive profile: firm {} signal {} gains {} moving {} -> {}",
                d.firm,
                d.signal,
                tidy(d.gain),
                tidy(d.from_price),
                tidy(d.to_price)
            );
        }
    }
    Ok(())
}

fn tidy(x: f64) -> String {
    let rounded = (x * 1e10).round() / 1e10;
    format!("{}", if rounded == 0.0 { 0.0 } else { rounded })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a).map(|()| true),
        Command::Sweep(a) => sweep(a).map(|()| true),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Note(a) => note(a).map(|()| true),
        Command::Verify(a) => verify(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
