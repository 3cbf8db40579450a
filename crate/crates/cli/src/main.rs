use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mevfuzz_core::harness::{
    self, compare_strategies, run_matrix, summarize, validate_report, BenchMatrix, CampaignConfig,
    HarnessError, Report, StopPolicy, StrategyKind,
};
use mevfuzz_core::learn::RewardMode;
use mevfuzz_core::oracle::{MevulClass, TaMode, VsScope};
use mevfuzz_core::ratio;
use mevfuzz_core::scenario;
use mevfuzz_core::Rational;

const EXIT_VERDICTS: u8 = 10;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "mevfuzz", version, about = "Stateful fuzzer for monetary bugs in simulated DeFi worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign and write its report.
    Fuzz(FuzzArgs),
    /// Replay every PoC in a report and check it reproduces.
    Replay {
        #[arg(long, env = "MEVFUZZ_REPORT")]
        report: PathBuf,
    },
    /// Transactions-to-detection experiment over a scenario matrix.
    Bench(BenchArgs),
    /// List bundled scenarios.
    Scenarios,
}

fn rational(s: &str) -> Result<Rational, String> {
    ratio::parse(s).map_err(|e| e.to_string())
}

fn ta_mode(s: &str) -> Result<TaMode, String> {
    match s {
        "corrected" => Ok(TaMode::Corrected),
        "summed" => Ok(TaMode::Summed),
        _ => Err(format!("expected corrected or summed, got `{s}`")),
    }
}

fn vs_scope(s: &str) -> Result<VsScope, String> {
    match s {
        "monitored" => Ok(VsScope::Monitored),
        "all" => Ok(VsScope::All),
        _ => Err(format!("expected monitored or all, got `{s}`")),
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long, env = "MEVFUZZ_RULES")]
    rules: Option<PathBuf>,
    #[arg(long, env = "MEVFUZZ_QTABLE")]
    qtable: Option<PathBuf>,
    #[arg(long, env = "MEVFUZZ_TOL_EPS", value_parser = rational, default_value = "0.05")]
    tol_eps: Rational,
    #[arg(long, env = "MEVFUZZ_LAMBDA", value_parser = rational, default_value = "0.2")]
    lambda: Rational,
    #[arg(long, env = "MEVFUZZ_EXPLORE_EPS", value_parser = rational, default_value = "0.1")]
    explore_eps: Rational,
    #[arg(long, env = "MEVFUZZ_REWARD_MODE", default_value = "improved")]
    reward_mode: RewardMode,
    #[arg(long, env = "MEVFUZZ_TA_MODE", value_parser = ta_mode, default_value = "corrected")]
    ta_mode: TaMode,
    #[arg(long, env = "MEVFUZZ_VS_SCOPE", value_parser = vs_scope, default_value = "monitored")]
    vs_scope: VsScope,
    #[arg(long, env = "MEVFUZZ_STAGE_SPLIT", value_parser = rational, default_value = "0.3")]
    stage_split: Rational,
}

impl CampaignArgs {
    fn config(&self, scenario: String, budget: u64, seed: u64) -> CampaignConfig {
        let mut cfg = CampaignConfig {
            scenario,
            rules: self.rules.clone(),
            qtable: self.qtable.clone(),
            budget,
            seed,
            stage_split: self.stage_split.clone(),
            ..CampaignConfig::default()
        };
        cfg.oracle.tol_eps = self.tol_eps.clone();
        cfg.oracle.lambda = self.lambda.clone();
        cfg.oracle.ta_mode = self.ta_mode;
        cfg.oracle.vs_scope = self.vs_scope;
        cfg.policy.explore_eps = self.explore_eps.clone();
        cfg.policy.reward_mode = self.reward_mode;
        cfg
    }
}

#[derive(Args)]
struct FuzzArgs {
    /// Bundled scenario name or path to a scenario or world TOML file.
    #[arg(long, env = "MEVFUZZ_SCENARIO")]
    scenario: String,
    #[arg(long, env = "MEVFUZZ_BUDGET", default_value_t = 10_000)]
    budget: u64,
    #[arg(long, env = "MEVFUZZ_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "MEVFUZZ_STRATEGY", default_value = "full")]
    strategy: StrategyKind,
    /// Stop at the first step that produces a verdict.
    #[arg(long, env = "MEVFUZZ_EARLY_STOP")]
    early_stop: bool,
    #[arg(long, env = "MEVFUZZ_REPORT_OUT")]
    report_out: PathBuf,
    #[command(flatten)]
    campaign: CampaignArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML matrix; the labeled corpus with both strategies when absent.
    #[arg(long, env = "MEVFUZZ_MATRIX")]
    matrix: Option<PathBuf>,
    #[arg(long, env = "MEVFUZZ_SEEDS", default_value_t = 20)]
    seeds: u64,
    /// Write raw samples as JSON.
    #[arg(long, env = "MEVFUZZ_BENCH_OUT")]
    out: Option<PathBuf>,
    #[command(flatten)]
    campaign: CampaignArgs,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>() {
        Some(HarnessError::Config(_) | HarnessError::Oracle(_)) => EXIT_USAGE,
        Some(HarnessError::Io { .. }) => EXIT_IO,
        Some(
            HarnessError::Scenario(_)
            | HarnessError::Rules { .. }
            | HarnessError::Report(_)
            | HarnessError::Learn(_)
            | HarnessError::TransactionMismatch { .. }
            | HarnessError::ReplayMismatch { .. },
        ) => EXIT_DATA,
        Some(_) => EXIT_SOFTWARE,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_IO,
        None => EXIT_SOFTWARE,
    }
}

fn fuzz(args: &FuzzArgs) -> anyhow::Result<u8> {
    let mut cfg = args.campaign.config(args.scenario.clone(), args.budget, args.seed);
    cfg.strategy = args.strategy;
    if args.early_stop {
        cfg.stop = StopPolicy::FirstVerdict;
    }
    let out = harness::run_campaign(&cfg)?;
    out.report.save(&args.report_out)?;
    if let Some(path) = &cfg.qtable {
        out.qtable.save(path).map_err(HarnessError::from)?;
    }
    let r = &out.report;
    println!(
        "{}: {} transactions, coverage {}/{}",
        r.scenario.name, r.executed, r.coverage.covered, r.coverage.total
    );
    for (class, index) in &r.first_verdict {
        println!("  {class} first at tx {index} ({} total)", r.verdict_counts[class]);
    }
    Ok(if r.has_verdicts() { EXIT_VERDICTS } else { 0 })
}

fn replay(path: &Path) -> anyhow::Result<u8> {
    let report = Report::load(path)?;
    let checked = validate_report(&report)?;
    println!("{checked} PoC(s) reproduced");
    Ok(if report.has_verdicts() { EXIT_VERDICTS } else { 0 })
}

fn bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let matrix = match &args.matrix {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            BenchMatrix::from_toml(&text)?
        }
        None => BenchMatrix::default(),
    };
    if args.seeds == 0 {
        return Err(HarnessError::Config("--seeds must be at least 1".into()).into());
    }
    let base = args.campaign.config(String::new(), matrix.budget, 0);
    base.validate()?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let samples = run_matrix(&matrix, &base, &seeds)?;
    println!("{:<8} {:<5} {:>5} {:>9} {:>12} {:>14}", "strategy", "class", "runs", "detected", "mean", "variance");
    for s in summarize(&samples) {
        println!(
            "{:<8} {:<5} {:>5} {:>9} {:>12.1} {:>14}",
            format!("{:?}", s.strategy).to_lowercase(),
            s.class.to_string(),
            s.runs,
            s.detected,
            s.mean,
            s.variance.map(|v| format!("{v:.1}")).unwrap_or_else(|| "n/a".into())
        );
    }
    if matrix.strategies.contains(&StrategyKind::Full) && matrix.strategies.contains(&StrategyKind::Random) {
        for class in MevulClass::ALL {
            let t = compare_strategies(&samples, class, StrategyKind::Full, StrategyKind::Random);
            if t.wins + t.losses + t.ties > 0 {
                println!(
                    "sign test {class}: full faster in {}, slower in {}, tied {}, p = {:.4}",
                    t.wins, t.losses, t.ties, t.p_value
                );
            }
        }
    }
    if let Some(p) = &args.out {
        std::fs::write(p, serde_json::to_string_pretty(&samples)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MEVFUZZ_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Fuzz(a) => fuzz(a),
        Command::Replay { report } => replay(report),
        Command::Bench(a) => bench(a),
        Command::Scenarios => {
            for name in scenario::names() {
                let s = scenario::load_scenario(name).expect("bundled scenario loads");
                let labels: Vec<String> = s.labels.iter().map(|c| c.to_string()).collect();
                println!("{name:<18} [{}] {}", labels.join(","), s.description);
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
