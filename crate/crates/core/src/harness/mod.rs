//! Campaign orchestration: rule stage, learner stage, oracle feedback,
//! reports and replay.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{LearnError, Learner, PolicyConfig, QTable};
use crate::oracle::{unit_interval, MevulClass, OracleConfig, OracleContext, OracleError, Verdict};
use crate::ratio::{self, Rational};
use crate::rules::{default_rules, parse_rules, Catalog, Rule, RuleParseError, RuleStrategy, StrategyError};
use crate::scenario::{self, Scenario, ScenarioError};
use crate::world::{Transaction, WorldError};

mod measure;
mod report;

pub use measure::{
    compare_strategies, run_matrix, sign_test, summarize, BenchMatrix, ClassStats, Sample, SignTest,
};
pub use report::{replay, replay_poc, validate_report, Coverage, Poc, Report, REPORT_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("rules `{path}`: {source}")]
    Rules { path: String, source: RuleParseError },
    #[error("cannot access `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("transaction {index} does not fit the world: {reason}")]
    TransactionMismatch { index: usize, reason: String },
    #[error("replay of {class} PoC diverged: {reason}")]
    ReplayMismatch { class: MevulClass, reason: String },
    #[error("malformed report: {0}")]
    Report(#[from] serde_json::Error),
}

/// Transaction generator for a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Rule stage followed by the learner.
    #[default]
    Full,
    /// Uniform draws over payable functions and actors.
    Random,
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(StrategyKind::Full),
            "random" => Ok(StrategyKind::Random),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopPolicy {
    /// Spend the whole budget.
    #[default]
    Never,
    /// Stop after the first step that produced any verdict.
    FirstVerdict,
    /// Stop once every labeled class of the scenario has fired.
    AllLabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Bundled scenario name or path to a scenario/world TOML file.
    pub scenario: String,
    /// Rule file; the bundled rules when absent.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub qtable: Option<PathBuf>,
    pub budget: u64,
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(with = "ratio::serde_text")]
    pub stage_split: Rational,
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub stop: StopPolicy,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            scenario: String::new(),
            rules: None,
            qtable: None,
            budget: 10_000,
            seed: 0,
            oracle: OracleConfig::default(),
            policy: PolicyConfig::default(),
            stage_split: ratio::frac(3, 10),
            strategy: StrategyKind::Full,
            stop: StopPolicy::Never,
        }
    }
}

impl CampaignConfig {
    pub fn for_scenario(scenario: impl Into<String>) -> Self {
        CampaignConfig {
            scenario: scenario.into(),
            ..CampaignConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.budget < 1 {
            return Err(HarnessError::Config("budget must be at least 1".into()));
        }
        self.oracle.validate()?;
        unit_interval("explore_eps", &self.policy.explore_eps)?;
        unit_interval("stage_split", &self.stage_split)?;
        Ok(())
    }

    /// Number of transactions reserved for the rule stage.
    pub fn rule_stage_len(&self) -> u64 {
        let n = (&self.stage_split * Rational::from_integer(BigInt::from(self.budget))).floor();
        n.to_integer().to_u64().unwrap_or(0)
    }
}

pub fn load_rules(path: Option<&Path>) -> Result<Vec<Rule>, HarnessError> {
    match path {
        None => Ok(default_rules()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| HarnessError::Io {
                path: p.display().to_string(),
                source,
            })?;
            parse_rules(&text).map_err(|source| HarnessError::Rules {
                path: p.display().to_string(),
                source,
            })
        }
    }
}

/// The table at `path`, or an empty one when the file does not exist yet.
pub fn load_qtable(path: Option<&Path>) -> Result<QTable, HarnessError> {
    match path {
        Some(p) if p.exists() => Ok(QTable::load(p)?),
        _ => Ok(QTable::default()),
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: Report,
    pub qtable: QTable,
}

/// Loads everything named in `cfg` and runs the campaign.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutcome, HarnessError> {
    cfg.validate()?;
    let scenario = scenario::resolve(&cfg.scenario)?;
    let rules = load_rules(cfg.rules.as_deref())?;
    let table = load_qtable(cfg.qtable.as_deref())?;
    run_scenario(&scenario, &rules, table, cfg)
}

enum Phase {
    Rules(Box<RuleStrategy>),
    Learn,
    Random,
}

/// Runs one campaign on an already loaded scenario.
pub fn run_scenario(
    scenario: &Scenario,
    rules: &[Rule],
    table: QTable,
    cfg: &CampaignConfig,
) -> Result<CampaignOutcome, HarnessError> {
    cfg.validate()?;
    let mut world = scenario.build_world()?;
    let mut report = Report::new(scenario, cfg);
    let catalog = match Catalog::new(&world) {
        Ok(c) => c,
        Err(StrategyError::Exhausted) => {
            log::warn!("scenario `{}` exposes no payable functions", scenario.name);
            return Ok(CampaignOutcome { report, qtable: table });
        }
        Err(e) => return Err(e.into()),
    };
    report.coverage.total = catalog.callables.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut oracle = OracleContext::new(&world, &cfg.oracle);
    let mut learner = Learner::new(table, cfg.policy.clone(), scenario.labels.clone(), &catalog);
    let rule_len = cfg.rule_stage_len();
    let mut phase = match cfg.strategy {
        StrategyKind::Random => Phase::Random,
        StrategyKind::Full if rule_len > 0 => Phase::Rules(Box::new(RuleStrategy::new(rules, &catalog))),
        StrategyKind::Full => Phase::Learn,
    };
    if matches!(phase, Phase::Learn) {
        report.learner_from = Some(1);
    }

    let mut trace: Vec<Transaction> = Vec::new();
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for i in 1..=cfg.budget {
        let (callable, tx) = match &mut phase {
            Phase::Rules(rs) => {
                let p = rs.next_transaction(&catalog, &world, &mut rng)?;
                (p.callable, p.tx)
            }
            Phase::Learn => learner.next_transaction(&catalog, &world, &mut rng)?,
            Phase::Random => RuleStrategy::uniform(&catalog, &world, &mut rng)?,
        };
        let snap = world.execute(&tx)?;
        let verdicts = oracle.evaluate(&snap);
        log::trace!("{i}: {tx} {:?} {:?}", snap.receipt, verdicts.iter().map(|v| v.class).collect::<Vec<_>>());
        trace.push(tx);
        covered.insert(callable);
        if !matches!(phase, Phase::Random) {
            learner.observe(&catalog.callables[callable].id(), &verdicts);
        }
        report.record(&verdicts, &trace);

        if let Phase::Rules(rs) = &mut phase {
            rs.observe(snap.receipt.is_success());
            if i >= rule_len || rs.all_passes_completed() {
                log::debug!("switching to learner after {i} transactions");
                phase = Phase::Learn;
                report.learner_from = Some(i as usize + 1);
            }
        }
        let stop = match cfg.stop {
            StopPolicy::Never => false,
            StopPolicy::FirstVerdict => !verdicts.is_empty(),
            StopPolicy::AllLabeled => {
                !scenario.labels.is_empty()
                    && scenario.labels.iter().all(|c| report.first_verdict.contains_key(c))
            }
        };
        if stop {
            break;
        }
    }
    report.executed = trace.len();
    report.coverage.covered = covered.len();
    report.coverage.fraction = ratio::format(&ratio::frac(
        covered.len() as i64,
        catalog.callables.len() as i64,
    ));
    Ok(CampaignOutcome {
        report,
        qtable: learner.into_table(),
    })
}

/// Index of each class's first verdict.
pub fn first_indices(verdicts: &[Verdict]) -> BTreeMap<MevulClass, usize> {
    let mut out = BTreeMap::new();
    for v in verdicts {
        out.entry(v.class).or_insert(v.tx_index);
    }
    out
}

#[cfg(test)]
mod tests;
