use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_qtable, load_rules, run_scenario, CampaignConfig, HarnessError, StopPolicy, StrategyKind};
use crate::oracle::MevulClass;
use crate::scenario::{self, Scenario};

/// Cells of a transactions-to-detection experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchMatrix {
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Scenario names or paths; the labeled corpus when empty.
    #[serde(default)]
    pub scenarios: Vec<String>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_stop")]
    pub stop: StopPolicy,
}

fn default_budget() -> u64 {
    10_000
}

fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::Full, StrategyKind::Random]
}

fn default_stop() -> StopPolicy {
    StopPolicy::AllLabeled
}

impl Default for BenchMatrix {
    fn default() -> Self {
        BenchMatrix {
            budget: default_budget(),
            scenarios: Vec::new(),
            strategies: default_strategies(),
            stop: default_stop(),
        }
    }
}

impl BenchMatrix {
    pub fn from_toml(text: &str) -> Result<BenchMatrix, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Outcome of one campaign in the matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub scenario: String,
    pub labels: BTreeSet<MevulClass>,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub budget: u64,
    pub first: BTreeMap<MevulClass, u64>,
}

impl Sample {
    /// Transactions to the first verdict of `class`; `budget + 1` when it
    /// never fired.
    pub fn cost(&self, class: MevulClass) -> u64 {
        self.first.get(&class).copied().unwrap_or(self.budget + 1)
    }
}

/// Runs every (scenario, strategy, seed) cell in parallel.
pub fn run_matrix(
    matrix: &BenchMatrix,
    base: &CampaignConfig,
    seeds: &[u64],
) -> Result<Vec<Sample>, HarnessError> {
    let names: Vec<String> = if matrix.scenarios.is_empty() {
        scenario::labeled_names().iter().map(|s| s.to_string()).collect()
    } else {
        matrix.scenarios.clone()
    };
    let scenarios: Vec<Scenario> = names
        .iter()
        .map(|n| scenario::resolve(n))
        .collect::<Result<_, _>>()?;
    let rules = load_rules(base.rules.as_deref())?;
    let table = load_qtable(base.qtable.as_deref())?;

    let mut jobs = Vec::new();
    for (si, _) in scenarios.iter().enumerate() {
        for &strategy in &matrix.strategies {
            for &seed in seeds {
                jobs.push((si, strategy, seed));
            }
        }
    }
    jobs.par_iter()
        .map(|&(si, strategy, seed)| {
            let sc = &scenarios[si];
            let cfg = CampaignConfig {
                scenario: sc.name.clone(),
                budget: matrix.budget,
                seed,
                strategy,
                stop: matrix.stop,
                ..base.clone()
            };
            let out = run_scenario(sc, &rules, table.clone(), &cfg)?;
            Ok(Sample {
                scenario: sc.name.clone(),
                labels: sc.labels.clone(),
                strategy,
                seed,
                budget: matrix.budget,
                first: out
                    .report
                    .first_verdict
                    .iter()
                    .map(|(c, i)| (*c, *i as u64))
                    .collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub strategy: StrategyKind,
    pub class: MevulClass,
    pub runs: usize,
    pub detected: usize,
    pub mean: f64,
    /// Sample variance; undefined for a single run.
    pub variance: Option<f64>,
}

/// Mean and variance of transactions-to-first-verdict per (strategy,
/// class), over the scenarios labeled with that class.
pub fn summarize(samples: &[Sample]) -> Vec<ClassStats> {
    let strategies: BTreeSet<StrategyKind> = samples.iter().map(|s| s.strategy).collect();
    let mut out = Vec::new();
    for strategy in strategies {
        for class in MevulClass::ALL {
            let costs: Vec<f64> = samples
                .iter()
                .filter(|s| s.strategy == strategy && s.labels.contains(&class))
                .map(|s| s.cost(class) as f64)
                .collect();
            if costs.is_empty() {
                continue;
            }
            let n = costs.len();
            let mean = costs.iter().sum::<f64>() / n as f64;
            let variance = if n < 2 {
                log::warn!("{strategy:?}/{class}: one run, variance undefined");
                None
            } else {
                Some(costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
            };
            let detected = samples
                .iter()
                .filter(|s| s.strategy == strategy && s.labels.contains(&class) && s.first.contains_key(&class))
                .count();
            out.push(ClassStats {
                strategy,
                class,
                runs: n,
                detected,
                mean,
                variance,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the first strategy needed fewer transactions.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided `P(X >= wins)` for `X ~ Bin(wins + losses, 1/2)`.
    pub p_value: f64,
}

pub fn sign_test(pairs: impl IntoIterator<Item = (u64, u64)>) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0usize, 0usize, 0usize);
    for (a, b) in pairs {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Greater => losses += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins + losses;
    let mut tail = BigInt::zero();
    let mut binom = BigInt::one();
    for k in 0..=n {
        if k >= wins {
            tail += &binom;
        }
        binom = binom * BigInt::from(n - k) / BigInt::from(k + 1);
    }
    let total = BigInt::one() << n;
    SignTest {
        wins,
        losses,
        ties,
        p_value: crate::ratio::to_f64(&crate::Rational::new(tail, total)),
    }
}

/// Sign test of strategy `a` against `b` on `class`, pairing runs by
/// scenario and seed.
pub fn compare_strategies(samples: &[Sample], class: MevulClass, a: StrategyKind, b: StrategyKind) -> SignTest {
    let key = |s: &Sample| (s.scenario.clone(), s.seed);
    let other: BTreeMap<(String, u64), &Sample> = samples
        .iter()
        .filter(|s| s.strategy == b && s.labels.contains(&class))
        .map(|s| (key(s), s))
        .collect();
    sign_test(
        samples
            .iter()
            .filter(|s| s.strategy == a && s.labels.contains(&class))
            .filter_map(|s| other.get(&key(s)).map(|o| (s.cost(class), o.cost(class)))),
    )
}
