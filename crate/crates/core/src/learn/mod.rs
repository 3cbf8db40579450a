//! Self-learning generator: measurement, reward, the averaged Q-table and
//! the ε-greedy policy over payable functions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{fold_class, MevulClass, Verdict};
use crate::ratio::{self, Rational};
use crate::rules::{default_params, Catalog, StrategyError};
use crate::world::{Transaction, WorldState};

pub const QTABLE_VERSION: u32 = 1;

/// Function identity of the state before any transaction.
pub const START: &str = "<start>";

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no candidate functions")]
    NoCandidates,
    #[error("unsupported q-table version {0}")]
    Version(u32),
    #[error("q-table entry {0} out of range")]
    OutOfRange(String),
    #[error("cannot read or write q-table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed q-table: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Detected error class, `None` when the step produced no verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    None,
    TA,
    BC,
    ES,
    VS,
}

impl From<Option<MevulClass>> for ErrorClass {
    fn from(c: Option<MevulClass>) -> Self {
        match c {
            None => ErrorClass::None,
            Some(MevulClass::TA) => ErrorClass::TA,
            Some(MevulClass::BC) => ErrorClass::BC,
            Some(MevulClass::ES) => ErrorClass::ES,
            Some(MevulClass::VS) => ErrorClass::VS,
        }
    }
}

impl ErrorClass {
    pub fn class(self) -> Option<MevulClass> {
        match self {
            ErrorClass::None => None,
            ErrorClass::TA => Some(MevulClass::TA),
            ErrorClass::BC => Some(MevulClass::BC),
            ErrorClass::ES => Some(MevulClass::ES),
            ErrorClass::VS => Some(MevulClass::VS),
        }
    }
}

/// 1 when a labeled class was hit, 1/2 for any error on an unlabeled
/// contract, else 0.
pub fn measure(e: ErrorClass, labels: &BTreeSet<MevulClass>) -> Rational {
    match e.class() {
        Some(c) if !labels.is_empty() && labels.contains(&c) => ratio::one(),
        Some(_) if labels.is_empty() => ratio::frac(1, 2),
        _ => ratio::zero(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Reward strict improvement.
    #[default]
    Improved,
    /// Reward `m_curr <= m_prev`.
    NotWorse,
}

impl std::str::FromStr for RewardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "improved" => Ok(RewardMode::Improved),
            "not-worse" => Ok(RewardMode::NotWorse),
            _ => Err(format!("unknown reward mode `{s}`")),
        }
    }
}

pub fn reward(m_prev: &Rational, m_curr: &Rational, mode: RewardMode) -> Rational {
    let hit = match mode {
        RewardMode::Improved => m_curr > m_prev,
        RewardMode::NotWorse => m_curr <= m_prev,
    };
    if hit {
        ratio::one()
    } else {
        ratio::zero()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub function: String,
    pub error: ErrorClass,
}

impl StateKey {
    pub fn new(function: impl Into<String>, error: ErrorClass) -> Self {
        StateKey {
            function: function.into(),
            error,
        }
    }

    pub fn start() -> Self {
        StateKey::new(START, ErrorClass::None)
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:?})", self.function, self.error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QEntry {
    pub q: Rational,
    pub visits: u64,
}

impl Default for QEntry {
    /// Optimistic prior for unvisited pairs.
    fn default() -> Self {
        QEntry {
            q: ratio::one(),
            visits: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QTable {
    entries: BTreeMap<(StateKey, String), QEntry>,
}

#[derive(Serialize, Deserialize)]
struct QFile {
    version: u32,
    entries: Vec<QRecord>,
}

#[derive(Serialize, Deserialize)]
struct QRecord {
    state: StateKey,
    action: String,
    #[serde(with = "ratio::serde_text")]
    q: Rational,
    visits: u64,
}

impl QTable {
    pub fn get(&self, state: &StateKey, action: &str) -> QEntry {
        self.entries
            .get(&(state.clone(), action.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn q(&self, state: &StateKey, action: &str) -> Rational {
        self.get(state, action).q
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, &str, &QEntry)> {
        self.entries.iter().map(|((s, a), e)| (s, a.as_str(), e))
    }

    /// `Q ← ((n−1)/n)·Q + r·m/n` with `n` the visit count after increment.
    pub fn update(&mut self, state: &StateKey, action: &str, r: &Rational, m: &Rational) {
        let entry = self
            .entries
            .entry((state.clone(), action.to_string()))
            .or_default();
        entry.visits += 1;
        let n = Rational::from_integer(BigInt::from(entry.visits));
        entry.q = (&n - Rational::one()) / &n * &entry.q + r * m / &n;
    }

    /// Visit-weighted average of two tables.
    pub fn merge(&self, other: &QTable) -> QTable {
        let mut out = self.clone();
        for (key, b) in &other.entries {
            let merged = match out.entries.get(key) {
                Some(a) if a.visits + b.visits > 0 => {
                    let (na, nb) = (
                        Rational::from_integer(BigInt::from(a.visits)),
                        Rational::from_integer(BigInt::from(b.visits)),
                    );
                    QEntry {
                        q: (&a.q * &na + &b.q * &nb) / (na + nb),
                        visits: a.visits + b.visits,
                    }
                }
                _ => b.clone(),
            };
            out.entries.insert(key.clone(), merged);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = QFile {
            version: QTABLE_VERSION,
            entries: self
                .entries
                .iter()
                .map(|((s, a), e)| QRecord {
                    state: s.clone(),
                    action: a.clone(),
                    q: e.q.clone(),
                    visits: e.visits,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("q-table serializes")
    }

    pub fn from_json(text: &str) -> Result<QTable, LearnError> {
        let file: QFile = serde_json::from_str(text)?;
        if file.version != QTABLE_VERSION {
            return Err(LearnError::Version(file.version));
        }
        let mut table = QTable::default();
        for r in file.entries {
            if r.q < ratio::zero() || r.q > ratio::one() {
                return Err(LearnError::OutOfRange(format!("{} / {}", r.state, r.action)));
            }
            table.entries.insert((r.state, r.action), QEntry { q: r.q, visits: r.visits });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<QTable, LearnError> {
        QTable::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Index of the highest-Q candidate; ties go to the lowest index.
pub fn argmax(table: &QTable, state: &StateKey, candidates: &[String]) -> Option<usize> {
    let mut best: Option<(usize, Rational)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let q = table.q(state, c);
        if best.as_ref().map(|(_, b)| q > *b).unwrap_or(true) {
            best = Some((i, q));
        }
    }
    best.map(|(i, _)| i)
}

/// Exact selection probabilities of the ε-policy.
pub fn policy_distribution(
    table: &QTable,
    state: &StateKey,
    candidates: &[String],
    explore_eps: &Rational,
) -> Vec<Rational> {
    let Some(best) = argmax(table, state, candidates) else {
        return Vec::new();
    };
    if candidates.len() == 1 {
        return vec![ratio::one()];
    }
    let others = Rational::from_integer(BigInt::from(candidates.len() - 1));
    (0..candidates.len())
        .map(|i| {
            if i == best {
                ratio::one() - explore_eps
            } else {
                explore_eps / &others
            }
        })
        .collect()
}

/// The greedy candidate with probability `1 − ε`, otherwise one of the
/// rest uniformly.
pub fn select_next<R: Rng + ?Sized>(
    table: &QTable,
    state: &StateKey,
    candidates: &[String],
    explore_eps: f64,
    rng: &mut R,
) -> Result<usize, LearnError> {
    let best = argmax(table, state, candidates).ok_or(LearnError::NoCandidates)?;
    if candidates.len() == 1 || rng.gen::<f64>() >= explore_eps {
        return Ok(best);
    }
    let k = rng.gen_range(0..candidates.len() - 1);
    Ok(if k >= best { k + 1 } else { k })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(with = "ratio::serde_text")]
    pub explore_eps: Rational,
    #[serde(default)]
    pub reward_mode: RewardMode,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            explore_eps: ratio::frac(1, 10),
            reward_mode: RewardMode::Improved,
        }
    }
}

/// The learning state carried between steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzingState {
    pub key: StateKey,
    pub labels: BTreeSet<MevulClass>,
    pub measurement: Rational,
}

/// Q-table plus current state; fed every executed step and asked for the
/// next function.
#[derive(Debug, Clone)]
pub struct Learner {
    table: QTable,
    cfg: PolicyConfig,
    eps: f64,
    state: FuzzingState,
    candidates: Vec<String>,
}

impl Learner {
    pub fn new(table: QTable, cfg: PolicyConfig, labels: BTreeSet<MevulClass>, catalog: &Catalog) -> Self {
        Learner {
            eps: ratio::to_f64(&cfg.explore_eps),
            table,
            cfg,
            state: FuzzingState {
                key: StateKey::start(),
                labels,
                measurement: ratio::zero(),
            },
            candidates: catalog.callables.iter().map(|c| c.id()).collect(),
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn into_table(self) -> QTable {
        self.table
    }

    pub fn state(&self) -> &FuzzingState {
        &self.state
    }

    /// Folds the step's verdicts into the state and updates Q for the
    /// (previous state, executed function) pair. Returns `(r, m)`.
    pub fn observe(&mut self, function: &str, verdicts: &[Verdict]) -> (Rational, Rational) {
        let e = ErrorClass::from(fold_class(verdicts));
        let m = measure(e, &self.state.labels);
        let r = reward(&self.state.measurement, &m, self.cfg.reward_mode);
        self.table.update(&self.state.key, function, &r, &m);
        self.state.key = StateKey::new(function, e);
        self.state.measurement = m.clone();
        (r, m)
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize, LearnError> {
        select_next(&self.table, &self.state.key, &self.candidates, self.eps, rng)
    }

    /// Picks a function by the ε-policy and fills default arguments.
    pub fn next_transaction<R: Rng + ?Sized>(
        &self,
        catalog: &Catalog,
        world: &WorldState,
        rng: &mut R,
    ) -> Result<(usize, Transaction), LearnError> {
        let idx = self.select(rng)?;
        let callable = &catalog.callables[idx];
        let sender = catalog
            .actors
            .choose(rng)
            .ok_or(StrategyError::NoActors)?
            .clone();
        let args = default_params(callable, &sender, catalog, world, rng)?;
        Ok((
            idx,
            Transaction {
                target: callable.contract.clone(),
                function: callable.spec.name.clone(),
                args,
                sender,
            },
        ))
    }
}

#[cfg(test)]
mod tests;
