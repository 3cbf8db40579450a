//! Seeded scenario corpus: worlds with ground-truth labels and known
//! exploit sequences.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::MevulClass;
use crate::world::{StepSnapshot, Transaction, WorldError, WorldSpec, WorldState};

const REGISTRY: &[(&str, &str)] = &[
    ("silo-lending", include_str!("../../scenarios/silo-lending.toml")),
    ("share-ledger", include_str!("../../scenarios/share-ledger.toml")),
    ("txorigin-mint", include_str!("../../scenarios/txorigin-mint.toml")),
    ("donation-oracle", include_str!("../../scenarios/donation-oracle.toml")),
    ("overflow-shares", include_str!("../../scenarios/overflow-shares.toml")),
    ("clean-token", include_str!("../../scenarios/clean-token.toml")),
    ("clean-swap", include_str!("../../scenarios/clean-swap.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario `{0}` has no witness")]
    NoWitness(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub labels: BTreeSet<MevulClass>,
    /// Classes the witness also triggers as a side effect of its setup steps.
    #[serde(default)]
    pub incidental: BTreeSet<MevulClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Transaction>>,
    pub world: WorldSpec,
}

/// A replayed sequence together with the world it started from.
#[derive(Debug, Clone)]
pub struct Trace {
    pub initial: WorldState,
    pub steps: Vec<StepSnapshot>,
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn labeled_names() -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|(n, _)| !n.starts_with("clean-"))
        .map(|(n, _)| *n)
        .collect()
}

pub fn clean_names() -> Vec<&'static str> {
    REGISTRY
        .iter()
        .filter(|(n, _)| n.starts_with("clean-"))
        .map(|(n, _)| *n)
        .collect()
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Wraps a bare world spec as an unlabeled scenario.
    pub fn from_world(world: WorldSpec) -> Scenario {
        Scenario {
            name: world.name.clone(),
            description: String::new(),
            labels: BTreeSet::new(),
            incidental: BTreeSet::new(),
            witness: None,
            world,
        }
    }

    pub fn build_world(&self) -> Result<WorldState, WorldError> {
        WorldState::build(&self.world)
    }
}

pub fn load_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::Unknown(name.to_string()))?;
    Scenario::from_toml(text)
}

/// Loads a scenario file, or a bare world spec as an unlabeled scenario.
pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match Scenario::from_toml(&text) {
        Ok(s) => Ok(s),
        Err(scenario_err) => match WorldSpec::from_toml(&text) {
            Ok(mut w) => {
                if w.name.is_empty() {
                    w.name = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                }
                Ok(Scenario::from_world(w))
            }
            Err(_) => Err(scenario_err),
        },
    }
}

/// Registry name, or a path to a scenario or world file.
pub fn resolve(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    match load_scenario(name_or_path) {
        Err(ScenarioError::Unknown(_)) if Path::new(name_or_path).exists() => {
            load_scenario_file(Path::new(name_or_path))
        }
        other => other,
    }
}

/// Executes `txs` on a fresh world built from `spec`.
pub fn replay_sequence(spec: &WorldSpec, txs: &[Transaction]) -> Result<Trace, WorldError> {
    let initial = WorldState::build(spec)?;
    let mut world = initial.clone();
    let steps = txs
        .iter()
        .map(|tx| world.execute(tx))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace { initial, steps })
}

pub fn replay_witness(scenario: &Scenario) -> Result<Trace, ScenarioError> {
    let witness = scenario
        .witness
        .as_ref()
        .ok_or_else(|| ScenarioError::NoWitness(scenario.name.clone()))?;
    Ok(replay_sequence(&scenario.world, witness)?)
}

#[cfg(test)]
mod tests;
