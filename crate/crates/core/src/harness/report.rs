use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CampaignConfig, HarnessError};
use crate::oracle::{MevulClass, OracleConfig, OracleContext, Verdict};
use crate::scenario::Scenario;
use crate::world::{Transaction, WorldSpec, WorldState};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Verdicts kept in full per class; later ones are only counted.
pub const VERDICTS_PER_CLASS: u64 = 32;

/// Shortest replayable prefix ending at a class's first verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poc {
    pub class: MevulClass,
    pub tx_index: usize,
    /// Every class that fired at `tx_index`.
    pub classes: Vec<MevulClass>,
    pub transactions: Vec<Transaction>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    /// Distinct payable (contract, function) pairs executed.
    pub covered: usize,
    pub total: usize,
    pub fraction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that differs between
    /// reruns of the same configuration.
    pub generated_at: u64,
    pub config: CampaignConfig,
    pub scenario: Scenario,
    pub executed: usize,
    /// Index of the first transaction chosen by the learner.
    pub learner_from: Option<usize>,
    pub first_verdict: BTreeMap<MevulClass, usize>,
    pub verdict_counts: BTreeMap<MevulClass, u64>,
    pub verdicts: Vec<Verdict>,
    pub pocs: Vec<Poc>,
    pub coverage: Coverage,
}

impl Report {
    pub(super) fn new(scenario: &Scenario, cfg: &CampaignConfig) -> Report {
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: cfg.clone(),
            scenario: Scenario {
                witness: None,
                ..scenario.clone()
            },
            executed: 0,
            learner_from: None,
            first_verdict: BTreeMap::new(),
            verdict_counts: BTreeMap::new(),
            verdicts: Vec::new(),
            pocs: Vec::new(),
            coverage: Coverage::default(),
        }
    }

    pub(super) fn record(&mut self, verdicts: &[Verdict], trace: &[Transaction]) {
        let index = trace.len();
        let classes: Vec<MevulClass> = verdicts
            .iter()
            .map(|v| v.class)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for v in verdicts {
            let n = self.verdict_counts.entry(v.class).or_insert(0);
            *n += 1;
            if *n <= VERDICTS_PER_CLASS {
                self.verdicts.push(v.clone());
            }
        }
        for &c in &classes {
            if self.first_verdict.contains_key(&c) {
                continue;
            }
            self.first_verdict.insert(c, index);
            self.pocs.push(Poc {
                class: c,
                tx_index: index,
                classes: classes.clone(),
                transactions: trace.to_vec(),
            });
        }
    }

    pub fn classes(&self) -> BTreeSet<MevulClass> {
        self.first_verdict.keys().copied().collect()
    }

    pub fn has_verdicts(&self) -> bool {
        !self.first_verdict.is_empty()
    }

    /// Copy with the timestamp zeroed, for comparing reruns.
    pub fn without_timestamp(&self) -> Report {
        Report {
            generated_at: 0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Report, HarnessError> {
        let report: Report = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported report schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Report, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Report::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Executes `txs` on a fresh world built from `spec` and returns every
/// verdict.
pub fn replay(txs: &[Transaction], spec: &WorldSpec, cfg: &OracleConfig) -> Result<Vec<Verdict>, HarnessError> {
    let mut world = WorldState::build(spec)?;
    let mut oracle = OracleContext::new(&world, cfg);
    let mut out = Vec::new();
    for (i, tx) in txs.iter().enumerate() {
        let snap = world.execute(tx).map_err(|e| HarnessError::TransactionMismatch {
            index: i + 1,
            reason: e.to_string(),
        })?;
        out.extend(oracle.evaluate(&snap));
    }
    Ok(out)
}

/// Replays a PoC and checks that its class first fires at the recorded
/// index together with the recorded classes.
pub fn replay_poc(poc: &Poc, spec: &WorldSpec, cfg: &OracleConfig) -> Result<Vec<Verdict>, HarnessError> {
    let mismatch = |reason: String| HarnessError::ReplayMismatch { class: poc.class, reason };
    if poc.transactions.len() != poc.tx_index {
        return Err(mismatch(format!(
            "{} transactions for index {}",
            poc.transactions.len(),
            poc.tx_index
        )));
    }
    let verdicts = replay(&poc.transactions, spec, cfg)?;
    let first = verdicts.iter().find(|v| v.class == poc.class).map(|v| v.tx_index);
    if first != Some(poc.tx_index) {
        return Err(mismatch(format!("first fired at {first:?}, recorded {}", poc.tx_index)));
    }
    let at: Vec<MevulClass> = verdicts
        .iter()
        .filter(|v| v.tx_index == poc.tx_index)
        .map(|v| v.class)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if at != poc.classes {
        return Err(mismatch(format!("classes {at:?} at {}, recorded {:?}", poc.tx_index, poc.classes)));
    }
    Ok(verdicts)
}

/// Replays every PoC of `report`; returns how many were checked.
pub fn validate_report(report: &Report) -> Result<usize, HarnessError> {
    for poc in &report.pocs {
        if report.first_verdict.get(&poc.class) != Some(&poc.tx_index) {
            return Err(HarnessError::ReplayMismatch {
                class: poc.class,
                reason: "PoC index disagrees with the report's first verdict".into(),
            });
        }
        replay_poc(poc, &report.scenario.world, &report.config.oracle)?;
    }
    Ok(report.pocs.len())
}
