//! The four monetary-safety checkers and the per-campaign evaluation context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::{self, Rational};
use crate::world::{
    AccountId, FunctionSpec, ParamKind, Prices, Role, StepSnapshot, TokenSymbol, Value,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MevulClass {
    /// Transfer arrival.
    TA,
    /// Balance conservation over benign accounts.
    BC,
    /// Swap-rate stability.
    ES,
    /// Fund-value stability.
    VS,
}

impl MevulClass {
    pub const ALL: [MevulClass; 4] = [MevulClass::TA, MevulClass::BC, MevulClass::ES, MevulClass::VS];
}

impl fmt::Display for MevulClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("unknown MEVul class `{0}`")]
    UnknownClass(String),
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: String },
}

impl FromStr for MevulClass {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TA" => Ok(MevulClass::TA),
            "BC" => Ok(MevulClass::BC),
            "ES" => Ok(MevulClass::ES),
            "VS" => Ok(MevulClass::VS),
            _ => Err(OracleError::UnknownClass(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaMode {
    /// Sender decrease and recipient increase both equal the amount.
    #[default]
    Corrected,
    /// Sender decrease plus recipient increase equals twice the amount.
    Summed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VsScope {
    /// The world's monitored accounts (all accounts when none are declared).
    #[default]
    Monitored,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    #[serde(with = "ratio::serde_text")]
    pub tol_eps: Rational,
    #[serde(with = "ratio::serde_text")]
    pub lambda: Rational,
    #[serde(default)]
    pub ta_mode: TaMode,
    #[serde(default)]
    pub vs_scope: VsScope,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol_eps: ratio::frac(1, 20),
            lambda: ratio::frac(1, 5),
            ta_mode: TaMode::Corrected,
            vs_scope: VsScope::Monitored,
        }
    }
}

pub(crate) fn unit_interval(name: &'static str, value: &Rational) -> Result<(), OracleError> {
    if value.is_negative() || *value > ratio::one() {
        return Err(OracleError::OutOfRange {
            name,
            value: ratio::format(value),
        });
    }
    Ok(())
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        unit_interval("tol_eps", &self.tol_eps)?;
        unit_interval("lambda", &self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub class: MevulClass,
    pub tx_index: usize,
    /// Exact rational text for every value the decision used.
    pub evidence: BTreeMap<String, String>,
}

impl Verdict {
    fn new(class: MevulClass, tx_index: usize, evidence: &[(&str, String)]) -> Self {
        Verdict {
            class,
            tx_index,
            evidence: evidence
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }
}

/// Fixed role assignment of a world.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roles(BTreeMap<AccountId, Role>);

impl Roles {
    pub fn of(world: &WorldState) -> Self {
        Roles(world.accounts().map(|a| (a.id.clone(), a.role)).collect())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (AccountId, Role)>) -> Self {
        Roles(pairs.into_iter().collect())
    }

    pub fn is_benign(&self, id: &AccountId) -> bool {
        self.0.get(id).map(|r| r.is_benign()).unwrap_or(false)
    }

    pub fn attackers(&self) -> impl Iterator<Item = &AccountId> {
        self.0.iter().filter(|(_, r)| !r.is_benign()).map(|(a, _)| a)
    }
}

/// Source, recipient, token and declared amount of a transfer-like call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferParties {
    pub from: AccountId,
    pub to: AccountId,
    pub token: TokenSymbol,
    pub amount: Rational,
}

/// Resolves the parties of a transfer-like call: the source is the first of
/// two address parameters (else the sender), the recipient the last address
/// parameter, the token the token parameter (else the function's asset).
pub fn transfer_parties(spec: &FunctionSpec, sender: &AccountId, args: &[Value]) -> Option<TransferParties> {
    if !spec.transfer_like {
        return None;
    }
    let mut addresses = Vec::new();
    let mut token = None;
    let mut amount = None;
    for (p, a) in spec.params.iter().zip(args) {
        match (p.kind, a) {
            (ParamKind::Address, Value::Address(id)) => addresses.push(id.clone()),
            (ParamKind::Token, Value::Token(t)) if token.is_none() => token = Some(t.clone()),
            (ParamKind::Amount, Value::Amount(v)) if amount.is_none() => amount = Some(v.clone()),
            _ => {}
        }
    }
    let to = addresses.last()?.clone();
    let from = if addresses.len() >= 2 {
        addresses[0].clone()
    } else {
        sender.clone()
    };
    Some(TransferParties {
        from,
        to,
        token: token.or_else(|| spec.asset.clone())?,
        amount: amount?,
    })
}

fn applicable(snap: &StepSnapshot) -> bool {
    snap.receipt.is_success() && !snap.readonly
}

pub fn check_transfer_arrival(
    spec: &FunctionSpec,
    snap: &StepSnapshot,
    roles: &Roles,
    mode: TaMode,
) -> Option<Verdict> {
    if !applicable(snap) {
        return None;
    }
    let parties = transfer_parties(spec, &snap.tx.sender, &snap.tx.args)?;
    let TransferParties { from, to, token, amount } = parties;
    if from == to || !roles.is_benign(&from) || !roles.is_benign(&to) {
        return None;
    }
    let (b0, b1) = (&snap.balances_before, &snap.balances_after);
    let decrease = b0.get(&from, &token) - b1.get(&from, &token);
    let increase = b1.get(&to, &token) - b0.get(&to, &token);
    let attacker_delta = roles
        .attackers()
        .map(|a| (b1.get(a, &token) - b0.get(a, &token)).abs())
        .fold(ratio::zero(), |acc, d| acc + d);
    let f = ratio::format;
    let (lhs, rhs) = match mode {
        TaMode::Corrected => (
            vec![decrease.clone(), increase.clone(), attacker_delta.clone()],
            vec![amount.clone(), amount.clone(), ratio::zero()],
        ),
        TaMode::Summed => (
            vec![&decrease + &increase, attacker_delta.clone()],
            vec![&amount * ratio::int(2), ratio::zero()],
        ),
    };
    if lhs == rhs {
        return None;
    }
    let join = |v: &[Rational]| v.iter().map(f).collect::<Vec<_>>().join("; ");
    Some(Verdict::new(
        MevulClass::TA,
        snap.index,
        &[
            ("token", token.to_string()),
            ("amount", f(&amount)),
            ("sender_decrease", f(&decrease)),
            ("recipient_increase", f(&increase)),
            ("attacker_delta", f(&attacker_delta)),
            ("lhs", join(&lhs)),
            ("rhs", join(&rhs)),
        ],
    ))
}

pub fn check_balance_conservation(snap: &StepSnapshot, roles: &Roles) -> Option<Verdict> {
    if !applicable(snap) {
        return None;
    }
    let prices = &snap.prices_before;
    let before = snap.balances_before.valuation(prices, |a| roles.is_benign(a));
    let after = snap.balances_after.valuation(prices, |a| roles.is_benign(a));
    if before == after {
        return None;
    }
    Some(Verdict::new(
        MevulClass::BC,
        snap.index,
        &[
            ("lhs", ratio::format(&before)),
            ("rhs", ratio::format(&after)),
            ("delta", ratio::format(&(&after - &before))),
        ],
    ))
}

fn deviation(a: &Rational, b: &Rational) -> Rational {
    ratio::relative_deviation(a, b).unwrap_or_else(ratio::zero)
}

/// Swap-rate check for the step producing `after`.
///
/// Condition 1 compares against the frozen reference prices. Condition 2
/// compares consecutive price states: with `earlier → before` within
/// tolerance, a move `before → after` beyond it is flagged. It needs the
/// state two steps back, so it is skipped on the first step.
pub fn check_swap_rate_stability(
    index: usize,
    earlier: Option<&Prices>,
    before: &Prices,
    after: &Prices,
    observed: &Prices,
    tol_eps: &Rational,
) -> Option<Verdict> {
    let f = ratio::format;
    for (token, p_after) in after {
        let (Some(p_before), Some(p_obs)) = (before.get(token), observed.get(token)) else {
            continue;
        };
        let d_before = deviation(p_before, p_obs);
        let d_after = deviation(p_after, p_obs);
        if d_before <= *tol_eps && d_after > *tol_eps {
            return Some(Verdict::new(
                MevulClass::ES,
                index,
                &[
                    ("condition", "observed".into()),
                    ("token", token.to_string()),
                    ("price_before", f(p_before)),
                    ("price_after", f(p_after)),
                    ("price_observed", f(p_obs)),
                    ("deviation", f(&d_after)),
                    ("tol_eps", f(tol_eps)),
                ],
            ));
        }
    }
    let earlier = earlier?;
    for (token, p_after) in after {
        let (Some(p_before), Some(p_earlier)) = (before.get(token), earlier.get(token)) else {
            continue;
        };
        let d_prev = deviation(p_earlier, p_before);
        let d_next = deviation(p_before, p_after);
        if d_prev <= *tol_eps && d_next > *tol_eps {
            return Some(Verdict::new(
                MevulClass::ES,
                index,
                &[
                    ("condition", "trajectory".into()),
                    ("token", token.to_string()),
                    ("price_earlier", f(p_earlier)),
                    ("price_before", f(p_before)),
                    ("price_after", f(p_after)),
                    ("deviation", f(&d_next)),
                    ("tol_eps", f(tol_eps)),
                ],
            ));
        }
    }
    None
}

/// Flags `value` outside `[v0 (1 - λ), v0 (1 + λ)]`.
pub fn check_fund_value_stability(
    index: usize,
    v0: &Rational,
    value: &Rational,
    lambda: &Rational,
) -> Option<Verdict> {
    let lower = v0 * (ratio::one() - lambda);
    let upper = v0 * (ratio::one() + lambda);
    if value >= &lower && value <= &upper {
        return None;
    }
    Some(Verdict::new(
        MevulClass::VS,
        index,
        &[
            ("v0", ratio::format(v0)),
            ("value", ratio::format(value)),
            ("lower", ratio::format(&lower)),
            ("upper", ratio::format(&upper)),
        ],
    ))
}

/// Per-campaign evaluation state: roles, interfaces, the reference
/// valuation and the price-history window.
#[derive(Debug, Clone)]
pub struct OracleContext {
    cfg: OracleConfig,
    roles: Roles,
    functions: BTreeMap<(String, String), FunctionSpec>,
    observed: Prices,
    es_enabled: bool,
    scope: Option<BTreeSet<AccountId>>,
    v0: Rational,
    window: Option<Prices>,
}

impl OracleContext {
    pub fn new(world: &WorldState, cfg: &OracleConfig) -> Self {
        let intro = world.introspect();
        let scope: Option<BTreeSet<AccountId>> = match cfg.vs_scope {
            VsScope::Monitored if !world.monitored().is_empty() => {
                Some(world.monitored().iter().cloned().collect())
            }
            _ => None,
        };
        let observed = world.prices.observed_prices().clone();
        let v0 = world
            .balances
            .valuation(&observed, |a| scope.as_ref().map(|s| s.contains(a)).unwrap_or(true));
        OracleContext {
            cfg: cfg.clone(),
            roles: Roles::of(world),
            functions: intro
                .functions
                .iter()
                .map(|(c, f)| ((c.clone(), f.name.clone()), f.clone()))
                .collect(),
            observed,
            es_enabled: intro.price_probe_available(),
            scope,
            v0,
            window: None,
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn v0(&self) -> &Rational {
        &self.v0
    }

    pub fn es_enabled(&self) -> bool {
        self.es_enabled
    }

    pub fn value_in_scope(&self, snap: &StepSnapshot) -> Rational {
        snap.balances_after.valuation(&snap.prices_after, |a| {
            self.scope.as_ref().map(|s| s.contains(a)).unwrap_or(true)
        })
    }

    /// Verdicts for one step, ordered by class. Steps must be fed in order.
    pub fn evaluate(&mut self, snap: &StepSnapshot) -> Vec<Verdict> {
        let earlier = self.window.replace(snap.prices_before.clone());
        if !applicable(snap) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let key = (snap.tx.target.clone(), snap.tx.function.clone());
        if let Some(spec) = self.functions.get(&key) {
            out.extend(check_transfer_arrival(spec, snap, &self.roles, self.cfg.ta_mode));
        }
        out.extend(check_balance_conservation(snap, &self.roles));
        if self.es_enabled {
            out.extend(check_swap_rate_stability(
                snap.index,
                earlier.as_ref(),
                &snap.prices_before,
                &snap.prices_after,
                &self.observed,
                &self.cfg.tol_eps,
            ));
        }
        let value = self.value_in_scope(snap);
        out.extend(check_fund_value_stability(snap.index, &self.v0, &value, &self.cfg.lambda));
        out
    }
}

/// Evaluates a whole trace from a fresh context.
pub fn evaluate_trace(world0: &WorldState, cfg: &OracleConfig, trace: &[StepSnapshot]) -> Vec<Verdict> {
    let mut ctx = OracleContext::new(world0, cfg);
    trace.iter().flat_map(|s| ctx.evaluate(s)).collect()
}

/// Highest-priority class among `verdicts` (TA < BC < ES < VS).
pub fn fold_class(verdicts: &[Verdict]) -> Option<MevulClass> {
    verdicts.iter().map(|v| v.class).max()
}

#[cfg(test)]
mod tests;
