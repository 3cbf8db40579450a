//! Callable catalogue of a world and argument generation.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::matching;
use super::parse::Hint;
use crate::ratio::{self, Rational};
use crate::world::{AccountId, FunctionSpec, ParamKind, Role, TokenSymbol, Value, WorldState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("world exposes no payable functions")]
    Exhausted,
    #[error("world has no actors")]
    NoActors,
    #[error("unsatisfiable hint: {0}")]
    Unsatisfiable(String),
}

/// Default amount range when a parameter carries no hint.
pub const DEFAULT_AMOUNT: (i64, i64) = (1, 10_000);
const DEFAULT_AMOUNT_LO_DENOM: i64 = 100;
/// Amounts are drawn on a grid of 10^-6.
pub const AMOUNT_GRID: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Callable {
    pub contract: String,
    pub spec: FunctionSpec,
}

impl Callable {
    pub fn id(&self) -> String {
        format!("{}.{}", self.contract, self.spec.name)
    }
}

/// Everything a generator may draw from, fixed for a campaign.
#[derive(Debug, Clone)]
pub struct Catalog {
    /// Payable, non-readonly functions in introspection order.
    pub callables: Vec<Callable>,
    pub actors: Vec<AccountId>,
    pub attacker_actors: Vec<AccountId>,
    /// Actors plus contracts: the default address pool.
    pub addresses: Vec<AccountId>,
    pub contracts: Vec<AccountId>,
    pub attackers: Vec<AccountId>,
    pub benign_users: Vec<AccountId>,
    pub tokens: Vec<TokenSymbol>,
    roles: Vec<(AccountId, Role)>,
}

impl Catalog {
    pub fn new(world: &WorldState) -> Result<Catalog, StrategyError> {
        let callables: Vec<Callable> = world
            .introspect()
            .payable()
            .map(|(c, f)| Callable {
                contract: c.clone(),
                spec: f.clone(),
            })
            .collect();
        if callables.is_empty() {
            return Err(StrategyError::Exhausted);
        }
        let actors = world.actors();
        if actors.is_empty() {
            return Err(StrategyError::NoActors);
        }
        let people = |role: fn(Role) -> bool| -> Vec<AccountId> {
            world
                .accounts()
                .filter(|a| !a.is_contract && role(a.role))
                .map(|a| a.id.clone())
                .collect()
        };
        let contracts: Vec<AccountId> = world.contracts().iter().map(|c| AccountId::new(&c.name)).collect();
        let mut addresses = actors.clone();
        addresses.extend(contracts.iter().cloned());
        Ok(Catalog {
            attacker_actors: actors
                .iter()
                .filter(|a| world.role(a) == Some(Role::Attacker))
                .cloned()
                .collect(),
            callables,
            addresses,
            contracts,
            attackers: people(|r| r == Role::Attacker),
            benign_users: people(|r| r == Role::BenignUser || r == Role::Owner),
            tokens: world.tokens().map(|t| t.symbol.clone()).collect(),
            roles: world.accounts().map(|a| (a.id.clone(), a.role)).collect(),
            actors,
        })
    }

    pub fn role(&self, id: &AccountId) -> Option<Role> {
        self.roles.iter().find(|(a, _)| a == id).map(|(_, r)| *r)
    }

    pub fn actors_with_role(&self, role: Role) -> Vec<AccountId> {
        let want = |r: Role| match role {
            Role::BenignUser | Role::BenignContract => r == Role::BenignUser,
            other => r == other,
        };
        self.actors
            .iter()
            .filter(|a| self.role(a).map(want).unwrap_or(false))
            .cloned()
            .collect()
    }

    /// Callables whose name best matches `abstract_name` (all contracts
    /// exposing that concrete name).
    pub fn matching(&self, abstract_name: &str) -> Vec<usize> {
        let mut unique: Vec<&str> = Vec::new();
        for c in &self.callables {
            if !unique.contains(&c.spec.name.as_str()) {
                unique.push(&c.spec.name);
            }
        }
        match matching::best_match(abstract_name, unique.iter().copied()) {
            Some((i, _)) => {
                let name = unique[i];
                (0..self.callables.len())
                    .filter(|&j| self.callables[j].spec.name == name)
                    .collect()
            }
            None => Vec::new(),
        }
    }

    /// Contracts exposing a function matching `abstract_name`.
    pub fn contracts_exposing(&self, abstract_name: &str) -> Vec<AccountId> {
        let mut out: Vec<AccountId> = Vec::new();
        for i in self.matching(abstract_name) {
            let c = AccountId::new(&self.callables[i].contract);
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

/// Values carried between steps of one rule pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HintContext {
    pub token: Option<TokenSymbol>,
    pub amount: Option<Rational>,
}

fn pick<T: Clone, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> Option<T> {
    items.choose(rng).cloned()
}

/// Log-uniform draw on `[lo, hi]`, floored onto the amount grid.
pub fn log_uniform<R: Rng + ?Sized>(lo: &Rational, hi: &Rational, rng: &mut R) -> Rational {
    if hi <= lo {
        return lo.clone();
    }
    let (l, h) = (ratio::to_f64(lo).ln(), ratio::to_f64(hi).ln());
    let x = (l + rng.gen::<f64>() * (h - l)).exp();
    let v = ratio::from_f64_floor(x, AMOUNT_GRID);
    v.max(lo.clone()).min(hi.clone())
}

/// Amount drawn from `[lo, hi]`, narrowed to the sender's balance of
/// `token` when that balance covers `lo`.
fn draw_amount<R: Rng + ?Sized>(
    lo: &Rational,
    hi: &Rational,
    balance: Option<Rational>,
    rng: &mut R,
) -> Rational {
    let hi = match balance {
        Some(b) if &b >= lo && !b.is_zero() => b.min(hi.clone()),
        _ => hi.clone(),
    };
    log_uniform(lo, &hi, rng)
}

pub fn default_amount_range() -> (Rational, Rational) {
    (
        ratio::frac(DEFAULT_AMOUNT.0, DEFAULT_AMOUNT_LO_DENOM),
        ratio::int(DEFAULT_AMOUNT.1),
    )
}

/// Fills arguments for `callable`. The k-th hint of a parameter kind binds
/// to the k-th parameter of that kind; unhinted parameters use defaults.
#[allow(clippy::too_many_arguments)]
pub fn instantiate_params<R: Rng + ?Sized>(
    hints: &[Hint],
    callable: &Callable,
    sender: &AccountId,
    catalog: &Catalog,
    world: &WorldState,
    ctx: &HintContext,
    rng: &mut R,
) -> Result<Vec<Value>, StrategyError> {
    let spec = &callable.spec;
    let hint_for = |index: usize| -> Option<&Hint> {
        let kind = spec.params[index].kind;
        let ordinal = spec.params[..index].iter().filter(|p| p.kind == kind).count();
        hints.iter().filter(|h| h.kind() == kind).nth(ordinal)
    };

    let mut values: Vec<Option<Value>> = vec![None; spec.params.len()];
    // Tokens first: amounts are clipped against the chosen token.
    for (i, param) in spec.params.iter().enumerate() {
        if param.kind != ParamKind::Token {
            continue;
        }
        let token = match hint_for(i) {
            Some(Hint::NamedToken(sym)) => {
                let sym = TokenSymbol::new(sym);
                if catalog.tokens.contains(&sym) {
                    Some(sym)
                } else {
                    log::warn!("token `{sym}` not in world; drawing any token");
                    pick(&catalog.tokens, rng)
                }
            }
            Some(Hint::SameToken) => ctx
                .token
                .clone()
                .filter(|t| catalog.tokens.contains(t))
                .or_else(|| pick(&catalog.tokens, rng)),
            _ => pick(&catalog.tokens, rng),
        };
        let token = token.ok_or_else(|| StrategyError::Unsatisfiable("world has no tokens".into()))?;
        values[i] = Some(Value::Token(token));
    }
    let amount_token = values
        .iter()
        .find_map(|v| match v {
            Some(Value::Token(t)) => Some(t.clone()),
            _ => None,
        })
        .or_else(|| spec.asset.clone());

    for (i, param) in spec.params.iter().enumerate() {
        if values[i].is_some() {
            continue;
        }
        let hint = hint_for(i);
        let value = match param.kind {
            ParamKind::Address => {
                let addr = match hint {
                    Some(Hint::SelfAddress) => Some(sender.clone()),
                    Some(Hint::AttackerAddress) => pick(&catalog.attackers, rng),
                    Some(Hint::BenignAddress) => {
                        let others: Vec<AccountId> =
                            catalog.benign_users.iter().filter(|a| *a != sender).cloned().collect();
                        pick(&others, rng).or_else(|| pick(&catalog.benign_users, rng))
                    }
                    Some(Hint::ContractAddress(Some(f))) => pick(&catalog.contracts_exposing(f), rng),
                    Some(Hint::ContractAddress(None)) => pick(&catalog.contracts, rng),
                    _ => pick(&catalog.addresses, rng),
                };
                Value::Address(addr.ok_or_else(|| {
                    StrategyError::Unsatisfiable(format!("no address for {:?}", hint))
                })?)
            }
            ParamKind::Amount => {
                let balance = amount_token.as_ref().map(|t| world.balances.get(sender, t));
                let amount = match hint {
                    Some(Hint::Amount(lo, hi)) => draw_amount(lo, hi, balance, rng),
                    Some(Hint::SameAmount) if ctx.amount.is_some() => ctx.amount.clone().unwrap(),
                    _ => {
                        let (lo, hi) = default_amount_range();
                        draw_amount(&lo, &hi, balance, rng)
                    }
                };
                Value::Amount(amount)
            }
            ParamKind::Flag => match hint {
                Some(Hint::Flag(b)) => Value::Flag(*b),
                _ => Value::Flag(rng.gen()),
            },
            ParamKind::Token => unreachable!("tokens filled above"),
        };
        values[i] = Some(value);
    }
    Ok(values.into_iter().map(|v| v.expect("every parameter filled")).collect())
}

/// Uniform default arguments for `callable`.
pub fn default_params<R: Rng + ?Sized>(
    callable: &Callable,
    sender: &AccountId,
    catalog: &Catalog,
    world: &WorldState,
    rng: &mut R,
) -> Result<Vec<Value>, StrategyError> {
    instantiate_params(&[], callable, sender, catalog, world, &HintContext::default(), rng)
}
