//! TOML world description and world construction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::{
    Account, AccountId, BalanceTable, ContractInstance, ContractKind, PriceBook, Role, TokenId,
    TokenSymbol, WorldError, WorldState,
};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default)]
    pub name: String,
    /// Accounts whose value the fund-value check tracks. Empty means all.
    #[serde(default)]
    pub monitored: Vec<String>,
    /// Accounts allowed to send transactions. When absent, every attacker
    /// and owner account is an actor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actors: Option<Vec<String>>,
    #[serde(default)]
    pub tokens: Vec<TokenSpec>,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub contracts: Vec<ContractSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSpec {
    pub symbol: String,
    #[serde(default = "default_decimals")]
    pub decimals: u32,
    #[serde(with = "ratio::serde_text")]
    pub price: Rational,
}

fn default_decimals() -> u32 {
    18
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub id: String,
    pub role: Role,
    #[serde(default, with = "ratio::serde_text_map")]
    pub balances: BTreeMap<String, Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, with = "ratio::serde_text_map")]
    pub balances: BTreeMap<String, Rational>,
    #[serde(flatten)]
    pub kind: ContractKind,
}

impl WorldSpec {
    pub fn from_toml(text: &str) -> Result<WorldSpec, WorldError> {
        toml::from_str(text).map_err(|e| WorldError::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world spec serializes")
    }
}

pub(super) fn build(spec: &WorldSpec) -> Result<WorldState, WorldError> {
    let mut tokens = BTreeMap::new();
    let mut prices = BTreeMap::new();
    for t in &spec.tokens {
        let sym = TokenSymbol::new(&t.symbol);
        if tokens.contains_key(&sym) {
            return Err(WorldError::DuplicateToken(t.symbol.clone()));
        }
        if !t.price.is_positive() {
            return Err(WorldError::NonPositivePrice(t.symbol.clone()));
        }
        tokens.insert(
            sym.clone(),
            TokenId {
                symbol: sym.clone(),
                decimals: t.decimals,
            },
        );
        prices.insert(sym, t.price.clone());
    }

    let mut accounts = BTreeMap::new();
    let mut balances = BalanceTable::default();
    let mut seed_balances =
        |id: &AccountId, table: &BTreeMap<String, Rational>| -> Result<(), WorldError> {
            for (sym, amount) in table {
                let sym = TokenSymbol::new(sym);
                if !tokens.contains_key(&sym) {
                    return Err(WorldError::UnknownToken(sym.0));
                }
                balances.set(id, &sym, amount.clone())?;
            }
            Ok(())
        };

    for a in &spec.accounts {
        let id = AccountId::new(&a.id);
        if accounts.contains_key(&id) {
            return Err(WorldError::DuplicateAccount(a.id.clone()));
        }
        seed_balances(&id, &a.balances)?;
        accounts.insert(
            id.clone(),
            Account {
                id,
                role: a.role,
                actor: false,
                is_contract: false,
            },
        );
    }

    let mut contracts = Vec::new();
    for c in &spec.contracts {
        let id = AccountId::new(&c.name);
        if accounts.contains_key(&id) {
            return Err(WorldError::DuplicateAccount(c.name.clone()));
        }
        for sym in c.kind.referenced_tokens() {
            if !tokens.contains_key(&sym) {
                return Err(WorldError::UnknownToken(sym.0));
            }
        }
        seed_balances(&id, &c.balances)?;
        let functions = c.kind.functions();
        let mut names = BTreeSet::new();
        for f in &functions {
            if !names.insert(f.name.clone()) {
                return Err(WorldError::InvalidSpec(format!(
                    "contract `{}` declares `{}` twice",
                    c.name, f.name
                )));
            }
        }
        accounts.insert(
            id.clone(),
            Account {
                id,
                role: c.role.unwrap_or(Role::BenignContract),
                actor: false,
                is_contract: true,
            },
        );
        contracts.push(ContractInstance {
            name: c.name.clone(),
            kind: c.kind.clone(),
            functions: Arc::new(functions),
            storage: BTreeMap::new(),
        });
    }

    match &spec.actors {
        Some(list) => {
            for name in list {
                let acct = accounts
                    .get_mut(&AccountId::new(name))
                    .ok_or_else(|| WorldError::UnknownAccount(name.clone()))?;
                if acct.is_contract {
                    return Err(WorldError::InvalidSpec(format!(
                        "contract `{name}` cannot be an actor"
                    )));
                }
                acct.actor = true;
            }
        }
        None => {
            for acct in accounts.values_mut() {
                acct.actor =
                    !acct.is_contract && matches!(acct.role, Role::Attacker | Role::Owner);
            }
        }
    }

    let mut monitored = Vec::new();
    for name in &spec.monitored {
        let id = AccountId::new(name);
        if !accounts.contains_key(&id) {
            return Err(WorldError::UnknownAccount(name.clone()));
        }
        monitored.push(id);
    }

    let mut world = WorldState {
        name: spec.name.clone(),
        accounts,
        tokens,
        balances,
        prices: PriceBook::new(prices),
        allowances: BTreeMap::new(),
        contracts,
        monitored,
        executed: 0,
    };
    let kinds: Vec<(String, ContractKind)> = world
        .contracts
        .iter()
        .map(|c| (c.name.clone(), c.kind.clone()))
        .collect();
    for (name, kind) in kinds {
        kind.init(&mut world, &name)?;
    }
    Ok(world)
}
