//! Contract kinds. Each kind declares its function interface and a
//! state-transition function over [`WorldState`].

mod detour;
mod donation_pool;
mod erc20;
mod fair_swap;
mod ledger;
mod overflow_vault;
mod share_vault;
mod silo;

use serde::{Deserialize, Serialize};

use super::{AccountId, FunctionSpec, Revert, TokenSymbol, Value, WorldError, WorldState};
use crate::ratio::Rational;

/// Smallest token unit: balances kept in wei are multiples of `1/WEI`.
pub(crate) const WEI: u64 = 1_000_000_000_000_000_000;

pub use detour::Detour;
pub use donation_pool::DonationPool;
pub use erc20::Erc20;
pub use fair_swap::FairSwap;
pub use ledger::Ledger;
pub use overflow_vault::OverflowVault;
pub use share_vault::ShareVault;
pub use silo::SiloLending;

/// One (possibly nested) contract invocation.
#[derive(Debug, Clone, Copy)]
pub struct Call<'a> {
    pub contract: &'a str,
    /// Immediate caller: the sender for top-level calls, the calling
    /// contract for nested ones.
    pub caller: &'a AccountId,
    /// Account that signed the outer transaction.
    pub origin: &'a AccountId,
    pub function: &'a str,
    pub args: &'a [Value],
}

impl<'a> Call<'a> {
    pub fn me(&self) -> AccountId {
        AccountId::new(self.contract)
    }

    fn arg(&self, i: usize) -> Result<&'a Value, Revert> {
        self.args
            .get(i)
            .ok_or_else(|| Revert(format!("missing argument {i}")))
    }

    pub fn address(&self, i: usize) -> Result<&'a AccountId, Revert> {
        match self.arg(i)? {
            Value::Address(a) => Ok(a),
            _ => Err(Revert(format!("argument {i} is not an address"))),
        }
    }

    pub fn token(&self, i: usize) -> Result<&'a TokenSymbol, Revert> {
        match self.arg(i)? {
            Value::Token(t) => Ok(t),
            _ => Err(Revert(format!("argument {i} is not a token"))),
        }
    }

    pub fn amount(&self, i: usize) -> Result<&'a Rational, Revert> {
        match self.arg(i)? {
            Value::Amount(v) => Ok(v),
            _ => Err(Revert(format!("argument {i} is not an amount"))),
        }
    }

    pub fn flag(&self, i: usize) -> Result<bool, Revert> {
        match self.arg(i)? {
            Value::Flag(b) => Ok(*b),
            _ => Err(Revert(format!("argument {i} is not a flag"))),
        }
    }

    fn unknown(&self) -> Result<(), Revert> {
        Err(Revert(format!("{} has no function {}", self.contract, self.function)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContractKind {
    Erc20(Erc20),
    SiloLending(SiloLending),
    ShareVault(ShareVault),
    Detour(Detour),
    DonationPool(DonationPool),
    OverflowVault(OverflowVault),
    FairSwap(FairSwap),
    Ledger(Ledger),
}

impl ContractKind {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        match self {
            ContractKind::Erc20(c) => c.functions(),
            ContractKind::SiloLending(c) => c.functions(),
            ContractKind::ShareVault(c) => c.functions(),
            ContractKind::Detour(c) => c.functions(),
            ContractKind::DonationPool(c) => c.functions(),
            ContractKind::OverflowVault(c) => c.functions(),
            ContractKind::FairSwap(c) => c.functions(),
            ContractKind::Ledger(c) => c.functions(),
        }
    }

    pub fn referenced_tokens(&self) -> Vec<TokenSymbol> {
        match self {
            ContractKind::Erc20(c) => vec![c.token.clone()],
            ContractKind::SiloLending(c) => {
                let mut v = c.assets.clone();
                v.push(c.indexed.clone());
                v
            }
            ContractKind::ShareVault(c) => vec![c.asset.clone(), c.shares.clone()],
            ContractKind::Detour(_) => vec![],
            ContractKind::DonationPool(c) => {
                vec![c.underlying.clone(), c.share.clone(), c.loan.clone()]
            }
            ContractKind::OverflowVault(c) => vec![c.underlying.clone(), c.shares.clone()],
            ContractKind::FairSwap(c) => c.tokens.clone(),
            ContractKind::Ledger(_) => vec![],
        }
    }

    pub(crate) fn init(&self, world: &mut WorldState, me: &str) -> Result<(), WorldError> {
        match self {
            ContractKind::OverflowVault(c) => c.init(world, me),
            ContractKind::Detour(c) => c.init(world),
            _ => Ok(()),
        }
    }

    pub(crate) fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        match self {
            ContractKind::Erc20(c) => c.call(world, call),
            ContractKind::SiloLending(c) => c.call(world, call),
            ContractKind::ShareVault(c) => c.call(world, call),
            ContractKind::Detour(c) => c.call(world, call),
            ContractKind::DonationPool(c) => c.call(world, call),
            ContractKind::OverflowVault(c) => c.call(world, call),
            ContractKind::FairSwap(c) => c.call(world, call),
            ContractKind::Ledger(c) => c.call(world, call),
        }
    }
}

/// Dispatches a nested call from one contract into another.
pub(crate) fn call_contract(world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
    let kind = world
        .contract(call.contract)
        .map(|c| c.kind.clone())
        .ok_or_else(|| Revert(format!("no contract {}", call.contract)))?;
    kind.call(world, call)
}

fn require(cond: bool, reason: &str) -> Result<(), Revert> {
    if cond {
        Ok(())
    } else {
        Err(Revert(reason.to_string()))
    }
}
