use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{require, Call};
use crate::ratio;
use crate::world::{FunctionSpec, ParamKind, Revert, TokenSymbol, WorldState};

/// Deposit vault with deferred share issuance: deposits are recorded as
/// pending and minted to the most recent depositor on the next share
/// transfer, whoever sends it. Total deposits are never updated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareVault {
    pub asset: TokenSymbol,
    pub shares: TokenSymbol,
}

impl ShareVault {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        vec![
            FunctionSpec::mutating("deposit", &[("amount", Amount)], Some(&self.asset)),
            FunctionSpec::mutating("withdraw", &[("shares", Amount)], Some(&self.shares)),
            FunctionSpec::mutating(
                "transferShares",
                &[("to", Address), ("amount", Amount)],
                Some(&self.shares),
            ),
            FunctionSpec::view("balanceOf", &[("account", Address)], Some(&self.shares)),
        ]
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        let me = call.contract;
        let vault = call.me();
        let who = call.caller;
        match call.function {
            "deposit" => {
                let amount = call.amount(0)?;
                require(!amount.is_zero(), "zero deposit")?;
                world.spend_allowance(&self.asset, who, &vault, amount)?;
                world.balances.transfer(who, &vault, &self.asset, amount)?;
                let pending = world.num_slot(me, "pending") + amount;
                world.set_num_slot(me, "pending", pending);
                world.set_addr_slot(me, "lastDepositor", Some(who.clone()));
                Ok(())
            }
            "withdraw" => {
                let shares = call.amount(0)?;
                world.balances.debit(who, &self.shares, shares)?;
                world.balances.transfer(&vault, who, &self.asset, shares)
            }
            "transferShares" => {
                let to = call.address(0)?;
                let amount = call.amount(1)?;
                if let Some(depositor) = world.addr_slot(me, "lastDepositor") {
                    let pending = world.num_slot(me, "pending");
                    if &depositor != who && !pending.is_zero() {
                        world.balances.credit(&depositor, &self.shares, &pending);
                        world.set_num_slot(me, "pending", ratio::zero());
                        world.set_addr_slot(me, "lastDepositor", None);
                    }
                }
                world.balances.transfer(who, to, &self.shares, amount)
            }
            _ => call.unknown(),
        }
    }
}
