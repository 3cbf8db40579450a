use serde::{Deserialize, Serialize};

use super::{require, Call};
use crate::world::{FunctionSpec, ParamKind, Revert, Role, TokenSymbol, WorldState};

/// Plain fungible token bookkeeping over the global balance table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Erc20 {
    pub token: TokenSymbol,
    /// `transfer` reverts when the recipient is a contract.
    #[serde(default)]
    pub reject_contracts: bool,
    /// Exposes `mint`, callable by any contract or by an owner account.
    #[serde(default)]
    pub mintable: bool,
}

impl Erc20 {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        let t = Some(&self.token);
        let mut fs = vec![
            FunctionSpec::mutating("approve", &[("spender", Address), ("amount", Amount)], t),
            FunctionSpec::mutating("transfer", &[("to", Address), ("amount", Amount)], t),
        ];
        if self.mintable {
            fs.push(FunctionSpec::mutating("mint", &[("to", Address), ("amount", Amount)], t));
        }
        fs.push(FunctionSpec::view("balanceOf", &[("account", Address)], t));
        fs
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        match call.function {
            "approve" => {
                let spender = call.address(0)?;
                let amount = call.amount(1)?.clone();
                world.set_allowance(&self.token, call.caller, spender, amount);
                Ok(())
            }
            "transfer" => {
                let to = call.address(0)?;
                let amount = call.amount(1)?;
                require(
                    !(self.reject_contracts && world.is_contract(to)),
                    "recipient is a contract",
                )?;
                world.balances.transfer(call.caller, to, &self.token, amount)
            }
            "mint" if self.mintable => {
                let to = call.address(0)?;
                let amount = call.amount(1)?;
                let allowed =
                    world.is_contract(call.caller) || world.role(call.caller) == Some(Role::Owner);
                require(allowed, "mint: caller not authorised")?;
                world.balances.credit(to, &self.token, amount);
                Ok(())
            }
            _ => call.unknown(),
        }
    }
}
