use serde::{Deserialize, Serialize};

use super::Call;
use crate::world::{AccountId, FunctionSpec, ParamKind, Revert, WorldState};

/// Unrestricted balance and price manipulator, used to drive oracle tests
/// with arbitrary state transitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ledger {
    /// Recipient of the amount `leakyTransfer` withholds; burned if unset.
    #[serde(default)]
    pub leak_to: Option<String>,
}

impl Ledger {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        let mv = [("from", Address), ("to", Address), ("token", Token), ("amount", Amount)];
        vec![
            FunctionSpec::mutating("move", &mv, None),
            FunctionSpec::mutating("leakyTransfer", &mv, None),
            FunctionSpec::mutating("mint", &[("to", Address), ("token", Token), ("amount", Amount)], None),
            FunctionSpec::mutating("burn", &[("from", Address), ("token", Token), ("amount", Amount)], None),
            FunctionSpec::mutating("setPrice", &[("token", Token), ("price", Amount)], None),
            FunctionSpec::view("getPrice", &[("token", Token)], None),
        ]
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        match call.function {
            "move" => {
                let (from, to) = (call.address(0)?, call.address(1)?);
                world.balances.transfer(from, to, call.token(2)?, call.amount(3)?)
            }
            "leakyTransfer" => {
                let (from, to, token) = (call.address(0)?, call.address(1)?, call.token(2)?);
                let amount = call.amount(3)?;
                let half = amount / crate::ratio::int(2);
                world.balances.debit(from, token, amount)?;
                world.balances.credit(to, token, &half);
                if let Some(sink) = &self.leak_to {
                    world.balances.credit(&AccountId::new(sink), token, &(amount - &half));
                }
                Ok(())
            }
            "mint" => {
                world.balances.credit(call.address(0)?, call.token(1)?, call.amount(2)?);
                Ok(())
            }
            "burn" => world.balances.debit(call.address(0)?, call.token(1)?, call.amount(2)?),
            "setPrice" => world.prices.set_price(call.token(0)?, call.amount(1)?.clone()),
            _ => call.unknown(),
        }
    }
}
