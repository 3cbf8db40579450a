use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{call_contract, require, Call};
use crate::ratio::{self, Rational};
use crate::world::{FunctionSpec, ParamKind, Revert, Value, WorldError, WorldState};

/// Relay contract forwarding a capped `mint` into a token contract, so the
/// token sees a contract caller instead of the signing account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detour {
    pub token_contract: String,
    #[serde(with = "ratio::serde_text")]
    pub cap: Rational,
}

impl Detour {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        vec![FunctionSpec::mutating("relay", &[("to", Address), ("amount", Amount)], None)]
    }

    pub(crate) fn init(&self, world: &WorldState) -> Result<(), WorldError> {
        let ok = world
            .contract(&self.token_contract)
            .map(|c| c.function("mint").is_some())
            .unwrap_or(false);
        if ok {
            Ok(())
        } else {
            Err(WorldError::InvalidSpec(format!(
                "detour target `{}` has no mint",
                self.token_contract
            )))
        }
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        match call.function {
            "relay" => {
                let to = call.address(0)?.clone();
                let amount = call.amount(1)?.clone().min(self.cap.clone());
                require(!amount.is_zero(), "relay: zero amount")?;
                let me = call.me();
                let args = [Value::Address(to), Value::Amount(amount)];
                call_contract(
                    world,
                    &Call {
                        contract: &self.token_contract,
                        caller: &me,
                        origin: call.origin,
                        function: "mint",
                        args: &args,
                    },
                )
            }
            _ => call.unknown(),
        }
    }
}
