use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{require, Call};
use crate::world::{FunctionSpec, ParamKind, Revert, TokenSymbol, WorldState};

/// Swap pool paying out at the current price ratio.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairSwap {
    pub tokens: Vec<TokenSymbol>,
}

impl FairSwap {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        let swap = [("tokenIn", Token), ("tokenOut", Token), ("amountIn", Amount)];
        vec![
            FunctionSpec::mutating("swap", &swap, None),
            FunctionSpec::view("getPrice", &[("token", Token)], None),
            FunctionSpec::view("getAmountOut", &swap, None),
        ]
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        match call.function {
            "swap" => {
                let tin = call.token(0)?;
                let tout = call.token(1)?;
                let amount = call.amount(2)?;
                require(
                    self.tokens.contains(tin) && self.tokens.contains(tout),
                    "token not listed",
                )?;
                require(tin != tout, "identical tokens")?;
                require(!amount.is_zero(), "zero swap")?;
                let rate = world
                    .prices
                    .swap_rate(tout, tin)
                    .ok_or_else(|| Revert("unpriced token".into()))?;
                let out = amount * rate;
                let pool = call.me();
                world.balances.transfer(call.caller, &pool, tin, amount)?;
                world.balances.transfer(&pool, call.caller, tout, &out)
            }
            _ => call.unknown(),
        }
    }
}
