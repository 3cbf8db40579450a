use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{require, Call, WEI};
use crate::ratio::{self, Rational};
use crate::world::{AccountId, FunctionSpec, ParamKind, Revert, TokenSymbol, WorldState};

/// Lending pool pricing its share token from the raw underlying balance it
/// holds, so a bare transfer into the pool inflates the share price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DonationPool {
    pub underlying: TokenSymbol,
    pub share: TokenSymbol,
    pub loan: TokenSymbol,
    #[serde(with = "ratio::serde_text")]
    pub ltv: Rational,
}

impl DonationPool {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        vec![
            FunctionSpec::mutating("supply", &[("amount", Amount)], Some(&self.underlying)),
            FunctionSpec::mutating("redeem", &[("shares", Amount)], Some(&self.share)),
            FunctionSpec::mutating("borrow", &[("amount", Amount)], Some(&self.loan)),
            FunctionSpec::view("getPrice", &[("token", Token)], None),
        ]
    }

    fn refresh(&self, world: &mut WorldState, pool: &AccountId) -> Result<(), Revert> {
        let supply = world.balances.token_supply(&self.share);
        if supply.is_zero() {
            return Ok(());
        }
        let held = world.balances.get(pool, &self.underlying);
        let base = world.prices.price(&self.underlying).cloned().unwrap_or_else(ratio::one);
        let price = base * held / supply;
        if price.is_zero() {
            return Ok(());
        }
        world.prices.set_price(&self.share, price)
    }

    fn price(&self, world: &WorldState, token: &TokenSymbol) -> Rational {
        world.prices.price(token).cloned().unwrap_or_else(ratio::one)
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        let me = call.contract;
        let pool = call.me();
        let who = call.caller;
        self.refresh(world, &pool)?;
        match call.function {
            "supply" => {
                let amount = call.amount(0)?;
                require(!amount.is_zero(), "zero supply")?;
                world.spend_allowance(&self.underlying, who, &pool, amount)?;
                world.balances.transfer(who, &pool, &self.underlying, amount)?;
                let minted = ratio::floor_to(
                    &(amount * self.price(world, &self.underlying) / self.price(world, &self.share)),
                    WEI,
                );
                world.balances.credit(who, &self.share, &minted);
            }
            "redeem" => {
                let shares = call.amount(0)?;
                world.balances.debit(who, &self.share, shares)?;
                let paid = ratio::floor_to(
                    &(shares * self.price(world, &self.share) / self.price(world, &self.underlying)),
                    WEI,
                );
                world.balances.transfer(&pool, who, &self.underlying, &paid)?;
            }
            "borrow" => {
                let amount = call.amount(0)?;
                require(!amount.is_zero(), "zero borrow")?;
                let key = format!("debt/{who}");
                let debt = world.num_slot(me, &key) + amount;
                let capacity = world.balances.get(who, &self.share)
                    * self.price(world, &self.share)
                    * &self.ltv;
                require(debt.clone() * self.price(world, &self.loan) <= capacity, "undercollateralised")?;
                world.balances.transfer(&pool, who, &self.loan, amount)?;
                world.set_num_slot(me, &key, debt);
            }
            _ => return call.unknown(),
        }
        self.refresh(world, &pool)
    }
}
