use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{require, Call};
use crate::ratio::{self, Rational};
use crate::world::{AccountId, FunctionSpec, ParamKind, Revert, Role, TokenSymbol, WorldState};

/// Collateralised lending pool whose price for the indexed asset is derived
/// from its live token balance over recorded deposits.
///
/// Storage: `dep/<acct>/<tok>` custody deposits, `lien/<acct>/<tok>`
/// collateral-only pledges (tokens stay in the wallet), `debt/<acct>/<tok>`
/// and `total/<tok>` recorded deposits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiloLending {
    pub indexed: TokenSymbol,
    pub assets: Vec<TokenSymbol>,
}

fn key(kind: &str, account: &AccountId, token: &TokenSymbol) -> String {
    format!("{kind}/{account}/{token}")
}

impl SiloLending {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        vec![
            FunctionSpec::mutating(
                "deposit",
                &[("token", Token), ("amount", Amount), ("collateralOnly", Flag)],
                None,
            ),
            FunctionSpec::mutating("borrow", &[("token", Token), ("amount", Amount)], None),
            FunctionSpec::mutating("withdraw", &[("token", Token), ("amount", Amount)], None),
            FunctionSpec::mutating("liquidation", &[], None),
            FunctionSpec::view("getPrice", &[("token", Token)], None),
        ]
    }

    fn listed(&self, token: &TokenSymbol) -> Result<(), Revert> {
        require(self.assets.contains(token), "asset not listed")
    }

    /// Re-derives the internal price of `token` from the pool's balance.
    fn refresh(&self, world: &mut WorldState, me: &str, token: &TokenSymbol) -> Result<(), Revert> {
        if token != &self.indexed {
            return Ok(());
        }
        let observed = world
            .prices
            .observed(token)
            .cloned()
            .ok_or_else(|| Revert("unpriced token".into()))?;
        let deposits = world.num_slot(me, &format!("total/{token}"));
        let held = world.balances.get(&AccountId::new(me), token);
        let price = if !deposits.is_zero() && held > deposits {
            let factor = (held - &deposits) / &deposits;
            observed * factor.max(Rational::one())
        } else {
            observed
        };
        world.prices.set_price(token, price)
    }

    fn collateral_value(&self, world: &WorldState, me: &str, account: &AccountId) -> Rational {
        let mut total = ratio::zero();
        for t in &self.assets {
            let pledged = world.num_slot(me, &key("dep", account, t))
                + world.num_slot(me, &key("lien", account, t));
            if let Some(p) = world.prices.price(t) {
                total += pledged * p;
            }
        }
        total
    }

    fn debt_value(&self, world: &WorldState, me: &str, account: &AccountId) -> Rational {
        let mut total = ratio::zero();
        for t in &self.assets {
            let owed = world.num_slot(me, &key("debt", account, t));
            if let Some(p) = world.prices.observed(t) {
                total += owed * p;
            }
        }
        total
    }

    fn check_ltv(&self, world: &WorldState, me: &str, account: &AccountId) -> Result<(), Revert> {
        require(
            self.debt_value(world, me, account) <= self.collateral_value(world, me, account),
            "undercollateralised",
        )
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        let me = call.contract;
        let pool = call.me();
        let who = call.caller;
        match call.function {
            "deposit" => {
                let token = call.token(0)?;
                let amount = call.amount(1)?;
                let collateral_only = call.flag(2)?;
                self.listed(token)?;
                require(!amount.is_zero(), "zero deposit")?;
                world.spend_allowance(token, who, &pool, amount)?;
                if collateral_only {
                    let lien = world.num_slot(me, &key("lien", who, token)) + amount;
                    require(
                        world.balances.get(who, token) >= lien,
                        "lien exceeds wallet balance",
                    )?;
                    world.set_num_slot(me, &key("lien", who, token), lien);
                } else {
                    world.balances.transfer(who, &pool, token, amount)?;
                    let dep = world.num_slot(me, &key("dep", who, token)) + amount;
                    world.set_num_slot(me, &key("dep", who, token), dep);
                    let total = world.num_slot(me, &format!("total/{token}")) + amount;
                    world.set_num_slot(me, &format!("total/{token}"), total);
                }
                Ok(())
            }
            "borrow" => {
                let token = call.token(0)?;
                let amount = call.amount(1)?;
                self.listed(token)?;
                self.refresh(world, me, token)?;
                require(!amount.is_zero(), "zero borrow")?;
                world.balances.transfer(&pool, who, token, amount)?;
                let debt = world.num_slot(me, &key("debt", who, token)) + amount;
                world.set_num_slot(me, &key("debt", who, token), debt);
                self.check_ltv(world, me, who)
            }
            "withdraw" => {
                let token = call.token(0)?;
                let amount = call.amount(1)?;
                self.listed(token)?;
                self.refresh(world, me, token)?;
                let dep = world.num_slot(me, &key("dep", who, token));
                let lien = world.num_slot(me, &key("lien", who, token));
                require(*amount <= &dep + &lien, "withdraw exceeds position")?;
                let from_dep = amount.clone().min(dep.clone());
                let from_lien = amount - &from_dep;
                world.set_num_slot(me, &key("dep", who, token), dep - &from_dep);
                world.set_num_slot(me, &key("lien", who, token), lien - from_lien);
                let total = world.num_slot(me, &format!("total/{token}")) - &from_dep;
                world.set_num_slot(me, &format!("total/{token}"), total);
                // Liens never left the wallet, yet the payout comes from the pool.
                world.balances.transfer(&pool, who, token, amount)?;
                self.check_ltv(world, me, who)
            }
            "liquidation" => {
                require(world.role(who) == Some(Role::Owner), "liquidation: owner only")?;
                let mut tokens = self.assets.clone();
                if !tokens.contains(&self.indexed) {
                    tokens.push(self.indexed.clone());
                }
                for t in &tokens {
                    self.refresh(world, me, t)?;
                }
                let mut borrowers: Vec<AccountId> = world
                    .num_slots_with_prefix(me, "debt/")
                    .into_iter()
                    .filter_map(|(k, _)| k.split('/').nth(1).map(AccountId::new))
                    .collect();
                borrowers.dedup();
                for b in borrowers {
                    for t in &self.assets {
                        let lien = world.num_slot(me, &key("lien", &b, t));
                        if !lien.is_zero() {
                            let seized = lien.min(world.balances.get(&b, t));
                            world.balances.transfer(&b, &pool, t, &seized)?;
                            world.set_num_slot(me, &key("lien", &b, t), ratio::zero());
                        }
                        let dep = world.num_slot(me, &key("dep", &b, t));
                        if !dep.is_zero() {
                            let total = world.num_slot(me, &format!("total/{t}")) - dep;
                            world.set_num_slot(me, &format!("total/{t}"), total);
                            world.set_num_slot(me, &key("dep", &b, t), ratio::zero());
                        }
                        world.set_num_slot(me, &key("debt", &b, t), ratio::zero());
                    }
                }
                Ok(())
            }
            _ => call.unknown(),
        }
    }
}
