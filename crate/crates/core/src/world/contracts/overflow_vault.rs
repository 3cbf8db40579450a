use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{require, Call, WEI};
use crate::ratio::Rational;
use crate::world::{AccountId, FunctionSpec, ParamKind, Revert, TokenSymbol, WorldError, WorldState};

/// Share vault keeping raw share balances in 64-bit words of wei
/// (10^18 per share). Credits wrap silently on overflow; debits are checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverflowVault {
    pub underlying: TokenSymbol,
    pub shares: TokenSymbol,
}

fn to_wei(amount: &Rational) -> Option<u64> {
    let scaled = amount * Rational::from_integer(BigInt::from(WEI));
    scaled.floor().to_integer().to_u64()
}

fn from_wei(raw: u64) -> Rational {
    Rational::new(BigInt::from(raw), BigInt::from(WEI))
}

fn raw_key(account: &AccountId) -> String {
    format!("raw/{account}")
}

impl OverflowVault {
    pub fn functions(&self) -> Vec<FunctionSpec> {
        use ParamKind::*;
        vec![
            FunctionSpec::mutating("deposit", &[("amount", Amount)], Some(&self.underlying)),
            FunctionSpec::mutating("withdraw", &[("shares", Amount)], Some(&self.shares)),
            FunctionSpec::mutating(
                "sendShares",
                &[("to", Address), ("amount", Amount)],
                Some(&self.shares),
            ),
            FunctionSpec::view("balanceOf", &[("account", Address)], Some(&self.shares)),
        ]
    }

    /// Loads the declared share balances into raw words.
    pub(crate) fn init(&self, world: &mut WorldState, me: &str) -> Result<(), WorldError> {
        let holders: Vec<(AccountId, Rational)> = world
            .balances
            .iter()
            .filter(|(_, t, _)| *t == &self.shares)
            .map(|(a, _, v)| (a.clone(), v.clone()))
            .collect();
        for (account, amount) in holders {
            let raw = to_wei(&amount)
                .filter(|r| from_wei(*r) == amount)
                .ok_or_else(|| {
                    WorldError::InvalidSpec(format!("share balance of {account} does not fit a word"))
                })?;
            world.set_word_slot(me, &raw_key(&account), raw as u128);
        }
        Ok(())
    }

    fn raw(&self, world: &WorldState, me: &str, account: &AccountId) -> u64 {
        world.word_slot(me, &raw_key(account)) as u64
    }

    fn store(&self, world: &mut WorldState, me: &str, account: &AccountId, raw: u64) {
        world.set_word_slot(me, &raw_key(account), raw as u128);
        let _ = world.balances.set(account, &self.shares, from_wei(raw));
    }

    fn credit(&self, world: &mut WorldState, me: &str, account: &AccountId, raw: u64) {
        let next = self.raw(world, me, account).wrapping_add(raw);
        self.store(world, me, account, next);
    }

    fn debit(&self, world: &mut WorldState, me: &str, account: &AccountId, raw: u64) -> Result<(), Revert> {
        let current = self.raw(world, me, account);
        require(current >= raw, "insufficient shares")?;
        self.store(world, me, account, current - raw);
        Ok(())
    }

    pub fn call(&self, world: &mut WorldState, call: &Call<'_>) -> Result<(), Revert> {
        let me = call.contract;
        let vault = call.me();
        let who = call.caller;
        match call.function {
            "deposit" | "withdraw" | "sendShares" => {
                let idx = usize::from(call.function == "sendShares");
                let amount = call.amount(idx)?;
                let raw = to_wei(amount).ok_or_else(|| Revert("amount exceeds word".into()))?;
                require(raw != 0, "zero amount")?;
                // Value moved is the word-truncated amount.
                let exact = from_wei(raw);
                match call.function {
                    "deposit" => {
                        world.balances.transfer(who, &vault, &self.underlying, &exact)?;
                        self.credit(world, me, who, raw);
                    }
                    "withdraw" => {
                        self.debit(world, me, who, raw)?;
                        world.balances.transfer(&vault, who, &self.underlying, &exact)?;
                    }
                    _ => {
                        let to = call.address(0)?;
                        self.debit(world, me, who, raw)?;
                        self.credit(world, me, to, raw);
                    }
                }
                Ok(())
            }
            _ => call.unknown(),
        }
    }
}
