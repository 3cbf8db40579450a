//! Deterministic simulated execution environment.
//!
//! A [`WorldState`] holds accounts with fixed roles, a token registry, the
//! global balance table, the price book and deployed contract instances.
//! Contract semantics are plain state-transition functions (see
//! [`contracts`]); a failing call reverts and leaves the world untouched.

pub mod contracts;
mod spec;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::{self, Rational};
pub use contracts::ContractKind;
pub use spec::{AccountSpec, ContractSpec, TokenSpec, WorldSpec};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSymbol(pub String);

impl TokenSymbol {
    pub fn new(symbol: impl Into<String>) -> Self {
        TokenSymbol(symbol.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TokenSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    BenignUser,
    BenignContract,
    Attacker,
    Owner,
}

impl Role {
    /// Owners count as benign: the attacker set is exactly the `Attacker` role.
    pub fn is_benign(self) -> bool {
        !matches!(self, Role::Attacker)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenId {
    pub symbol: TokenSymbol,
    pub decimals: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub role: Role,
    /// Whether the fuzzer may send transactions from this account.
    pub actor: bool,
    pub is_contract: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("duplicate token symbol `{0}`")]
    DuplicateToken(String),
    #[error("duplicate account or contract `{0}`")]
    DuplicateAccount(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("unknown account `{0}`")]
    UnknownAccount(String),
    #[error("negative balance for {account}/{token}")]
    NegativeBalance { account: String, token: String },
    #[error("price of `{0}` must be strictly positive")]
    NonPositivePrice(String),
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract `{contract}` has no function `{function}`")]
    UnknownFunction { contract: String, function: String },
    #[error("malformed transaction: {0}")]
    MalformedTransaction(String),
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
}

/// A contract-level failure. Distinct from [`WorldError`]: reverts are an
/// ordinary execution outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revert(pub String);

pub fn revert<T>(reason: impl Into<String>) -> Result<T, Revert> {
    Err(Revert(reason.into()))
}

/// Mapping (account, token) to a non-negative amount. Zero entries are not
/// stored, so two tables are equal iff they agree on every pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BalanceTable {
    entries: BTreeMap<(AccountId, TokenSymbol), Rational>,
}

impl BalanceTable {
    pub fn get(&self, account: &AccountId, token: &TokenSymbol) -> Rational {
        self.entries
            .get(&(account.clone(), token.clone()))
            .cloned()
            .unwrap_or_else(ratio::zero)
    }

    pub fn set(
        &mut self,
        account: &AccountId,
        token: &TokenSymbol,
        amount: Rational,
    ) -> Result<(), WorldError> {
        if amount.is_negative() {
            return Err(WorldError::NegativeBalance {
                account: account.to_string(),
                token: token.to_string(),
            });
        }
        let key = (account.clone(), token.clone());
        if amount.is_zero() {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, amount);
        }
        Ok(())
    }

    pub fn credit(&mut self, account: &AccountId, token: &TokenSymbol, amount: &Rational) {
        let next = self.get(account, token) + amount;
        // Crediting a non-negative amount to a non-negative balance cannot fail.
        let _ = self.set(account, token, next);
    }

    pub fn debit(
        &mut self,
        account: &AccountId,
        token: &TokenSymbol,
        amount: &Rational,
    ) -> Result<(), Revert> {
        let current = self.get(account, token);
        if &current < amount {
            return revert(format!("insufficient {token} balance for {account}"));
        }
        let _ = self.set(account, token, current - amount);
        Ok(())
    }

    pub fn transfer(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        token: &TokenSymbol,
        amount: &Rational,
    ) -> Result<(), Revert> {
        if amount.is_negative() {
            return revert("negative amount");
        }
        self.debit(from, token, amount)?;
        self.credit(to, token, amount);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &TokenSymbol, &Rational)> {
        self.entries.iter().map(|((a, k), v)| (a, k, v))
    }

    pub fn token_supply(&self, token: &TokenSymbol) -> Rational {
        self.iter()
            .filter(|(_, k, _)| *k == token)
            .fold(ratio::zero(), |acc, (_, _, v)| acc + v)
    }

    /// Σ balance × price over the accounts accepted by `in_scope`.
    pub fn valuation(
        &self,
        prices: &BTreeMap<TokenSymbol, Rational>,
        mut in_scope: impl FnMut(&AccountId) -> bool,
    ) -> Rational {
        let mut total = ratio::zero();
        for (account, token, amount) in self.iter() {
            if in_scope(account) {
                if let Some(price) = prices.get(token) {
                    total += amount * price;
                }
            }
        }
        total
    }
}

pub type Prices = BTreeMap<TokenSymbol, Rational>;

/// Internal (contract-reported) prices plus the frozen reference snapshot
/// taken at world construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PriceBook {
    prices: Prices,
    observed: Prices,
}

impl PriceBook {
    fn new(initial: Prices) -> Self {
        PriceBook {
            observed: initial.clone(),
            prices: initial,
        }
    }

    pub fn price(&self, token: &TokenSymbol) -> Option<&Rational> {
        self.prices.get(token)
    }

    pub fn observed(&self, token: &TokenSymbol) -> Option<&Rational> {
        self.observed.get(token)
    }

    pub fn prices(&self) -> &Prices {
        &self.prices
    }

    pub fn observed_prices(&self) -> &Prices {
        &self.observed
    }

    pub fn set_price(&mut self, token: &TokenSymbol, price: Rational) -> Result<(), Revert> {
        if !price.is_positive() {
            return revert(format!("non-positive price for {token}"));
        }
        match self.prices.get_mut(token) {
            Some(slot) => {
                *slot = price;
                Ok(())
            }
            None => revert(format!("unknown token {token}")),
        }
    }

    /// Units of `from` paid for one unit of `to`: p(to) / p(from).
    pub fn swap_rate(&self, from: &TokenSymbol, to: &TokenSymbol) -> Option<Rational> {
        let pf = self.prices.get(from)?;
        let pt = self.prices.get(to)?;
        Some(pt / pf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Address,
    Token,
    Amount,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub params: Vec<Param>,
    pub payable: bool,
    pub readonly: bool,
    /// Token an `amount` parameter is denominated in when the function takes
    /// no explicit token parameter.
    pub asset: Option<TokenSymbol>,
    /// Moves value between a source and a recipient (Transfer Arrival scope).
    pub transfer_like: bool,
}

/// Names that always count as transfer-like regardless of parameter shape.
pub const TRANSFER_NAMES: &[&str] = &["transfer", "transferFrom", "transferShares", "sendShares"];

impl FunctionSpec {
    pub fn mutating(name: &str, params: &[(&str, ParamKind)], asset: Option<&TokenSymbol>) -> Self {
        let params: Vec<Param> = params
            .iter()
            .map(|(n, k)| Param {
                name: n.to_string(),
                kind: *k,
            })
            .collect();
        let has = |kind| params.iter().any(|p| p.kind == kind);
        let transfer_like = TRANSFER_NAMES.contains(&name)
            || (has(ParamKind::Address) && has(ParamKind::Token) && has(ParamKind::Amount));
        FunctionSpec {
            name: name.to_string(),
            params,
            payable: true,
            readonly: false,
            asset: asset.cloned(),
            transfer_like,
        }
    }

    pub fn view(name: &str, params: &[(&str, ParamKind)], asset: Option<&TokenSymbol>) -> Self {
        FunctionSpec {
            payable: false,
            readonly: true,
            transfer_like: false,
            ..FunctionSpec::mutating(name, params, asset)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Address(AccountId),
    Token(TokenSymbol),
    Amount(#[serde(with = "ratio::serde_text")] Rational),
    Flag(bool),
}

impl Value {
    pub fn kind(&self) -> ParamKind {
        match self {
            Value::Address(_) => ParamKind::Address,
            Value::Token(_) => ParamKind::Token,
            Value::Amount(_) => ParamKind::Amount,
            Value::Flag(_) => ParamKind::Flag,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Address(a) => write!(f, "addr({a})"),
            Value::Token(t) => write!(f, "{t}"),
            Value::Amount(v) => f.write_str(&ratio::format(v)),
            Value::Flag(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub target: String,
    pub function: String,
    pub args: Vec<Value>,
    pub sender: AccountId,
}

impl Transaction {
    pub fn new(target: &str, function: &str, args: Vec<Value>, sender: &str) -> Self {
        Transaction {
            target: target.to_string(),
            function: function.to_string(),
            args,
            sender: AccountId::new(sender),
        }
    }
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}.{}(", self.sender, self.target, self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receipt {
    Success,
    Revert(String),
}

impl Receipt {
    pub fn is_success(&self) -> bool {
        matches!(self, Receipt::Success)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSnapshot {
    /// 1-based transaction ordinal.
    pub index: usize,
    pub tx: Transaction,
    pub readonly: bool,
    pub balances_before: BalanceTable,
    pub balances_after: BalanceTable,
    pub prices_before: Prices,
    pub prices_after: Prices,
    pub receipt: Receipt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Num(Rational),
    Word(u128),
    Addr(AccountId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractInstance {
    pub name: String,
    pub kind: ContractKind,
    pub functions: Arc<Vec<FunctionSpec>>,
    pub storage: BTreeMap<String, Slot>,
}

impl ContractInstance {
    pub fn function(&self, name: &str) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Which key variables a contract exposes for the oracles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyProbes {
    /// `balanceOf` → balances.
    pub balance: bool,
    /// `getPrice` → prices.
    pub price: bool,
    /// `getAmountOut` → swap rates.
    pub swap_rate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Introspection {
    pub functions: Vec<(String, FunctionSpec)>,
    pub probes: BTreeMap<String, KeyProbes>,
}

impl Introspection {
    pub fn payable(&self) -> impl Iterator<Item = &(String, FunctionSpec)> {
        self.functions.iter().filter(|(_, f)| f.payable && !f.readonly)
    }

    pub fn price_probe_available(&self) -> bool {
        self.probes.values().any(|p| p.price)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueScope {
    All,
    Benign,
    Accounts(BTreeSet<AccountId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSource {
    Internal,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub name: String,
    accounts: BTreeMap<AccountId, Account>,
    tokens: BTreeMap<TokenSymbol, TokenId>,
    pub balances: BalanceTable,
    pub prices: PriceBook,
    pub allowances: BTreeMap<(TokenSymbol, AccountId, AccountId), Rational>,
    contracts: Vec<ContractInstance>,
    monitored: Vec<AccountId>,
    executed: usize,
}

impl WorldState {
    pub fn build(spec: &WorldSpec) -> Result<WorldState, WorldError> {
        spec::build(spec)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn role(&self, id: &AccountId) -> Option<Role> {
        self.accounts.get(id).map(|a| a.role)
    }

    pub fn is_benign(&self, id: &AccountId) -> bool {
        self.role(id).map(Role::is_benign).unwrap_or(false)
    }

    pub fn is_contract(&self, id: &AccountId) -> bool {
        self.accounts.get(id).map(|a| a.is_contract).unwrap_or(false)
    }

    pub fn actors(&self) -> Vec<AccountId> {
        self.accounts
            .values()
            .filter(|a| a.actor)
            .map(|a| a.id.clone())
            .collect()
    }

    pub fn accounts_with_role(&self, role: Role) -> Vec<AccountId> {
        self.accounts
            .values()
            .filter(|a| a.role == role)
            .map(|a| a.id.clone())
            .collect()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TokenId> {
        self.tokens.values()
    }

    pub fn token(&self, symbol: &TokenSymbol) -> Option<&TokenId> {
        self.tokens.get(symbol)
    }

    pub fn contracts(&self) -> &[ContractInstance] {
        &self.contracts
    }

    pub fn contract(&self, name: &str) -> Option<&ContractInstance> {
        self.contracts.iter().find(|c| c.name == name)
    }

    fn contract_mut(&mut self, name: &str) -> Option<&mut ContractInstance> {
        self.contracts.iter_mut().find(|c| c.name == name)
    }

    /// Accounts the fund-value check is scoped to; empty means all accounts.
    pub fn monitored(&self) -> &[AccountId] {
        &self.monitored
    }

    pub fn executed(&self) -> usize {
        self.executed
    }

    pub fn allowance(&self, token: &TokenSymbol, owner: &AccountId, spender: &AccountId) -> Rational {
        self.allowances
            .get(&(token.clone(), owner.clone(), spender.clone()))
            .cloned()
            .unwrap_or_else(ratio::zero)
    }

    pub fn set_allowance(
        &mut self,
        token: &TokenSymbol,
        owner: &AccountId,
        spender: &AccountId,
        amount: Rational,
    ) {
        let key = (token.clone(), owner.clone(), spender.clone());
        if amount.is_zero() {
            self.allowances.remove(&key);
        } else {
            self.allowances.insert(key, amount);
        }
    }

    /// Consumes `amount` of allowance granted by `owner` to `spender`.
    pub fn spend_allowance(
        &mut self,
        token: &TokenSymbol,
        owner: &AccountId,
        spender: &AccountId,
        amount: &Rational,
    ) -> Result<(), Revert> {
        let current = self.allowance(token, owner, spender);
        if &current < amount {
            return revert(format!("allowance {owner}->{spender} on {token} too low"));
        }
        self.set_allowance(token, owner, spender, current - amount);
        Ok(())
    }

    pub fn num_slot(&self, contract: &str, key: &str) -> Rational {
        match self.contract(contract).and_then(|c| c.storage.get(key)) {
            Some(Slot::Num(v)) => v.clone(),
            _ => ratio::zero(),
        }
    }

    pub fn set_num_slot(&mut self, contract: &str, key: &str, value: Rational) {
        if let Some(c) = self.contract_mut(contract) {
            if value.is_zero() {
                c.storage.remove(key);
            } else {
                c.storage.insert(key.to_string(), Slot::Num(value));
            }
        }
    }

    pub fn word_slot(&self, contract: &str, key: &str) -> u128 {
        match self.contract(contract).and_then(|c| c.storage.get(key)) {
            Some(Slot::Word(v)) => *v,
            _ => 0,
        }
    }

    pub fn set_word_slot(&mut self, contract: &str, key: &str, value: u128) {
        if let Some(c) = self.contract_mut(contract) {
            if value == 0 {
                c.storage.remove(key);
            } else {
                c.storage.insert(key.to_string(), Slot::Word(value));
            }
        }
    }

    pub fn addr_slot(&self, contract: &str, key: &str) -> Option<AccountId> {
        match self.contract(contract).and_then(|c| c.storage.get(key)) {
            Some(Slot::Addr(a)) => Some(a.clone()),
            _ => None,
        }
    }

    pub fn set_addr_slot(&mut self, contract: &str, key: &str, value: Option<AccountId>) {
        if let Some(c) = self.contract_mut(contract) {
            match value {
                Some(a) => {
                    c.storage.insert(key.to_string(), Slot::Addr(a));
                }
                None => {
                    c.storage.remove(key);
                }
            }
        }
    }

    /// Numeric slots whose key starts with `prefix`, in key order.
    pub fn num_slots_with_prefix(&self, contract: &str, prefix: &str) -> Vec<(String, Rational)> {
        self.contract(contract)
            .map(|c| {
                c.storage
                    .range(prefix.to_string()..)
                    .take_while(|(k, _)| k.starts_with(prefix))
                    .filter_map(|(k, v)| match v {
                        Slot::Num(n) => Some((k.clone(), n.clone())),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn introspect(&self) -> Introspection {
        let mut out = Introspection::default();
        for c in &self.contracts {
            let mut probes = KeyProbes::default();
            for f in c.functions.iter() {
                match f.name.as_str() {
                    "balanceOf" => probes.balance = true,
                    "getPrice" => probes.price = true,
                    "getAmountOut" => probes.swap_rate = true,
                    _ => {}
                }
                out.functions.push((c.name.clone(), f.clone()));
            }
            out.probes.insert(c.name.clone(), probes);
        }
        out
    }

    pub fn total_value(&self, scope: &ValueScope, source: PriceSource) -> Rational {
        let prices = match source {
            PriceSource::Internal => self.prices.prices(),
            PriceSource::Observed => self.prices.observed_prices(),
        };
        self.balances.valuation(prices, |a| match scope {
            ValueScope::All => true,
            ValueScope::Benign => self.is_benign(a),
            ValueScope::Accounts(set) => set.contains(a),
        })
    }

    /// Hash of the full mutable state, for atomicity checks.
    pub fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.balances.hash(&mut h);
        self.prices.hash(&mut h);
        self.allowances.hash(&mut h);
        for c in &self.contracts {
            c.name.hash(&mut h);
            c.storage.hash(&mut h);
        }
        h.finish()
    }

    fn validate(&self, tx: &Transaction) -> Result<FunctionSpec, WorldError> {
        let contract = self
            .contract(&tx.target)
            .ok_or_else(|| WorldError::UnknownContract(tx.target.clone()))?;
        let spec = contract
            .function(&tx.function)
            .ok_or_else(|| WorldError::UnknownFunction {
                contract: tx.target.clone(),
                function: tx.function.clone(),
            })?
            .clone();
        if !self.accounts.contains_key(&tx.sender) {
            return Err(WorldError::MalformedTransaction(format!(
                "unknown sender `{}`",
                tx.sender
            )));
        }
        if spec.params.len() != tx.args.len() {
            return Err(WorldError::MalformedTransaction(format!(
                "{}.{} expects {} arguments, got {}",
                tx.target,
                tx.function,
                spec.params.len(),
                tx.args.len()
            )));
        }
        for (p, a) in spec.params.iter().zip(&tx.args) {
            if p.kind != a.kind() {
                return Err(WorldError::MalformedTransaction(format!(
                    "argument `{}` of {}.{} must be {:?}",
                    p.name, tx.target, tx.function, p.kind
                )));
            }
            match a {
                Value::Address(id) if !self.accounts.contains_key(id) => {
                    return Err(WorldError::MalformedTransaction(format!("unknown address `{id}`")))
                }
                Value::Token(t) if !self.tokens.contains_key(t) => {
                    return Err(WorldError::MalformedTransaction(format!("unknown token `{t}`")))
                }
                Value::Amount(v) if v.is_negative() => {
                    return Err(WorldError::MalformedTransaction("negative amount".into()))
                }
                _ => {}
            }
        }
        Ok(spec)
    }

    /// Applies one transaction. Reverts restore the exact prior state.
    pub fn execute(&mut self, tx: &Transaction) -> Result<StepSnapshot, WorldError> {
        let spec = self.validate(tx)?;
        let balances_before = self.balances.clone();
        let prices_before = self.prices.prices().clone();

        let receipt = if spec.readonly {
            Receipt::Success
        } else {
            let backup = self.clone();
            let kind = self
                .contract(&tx.target)
                .map(|c| c.kind.clone())
                .ok_or_else(|| WorldError::UnknownContract(tx.target.clone()))?;
            let call = contracts::Call {
                contract: &tx.target,
                caller: &tx.sender,
                origin: &tx.sender,
                function: &tx.function,
                args: &tx.args,
            };
            match kind.call(self, &call) {
                Ok(()) => Receipt::Success,
                Err(Revert(reason)) => {
                    let executed = self.executed;
                    *self = backup;
                    self.executed = executed;
                    Receipt::Revert(reason)
                }
            }
        };

        self.executed += 1;
        Ok(StepSnapshot {
            index: self.executed,
            tx: tx.clone(),
            readonly: spec.readonly,
            balances_before,
            balances_after: self.balances.clone(),
            prices_before,
            prices_after: self.prices.prices().clone(),
            receipt,
        })
    }
}
