//! Stateful fuzzer for monetarily exploitable vulnerabilities in simulated
//! DeFi contracts.

pub mod harness;
pub mod learn;
pub mod ratio;
pub mod rules;
pub mod scenario;
pub mod oracle;
pub mod world;

pub use ratio::Rational;
pub use world::{
    AccountId, BalanceTable, FunctionSpec, ParamKind, PriceBook, Receipt, Role, StepSnapshot,
    TokenSymbol, Transaction, Value, WorldError, WorldSpec, WorldState,
};
