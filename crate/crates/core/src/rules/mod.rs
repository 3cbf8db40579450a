//! Auditor rules: file format, name matching and the rule-following
//! generator.

mod matching;
mod params;
mod parse;
mod strategy;

pub use matching::{best_match, match_function, normalize, similarity, THRESHOLD};
pub use params::{
    default_amount_range, default_params, instantiate_params, log_uniform, Callable, Catalog,
    HintContext, StrategyError, AMOUNT_GRID,
};
pub use parse::{parse_rules, Block, Hint, Rule, RuleParseError, RuleStep};
pub use strategy::{Proposal, Regime, RuleCursor, RuleStrategy};

/// The rule set shipped with the engine.
pub const DEFAULT_RULES: &str = include_str!("../../rules/mevul.rules");

pub fn default_rules() -> Vec<Rule> {
    parse_rules(DEFAULT_RULES).expect("bundled rules parse")
}
