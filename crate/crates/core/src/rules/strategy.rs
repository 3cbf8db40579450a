//! Cold-start generator: uniform sampling until a rule's first step is
//! drawn, then strict rule following with wraparound.

use rand::seq::SliceRandom;
use rand::Rng;

use super::params::{default_params, instantiate_params, Callable, Catalog, HintContext, StrategyError};
use super::parse::{Hint, Rule};
use super::matching;
use crate::world::{AccountId, Transaction, Value, WorldState};

/// How a proposal was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Uniform draw while no rule is active.
    Uniform,
    /// Uniform draw that matched a rule's first step.
    Entered,
    /// Next rule step, emitted with probability one.
    Rule,
    /// Uniform draw because the next rule step could not be emitted.
    Fallback,
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub callable: usize,
    pub tx: Transaction,
    pub regime: Regime,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: Rule,
    /// Candidate callables per abstract step.
    matches: Vec<Vec<usize>>,
    first_similarity: f64,
    eligible: bool,
}

/// Position inside the active rule. `position == 0` means no rule entered;
/// otherwise `position` steps of the current pass have been emitted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleCursor {
    pub rule: Option<usize>,
    pub position: usize,
    /// Abstract step indices of the current pass, loops expanded.
    pub pass: Vec<usize>,
    pub actor: Option<AccountId>,
    pub context: HintContext,
    /// False once a step of the current pass reverted or fell back.
    pub pass_ok: bool,
}

impl RuleCursor {
    pub fn pass_len(&self) -> usize {
        self.pass.len()
    }
}

#[derive(Debug, Clone)]
pub struct RuleStrategy {
    rules: Vec<CompiledRule>,
    cursor: RuleCursor,
    completed: Vec<bool>,
    last: Option<Regime>,
}

fn hint_satisfiable(hint: &Hint, catalog: &Catalog) -> bool {
    match hint {
        Hint::AttackerAddress => !catalog.attackers.is_empty(),
        Hint::BenignAddress => !catalog.benign_users.is_empty(),
        Hint::ContractAddress(Some(f)) => !catalog.contracts_exposing(f).is_empty(),
        Hint::ContractAddress(None) => !catalog.contracts.is_empty(),
        _ => true,
    }
}

impl RuleStrategy {
    pub fn new(rules: &[Rule], catalog: &Catalog) -> Self {
        let compiled: Vec<CompiledRule> = rules
            .iter()
            .map(|rule| {
                let matches: Vec<Vec<usize>> = rule.steps().map(|s| catalog.matching(&s.function)).collect();
                let eligible = matches.iter().all(|m| !m.is_empty())
                    && rule.steps().all(|s| {
                        s.hints.iter().all(|h| hint_satisfiable(h, catalog))
                            && s.sender.map(|r| !catalog.actors_with_role(r).is_empty()).unwrap_or(true)
                    });
                let first_similarity = matches
                    .first()
                    .and_then(|m| m.first())
                    .map(|&i| matching::similarity(&rule.steps().next().unwrap().function, &catalog.callables[i].spec.name))
                    .unwrap_or(0.0);
                CompiledRule {
                    rule: rule.clone(),
                    matches,
                    first_similarity,
                    eligible,
                }
            })
            .collect();
        let completed = vec![false; compiled.len()];
        RuleStrategy {
            rules: compiled,
            cursor: RuleCursor::default(),
            completed,
            last: None,
        }
    }

    pub fn cursor(&self) -> &RuleCursor {
        &self.cursor
    }

    pub fn eligible_rules(&self) -> Vec<&str> {
        self.rules
            .iter()
            .filter(|r| r.eligible)
            .map(|r| r.rule.name.as_str())
            .collect()
    }

    pub fn active_rule(&self) -> Option<&Rule> {
        self.cursor.rule.map(|i| &self.rules[i].rule)
    }

    /// True once every eligible rule has finished a pass whose steps all
    /// succeeded. False when no rule is eligible.
    pub fn all_passes_completed(&self) -> bool {
        let mut any = false;
        for (r, done) in self.rules.iter().zip(&self.completed) {
            if r.eligible {
                any = true;
                if !done {
                    return false;
                }
            }
        }
        any
    }

    fn expand_pass<R: Rng + ?Sized>(rule: &Rule, rng: &mut R) -> Vec<usize> {
        let mut pass = Vec::new();
        let mut base = 0;
        for block in &rule.blocks {
            let count = match block.repeat {
                Some((a, b)) => rng.gen_range(a..=b),
                None => 1,
            };
            for _ in 0..count {
                pass.extend(base..base + block.steps.len());
            }
            base += block.steps.len();
        }
        pass
    }

    fn draw_actor<R: Rng + ?Sized>(catalog: &Catalog, rng: &mut R) -> AccountId {
        let pool = if catalog.attacker_actors.is_empty() {
            &catalog.actors
        } else {
            &catalog.attacker_actors
        };
        pool.choose(rng).expect("catalog has actors").clone()
    }

    fn start_pass<R: Rng + ?Sized>(&mut self, rule: usize, catalog: &Catalog, rng: &mut R) {
        self.cursor.pass = Self::expand_pass(&self.rules[rule].rule, rng);
        self.cursor.actor = Some(Self::draw_actor(catalog, rng));
        self.cursor.position = 1;
        self.cursor.pass_ok = true;
    }

    /// Feeds back whether the last proposal executed successfully.
    pub fn observe(&mut self, success: bool) {
        let Some(rule) = self.cursor.rule else {
            return;
        };
        match self.last {
            Some(Regime::Entered | Regime::Rule) => {
                self.cursor.pass_ok &= success;
                if self.cursor.pass_ok && self.cursor.position >= self.cursor.pass.len() {
                    self.completed[rule] = true;
                }
            }
            Some(Regime::Fallback) => self.cursor.pass_ok = false,
            _ => {}
        }
    }

    fn absorb(context: &mut HintContext, callable: &Callable, args: &[Value]) {
        context.token = args
            .iter()
            .find_map(|a| match a {
                Value::Token(t) => Some(t.clone()),
                _ => None,
            })
            .or_else(|| callable.spec.asset.clone());
        if let Some(v) = args.iter().find_map(|a| match a {
            Value::Amount(v) => Some(v.clone()),
            _ => None,
        }) {
            context.amount = Some(v);
        }
    }

    /// Uniform draw over payable callables with a uniform actor and default
    /// arguments.
    pub fn uniform<R: Rng + ?Sized>(
        catalog: &Catalog,
        world: &WorldState,
        rng: &mut R,
    ) -> Result<(usize, Transaction), StrategyError> {
        let idx = rng.gen_range(0..catalog.callables.len());
        let sender = catalog.actors.choose(rng).ok_or(StrategyError::NoActors)?.clone();
        let callable = &catalog.callables[idx];
        let args = default_params(callable, &sender, catalog, world, rng)?;
        let tx = Transaction {
            target: callable.contract.clone(),
            function: callable.spec.name.clone(),
            args,
            sender,
        };
        Ok((idx, tx))
    }

    fn entry_for(&self, callable: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.rules.iter().enumerate() {
            if !r.eligible || !r.matches[0].contains(&callable) {
                continue;
            }
            if best.map(|b| r.first_similarity > self.rules[b].first_similarity).unwrap_or(true) {
                best = Some(i);
            }
        }
        best
    }

    pub fn next_transaction<R: Rng + ?Sized>(
        &mut self,
        catalog: &Catalog,
        world: &WorldState,
        rng: &mut R,
    ) -> Result<Proposal, StrategyError> {
        let Some(rule) = self.cursor.rule else {
            let (idx, tx) = Self::uniform(catalog, world, rng)?;
            let regime = match self.entry_for(idx) {
                Some(r) => {
                    self.cursor.rule = Some(r);
                    self.start_pass(r, catalog, rng);
                    self.cursor.context = HintContext::default();
                    Self::absorb(&mut self.cursor.context, &catalog.callables[idx], &tx.args);
                    Regime::Entered
                }
                None => Regime::Uniform,
            };
            self.last = Some(regime);
            return Ok(Proposal { callable: idx, tx, regime });
        };

        if self.cursor.position >= self.cursor.pass.len() {
            self.start_pass(rule, catalog, rng);
            self.cursor.context = HintContext::default();
        }
        // With a one-step pass the wrapped cursor re-emits that step.
        let slot = self.cursor.position.min(self.cursor.pass.len() - 1);
        let step_idx = self.cursor.pass[slot];
        let step = self.rules[rule].rule.steps().nth(step_idx).expect("step exists").clone();

        let emitted = (|| -> Result<(usize, Transaction), StrategyError> {
            let candidates = &self.rules[rule].matches[step_idx];
            let preferred: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&c| {
                    self.cursor.context.token.is_some()
                        && catalog.callables[c].spec.asset == self.cursor.context.token
                })
                .collect();
            let pool = if preferred.is_empty() { candidates } else { &preferred };
            let idx = *pool.choose(rng).ok_or_else(|| StrategyError::Unsatisfiable(step.function.clone()))?;
            let sender = match step.sender {
                Some(role) => catalog
                    .actors_with_role(role)
                    .choose(rng)
                    .cloned()
                    .ok_or_else(|| StrategyError::Unsatisfiable(format!("no {role:?} actor")))?,
                None => self.cursor.actor.clone().ok_or(StrategyError::NoActors)?,
            };
            let callable = &catalog.callables[idx];
            let args = instantiate_params(&step.hints, callable, &sender, catalog, world, &self.cursor.context, rng)?;
            Ok((
                idx,
                Transaction {
                    target: callable.contract.clone(),
                    function: callable.spec.name.clone(),
                    args,
                    sender,
                },
            ))
        })();

        match emitted {
            Ok((idx, tx)) => {
                Self::absorb(&mut self.cursor.context, &catalog.callables[idx], &tx.args);
                self.cursor.position = (slot + 1).max(self.cursor.position);
                self.last = Some(Regime::Rule);
                Ok(Proposal { callable: idx, tx, regime: Regime::Rule })
            }
            Err(e) => {
                log::debug!("rule step `{}` not emitted: {e}", step.function);
                let (idx, tx) = Self::uniform(catalog, world, rng)?;
                self.last = Some(Regime::Fallback);
                Ok(Proposal { callable: idx, tx, regime: Regime::Fallback })
            }
        }
    }
}
