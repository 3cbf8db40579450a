use mevfuzz_core::harness::{run_scenario, CampaignConfig, StopPolicy, StrategyKind};
use mevfuzz_core::learn::{argmax, policy_distribution, QTable, StateKey};
use mevfuzz_core::oracle::{check_fund_value_stability, OracleConfig, OracleContext};
use mevfuzz_core::ratio::{self, frac, int};
use mevfuzz_core::rules::default_rules;
use mevfuzz_core::scenario::{load_scenario, names};
use mevfuzz_core::{AccountId, Rational, TokenSymbol, Transaction, Value, WorldSpec, WorldState};
use proptest::prelude::*;

const LEDGER: &str = r#"
[[tokens]]
symbol = "k"
price = 1

[[tokens]]
symbol = "j"
price = 3

[[accounts]]
id = "a"
role = "benign-user"
balances = { k = 10, j = 2 }

[[accounts]]
id = "b"
role = "benign-user"

[[accounts]]
id = "m"
role = "attacker"
balances = { k = 1 }

[[contracts]]
name = "L"
kind = "ledger"
"#;

fn unit() -> impl Strategy<Value = Rational> {
    (0i64..=20).prop_map(|n| frac(n, 20))
}

fn ledger_tx() -> impl Strategy<Value = Transaction> {
    let who = prop::sample::select(vec!["a", "b", "m"]);
    let tok = prop::sample::select(vec!["k", "j"]);
    (0usize..4, who.clone(), who, tok, 0i64..30).prop_map(|(f, x, y, k, n)| {
        let addr = |s: &str| Value::Address(AccountId::new(s));
        let token = Value::Token(TokenSymbol::new(k));
        let amount = Value::Amount(frac(n, 2));
        match f {
            0 => Transaction::new("L", "move", vec![addr(x), addr(y), token, amount], "m"),
            1 => Transaction::new("L", "mint", vec![addr(x), token, amount], "m"),
            2 => Transaction::new("L", "burn", vec![addr(x), token, amount], "m"),
            _ => Transaction::new("L", "setPrice", vec![token, amount], "m"),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_stays_in_unit_interval(steps in prop::collection::vec((0i64..=1, unit()), 1..40)) {
        let (s, a) = (StateKey::start(), "f");
        let mut table = QTable::default();
        for (r, m) in &steps {
            table.update(&s, a, &int(*r), m);
            let q = table.q(&s, a);
            prop_assert!(q >= ratio::zero() && q <= ratio::one());
        }
        prop_assert_eq!(table.get(&s, a).visits, steps.len() as u64);
    }

    #[test]
    fn policy_is_a_distribution(qs in prop::collection::vec(unit(), 1..8), eps in unit()) {
        let s = StateKey::start();
        let cands: Vec<String> = (0..qs.len()).map(|i| format!("f{i}")).collect();
        let mut table = QTable::default();
        for (c, q) in cands.iter().zip(&qs) {
            table.update(&s, c, &ratio::one(), q);
        }
        let p = policy_distribution(&table, &s, &cands, &eps);
        prop_assert!(p.iter().all(|x| *x >= ratio::zero()));
        prop_assert_eq!(p.iter().fold(ratio::zero(), |acc, x| acc + x), ratio::one());
        let best = argmax(&table, &s, &cands).unwrap();
        prop_assert!(qs.iter().all(|q| *q <= qs[best]));
        prop_assert!(qs[..best].iter().all(|q| *q < qs[best]));
    }

    #[test]
    fn reverts_leave_no_trace(txs in prop::collection::vec(ledger_tx(), 1..12)) {
        let mut w = WorldState::build(&WorldSpec::from_toml(LEDGER).unwrap()).unwrap();
        for tx in &txs {
            let before = w.state_hash();
            let supply_k = w.balances.token_supply(&TokenSymbol::new("k"));
            let snap = w.execute(tx);
            let Ok(snap) = snap else {
                prop_assert_eq!(w.state_hash(), before);
                continue;
            };
            if !snap.receipt.is_success() {
                prop_assert_eq!(w.state_hash(), before);
                prop_assert_eq!(&snap.balances_before, &snap.balances_after);
            } else if tx.function == "move" {
                prop_assert_eq!(w.balances.token_supply(&TokenSymbol::new("k")), supply_k);
            }
        }
    }

    #[test]
    fn quiet_steps_yield_nothing(txs in prop::collection::vec(ledger_tx(), 1..12)) {
        let mut w = WorldState::build(&WorldSpec::from_toml(LEDGER).unwrap()).unwrap();
        let mut ctx = OracleContext::new(&w, &OracleConfig::default());
        for tx in &txs {
            let Ok(snap) = w.execute(tx) else { continue };
            let v = ctx.evaluate(&snap);
            if !snap.receipt.is_success() {
                prop_assert!(v.is_empty());
            }
            prop_assert!(v.iter().all(|x| x.tx_index == snap.index));
        }
    }

    #[test]
    fn value_band_is_closed(v0 in 1i64..1000, num in 0i64..3000, lambda in unit()) {
        let (v0, value) = (int(v0), frac(num, 1));
        let lower = &v0 * (ratio::one() - &lambda);
        let upper = &v0 * (ratio::one() + &lambda);
        let inside = value >= lower && value <= upper;
        prop_assert_eq!(check_fund_value_stability(1, &v0, &value, &lambda).is_none(), inside);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn campaigns_respect_budget_and_seed(
        scenario in prop::sample::select(names()),
        budget in 1u64..300,
        seed in any::<u64>(),
        random in any::<bool>(),
    ) {
        let sc = load_scenario(scenario).unwrap();
        let cfg = CampaignConfig {
            budget,
            seed,
            strategy: if random { StrategyKind::Random } else { StrategyKind::Full },
            stop: StopPolicy::Never,
            ..CampaignConfig::for_scenario(scenario)
        };
        let a = run_scenario(&sc, &default_rules(), QTable::default(), &cfg).unwrap();
        let b = run_scenario(&sc, &default_rules(), QTable::default(), &cfg).unwrap();
        prop_assert_eq!(a.report.executed as u64, budget);
        prop_assert!(a.report.coverage.covered <= a.report.coverage.total);
        prop_assert_eq!(a.report.without_timestamp(), b.report.without_timestamp());
        for (class, index) in &a.report.first_verdict {
            prop_assert!(*index as u64 <= budget);
            prop_assert!(a.report.pocs.iter().any(|p| p.class == *class && p.transactions.len() == *index));
        }
    }
}
