use super::*;
use crate::oracle::{evaluate_trace, OracleConfig};
use crate::ratio::{format, parse};
use crate::world::{PriceSource, TokenSymbol, ValueScope};

#[test]
fn registry_loads_and_builds() {
    for name in names() {
        let s = load_scenario(name).unwrap();
        assert_eq!(s.name, name);
        s.build_world().unwrap();
        assert_eq!(s.labels.is_empty(), name.starts_with("clean-"));
    }
    assert!(matches!(load_scenario("nope"), Err(ScenarioError::Unknown(_))));
}

#[test]
fn witnesses_trigger_exactly_their_classes() {
    for name in labeled_names() {
        let s = load_scenario(name).unwrap();
        let trace = replay_witness(&s).unwrap();
        for step in &trace.steps {
            assert!(step.receipt.is_success(), "{name} step {} reverted: {:?}", step.index, step.receipt);
        }
        let got: BTreeSet<MevulClass> = evaluate_trace(&trace.initial, &OracleConfig::default(), &trace.steps)
            .into_iter()
            .map(|v| v.class)
            .collect();
        let want: BTreeSet<MevulClass> = s.labels.union(&s.incidental).copied().collect();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn clean_scenarios_have_no_witness() {
    for name in clean_names() {
        assert!(matches!(
            replay_witness(&load_scenario(name).unwrap()),
            Err(ScenarioError::NoWitness(_))
        ));
    }
}

#[test]
fn silo_initial_value() {
    let w = load_scenario("silo-lending").unwrap().build_world().unwrap();
    let scope = ValueScope::Accounts(w.monitored().iter().cloned().collect());
    assert_eq!(format(&w.total_value(&scope, PriceSource::Internal)), "200");
    let intro = w.introspect();
    let has = |c: &str, f: &str| intro.functions.iter().any(|(cc, ff)| cc == c && ff.name == f);
    for f in ["deposit", "borrow", "withdraw", "liquidation"] {
        assert!(has("Protocol", f));
    }
    for f in ["approve", "transfer", "balanceOf"] {
        assert!(has("TokenA", f));
    }
    assert!(intro.probes["Protocol"].price);
}

#[test]
fn silo_trace_values() {
    let s = load_scenario("silo-lending").unwrap();
    let trace = replay_witness(&s).unwrap();
    let mut w = trace.initial.clone();
    let scope = ValueScope::Accounts(w.monitored().iter().cloned().collect());
    let expected = ["200", "200.1", "300.1", "300.1", "300.1", "300.1", "200.1", "100.1", "100.2"];
    let mut values = vec![w.total_value(&scope, PriceSource::Internal)];
    for tx in s.witness.as_ref().unwrap() {
        w.execute(tx).unwrap();
        values.push(w.total_value(&scope, PriceSource::Internal));
    }
    for (i, e) in expected.iter().enumerate() {
        assert_eq!(values[i + 1], parse(e).unwrap(), "after tx {}", i + 1);
    }
    let ta = TokenSymbol::new("tA");
    assert_eq!(trace.steps[4].prices_after[&ta], parse("0.999").unwrap());
    assert_eq!(trace.steps[5].prices_after[&ta], parse("999").unwrap());
}

#[test]
fn scenario_roundtrips() {
    for name in names() {
        let s = load_scenario(name).unwrap();
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }
}
