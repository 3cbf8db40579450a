use super::*;
use crate::ratio::{frac, int, parse};
use crate::world::{Transaction, WorldSpec};

const LEDGER: &str = r#"
[[tokens]]
symbol = "k"
price = 1

[[accounts]]
id = "a"
role = "benign-user"
balances = { k = 10 }

[[accounts]]
id = "b"
role = "benign-user"

[[accounts]]
id = "m"
role = "attacker"

[[contracts]]
name = "L"
kind = "ledger"
leak_to = "m"
"#;

fn world() -> WorldState {
    WorldState::build(&WorldSpec::from_toml(LEDGER).unwrap()).unwrap()
}

fn addr(s: &str) -> Value {
    Value::Address(AccountId::new(s))
}

fn tok() -> Value {
    Value::Token(TokenSymbol::new("k"))
}

fn run(w: &mut WorldState, f: &str, args: Vec<Value>) -> Vec<Verdict> {
    let w0 = w.clone();
    let snap = w.execute(&Transaction::new("L", f, args, "m")).unwrap();
    evaluate_trace(&w0, &OracleConfig::default(), &[snap])
}

fn classes(v: &[Verdict]) -> Vec<MevulClass> {
    v.iter().map(|v| v.class).collect()
}

#[test]
fn exact_transfer_is_silent() {
    let mut w = world();
    let v = run(&mut w, "move", vec![addr("a"), addr("b"), tok(), Value::Amount(int(5))]);
    assert!(v.is_empty(), "{v:?}");
}

#[test]
fn leaky_transfer_flags_ta_and_bc() {
    let mut w = world();
    let v = run(&mut w, "leakyTransfer", vec![addr("a"), addr("b"), tok(), Value::Amount(int(4))]);
    assert_eq!(classes(&v), vec![MevulClass::TA, MevulClass::BC]);
    let ta = &v[0];
    assert_eq!(ta.evidence["lhs"], "4; 2; 2");
    assert_eq!(ta.evidence["rhs"], "4; 4; 0");
    assert_eq!(v[1].evidence["delta"], "-2");
}

#[test]
fn summed_mode_uses_doubled_amount() {
    let w = world();
    let mut w1 = w.clone();
    let snap = w1
        .execute(&Transaction::new("L", "move", vec![addr("a"), addr("b"), tok(), Value::Amount(int(5))], "m"))
        .unwrap();
    let roles = Roles::of(&w);
    let spec = w.contract("L").unwrap().function("move").unwrap().clone();
    assert!(check_transfer_arrival(&spec, &snap, &roles, TaMode::Summed).is_none());
    assert!(check_transfer_arrival(&spec, &snap, &roles, TaMode::Corrected).is_none());
}

#[test]
fn mint_to_benign_breaks_conservation() {
    let mut w = world();
    let v = run(&mut w, "mint", vec![addr("b"), tok(), Value::Amount(int(100))]);
    let bc = v.iter().find(|v| v.class == MevulClass::BC).unwrap();
    assert_eq!(bc.evidence["delta"], "100");
}

#[test]
fn swap_rate_drift_threshold() {
    let one = int(1);
    let obs: Prices = [(TokenSymbol::new("k"), one.clone())].into();
    let at = |p: &str| -> Prices { [(TokenSymbol::new("k"), parse(p).unwrap())].into() };
    let eps = frac(1, 20);
    assert!(check_swap_rate_stability(1, None, &obs, &at("1.04"), &obs, &eps).is_none());
    assert!(check_swap_rate_stability(1, None, &obs, &at("1.06"), &obs, &eps).is_some());
    // Outside the reference band already; only the trajectory condition applies.
    let v = check_swap_rate_stability(3, Some(&at("2")), &at("2"), &at("3"), &obs, &eps).unwrap();
    assert_eq!(v.evidence["condition"], "trajectory");
}

#[test]
fn fund_value_band_edges() {
    let v0 = int(200);
    let lambda = frac(1, 5);
    assert!(check_fund_value_stability(1, &v0, &int(160), &lambda).is_none());
    assert!(check_fund_value_stability(1, &v0, &int(240), &lambda).is_none());
    assert!(check_fund_value_stability(1, &v0, &parse("100.1").unwrap(), &lambda).is_some());
    assert!(check_fund_value_stability(1, &v0, &int(0), &int(1)).is_none());
    assert!(check_fund_value_stability(1, &v0, &int(401), &int(1)).is_some());
}

#[test]
fn readonly_and_reverts_are_silent() {
    let mut w = world();
    let v = run(&mut w, "getPrice", vec![tok()]);
    assert!(v.is_empty());
    let v = run(&mut w, "burn", vec![addr("b"), tok(), Value::Amount(int(1))]);
    assert!(v.is_empty());
}

#[test]
fn config_bounds() {
    let mut cfg = OracleConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.lambda = frac(3, 2);
    assert!(cfg.validate().is_err());
}

#[test]
fn fold_priority() {
    let mk = |c| Verdict { class: c, tx_index: 1, evidence: Default::default() };
    assert_eq!(fold_class(&[mk(MevulClass::VS), mk(MevulClass::TA)]), Some(MevulClass::VS));
    assert_eq!(fold_class(&[mk(MevulClass::BC), mk(MevulClass::ES)]), Some(MevulClass::ES));
    assert_eq!(fold_class(&[]), None);
}
