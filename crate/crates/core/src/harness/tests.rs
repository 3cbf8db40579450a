use super::*;
use crate::oracle::MevulClass;
use crate::scenario::load_scenario;

fn cfg(name: &str, budget: u64, seed: u64) -> CampaignConfig {
    CampaignConfig {
        budget,
        seed,
        ..CampaignConfig::for_scenario(name)
    }
}

#[test]
fn zero_budget_is_rejected() {
    assert!(matches!(run_campaign(&cfg("clean-token", 0, 1)), Err(HarnessError::Config(_))));
    let mut c = cfg("clean-token", 10, 1);
    c.stage_split = crate::ratio::frac(3, 2);
    assert!(c.validate().is_err());
}

#[test]
fn clean_token_stays_silent() {
    let out = run_campaign(&cfg("clean-token", 2_000, 7)).unwrap();
    assert_eq!(out.report.executed, 2_000);
    assert!(!out.report.has_verdicts());
    assert!(out.report.pocs.is_empty());
}

#[test]
fn reruns_match_modulo_timestamp() {
    let a = run_campaign(&cfg("share-ledger", 1_500, 3)).unwrap();
    let b = run_campaign(&cfg("share-ledger", 1_500, 3)).unwrap();
    assert_eq!(a.report.without_timestamp().to_json(), b.report.without_timestamp().to_json());
    assert_eq!(a.qtable, b.qtable);
}

#[test]
fn early_stop_ends_on_verdict() {
    let mut c = cfg("overflow-shares", 5_000, 11);
    c.stop = StopPolicy::FirstVerdict;
    let r = run_campaign(&c).unwrap().report;
    assert!(r.has_verdicts());
    assert_eq!(r.executed, *r.first_verdict.values().min().unwrap());
}

#[test]
fn silo_campaign_reports_replayable_pocs() {
    let r = run_campaign(&cfg("silo-lending", 5_000, 42)).unwrap().report;
    assert!(r.first_verdict.contains_key(&MevulClass::ES), "{:?}", r.first_verdict);
    assert!(r.first_verdict.contains_key(&MevulClass::VS));
    assert_eq!(validate_report(&r).unwrap(), r.pocs.len());
    let back = Report::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn replay_edge_cases() {
    let silo = load_scenario("silo-lending").unwrap();
    let cfg = crate::oracle::OracleConfig::default();
    assert!(replay(&[], &silo.world, &cfg).unwrap().is_empty());
    let witness = silo.witness.clone().unwrap();
    let clean = load_scenario("clean-token").unwrap();
    assert!(matches!(
        replay(&witness, &clean.world, &cfg),
        Err(HarnessError::TransactionMismatch { index: 1, .. })
    ));
}

#[test]
fn sign_test_tail() {
    let t = sign_test(vec![(1, 2); 5]);
    assert_eq!((t.wins, t.losses, t.ties), (5, 0, 0));
    assert!((t.p_value - 1.0 / 32.0).abs() < 1e-12);
    let t = sign_test([(1, 1), (3, 2)]);
    assert_eq!((t.wins, t.losses, t.ties), (0, 1, 1));
    assert_eq!(t.p_value, 1.0);
    assert_eq!(sign_test([]).p_value, 1.0);
}

#[test]
fn rule_stage_length() {
    let c = cfg("x", 10_000, 0);
    assert_eq!(c.rule_stage_len(), 3_000);
    assert_eq!(cfg("x", 3, 0).rule_stage_len(), 0);
}
