use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::oracle::MevulClass;
use crate::ratio::{frac, one, zero};

fn labels(cs: &[MevulClass]) -> BTreeSet<MevulClass> {
    cs.iter().copied().collect()
}

#[test]
fn measurement_levels() {
    let l = labels(&[MevulClass::TA]);
    assert_eq!(measure(ErrorClass::TA, &l), one());
    assert_eq!(measure(ErrorClass::BC, &l), zero());
    assert_eq!(measure(ErrorClass::None, &l), zero());
    let empty = BTreeSet::new();
    assert_eq!(measure(ErrorClass::VS, &empty), frac(1, 2));
    assert_eq!(measure(ErrorClass::None, &empty), zero());
}

#[test]
fn reward_modes() {
    assert_eq!(reward(&zero(), &one(), RewardMode::Improved), one());
    assert_eq!(reward(&one(), &one(), RewardMode::Improved), zero());
    assert_eq!(reward(&one(), &one(), RewardMode::NotWorse), one());
    assert_eq!(reward(&zero(), &frac(1, 2), RewardMode::NotWorse), zero());
}

#[test]
fn first_update_replaces_prior() {
    let mut t = QTable::default();
    let s = StateKey::start();
    assert_eq!(t.q(&s, "A.f"), one());
    t.update(&s, "A.f", &zero(), &one());
    assert_eq!(t.get(&s, "A.f"), QEntry { q: zero(), visits: 1 });
    t.update(&s, "A.f", &one(), &one());
    t.update(&s, "A.f", &one(), &frac(1, 2));
    assert_eq!(t.q(&s, "A.f"), frac(1, 2));
}

#[test]
fn argmax_breaks_ties_low() {
    let mut t = QTable::default();
    let s = StateKey::start();
    let c: Vec<String> = ["a", "b", "c"].iter().map(|x| x.to_string()).collect();
    assert_eq!(argmax(&t, &s, &c), Some(0));
    t.update(&s, "a", &zero(), &zero());
    assert_eq!(argmax(&t, &s, &c), Some(1));
    assert_eq!(argmax(&t, &s, &[]), None);
}

#[test]
fn distribution_sums_to_one() {
    let t = QTable::default();
    let s = StateKey::start();
    let c: Vec<String> = (0..4).map(|i| i.to_string()).collect();
    let d = policy_distribution(&t, &s, &c, &frac(3, 10));
    assert_eq!(d[0], frac(7, 10));
    assert_eq!(d[1], frac(1, 10));
    assert_eq!(d.iter().fold(zero(), |a, b| a + b), one());
    assert_eq!(policy_distribution(&t, &s, &c[..1], &frac(3, 10)), vec![one()]);
}

#[test]
fn select_single_candidate_and_empty() {
    let t = QTable::default();
    let s = StateKey::start();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(select_next(&t, &s, &["x".to_string()], 1.0, &mut rng).unwrap(), 0);
    assert!(matches!(select_next(&t, &s, &[], 0.1, &mut rng), Err(LearnError::NoCandidates)));
}

#[test]
fn json_roundtrip_and_version() {
    let mut t = QTable::default();
    t.update(&StateKey::new("P.borrow", ErrorClass::ES), "P.deposit", &one(), &frac(1, 2));
    t.update(&StateKey::start(), "P.borrow", &zero(), &one());
    let back = QTable::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);
    let bumped = t.to_json().replace("\"version\": 1", "\"version\": 9");
    assert!(matches!(QTable::from_json(&bumped), Err(LearnError::Version(9))));
}

#[test]
fn merge_weights_by_visits() {
    let s = StateKey::start();
    let mut a = QTable::default();
    let mut b = QTable::default();
    a.update(&s, "f", &one(), &one());
    for _ in 0..3 {
        b.update(&s, "f", &zero(), &one());
    }
    b.update(&s, "g", &one(), &one());
    let m = a.merge(&b);
    assert_eq!(m.get(&s, "f"), QEntry { q: frac(1, 4), visits: 4 });
    assert_eq!(m.get(&s, "g").visits, 1);
    assert_eq!(m.merge(&QTable::default()), m);
}
