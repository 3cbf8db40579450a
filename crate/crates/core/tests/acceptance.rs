//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with
//! its wall time; run with `--nocapture` to see them.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use mevfuzz_core::harness::{
    compare_strategies, run_matrix, run_scenario, summarize, validate_report, BenchMatrix, CampaignConfig, Report,
    StopPolicy, StrategyKind,
};
use mevfuzz_core::learn::{policy_distribution, select_next, QTable, StateKey};
use mevfuzz_core::oracle::{evaluate_trace, MevulClass, OracleConfig, OracleContext};
use mevfuzz_core::ratio::{self, frac, int, parse};
use mevfuzz_core::rules::default_rules;
use mevfuzz_core::scenario::{self, clean_names, labeled_names, load_scenario, replay_witness};
use mevfuzz_core::world::{PriceSource, Prices, ValueScope};
use mevfuzz_core::{AccountId, Rational, StepSnapshot, TokenSymbol, Transaction, Value, WorldSpec, WorldState};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let pass = ok && elapsed <= limit;
    println!(
        "{name}: {} in {elapsed:.2?} (limit {limit:?}) {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name}: {detail}");
    assert!(elapsed <= limit, "{name}: took {elapsed:?}, limit {limit:?}");
}

// ---------------------------------------------------------------------------
// 1. lending witness

#[test]
fn lending_witness_replay() {
    let t = Instant::now();
    let s = load_scenario("silo-lending").unwrap();
    let trace = replay_witness(&s).unwrap();
    let scope = ValueScope::Accounts(trace.initial.monitored().iter().cloned().collect());
    let mut w = trace.initial.clone();
    let mut values = Vec::new();
    for tx in s.witness.as_ref().unwrap() {
        w.execute(tx).unwrap();
        values.push(w.total_value(&scope, PriceSource::Internal));
    }
    let expected: Vec<Rational> = ["200", "200.1", "300.1", "300.1", "300.1", "300.1", "200.1", "100.1", "100.2"]
        .iter()
        .map(|v| parse(v).unwrap())
        .collect();
    let ta = TokenSymbol::new("tA");
    let prices_ok = trace.steps[4].prices_after[&ta] == parse("0.999").unwrap()
        && trace.steps[5].prices_after[&ta] == int(999);

    let cfg = OracleConfig {
        tol_eps: frac(1, 20),
        lambda: frac(1, 5),
        ..OracleConfig::default()
    };
    let verdicts = evaluate_trace(&trace.initial, &cfg, &trace.steps);
    let fired = |class, index| verdicts.iter().any(|v| v.class == class && v.tx_index == index);
    let es_at: Vec<usize> = verdicts.iter().filter(|v| v.class == MevulClass::ES).map(|v| v.tx_index).collect();

    let ok = values == expected && prices_ok && fired(MevulClass::ES, 6) && fired(MevulClass::VS, 8);
    let detail = format!(
        "values {:?}, ES at {es_at:?}",
        values.iter().map(ratio::format).collect::<Vec<_>>()
    );
    report("[1] lending witness", ok, t.elapsed(), Duration::from_secs(1), &detail);
}

// ---------------------------------------------------------------------------
// 2. oracles against direct evaluation on small ledger worlds

const WORLDS: [&str; 3] = [
    r#"
[[tokens]]
symbol = "k"
price = 1

[[tokens]]
symbol = "j"
price = 2

[[accounts]]
id = "a"
role = "benign-user"
balances = { k = 10, j = 5 }

[[accounts]]
id = "b"
role = "benign-user"
balances = { k = 4 }

[[accounts]]
id = "m"
role = "attacker"
balances = { k = 6 }

[[contracts]]
name = "L"
kind = "ledger"
leak_to = "m"
"#,
    r#"
[[tokens]]
symbol = "k"
price = 1

[[accounts]]
id = "a"
role = "benign-user"
balances = { k = 8 }

[[accounts]]
id = "b"
role = "attacker"
balances = { k = 3 }

[[accounts]]
id = "m"
role = "attacker"

[[contracts]]
name = "L"
kind = "ledger"
"#,
    r#"
[[tokens]]
symbol = "k"
price = 3

[[tokens]]
symbol = "j"
price = "1/2"

[[accounts]]
id = "a"
role = "benign-user"
balances = { k = 5 }

[[accounts]]
id = "b"
role = "benign-user"
balances = { j = 4 }

[[accounts]]
id = "m"
role = "owner"
balances = { j = 2 }

[[contracts]]
name = "L"
kind = "ledger"
leak_to = "b"
"#,
];

fn grammar(two_tokens: bool) -> Vec<Transaction> {
    let a = |s: &str| Value::Address(AccountId::new(s));
    let k = |s: &str| Value::Token(TokenSymbol::new(s));
    let n = |s: &str| Value::Amount(parse(s).unwrap());
    let tx = |f: &str, args: Vec<Value>, from: &str| Transaction::new("L", f, args, from);
    let mut out = vec![
        tx("move", vec![a("a"), a("b"), k("k"), n("3")], "m"),
        tx("move", vec![a("a"), a("m"), k("k"), n("2")], "m"),
        tx("leakyTransfer", vec![a("a"), a("b"), k("k"), n("4")], "m"),
        tx("leakyTransfer", vec![a("b"), a("a"), k("k"), n("1")], "m"),
        tx("mint", vec![a("b"), k("k"), n("2")], "m"),
        tx("mint", vec![a("b"), k("k"), n("2")], "a"),
        tx("burn", vec![a("a"), k("k"), n("20")], "m"),
        tx("burn", vec![a("m"), k("k"), n("1")], "m"),
        tx("setPrice", vec![k("k"), n("21/20")], "m"),
        tx("setPrice", vec![k("k"), n("2")], "m"),
        tx("setPrice", vec![k("k"), n("1")], "m"),
        tx("getPrice", vec![k("k")], "m"),
    ];
    if two_tokens {
        out.push(tx("move", vec![a("a"), a("b"), k("j"), n("1")], "m"));
        out.push(tx("setPrice", vec![k("j"), n("3/2")], "m"));
    }
    out
}

/// Each inequality written out over raw snapshot data.
#[derive(Clone)]
struct Direct {
    benign: BTreeMap<AccountId, bool>,
    observed: Prices,
    v0: Rational,
    eps: Rational,
    lambda: Rational,
    earlier: Option<Prices>,
}

impl Direct {
    fn new(w: &WorldState, cfg: &OracleConfig) -> Direct {
        let observed = w.prices.observed_prices().clone();
        let mut v0 = ratio::zero();
        for (_, token, amount) in w.balances.iter() {
            v0 += amount * &observed[token];
        }
        Direct {
            benign: w.accounts().map(|a| (a.id.clone(), a.role.is_benign())).collect(),
            observed,
            v0,
            eps: cfg.tol_eps.clone(),
            lambda: cfg.lambda.clone(),
            earlier: None,
        }
    }

    fn step(&mut self, s: &StepSnapshot) -> BTreeSet<MevulClass> {
        let earlier = self.earlier.replace(s.prices_before.clone());
        let mut out = BTreeSet::new();
        if !s.receipt.is_success() || s.readonly {
            return out;
        }
        let bal = |t: &mevfuzz_core::BalanceTable, a: &AccountId, k: &TokenSymbol| t.get(a, k);
        let addr = |i: usize| match &s.tx.args[i] {
            Value::Address(a) => a.clone(),
            v => panic!("not an address: {v}"),
        };
        let tok = |i: usize| match &s.tx.args[i] {
            Value::Token(t) => t.clone(),
            v => panic!("not a token: {v}"),
        };
        let amt = |i: usize| match &s.tx.args[i] {
            Value::Amount(x) => x.clone(),
            v => panic!("not an amount: {v}"),
        };

        let parties = match s.tx.function.as_str() {
            "move" | "leakyTransfer" => Some((addr(0), addr(1), tok(2), amt(3))),
            "mint" | "burn" => Some((s.tx.sender.clone(), addr(0), tok(1), amt(2))),
            _ => None,
        };
        if let Some((from, to, k, x)) = parties {
            if from != to && self.benign[&from] && self.benign[&to] {
                let dec = bal(&s.balances_before, &from, &k) - bal(&s.balances_after, &from, &k);
                let inc = bal(&s.balances_after, &to, &k) - bal(&s.balances_before, &to, &k);
                let mut moved = ratio::zero();
                for (acct, benign) in &self.benign {
                    if !benign {
                        moved += (bal(&s.balances_after, acct, &k) - bal(&s.balances_before, acct, &k)).abs();
                    }
                }
                if dec != x || inc != x || !moved.is_zero() {
                    out.insert(MevulClass::TA);
                }
            }
        }

        let benign_value = |t: &mevfuzz_core::BalanceTable| {
            let mut v = ratio::zero();
            for (acct, benign) in &self.benign {
                if *benign {
                    for (k, p) in &s.prices_before {
                        v += t.get(acct, k) * p;
                    }
                }
            }
            v
        };
        if benign_value(&s.balances_before) != benign_value(&s.balances_after) {
            out.insert(MevulClass::BC);
        }

        let dev = |x: &Rational, reference: &Rational| ((x - reference) / reference).abs();
        for (k, after) in &s.prices_after {
            let (before, obs) = (&s.prices_before[k], &self.observed[k]);
            if dev(before, obs) <= self.eps && dev(after, obs) > self.eps {
                out.insert(MevulClass::ES);
            }
            if let Some(e) = &earlier {
                if dev(&e[k], before) <= self.eps && dev(before, after) > self.eps {
                    out.insert(MevulClass::ES);
                }
            }
        }

        let mut value = ratio::zero();
        for (_, k, x) in s.balances_after.iter() {
            value += x * &s.prices_after[k];
        }
        if value < &self.v0 * (ratio::one() - &self.lambda) || value > &self.v0 * (ratio::one() + &self.lambda) {
            out.insert(MevulClass::VS);
        }
        out
    }
}

struct Tally {
    steps: usize,
    agree: usize,
    seen: BTreeMap<MevulClass, usize>,
    first_mismatch: Option<String>,
}

fn explore(
    world: &WorldState,
    ctx: &OracleContext,
    direct: &Direct,
    grammar: &[Transaction],
    path: &mut Vec<usize>,
    depth: usize,
    tally: &mut Tally,
) {
    if depth == 0 {
        return;
    }
    for (i, tx) in grammar.iter().enumerate() {
        let (mut w, mut c, mut d) = (world.clone(), ctx.clone(), direct.clone());
        let snap = w.execute(tx).unwrap();
        let got: BTreeSet<MevulClass> = c.evaluate(&snap).into_iter().map(|v| v.class).collect();
        let want = d.step(&snap);
        path.push(i);
        tally.steps += 1;
        if got == want {
            tally.agree += 1;
        } else if tally.first_mismatch.is_none() {
            tally.first_mismatch = Some(format!("{path:?}: oracle {got:?}, direct {want:?}"));
        }
        for class in want {
            *tally.seen.entry(class).or_default() += 1;
        }
        explore(&w, &c, &d, grammar, path, depth - 1, tally);
        path.pop();
    }
}

#[test]
fn oracles_match_direct_evaluation() {
    let t = Instant::now();
    let cfg = OracleConfig::default();
    let mut tally = Tally {
        steps: 0,
        agree: 0,
        seen: BTreeMap::new(),
        first_mismatch: None,
    };
    for text in WORLDS {
        let spec = WorldSpec::from_toml(text).unwrap();
        let world = WorldState::build(&spec).unwrap();
        let people = world.accounts().filter(|a| !world.is_contract(&a.id)).count();
        assert!(people <= 3 && world.tokens().count() <= 2);
        let grammar = grammar(world.tokens().count() == 2);
        let ctx = OracleContext::new(&world, &cfg);
        let direct = Direct::new(&world, &cfg);
        explore(&world, &ctx, &direct, &grammar, &mut Vec::new(), 4, &mut tally);
    }
    let every_class = MevulClass::ALL.iter().all(|c| tally.seen.get(c).copied().unwrap_or(0) > 0);
    let detail = format!(
        "{}/{} steps agree, flagged {:?}{}",
        tally.agree,
        tally.steps,
        tally.seen,
        tally.first_mismatch.as_deref().map(|m| format!(", first mismatch {m}")).unwrap_or_default()
    );
    report(
        "[2] oracle equivalence",
        tally.agree == tally.steps && every_class,
        t.elapsed(),
        Duration::from_secs(60),
        &detail,
    );
}

// ---------------------------------------------------------------------------
// 3. Q update against the running average

fn q_matches(pairs: &[(Rational, Rational)]) -> bool {
    let (s, a) = (StateKey::start(), "f");
    let mut table = QTable::default();
    let mut sum = ratio::zero();
    for (n, (r, m)) in pairs.iter().enumerate() {
        table.update(&s, a, r, m);
        sum += r * m;
        if table.q(&s, a) != &sum / int(n as i64 + 1) {
            return false;
        }
    }
    true
}

#[test]
fn q_update_is_running_average() {
    let t = Instant::now();
    let alphabet: Vec<(Rational, Rational)> = [0, 1]
        .iter()
        .flat_map(|&r| [frac(0, 1), frac(1, 2), frac(1, 1)].map(|m| (int(r), m)))
        .collect();
    let mut exhaustive = 0usize;
    let mut failures = 0usize;
    for len in 1..=6u32 {
        for code in 0..alphabet.len().pow(len) {
            let mut c = code;
            let seq: Vec<_> = (0..len)
                .map(|_| {
                    let p = alphabet[c % alphabet.len()].clone();
                    c /= alphabet.len();
                    p
                })
                .collect();
            exhaustive += 1;
            failures += usize::from(!q_matches(&seq));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let len = rng.gen_range(7..=64);
        let seq: Vec<_> = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone()).collect();
        failures += usize::from(!q_matches(&seq));
    }
    let detail = format!("{exhaustive} exhaustive + 10000 random sequences, {failures} mismatches");
    report("[3] q recursion", failures == 0, t.elapsed(), Duration::from_secs(30), &detail);
}

// ---------------------------------------------------------------------------
// 4. ε-greedy selection frequencies

#[test]
fn policy_frequencies() {
    let t = Instant::now();
    let cands: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
    let s = StateKey::start();
    let mut table = QTable::default();
    for c in ["c0", "c1", "c3", "c4"] {
        table.update(&s, c, &ratio::zero(), &ratio::one());
    }
    let exact = policy_distribution(&table, &s, &cands, &frac(1, 5));
    let mut counts = [0usize; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    const DRAWS: usize = 100_000;
    for _ in 0..DRAWS {
        counts[select_next(&table, &s, &cands, 0.2, &mut rng).unwrap()] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / DRAWS as f64).collect();
    let ok = exact == [frac(1, 20), frac(1, 20), frac(4, 5), frac(1, 20), frac(1, 20)]
        && (freq[2] - 0.8).abs() <= 0.01
        && [0, 1, 3, 4].iter().all(|&i| (freq[i] - 0.05).abs() <= 0.005);
    report(
        "[4] policy frequencies",
        ok,
        t.elapsed(),
        Duration::from_secs(10),
        &format!("{freq:?}"),
    );
}

// ---------------------------------------------------------------------------
// 5. full strategy against uniform random

#[test]
fn full_strategy_detects_sooner() {
    let t = Instant::now();
    let matrix = BenchMatrix::default();
    let seeds: Vec<u64> = (0..20).collect();
    let samples = run_matrix(&matrix, &CampaignConfig::default(), &seeds).unwrap();
    let stats = summarize(&samples);
    let mean = |k: StrategyKind, c: MevulClass| stats.iter().find(|s| s.strategy == k && s.class == c).map(|s| s.mean);
    let mut better = 0;
    let mut detail = Vec::new();
    for class in MevulClass::ALL {
        let (Some(full), Some(random)) = (mean(StrategyKind::Full, class), mean(StrategyKind::Random, class)) else {
            continue;
        };
        let sign = compare_strategies(&samples, class, StrategyKind::Full, StrategyKind::Random);
        let wins = full < random && sign.p_value < 0.05;
        better += usize::from(wins);
        detail.push(format!(
            "{class} {full:.1} vs {random:.1} (+{} -{} ={} p={:.2e})",
            sign.wins, sign.losses, sign.ties, sign.p_value
        ));
    }
    report(
        "[5] efficacy",
        better >= 3,
        t.elapsed(),
        Duration::from_secs(15 * 60),
        &format!("{better}/4 classes; {}", detail.join("; ")),
    );
}

// ---------------------------------------------------------------------------
// 6. completeness on labeled and clean scenarios

#[test]
fn labeled_found_and_clean_silent() {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..20).collect();
    let labeled = BenchMatrix {
        budget: 20_000,
        scenarios: labeled_names().iter().map(|s| s.to_string()).collect(),
        strategies: vec![StrategyKind::Full],
        stop: StopPolicy::AllLabeled,
    };
    let samples = run_matrix(&labeled, &CampaignConfig::default(), &seeds).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for name in labeled_names() {
        let hits = samples
            .iter()
            .filter(|s| s.scenario == name && s.labels.iter().all(|c| s.first.contains_key(c)))
            .count();
        ok &= hits >= 18;
        detail.push(format!("{name} {hits}/20"));
    }

    let clean = BenchMatrix {
        budget: 10_000,
        scenarios: clean_names().iter().map(|s| s.to_string()).collect(),
        strategies: vec![StrategyKind::Full],
        stop: StopPolicy::Never,
    };
    let samples = run_matrix(&clean, &CampaignConfig::default(), &seeds).unwrap();
    for name in clean_names() {
        let silent = samples.iter().filter(|s| s.scenario == name && s.first.is_empty()).count();
        ok &= silent == 20;
        detail.push(format!("{name} silent {silent}/20"));
    }
    report(
        "[6] completeness",
        ok,
        t.elapsed(),
        Duration::from_secs(20 * 60),
        &detail.join(", "),
    );
}

// ---------------------------------------------------------------------------
// 7. every PoC in a serialized report replays

#[test]
fn report_pocs_replay() {
    let t = Instant::now();
    let rules = default_rules();
    let mut pocs = 0usize;
    let mut failures = Vec::new();
    for name in labeled_names() {
        let sc = load_scenario(name).unwrap();
        for seed in 0..5 {
            for strategy in [StrategyKind::Full, StrategyKind::Random] {
                let cfg = CampaignConfig {
                    budget: 10_000,
                    seed,
                    strategy,
                    stop: StopPolicy::AllLabeled,
                    ..CampaignConfig::for_scenario(name)
                };
                let out = run_scenario(&sc, &rules, QTable::default(), &cfg).unwrap();
                let parsed = Report::from_json(&out.report.to_json()).unwrap();
                match validate_report(&parsed) {
                    Ok(n) => pocs += n,
                    Err(e) => failures.push(format!("{name}/{seed}/{strategy:?}: {e}")),
                }
            }
        }
    }
    report(
        "[7] report self-validation",
        failures.is_empty() && pocs > 0,
        t.elapsed(),
        Duration::from_secs(120),
        &format!("{pocs} PoCs replayed, failures {failures:?}"),
    );
}

// ---------------------------------------------------------------------------
// 8. reruns are byte-identical apart from the timestamp

#[test]
fn reports_are_deterministic() {
    let t = Instant::now();
    let mut differing = Vec::new();
    for name in scenario::names() {
        for strategy in [StrategyKind::Full, StrategyKind::Random] {
            let cfg = CampaignConfig {
                budget: 2_000,
                seed: 11,
                strategy,
                ..CampaignConfig::for_scenario(name)
            };
            let a = mevfuzz_core::harness::run_campaign(&cfg).unwrap();
            let b = mevfuzz_core::harness::run_campaign(&cfg).unwrap();
            if a.report.without_timestamp().to_json() != b.report.without_timestamp().to_json()
                || a.qtable.to_json() != b.qtable.to_json()
            {
                differing.push(format!("{name}/{strategy:?}"));
            }
        }
    }
    report(
        "[8] determinism",
        differing.is_empty(),
        t.elapsed(),
        Duration::from_secs(60),
        &format!("differing {differing:?}"),
    );
}
