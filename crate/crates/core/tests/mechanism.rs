use proptest::prelude::*;
use quotamech::agents::ReportStrategy;
use quotamech::distributions::{EmpiricalCdf, ValueDistribution};
use quotamech::mechanism::{capacity_rule, run, CappedRule, MechanismConfig, Termination};
use quotamech::transport::{solve_dual_from, GreedyPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> ValueDistribution<f64> {
    ValueDistribution::uniform(0.0, 1.0).unwrap()
}

fn strategy() -> impl Strategy<Value = ReportStrategy<f64>> {
    prop_oneof![
        Just(ReportStrategy::Truthful),
        (0.0f64..0.3).prop_map(|delta| ReportStrategy::DeltaShift { delta }),
        (0.2f64..0.8).prop_map(|q| ReportStrategy::QuantileThreshold { q, low: 0.0, high: 1.0 }),
    ]
}

fn traced(n: usize, horizon: usize, seed: u64) -> MechanismConfig<f64> {
    let mut cfg = MechanismConfig::new(n, horizon, seed).unwrap();
    cfg.record_trace = true;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_respect_capacities_and_accounting(
        (n, strategies) in (2usize..=4).prop_flat_map(|n| (Just(n), prop::collection::vec(strategy(), n))),
        horizon in 1usize..400,
        seed in any::<u64>(),
        scale in prop_oneof![Just(1.0), Just(0.05)],
        rule in prop_oneof![Just(CappedRule::Uniform), Just(CappedRule::RestrictedGreedy)],
    ) {
        let mut cfg = traced(n, horizon, seed);
        cfg.detector.constant_scale = scale;
        cfg.capped_rule = rule;
        let out = run(&cfg, &unit(), &strategies).unwrap();
        let trace = out.trace.as_ref().unwrap();
        let mut won = vec![0usize; n];
        let mut utility = vec![0.0; n];
        for r in trace.iter().filter(|r| r.winner != usize::MAX) {
            prop_assert!(!r.capped.contains(&r.winner));
            for i in 0..n {
                if strategies[i].is_truthful() {
                    prop_assert_eq!(r.reported_values[i], r.true_values[i]);
                }
            }
            won[r.winner] += 1;
            utility[r.winner] += r.true_values[r.winner];
        }
        prop_assert_eq!(&won, &out.items_won);
        prop_assert_eq!(&utility, &out.utility);
        for i in 0..n {
            prop_assert!(out.items_won[i] <= out.capacities[i]);
        }
        prop_assert!(out.capacities.iter().sum::<usize>() >= horizon);
        prop_assert_eq!(out.rounds_played, won.iter().sum::<usize>());
    }

    #[test]
    fn policy_is_fixed_within_each_epoch(seed in any::<u64>(), horizon in 2usize..600) {
        let out = run(&traced(3, horizon, seed), &unit(), &vec![ReportStrategy::Truthful; 3]).unwrap();
        let trace = out.trace.unwrap();
        for (k, e) in out.epochs.iter().enumerate() {
            prop_assert_eq!(e.epoch as usize, k);
            prop_assert_eq!(e.first_round, 1usize << k);
        }
        for r in &trace {
            prop_assert_eq!(r.policy_epoch, usize::BITS - 1 - r.t.leading_zeros());
            let lam = &out.epochs[r.policy_epoch as usize].lambda;
            if r.capped.is_empty() {
                let set = GreedyPolicy::new(lam.clone()).unwrap().argmax_set(&r.reported_values);
                prop_assert!(set & (1 << r.winner) != 0);
            }
        }
    }
}

#[test]
fn policies_are_learned_from_all_pooled_reports() {
    let mut cfg = traced(2, 600, 4);
    cfg.detector.constant_scale = 1.0;
    let strategies = [ReportStrategy::DeltaShift { delta: 0.1 }, ReportStrategy::Truthful];
    let out = run(&cfg, &unit(), &strategies).unwrap();
    let trace = out.trace.unwrap();
    for w in out.epochs.windows(2) {
        let t = w[1].first_round - 1;
        let pooled: Vec<f64> = trace[..t].iter().flat_map(|r| r.reported_values.iter().copied()).collect();
        assert_eq!(pooled.len(), 2 * t);
        let f = ValueDistribution::empirical_with_upper_bound(EmpiricalCdf::new(pooled).unwrap(), 1.0).unwrap();
        let again = solve_dual_from(&f, &cfg.quota, &cfg.solver, &w[0].lambda).unwrap();
        assert_eq!(again.policy.lambda(), w[1].lambda.as_slice(), "epoch at t={t}");
    }
}

#[test]
fn runs_are_reproducible() {
    let strategies = [ReportStrategy::DeltaShift { delta: 0.05 }, ReportStrategy::Truthful, ReportStrategy::Truthful];
    let a = run(&traced(3, 3000, 77), &unit(), &strategies).unwrap();
    let b = run(&traced(3, 3000, 77), &unit(), &strategies).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run(&traced(3, 3000, 78), &unit(), &strategies).unwrap();
    assert_ne!(a.utility, c.utility);
}

#[test]
fn single_round_goes_to_the_highest_report() {
    for seed in 0..20 {
        let out = run(&traced(2, 1, seed), &unit(), &[ReportStrategy::Truthful, ReportStrategy::Truthful]).unwrap();
        let r = &out.trace.unwrap()[0];
        let best = if r.reported_values[0] >= r.reported_values[1] { 0 } else { 1 };
        assert_eq!(r.winner, best);
        assert_eq!(out.termination, Termination::HorizonComplete);
    }
}

#[test]
fn truthful_agents_earn_a_third_per_round_in_the_last_epoch() {
    let horizon = 1 << 14;
    let out = run(&traced(2, horizon, 2024), &unit(), &[ReportStrategy::Truthful, ReportStrategy::Truthful]).unwrap();
    let trace = out.trace.unwrap();
    let last = &trace[horizon / 2 - 1..];
    for i in 0..2 {
        let u: f64 = last.iter().filter(|r| r.winner == i).map(|r| r.true_values[i]).sum();
        let per_round = u / last.len() as f64;
        assert!((per_round - 1.0 / 3.0).abs() <= 0.01, "agent {i}: {per_round}");
    }
}

#[test]
fn quantile_misreporter_is_rejected_under_a_scaled_detector() {
    let strategies = [ReportStrategy::QuantileThreshold { q: 0.5, low: 0.0, high: 1.0 }, ReportStrategy::Truthful];
    let mut hits = 0;
    for seed in 0..100 {
        let mut cfg = MechanismConfig::new(2, 1 << 14, seed).unwrap();
        cfg.detector.constant_scale = 0.05;
        let out = run(&cfg, &unit(), &strategies).unwrap();
        match out.termination {
            Termination::DetectorReject { agent, round } => {
                assert_eq!(agent, 0);
                hits += usize::from(round < 1 << 14);
            }
            other => panic!("seed {seed}: {other:?}"),
        }
    }
    assert!(hits >= 95);
}

#[test]
fn capacity_binds_only_near_the_horizon() {
    let horizon = 1usize << 14;
    let t = horizon as f64;
    let earliest = t - 20.0 * (t * t.ln()).sqrt();
    for seed in 0..100 {
        let out = run(&MechanismConfig::new(2, horizon, seed).unwrap(), &unit(), &[ReportStrategy::Truthful, ReportStrategy::Truthful]).unwrap();
        if let Some(r) = out.first_cap_round {
            assert!(r as f64 >= earliest, "seed {seed}: capped at {r}");
        }
        assert_eq!(out.termination, Termination::HorizonComplete);
    }
}

#[test]
fn capacity_rule_examples() {
    let policy = GreedyPolicy::new(vec![0.0, 0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reports = [0.9, 0.5, 0.1];
    let trials = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..trials {
        counts[capacity_rule(&[0], &policy, &reports, CappedRule::Uniform, &mut rng).unwrap()] += 1;
    }
    assert_eq!(counts[0], 0);
    let sigma = (0.25f64 / trials as f64).sqrt();
    assert!((counts[1] as f64 / trials as f64 - 0.5).abs() <= 4.0 * sigma);
    for _ in 0..100 {
        assert_eq!(capacity_rule(&[0, 1], &policy, &reports, CappedRule::Uniform, &mut rng).unwrap(), 2);
    }
    assert_eq!(capacity_rule(&[], &policy, &reports, CappedRule::Uniform, &mut rng).unwrap(), 0);
    assert_eq!(capacity_rule(&[0], &policy, &reports, CappedRule::RestrictedGreedy, &mut rng).unwrap(), 1);
}
