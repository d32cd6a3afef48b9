use waitmarket::commitment::{exit_profile, trade_probability};
use waitmarket::simulator::{
    analytic_profile_value, matched_signal_comparison, perturbation_suite, simulate, Acceptance, Pricing,
};
use waitmarket::{fixtures, CutoffStrategyProfile, Error};

#[test]
fn no_offers_without_time_in_market() {
    let env = fixtures::env_a(101);
    let profile = CutoffStrategyProfile::uniform_exit(&env, 0.0, Pricing::Revealed, Acceptance::OnlyTop).unwrap();
    let stats = simulate(&env, &profile, 2_000, 7).unwrap();
    assert!(stats.records.iter().all(|r| !r.traded && r.offers == 0));
}

#[test]
fn rejects_bad_inputs() {
    let env = fixtures::env_a(101);
    let profile = CutoffStrategyProfile::uniform_exit(&env, 1.0, Pricing::Revealed, Acceptance::OnlyTop).unwrap();
    assert!(matches!(simulate(&env, &profile, 0, 1), Err(Error::Argument(_))));
    assert!(CutoffStrategyProfile::new(vec![f64::INFINITY], Pricing::Revealed, Acceptance::OnlyTop).is_err());
    let short = CutoffStrategyProfile::new(vec![1.0; 3], Pricing::Revealed, Acceptance::OnlyTop).unwrap();
    assert!(simulate(&env, &short, 10, 1).is_err());
}

#[test]
fn optimal_profile_trade_frequency() {
    let env = fixtures::env_a0(101);
    let sol = exit_profile(&env).unwrap();
    let stats = simulate(&env, &CutoffStrategyProfile::optimal(&sol), 100_000, 11).unwrap();
    let high = stats.summary.trade_frequency_by_state[1];
    assert!((high.mean - 0.984375).abs() < 3.0 * high.std_error, "{high:?}");
    let low = stats.summary.trade_frequency_by_state[0];
    assert!((low.mean - 0.875).abs() < 3.0 * low.std_error, "{low:?}");
}

#[test]
fn accept_all_follows_first_arrival_law() {
    let env = fixtures::env_a0(101);
    let profile = CutoffStrategyProfile::uniform_exit(&env, 1.0, Pricing::Constant(1.5), Acceptance::Set(vec![0, 1])).unwrap();
    let stats = simulate(&env, &profile, 50_000, 3).unwrap();
    let expected = 1.0 - (-1.0f64).exp();
    let f = stats.summary.trade_frequency;
    assert!((f.mean - expected).abs() < 3.0 * f.std_error, "{f:?}");
    // the first arrival always trades, so offers and trades coincide
    assert!(stats.records.iter().all(|r| r.offers == u32::from(r.traded)));
    assert!(stats.records.iter().filter(|r| r.traded).all(|r| r.price == Some(1.5)));
}

#[test]
fn per_state_frequency_matches_drawn_types() {
    let env = fixtures::env_a(201);
    let sol = exit_profile(&env).unwrap();
    let stats = simulate(&env, &CutoffStrategyProfile::optimal(&sol), 100_000, 5).unwrap();
    let grid = env.grid();
    for s in 0..2 {
        let runs: Vec<_> = stats.records.iter().filter(|r| r.state == s).collect();
        let predicted: f64 = runs
            .iter()
            .map(|r| trade_probability(&env, sol.exit_times()[grid.cell_of(r.type_value)], r.type_value, s).unwrap())
            .sum::<f64>()
            / runs.len() as f64;
        let e = stats.summary.trade_frequency_by_state[s];
        assert!((e.mean - predicted).abs() < 3.5 * e.std_error, "state {s}: {e:?} vs {predicted}");
    }
}

#[test]
fn runs_are_reproducible_and_balanced() {
    let env = fixtures::env_c(101);
    let sol = exit_profile(&env).unwrap();
    let profile = CutoffStrategyProfile::new(sol.exit_times().to_vec(), Pricing::Pooled, Acceptance::PosteriorThreshold).unwrap();
    let a = simulate(&env, &profile, 3_000, 99).unwrap();
    let b = simulate(&env, &profile, 3_000, 99).unwrap();
    assert_eq!(a, b);
    let c = simulate(&env, &profile, 3_000, 100).unwrap();
    assert_ne!(a.records, c.records);
    for r in &a.records {
        assert_eq!(r.surplus, r.profit + r.rent);
        if let Some(t) = r.trade_time {
            assert!(t <= sol.exit_times()[env.grid().cell_of(r.type_value)]);
        }
    }
}

#[test]
fn analytic_values() {
    let env = fixtures::env_a0(101);
    let sol = exit_profile(&env).unwrap();
    let v = analytic_profile_value(&env, &CutoffStrategyProfile::optimal(&sol)).unwrap();
    assert!((v.surplus - 0.6125).abs() < 1e-6);
    assert!(v.rent.abs() < 1e-9);
    assert!((v.surplus - v.profit - v.rent).abs() < 1e-12);

    let early = CutoffStrategyProfile::uniform_exit(&env, 10.0, Pricing::Revealed, Acceptance::OnlyTop).unwrap();
    let only_top = analytic_profile_value(&env, &early).unwrap().surplus;
    assert!(only_top < 0.6125);

    // accept everyone, exiting when the low state has traded as often as under the optimum
    let matched = -(1.0f64 - 0.875).ln();
    let all = CutoffStrategyProfile::uniform_exit(&env, matched, Pricing::Revealed, Acceptance::Set(vec![0, 1])).unwrap();
    let all = analytic_profile_value(&env, &all).unwrap();
    assert!((all.trade_probability_by_state[0] - 0.875).abs() < 1e-9);
    assert!(all.surplus < v.surplus);
}

#[test]
fn perturbations() {
    let env = fixtures::env_a(201);
    let sol = exit_profile(&env).unwrap();
    let identity = analytic_profile_value(&env, &CutoffStrategyProfile::optimal(&sol)).unwrap();
    assert!((identity.surplus - sol.value()).abs() < 1e-9);

    let doubled: Vec<f64> = sol.exit_times().iter().map(|e| 2.0 * e).collect();
    let doubled = CutoffStrategyProfile::new(doubled, Pricing::Revealed, Acceptance::OnlyTop).unwrap();
    assert!(analytic_profile_value(&env, &doubled).unwrap().surplus < sol.value() - 1e-6);

    let all = CutoffStrategyProfile::new(sol.exit_times().to_vec(), Pricing::Revealed, Acceptance::Set(vec![0, 1])).unwrap();
    assert!(analytic_profile_value(&env, &all).unwrap().surplus < sol.value() - 1e-6);

    let report = perturbation_suite(&env, &sol, 30, 17).unwrap();
    assert!(report.passed(), "{:?}", report.failures);
    assert!(report.outcomes[0].ok && !report.outcomes[0].deviates);
    assert!(report.outcomes.iter().all(|o| o.value <= sol.value() + 1e-9));
}

#[test]
fn matched_signal_rules() {
    let env = fixtures::appendix_d2(201);
    let c = matched_signal_comparison(&env, 1, 2).unwrap();
    assert!(c.first_exit > 0.0 && c.second_exit > c.first_exit);
    assert!(c.first_conditional_surplus > c.second_conditional_surplus);
    assert!(matches!(matched_signal_comparison(&env, 0, 7), Err(Error::Argument(_))));
}
