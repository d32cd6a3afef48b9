use proptest::prelude::*;

use waitmarket::commitment::{
    binary_sbar_closed_form, buyer_posterior_revealed, exit_profile, posterior_surplus, price_revealed,
    value_of_exit_times,
};
use waitmarket::config::parse_environment;
use waitmarket::equilibrium::{binary_sstar_closed_form, seller_posterior_value, solve_with, EquilibriumOptions};
use waitmarket::model::posterior_type_belief;
use waitmarket::numerics::{bisect_monotone_fixed_point, first_crossing_time};
use waitmarket::{validate, Environment};

#[derive(Debug, Clone)]
struct BinaryParams {
    prior_high: f64,
    top: (f64, f64),
    v_buyer: (f64, f64),
    v_seller: (f64, f64),
    slope: f64,
}

fn binary_params() -> impl Strategy<Value = BinaryParams> {
    (0.3..0.9f64, 0.05..0.4f64, 0.05..0.5f64, 0.5..1.5f64, 0.3..1.5f64, 0.2..1.0f64, -0.8..0.0f64).prop_map(
        |(prior_high, fl, dfh, vbl, dvb, dvs, slope)| {
            let vbh = vbl + dvb;
            // seller values straddle the buyer values so the surplus changes sign
            let vsh = vbh - dvs.min(0.9 * vbh);
            let vsl = vbl.max(vsh) + 0.3 + dvs;
            BinaryParams { prior_high, top: (fl, (fl + dfh).min(0.95)), v_buyer: (vbl, vbh), v_seller: (vsl, vsh), slope }
        },
    )
}

fn binary_env(p: &BinaryParams, nodes: usize) -> Environment {
    let json = serde_json::json!({
        "prior": [1.0 - p.prior_high, p.prior_high],
        "v_buyer": [p.v_buyer.0, p.v_buyer.1],
        "v_seller": [p.v_seller.0, p.v_seller.1],
        "arrival_rate": 1.0,
        "signals": { "family": "binary-table", "top": [p.top.0, p.top.1] },
        "types": { "family": "likelihood-ratio", "ratio": { "intercept": 1.0, "slope": p.slope } }
    });
    parse_environment(&json.to_string(), nodes).unwrap()
}

fn usable(env: &Environment) -> bool {
    validate(env).unwrap().passed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crossing_matches_dense_scan(a in 0.5..5.0f64, c in 0.05..0.45f64, b in 0.05..2.0f64) {
        let f = |t: f64| a * (-b * t).exp() - c * a;
        let t = first_crossing_time(f, 1e3, 1e-10, 0.0).unwrap();
        let h = 1e-3;
        let scan = (0..).map(|k| k as f64 * h).find(|s| f(*s) <= 0.0).unwrap();
        prop_assert!(t <= scan + 1e-9 && t > scan - h - 1e-9);
        prop_assert!((t - (1.0 / c).ln() / b).abs() < 1e-8);
    }

    #[test]
    fn fixed_point_is_stable_under_tolerance_halving(alpha in 0.0..0.9f64, beta in 0.1..2.0f64) {
        let hi = 4.0 * beta / (1.0 - alpha) + 1.0;
        let map = |p: f64| Ok(alpha * p + beta);
        let tol = 1e-8;
        let p1 = bisect_monotone_fixed_point(map, 0.0, hi, tol).unwrap();
        let p2 = bisect_monotone_fixed_point(map, 0.0, hi, tol / 2.0).unwrap();
        let exact = beta / (1.0 - alpha);
        prop_assert!((p1 - exact).abs() <= tol / (1.0 - alpha) + 1e-12);
        prop_assert!((p2 - exact).abs() <= tol / 2.0 / (1.0 - alpha) + 1e-12);
    }

    #[test]
    fn posterior_surplus_crosses_once(p in binary_params(), y in 0.0..1.0f64) {
        let env = binary_env(&p, 51);
        prop_assume!(usable(&env));
        let signs: Vec<bool> = (0..400).map(|k| posterior_surplus(&env, k as f64 * 0.5, y) > 0.0).collect();
        let first_off = signs.iter().position(|s| !*s).unwrap_or(signs.len());
        prop_assert!(signs[first_off..].iter().all(|s| !*s));
    }

    #[test]
    fn beliefs_and_prices_are_monotone(p in binary_params(), y in 0.0..0.95f64, t in 0.0..40.0f64) {
        let env = binary_env(&p, 51);
        prop_assume!(usable(&env));
        // higher types hold first-order-dominant beliefs
        let lo = posterior_type_belief(&env, y).unwrap()[1];
        let hi = posterior_type_belief(&env, y + 0.05).unwrap()[1];
        prop_assert!(hi >= lo - 1e-12);
        // a waiting seller looks worse; a better signal looks better
        prop_assert!(price_revealed(&env, t + 1.0, y).unwrap() <= price_revealed(&env, t, y).unwrap() + 1e-12);
        prop_assert!(buyer_posterior_revealed(&env, 0, t, y).unwrap() <= buyer_posterior_revealed(&env, 1, t, y).unwrap() + 1e-12);
        prop_assert!(seller_posterior_value(&env, t + 1.0, y).unwrap() > seller_posterior_value(&env, t, y).unwrap()
            || (p.v_seller.0 - seller_posterior_value(&env, t, y).unwrap()) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn root_found_exits_match_closed_forms(p in binary_params()) {
        let env = binary_env(&p, 41);
        prop_assume!(usable(&env));
        let sol = exit_profile(&env).unwrap();
        for (y, s) in env.grid().nodes().iter().zip(sol.exit_times()) {
            prop_assert!((s - binary_sbar_closed_form(&env, *y).unwrap()).abs() < 1e-8);
        }
        if let Some(eq) = solve_with(&env, EquilibriumOptions::default()).unwrap().interior() {
            for (y, s) in env.grid().nodes().iter().zip(&eq.exit_times) {
                prop_assert!((s - binary_sstar_closed_form(&env, eq.price, *y).unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn equilibrium_price_is_stable_under_tolerance_halving(p in binary_params()) {
        let env = binary_env(&p, 21);
        prop_assume!(usable(&env));
        let base = EquilibriumOptions::default();
        let a = solve_with(&env, base).unwrap();
        let b = solve_with(&env, EquilibriumOptions { fixed_point_tol: base.fixed_point_tol / 2.0, ..base }).unwrap();
        prop_assert!((a.price() - b.price()).abs() < 1e-6);
    }

    #[test]
    fn optimum_beats_scaled_exits(p in binary_params(), scale in prop_oneof![0.9..0.9001f64, 1.1..1.1001f64]) {
        let env = binary_env(&p, 41);
        prop_assume!(usable(&env));
        let sol = exit_profile(&env).unwrap();
        let scaled: Vec<f64> = sol.exit_times().iter().map(|e| e * scale).collect();
        prop_assert!(value_of_exit_times(&env, &scaled).unwrap() <= sol.value() + 1e-12);
    }
}
