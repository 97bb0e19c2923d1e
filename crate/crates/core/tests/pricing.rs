use parisian_core::mc_oracle::{simulate_price, SimConfig};
use parisian_core::pricer::{price_down_in_call_per_node, vanilla_call_by_transform};
use parisian_core::{black_scholes_call, price_down_in_call, price_down_out_call, EngineConfig, MarketParams};
use proptest::prelude::*;

fn desk() -> MarketParams {
    MarketParams {
        spot: 100.0,
        strike: 100.0,
        barrier: 95.0,
        rate_r: 0.05,
        dividend_delta: 0.0,
        sigma: 0.2,
        tau: 1.0,
        window_d: 0.1,
        elapsed_below: 0.0,
    }
}

fn mc(n_paths: u64, seed: u64) -> SimConfig {
    SimConfig {
        n_paths,
        dt: 1e-3,
        seed,
        antithetic: true,
    }
}

fn assert_agrees_with_mc(m: &MarketParams, sc: &SimConfig) {
    let p = price_down_in_call(m, &EngineConfig::default()).unwrap();
    let e = simulate_price(m, sc).unwrap();
    assert!(
        (p.price - e.mean).abs() < 3.0 * e.std_error,
        "transform {} vs MC {} ± {}",
        p.price,
        e.mean,
        e.std_error
    );
}

#[test]
fn below_barrier_prices_agree_with_mc() {
    // one stay already in progress, one just started (d = D)
    assert_agrees_with_mc(&MarketParams { spot: 93.0, elapsed_below: 0.02, ..desk() }, &mc(400_000, 1));
    assert_agrees_with_mc(&MarketParams { spot: 90.0, strike: 85.0, ..desk() }, &mc(400_000, 2));
}

#[test]
fn other_contracts_agree_with_mc() {
    assert_agrees_with_mc(
        &MarketParams { strike: 90.0, dividend_delta: 0.02, sigma: 0.3, tau: 2.0, window_d: 0.25, ..desk() },
        &mc(200_000, 3),
    );
    assert_agrees_with_mc(&MarketParams { spot: 97.0, window_d: 0.3, ..desk() }, &mc(200_000, 4));
}

#[test]
fn doubling_the_rate_matches_mc() {
    let m = MarketParams { rate_r: 0.1, ..desk() };
    assert_agrees_with_mc(&m, &mc(400_000, 5));
}

#[test]
fn mc_discretization_trend() {
    let m = desk();
    let coarse = simulate_price(&m, &SimConfig { dt: 1e-3, ..mc(200_000, 6) }).unwrap();
    let fine = simulate_price(&m, &SimConfig { dt: 5e-4, ..mc(200_000, 6) }).unwrap();
    // the two runs are independent: compare with the error of the difference
    let se = coarse.std_error.hypot(fine.std_error);
    assert!(
        (coarse.mean - fine.mean).abs() < 2.0 * se,
        "{coarse:?} vs {fine:?}"
    );
}

#[test]
fn maturity_next_to_a_second_window() {
    // from the barrier, the time function has weak singular points at
    // multiples of D; τ = 0.5 sits just below 2D here
    let m = MarketParams {
        spot: 99.0,
        strike: 80.0,
        barrier: 99.0,
        rate_r: 0.0,
        sigma: 0.1,
        tau: 0.5,
        window_d: 0.255,
        ..desk()
    };
    let p = price_down_in_call(&m, &EngineConfig::default()).unwrap();
    assert!(p.err_estimate < 1e-6, "{p:?}");
    assert_agrees_with_mc(&m, &mc(200_000, 9));
}

#[test]
fn per_node_route_matches_transform_route() {
    let cfg = EngineConfig::default();
    for m in [desk(), MarketParams { spot: 93.0, elapsed_below: 0.02, ..desk() }] {
        let fast = price_down_in_call(&m, &cfg).unwrap();
        let slow = price_down_in_call_per_node(&m, &cfg).unwrap();
        assert!(
            (fast.price - slow.price).abs() <= fast.err_estimate + slow.err_estimate,
            "{fast:?} vs {slow:?}"
        );
    }
}

#[test]
fn down_out_limits() {
    let cfg = EngineConfig::default();
    let long = MarketParams { window_d: 1.5, ..desk() };
    assert_eq!(price_down_out_call(&long, &cfg).unwrap().price, black_scholes_call(&long));
    let nearly = MarketParams { spot: 90.0, elapsed_below: 0.1 - 1e-4, ..desk() };
    let out = price_down_out_call(&nearly, &cfg).unwrap();
    assert!(out.price.abs() <= 2.0 * out.err_estimate, "{out:?}");
}

#[test]
fn parity_with_transformed_vanilla() {
    let cfg = EngineConfig::default();
    let m = desk();
    let din = price_down_in_call(&m, &cfg).unwrap();
    let dout = price_down_out_call(&m, &cfg).unwrap();
    let vanilla = vanilla_call_by_transform(&m, &cfg).unwrap();
    assert!((din.price + dout.price - vanilla.price).abs() < 1e-6 * vanilla.price);
}

#[test]
fn already_knocked_in_is_rejected() {
    let m = MarketParams { spot: 90.0, elapsed_below: 0.1, ..desk() };
    assert!(matches!(
        price_down_in_call(&m, &EngineConfig::default()),
        Err(parisian_core::Error::Degenerate(_))
    ));
}

fn contract() -> impl Strategy<Value = MarketParams> {
    (
        80.0..120.0f64,
        80.0..120.0f64,
        0.85..1.05f64,
        0.0..0.08f64,
        0.0..0.04f64,
        0.1..0.4f64,
        0.5..2.0f64,
        0.02..0.3f64,
        0.0..0.95f64,
    )
        .prop_map(|(spot, strike, l, r, q, sigma, tau, d, frac)| {
            let barrier = spot * l;
            MarketParams {
                spot,
                strike,
                barrier,
                rate_r: r,
                dividend_delta: q,
                sigma,
                tau,
                window_d: d,
                elapsed_below: if spot < barrier { frac * d } else { 0.0 },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn price_is_bounded_by_the_vanilla(m in contract()) {
        let p = price_down_in_call(&m, &EngineConfig::default()).unwrap();
        prop_assert!(p.price >= -p.err_estimate, "{p:?}");
        prop_assert!(p.price <= black_scholes_call(&m) + p.err_estimate, "{p:?}");
    }

    #[test]
    fn price_is_nonincreasing_in_the_window(m in contract(), grow in 1.1..2.0f64) {
        let cfg = EngineConfig::default();
        let longer = MarketParams { window_d: m.window_d * grow, elapsed_below: m.elapsed_below * grow, ..m };
        let a = price_down_in_call(&m, &cfg).unwrap();
        let b = price_down_in_call(&longer, &cfg).unwrap();
        prop_assert!(b.price <= a.price + 2.0 * (a.err_estimate + b.err_estimate), "{a:?} vs {b:?}");
    }

    #[test]
    fn price_is_nondecreasing_in_the_barrier(m in contract(), down in 0.9..0.999f64) {
        prop_assume!(m.spot >= m.barrier);
        let cfg = EngineConfig::default();
        let lower = MarketParams { barrier: m.barrier * down, ..m };
        let a = price_down_in_call(&m, &cfg).unwrap();
        let b = price_down_in_call(&lower, &cfg).unwrap();
        prop_assert!(b.price <= a.price + 2.0 * (a.err_estimate + b.err_estimate), "{a:?} vs {b:?}");
    }

    #[test]
    fn constellations_meet_at_the_barrier(m in contract()) {
        let cfg = EngineConfig::default();
        let at = MarketParams { spot: m.barrier, elapsed_below: 0.0, ..m };
        let below = MarketParams { spot: m.barrier * (1.0 - 1e-9), ..at };
        let a = price_down_in_call(&at, &cfg).unwrap();
        let b = price_down_in_call(&below, &cfg).unwrap();
        prop_assert!((a.price - b.price).abs() <= 1e-6 + a.err_estimate + b.err_estimate, "{a:?} vs {b:?}");
    }
}
