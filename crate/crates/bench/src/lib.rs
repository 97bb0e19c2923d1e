//! Contracts shared by the benchmarks.

use parisian_core::MarketParams;

/// S = 100, K = 100, L = 95, r = 5%, σ = 20%, one year, D = 0.1.
pub fn desk() -> MarketParams {
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

/// The desk contract with the spot 2% under the barrier, 0.02 into the window.
pub fn below_barrier() -> MarketParams {
    MarketParams {
        spot: 93.0,
        elapsed_below: 0.02,
        ..desk()
    }
}

/// Spot on the barrier, maturity just past twice the window.
pub fn at_barrier() -> MarketParams {
    MarketParams {
        spot: 95.0,
        tau: 0.21,
        ..desk()
    }
}
