//! Monte Carlo oracle for the knock-in rule, independent of the transforms.
//!
//! Paths are simulated in the normalized coordinate `x = log(S_t/S)/σ`, with
//! drift `ϖ`. Each step draws the exact Gaussian increment; what happens
//! between grid points is recovered from the Brownian bridge. With `e = x - b`
//! the signed distance to the barrier, the bridge from `e₀` to `e₁` over `h`
//! touches zero with probability `exp(-2 e₀ e₁ / h)` when both have the same
//! sign, and its first touch `u` satisfies `u = σh/(h+σ)`, where `σ` is the
//! hitting time of zero for a Brownian motion started at `e₀` with drift
//! `e₁/h` (inverse Gaussian). Reversing the bridge gives the last touch.
//!
//! Stays shorter than a step cannot reach `D` as long as `h ≤ D/2`, so the
//! excursion clock is exact at any step size. `dt` sets the step near the
//! barrier; far from it steps grow to `min(D/2, (dist/3)²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_transform::NormalizedParams;
use crate::error::{invalid, Error, Result};
use crate::pricer::{normalize, MarketParams};

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

const UNITS_PER_CHUNK: u64 = 1024;
const MIN_PATHS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_paths: u64,
    /// Step size near the barrier (years).
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            dt: 1e-4,
            seed: DEFAULT_SEED,
            antithetic: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, window: f64) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(invalid("n_paths", format!("{} is below the minimum {MIN_PATHS}", self.n_paths)));
        }
        if !(self.dt > 0.0 && self.dt <= window / 50.0) {
            return Err(invalid(
                "dt",
                format!("{} must lie in (0, D/50] with D = {window}", self.dt),
            ));
        }
        Ok(())
    }

    fn units(&self) -> u64 {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Fraction of simulated paths that knocked in.
    pub knock_in_freq: f64,
}

/// First time a Brownian bridge from `x` to `y` over `[0, h]` touches zero.
fn bridge_touch<R: Rng>(x: f64, y: f64, h: f64, rng: &mut R) -> Option<f64> {
    if x == 0.0 {
        return Some(0.0);
    }
    if x * y > 0.0 && rng.random::<f64>() >= (-2.0 * x * y / h).exp() {
        return None;
    }
    let sigma = if y == 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        x * x / (z * z)
    } else {
        let ig = InverseGaussian::new(x.abs() * h / y.abs(), x * x).ok()?;
        ig.sample(rng)
    };
    Some(sigma * h / (h + sigma))
}

/// One path's barrier state.
#[derive(Debug, Clone, Copy)]
struct Walker {
    /// `x - b`; negative below the barrier.
    e: f64,
    /// Length of the current stay below (0 above).
    clock: f64,
    knocked_at: Option<f64>,
}

impl Walker {
    fn new(n: &NormalizedParams) -> Self {
        let clock = if n.b > 0.0 { n.window - n.remaining } else { 0.0 };
        Self {
            e: -n.b,
            clock,
            knocked_at: None,
        }
    }

    fn active(&self) -> bool {
        self.knocked_at.is_none()
    }

    /// Moves by `de` over `[t, t + h]`, updating the clock from the bridge.
    fn step<R: Rng>(&mut self, t: f64, h: f64, de: f64, window: f64, rng: &mut R) {
        let (e0, e1) = (self.e, self.e + de);
        self.e = e1;
        if !self.active() {
            return;
        }
        if e0 < 0.0 {
            match bridge_touch(e0, e1, h, rng) {
                None => {
                    if self.clock + h >= window {
                        self.knocked_at = Some(t + window - self.clock);
                    }
                    self.clock += h;
                }
                Some(u) if self.clock + u >= window => {
                    self.knocked_at = Some(t + window - self.clock);
                }
                Some(u) => {
                    self.clock = if e1 < 0.0 {
                        bridge_touch(e1, 0.0, h - u, rng).unwrap_or(h - u)
                    } else {
                        0.0
                    };
                }
            }
        } else if e1 < 0.0 {
            self.clock = bridge_touch(e1, e0, h, rng).unwrap_or(h);
        } else {
            self.clock = 0.0;
        }
    }
}

fn step_size(walkers: &[Walker], dt: f64, window: f64, left: f64) -> f64 {
    let near = walkers
        .iter()
        .filter(|w| w.active())
        .map(|w| w.e.abs())
        .fold(f64::INFINITY, f64::min);
    if near.is_infinite() {
        return left;
    }
    (near / 3.0).powi(2).clamp(dt, 0.5 * window).min(left)
}

/// Runs a group of one path, or an antithetic pair sharing `±Z`, to `end`.
fn run_group<R: Rng>(
    n: &NormalizedParams,
    drift: f64,
    end: f64,
    dt: f64,
    walkers: &mut [Walker],
    stop_on_knock: bool,
    rng: &mut R,
) {
    let mut t = 0.0;
    while t < end {
        if stop_on_knock && walkers.iter().all(|w| !w.active()) {
            return;
        }
        let h = step_size(walkers, dt, n.window, end - t);
        let z: f64 = rng.sample(StandardNormal);
        let sh = h.sqrt();
        for (i, w) in walkers.iter_mut().enumerate() {
            let sign = if i == 0 { 1.0 } else { -1.0 };
            w.step(t, h, drift * h + sign * sh * z, n.window, rng);
        }
        t = if end - t - h <= 1e-14 * end { end } else { t + h };
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    units: f64,
    mean: f64,
    m2: f64,
    knocked: u64,
    paths: u64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.units += 1.0;
        let d = v - self.mean;
        self.mean += d / self.units;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        let units = self.units + o.units;
        if units == 0.0 {
            return self;
        }
        let d = o.mean - self.mean;
        Self {
            units,
            mean: self.mean + d * o.units / units,
            m2: self.m2 + o.m2 + d * d * self.units * o.units / units,
            knocked: self.knocked + o.knocked,
            paths: self.paths + o.paths,
        }
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.units > 1.0 { self.m2 / (self.units - 1.0) } else { 0.0 };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.units).sqrt(),
            knock_in_freq: self.knocked as f64 / self.paths as f64,
        }
    }
}

/// Sums `unit` over all groups. Chunk `k` draws from stream `k` of the seed,
/// and chunks are merged in index order, so threads do not change the result.
fn accumulate<F>(sc: &SimConfig, unit: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<Walker>) -> f64 + Sync,
{
    let units = sc.units();
    let chunks = units.div_ceil(UNITS_PER_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
            rng.set_stream(k);
            let mut walkers = Vec::with_capacity(2);
            let mut acc = Moments::default();
            let count = UNITS_PER_CHUNK.min(units - k * UNITS_PER_CHUNK);
            for _ in 0..count {
                walkers.clear();
                let v = unit(&mut rng, &mut walkers);
                acc.knocked += walkers.iter().filter(|w| !w.active()).count() as u64;
                acc.paths += walkers.len() as u64;
                acc.push(v);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

fn group_size(sc: &SimConfig) -> usize {
    if sc.antithetic {
        2
    } else {
        1
    }
}

/// Discounted Monte Carlo price of the down-and-in call.
pub fn simulate_price(m: &MarketParams, sc: &SimConfig) -> Result<McEstimate> {
    let n = match normalize(m) {
        Ok(n) => n,
        Err(Error::Degenerate(_)) => {
            return Err(invalid("elapsed_below", "the option is already knocked in"));
        }
        Err(e) => return Err(e),
    };
    sc.validate(m.window_d)?;
    let size = group_size(sc);
    let discount = (-m.rate_r * m.tau).exp();
    let moments = accumulate(sc, |rng, walkers| {
        walkers.extend(std::iter::repeat_n(Walker::new(&n), size));
        run_group(&n, n.varpi, m.tau, sc.dt, walkers, false, rng);
        let total: f64 = walkers
            .iter()
            .filter(|w| !w.active())
            .map(|w| (m.spot * (m.sigma * (w.e + n.b)).exp() - m.strike).max(0.0))
            .sum();
        discount * total / size as f64
    });
    Ok(moments.estimate())
}

/// Monte Carlo `E[e^{-zH}]` for the driftless excursion time `H`.
///
/// Paths still running at the horizon `max(20D, 50/z)` are scored at half the
/// bound `e^{-z·horizon}`, and that half-bound times their frequency is added
/// to the standard error.
pub fn simulate_excursion_transform(n: &NormalizedParams, z: f64, sc: &SimConfig) -> Result<McEstimate> {
    n.validate()?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z", format!("{z} must be real and positive")));
    }
    sc.validate(n.window)?;
    let size = group_size(sc);
    let horizon = (20.0 * n.window).max(50.0 / z);
    let tail = (-z * horizon).exp();
    let moments = accumulate(sc, |rng, walkers| {
        walkers.extend(std::iter::repeat_n(Walker::new(n), size));
        run_group(n, 0.0, horizon, sc.dt, walkers, true, rng);
        let total: f64 = walkers
            .iter()
            .map(|w| w.knocked_at.map_or(0.5 * tail, |h| (-z * h).exp()))
            .sum();
        total / size as f64
    });
    let mut est = moments.estimate();
    est.std_error += 0.5 * tail * (1.0 - est.knock_in_freq);
    Ok(est)
}
