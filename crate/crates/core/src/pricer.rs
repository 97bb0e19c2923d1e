//! Parisian down-and-in call prices from the Laplace transform of the
//! knock-in density, and the down-and-out call by in-out parity.
//!
//! With `c₁ = ϖ + σ` and `c₂ = ϖ`, the valuation identity reads
//!
//! ```text
//! C = e^{-(r + ϖ²/2) τ} ∫_β^∞ e^{ϖy} (S e^{σy} - K) h_b(τ, y) dy.
//! ```
//!
//! The `y`-integral is taken inside the transform, where it is elementary:
//! `∫_β^∞ e^{cy} e^{-|x-y|q}/q dy` has a closed form `G_c(x)`. What remains is
//! one integral of `S G_{c₁} - K G_{c₂}` against the position law of the
//! knock-in point, evaluated by quadrature for each Bromwich node.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density_transform::{
    density_transform, integrate_meander, shifted_restart_factor, sqrt_2z, Approx, NormalizedParams, TransformConfig,
};
use crate::error::{invalid, Error, Result};
use crate::inversion::{invert_best_with_error, invert_cross_checked, invert_with_error, Inversion, InversionConfig, InversionMethod};
use crate::quad::{integrate_best, integrate_with_breaks, QuadratureConfig};
use crate::special_fn::{erfc_real, norm_cdf, ComplexValue};

/// Contract and market inputs. Rates and volatility are annualized, times in
/// years, prices in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub spot: f64,
    pub strike: f64,
    pub barrier: f64,
    pub rate_r: f64,
    #[serde(default)]
    pub dividend_delta: f64,
    pub sigma: f64,
    pub tau: f64,
    pub window_d: f64,
    /// Time already spent in the current stay below the barrier.
    #[serde(default)]
    pub elapsed_below: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spot", self.spot),
            ("strike", self.strike),
            ("barrier", self.barrier),
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("window_d", self.window_d),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("{v} must be positive and finite")));
            }
        }
        for (field, v) in [("rate_r", self.rate_r), ("dividend_delta", self.dividend_delta)] {
            if !v.is_finite() {
                return Err(invalid(field, format!("{v} must be finite")));
            }
        }
        if !(self.elapsed_below >= 0.0 && self.elapsed_below.is_finite()) {
            return Err(invalid("elapsed_below", format!("{} must be non-negative", self.elapsed_below)));
        }
        if self.spot >= self.barrier {
            if self.elapsed_below != 0.0 {
                return Err(invalid(
                    "elapsed_below",
                    "must be 0 when the spot is at or above the barrier",
                ));
            }
        } else if self.elapsed_below >= self.window_d {
            return Err(Error::Degenerate(format!(
                "elapsed_below = {} has reached window_d = {}: the option is already knocked in",
                self.elapsed_below, self.window_d
            )));
        }
        Ok(())
    }
}

/// Reduced coordinates of `m`.
pub fn normalize(m: &MarketParams) -> Result<NormalizedParams> {
    m.validate()?;
    let b = (m.barrier / m.spot).ln() / m.sigma;
    let n = NormalizedParams {
        b,
        varpi: (m.rate_r - m.dividend_delta - 0.5 * m.sigma * m.sigma) / m.sigma,
        beta: (m.strike / m.spot).ln() / m.sigma,
        window: m.window_d,
        remaining: if m.spot < m.barrier {
            m.window_d - m.elapsed_below
        } else {
            m.window_d
        },
        tau: m.tau,
    };
    n.validate()?;
    Ok(n)
}

/// Everything the pricer needs to know about the payoff besides the
/// normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallPayoff {
    pub spot: f64,
    pub strike: f64,
    pub sigma: f64,
}

impl From<&MarketParams> for CallPayoff {
    fn from(m: &MarketParams) -> Self {
        Self {
            spot: m.spot,
            strike: m.strike,
            sigma: m.sigma,
        }
    }
}

/// Tolerances for the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub transform: TransformConfig,
    pub inversion: InversionConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        // Bromwich nodes amplify transform errors by about e^{A/2}/t ≈ 1e4
        // (more when the remaining time is short), and far nodes carry small
        // transform values, so the inner quadratures are controlled by a
        // tight relative tolerance with a near-zero absolute one
        Self {
            transform: TransformConfig {
                quadrature: QuadratureConfig {
                    abs_tol: 1e-17,
                    rel_tol: 1e-13,
                    ..Default::default()
                },
                ..Default::default()
            },
            inversion: InversionConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.transform.quadrature.validate()?;
        self.transform.psi.validate()?;
        self.inversion.validate()?;
        if self.inversion.method != InversionMethod::EulerSummation {
            return Err(Error::Config(
                "prices need Euler summation: the pricing transforms are only defined for Re z > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingResult {
    pub price: f64,
    pub err_estimate: f64,
    /// Error contribution per stage: `inversion`, `payoff_quadrature`,
    /// `density_quadrature`.
    pub diagnostics: BTreeMap<String, f64>,
}

impl PricingResult {
    fn exact(price: f64) -> Self {
        Self {
            price,
            err_estimate: 0.0,
            diagnostics: stage_map(0.0, 0.0),
        }
    }
}

fn stage_map(inversion: f64, density: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("inversion".to_string(), inversion),
        // the strike integral is done in closed form inside the transform
        ("payoff_quadrature".to_string(), 0.0),
        ("density_quadrature".to_string(), density),
    ])
}

/// `∫_β^∞ e^{cy} e^{-|x-y|q}/q dy` (needs `Re q > |c|`).
fn g_kernel(c: f64, beta: f64, x: f64, q: ComplexValue) -> ComplexValue {
    let ecb = (c * beta).exp();
    if x <= beta {
        ecb * (-(beta - x) * q).exp() / (q * (q - c))
    } else {
        let ecx = (c * x).exp();
        (ecx - ecb * (-(x - beta) * q).exp()) / (q * (q + c)) + ecx / (q * (q - c))
    }
}

/// Bound on `|G_c(x)|` for `x <= top`.
fn g_bound(c: f64, beta: f64, top: f64, q: ComplexValue) -> f64 {
    (c * beta).exp().max((c * top).exp()) * (2.0 / (q * (q + c)).norm() + 1.0 / (q * (q - c)).norm())
}

/// Exponential order of the time function behind the price transform.
pub fn growth_rate(n: &NormalizedParams, sigma: f64) -> f64 {
    let c1 = n.varpi + sigma;
    let c2 = n.varpi;
    0.5 * c1.abs().max(c2.abs()).powi(2)
}

/// Which part of the knock-in law a transform covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    /// Knock-in after a return to the barrier; never before `D`.
    Restart,
    /// Knock-in at the end of the running clock without a touch; only for `b > 0`.
    Survive,
    Both,
}

/// Transform of `∑ w ∫_β^∞ e^{c y} h_b(·, y) dy` over the `(c, w)` in `terms`,
/// restricted to `piece` and multiplied by `e^{z t₀}`: the transform of the
/// time function shifted left by `t₀`, which must not exceed the onset of
/// the piece.
fn weighted_transform(
    n: &NormalizedParams,
    terms: &[(f64, f64)],
    z: ComplexValue,
    t0: f64,
    piece: Piece,
    cfg: &TransformConfig,
) -> Result<Approx> {
    let q = sqrt_2z("price_transform", z)?;
    for &(c, _) in terms {
        if !(q.re > c.abs()) {
            return Err(crate::error::domain(
                "price_transform",
                format!("Re √(2z) = {} must exceed |c| = {}", q.re, c.abs()),
            ));
        }
    }
    let g = |x: f64| -> ComplexValue {
        terms
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &(c, w)| acc + w * g_kernel(c, n.beta, x, q))
    };
    let top = n.b.max(n.beta);
    let bound: f64 = terms.iter().map(|&(c, w)| w.abs() * g_bound(c, n.beta, top, q)).sum();
    let qcfg = &cfg.quadrature;
    let mut total = Approx {
        value: Complex64::new(0.0, 0.0),
        abs_err: 0.0,
    };

    if piece != Piece::Survive {
        // after a restart at the barrier the knock-in point is b - x, x meander-distributed
        let restart = shifted_restart_factor(n, z, t0, cfg)?;
        let meander = integrate_meander(n.window, n.b - n.beta, bound, |x| g(n.b - x), qcfg)?;
        total = meander.scale(restart);
    }

    if n.b > 0.0 && piece != Piece::Restart {
        // no touch during the remaining clock: knock-in at d at a sub-barrier Gaussian point
        let d = n.remaining;
        let width = qcfg.tail_sigmas * d.sqrt();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * d).sqrt();
        let inv2d = 0.5 / d;
        let two_b = 2.0 * n.b;
        let quad = integrate_with_breaks(
            |x: f64| {
                let f = norm * ((-x * x * inv2d).exp() - (-(x - two_b) * (x - two_b) * inv2d).exp());
                g(x) * f
            },
            -width,
            n.b,
            &[n.beta, 0.0],
            qcfg,
        )?;
        let tail = bound * erfc_real(qcfg.tail_sigmas * std::f64::consts::FRAC_1_SQRT_2);
        let survive = Approx {
            value: quad.value,
            abs_err: quad.abs_err + tail,
        }
        .scale((-z * (d - t0)).exp());
        total = total.add(survive);
    }
    Ok(total)
}

/// `∫_β^∞ e^{ϖy} (S e^{σy} - K) L(h_b(·, y))(z) dy`.
pub fn price_transform(n: &NormalizedParams, payoff: &CallPayoff, z: ComplexValue, cfg: &TransformConfig) -> Result<Approx> {
    weighted_transform(
        n,
        &[(n.varpi + payoff.sigma, payoff.spot), (n.varpi, -payoff.strike)],
        z,
        0.0,
        Piece::Both,
        cfg,
    )
}

/// The two pieces `T₁ = ∫_β^∞ e^{(ϖ+σ)y} L(h_b) dy` and `T₂ = ∫_β^∞ e^{ϖy} L(h_b) dy`
/// of [`price_transform`] `= S T₁ - K T₂`.
pub fn price_transform_split(
    n: &NormalizedParams,
    sigma: f64,
    z: ComplexValue,
    cfg: &TransformConfig,
) -> Result<(Approx, Approx)> {
    let t1 = weighted_transform(n, &[(n.varpi + sigma, 1.0)], z, 0.0, Piece::Both, cfg)?;
    let t2 = weighted_transform(n, &[(n.varpi, 1.0)], z, 0.0, Piece::Both, cfg)?;
    Ok((t1, t2))
}

/// [`price_transform`] by direct quadrature over `y` of the density transform.
/// Much slower; kept as an independent check of the closed-form `y`-integral.
pub fn price_transform_by_density(
    n: &NormalizedParams,
    payoff: &CallPayoff,
    z: ComplexValue,
    cfg: &TransformConfig,
) -> Result<Approx> {
    let q = sqrt_2z("price_transform_by_density", z)?;
    let c1 = n.varpi + payoff.sigma;
    let decay = q.re - c1.abs().max(n.varpi.abs());
    if !(decay > 0.0) {
        return Err(crate::error::domain("price_transform_by_density", "Re √(2z) too small"));
    }
    // for y >= b, |L(h_b(·, y))| <= e^{-(y-b) Re q}/|q|
    let start = n.beta.max(n.b);
    let scale = payoff.spot * (c1 * start).exp().max(1.0) + payoff.strike;
    let cut = ((scale / (cfg.quadrature.abs_tol * q.norm() * decay)).ln() / decay).max(0.0);
    let upper = start + cut;
    let lower = n.beta;
    let integrand = |y: f64| -> Result<(ComplexValue, f64)> {
        let weight = (n.varpi * y).exp() * (payoff.spot * (payoff.sigma * y).exp() - payoff.strike);
        let a = density_transform(n, y, z, cfg)?;
        Ok((a.value * weight, a.abs_err * weight.abs()))
    };
    let mut failure = None;
    let mut inner_err = 0.0;
    let quad = integrate_best(
        |y: f64| match integrand(y) {
            Ok((v, e)) => {
                inner_err = f64::max(inner_err, e);
                v
            }
            Err(err) => {
                failure.get_or_insert(err);
                Complex64::new(0.0, 0.0)
            }
        },
        lower,
        upper,
        &[n.b, n.b - 1.0, n.b + 1.0],
        &cfg.quadrature,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(Approx {
        value: quad.value,
        abs_err: quad.abs_err + inner_err * (upper - lower) + cfg.quadrature.abs_tol,
    })
}

fn discount(m: &MarketParams, n: &NormalizedParams) -> f64 {
    (-(m.rate_r + 0.5 * n.varpi * n.varpi) * m.tau).exp()
}

fn inversion_config(n: &NormalizedParams, sigma: f64, cfg: &EngineConfig) -> InversionConfig {
    InversionConfig {
        growth_rate: cfg.inversion.growth_rate.max(growth_rate(n, sigma)),
        ..cfg.inversion
    }
}

fn result_from(inv: Inversion, disc: f64) -> PricingResult {
    let price = disc * inv.value;
    let err = disc * inv.err_estimate;
    let density = disc * inv.propagated_err;
    PricingResult {
        price,
        err_estimate: err,
        diagnostics: stage_map(err - density, density),
    }
}

/// True when knock-in before expiry is impossible: every path needs at least
/// the knock-in floor (`D` from above the barrier, `d` from below).
fn cannot_knock_in(n: &NormalizedParams) -> bool {
    n.knock_in_floor() >= n.tau
}

/// Price of the Parisian down-and-in call.
pub fn price_down_in_call(m: &MarketParams, cfg: &EngineConfig) -> Result<PricingResult> {
    cfg.validate()?;
    let n = normalize(m)?;
    if cannot_knock_in(&n) {
        return Ok(PricingResult::exact(0.0));
    }
    // each piece is inverted shifted by its onset, so that neither onset
    // sits inside the inversion interval
    let terms = [(n.varpi + m.sigma, m.spot), (n.varpi, -m.strike)];
    let icfg = inversion_config(&n, m.sigma, cfg);
    let disc = discount(m, &n);
    let pieces = if n.b > 0.0 && n.remaining < n.window {
        vec![(Piece::Survive, n.remaining), (Piece::Restart, n.window)]
    } else {
        vec![(Piece::Both, n.knock_in_floor())]
    };
    let mut inv = Inversion {
        value: 0.0,
        err_estimate: 0.0,
        propagated_err: 0.0,
        evaluations: 0,
    };
    for (piece, t0) in pieces {
        if t0 >= m.tau {
            continue;
        }
        let part = invert_cross_checked(
            |z| weighted_transform(&n, &terms, z, t0, piece, &cfg.transform).map(|a| (a.value, a.abs_err)),
            m.tau - t0,
            &icfg,
        )
        .map_err(|e| match e {
            Error::AccuracyNotReached { value, estimate } => Error::AccuracyNotReached {
                value: disc * (inv.value + value),
                estimate: disc * (inv.err_estimate + estimate),
            },
            other => other,
        })?;
        inv.value += part.value;
        inv.err_estimate += part.err_estimate;
        inv.propagated_err += part.propagated_err;
        inv.evaluations += part.evaluations;
    }
    Ok(result_from(inv, disc))
}

/// Same price with the density inverted separately at each node of the
/// payoff integral. Orders of magnitude slower; used to check that taking
/// the payoff integral inside the transform changes nothing.
pub fn price_down_in_call_per_node(m: &MarketParams, cfg: &EngineConfig) -> Result<PricingResult> {
    cfg.validate()?;
    let n = normalize(m)?;
    if cannot_knock_in(&n) {
        return Ok(PricingResult::exact(0.0));
    }
    let payoff = CallPayoff::from(m);
    let icfg = inversion_config(&n, m.sigma, cfg);
    // h_b(τ, ·) has Gaussian tails of variance about τ around b
    let spread = (m.tau + n.window).sqrt();
    let c1 = n.varpi + m.sigma;
    let centre = n.b.min(0.0) + c1 * m.tau;
    let upper = n.beta.max(centre) + cfg.transform.quadrature.tail_sigmas * spread;
    let mut failure = None;
    let mut inv_err = 0.0;
    let mut prop_err = 0.0;
    let qcfg = QuadratureConfig {
        abs_tol: cfg.inversion.target_tol,
        rel_tol: cfg.inversion.target_tol,
        ..cfg.transform.quadrature
    };
    let quad = integrate_best(
        |y: f64| {
            let density = invert_best_with_error(
                |z| density_transform(&n, y, z, &cfg.transform).map(|a| (a.value, a.abs_err)),
                m.tau,
                &icfg,
            );
            match density {
                Ok(inv) => {
                    let weight = (n.varpi * y).exp() * (payoff.spot * (payoff.sigma * y).exp() - payoff.strike);
                    inv_err = f64::max(inv_err, inv.err_estimate * weight.abs());
                    prop_err = f64::max(prop_err, inv.propagated_err * weight.abs());
                    weight * inv.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        n.beta,
        upper,
        &[n.b, centre],
        &qcfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let disc = discount(m, &n);
    let span = upper - n.beta;
    let density = disc * prop_err * span;
    let inversion = disc * (inv_err * span - prop_err * span);
    let payoff_err = disc * quad.abs_err;
    let mut diagnostics = stage_map(inversion, density);
    diagnostics.insert("payoff_quadrature".into(), payoff_err);
    Ok(PricingResult {
        price: disc * quad.value,
        err_estimate: inversion + density + payoff_err,
        diagnostics,
    })
}

/// Down-and-out call as vanilla minus down-and-in under the same clock.
pub fn price_down_out_call(m: &MarketParams, cfg: &EngineConfig) -> Result<PricingResult> {
    let din = price_down_in_call(m, cfg)?;
    Ok(PricingResult {
        price: black_scholes_call(m) - din.price,
        ..din
    })
}

/// Vanilla European call with continuous dividend yield.
pub fn black_scholes_call(m: &MarketParams) -> f64 {
    let df_r = (-m.rate_r * m.tau).exp();
    let df_q = (-m.dividend_delta * m.tau).exp();
    let vol = m.sigma * m.tau.sqrt();
    if vol < 1e-12 {
        return (m.spot * df_q - m.strike * df_r).max(0.0);
    }
    let d1 = ((m.spot / m.strike).ln() + (m.rate_r - m.dividend_delta) * m.tau) / vol + 0.5 * vol;
    let d2 = d1 - vol;
    m.spot * df_q * norm_cdf(d1) - m.strike * df_r * norm_cdf(d2)
}

/// Vanilla call from the free Gaussian kernel, `S G_{c₁}(0) - K G_{c₂}(0)`,
/// inverted by the same Bromwich engine as the barrier prices. A check on
/// [`black_scholes_call`] that shares the kernel and the discounting with the
/// down-and-in route.
pub fn vanilla_call_by_transform(m: &MarketParams, cfg: &EngineConfig) -> Result<PricingResult> {
    cfg.validate()?;
    let free = MarketParams {
        barrier: m.spot,
        elapsed_below: 0.0,
        ..*m
    };
    let n = normalize(&free)?;
    let icfg = inversion_config(&n, m.sigma, cfg);
    let c1 = n.varpi + m.sigma;
    let c2 = n.varpi;
    let inv = invert_with_error(
        |z| {
            let q = sqrt_2z("vanilla_call_by_transform", z)?;
            let v = m.spot * g_kernel(c1, n.beta, 0.0, q) - m.strike * g_kernel(c2, n.beta, 0.0, q);
            Ok((v, 0.0))
        },
        m.tau,
        &icfg,
    )?;
    Ok(result_from(inv, discount(m, &n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn desk() -> MarketParams {
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

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&MarketParams { barrier: 100.0, ..desk() }).unwrap();
        assert_eq!(n.b, 0.0);
        assert_eq!(n.beta, 0.0);
        let n = normalize(&desk()).unwrap();
        assert!((n.b - 5.0 * 0.95f64.ln()).abs() < 1e-15);
        assert!((n.b + 0.25646).abs() < 1e-5);
        assert!((n.varpi - 0.15).abs() < 1e-15);
        let below = MarketParams {
            spot: 90.0,
            elapsed_below: 0.04,
            ..desk()
        };
        assert!((normalize(&below).unwrap().remaining - 0.06).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            normalize(&MarketParams { sigma: -0.2, ..desk() }),
            Err(Error::InvalidParameter { field: "sigma", .. })
        ));
        assert!(matches!(
            normalize(&MarketParams { elapsed_below: 0.01, ..desk() }),
            Err(Error::InvalidParameter { field: "elapsed_below", .. })
        ));
        let knocked = MarketParams {
            spot: 90.0,
            elapsed_below: 0.1,
            ..desk()
        };
        assert!(matches!(normalize(&knocked), Err(Error::Degenerate(_))));
        let talbot = EngineConfig {
            inversion: InversionConfig {
                method: InversionMethod::FixedTalbot,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(price_down_in_call(&desk(), &talbot).is_err());
    }

    #[test]
    fn g_kernel_matches_quadrature() {
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_nodes: 20_000,
            tail_sigmas: 12.0,
        };
        let q = (2.0 * c(3.0, 4.0)).sqrt();
        for (cc, beta, x) in [(0.35, 0.2, -0.1), (0.35, 0.2, 0.6), (-0.4, -0.3, 0.5), (0.15, 1.0, 1.0)] {
            let direct = integrate_with_breaks(
                |y: f64| (cc * y).exp() * (-(x - y).abs() * q).exp() / q,
                beta,
                beta + 60.0,
                &[x],
                &cfg,
            )
            .unwrap();
            let closed = g_kernel(cc, beta, x, q);
            assert!((direct.value - closed).norm() < 1e-12, "c = {cc}, x = {x}");
            assert!(closed.norm() <= g_bound(cc, beta, x.max(beta), q));
        }
    }

    #[test]
    fn split_equals_assembled() {
        let cfg = EngineConfig::default().transform;
        for m in [desk(), MarketParams { spot: 93.0, elapsed_below: 0.02, ..desk() }] {
            let n = normalize(&m).unwrap();
            let payoff = CallPayoff::from(&m);
            let z = c(9.0, 30.0);
            let whole = price_transform(&n, &payoff, z, &cfg).unwrap().value;
            let (t1, t2) = price_transform_split(&n, m.sigma, z, &cfg).unwrap();
            let parts = m.spot * t1.value - m.strike * t2.value;
            assert!((whole - parts).norm() <= 1e-12 * whole.norm());
        }
    }

    #[test]
    fn transform_vanishes_for_remote_strikes() {
        let cfg = EngineConfig::default().transform;
        let m = MarketParams { strike: 1e6, ..desk() };
        let n = normalize(&m).unwrap();
        let v = price_transform(&n, &CallPayoff::from(&m), c(9.0, 0.0), &cfg).unwrap().value;
        assert!(v.norm() < 1e-20);
    }

    #[test]
    fn closed_y_integral_matches_density_quadrature() {
        let cfg = TransformConfig {
            quadrature: QuadratureConfig {
                abs_tol: 1e-12,
                rel_tol: 1e-11,
                max_nodes: 20_000,
                tail_sigmas: 12.0,
            },
            ..Default::default()
        };
        for m in [desk(), MarketParams { spot: 93.0, elapsed_below: 0.02, ..desk() }] {
            let n = normalize(&m).unwrap();
            let payoff = CallPayoff::from(&m);
            for z in [c(9.0, 0.0), c(9.0, 25.0)] {
                let fast = price_transform(&n, &payoff, z, &cfg).unwrap();
                let slow = price_transform_by_density(&n, &payoff, z, &cfg).unwrap();
                assert!((fast.value - slow.value).norm() < 1e-8 * fast.value.norm(), "{z}: {} vs {}", fast.value, slow.value);
            }
        }
    }

    #[test]
    fn transform_self_convergence() {
        let m = desk();
        let n = normalize(&m).unwrap();
        let payoff = CallPayoff::from(&m);
        let z = c(9.2, 12.0);
        let base = EngineConfig::default().transform;
        let fine = TransformConfig {
            quadrature: QuadratureConfig {
                abs_tol: 1e-15,
                rel_tol: 1e-14,
                max_nodes: 50_000,
                tail_sigmas: 14.0,
            },
            ..base
        };
        let a = price_transform(&n, &payoff, z, &base).unwrap().value;
        let b = price_transform(&n, &payoff, z, &fine).unwrap().value;
        assert!((a - b).norm() < 1e-8 * b.norm());
    }

    #[test]
    fn worthless_when_the_window_exceeds_maturity() {
        let m = MarketParams { window_d: 1.5, ..desk() };
        let r = price_down_in_call(&m, &EngineConfig::default()).unwrap();
        assert_eq!(r.price, 0.0);
        assert_eq!(r.err_estimate, 0.0);
        let out = price_down_out_call(&m, &EngineConfig::default()).unwrap();
        assert_eq!(out.price, black_scholes_call(&m));
    }

    #[test]
    fn vanilla_by_transform_matches_black_scholes() {
        let cfg = EngineConfig::default();
        for m in [desk(), MarketParams { strike: 80.0, tau: 0.25, ..desk() }, MarketParams { dividend_delta: 0.03, sigma: 0.45, tau: 3.0, ..desk() }] {
            let v = vanilla_call_by_transform(&m, &cfg).unwrap();
            let bs = black_scholes_call(&m);
            assert!((v.price - bs).abs() < 1e-6 * bs, "{} vs {bs}", v.price);
            assert!((v.price - bs).abs() <= v.err_estimate.max(1e-12));
        }
    }

    #[test]
    fn black_scholes_examples() {
        let flat = MarketParams {
            spot: 100.0,
            strike: 100.0,
            rate_r: 0.0,
            dividend_delta: 0.0,
            sigma: 0.2,
            tau: 1.0,
            ..desk()
        };
        assert!((black_scholes_call(&flat) - 100.0 * (2.0 * norm_cdf(0.1) - 1.0)).abs() < 1e-12);
        assert!((black_scholes_call(&flat) / 100.0 - 0.0797).abs() < 1e-4);
        let det = MarketParams { sigma: 1e-14, ..desk() };
        assert!((black_scholes_call(&det) - (100.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-12);
        let deep = MarketParams {
            strike: 1.0,
            dividend_delta: 0.03,
            ..desk()
        };
        let expect = 100.0 * (-0.03f64).exp() - (-0.05f64).exp();
        assert!((black_scholes_call(&deep) - expect).abs() < 1e-10);
    }

    #[test]
    fn black_scholes_against_gaussian_quadrature() {
        let m = MarketParams {
            dividend_delta: 0.02,
            ..desk()
        };
        let vol = m.sigma * m.tau.sqrt();
        let drift = (m.rate_r - m.dividend_delta - 0.5 * m.sigma * m.sigma) * m.tau;
        let cfg = QuadratureConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let kink = ((m.strike / m.spot).ln() - drift) / vol;
        let v = integrate_with_breaks(
            |g: f64| {
                let s = m.spot * (drift + vol * g).exp();
                (s - m.strike).max(0.0) * (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()
            },
            -12.0,
            12.0,
            &[kink],
            &cfg,
        )
        .unwrap();
        let diff = black_scholes_call(&m) - (-m.rate_r * m.tau).exp() * v.value;
        assert!(diff.abs() < 1e-10, "{diff:e}");
    }
}
