//! Numerical Laplace inversion on the Bromwich line and the forward transform
//! used to check it.
//!
//! The default method discretizes the Bromwich integral with the trapezoidal
//! rule (step `π/t`), which turns it into an alternating series, and sums the
//! series with binomial Euler averaging. Fixed Talbot is offered for
//! transforms that are analytic left of the imaginary axis apart from a cut
//! along the negative real axis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{integrate_best, QuadratureConfig};
use crate::special_fn::ComplexValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMethod {
    EulerSummation,
    FixedTalbot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// Real part of the Bromwich line. `None` places it at
    /// `growth_rate + ln(100/target_tol)/(2t)`, which puts the aliasing error
    /// (with its safety factor of 10) an order below the target.
    pub abscissa_x0: Option<f64>,
    /// Exponential order of the time function: `|f(t)| <= C e^{growth_rate t}`.
    pub growth_rate: f64,
    /// Number of Euler-averaged partial sums.
    pub terms_m: usize,
    /// Partial sums taken before the averaging starts.
    pub burnin_terms: usize,
    /// Nodes on the Talbot contour.
    pub talbot_nodes: usize,
    /// Mixed tolerance: the error estimate must not exceed
    /// `target_tol * max(1, |value|)`.
    pub target_tol: f64,
    pub method: InversionMethod,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            abscissa_x0: None,
            growth_rate: 0.0,
            terms_m: 25,
            burnin_terms: 15,
            talbot_nodes: 32,
            target_tol: 1e-7,
            method: InversionMethod::EulerSummation,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(x0) = self.abscissa_x0 {
            if !(x0 > 0.0 && x0 > self.growth_rate) {
                return Err(Error::Config(format!(
                    "abscissa_x0 = {x0} must be positive and exceed growth_rate"
                )));
            }
        }
        if !self.growth_rate.is_finite() {
            return Err(Error::Config("growth_rate must be finite".into()));
        }
        for (name, n) in [
            ("terms_m", self.terms_m),
            ("burnin_terms", self.burnin_terms),
            ("talbot_nodes", self.talbot_nodes),
        ] {
            if !(5..=200).contains(&n) {
                return Err(Error::Config(format!("{name} = {n} outside [5, 200]")));
            }
        }
        if !(self.target_tol > 0.0 && self.target_tol < 1.0) {
            return Err(Error::Config("target_tol must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Bromwich abscissa used at time `t`.
    pub fn abscissa(&self, t: f64) -> f64 {
        self.abscissa_x0
            .unwrap_or_else(|| self.growth_rate.max(0.0) + (100.0 / self.target_tol).ln() / (2.0 * t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    pub err_estimate: f64,
    /// Part of `err_estimate` inherited from errors in the transform values.
    pub propagated_err: f64,
    pub evaluations: usize,
}

fn binomial_weights(m: usize) -> Vec<f64> {
    let mut w = vec![1.0; m + 1];
    for j in 1..=m {
        w[j] = w[j - 1] * (m + 1 - j) as f64 / j as f64;
    }
    let scale = 0.5f64.powi(m as i32);
    w.iter_mut().for_each(|x| *x *= scale);
    w
}

fn eval_nodes<F>(f: &F, nodes: &[ComplexValue]) -> Result<Vec<(ComplexValue, f64)>>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    nodes.par_iter().map(|&z| f(z)).collect()
}

fn euler<F>(f: &F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    let x0 = cfg.abscissa(t);
    let n = cfg.burnin_terms;
    let m = cfg.terms_m;
    let count = n + m + 3;
    let h = PI / t;
    let nodes: Vec<ComplexValue> = (0..count).map(|k| Complex64::new(x0, k as f64 * h)).collect();
    let values = eval_nodes(f, &nodes)?;

    let mut partial = Vec::with_capacity(count);
    let mut running = 0.0;
    for (k, (v, _)) in values.iter().enumerate() {
        let w = if k == 0 { 0.5 } else { 1.0 };
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        running += sign * w * v.re;
        partial.push(running);
    }
    let weights = binomial_weights(m);
    // term k enters every averaged partial sum from index max(k, n) on
    let mut tail = 1.0;
    let mut delta_sum = 0.0;
    for (k, (_, delta)) in values.iter().enumerate().take(n + m + 1) {
        if k > n {
            tail -= weights[k - n - 1];
        }
        let w = if k == 0 { 0.5 } else { 1.0 };
        delta_sum += w * tail.max(0.0) * delta;
    }
    let fewer = binomial_weights(m - 1);
    let averaged = |w: &[f64], start: usize| -> f64 { w.iter().zip(&partial[start..]).map(|(w, s)| w * s).sum() };
    let scale = (x0 * t).exp() / t;
    let e0 = averaged(&weights, n);
    let value = scale * e0;
    // a single difference can vanish by accident when the terms are not
    // alternating, so take the largest of three neighbouring comparisons
    let spread = [averaged(&weights, n + 1), averaged(&weights, n + 2), averaged(&fewer, n)]
        .iter()
        .map(|e| (e - e0).abs())
        .fold(0.0, f64::max);
    let acceleration = 10.0 * scale * spread;
    // aliasing from the periodic images at t(2j + 1), j >= 1; the factor 10
    // allows |f(3t)| e^{-2γt} to exceed |f(t)|
    let aliasing = 10.0 * (-2.0 * (x0 - cfg.growth_rate.max(0.0)) * t).exp() * value.abs().max(1.0);
    let propagated = scale * delta_sum;
    Ok(Inversion {
        value,
        err_estimate: acceleration + aliasing + propagated,
        propagated_err: propagated,
        evaluations: count,
    })
}

fn talbot<F>(f: &F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    let shift = cfg.growth_rate.max(0.0);
    let run = |m: usize| -> Result<(f64, f64)> {
        let r = 2.0 * m as f64 / (5.0 * t);
        let mut nodes = Vec::with_capacity(m);
        let mut jac = Vec::with_capacity(m);
        nodes.push(Complex64::new(r + shift, 0.0));
        jac.push(Complex64::new(0.5, 0.0));
        for k in 1..m {
            let theta = k as f64 * PI / m as f64;
            let cot = theta.cos() / theta.sin();
            let z = r * theta * Complex64::new(cot, 1.0);
            let sigma = theta + (theta * cot - 1.0) * cot;
            nodes.push(z + shift);
            jac.push(Complex64::new(1.0, sigma));
        }
        let values = eval_nodes(f, &nodes)?;
        let mut sum = 0.0;
        let mut delta = 0.0;
        for ((z, j), (v, d)) in nodes.iter().zip(&jac).zip(&values) {
            let e = ((z - shift) * t).exp();
            sum += (e * v * j).re;
            delta += (e * j).norm() * d;
        }
        let scale = r / m as f64 * (shift * t).exp();
        Ok((scale * sum, scale * delta))
    };
    let m = cfg.talbot_nodes;
    let (value, propagated) = run(m)?;
    let (coarse, _) = run((m * 3) / 4)?;
    let acceleration = 10.0 * (value - coarse).abs();
    Ok(Inversion {
        value,
        err_estimate: acceleration + propagated,
        propagated_err: propagated,
        evaluations: m + (m * 3) / 4,
    })
}

/// Invert a transform that reports an absolute error bound with each value;
/// returns the best estimate even when the tolerance is missed.
pub fn invert_best_with_error<F>(f: F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain("invert", format!("t = {t} must be positive")));
    }
    cfg.validate()?;
    match cfg.method {
        InversionMethod::EulerSummation => euler(&f, t, cfg),
        InversionMethod::FixedTalbot => talbot(&f, t, cfg),
    }
}

/// Like [`invert_best_with_error`] but fails with
/// [`Error::AccuracyNotReached`] when the target is missed.
pub fn invert_with_error<F>(f: F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    let inv = invert_best_with_error(f, t, cfg)?;
    if inv.err_estimate.is_finite() && inv.err_estimate <= cfg.target_tol * inv.value.abs().max(1.0) {
        Ok(inv)
    } else {
        Err(Error::AccuracyNotReached {
            value: inv.value,
            estimate: inv.err_estimate,
        })
    }
}

/// Term counts tried after the configured ones by [`invert_cross_checked`].
const ESCALATION: [(usize, usize); 4] = [(40, 40), (70, 70), (100, 100), (200, 200)];

/// Euler inversion with a second opinion: the term counts are raised along a
/// fixed ladder until two neighbouring levels both meet the target and agree
/// within their estimates. Partial sums can settle early on a wrong value when
/// `t` sits close to a singular point of the time function, and a single level
/// cannot see that. Talbot runs once.
pub fn invert_cross_checked<F>(f: F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<(ComplexValue, f64)> + Sync,
{
    if cfg.method == InversionMethod::FixedTalbot {
        return invert_with_error(f, t, cfg);
    }
    let mut levels = vec![(cfg.burnin_terms, cfg.terms_m)];
    for (b, m) in ESCALATION {
        let &(pb, pm) = levels.last().expect("nonempty");
        if b > pb || m > pm {
            levels.push((b.max(pb), m.max(pm)));
        }
    }
    if levels.len() == 1 {
        let (b, m) = levels[0];
        levels.push((b + b / 2, m + m / 2));
    }
    let meets = |inv: &Inversion| inv.err_estimate.is_finite() && inv.err_estimate <= cfg.target_tol * inv.value.abs().max(1.0);
    let mut previous: Option<Inversion> = None;
    let mut evaluations = 0;
    let mut last = None;
    for (burnin_terms, terms_m) in levels {
        let level = InversionConfig {
            burnin_terms,
            terms_m,
            ..*cfg
        };
        let inv = invert_best_with_error(&f, t, &level)?;
        evaluations += inv.evaluations;
        if meets(&inv) {
            if let Some(prev) = previous {
                let gap = (inv.value - prev.value).abs();
                if gap <= inv.err_estimate + prev.err_estimate {
                    return Ok(Inversion {
                        err_estimate: inv.err_estimate.max(gap),
                        evaluations,
                        ..inv
                    });
                }
            }
            previous = Some(inv);
        } else {
            previous = None;
        }
        last = Some(inv);
    }
    let last = last.expect("at least one level");
    Err(Error::AccuracyNotReached {
        value: last.value,
        estimate: last.err_estimate,
    })
}

/// Inverse Laplace transform of `f` at `t`.
pub fn invert<F>(f: F, t: f64, cfg: &InversionConfig) -> Result<Inversion>
where
    F: Fn(ComplexValue) -> Result<ComplexValue> + Sync,
{
    invert_with_error(|z| f(z).map(|v| (v, 0.0)), t, cfg)
}

/// `∫_0^∞ e^{-zt} f(t) dt` for `f` of exponential order `growth` (`Re z > growth`).
///
/// Integrates in `s = √t`, which absorbs `t^{-1/2}` behaviour at the origin;
/// `breaks` are points in `t` where `f` jumps or kinks. The range is cut where
/// `e^{-(Re z - growth) t}` drops below the absolute tolerance.
pub fn forward_transform<F>(
    f: F,
    z: ComplexValue,
    growth: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ComplexValue>
where
    F: Fn(f64) -> f64,
{
    let margin = z.re - growth;
    if !(margin > 0.0) {
        return Err(domain(
            "forward_transform",
            format!("Re z = {} not beyond growth rate {growth}", z.re),
        ));
    }
    let horizon = ((1.0 / cfg.abs_tol).ln() + 5.0) / margin;
    let s_max = horizon.sqrt();
    let mut s_breaks: Vec<f64> = breaks.iter().filter(|&&b| b > 0.0).map(|b| b.sqrt()).collect();
    // a few fixed splits help the oscillatory factor at large Im z
    let pieces = ((z.im.abs() * horizon) / (4.0 * PI)).ceil().clamp(1.0, 256.0) as usize;
    s_breaks.extend((1..pieces).map(|k| s_max * (k as f64 / pieces as f64).sqrt()));
    let q = integrate_best(
        |s: f64| {
            let t = s * s;
            (-z * t).exp() * (2.0 * s * f(t))
        },
        0.0,
        s_max,
        &s_breaks,
        cfg,
    );
    if !q.converged {
        return Err(Error::NonConvergence {
            what: "forward Laplace transform",
            terms: q.evaluations,
        });
    }
    Ok(q.value)
}
