//! The meander generating function
//!
//! ```text
//! Ψ(w) = ∫_0^∞ x exp(-x²/2 + w x) dx
//! ```
//!
//! Ψ is entire. Near the origin it is summed from its Taylor series. Further
//! out everything is reduced to `Ψ(-u)` with `Re u >= 0` through the identity
//! `Ψ(w) = Ψ(-w) + √(2π) w e^{w²/2}`; `Ψ(-u)` comes from the scaled
//! complementary error function at moderate `|u|` and from its asymptotic
//! expansion at large `|u|`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special_fn::{erfcx, ComplexValue, SQRT_2PI};
use crate::quad::{integrate_best, QuadratureConfig};

const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;

/// Largest order accepted by [`psi_asymptotic_neg`]; `(2N+1)!` stays finite.
pub const MAX_ASYMPTOTIC_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsiEvalConfig {
    /// Relative tail bound at which the Taylor series stops.
    pub series_tol: f64,
    /// `|w|` up to which [`psi`] uses the Taylor series.
    pub series_radius: f64,
    /// `|w|` from which [`psi`] uses the asymptotic expansion of `Ψ(-w)`.
    pub asym_radius: f64,
    /// Fixed asymptotic order; `None` picks the order adaptively.
    pub asym_order: Option<usize>,
    pub max_terms: usize,
}

impl Default for PsiEvalConfig {
    fn default() -> Self {
        Self {
            series_tol: 1e-14,
            series_radius: 2.0,
            asym_radius: 12.0,
            asym_order: None,
            max_terms: 200,
        }
    }
}

impl PsiEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tol > 0.0) {
            return Err(Error::Config("psi series_tol must be positive".into()));
        }
        if !(self.series_radius > 0.0) {
            return Err(Error::Config("psi series_radius must be positive".into()));
        }
        if !(self.asym_radius >= self.series_radius) {
            return Err(Error::Config("psi asym_radius must be at least series_radius".into()));
        }
        if let Some(n) = self.asym_order {
            if n == 0 || n > MAX_ASYMPTOTIC_ORDER {
                return Err(Error::Config(format!(
                    "psi asym_order must lie in 1..={MAX_ASYMPTOTIC_ORDER}"
                )));
            }
        }
        if self.max_terms < 4 {
            return Err(Error::Config("psi max_terms must be at least 4".into()));
        }
        Ok(())
    }
}

/// Taylor series `Σ a_n w^n`, `a_0 = 1`, `a_1 = √(π/2)`, `a_{n+2} = a_n/(n+1)`.
pub fn psi_series(w: ComplexValue, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let r2 = w.norm_sqr();
    let w2 = w * w;
    let mut even = Complex64::new(1.0, 0.0);
    let mut odd = w * SQRT_FRAC_PI_2;
    let mut sum = even + odd;
    let mut n = 0usize;
    while n + 3 < cfg.max_terms {
        even *= w2 / (n + 1) as f64;
        odd *= w2 / (n + 2) as f64;
        sum += even + odd;
        n += 2;
        // the next pair shrinks by at least rho; majorize the tail geometrically
        let rho = r2 / (n + 1) as f64;
        if rho < 0.5 {
            let tail = (even.norm() + odd.norm()) * rho / (1.0 - rho);
            if tail <= cfg.series_tol * sum.norm() || tail == 0.0 {
                return Ok(sum);
            }
        }
    }
    Err(Error::NonConvergence {
        what: "psi series",
        terms: cfg.max_terms,
    })
}

/// `2 (2N+1)!/N! |w|^{-2(N+1)}`.
pub fn asymptotic_remainder_bound(w_abs: f64, n: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (n + 1)..=(2 * n + 1) {
        ratio *= k as f64;
    }
    2.0 * ratio * w_abs.powi(-2 * (n as i32 + 1))
}

/// Partial sum `Σ_{k=1}^N (-1)^{k+1} (2k-1)!! w^{-2k}` of the expansion of
/// `Ψ(-w)`, together with the remainder bound `2 (2N+1)!/N! |w|^{-2(N+1)}`.
pub fn psi_asymptotic_neg(w: ComplexValue, n: usize) -> Result<(ComplexValue, f64)> {
    if !(w.re > 0.0) {
        return Err(domain("psi_asymptotic_neg", format!("Re w = {} must be positive", w.re)));
    }
    if n == 0 || n > MAX_ASYMPTOTIC_ORDER {
        return Err(domain(
            "psi_asymptotic_neg",
            format!("order {n} outside 1..={MAX_ASYMPTOTIC_ORDER}"),
        ));
    }
    let inv_w2 = (w * w).inv();
    let mut term = inv_w2;
    let mut sum = term;
    for k in 2..=n {
        term *= -((2 * k - 1) as f64) * inv_w2;
        sum += term;
    }
    Ok((sum, asymptotic_remainder_bound(w.norm(), n)))
}

/// Asymptotic order for `Ψ(-u)` at `|u|`: the smallest `N` (at most 20) whose
/// remainder bound is below `tol` relative to the leading term.
fn adaptive_order(u_abs: f64, tol: f64) -> usize {
    let lead = u_abs.powi(-2);
    (1..=MAX_ASYMPTOTIC_ORDER)
        .find(|&n| asymptotic_remainder_bound(u_abs, n) <= tol * lead)
        .unwrap_or(MAX_ASYMPTOTIC_ORDER)
}

/// `Ψ(-u)` for `Re u >= 0` outside the series disc.
fn psi_neg_half_plane(u: ComplexValue, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let r = u.norm();
    if r >= cfg.asym_radius && u.re > 0.0 {
        let n = cfg.asym_order.unwrap_or_else(|| adaptive_order(r, 1e-3 * cfg.series_tol));
        psi_asymptotic_neg(u, n).map(|(v, _)| v)
    } else {
        Ok(1.0 - SQRT_FRAC_PI_2 * u * erfcx(u * std::f64::consts::FRAC_1_SQRT_2))
    }
}

/// `Ψ(w)` as `(m, s)` with `Ψ(w) = m e^{s}` and `s >= 0`; `s > 0` only when the
/// exponential part `√(2π) w e^{w²/2}` would otherwise overflow or dominate.
pub fn psi_scaled(w: ComplexValue, cfg: &PsiEvalConfig) -> Result<(ComplexValue, f64)> {
    if !(w.re.is_finite() && w.im.is_finite()) {
        return Err(domain("psi", format!("non-finite argument {w}")));
    }
    if w.norm() <= cfg.series_radius {
        return psi_series(w, cfg).map(|v| (v, 0.0));
    }
    if w.re < 0.0 {
        return psi_neg_half_plane(-w, cfg).map(|v| (v, 0.0));
    }
    let reflected = psi_neg_half_plane(w, cfg)?;
    let half_w2 = 0.5 * w * w;
    let s = half_w2.re.max(0.0);
    let growth = SQRT_2PI * w * (half_w2 - s).exp();
    Ok((reflected * (-s).exp() + growth, s))
}

pub fn psi(w: ComplexValue, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let (m, s) = psi_scaled(w, cfg)?;
    Ok(if s == 0.0 { m } else { m * s.exp() })
}

fn sqrt_2dz(z: ComplexValue, big_d: f64) -> Result<ComplexValue> {
    if !(z.re > 0.0) {
        return Err(domain("psi_sqrt_2dz", format!("Re z = {} must be positive", z.re)));
    }
    if !(big_d > 0.0) {
        return Err(domain("psi_sqrt_2dz", format!("D = {big_d} must be positive")));
    }
    Ok((2.0 * big_d * z).sqrt())
}

/// `Ψ(√(2Dz))` on the principal branch, `Re z > 0`. Never zero there: its
/// reciprocal is the transform of a probability law.
pub fn psi_sqrt_2dz(z: ComplexValue, big_d: f64, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    psi(sqrt_2dz(z, big_d)?, cfg)
}

/// `1/Ψ(√(2Dz))`, computed without overflow for large `D |z|`.
pub fn recip_psi_sqrt_2dz(z: ComplexValue, big_d: f64, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let (m, s) = psi_scaled(sqrt_2dz(z, big_d)?, cfg)?;
    Ok(m.inv() * (-s).exp())
}

/// `e^{z t₀}/Ψ(√(2Dz))` with the exponentials combined before evaluation, so
/// shifts `t₀ <= D` stay bounded where the two factors separately would not.
pub fn shifted_recip_psi_sqrt_2dz(z: ComplexValue, big_d: f64, t0: f64, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let (m, s) = psi_scaled(sqrt_2dz(z, big_d)?, cfg)?;
    Ok(m.inv() * (z * t0 - s).exp())
}

/// Reference value of `Ψ(w)` by adaptive quadrature of the defining integral,
/// along a ray rotated off the real axis when `Re w < 0` so the integrand
/// does not oscillate. Slow; meant for checks.
pub fn psi_quadrature(w: ComplexValue, rel_tol: f64) -> ComplexValue {
    let cfg = QuadratureConfig {
        abs_tol: 1e-300,
        rel_tol,
        max_nodes: 400_000,
        tail_sigmas: 12.0,
    };
    let phi = if w.re < 0.0 {
        let target = if w.im >= 0.0 { std::f64::consts::PI } else { -std::f64::consts::PI };
        (target - w.arg()).clamp(-0.7, 0.7)
    } else {
        0.0
    };
    let rot = Complex64::from_polar(1.0, phi);
    let rot2 = rot * rot;
    let slope = w * rot;
    let peak = (slope.re / rot2.re).max(0.0);
    let upper = peak + 60.0;
    let q = integrate_best(
        |t: f64| t * (-0.5 * rot2 * t * t + slope * t).exp(),
        0.0,
        upper,
        &[peak],
        &cfg,
    );
    q.value * rot2
}
