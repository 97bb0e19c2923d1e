//! Laplace transforms in time of the knock-in density `h_b(u, y)`.
//!
//! Coordinates are the normalized ones: the driftless log-price `W` starts at
//! 0, the barrier sits at `b`, and `H` is the time at which `W` completes a
//! stay of length `D` below `b` (for `b > 0` the current stay needs only `d`
//! more). With `q = √(2z)`,
//!
//! ```text
//! L(h_b(·, y))(z) = E[e^{-zH} e^{-|W_H - y| q} / q].
//! ```
//!
//! Whenever `H` comes from a fresh stay that started at the barrier, `b - W_H`
//! has the meander-endpoint law `(x/D) e^{-x²/(2D)} dx` independently of `H`,
//! and `E[e^{-zH}] = e^{bq}/Ψ(√(2Dz))` for `b <= 0`. For `b > 0` the path
//! either stays below `b` for the remaining `d` (then `H = d`) or hits `b`
//! first and restarts there.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::psi::{recip_psi_sqrt_2dz, shifted_recip_psi_sqrt_2dz, PsiEvalConfig};
use crate::quad::{integrate_best, integrate_with_breaks, QuadratureConfig};
use crate::special_fn::{erf_real, erfc_real, erfcx, norm_cdf, ComplexValue, SQRT_2PI};

/// Reduced coordinates of a contract, in units of `σ` for log-prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    /// `log(L/S)/σ`.
    pub b: f64,
    /// `(r - δ - σ²/2)/σ`.
    pub varpi: f64,
    /// `log(K/S)/σ`.
    pub beta: f64,
    /// Required stay below the barrier `D` (years).
    pub window: f64,
    /// Remaining clock `d` of the stay in progress (years); used when `b > 0`.
    pub remaining: f64,
    pub tau: f64,
}

impl NormalizedParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("b", self.b), ("varpi", self.varpi), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(invalid(field, format!("{v} is not finite")));
            }
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(invalid("window", format!("D = {} must be positive", self.window)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("{} must be positive", self.tau)));
        }
        // d = D is a stay that starts right now
        if self.b > 0.0 && !(self.remaining > 0.0 && self.remaining <= self.window) {
            return Err(invalid(
                "remaining",
                format!("d = {} must lie in (0, D] when b > 0", self.remaining),
            ));
        }
        Ok(())
    }

    /// Earliest possible knock-in time: `D` from above the barrier, `d` below.
    pub fn knock_in_floor(&self) -> f64 {
        if self.b > 0.0 {
            self.remaining
        } else {
            self.window
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub quadrature: QuadratureConfig,
    pub psi: PsiEvalConfig,
}

/// A complex value with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approx {
    pub value: ComplexValue,
    pub abs_err: f64,
}

impl Approx {
    pub fn exact(value: ComplexValue) -> Self {
        Self { value, abs_err: 0.0 }
    }

    pub fn scale(self, k: ComplexValue) -> Self {
        Self {
            value: self.value * k,
            abs_err: self.abs_err * k.norm(),
        }
    }

    pub fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            abs_err: self.abs_err + other.abs_err,
        }
    }

    pub fn mul(self, other: Self) -> Self {
        Self {
            value: self.value * other.value,
            abs_err: self.abs_err * other.value.norm() + other.abs_err * self.value.norm() + self.abs_err * other.abs_err,
        }
    }
}

/// `√(2z)` on the principal branch, rejecting `Re z <= 0`.
pub(crate) fn sqrt_2z(function: &'static str, z: ComplexValue) -> Result<ComplexValue> {
    if !(z.re > 0.0) || !z.im.is_finite() {
        return Err(domain(function, format!("Re z = {} must be positive", z.re)));
    }
    Ok((2.0 * z).sqrt())
}

/// `∫_0^∞ x exp(-x²/(2D) - |b - x - y| √(2z)) dx`.
///
/// `|integrand| <= x e^{-x²/(2D)}`, so the range is cut at
/// `|b - y| + tail_sigmas √D` and the dropped tail `D e^{-X²/(2D)}` is added
/// to the error.
pub fn meander_integral(b: f64, y: f64, window: f64, z: ComplexValue, cfg: &QuadratureConfig) -> Result<Approx> {
    let q = sqrt_2z("meander_integral", z)?;
    if !(window > 0.0) {
        return Err(domain("meander_integral", format!("D = {window} must be positive")));
    }
    let kink = b - y;
    let upper = kink.abs() + cfg.tail_sigmas * window.sqrt();
    let inv2d = 0.5 / window;
    let quad = integrate_with_breaks(
        |x: f64| x * (-(x * x * inv2d) - (kink - x).abs() * q).exp(),
        0.0,
        upper,
        &[kink],
        cfg,
    )?;
    let tail = window * (-upper * upper * inv2d).exp();
    Ok(Approx {
        value: quad.value,
        abs_err: quad.abs_err + tail,
    })
}

/// Closed form of [`meander_integral`] when `b - y <= 0`:
/// `e^{(b-y)q} D Ψ(-q√D)`.
pub fn meander_integral_closed(b: f64, y: f64, window: f64, z: ComplexValue, cfg: &PsiEvalConfig) -> Result<ComplexValue> {
    let q = sqrt_2z("meander_integral_closed", z)?;
    let kink = b - y;
    if kink > 0.0 {
        return Err(domain("meander_integral_closed", format!("b - y = {kink} must be non-positive")));
    }
    Ok((kink * q).exp() * window * crate::psi::psi(-q * window.sqrt(), cfg)?)
}

/// Density `b/√(2π) w^{-3/2} e^{-b²/(2w)}` of the first passage time to `b`.
pub fn first_passage_density(b: f64, w: f64) -> Result<f64> {
    if !(b > 0.0) || !(w > 0.0) {
        return Err(domain("first_passage_density", format!("b = {b}, w = {w} must be positive")));
    }
    Ok(b / SQRT_2PI * w.powf(-1.5) * (-b * b / (2.0 * w)).exp())
}

/// `F(z) = ∫_0^d e^{-zw} μ_b(dw)` in closed form. With `a = b/√(2d)` and
/// `s = √(zd)`,
///
/// ```text
/// F(z) = ½ e^{-a² - zd} [erfcx(a + s) + erfcx(a - s)],
/// ```
///
/// and when `Re(a - s) < 0` the second term is reflected so nothing grows.
pub fn first_passage_transform(b: f64, d: f64, z: ComplexValue) -> Result<ComplexValue> {
    let q = sqrt_2z("first_passage_transform", z)?;
    if !(b > 0.0) || !(d > 0.0) {
        return Err(domain("first_passage_transform", format!("b = {b}, d = {d} must be positive")));
    }
    let a = b / (2.0 * d).sqrt();
    let s = q * (0.5 * d).sqrt();
    let x = a + s;
    let y = a - s;
    let damp = (-a * a - z * d).exp();
    Ok(if y.re >= 0.0 {
        0.5 * damp * (erfcx(x) + erfcx(y))
    } else {
        (-b * q).exp() - 0.5 * damp * (erfcx(-y) - erfcx(x))
    })
}

/// [`first_passage_transform`] by quadrature: `w = b²/s²` turns it into
/// `√(2/π) ∫_{b/√d}^∞ e^{-z b²/s² - s²/2} ds`.
pub fn first_passage_transform_quad(b: f64, d: f64, z: ComplexValue, cfg: &QuadratureConfig) -> Result<Approx> {
    sqrt_2z("first_passage_transform_quad", z)?;
    if !(b > 0.0) || !(d > 0.0) {
        return Err(domain("first_passage_transform_quad", format!("b = {b}, d = {d} must be positive")));
    }
    let lo = b / d.sqrt();
    let hi = lo + cfg.tail_sigmas;
    let b2 = b * b;
    let quad = integrate_with_breaks(
        |s: f64| (-z * (b2 / (s * s)) - 0.5 * s * s).exp(),
        lo,
        hi,
        &[lo.max(1.0)],
        cfg,
    )?;
    let k = (2.0 / PI).sqrt();
    let tail = k * (-0.5 * hi * hi).exp() / hi;
    Ok(Approx {
        value: quad.value * k,
        abs_err: quad.abs_err * k + tail,
    })
}

/// Mass `erf(b/√(2d))` of the no-touch part: `Q(T_b > d)`.
pub fn survival_mass(b: f64, d: f64) -> f64 {
    erf_real(b / (2.0 * d).sqrt())
}

/// `Q(T_b <= d) = erfc(b/√(2d))`.
pub fn hit_mass(b: f64, d: f64) -> f64 {
    erfc_real(b / (2.0 * d).sqrt())
}

/// Transform of the knock-in time restarted at the barrier:
/// `e^{bq}/Ψ(√(2Dz))` for `b <= 0`, `F(z)/Ψ(√(2Dz))` for `b > 0`.
pub fn restart_factor(p: &NormalizedParams, z: ComplexValue, cfg: &TransformConfig) -> Result<ComplexValue> {
    shifted_restart_factor(p, z, 0.0, cfg)
}

/// `e^{z t₀}` times [`restart_factor`], for `0 <= t₀ <= D`.
pub fn shifted_restart_factor(p: &NormalizedParams, z: ComplexValue, t0: f64, cfg: &TransformConfig) -> Result<ComplexValue> {
    let q = sqrt_2z("restart_factor", z)?;
    let recip = shifted_recip_psi_sqrt_2dz(z, p.window, t0, &cfg.psi)?;
    Ok(if p.b > 0.0 {
        first_passage_transform(p.b, p.remaining, z)? * recip
    } else {
        (p.b * q).exp() * recip
    })
}

/// `E[e^{-zH}]`.
pub fn excursion_transform(p: &NormalizedParams, z: ComplexValue, cfg: &TransformConfig) -> Result<ComplexValue> {
    p.validate()?;
    let restart = restart_factor(p, z, cfg)?;
    Ok(if p.b > 0.0 {
        survival_mass(p.b, p.remaining) * (-z * p.remaining).exp() + restart
    } else {
        restart
    })
}

/// `∫ (e^{-|x-y|q}/q) ν(dx)` for the meander law `ν` of the restart position.
pub fn nu_integral(p: &NormalizedParams, y: f64, z: ComplexValue, cfg: &QuadratureConfig) -> Result<Approx> {
    let q = sqrt_2z("nu_integral", z)?;
    Ok(meander_integral(p.b, y, p.window, z, cfg)?.scale((p.window * q).inv()))
}

/// `∫_{x<b} (e^{-|x-y|q}/q) (φ_d(x) - φ_d(x-2b)) dx`: the no-touch position law
/// at time `d` (reflection principle). With `restricted = false` the integral
/// runs over the whole line, as the difference of Gaussians is written in
/// the literature; that measure has total mass zero.
pub fn mu2_integral(
    p: &NormalizedParams,
    y: f64,
    z: ComplexValue,
    restricted: bool,
    cfg: &QuadratureConfig,
) -> Result<Approx> {
    let q = sqrt_2z("mu2_integral", z)?;
    let (b, d) = (p.b, p.remaining);
    if !(b > 0.0 && d > 0.0) {
        return Err(domain("mu2_integral", format!("needs b > 0 and d > 0 (b = {b}, d = {d})")));
    }
    let width = cfg.tail_sigmas * d.sqrt();
    let lo = -width;
    let hi = if restricted { b } else { 2.0 * b + width };
    let norm = 1.0 / (2.0 * PI * d).sqrt();
    let inv2d = 0.5 / d;
    let qinv = q.inv();
    let quad = integrate_with_breaks(
        |x: f64| {
            let f = norm * ((-x * x * inv2d).exp() - (-(x - 2.0 * b) * (x - 2.0 * b) * inv2d).exp());
            (-(x - y).abs() * q).exp() * (qinv * f)
        },
        lo,
        hi,
        &[y, b, 0.0],
        cfg,
    )?;
    let tail = 2.0 * erfc_real(cfg.tail_sigmas * FRAC_1_SQRT_2) * qinv.norm();
    Ok(Approx {
        value: quad.value,
        abs_err: quad.abs_err + tail,
    })
}

/// Prop-B assembly for `b <= 0`:
/// `e^{bq} / (D q Ψ(√(2Dz))) · ∫_0^∞ x e^{-x²/(2D) - |b-x-y| q} dx`.
pub fn density_transform_b_nonpos(p: &NormalizedParams, y: f64, z: ComplexValue, cfg: &TransformConfig) -> Result<Approx> {
    p.validate()?;
    if p.b > 0.0 {
        return Err(domain("density_transform_b_nonpos", format!("b = {} must be non-positive", p.b)));
    }
    let q = sqrt_2z("density_transform_b_nonpos", z)?;
    let m = meander_integral(p.b, y, p.window, z, &cfg.quadrature)?;
    let factor = (p.b * q).exp() * recip_psi_sqrt_2dz(z, p.window, &cfg.psi)? / (p.window * q);
    Ok(m.scale(factor))
}

fn check_b_pos(function: &'static str, p: &NormalizedParams) -> Result<()> {
    p.validate()?;
    if p.b <= 0.0 {
        return Err(domain(function, format!("b = {} must be positive", p.b)));
    }
    Ok(())
}

/// `b > 0` from the joint law of `(H, W_H)`:
/// `e^{-zd} ∫(…) μ₂(dx) + F(z)/Ψ(√(2Dz)) ∫(…) ν(dx)`.
///
/// On the no-touch event the knock-in time is `d` and the position is the
/// sub-barrier Gaussian `μ₂`; after a touch, time and position come from the
/// restart at the barrier. Time and position are dependent, so the transform
/// is a sum of two products rather than a product of marginals
/// (compare [`density_transform_b_pos_product`]).
pub fn density_transform_b_pos(p: &NormalizedParams, y: f64, z: ComplexValue, cfg: &TransformConfig) -> Result<Approx> {
    check_b_pos("density_transform_b_pos", p)?;
    let survive = mu2_integral(p, y, z, true, &cfg.quadrature)?.scale((-z * p.remaining).exp());
    let restart = nu_integral(p, y, z, &cfg.quadrature)?.scale(restart_factor(p, z, cfg)?);
    Ok(survive.add(restart))
}

/// `E[e^{-zH}] · ∫ (e^{-|x-y|q}/q) (erfc(b/√(2d)) ν + μ₂)(dx)`: the product of
/// the marginal transforms. It equals the four-term expansion built from
/// [`h_b3`] and [`h_b4_restricted`], but it is not the transform of the
/// knock-in density, because `H` and `W_H` are not independent when `b > 0`.
pub fn density_transform_b_pos_product(
    p: &NormalizedParams,
    y: f64,
    z: ComplexValue,
    cfg: &TransformConfig,
) -> Result<Approx> {
    check_b_pos("density_transform_b_pos_product", p)?;
    let e = Approx::exact(excursion_transform(p, z, cfg)?);
    let nu = nu_integral(p, y, z, &cfg.quadrature)?.scale(Complex64::new(hit_mass(p.b, p.remaining), 0.0));
    let mu2 = mu2_integral(p, y, z, true, &cfg.quadrature)?;
    Ok(e.mul(nu.add(mu2)))
}

/// `L(h_b(·, y))(z)` in either constellation.
pub fn density_transform(p: &NormalizedParams, y: f64, z: ComplexValue, cfg: &TransformConfig) -> Result<Approx> {
    if p.b > 0.0 {
        density_transform_b_pos(p, y, z, cfg)
    } else {
        density_transform_b_nonpos(p, y, z, cfg)
    }
}

/// Time-domain inverse of `e^{-zd} ∫ (e^{-|x-y|q}/q) ν(dx)`, for `u > d`:
///
/// ```text
/// 1/(s+D) { √s/√(2π) e^{-(y-b)²/(2s)}
///           - ½ (y-b)√D/√(s+D) e^{-(y-b)²/(2(s+D))} erfc((y-b)√D/√(2s(s+D))) },  s = u - d.
/// ```
pub fn h_b3(u: f64, y: f64, p: &NormalizedParams) -> f64 {
    let s = u - p.remaining;
    if !(s > 0.0) {
        return 0.0;
    }
    let big_d = p.window;
    let e = y - p.b;
    let sd = s + big_d;
    let first = s.sqrt() / SQRT_2PI * (-e * e / (2.0 * s)).exp();
    let arg = e * big_d.sqrt() / (2.0 * s * sd).sqrt();
    let second = 0.5 * e * big_d.sqrt() / sd.sqrt() * (-e * e / (2.0 * sd)).exp() * erfc_real(arg);
    (first - second) / sd
}

/// [`h_b3`] as the Gaussian smoothing of the meander law:
/// `1/(D √(2π s)) ∫_0^∞ x e^{-x²/(2D) - (b-x-y)²/(2s)} dx`, `s = u - d`.
pub fn h_b3_integral(u: f64, y: f64, p: &NormalizedParams, cfg: &QuadratureConfig) -> Result<f64> {
    let s = u - p.remaining;
    if !(s > 0.0) {
        return Ok(0.0);
    }
    let big_d = p.window;
    let centre = ((p.b - y) * big_d / (s + big_d)).max(0.0);
    let spread = (s * big_d / (s + big_d)).sqrt();
    let upper = centre + cfg.tail_sigmas * spread.max(big_d.sqrt());
    let quad = integrate_with_breaks(
        |x: f64| x * (-x * x / (2.0 * big_d) - (p.b - x - y).powi(2) / (2.0 * s)).exp(),
        0.0,
        upper,
        &[centre],
        cfg,
    )?;
    Ok(quad.value / (big_d * (2.0 * PI * s).sqrt()))
}

/// `1_{u>d} (φ_u(y) - φ_u(y - 2b))`, the inverse of `e^{-zd} ∫_ℝ (e^{-|x-y|q}/q)
/// (φ_d(x) - φ_d(x-2b)) dx` with the Gaussian difference over the whole line.
pub fn h_b4(u: f64, y: f64, p: &NormalizedParams) -> f64 {
    if !(u > p.remaining) {
        return 0.0;
    }
    let f = (-y * y / (2.0 * u)).exp() - (-(y - 2.0 * p.b).powi(2) / (2.0 * u)).exp();
    f / (2.0 * PI * u).sqrt()
}

/// Inverse of `e^{-zd} ∫_{x<b} (e^{-|x-y|q}/q) (φ_d(x) - φ_d(x-2b)) dx`, for `u > d`:
///
/// ```text
/// φ_u(y) Φ((b - y d/u)/v) - φ_u(y - 2b) Φ((-b - (y - 2b) d/u)/v),   v² = d(u - d)/u.
/// ```
pub fn h_b4_restricted(u: f64, y: f64, p: &NormalizedParams) -> f64 {
    let d = p.remaining;
    if !(u > d) {
        return 0.0;
    }
    let b = p.b;
    let v = (d * (u - d) / u).sqrt();
    let phi = |x: f64| (-x * x / (2.0 * u)).exp() / (2.0 * PI * u).sqrt();
    let shifted = y - 2.0 * b;
    phi(y) * norm_cdf((b - y * d / u) / v) - phi(shifted) * norm_cdf((-b - shifted * d / u) / v)
}

/// Quadrature of a smooth function against the meander law of `b - W_H`:
/// `∫_0^∞ (x/D) e^{-x²/(2D)} g(x) dx`, with `g` bounded by `bound` on the cut tail.
pub(crate) fn integrate_meander<F>(window: f64, kink: f64, bound: f64, g: F, cfg: &QuadratureConfig) -> Result<Approx>
where
    F: Fn(f64) -> ComplexValue,
{
    let upper = cfg.tail_sigmas * window.sqrt();
    let inv = 1.0 / window;
    let quad = integrate_best(|x: f64| g(x) * (x * inv * (-0.5 * x * x * inv).exp()), 0.0, upper, &[kink], cfg);
    if !quad.converged {
        return Err(crate::error::Error::Quadrature {
            estimate: quad.abs_err,
            tolerance: cfg.abs_tol.max(cfg.rel_tol * quad.value.norm()),
        });
    }
    let tail = bound * (-0.5 * upper * upper * inv).exp();
    Ok(Approx {
        value: quad.value,
        abs_err: quad.abs_err + tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::{forward_transform, invert_best_with_error, InversionConfig};
    use crate::psi::psi;
    use crate::quad::integrate;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    fn tight() -> TransformConfig {
        TransformConfig {
            quadrature: QuadratureConfig {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_nodes: 20_000,
                tail_sigmas: 12.0,
            },
            psi: PsiEvalConfig::default(),
        }
    }

    fn above(b: f64, window: f64) -> NormalizedParams {
        NormalizedParams {
            b,
            varpi: 0.15,
            beta: 0.0,
            window,
            remaining: window,
            tau: 1.0,
        }
    }

    fn below(b: f64, remaining: f64, window: f64) -> NormalizedParams {
        NormalizedParams {
            remaining,
            ..above(b, window)
        }
    }

    #[test]
    fn validation() {
        assert!(above(-0.2, 0.1).validate().is_ok());
        assert!(above(-0.2, 0.0).validate().is_err());
        assert!(below(0.3, 0.0, 0.1).validate().is_err());
        assert!(below(0.3, 0.2, 0.1).validate().is_err());
        assert!(below(0.3, 0.1, 0.1).validate().is_ok());
        assert!(NormalizedParams { tau: 0.0, ..above(-0.1, 0.1) }.validate().is_err());
        assert_eq!(above(-0.2, 0.1).knock_in_floor(), 0.1);
        assert_eq!(below(0.2, 0.03, 0.1).knock_in_floor(), 0.03);
    }

    #[test]
    fn meander_closed_form_on_the_open_side() {
        let cfg = tight();
        // b = y, D = 1, z = 1/2: D Ψ(-1)
        let m = meander_integral(0.4, 0.4, 1.0, c(0.5, 0.0), &cfg.quadrature).unwrap();
        let expected = psi(c(-1.0, 0.0), &cfg.psi).unwrap();
        assert!((m.value - expected).norm() < 1e-12);
        for (b, y, big_d, z) in [(-0.2, 0.3, 0.1, c(2.0, 3.0)), (0.0, 0.5, 0.4, c(7.0, -40.0))] {
            let m = meander_integral(b, y, big_d, z, &cfg.quadrature).unwrap();
            let closed = meander_integral_closed(b, y, big_d, z, &cfg.psi).unwrap();
            assert!((m.value - closed).norm() <= 1e-12 * closed.norm().max(1e-3));
            assert!(m.abs_err < 1e-12);
        }
        assert!(meander_integral_closed(0.5, 0.0, 0.1, c(1.0, 0.0), &cfg.psi).is_err());
    }

    #[test]
    fn meander_self_convergence() {
        let (b, y, big_d, z) = (0.3, -0.2, 0.1, c(2.0, 3.0));
        let coarse = QuadratureConfig::default();
        let fine = QuadratureConfig {
            abs_tol: 1e-15,
            rel_tol: 1e-14,
            max_nodes: 50_000,
            tail_sigmas: 16.0,
        };
        let a = meander_integral(b, y, big_d, z, &coarse).unwrap();
        let f = meander_integral(b, y, big_d, z, &fine).unwrap();
        assert!((a.value - f.value).norm() < 1e-10);
        assert!(meander_integral(b, y, big_d, c(0.0, 1.0), &coarse).is_err());
    }

    #[test]
    fn first_passage_density_properties() {
        let cfg = tight().quadrature;
        // total mass 1 for b = 0.5, via s = b/√w
        let total = integrate(
            |s: f64| (2.0 / PI).sqrt() * (-0.5 * s * s).exp(),
            0.0,
            40.0,
            &cfg,
        )
        .unwrap();
        assert!((total.value - 1.0).abs() < 1e-13);
        let part = integrate(|w: f64| first_passage_density(0.3, w).unwrap_or(0.0), 1e-12, 0.2, &cfg).unwrap();
        assert!((part.value - erfc_real(0.3 / 0.4f64.sqrt())).abs() < 1e-12);
        let m = first_passage_density(1.0, 1.0 / 3.0).unwrap();
        assert!(first_passage_density(1.0, 1.0 / 3.0 + 1e-4).unwrap() < m);
        assert!(first_passage_density(1.0, 1.0 / 3.0 - 1e-4).unwrap() < m);
        assert!(first_passage_density(-1.0, 1.0).is_err());
        assert!(first_passage_density(1.0, 0.0).is_err());
    }

    #[test]
    fn first_passage_transform_closed_vs_quadrature() {
        let cfg = tight().quadrature;
        for (b, d, z) in [
            (0.3, 0.05, c(1.0, 0.0)),
            (0.3, 0.05, c(9.0, 40.0)),
            (1.2, 0.3, c(0.2, -3.0)),
            (0.05, 0.1, c(30.0, 120.0)),
            (0.5, 0.09, c(60.0, 2.0)),
        ] {
            let closed = first_passage_transform(b, d, z).unwrap();
            let quad = first_passage_transform_quad(b, d, z, &cfg).unwrap();
            assert!((closed - quad.value).norm() < 1e-12, "{b} {d} {z}: {closed} vs {}", quad.value);
        }
        // the full-line limit e^{-bq}
        let f = first_passage_transform(0.4, 1e4, c(2.0, 1.0)).unwrap();
        assert!((f - (-0.4 * (2.0 * c(2.0, 1.0)).sqrt()).exp()).norm() < 1e-3);
    }

    #[test]
    fn excursion_transform_special_cases() {
        let cfg = tight();
        let z = c(1.7, 0.9);
        let at_zero = excursion_transform(&above(0.0, 0.1), z, &cfg).unwrap();
        let psi_v = crate::psi::psi_sqrt_2dz(z, 0.1, &cfg.psi).unwrap();
        assert!((at_zero * psi_v - 1.0).norm() < 1e-14);
        let near_origin = excursion_transform(&above(-0.3, 0.1), c(1e-12, 0.0), &cfg).unwrap();
        assert!((near_origin - 1.0).norm() < 1e-5);
        let near_origin = excursion_transform(&below(0.3, 0.05, 0.1), c(1e-12, 0.0), &cfg).unwrap();
        assert!((near_origin - 1.0).norm() < 1e-5);
    }

    #[test]
    fn nonpos_two_routes_agree() {
        let cfg = tight();
        let p = above(-0.1, 0.1);
        for z in [c(3.0, 0.0), c(0.4, 5.0), c(12.0, -80.0)] {
            let y = 0.2;
            let prop_b = density_transform_b_nonpos(&p, y, z, &cfg).unwrap();
            let e = excursion_transform(&p, z, &cfg).unwrap();
            let route = nu_integral(&p, y, z, &cfg.quadrature).unwrap().value * e;
            assert!((prop_b.value - route).norm() <= 1e-12 * route.norm());
        }
        assert!(density_transform_b_nonpos(&above(0.1, 0.1), 0.0, c(1.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn mu2_mass_is_survival_probability() {
        let (b, d) = (0.4, 0.3);
        let cfg = tight().quadrature;
        let norm = 1.0 / (2.0 * PI * d).sqrt();
        let mass = integrate_with_breaks(
            |x: f64| norm * ((-x * x / (2.0 * d)).exp() - (-(x - 2.0 * b).powi(2) / (2.0 * d)).exp()),
            -12.0 * d.sqrt(),
            b,
            &[0.0],
            &cfg,
        )
        .unwrap();
        assert!((mass.value - survival_mass(b, d)).abs() < 1e-13);
        assert!((survival_mass(b, d) + hit_mass(b, d) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h_b3_closed_form_matches_integral() {
        let cfg = tight().quadrature;
        let p = below(0.3, 0.05, 0.1);
        for (u, y) in [(0.06, 0.3), (0.2, -0.4), (1.0, 0.9), (0.55, 0.3), (3.0, -2.0), (0.051, 0.25)] {
            let closed = h_b3(u, y, &p);
            let integral = h_b3_integral(u, y, &p, &cfg).unwrap();
            assert!((closed - integral).abs() < 1e-12 * integral.abs().max(1e-6), "u = {u}, y = {y}");
        }
        // at y = b the erfc term drops out
        let v = h_b3(p.remaining + 0.5, p.b, &p);
        assert!((v - 0.5f64.sqrt() / (SQRT_2PI * (0.5 + p.window))).abs() < 1e-15);
        assert_eq!(h_b3(0.04, 0.1, &p), 0.0);
    }

    #[test]
    fn h_b4_values() {
        let p = below(0.3, 0.05, 0.1);
        assert_eq!(h_b4(0.05, 0.1, &p), 0.0);
        assert!(h_b4(0.7, p.b, &p).abs() < 1e-16);
        assert_eq!(h_b4_restricted(0.01, 0.1, &p), 0.0);
        // unrestricted minus restricted is the part of the Gaussian difference above b
        let u = 0.4;
        let y = 0.1;
        let v = (p.remaining * (u - p.remaining) / u).sqrt();
        let phi = |x: f64| (-x * x / (2.0 * u)).exp() / (2.0 * PI * u).sqrt();
        let above_b = phi(y) * (1.0 - norm_cdf((p.b - y * p.remaining / u) / v))
            - phi(y - 2.0 * p.b) * (1.0 - norm_cdf((-p.b - (y - 2.0 * p.b) * p.remaining / u) / v));
        assert!((h_b4(u, y, &p) - h_b4_restricted(u, y, &p) - above_b).abs() < 1e-15);
    }

    fn forward_cfg() -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_nodes: 200_000,
            tail_sigmas: 12.0,
        }
    }

    #[test]
    fn h_b3_h_b4_forward_transforms() {
        let cfg = tight();
        let p = below(0.3, 0.05, 0.1);
        for (y, z) in [(0.1, c(2.0, 1.0)), (-0.5, c(5.0, -7.0)), (0.6, c(1.0, 0.0))] {
            let l3 = forward_transform(|u| h_b3(u, y, &p), z, 0.0, &[p.remaining], &forward_cfg()).unwrap();
            let expect3 = nu_integral(&p, y, z, &cfg.quadrature).unwrap().value * (-z * p.remaining).exp();
            assert!((l3 - expect3).norm() < 1e-9 * expect3.norm(), "h3 at y = {y}");
            let l4 = forward_transform(|u| h_b4_restricted(u, y, &p), z, 0.0, &[p.remaining], &forward_cfg()).unwrap();
            let expect4 = mu2_integral(&p, y, z, true, &cfg.quadrature).unwrap().value * (-z * p.remaining).exp();
            assert!((l4 - expect4).norm() < 1e-9 * expect4.norm(), "h4 at y = {y}");
            let l4u = forward_transform(|u| h_b4(u, y, &p), z, 0.0, &[p.remaining], &forward_cfg()).unwrap();
            let expect4u = mu2_integral(&p, y, z, false, &cfg.quadrature).unwrap().value * (-z * p.remaining).exp();
            assert!((l4u - expect4u).norm() < 1e-9 * expect4u.norm().max(1e-6), "unrestricted h4 at y = {y}");
        }
    }

    #[test]
    fn product_and_joint_forms_differ_and_meet_in_the_limits() {
        let cfg = tight();
        let z = c(2.0, 1.0);
        let p = below(0.3, 0.05, 0.1);
        let joint = density_transform_b_pos(&p, 0.1, z, &cfg).unwrap().value;
        let product = density_transform_b_pos_product(&p, 0.1, z, &cfg).unwrap().value;
        assert!((joint - product).norm() > 1e-3 * joint.norm());
        // b → 0⁺: no survival part, both reduce to the b = 0 transform
        let p0 = below(1e-9, 0.1, 0.1);
        let joint0 = density_transform_b_pos(&p0, 0.1, z, &cfg).unwrap().value;
        let product0 = density_transform_b_pos_product(&p0, 0.1, z, &cfg).unwrap().value;
        let at_zero = density_transform_b_nonpos(&above(0.0, 0.1), 0.1, z, &cfg).unwrap().value;
        assert!((joint0 - at_zero).norm() < 1e-7 * at_zero.norm());
        assert!((product0 - at_zero).norm() < 1e-7 * at_zero.norm());
    }

    #[test]
    fn cauchy_riemann() {
        let cfg = tight();
        let h = 1e-5;
        let cases = [(above(-0.1, 0.1), 0.2), (below(0.3, 0.05, 0.1), -0.1)];
        for (p, y) in cases {
            for z in [c(1.0, 0.5), c(3.0, -2.0), c(0.3, 8.0), c(10.0, 10.0), c(0.8, -0.1)] {
                let f = |z: ComplexValue| density_transform(&p, y, z, &cfg).unwrap().value;
                let dx = (f(z + h) - f(z - h)) / (2.0 * h);
                let dy = (f(z + c(0.0, h)) - f(z - c(0.0, h))) / (2.0 * h);
                // holomorphic: ∂f/∂y = i ∂f/∂x
                let residual = (dy - c(0.0, 1.0) * dx).norm();
                assert!(residual < 1e-6 * (1.0 + dx.norm()), "z = {z}: residual {residual}");
            }
        }
    }

    #[test]
    fn inverted_density_respects_the_floor() {
        let cfg = tight();
        let icfg = InversionConfig {
            burnin_terms: 60,
            terms_m: 60,
            ..Default::default()
        };
        for (p, y) in [(above(-0.1, 0.1), 0.0), (below(0.3, 0.05, 0.1), 0.1)] {
            let floor = p.knock_in_floor();
            let eval = |u: f64| {
                invert_best_with_error(
                    |z| density_transform(&p, y, z, &cfg).map(|a| (a.value, a.abs_err)),
                    u,
                    &icfg,
                )
                .unwrap()
            };
            for u in [0.3 * floor, 0.7 * floor] {
                let inv = eval(u);
                assert!(inv.value.abs() < 10.0 * icfg.target_tol, "below floor u = {u}: {inv:?}");
            }
            for k in 1..=6 {
                let u = floor + 1e-3 + 0.2 * k as f64;
                let inv = eval(u);
                assert!(inv.value >= -inv.err_estimate.max(icfg.target_tol), "u = {u}: {inv:?}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn transform_bounded_on_the_real_axis(z in 0.2f64..20.0, y in -1.0f64..1.0) {
            // E[e^{-zH} e^{-|W_H - y| q}/q] lies in (0, 1/q] for real z
            let cfg = tight();
            let p = below(0.3, 0.05, 0.1);
            let v = density_transform(&p, y, c(z, 0.0), &cfg).unwrap().value;
            let bound = 1.0 / (2.0 * z).sqrt();
            prop_assert!(v.re > 0.0);
            prop_assert!(v.im.abs() < 1e-14);
            prop_assert!(v.re <= bound);
        }
    }
}
