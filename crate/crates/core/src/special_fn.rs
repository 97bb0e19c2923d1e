//! Complex gamma and complementary error functions, and the Gaussian
//! inversion kernel.
//!
//! All complex square roots and logarithms use the principal branch of
//! `num_complex` (argument in `(-π, π]`). On the negative real axis the
//! result follows the sign of the zero imaginary part; the pricing code only
//! takes roots of arguments with positive real part.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Complex number used throughout the crate.
pub type ComplexValue = Complex64;

#[cfg(test)]
pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;
pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
pub(crate) const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` for `Re z >= 1/2` (Lanczos, g = 7).
fn ln_gamma_right(z: ComplexValue) -> ComplexValue {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

fn is_pole(z: ComplexValue) -> bool {
    if z.im != 0.0 || z.re > 0.0 {
        return false;
    }
    (z.re - z.re.round()).abs() <= 4.0 * f64::EPSILON * z.re.abs().max(1.0)
}

/// The gamma function on the complex plane minus the non-positive integers.
pub fn gamma(z: ComplexValue) -> Result<ComplexValue> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(domain("gamma", format!("non-finite argument {z}")));
    }
    if is_pole(z) {
        return Err(Error::GammaPole(z.re));
    }
    if z.re < 0.5 {
        // reflection: Γ(z) Γ(1-z) = π / sin(πz)
        let s = (PI * z).sin();
        Ok(PI / (s * ln_gamma_right(1.0 - z).exp()))
    } else {
        Ok(ln_gamma_right(z).exp())
    }
}

/// Real-argument convenience wrapper around [`gamma`].
pub fn gamma_real(x: f64) -> Result<f64> {
    gamma(Complex64::new(x, 0.0)).map(|g| g.re)
}

// Region boundaries for erfcx on the closed right half-plane.
const ERFC_ASYMPTOTIC_RADIUS: f64 = 8.0;
const ERFC_CF_MIN_RE: f64 = 1.0;

/// Laplace continued fraction, modified Lentz evaluation.
fn erfcx_continued_fraction(z: ComplexValue) -> ComplexValue {
    let tiny = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..20_000 {
        let a = 0.5 * n as f64;
        d = z + a * d;
        if d.norm_sqr() < tiny {
            d = Complex64::new(tiny, 0.0);
        }
        d = d.inv();
        c = z + a / c;
        if c.norm_sqr() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

fn erfcx_asymptotic(z: ComplexValue) -> ComplexValue {
    let inv2z2 = 0.5 / (z * z);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for n in 1..200 {
        term *= -(2 * n - 1) as f64 * inv2z2;
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        if size < 1e-17 * sum.norm() {
            break;
        }
        last = size;
    }
    sum * FRAC_1_SQRT_PI / z
}

/// Maclaurin series of erf.
fn erf_series(z: ComplexValue) -> ComplexValue {
    let z2 = z * z;
    let mut t = z;
    let mut sum = z;
    let r2 = z2.norm();
    for n in 1..4_000 {
        t *= -z2 / n as f64;
        let add = t / (2 * n + 1) as f64;
        sum += add;
        if (n as f64) > r2 && add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * (2.0 * FRAC_1_SQRT_PI)
}

/// `e^{z²} erfc(z)` for `Re z >= 0`.
fn erfcx_right(z: ComplexValue) -> ComplexValue {
    if z.norm() >= ERFC_ASYMPTOTIC_RADIUS {
        erfcx_asymptotic(z)
    } else if z.re >= ERFC_CF_MIN_RE {
        erfcx_continued_fraction(z)
    } else {
        (z * z).exp() * (1.0 - erf_series(z))
    }
}

/// Scaled complementary error function `e^{z²} erfc(z)`.
pub fn erfcx(z: ComplexValue) -> ComplexValue {
    if z.re >= 0.0 {
        erfcx_right(z)
    } else {
        2.0 * (z * z).exp() - erfcx_right(-z)
    }
}

/// Complementary error function `(2/√π) ∫_z^∞ e^{-w²} dw` on the whole plane.
pub fn erfc(z: ComplexValue) -> ComplexValue {
    let right = |u: ComplexValue| {
        if u.norm() < ERFC_ASYMPTOTIC_RADIUS && u.re < ERFC_CF_MIN_RE {
            1.0 - erf_series(u)
        } else {
            (-(u * u)).exp() * erfcx_right(u)
        }
    };
    if z.re >= 0.0 {
        right(z)
    } else {
        2.0 - right(-z)
    }
}

/// Error function; uses the series directly near the origin so small
/// arguments keep full relative accuracy.
pub fn erf(z: ComplexValue) -> ComplexValue {
    if z.norm() < 0.5 {
        erf_series(z)
    } else {
        1.0 - erfc(z)
    }
}

pub fn erfc_real(x: f64) -> f64 {
    erfc(Complex64::new(x, 0.0)).re
}

pub fn erf_real(x: f64) -> f64 {
    erf(Complex64::new(x, 0.0)).re
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc_real(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `e^{-α²/(2u)} / √(2πu)`, the time-domain inverse of `e^{-α√(2z)}/√(2z)`.
pub fn gaussian_kernel(alpha: f64, u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(domain("gaussian_kernel", format!("u = {u} must be positive")));
    }
    Ok((-alpha * alpha / (2.0 * u)).exp() / (2.0 * PI * u).sqrt())
}
