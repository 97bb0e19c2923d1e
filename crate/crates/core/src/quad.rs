//! Adaptive Gauss–Kronrod (7/15-point) quadrature for real- and complex-valued
//! integrands on finite intervals.
//!
//! Semi-infinite integrals are handled by the callers, which truncate at a
//! point where a known envelope of the integrand is below tolerance.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be integrated: real numbers and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(self) -> f64 {
        // max-norm is enough for error control and cheaper than hypot
        self.re.abs().max(self.im.abs())
    }
}

/// Tolerances and work limits for the adaptive quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on integrand evaluations per integral.
    pub max_nodes: usize,
    /// Truncation point of Gaussian tails, in standard deviations.
    pub tail_sigmas: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_nodes: 4096,
            tail_sigmas: 12.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_nodes < 16 {
            return Err(Error::Config("quadrature max_nodes must be at least 16".into()));
        }
        if !(self.tail_sigmas > 0.0) {
            return Err(Error::Config("tail_sigmas must be positive".into()));
        }
        Ok(())
    }

    /// Same limits with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub abs_err: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

fn gauss_kronrod<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Segment<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = fc.norm() * WGK[7];
    let mut fv = [(T::zero(), T::zero()); 7];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod = kronrod + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for (j, (f1, f2)) in fv.iter().enumerate() {
        resasc += WGK[j] * ((*f1 - mean).norm() + (*f2 - mean).norm());
    }
    let scale = half.abs();
    resabs *= scale;
    resasc *= scale;
    let mut err = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        err,
    }
}

/// Integrate `f` over `[a, b]`, first splitting at every point of `breaks`
/// that lies strictly inside the interval. Never fails: the caller inspects
/// `converged` and `abs_err`.
pub fn integrate_best<T, F>(mut f: F, a: f64, b: f64, breaks: &[f64], cfg: &QuadratureConfig) -> Quad<T>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if a == b {
        return Quad {
            value: T::zero(),
            abs_err: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > lo && x < hi)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let mut segments = Vec::with_capacity(64);
    let mut left = lo;
    for &c in cuts.iter().chain(std::iter::once(&hi)) {
        segments.push(gauss_kronrod(&mut f, left, c));
        left = c;
    }
    let mut evaluations = 15 * segments.len();

    loop {
        let total = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        let err: f64 = segments.iter().map(|s| s.err).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.norm());
        if err <= tol || evaluations + 30 > cfg.max_nodes {
            return Quad {
                value: total * sign,
                abs_err: err,
                evaluations,
                converged: err <= tol,
            };
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let worst = segments.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Quad {
                value: total * sign,
                abs_err: err,
                evaluations,
                converged: false,
            };
        }
        segments.push(gauss_kronrod(&mut f, worst.a, mid));
        segments.push(gauss_kronrod(&mut f, mid, worst.b));
        evaluations += 30;
    }
}

/// Integrate `f` over `[a, b]` with breakpoints, failing when the requested
/// tolerance is not met.
pub fn integrate_with_breaks<T, F>(f: F, a: f64, b: f64, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Quad<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let q = integrate_best(f, a, b, breaks, cfg);
    if q.converged {
        Ok(q)
    } else {
        Err(Error::Quadrature {
            estimate: q.abs_err,
            tolerance: cfg.abs_tol.max(cfg.rel_tol * q.value.norm()),
        })
    }
}

pub fn integrate<T, F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Quad<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with_breaks(f, a, b, &[], cfg)
}
