//! Pricing runs over expanded scenario rows.

use clap::ValueEnum;
use log::warn;
use parisian_core::{black_scholes_call, price_down_in_call, MarketParams, PricingResult};
use rayon::prelude::*;

use crate::scenario::{InputError, Row, MARKET_FIELDS};
use crate::table::{Cell, Table};

/// Columns of `price`, in order. The set is part of the output contract.
pub const PRICE_COLUMNS: [&str; 15] = [
    "scenario",
    "row",
    "spot",
    "strike",
    "barrier",
    "rate_r",
    "dividend_delta",
    "sigma",
    "tau",
    "window_d",
    "elapsed_below",
    "price",
    "err_estimate",
    "down_out",
    "error",
];

/// Columns of `bump`, in order.
pub const BUMP_COLUMNS: [&str; 9] = [
    "scenario",
    "row",
    "param",
    "size",
    "price",
    "sensitivity",
    "noise_bound",
    "noisy",
    "error",
];

/// Outcome of pricing one row.
#[derive(Debug, Clone)]
pub struct Priced {
    pub row: Row,
    pub result: Result<PricingResult, String>,
}

impl Priced {
    /// Down-and-out value by in-out parity.
    pub fn down_out(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| black_scholes_call(&self.row.params) - r.price)
    }
}

/// Price every row concurrently; the output keeps the input order.
pub fn price_rows(rows: &[Row]) -> Vec<Priced> {
    rows.par_iter()
        .map(|row| Priced {
            row: row.clone(),
            result: price_down_in_call(&row.params, &row.engine).map_err(|e| e.to_string()),
        })
        .collect()
}

fn market_cells(p: &MarketParams) -> [Cell; 9] {
    [
        p.spot,
        p.strike,
        p.barrier,
        p.rate_r,
        p.dividend_delta,
        p.sigma,
        p.tau,
        p.window_d,
        p.elapsed_below,
    ]
    .map(Cell::Num)
}

pub fn price_table(priced: &[Priced]) -> Table {
    debug_assert_eq!(&PRICE_COLUMNS[2..11], &MARKET_FIELDS);
    let mut t = Table::new(PRICE_COLUMNS.to_vec());
    for p in priced {
        let mut cells = vec![Cell::Text(p.row.scenario.clone()), Cell::Int(p.row.index as u64)];
        cells.extend(market_cells(&p.row.params));
        match &p.result {
            Ok(r) => cells.extend([
                Cell::Num(r.price),
                Cell::Num(r.err_estimate),
                Cell::Num(p.down_out().expect("priced")),
                Cell::Empty,
            ]),
            Err(e) => cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Text(e.clone())]),
        }
        t.push(cells);
    }
    t
}

/// Consistency checks behind `price --check`: each price lies in
/// `[0, vanilla]` and, within a scenario, prices fall as the window grows and
/// rise with the barrier while the spot stays above it. Differences smaller
/// than twice the combined error estimates are not flagged.
pub fn check(priced: &[Priced]) -> Vec<String> {
    let mut problems = Vec::new();
    let ok: Vec<(&Row, &PricingResult)> = priced
        .iter()
        .filter_map(|p| p.result.as_ref().ok().map(|r| (&p.row, r)))
        .collect();
    for (row, r) in &ok {
        let vanilla = black_scholes_call(&row.params);
        if r.price < -r.err_estimate || r.price > vanilla + r.err_estimate {
            problems.push(format!(
                "scenario `{}` row {}: price {} outside [0, vanilla {}]",
                row.scenario, row.index, r.price, vanilla
            ));
        }
    }
    // (field index, price must not decrease as the field grows)
    for (field, rising) in [(7usize, false), (2usize, true)] {
        for (i, (a, ra)) in ok.iter().enumerate() {
            for (b, rb) in &ok[i + 1..] {
                if a.scenario != b.scenario || !differ_only_in(&a.params, &b.params, field) {
                    continue;
                }
                if field == 2 && (a.params.spot < a.params.barrier || b.params.spot < b.params.barrier) {
                    continue;
                }
                let (lo, rlo, hi, rhi) = if field_value(&a.params, field) < field_value(&b.params, field) {
                    (a, ra, b, rb)
                } else {
                    (b, rb, a, ra)
                };
                let slack = 2.0 * (rlo.err_estimate + rhi.err_estimate);
                let broken = if rising {
                    rhi.price < rlo.price - slack
                } else {
                    rhi.price > rlo.price + slack
                };
                if broken {
                    problems.push(format!(
                        "scenario `{}` rows {} and {}: price {} at {} = {} vs {} at {}, expected {}",
                        lo.scenario,
                        lo.index,
                        hi.index,
                        rlo.price,
                        MARKET_FIELDS[field],
                        field_value(&lo.params, field),
                        rhi.price,
                        field_value(&hi.params, field),
                        if rising { "nondecreasing" } else { "nonincreasing" }
                    ));
                }
            }
        }
    }
    problems
}

fn fields(p: &MarketParams) -> [f64; 9] {
    [
        p.spot,
        p.strike,
        p.barrier,
        p.rate_r,
        p.dividend_delta,
        p.sigma,
        p.tau,
        p.window_d,
        p.elapsed_below,
    ]
}

fn field_value(p: &MarketParams, field: usize) -> f64 {
    fields(p)[field]
}

fn differ_only_in(a: &MarketParams, b: &MarketParams, field: usize) -> bool {
    let (fa, fb) = (fields(a), fields(b));
    (0..fa.len()).all(|k| (k == field) != (fa[k] == fb[k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BumpParam {
    Spot,
    Sigma,
    Tau,
    Barrier,
    /// All four in turn.
    All,
}

impl BumpParam {
    fn expand(self) -> &'static [BumpParam] {
        match self {
            BumpParam::Spot => &[BumpParam::Spot],
            BumpParam::Sigma => &[BumpParam::Sigma],
            BumpParam::Tau => &[BumpParam::Tau],
            BumpParam::Barrier => &[BumpParam::Barrier],
            BumpParam::All => &[BumpParam::Spot, BumpParam::Sigma, BumpParam::Tau, BumpParam::Barrier],
        }
    }

    fn name(self) -> &'static str {
        match self {
            BumpParam::Spot => "spot",
            BumpParam::Sigma => "sigma",
            BumpParam::Tau => "tau",
            BumpParam::Barrier => "barrier",
            BumpParam::All => "all",
        }
    }

    fn shifted(self, p: &MarketParams, h: f64) -> MarketParams {
        let mut q = *p;
        match self {
            BumpParam::Spot => q.spot += h,
            BumpParam::Sigma => q.sigma += h,
            BumpParam::Tau => q.tau += h,
            BumpParam::Barrier => q.barrier += h,
            BumpParam::All => unreachable!("expanded before use"),
        }
        q
    }
}

/// Central difference of one row with respect to one parameter.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    pub row: Row,
    pub param: BumpParam,
    pub size: f64,
    pub result: Result<SensitivityValue, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SensitivityValue {
    pub price: f64,
    pub sensitivity: f64,
    /// Combined error estimate of the two bumped prices over `2h`.
    pub noise_bound: f64,
}

impl SensitivityValue {
    pub fn noisy(&self) -> bool {
        self.noise_bound > 0.1 * self.sensitivity.abs()
    }
}

/// Check that every bumped contract is valid before pricing anything.
pub fn validate_bumps(rows: &[Row], param: BumpParam, size: f64) -> Result<(), InputError> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(InputError(format!("bump size must be positive and finite, got {size}")));
    }
    for row in rows {
        for &p in param.expand() {
            for h in [size, -size] {
                let q = p.shifted(&row.params, h);
                parisian_core::normalize(&q).map_err(|e| {
                    InputError(format!(
                        "scenario `{}` row {}: {} {:+} gives an invalid contract: {e}",
                        row.scenario,
                        row.index,
                        p.name(),
                        h
                    ))
                })?;
            }
        }
    }
    Ok(())
}

pub fn bump_rows(rows: &[Row], param: BumpParam, size: f64) -> Vec<Sensitivity> {
    let jobs: Vec<(&Row, BumpParam)> = rows
        .iter()
        .flat_map(|r| param.expand().iter().map(move |&p| (r, p)))
        .collect();
    let out: Vec<Sensitivity> = jobs
        .par_iter()
        .map(|&(row, p)| {
            let price = |m: &MarketParams| price_down_in_call(m, &row.engine).map_err(|e| e.to_string());
            let result = (|| {
                let base = price(&row.params)?;
                let up = price(&p.shifted(&row.params, size))?;
                let down = price(&p.shifted(&row.params, -size))?;
                Ok(SensitivityValue {
                    price: base.price,
                    sensitivity: (up.price - down.price) / (2.0 * size),
                    noise_bound: (up.err_estimate + down.err_estimate) / (2.0 * size),
                })
            })();
            Sensitivity {
                row: row.clone(),
                param: p,
                size,
                result,
            }
        })
        .collect();
    for s in &out {
        if let Ok(v) = &s.result {
            if v.noisy() {
                warn!(
                    "scenario `{}` row {}: {} sensitivity {:.6e} is within 10x its noise bound {:.3e}; use a larger bump",
                    s.row.scenario,
                    s.row.index,
                    s.param.name(),
                    v.sensitivity,
                    v.noise_bound
                );
            }
        }
    }
    out
}

pub fn bump_table(out: &[Sensitivity]) -> Table {
    let mut t = Table::new(BUMP_COLUMNS.to_vec());
    for s in out {
        let mut cells = vec![
            Cell::Text(s.row.scenario.clone()),
            Cell::Int(s.row.index as u64),
            Cell::Text(s.param.name().into()),
            Cell::Num(s.size),
        ];
        match &s.result {
            Ok(v) => cells.extend([
                Cell::Num(v.price),
                Cell::Num(v.sensitivity),
                Cell::Num(v.noise_bound),
                Cell::Bool(v.noisy()),
                Cell::Empty,
            ]),
            Err(e) => cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Text(e.clone())]),
        }
        t.push(cells);
    }
    t
}
