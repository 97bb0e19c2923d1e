//! Scenario files: named contracts, grid sweeps and engine overrides, all
//! checked before anything is priced.
//!
//! ```toml
//! [engine]                      # optional, applies to every scenario
//! inversion.target_tol = 1e-8
//!
//! [[scenario]]
//! name = "desk"
//! spot = 100.0                  # currency units
//! strike = 100.0
//! barrier = 95.0
//! rate_r = 0.05                 # continuously compounded, per year
//! sigma = 0.2                   # per sqrt(year)
//! tau = 1.0                     # years
//! window_d = 0.1                # years
//!
//! [scenario.grid]               # cartesian product, first key slowest
//! window_d = [0.05, 0.1, 0.2]
//! ```

use std::fmt;
use std::path::Path;

use parisian_core::{normalize, EngineConfig, MarketParams};
use serde_json::Value as Json;
use toml::{Table, Value};

/// Most rows a single file may expand to.
pub const MAX_ROWS: usize = 100_000;

/// Market fields a scenario may set or sweep, in output order.
pub const MARKET_FIELDS: [&str; 9] = [
    "spot",
    "strike",
    "barrier",
    "rate_r",
    "dividend_delta",
    "sigma",
    "tau",
    "window_d",
    "elapsed_below",
];

const OPTIONAL_FIELDS: [&str; 2] = ["dividend_delta", "elapsed_below"];

/// Problem with the scenario file, naming the scenario and field at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, InputError> {
    Err(InputError(msg.into()))
}

/// One contract to price after grid expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    /// 1-based position within the scenario's expansion.
    pub index: usize,
    pub params: MarketParams,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone)]
struct Scenario {
    name: String,
    base: Vec<Option<f64>>,
    grid: Vec<(usize, Vec<f64>)>,
    engine: EngineConfig,
}

impl Scenario {
    fn rows(&self) -> Option<usize> {
        self.grid.iter().try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()))
    }
}

pub fn load(path: &Path) -> Result<Vec<Row>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Parse, expand and validate a scenario file.
pub fn parse(text: &str) -> Result<Vec<Row>, InputError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| InputError(format!("not valid TOML: {e}")))?;
    for key in doc.keys() {
        if key != "engine" && key != "scenario" {
            return fail(format!("unknown top-level key `{key}` (expected `engine` or `scenario`)"));
        }
    }
    let defaults = match doc.get("engine") {
        Some(v) => engine_overrides(EngineConfig::default(), v, "engine")?,
        None => EngineConfig::default(),
    };
    let list = match doc.get("scenario") {
        Some(Value::Array(a)) if !a.is_empty() => a,
        Some(_) => return fail("`scenario` must be a non-empty array of tables ([[scenario]])"),
        None => return fail("no scenarios: add at least one [[scenario]] table"),
    };

    let mut scenarios: Vec<Scenario> = Vec::with_capacity(list.len());
    for (i, entry) in list.iter().enumerate() {
        let s = scenario(entry, i, &defaults)?;
        if scenarios.iter().any(|t| t.name == s.name) {
            return fail(format!("scenario `{}` is defined twice", s.name));
        }
        scenarios.push(s);
    }

    let total = scenarios
        .iter()
        .try_fold(0usize, |acc, s| acc.checked_add(s.rows()?).filter(|&n| n <= MAX_ROWS));
    if total.is_none() {
        return fail(format!("grid expansion exceeds {MAX_ROWS} rows"));
    }

    let mut rows = Vec::with_capacity(total.unwrap_or(0));
    for s in &scenarios {
        expand(s, &mut rows)?;
    }
    Ok(rows)
}

fn scenario(entry: &Value, position: usize, defaults: &EngineConfig) -> Result<Scenario, InputError> {
    let Value::Table(t) = entry else {
        return fail(format!("scenario #{}: must be a table", position + 1));
    };
    let name = match t.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(_) => return fail(format!("scenario #{}: `name` must be a non-empty string", position + 1)),
        None => return fail(format!("scenario #{}: missing `name`", position + 1)),
    };
    let mut base = vec![None; MARKET_FIELDS.len()];
    let mut grid = Vec::new();
    let mut engine = *defaults;
    for (key, value) in t {
        match key.as_str() {
            "name" => {}
            "engine" => engine = engine_overrides(engine, value, &format!("scenario `{name}`: engine"))?,
            "grid" => grid = grid_axes(value, &name)?,
            field => {
                let Some(i) = field_index(field) else {
                    return fail(format!("scenario `{name}`: unknown field `{field}`"));
                };
                base[i] = Some(number(value).ok_or_else(|| InputError(format!("scenario `{name}`: `{field}` must be a number")))?);
            }
        }
    }
    for (i, field) in MARKET_FIELDS.iter().enumerate() {
        let swept = grid.iter().any(|(g, _)| *g == i);
        if base[i].is_none() && !swept {
            if OPTIONAL_FIELDS.contains(field) {
                base[i] = Some(0.0);
            } else {
                return fail(format!("scenario `{name}`: missing field `{field}`"));
            }
        }
    }
    engine
        .validate()
        .map_err(|e| InputError(format!("scenario `{name}`: engine: {e}")))?;
    Ok(Scenario { name, base, grid, engine })
}

fn grid_axes(value: &Value, name: &str) -> Result<Vec<(usize, Vec<f64>)>, InputError> {
    let Value::Table(t) = value else {
        return fail(format!("scenario `{name}`: `grid` must be a table of arrays"));
    };
    let mut axes = Vec::with_capacity(t.len());
    for (key, v) in t {
        let Some(i) = field_index(key) else {
            return fail(format!("scenario `{name}`: grid: unknown field `{key}`"));
        };
        let values: Option<Vec<f64>> = match v {
            Value::Array(a) if !a.is_empty() => a.iter().map(number).collect(),
            _ => None,
        };
        let Some(values) = values else {
            return fail(format!("scenario `{name}`: grid: `{key}` must be a non-empty array of numbers"));
        };
        axes.push((i, values));
    }
    Ok(axes)
}

fn expand(s: &Scenario, rows: &mut Vec<Row>) -> Result<(), InputError> {
    let count = s.rows().expect("checked against MAX_ROWS");
    for k in 0..count {
        let mut values: Vec<f64> = s.base.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        // mixed radix, last axis fastest
        let mut rest = k;
        for (field, axis) in s.grid.iter().rev() {
            values[*field] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        let params = MarketParams {
            spot: values[0],
            strike: values[1],
            barrier: values[2],
            rate_r: values[3],
            dividend_delta: values[4],
            sigma: values[5],
            tau: values[6],
            window_d: values[7],
            elapsed_below: values[8],
        };
        let index = k + 1;
        normalize(&params).map_err(|e| InputError(format!("scenario `{}` row {index}: {e}", s.name)))?;
        rows.push(Row {
            scenario: s.name.clone(),
            index,
            params,
            engine: s.engine,
        });
    }
    Ok(())
}

fn field_index(field: &str) -> Option<usize> {
    MARKET_FIELDS.iter().position(|f| *f == field)
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(n) => Some(*n as f64),
        _ => None,
    }
}

/// `base` with the keys of the TOML table `overrides` replaced. Every key
/// must already exist in the configuration; the error names the full path.
fn engine_overrides(base: EngineConfig, overrides: &Value, context: &str) -> Result<EngineConfig, InputError> {
    let mut tree = serde_json::to_value(base).expect("engine config serializes");
    let patch = serde_json::to_value(overrides).map_err(|e| InputError(format!("{context}: {e}")))?;
    if !patch.is_object() {
        return fail(format!("{context}: must be a table"));
    }
    merge(&mut tree, patch, "").map_err(|path| InputError(format!("{context}: unknown setting `{path}`")))?;
    serde_json::from_value(tree).map_err(|e| InputError(format!("{context}: {e}")))
}

fn merge(tree: &mut Json, patch: Json, prefix: &str) -> Result<(), String> {
    match (tree, patch) {
        (Json::Object(t), Json::Object(p)) => {
            for (key, value) in p {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                match t.get_mut(&key) {
                    Some(slot) => merge(slot, value, &path)?,
                    None => return Err(path),
                }
            }
            Ok(())
        }
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}
