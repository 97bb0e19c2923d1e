//! `parisian`: price Parisian down-and-in calls from scenario files, bump
//! them, and run the acceptance suite.
//!
//! Exit status: 0 when everything succeeded, 1 when a row, a `--check`
//! assertion or a criterion failed, 2 for unusable input.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{error, info};
use parisian_cli::run::{bump_rows, bump_table, check, price_rows, price_table, validate_bumps};
use parisian_cli::scenario;
use parisian_cli::{BumpParam, Cell, Format, Table};
use parisian_core::validation::run_suite;
use parisian_core::{SuiteOptions, DEFAULT_SEED};

const FAILED: u8 = 1;
const BAD_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "parisian", version, about = "Parisian down-and-in call pricer")]
struct Cli {
    /// Worker threads for concurrent pricing (0 = one per core).
    #[arg(long, global = true, env = "PARISIAN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price every row of a scenario file.
    Price {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also assert bounds and monotonicity across the rows.
        #[arg(long)]
        check: bool,
    },
    /// Run the acceptance suite.
    Validate {
        /// Skip the Monte Carlo criteria.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Central-difference sensitivities of every row.
    Bump {
        file: PathBuf,
        #[arg(long, value_enum)]
        param: BumpParam,
        /// Absolute bump, in the units of the parameter.
        #[arg(long)]
        size: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot set up {n} threads: {e}");
            return ExitCode::from(BAD_INPUT);
        }
    }
    match cli.command {
        Command::Price { file, format, check } => price(file, format, check),
        Command::Validate { quick, seed, format } => validate(quick, seed, format),
        Command::Bump {
            file,
            param,
            size,
            format,
        } => bump(file, param, size, format),
    }
}

fn emit(table: &Table, format: Format) -> bool {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match table.write(&mut lock, format).and_then(|_| lock.flush()) {
        Ok(()) => true,
        Err(e) => {
            error!("writing output: {e}");
            false
        }
    }
}

fn price(file: PathBuf, format: Format, with_check: bool) -> ExitCode {
    let rows = match scenario::load(&file) {
        Ok(rows) => rows,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(BAD_INPUT);
        }
    };
    info!("pricing {} rows on {} threads", rows.len(), rayon::current_num_threads());
    let start = Instant::now();
    let priced = price_rows(&rows);
    info!("done in {:.2}s", start.elapsed().as_secs_f64());
    let mut ok = emit(&price_table(&priced), format);
    for p in &priced {
        if let Err(e) = &p.result {
            error!("scenario `{}` row {}: {e}", p.row.scenario, p.row.index);
            ok = false;
        }
    }
    if with_check {
        let problems = check(&priced);
        for p in &problems {
            error!("check failed: {p}");
        }
        if problems.is_empty() {
            info!("checks passed");
        }
        ok &= problems.is_empty();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(FAILED)
    }
}

fn bump(file: PathBuf, param: BumpParam, size: f64, format: Format) -> ExitCode {
    let rows = match scenario::load(&file).and_then(|rows| validate_bumps(&rows, param, size).map(|_| rows)) {
        Ok(rows) => rows,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(BAD_INPUT);
        }
    };
    let out = bump_rows(&rows, param, size);
    let mut ok = emit(&bump_table(&out), format);
    for s in &out {
        if let Err(e) = &s.result {
            error!("scenario `{}` row {}: {e}", s.row.scenario, s.row.index);
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(FAILED)
    }
}

fn validate(quick: bool, seed: u64, format: Format) -> ExitCode {
    let default = if seed == DEFAULT_SEED { " (default)" } else { "" };
    info!("acceptance suite, seed {seed}{default}{}", if quick { ", Monte Carlo criteria skipped" } else { "" });
    let reports = run_suite(&SuiteOptions { quick, seed });
    let passed = reports.iter().all(|r| r.passed);
    let ok = if format == Format::Text {
        let mut out = io::stdout().lock();
        let mut text = format!("seed {seed}{default}\n");
        for r in &reports {
            text.push_str(&format!("{r}\n"));
        }
        let failed = reports.iter().filter(|r| !r.passed).count();
        text.push_str(&if failed == 0 {
            format!("all {} criteria passed\n", reports.len())
        } else {
            format!("{failed} of {} criteria failed\n", reports.len())
        });
        out.write_all(text.as_bytes()).is_ok()
    } else {
        let mut t = Table::new(vec!["criterion", "name", "passed", "residual", "bound", "seconds", "seed", "detail"]);
        for r in &reports {
            t.push(vec![
                Cell::Int(r.criterion.number() as u64),
                Cell::Text(r.name.into()),
                Cell::Bool(r.passed),
                Cell::Num(r.residual),
                Cell::Num(r.bound),
                Cell::Num(r.seconds),
                Cell::Int(seed),
                Cell::Text(r.detail.clone()),
            ]);
        }
        emit(&t, format)
    };
    if ok && passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(FAILED)
    }
}
