//! The `roughalg` command line.
//!
//! Every command prints one JSON document, to `--out` when given and to
//! stdout otherwise. Exit codes: 0 success, 1 a verification check failed,
//! 2 bad input, 3 sewing did not converge.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exec::configure_threads;
use crate::integration::{rough_integral, RoughIntegralProblem};
use crate::one_form::{LipOneFormData, PolynomialOneForm};
use crate::sewing::SewOptions;
use crate::signature::{lift_path, signature_on, PiecewiseLinearPath};
use crate::tensor::group_like_defect;
use crate::verify::{effects_suite, run_suite, EffectsInput, Suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Caps the worker threads.
pub const THREADS_ENV: &str = "ROUGHALG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "roughalg", version, about = "Signatures, rough integrals and algebraic self-checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated signature of a piecewise-linear path.
    Signature {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long, num_args = 2, value_names = ["S", "T"], allow_negative_numbers = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a polynomial one-form along the lift of a path.
    Integrate {
        #[arg(long)]
        path: PathBuf,
        #[arg(long = "one-form")]
        one_form: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Output truncation depth.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        max_level: usize,
        #[arg(long, num_args = 2, value_names = ["S", "T"], allow_negative_numbers = true)]
        interval: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random cases per check.
        #[arg(long)]
        cases: Option<usize>,
        /// Overrides every tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the effects suite on a given path and one-form.
    VerifyEffects {
        #[arg(long)]
        path: PathBuf,
        #[arg(long = "one-form")]
        one_form: PathBuf,
        #[arg(long, default_value_t = 2.5)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A one-form file: the polynomial plus an optional regularity `gamma`.
pub struct FormFile {
    pub form: PolynomialOneForm,
    pub gamma: Option<f64>,
}

pub fn read_form(path: &Path) -> Result<FormFile> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let gamma = match value.get("gamma") {
        None | Some(serde_json::Value::Null) => None,
        Some(g) => Some(
            g.as_f64()
                .ok_or_else(|| Error::InvalidArgument("gamma must be a number".into()))?,
        ),
    };
    Ok(FormFile {
        form: PolynomialOneForm::from_json_str(&text)?,
        gamma,
    })
}

fn interval_of(interval: &Option<Vec<f64>>, path: &PiecewiseLinearPath) -> (f64, f64) {
    match interval {
        Some(v) => (v[0], v[1]),
        None => (path.start(), path.end()),
    }
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_) | Error::AdmissionFailed { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INPUT,
    }
}

/// Runs one command and returns its exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Signature {
            path,
            depth,
            interval,
            out,
        } => {
            if depth == 0 {
                return Err(Error::InvalidArgument("depth must be at least 1".into()));
            }
            let path = PiecewiseLinearPath::from_csv_path(&path)?;
            let (s, t) = interval_of(&interval, &path);
            let sig = signature_on(&path, depth, s, t)?;
            emit(
                &json!({
                    "interval": [s, t],
                    "signature": sig,
                    "group_like_defect": group_like_defect(sig.series()),
                }),
                &out,
            )?;
            Ok(EXIT_OK)
        }
        Command::Integrate {
            path,
            one_form,
            p,
            depth,
            tol,
            max_level,
            interval,
            out,
        } => {
            if !(tol > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
            }
            if !(p >= 1.0) {
                return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
            }
            let path = PiecewiseLinearPath::from_csv_path(&path)?;
            let file = read_form(&one_form)?;
            let (s, t) = interval_of(&interval, &path);
            let cap = p.floor() as usize;
            let gamma = file.gamma.unwrap_or((file.form.degree().max(cap) + 1) as f64);
            let lip = LipOneFormData::from_polynomial(&file.form, gamma);
            let mut prob = RoughIntegralProblem::new(lift_path(&path, depth * (cap + 1)), lip, p, (s, t), depth);
            prob.sew = SewOptions {
                tol,
                max_level,
                min_level: 1,
            };
            prob.strict = false;
            match rough_integral(&prob) {
                Ok(r) => {
                    emit(
                        &json!({
                            "p": p,
                            "depth": depth,
                            "interval": [s, t],
                            "level1": r.level1,
                            "element": r.element,
                            "group_like_defect": group_like_defect(r.element.series()),
                            "report": r.report,
                            "warnings": r.warnings,
                        }),
                        &out,
                    )?;
                    Ok(EXIT_OK)
                }
                Err(Error::NotConverged(report)) => {
                    emit(
                        &json!({
                            "p": p,
                            "depth": depth,
                            "interval": [s, t],
                            "error": "sewing did not converge",
                            "report": report,
                        }),
                        &out,
                    )?;
                    Ok(EXIT_NOT_CONVERGED)
                }
                Err(e) => Err(e),
            }
        }
        Command::Verify {
            suite,
            seed,
            cases,
            tol,
            out,
        } => {
            let suite: Suite = suite.parse()?;
            let report = run_suite(
                suite,
                VerifyOptions {
                    seed,
                    cases,
                    tolerance: tol,
                },
            )?;
            emit(&report, &out)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::VerifyEffects {
            path,
            one_form,
            p,
            seed,
            tol,
            out,
        } => {
            let input = EffectsInput {
                path: PiecewiseLinearPath::from_csv_path(&path)?,
                form: read_form(&one_form)?.form,
                p,
            };
            let report = effects_suite(
                &input,
                VerifyOptions {
                    seed,
                    cases: None,
                    tolerance: tol,
                },
            )?;
            emit(&report, &out)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

/// Parses arguments, applies the thread cap and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                configure_threads(n);
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return EXIT_INPUT;
            }
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
