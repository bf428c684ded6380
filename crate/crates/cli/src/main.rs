// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wickfield::analysis::{
    dominance_oracle, dominance_test, fkg_oracle, fkg_test, lorentz_invariance_exact, mixed_noninvariance_exact, poisson_null_panel,
};
use wickfield::fields::{estimate_observables, reim};
use wickfield::oracle::expect_many;
use wickfield::{Check, Configuration, CorrelationEstimate, Diagnostics, Error, Functional, Result, SeriesValue, Slice, TestFunction, TestReport, Window};

use config::{RunConfig, Setup};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "wickfield", version, about = "Gibbs sampling, Schwinger functions and their Wick rotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler and write `samples.json`.
    Sample,
    /// Monte Carlo estimates of the `[[estimate]]` requests, written to `estimates.json`.
    Estimate {
        /// Reuse a sample archive written by `sample` instead of sampling afresh.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Exact series values of the `[[estimate]]` requests, written to `oracle.json`.
    Oracle,
    /// Run the `[verify]` tests and write `verify.json`.
    Verify,
    /// Estimates against oracle values as `report.csv` and a table on stdout.
    Report {
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CacheDrift { .. } | Error::NonFinite(_) | Error::TailBound { .. } | Error::ImaginaryBudget { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> std::result::Result<u8, Failure> {
    let Some(path) = &cli.config else {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: "--config is required".into(),
        });
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "workers",
                reason: "must be at least 1".into(),
            }
            .into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        })?;
    }
    let setup = cfg.setup()?;
    std::fs::create_dir_all(&cli.out).map_err(Error::from)?;
    match cli.command {
        Command::Sample => sample(&setup, &cli.out),
        Command::Estimate { samples } => estimate(&setup, samples.as_deref(), &cli.out),
        Command::Oracle => oracle(&setup, &cli.out),
        Command::Verify => verify(&setup, &cli.out),
        Command::Report { samples } => report(&setup, samples.as_deref(), &cli.out),
    }
    .map_err(Failure::from)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::NonFinite(format!("{name}: {e}")))?;
    text.push('\n');
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SampleArchive {
    config: RunConfig,
    diagnostics: Diagnostics,
    samples: Vec<Configuration>,
}

fn draw(setup: &Setup) -> Result<(Vec<Configuration>, Diagnostics)> {
    let out = setup.model.sample(&setup.sampler, setup.effective.sampler.n_samples)?;
    if !out.diagnostics.max_drift.is_finite() {
        return Err(Error::NonFinite("sampler drift".into()));
    }
    Ok((out.samples, out.diagnostics))
}

fn load_samples(setup: &Setup, path: Option<&Path>) -> Result<Vec<Configuration>> {
    match path {
        None => Ok(draw(setup)?.0),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let archive: SampleArchive = serde_json::from_str(&text).map_err(|e| Error::InvalidParameter {
                name: "samples",
                reason: e.to_string(),
            })?;
            let dim = setup.model.window().ambient_dim();
            if let Some(c) = archive.samples.iter().find(|c| c.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            Ok(archive.samples)
        }
    }
}

fn sample(setup: &Setup, out: &Path) -> Result<u8> {
    let (samples, diagnostics) = draw(setup)?;
    let archive = SampleArchive {
        config: setup.effective.clone(),
        diagnostics,
        samples,
    };
    write_json(out, "samples.json", &archive)?;
    Ok(0)
}

#[derive(Serialize)]
struct EstimateRecord {
    label: String,
    #[serde(flatten)]
    estimate: CorrelationEstimate,
}

#[derive(Serialize)]
struct EstimateFile {
    config: RunConfig,
    records: Vec<EstimateRecord>,
}

fn estimates(setup: &Setup, samples_path: Option<&Path>) -> Result<Vec<EstimateRecord>> {
    if setup.observables.is_empty() {
        return Ok(Vec::new());
    }
    let samples = load_samples(setup, samples_path)?;
    let values = estimate_observables(&samples, &setup.observables)?;
    Ok(setup
        .effective
        .estimate
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (req, mut estimate))| {
            if let config::Request::Moment { points, conj, .. } = req {
                estimate.points = points.clone();
                estimate.conj = conj.clone();
            }
            estimate.seed = Some(setup.sampler.seed);
            EstimateRecord { label: req.label(i), estimate }
        })
        .collect())
}

fn estimate(setup: &Setup, samples: Option<&Path>, out: &Path) -> Result<u8> {
    let records = estimates(setup, samples)?;
    write_json(
        out,
        "estimates.json",
        &EstimateFile {
            config: setup.effective.clone(),
            records,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct OracleRecord {
    label: String,
    #[serde(with = "reim")]
    value: num_complex::Complex64,
    tail_bound: f64,
    quad_bound: f64,
    nmax: usize,
}

#[derive(Serialize)]
struct OracleFile {
    config: RunConfig,
    records: Vec<OracleRecord>,
}

fn oracle_values(setup: &Setup) -> Result<Vec<OracleRecord>> {
    if setup.observables.is_empty() {
        return Ok(Vec::new());
    }
    let spec = setup.model.series(&setup.effective.oracle)?;
    let values: Vec<SeriesValue> = expect_many(&spec, &setup.observables)?;
    let mut records = Vec::with_capacity(values.len());
    for (i, (req, v)) in setup.effective.estimate.iter().zip(values).enumerate() {
        if !(v.value.re.is_finite() && v.value.im.is_finite() && v.error().is_finite()) {
            return Err(Error::NonFinite(format!("oracle value for `{}`", req.label(i))));
        }
        records.push(OracleRecord {
            label: req.label(i),
            value: v.value,
            tail_bound: v.tail_bound,
            quad_bound: v.quad_bound,
            nmax: v.nmax,
        });
    }
    Ok(records)
}

fn oracle(setup: &Setup, out: &Path) -> Result<u8> {
    let records = oracle_values(setup)?;
    write_json(
        out,
        "oracle.json",
        &OracleFile {
            config: setup.effective.clone(),
            records,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyFile {
    config: RunConfig,
    passed: bool,
    reports: Vec<TestReport>,
}

/// Two halves of a box window along the first axis.
fn halves(w: &Window) -> Result<(Window, Window)> {
    let Window::Box { lo, hi } = w else {
        return Err(Error::Unsupported("box panels on a sphere window".into()));
    };
    let mid = 0.5 * (lo[0] + hi[0]);
    let bounds = |a: f64, b: f64| -> Vec<[f64; 2]> {
        std::iter::once([a, b]).chain(lo.iter().zip(hi).skip(1).map(|(x, y)| [*x, *y])).collect()
    };
    Ok((Window::new_box(&bounds(lo[0], mid))?, Window::new_box(&bounds(mid, hi[0]))?))
}

/// A cosine bump at the window centre reaching a quarter of the shortest side.
fn centre_bump(w: &Window) -> Result<TestFunction> {
    let Window::Box { lo, hi } = w else {
        return Err(Error::Unsupported("box panels on a sphere window".into()));
    };
    let side = lo.iter().zip(hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    TestFunction::cosine_bump(w.center(), 0.25 * side, 1.0)
}

fn padded_point(dim: usize, head: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    for (x, h) in p.iter_mut().zip(head) {
        *x = *h;
    }
    p
}

fn verify(setup: &Setup, out: &Path) -> Result<u8> {
    let model = &setup.model;
    let v = &setup.effective.verify;
    let seed = setup.sampler.seed;
    let needs_samples = v.tests.iter().any(|t| matches!(t.as_str(), "fkg" | "dominance" | "poisson_null"));
    let samples = if needs_samples { draw(setup)?.0 } else { Vec::new() };
    let mut reports = Vec::new();
    for name in &v.tests {
        let report = match name.as_str() {
            "conditions" => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = model.potential.verify_conditions(v.trials, 8, 1e-6, &mut rng)?;
                let checks = vec![
                    Check::at_most("stability violations", r.stability_violations as f64, 0.0),
                    Check::at_most("papangelou violations", r.papangelou_violations as f64, 0.0),
                    Check::at_most("ferromagnetic violations", r.ferromagnetic_violations as f64, 0.0),
                ];
                TestReport::new("conditions", checks, r.trials, None, Some(seed))
            }
            "fkg" => {
                let (a, b) = halves(model.window())?;
                let h = centre_bump(model.window())?;
                let c = model.window().center();
                let pairs = [
                    (Functional::Count { region: a, cap: None }, Functional::Count { region: b, cap: None }),
                    (
                        Functional::ExpPairing { h, cap: Some(2.0) },
                        Functional::Field { point: c, cap: None },
                    ),
                ];
                fkg_test(&samples, model.kernel(), &pairs, Some(seed))?
            }
            "dominance" => {
                let (a, _) = halves(model.window())?;
                let h = centre_bump(model.window())?;
                let panel = [
                    Functional::Count {
                        region: model.window().clone(),
                        cap: None,
                    },
                    Functional::Count { region: a, cap: None },
                    Functional::Pairing { h: h.clone(), cap: None },
                    Functional::ExpPairing { h, cap: None },
                    Functional::Field {
                        point: model.window().center(),
                        cap: None,
                    },
                ];
                dominance_test(model, &samples, &panel, Some(seed))?
            }
            "poisson_null" => {
                let c = model.window().center();
                let mut off = c.clone();
                off[0] += 0.25;
                poisson_null_panel(model, &samples, &centre_bump(model.window())?, &c, &off, Some(seed))?
            }
            "fkg_oracle" => {
                let (a, b) = halves(model.window())?;
                fkg_oracle(model, &a, &b, &setup.effective.oracle, 1e-6)?
            }
            "dominance_oracle" => dominance_oracle(model, &setup.effective.oracle)?,
            "lorentz_exact" => {
                let d = model.window().dim();
                let ys = [padded_point(d, &[0.2, 0.0]), padded_point(d, &[-0.1, 0.3])];
                lorentz_invariance_exact(model.kernel(), model.intensity, &Slice::Minkowski { dim: d }, v.chi, &ys, 1e-6)?
            }
            "mixed_exact" => {
                let d = model.window().dim();
                let (y1, y2) = (padded_point(d, &[0.4, 0.0]), padded_point(d, &[-0.3, 0.2]));
                mixed_noninvariance_exact(model.kernel(), model.intensity, &Slice::Minkowski { dim: d }, v.chi, &y1, &y2, 1e-8)?
            }
            other => unreachable!("test name `{other}` passed validation"),
        };
        if report.checks.iter().any(|c| !c.value.is_finite()) {
            return Err(Error::NonFinite(format!("test `{}`", report.name)));
        }
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        println!("{}", r.line());
    }
    write_json(
        out,
        "verify.json",
        &VerifyFile {
            config: setup.effective.clone(),
            passed,
            reports,
        },
    )?;
    Ok(if passed { 0 } else { EXIT_VERIFICATION })
}

fn report(setup: &Setup, samples: Option<&Path>, out: &Path) -> Result<u8> {
    let est = estimates(setup, samples)?;
    // The series is only practical on tiny windows; leave its columns blank otherwise.
    let exact = match oracle_values(setup) {
        Ok(v) => Some(v),
        Err(e @ (Error::Unsupported(_) | Error::TailBound { .. })) => {
            eprintln!("note: no oracle column: {e}");
            None
        }
        Err(e) => return Err(e),
    };
    let mut csv = String::from("label,estimate_re,estimate_im,stderr,n_samples,oracle_re,oracle_im,oracle_error,z_score,within_3sigma\n");
    let mut table = format!("{:<16} {:>24} {:>10} {:>24} {:>10} {:>8}\n", "label", "estimate", "stderr", "oracle", "error", "z");
    for (i, e) in est.iter().enumerate() {
        let v = e.estimate.value;
        let se = e.estimate.stderr();
        let _ = write!(csv, "{},{:e},{:e},{:e},{}", e.label, v.re, v.im, se, e.estimate.n_samples);
        let _ = write!(table, "{:<16} {:>24} {:>10.3e}", e.label, format!("{:.6}{:+.6}i", v.re, v.im), se);
        match exact.as_ref().map(|x| &x[i]) {
            Some(o) => {
                let err = o.tail_bound + o.quad_bound;
                let z = (v - o.value).norm() / se.hypot(err);
                let _ = writeln!(csv, ",{:e},{:e},{:e},{:e},{}", o.value.re, o.value.im, err, z, z <= 3.0);
                let _ = writeln!(
                    table,
                    " {:>24} {:>10.3e} {:>8.2}",
                    format!("{:.6}{:+.6}i", o.value.re, o.value.im),
                    err,
                    z
                );
            }
            None => {
                csv.push_str(",,,,,\n");
                let _ = writeln!(table, " {:>24} {:>10} {:>8}", "-", "-", "-");
            }
        }
    }
    std::fs::write(out.join("report.csv"), csv)?;
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(table.as_bytes())?;
    Ok(0)
}
