use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use leibenson::{DiffusionParams, Regime};
use leibenson_lab::checks::{self, DiagnosticRow};
use leibenson_lab::error::{RunError, RunResult};
use leibenson_lab::plot::{self, PlotKind};
use leibenson_lab::run::{phi_curve, run_scenario, CertificateRow, RunOptions, RunOutcome, Status};
use leibenson_lab::scenario::Scenario;
use leibenson_lab::shipped;
use leibenson_lab::sweep::{run_sweep, Axis};

/// Exit code of `plot` when the run directory holds no plottable series.
const EXIT_EMPTY: u8 = 5;
const EXIT_CONFIG: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "leibenson", version, about = "Solve u_t = Δ_p u^q on model manifolds and certify gradient estimates")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "LEIBENSON_OUT", default_value = "runs")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and write snapshots only.
    Solve { scenario: String },
    /// Solve and certify the requested bounds.
    Certify { scenario: String },
    /// Solve and run the diagnostics.
    Diagnose { scenario: String },
    /// Solve, certify and diagnose.
    Run { scenario: String },
    /// Run every bundled scenario.
    Suite,
    /// List the bundled scenarios.
    List,
    /// Run a template scenario along one parameter axis.
    Sweep {
        template: String,
        /// One of p, q, alpha, K, R, m.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, env = "LEIBENSON_WORKERS")]
        workers: Option<usize>,
    },
    /// Check the auxiliary time function for one parameter set.
    PhiCheck {
        #[arg(long, value_enum)]
        regime: PhiRegime,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Ricci lower bound K.
        #[arg(long, default_value_t = 1.0)]
        curvature_bound: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Also write phi.csv and its plot under this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Print the explicit constants.
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Instead tabulate the slow constants over δ ∈ [1e-6, 1e4] at fixed p.
        #[arg(long)]
        delta_sweep: bool,
    },
    /// Summarize a run directory.
    Report { dir: PathBuf },
    /// Render SVG plots for a run directory.
    Plot {
        dir: PathBuf,
        /// a: certificate, b: convergence, c: auxiliary function, d: sweep margin.
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhiRegime {
    Slow,
    Fast,
}

/// Parameters given on the command line; a bad value is a configuration error.
fn cli_params(p: f64, q: f64, n: usize) -> RunResult<DiffusionParams> {
    DiffusionParams::new(p, q, n).map_err(|e| RunError::Config {
        field: "params".into(),
        reason: e.to_string(),
    })
}

fn load(arg: &str) -> RunResult<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path);
    }
    shipped::shipped(arg).unwrap_or_else(|| {
        Err(RunError::Config {
            field: "scenario".into(),
            reason: format!("`{arg}` is neither a file nor a bundled scenario"),
        })
    })
}

fn print_outcome(outcome: &RunOutcome) {
    println!("{}", outcome.dir.display());
    for c in &outcome.certificates {
        println!(
            "  {:<12} {:<20} alpha={:<5} sup_F={:<12.6e} bound={:<12.6e} margin={:.6e}{}",
            c.verdict,
            c.bound_name,
            c.alpha,
            c.sup_f,
            c.bound,
            c.margin,
            if c.calibrated.is_empty() { String::new() } else { format!(" [calibrated {}]", c.calibrated) }
        );
    }
    for d in &outcome.diagnostics {
        println!("  {:<12} {:<40} lhs={:<12.6e} rhs={:<12.6e} slack={:.6e}", d.verdict, d.check_name, d.lhs, d.rhs, d.slack);
    }
    for c in &outcome.convergence {
        println!("  convergence  m={:<5} error={:.4e} fitted order={:.3}", c.cells, c.error, c.fitted_order);
    }
}

fn run_one(out: &Path, arg: &str, opts: RunOptions) -> RunResult<Status> {
    let scenario = load(arg)?;
    let outcome = run_scenario(&scenario, out, opts)?;
    print_outcome(&outcome);
    Ok(outcome.status())
}

fn phi_check(
    regime: PhiRegime,
    params: DiffusionParams,
    alpha: f64,
    curvature_bound: f64,
    lambda_max: f64,
    samples: usize,
    write: Option<PathBuf>,
) -> RunResult<Status> {
    let expected = match regime {
        PhiRegime::Slow => Regime::Slow,
        PhiRegime::Fast => Regime::Fast,
    };
    if params.regime() != expected {
        return Err(RunError::Config {
            field: "regime".into(),
            reason: format!("parameters are {}, not {expected:?}", params.regime()),
        });
    }
    let base = DiagnosticRow {
        check_name: String::new(),
        scenario_id: "phi-check".into(),
        params_digest: String::new(),
        lhs: 0.0,
        rhs: 0.0,
        slack: 0.0,
        verdict: String::new(),
        seed: 0,
    };
    let rows = checks::phi_rows(&params, alpha, curvature_bound, lambda_max, samples, &base)?;
    for d in &rows {
        println!("{:<6} {:<48} lhs={:<12.6e} rhs={:<12.6e}", d.verdict, d.check_name, d.lhs, d.rhs);
    }
    if let Some(dir) = write {
        std::fs::create_dir_all(&dir)?;
        let curve = phi_curve("phi-check", &params, alpha, curvature_bound, lambda_max)?;
        let mut w = csv::Writer::from_path(dir.join("phi.csv"))?;
        for r in &curve {
            w.serialize(r)?;
        }
        w.flush()?;
        plot::render(&dir, &[PlotKind::Phi])?;
    }
    Ok(rows
        .iter()
        .map(|r| Status::from_verdict(&r.verdict))
        .fold(Status::Pass, Status::combine))
}

fn constants(p: f64, q: f64, n: usize, alpha: f64, delta_sweep: bool) -> RunResult<Status> {
    if delta_sweep {
        cli_params(p, 2.0 / (p - 1.0), n)?;
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for row in checks::delta_sweep(p, n, alpha, &leibenson::phi::log_samples(1e-6, 1e4, 41))? {
            w.serialize(row)?;
        }
        w.flush()?;
        return Ok(Status::Pass);
    }
    let params = cli_params(p, q, n)?;
    let text = match params.regime() {
        Regime::Slow => serde_json::to_string_pretty(&params.slow_constants(alpha)?)?,
        Regime::Fast => {
            let fc = params.fast_constants_default(alpha)?;
            serde_json::to_string_pretty(&serde_json::json!({
                "constants": fc,
                "discriminant": fc.discriminant(),
                "lambda_min_admissible": fc.lambda_min_admissible(),
            }))?
        }
        other => {
            return Err(RunError::Config {
                field: "params".into(),
                reason: format!("no explicit constants in the {other} regime"),
            })
        }
    };
    println!("{text}");
    Ok(Status::Pass)
}

fn read_csv<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> RunResult<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

fn report(dir: &Path) -> RunResult<ExitCode> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| RunError::Config {
        field: "dir".into(),
        reason: format!("{}: {e}", manifest_path.display()),
    })?;
    let manifest: serde_json::Value = serde_json::from_str(&text)?;
    println!(
        "{} ({}, version {}, seed {}): {}",
        manifest["scenario_id"].as_str().unwrap_or("?"),
        manifest["regime"].as_str().unwrap_or("?"),
        manifest["code_version"].as_str().unwrap_or("?"),
        manifest["seed"],
        manifest["status"].as_str().unwrap_or("?"),
    );
    if let Some(err) = manifest["error"].as_object() {
        println!("  error: {}", err["message"].as_str().unwrap_or("?"));
        let config = err["kind"].as_str() == Some("configuration");
        return Ok(ExitCode::from(if config { EXIT_CONFIG } else { EXIT_OTHER }));
    }
    let certs: Vec<CertificateRow> = read_csv(&dir.join("certificates.csv"))?;
    let diags: Vec<DiagnosticRow> = read_csv(&dir.join("diagnostics.csv"))?;
    for c in &certs {
        println!("  {:<12} {:<20} alpha={:<5} margin={:.6e}", c.verdict, c.bound_name, c.alpha, c.margin);
    }
    for d in &diags {
        println!("  {:<12} {}", d.verdict, d.check_name);
    }
    let status = certs
        .iter()
        .map(|c| c.verdict.as_str())
        .chain(diags.iter().map(|d| d.verdict.as_str()))
        .map(Status::from_verdict)
        .fold(Status::Pass, Status::combine);
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn dispatch(cli: Cli) -> RunResult<ExitCode> {
    let out = cli.out;
    let status = match cli.command {
        Command::Solve { scenario } => run_one(
            &out,
            &scenario,
            RunOptions {
                certify: false,
                diagnose: false,
                plots: false,
            },
        )?,
        Command::Certify { scenario } => run_one(
            &out,
            &scenario,
            RunOptions {
                certify: true,
                diagnose: false,
                plots: true,
            },
        )?,
        Command::Diagnose { scenario } => run_one(
            &out,
            &scenario,
            RunOptions {
                certify: false,
                diagnose: true,
                plots: true,
            },
        )?,
        Command::Run { scenario } => run_one(&out, &scenario, RunOptions::ALL)?,
        Command::Suite => {
            let mut status = Status::Pass;
            for name in shipped::names() {
                status = status.combine(run_one(&out, name, RunOptions::ALL)?);
            }
            status
        }
        Command::List => {
            for name in shipped::names() {
                println!("{name}");
            }
            Status::Pass
        }
        Command::Sweep {
            template,
            axis,
            values,
            workers,
        } => {
            let template = load(&template)?;
            let axis: Axis = axis.parse()?;
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = run_sweep(&template, axis, &values, &out, workers)?;
            println!("{}", outcome.dir.join("sweep.csv").display());
            for r in &outcome.rows {
                println!(
                    "  {}={:<10} {:<12} {:<20} alpha={:<5} margin={}{}",
                    r.axis,
                    r.value,
                    r.verdict,
                    r.bound_name,
                    r.alpha,
                    r.margin.map_or("-".into(), |m| format!("{m:.6e}")),
                    if r.error.is_empty() { String::new() } else { format!(" ({})", r.error) }
                );
            }
            outcome.status()
        }
        Command::PhiCheck {
            regime,
            p,
            q,
            n,
            alpha,
            curvature_bound,
            lambda_max,
            samples,
            write,
        } => phi_check(regime, cli_params(p, q, n)?, alpha, curvature_bound, lambda_max, samples, write)?,
        Command::Constants {
            p,
            q,
            n,
            alpha,
            delta_sweep,
        } => constants(p, q, n, alpha, delta_sweep)?,
        Command::Report { dir } => return report(&dir),
        Command::Plot { dir, kind } => {
            let kinds = match kind {
                None => PlotKind::ALL.to_vec(),
                Some(k) => vec![PlotKind::from_letter(&k).ok_or_else(|| RunError::Config {
                    field: "kind".into(),
                    reason: format!("unknown plot kind `{k}`; expected a, b, c or d"),
                })?],
            };
            let summary = plot::render(&dir, &kinds)?;
            for s in &summary.skipped {
                eprintln!("{s}");
            }
            for p in &summary.written {
                println!("{}", p.display());
            }
            if summary.written.is_empty() {
                return Ok(ExitCode::from(EXIT_EMPTY));
            }
            Status::Pass
        }
    };
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_OTHER })
        }
    }
}
