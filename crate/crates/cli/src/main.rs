use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wold_factor::factor::GaugeTag;
use wold_factor::io::{self, DensityInput};
use wold_factor::pipeline::{self, RunConfig, EXIT_CONDITION, EXIT_ERROR, EXIT_OK};
use wold_factor::simulate::{self, NoiseKind, SimulationConfig};
use wold_factor::spectra::{FrequencyGrid, PsdRepair, SpectralDensityField};
use wold_factor::wold;

#[derive(Parser)]
#[command(name = "wold-factor", version, about = "Spectral factorization and Wold representation of multivariate stationary series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a spectral density and write the Wold model.
    Factorize {
        #[command(flatten)]
        run: RunArgs,
        /// Model JSON; receives the report instead when a check fails and --report is absent.
        #[arg(long)]
        output: PathBuf,
        /// Separate report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate the regularity conditions only.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Report JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate a moving-average path to CSV.
    Simulate {
        /// MA specification JSON.
        #[arg(long)]
        input: PathBuf,
        /// Path CSV.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Discarded leading samples; defaults to the MA order.
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, value_enum, default_value_t = Noise::Complex)]
        noise: Noise,
    },
    /// Predict from a model and an observed path.
    Predict {
        /// Model JSON written by `factorize`.
        #[arg(long)]
        input: PathBuf,
        /// Observed path CSV.
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// Prediction output; CSV when the extension is `.csv`, JSON otherwise.
        #[arg(long)]
        output: PathBuf,
    },
    /// Round-trip an MA specification through factorization and simulation.
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Report JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo path length; 0 skips the simulation.
        #[arg(long, default_value_t = 20000)]
        length: usize,
        #[arg(long, default_value_t = 1e-6)]
        residual_tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Complex,
    Real,
}

#[derive(Args)]
struct RunArgs {
    /// Density source: MA, covariance or sampled-density JSON.
    #[arg(long)]
    input: PathBuf,
    /// Grid size N; defaults to the sampled density's grid or 4096.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    rank_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    causal_tol: f64,
    /// Truncation J = K; defaults to N/4.
    #[arg(long)]
    trunc: Option<usize>,
    /// Continue past a failed causality check.
    #[arg(long)]
    force_noncausal: bool,
    /// Clip negative eigenvalues of a covariance-derived density.
    #[arg(long)]
    psd_fix: bool,
}

impl RunArgs {
    fn load(&self) -> Result<(DensityInput, RunConfig)> {
        let input = io::read_density_input(&read(&self.input)?)
            .with_context(|| format!("reading {}", self.input.display()))?;
        let config = RunConfig {
            grid_size: self.grid.or(input.native_grid()).unwrap_or(4096),
            rank_tol: self.rank_tol,
            causal_tol: self.causal_tol,
            trunc: self.trunc,
            force_noncausal: self.force_noncausal,
            ..RunConfig::default()
        };
        config.validate()?;
        Ok((input, config))
    }

    fn density(&self) -> Result<(DensityInput, RunConfig, SpectralDensityField, Option<PsdRepair>)> {
        let (input, config) = self.load()?;
        let (f, repair) = input.density(FrequencyGrid::new(config.grid_size)?, self.psd_fix)?;
        Ok((input, config, f, repair))
    }

    fn header(&self, command: &str, input: &DensityInput, repair: &Option<PsdRepair>) -> Value {
        json!({
            "command": command,
            "input": self.input.display().to_string(),
            "input_kind": input.kind(),
            "psd_fix": self.psd_fix,
            "psd_repair": repair,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write(path, &serde_json::to_string_pretty(value)?)
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn status(code: i32) -> &'static str {
    if code == EXIT_OK {
        "PASS"
    } else {
        "FAIL"
    }
}

fn factorize(run: &RunArgs, output: &Path, report_path: Option<&Path>) -> Result<i32> {
    let (input, config, f, repair) = run.density()?;
    let out = pipeline::factorize(&f, &config)?;
    let code = out.report.exit_code();
    let report = merge(run.header("factorize", &input, &repair), serde_json::to_value(&out.report)?);
    if let Some(p) = report_path {
        write_json(p, &report)?;
    }
    match &out.model {
        Some(model) => {
            let tolerances = json!({
                "rank_tol": config.rank_tol,
                "causal_tol": config.causal_tol,
                "identity_tol": config.identity_tol,
                "ks_tol": wold::KS_TOL,
            });
            write(output, &io::write_model(model, tolerances, report)?)?;
            let ks_gap = out.report.ks.as_ref().map_or(f64::NAN, |k| k.relative_gap);
            println!(
                "factorize: {} rank={} N={} gauge={} two_route_gap={:.3e} ks_relative_gap={:.3e}",
                status(code),
                model.rank,
                config.grid_size,
                gauge_name(model.gauge),
                out.report.two_route_gap.unwrap_or(f64::NAN),
                ks_gap,
            );
        }
        None => {
            if report_path.is_none() {
                write_json(output, &report)?;
            }
            let reason = out
                .report
                .check
                .failed_condition
                .map(str::to_string)
                .or(out.report.stage_error.clone())
                .unwrap_or_else(|| "unknown".into());
            println!("factorize: FAIL condition={reason} rank={}", out.report.check.rank.rank);
        }
    }
    Ok(code)
}

fn gauge_name(g: GaugeTag) -> &'static str {
    match g {
        GaugeTag::Causal => "causal",
        GaugeTag::NonCausalGauge => "non-causal-gauge",
    }
}

fn check(run: &RunArgs, output: Option<&Path>) -> Result<i32> {
    let (input, config, f, repair) = run.density()?;
    let out = pipeline::check(&f, &config)?;
    let code = out.report.exit_code();
    let gauge = match out.report.conditions.causal {
        Some(true) => Some(GaugeTag::Causal),
        Some(false) => Some(GaugeTag::NonCausalGauge),
        None => None,
    };
    let extra = json!({ "gauge": gauge, "tail_energies": null });
    let report = merge(merge(run.header("check", &input, &repair), serde_json::to_value(&out.report)?), extra);
    if let Some(p) = output {
        write_json(p, &report)?;
    }
    println!(
        "check: {} rank={} agreement={:.4} failed_condition={}",
        status(code),
        out.report.rank.rank,
        out.report.rank.agreement,
        out.report.failed_condition.unwrap_or("none"),
    );
    Ok(code)
}

fn simulate_path(
    input: &Path,
    output: &Path,
    length: usize,
    seed: u64,
    burn_in: Option<usize>,
    noise: Noise,
) -> Result<i32> {
    let spec = io::read_ma_spec(&read(input)?).with_context(|| format!("reading {}", input.display()))?;
    let config = SimulationConfig {
        length,
        seed,
        burn_in,
        noise_kind: match noise {
            Noise::Complex => NoiseKind::ComplexCircularGaussian,
            Noise::Real => NoiseKind::RealGaussian,
        },
    };
    let path = simulate::ma_sample_path(&spec, &config)?;
    write(output, &io::write_path_csv(&path))?;
    println!("simulate: PASS d={} T={} seed={seed}", path.dimension(), path.len());
    Ok(EXIT_OK)
}

fn predict(input: &Path, path: &Path, steps: usize, output: &Path) -> Result<i32> {
    let model = io::read_model(&read(input)?).with_context(|| format!("reading {}", input.display()))?;
    let observed = io::read_path_csv(&read(path)?).with_context(|| format!("reading {}", path.display()))?;
    let noise = wold::recover_noise(&model, &observed)?;
    let prediction = wold::predict(&model, &noise, steps)?;
    let csv = output.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        write(output, &io::write_prediction_csv(&prediction))?;
    } else {
        write(output, &io::write_prediction_json(&prediction)?)?;
    }
    println!(
        "predict: PASS origin={} steps={steps} truncation_bias={:.3e}",
        prediction.origin, prediction.truncation_bias
    );
    Ok(EXIT_OK)
}

fn validate(run: &RunArgs, output: Option<&Path>, seed: u64, length: usize, residual_tol: f64) -> Result<i32> {
    let (input, config) = run.load()?;
    let DensityInput::Ma(spec) = &input else {
        bail!("validate needs an MA specification, got {}", input.kind());
    };
    let rt = simulate::round_trip(spec, &config)?;
    let monte_carlo = match (&rt.model, length) {
        (Some(model), l) if l > 0 => Some(simulate::monte_carlo_check(spec, model, &SimulationConfig::new(length, seed), 5)?),
        _ => None,
    };
    let residual_ok = rt.residual.is_some_and(|r| r <= residual_tol);
    let passed = residual_ok && rt.factorization.passed() && monte_carlo.as_ref().is_none_or(|m| m.passed);
    let code = if passed { EXIT_OK } else { EXIT_CONDITION };
    let report = merge(
        run.header("validate", &input, &None),
        json!({
            "tool": pipeline::TOOL_NAME,
            "version": pipeline::VERSION,
            "seed": seed,
            "residual_tol": residual_tol,
            "round_trip": rt,
            "monte_carlo": monte_carlo,
            "gauge": rt.gauge,
            "tail_energies": rt.factorization.tail_energies,
            "passed": passed,
        }),
    );
    if let Some(p) = output {
        write_json(p, &report)?;
    }
    println!(
        "validate: {} residual={:.3e} sigma_gap={:.3e} spec_minimum_phase={}",
        status(code),
        rt.residual.unwrap_or(f64::NAN),
        rt.sigma_gap.unwrap_or(f64::NAN),
        rt.spec_minimum_phase,
    );
    Ok(code)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Factorize { run, output, report } => factorize(&run, &output, report.as_deref()),
        Command::Check { run, output } => check(&run, output.as_deref()),
        Command::Simulate {
            input,
            output,
            length,
            seed,
            burn_in,
            noise,
        } => simulate_path(&input, &output, length, seed, burn_in, noise),
        Command::Predict {
            input,
            path,
            steps,
            output,
        } => predict(&input, &path, steps, &output),
        Command::Validate {
            run,
            output,
            seed,
            length,
            residual_tol,
        } => validate(&run, output.as_deref(), seed, length, residual_tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
