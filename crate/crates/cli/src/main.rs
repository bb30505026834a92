//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags or argument
//! grammar, handled by the parser), 1 for runtime failures (unreadable
//! files, rejected states, failed fits), each with a single diagnostic
//! line on stderr.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qmetro::{
    bayes_posterior, classify_depth, fit_calibration, ml_estimate, optimize_axes, qfi,
    sample_outcomes, witness_value, CalibrationData, CollectiveGenerator, DensityMatrix,
    FitFamily, ProbTable, ProbabilityModel, TiltMode,
};

use qmetro_cli::config::{parse_axes, parse_theta, ExperimentConfig, NoiseConfig, StateSpec};
use qmetro_cli::experiment::run_experiment;
use qmetro_cli::report::{merge_reports, write_curves, write_fisher, CurveRow, FisherRow};

#[derive(Parser)]
#[command(
    name = "qmetro",
    version,
    about = "Collective-rotation interferometry: information bounds, witnesses, and phase-estimation campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information of a probe, with entanglement depth
    Qfi(QfiArgs),
    /// Fidelity witness for genuine four-partite entanglement
    Witness(WitnessArgs),
    /// Probability and Fisher-information curves over a phase interval
    Curves(CurvesArgs),
    /// Fit apparatus noise to calibration counts
    Calibrate(CalibrateArgs),
    /// One-shot ML and Bayesian phase estimates
    Estimate(EstimateArgs),
    /// Monte-Carlo estimation campaign writing a report bundle
    Campaign(CampaignArgs),
    /// Merge campaign report bundles
    Report(ReportArgs),
}

/// Probe selection shared by most subcommands.
#[derive(Args)]
struct StateArgs {
    /// Probe state: dicke:N:K, ghz:N, plus:N, or product:N:re,im,re,im
    #[arg(long, value_parser = parse_state_arg, conflicts_with = "state_file")]
    state: Option<StateSpec>,
    /// Probe density matrix from a tomography JSON file {dim, re, im}
    #[arg(long, value_name = "FILE")]
    state_file: Option<PathBuf>,
}

impl StateArgs {
    fn spec(&self) -> StateSpec {
        if let Some(spec) = &self.state {
            spec.clone()
        } else if let Some(path) = &self.state_file {
            StateSpec::File { path: path.clone() }
        } else {
            StateSpec::Dicke { n: 4, k: 2 }
        }
    }

    fn resolve(&self) -> Result<DensityMatrix> {
        let (rho, warnings) = self.spec().build()?;
        for warning in warnings {
            eprintln!("warning: {warning}");
        }
        Ok(rho)
    }
}

/// Apparatus noise flags shared by model-based subcommands.
#[derive(Args)]
struct NoiseArgs {
    /// Rotation-axis offset in radians; repeat the flag for per-qubit values
    #[arg(long = "tilt", value_name = "RAD", value_parser = parse_theta_arg)]
    tilt: Vec<f64>,
    /// White-noise admixture probability in [0, 1]
    #[arg(long, default_value_t = 0.0)]
    white_noise: f64,
    /// Interference visibility in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
}

impl NoiseArgs {
    fn to_config(&self) -> NoiseConfig {
        NoiseConfig {
            misalignment: self.tilt.clone(),
            white_noise: self.white_noise,
            visibility: self.visibility,
        }
    }
}

/// Phase-interval flags shared by grid-based subcommands.
#[derive(Args)]
struct IntervalArgs {
    /// Lower end of the phase interval (radians or `0.1pi` form)
    #[arg(long, default_value = "0", value_parser = parse_theta_arg)]
    theta_min: f64,
    /// Upper end of the phase interval
    #[arg(long, default_value = "0.5pi", value_parser = parse_theta_arg)]
    theta_max: f64,
}

fn parse_theta_arg(text: &str) -> Result<f64, String> {
    parse_theta(text).map_err(|e| format!("{e:#}"))
}

fn parse_state_arg(text: &str) -> Result<StateSpec, String> {
    StateSpec::parse(text).map_err(|e| format!("{e:#}"))
}

#[derive(Args)]
struct QfiArgs {
    #[command(flatten)]
    state: StateArgs,
    /// Generator axes: one letter for all qubits or a comma list per qubit
    #[arg(long, default_value = "y")]
    axes: String,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Random restarts for the axis optimizer
    #[arg(long, default_value_t = 16)]
    restarts: usize,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    state: StateArgs,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value = "y")]
    axes: String,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    interval: IntervalArgs,
    /// Number of phase points
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output directory for curves.csv and fisher.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value = "y")]
    axes: String,
    /// Calibration counts CSV with header theta,mu,count
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Parameter family: tilt, standard (tilt+white noise), full
    /// (tilt+white noise+visibility), or per-qubit
    #[arg(long, default_value = "standard")]
    family: String,
    /// Write the fitted noise parameters as JSON
    #[arg(long, value_name = "FILE")]
    noise_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value = "y")]
    axes: String,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    interval: IntervalArgs,
    /// Likelihood-grid resolution
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
    /// Outcome file with header mu and one recorded outcome per line
    #[arg(long, value_name = "FILE", conflicts_with_all = ["theta0", "m"])]
    outcomes: Option<PathBuf>,
    /// True phase for a synthetic sample (radians or `0.2pi` form)
    #[arg(long, value_parser = parse_theta_arg, required_unless_present = "outcomes", requires = "m")]
    theta0: Option<f64>,
    /// Synthetic sample size
    #[arg(long, required_unless_present = "outcomes", requires = "theta0")]
    m: Option<usize>,
    /// Seed for the synthetic sample
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct CampaignArgs {
    /// Full experiment configuration file; other model flags are rejected
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = ["state", "state_file", "theta0", "m", "reps", "seed", "tilt", "white_noise", "visibility"]
    )]
    config: Option<PathBuf>,
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value = "y")]
    axes: String,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    interval: IntervalArgs,
    /// True phase of the campaign cell
    #[arg(long, value_parser = parse_theta_arg, required_unless_present = "config")]
    theta0: Option<f64>,
    /// Events per experiment
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    /// Experiments per cell
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Base seed of the deterministic schedule
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2001)]
    grid_points: usize,
    #[arg(long, default_value_t = 201)]
    curve_points: usize,
    /// Report bundle directory (overrides the config's output_dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory for the merged bundle
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Report bundles to merge, in order
    #[arg(required = true, value_name = "BUNDLE")]
    inputs: Vec<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Qfi(args) => cmd_qfi(args),
        Command::Witness(args) => cmd_witness(args),
        Command::Curves(args) => cmd_curves(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Campaign(args) => cmd_campaign(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn build_model(
    state: &StateArgs,
    axes: &str,
    noise: &NoiseArgs,
) -> Result<ProbabilityModel> {
    let probe = state.resolve()?;
    let generator = CollectiveGenerator::new(&parse_axes(axes, probe.n_qubits())?)?;
    let mut model = ProbabilityModel::new(probe, generator)?;
    let noise = noise.to_config().to_model();
    if !noise.is_trivial() {
        model = model.with_noise(noise)?;
    }
    Ok(model)
}

fn cmd_qfi(args: QfiArgs) -> Result<()> {
    let model = build_model(&args.state, &args.axes, &args.noise)?;
    let fixed = qfi(model.effective_probe(), model.generator())?;
    println!("{fixed:.6}");
    let optimized = optimize_axes(model.effective_probe(), args.restarts, 1e-10)?;
    let depth = classify_depth(optimized.value, model.n_qubits())?;
    println!("optimized {:.6}", optimized.value);
    println!("depth {}", depth.certified_depth);
    Ok(())
}

fn cmd_witness(args: WitnessArgs) -> Result<()> {
    let rho = args.state.resolve()?;
    let value = witness_value(&rho)?;
    println!("{value:.6}");
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> Result<()> {
    let model = build_model(&args.state, &args.axes, &args.noise)?;
    if args.points < 2 {
        bail!("need at least 2 points, got {}", args.points);
    }
    let (lo, hi) = (args.interval.theta_min, args.interval.theta_max);
    if !(lo < hi) {
        bail!("theta-min {lo} must be below theta-max {hi}");
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let outcomes = model.measurement().outcomes().to_vec();
    let mut curve_rows = Vec::new();
    let mut fisher_rows = Vec::new();
    for i in 0..args.points {
        let theta = lo + (hi - lo) * i as f64 / (args.points - 1) as f64;
        let ps = model.outcome_probabilities(theta)?;
        let dps = model.outcome_derivatives(theta)?;
        for ((&mu, &p), &dp) in outcomes.iter().zip(&ps).zip(&dps) {
            curve_rows.push(CurveRow { theta, mu, p, dp });
        }
        let info = model.fisher_information(theta)?;
        fisher_rows.push(FisherRow { theta, f: info.value, divergent: info.divergent });
    }
    write_curves(&args.out.join("curves.csv"), &curve_rows)?;
    write_fisher(&args.out.join("fisher.csv"), &fisher_rows)?;
    println!("wrote {} phase points to {}", args.points, args.out.display());
    Ok(())
}

fn parse_family(text: &str) -> Result<FitFamily> {
    Ok(match text {
        "tilt" => FitFamily { tilt: TiltMode::Collective, fit_white_noise: false, fit_visibility: false },
        "standard" => FitFamily::standard(),
        "full" => FitFamily::full(),
        "per-qubit" => FitFamily { tilt: TiltMode::PerQubit, fit_white_noise: true, fit_visibility: false },
        other => bail!("unknown family {other:?}: expected tilt, standard, full, or per-qubit"),
    })
}

fn read_calibration_csv(path: &PathBuf, n_qubits: usize) -> Result<CalibrationData> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read calibration data {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("theta,mu,count") => {}
        other => bail!("{} has header {other:?}, expected theta,mu,count", path.display()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("{} row {i} has {} fields, expected 3", path.display(), fields.len());
        }
        let theta: f64 = fields[0]
            .trim()
            .parse()
            .with_context(|| format!("{} row {i}: bad theta", path.display()))?;
        let mu: i32 = fields[1]
            .trim()
            .parse()
            .with_context(|| format!("{} row {i}: bad outcome", path.display()))?;
        let count: u64 = fields[2]
            .trim()
            .parse()
            .with_context(|| format!("{} row {i}: bad count", path.display()))?;
        rows.push((theta, mu, count));
    }
    Ok(CalibrationData::from_rows(n_qubits, &rows)?)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let probe = args.state.resolve()?;
    let generator = CollectiveGenerator::new(&parse_axes(&args.axes, probe.n_qubits())?)?;
    let model = ProbabilityModel::new(probe, generator)?;
    let family = parse_family(&args.family)?;
    let data = read_calibration_csv(&args.data, model.n_qubits())?;
    let fit = fit_calibration(&model, &data, &family)?;
    let tilts: Vec<String> = fit.noise.misalignment.iter().map(|t| format!("{t:.6}")).collect();
    if tilts.is_empty() {
        println!("tilt none");
    } else {
        println!("tilt {}", tilts.join(" "));
    }
    println!("white_noise {:.6}", fit.noise.white_noise);
    println!("visibility {:.6}", fit.noise.visibility);
    println!("residual_rms {:.6e}", fit.residual_rms);
    println!("iterations {}", fit.iterations);
    if let Some(path) = &args.noise_out {
        let mut text = serde_json::to_string_pretty(&NoiseConfig::from_model(&fit.noise))?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn read_outcome_file(path: &PathBuf, model: &ProbabilityModel) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read outcomes {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("mu") => {}
        other => bail!("{} has header {other:?}, expected mu", path.display()),
    }
    let measurement = model.measurement();
    let mut counts = vec![0u64; measurement.outcomes().len()];
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mu: i32 = line
            .parse()
            .with_context(|| format!("{} row {i}: bad outcome", path.display()))?;
        let index = measurement
            .index_of(mu)
            .with_context(|| format!("{} row {i}: outcome {mu} is not measurable", path.display()))?;
        counts[index] += 1;
    }
    Ok(counts)
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let model = build_model(&args.state, &args.axes, &args.noise)?;
    let (lo, hi) = (args.interval.theta_min, args.interval.theta_max);
    let table = ProbTable::build(&model, lo, hi, args.grid_points)?;
    let counts = match &args.outcomes {
        Some(path) => read_outcome_file(path, &model)?,
        None => {
            // clap guarantees theta0 and m are present here.
            let theta0 = args.theta0.expect("required without --outcomes");
            let m = args.m.expect("required without --outcomes");
            let sample = sample_outcomes(&model, theta0, m, args.seed)?;
            sample.counts(table.n_outcomes())
        }
    };
    let events: u64 = counts.iter().sum();
    let ml = ml_estimate(&table, &counts)?;
    let bayes = bayes_posterior(&table, &counts)?;
    println!("events {events}");
    println!("ml {:.6}", ml.theta_est);
    println!("bayes {:.6}", bayes.theta_est);
    println!("confidence {:.6}", bayes.confidence);
    println!("clipped {}", bayes.clipped);
    Ok(())
}

fn cmd_campaign(args: CampaignArgs) -> Result<()> {
    let config = if let Some(path) = &args.config {
        let mut config = ExperimentConfig::load(path)?;
        if let Some(out) = &args.out {
            config.output_dir = out.clone();
        }
        config
    } else {
        let theta0 = args.theta0.expect("required without --config");
        let m = args.m.expect("required without --config");
        ExperimentConfig {
            state: args.state.spec(),
            axes: args.axes.clone(),
            noise: args.noise.to_config(),
            theta0_list: vec![theta0],
            m_list: vec![m],
            repetitions: args.reps,
            base_seed: args.seed,
            interval: [args.interval.theta_min, args.interval.theta_max],
            grid_points: args.grid_points,
            curve_points: args.curve_points,
            restarts: 16,
            output_dir: args.out.clone().unwrap_or_else(|| PathBuf::from("report")),
        }
    };
    let outcome = run_experiment(&config)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    println!("qfi {:.6}", outcome.summary.qfi);
    println!("qfi_opt {:.6}", outcome.summary.qfi_opt);
    println!("depth {}", outcome.summary.depth);
    if let Some(witness) = outcome.summary.witness {
        println!("witness {witness:.6}");
    }
    println!("cells {}", outcome.cells);
    println!("failures {}", outcome.failures);
    println!("wrote {}", outcome.output_dir.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    merge_reports(&args.inputs, &args.out)?;
    println!("merged {} bundles into {}", args.inputs.len(), args.out.display());
    Ok(())
}
