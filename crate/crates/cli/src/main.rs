use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sympstab::horn::{self, OrbitSpec, SpreadSchedule};
use sympstab::hull;
use sympstab::io::{parse_hamiltonian_json, parse_tuple, read_cloud_csv, write_cloud_csv};
use sympstab::normalform;
use sympstab::stability::{self, TolProfile, TolProfileName};
use sympstab::symplectic::QuadraticHamiltonian;
use sympstab::Error;

const TOOL: &str = "sympstab";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const THREADS_VAR: &str = "SYMPSTAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Profile {
    Default,
    Strict,
}

impl Profile {
    fn tolerances(self) -> TolProfile {
        match self {
            Profile::Default => TolProfile::from_name(TolProfileName::Default),
            Profile::Strict => TolProfile::from_name(TolProfileName::Strict),
        }
    }
}

/// Stability, normal forms and Horn sampling for quadratic Hamiltonians.
#[derive(Debug, Parser)]
#[command(name = "sympstab", version)]
struct Cli {
    /// Tolerance profile for classification.
    #[arg(long, value_enum, default_value = "default", global = true)]
    tol_profile: Profile,
    /// Seed for every randomized step.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a Hamiltonian and report membership in D, E and F.
    Analyze { matrix: PathBuf },
    /// Normal form, frequencies and Krein signs of a strongly stable Hamiltonian.
    NormalForm {
        matrix: PathBuf,
        /// Include the symplectic diagonalizer S.
        #[arg(long)]
        emit_s: bool,
    },
    /// Sample F(H1 + H2) over the orbits of D_lambda and D_mu into a CSV cloud.
    HornSample(HornSampleArgs),
    /// Exact convex hull summary of a cloud.
    Hull {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Midpoint realizability test on pairs drawn from a cloud.
    Convexity {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = horn::DEFAULT_SEARCH_BUDGET)]
        budget: usize,
    },
    /// Survival rates of strong stability under random symmetric perturbations.
    Perturb {
        matrix: PathBuf,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Radii as fractions of the certified margin.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2")]
        fractions: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct HornSampleArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    #[arg(long, allow_hyphen_values = true)]
    mu: String,
    #[arg(short = 'N', long = "count", default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = SpreadSchedule::default().frame_spread)]
    frame_spread: f64,
    #[arg(long, default_value_t = SpreadSchedule::default().max_radius)]
    max_radius: f64,
    #[arg(long, default_value_t = SpreadSchedule::default().near_fraction)]
    near_fraction: f64,
    #[arg(long, default_value_t = SpreadSchedule::default().near_radius)]
    near_radius: f64,
    #[arg(long, default_value_t = SpreadSchedule::default().unitary_mix)]
    unitary_mix: f64,
}

/// Failure of a run, with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Io { path: PathBuf, message: String },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Core(e) if e.is_numerical() => "numerical",
            Failure::Core(_) => "validation",
            Failure::Io { .. } => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io { path, message } => format!("{}: {message}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type RunResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn read_hamiltonian(path: &Path) -> RunResult<QuadraticHamiltonian> {
    let text = fs::read_to_string(path).map_err(io_failure(path))?;
    Ok(parse_hamiltonian_json(&text)?)
}

fn read_cloud(path: &Path) -> RunResult<horn::HornSampleCloud> {
    let file = fs::File::open(path).map_err(io_failure(path))?;
    Ok(read_cloud_csv(BufReader::new(file))?)
}

fn rows(m: &sympstab::linalg::Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn envelope(command: &str, config: serde_json::Value, result: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": config,
        "result": result,
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> RunResult<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(io_failure(path)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(io_failure(Path::new("<stdout>")))
        }
    }
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    emit(out, text.as_bytes())
}

fn base_config(cli: &Cli) -> serde_json::Value {
    json!({ "tol_profile": cli.tol_profile, "seed": cli.seed, "out": cli.out })
}

fn with(mut config: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    if let (Some(c), Some(e)) = (config.as_object_mut(), extra.as_object()) {
        c.extend(e.clone());
    }
    config
}

fn run(cli: &Cli) -> RunResult<()> {
    let tol = cli.tol_profile.tolerances();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Analyze { matrix } => {
            let h = read_hamiltonian(matrix)?;
            let report = stability::classify(&h, &tol)?;
            let membership = stability::membership(&h, &tol)?;
            let config = with(base_config(cli), json!({ "matrix": matrix }));
            emit_json(out, &envelope("analyze", config, json!({ "report": report, "membership": membership })))
        }
        Command::NormalForm { matrix, emit_s } => {
            let h = read_hamiltonian(matrix)?;
            let nf = normalform::normal_form(&h, &tol)?;
            let s = nf.diagonalizer.matrix();
            let residual_tol = tol.real_part * h.matrix().norm() * nf.diagonalizer.condition();
            let frequencies: Vec<f64> = nf.lambdas.iter().map(|l| l.abs()).collect();
            let krein_signs: Vec<i8> = nf.lambdas.iter().map(|l| if *l > 0.0 { 1 } else { -1 }).collect();
            let mut result = json!({
                "lambdas": nf.lambdas,
                "frequencies": frequencies,
                "krein_signs": krein_signs,
                "spectrum": nf.frequencies,
                "residual": nf.residual,
                "residual_tol": residual_tol,
                "residual_ok": nf.residual <= residual_tol,
                "diagonalizer_condition": nf.diagonalizer.condition(),
            });
            if *emit_s {
                result["diagonalizer"] = json!(rows(s));
            }
            let config = with(base_config(cli), json!({ "matrix": matrix, "emit_s": emit_s }));
            emit_json(out, &envelope("normal-form", config, result))
        }
        Command::HornSample(args) => {
            let lambda = OrbitSpec::new(parse_tuple(&args.lambda)?)?;
            let mu = OrbitSpec::new(parse_tuple(&args.mu)?)?;
            let schedule = SpreadSchedule {
                frame_spread: args.frame_spread,
                max_radius: args.max_radius,
                near_fraction: args.near_fraction,
                near_radius: args.near_radius,
                unitary_mix: args.unitary_mix,
            };
            let cloud = horn::horn_sample(&lambda, &mu, args.count, cli.seed, &schedule)?;
            let mut buf = Vec::new();
            write_cloud_csv(&cloud, &mut buf)?;
            emit(out, &buf)?;
            if out.is_some() {
                let config = with(
                    base_config(cli),
                    json!({ "lambda": cloud.lambda, "mu": cloud.mu, "count": args.count, "schedule": schedule }),
                );
                let summary = json!({ "points": cloud.points.len(), "diagnostics": cloud.diagnostics });
                emit_json(None, &envelope("horn-sample", config, summary))?;
            }
            Ok(())
        }
        Command::Hull { input } => {
            let cloud = read_cloud(input)?;
            let summary = hull::hull_summary(&cloud.points)?;
            let config = with(
                base_config(cli),
                json!({ "in": input, "lambda": cloud.lambda, "mu": cloud.mu, "cloud_seed": cloud.seed }),
            );
            emit_json(out, &envelope("hull", config, json!(summary)))
        }
        Command::Convexity { input, pairs, budget } => {
            let cloud = read_cloud(input)?;
            let report = horn::convexity_probe(&cloud, *pairs, *budget, cli.seed)?;
            let config = with(
                base_config(cli),
                json!({
                    "in": input,
                    "pairs": pairs,
                    "budget": budget,
                    "lambda": cloud.lambda,
                    "mu": cloud.mu,
                    "cloud_seed": cloud.seed,
                }),
            );
            emit_json(out, &envelope("convexity", config, json!(report)))
        }
        Command::Perturb { matrix, trials, fractions } => {
            let h = read_hamiltonian(matrix)?;
            let report = stability::perturbation_probe(&h, *trials, fractions, cli.seed, &tol)?;
            let config = with(base_config(cli), json!({ "matrix": matrix, "trials": trials, "fractions": fractions }));
            emit_json(out, &envelope("perturb", config, json!(report)))
        }
    }
}

fn configure_threads() -> RunResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Failure::Core(Error::InvalidParameter(format!("{THREADS_VAR} must be a positive integer, got {value:?}"))))?;
    if threads == 0 {
        return Err(Failure::Core(Error::InvalidParameter(format!("{THREADS_VAR} must be positive"))));
    }
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn report_failure(f: &Failure) -> ExitCode {
    let code = f.exit_code();
    let diagnostic = json!({
        "tool": TOOL,
        "version": VERSION,
        "error": f.kind(),
        "message": f.message(),
        "exit_code": code,
    });
    eprintln!("{diagnostic}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(&f),
    }
}
