use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{debug, info};
use nfmem_core::fitkit::{fit_with_limit, read_fit_data, FitProblem, ModelId};
use nfmem_core::runner::{list_scenarios, run_scenario, Config, Override, Scenario, ScenarioId};
use nfmem_core::Error;

const EXIT_BAD_ARGS: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "nfmem", version, about = "Nanofiber EIT memory: scenario runner and curve fitter")]
struct Cli {
    /// TOML file overriding the built-in configuration; missing keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its CSV dataset.
    Sim {
        /// Scenario id, see `list`.
        scenario: String,
        /// `section.key=value` override; unit suffixes such as `_ns`, `_mw` or `_g` are accepted.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output CSV path; the CSV goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the photon-counting simulation.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a registered model to `x,y[,sigma]` data.
    Fit {
        /// saturation, lorentzian_od, decay_lifetime or eit_spectrum.
        model: String,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated initial parameters in model order (SI units).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        guess: Option<Vec<f64>>,
        /// Parameter to hold at its initial value; repeatable.
        #[arg(long)]
        freeze: Vec<String>,
        /// Write the fit result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
    },
    /// Print the scenario catalog.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Domain(_) | Error::NoRoot(_) | Error::EmptyScan | Error::GridResolution(_) | Error::Solver(_) | Error::EmptyWindow => EXIT_SOLVER,
        _ => EXIT_BAD_ARGS,
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn sim(config: &Config, scenario: &str, set: &[String], out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let id: ScenarioId = scenario.parse()?;
    let parameters = set.iter().map(|s| s.parse::<Override>()).collect::<Result<Vec<_>, _>>()?;
    let scenario = Scenario { id, parameters, seed, output_path: out.clone() };
    info!("running {id}");
    let output = run_scenario(&scenario, config)?;
    match out {
        Some(path) => {
            let report = serde_json::json!({
                "scenario": id.name(),
                "output": path,
                "config_digest": output.digest,
                "summary": output.summary,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("summary serializes"));
        }
        None => print!("{}", output.csv),
    }
    Ok(())
}

struct FitArgs {
    model: String,
    data: PathBuf,
    guess: Option<Vec<f64>>,
    freeze: Vec<String>,
    out: Option<PathBuf>,
    max_iterations: usize,
}

fn fit_command(args: FitArgs) -> Result<(), Failure> {
    let FitArgs { model, data, guess, freeze, out, max_iterations } = args;
    let model: ModelId = model.parse()?;
    let data = read_fit_data(&data)?;
    let guess = guess.unwrap_or_else(|| model.reference_parameters());
    let mut problem = FitProblem::new(model, data, guess);
    if !freeze.is_empty() {
        problem.frozen = freeze;
    }
    let result = fit_with_limit(&problem, max_iterations)?;
    debug!("{} iterations, chi2 {}", result.n_iterations, result.chi2);
    let text = serde_json::to_string_pretty(&result).expect("fit result serializes");
    match out {
        Some(path) => std::fs::write(&path, text + "\n").map_err(Error::from)?,
        None => println!("{text}"),
    }
    if !result.converged {
        return Err(Failure::NotConverged(format!("{model} fit stopped after {} iterations", result.n_iterations)));
    }
    Ok(())
}

fn list(json: bool) {
    let catalog = list_scenarios();
    if json {
        println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
        return;
    }
    for s in catalog {
        println!("{:<10} {:<8} {}", s.id.name(), s.figure, s.description);
        if let Some(t) = s.target {
            println!("{:<19} target: {t}", "");
        }
        for p in s.parameters {
            println!("{:<19} {} [{}]: {}", "", p.key, p.unit, p.description);
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List { json } => {
            list(json);
            Ok(())
        }
        Command::Sim { scenario, set, out, seed } => {
            load_config(cli.config.as_ref()).map_err(Failure::from).and_then(|c| sim(&c, &scenario, &set, out, seed))
        }
        Command::Fit { model, data, guess, freeze, out, max_iterations } => {
            fit_command(FitArgs { model, data, guess, freeze, out, max_iterations })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}
