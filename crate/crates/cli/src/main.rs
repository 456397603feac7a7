use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hlf_spn::experiment::{self, case_study, ExperimentError, ExperimentSpec, Method};
use hlf_spn::hlf::{build_hlf_net, HlfConfig};
use hlf_spn::metrics::MrtMode;

const EXIT_PARSE: u8 = 2;
const EXIT_SIMULATION: u8 = 3;
const EXIT_OUTPUT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hlfspn",
    version,
    about = "Performance model of the Hyperledger Fabric transaction flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Random seed, shared by every point.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Confidence level of the reported intervals.
    #[arg(long, global = true)]
    confidence: Option<f64>,
    /// Little's-law variant for the mean response time.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Number of batches per point (fewer is faster and less precise).
    #[arg(long, global = true)]
    batches: Option<usize>,
    /// State-space cap for the exact solver.
    #[arg(long, global = true, default_value_t = experiment::DEFAULT_MAX_STATES)]
    max_states: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Literal,
    Effective,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its CSV files.
    Run { spec: PathBuf },
    /// Run one of the built-in case studies.
    CaseStudy {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
    },
    /// Print the net of a configuration file in Graphviz format.
    ExportDot { config: PathBuf },
    /// Print the net of a configuration file in the textual net format.
    ExportNet { config: PathBuf },
    /// Solve an experiment exactly through its CTMC (exponential timings only).
    Solve { spec: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::Evaluation { .. } => EXIT_SIMULATION,
            ExperimentError::Io { .. } => EXIT_OUTPUT,
            _ => EXIT_PARSE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })
}

fn parse_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    ExperimentSpec::from_toml_str(&read(path)?).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

impl Cli {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), Failure> {
        if let Some(s) = self.seed {
            spec.sim.seed = s;
        }
        if let Some(c) = self.confidence {
            spec.sim.confidence_level = c;
        }
        if let Some(b) = self.batches {
            spec.sim.batch_count = b;
        }
        if let Some(m) = self.mode {
            spec.mode = match m {
                Mode::Literal => MrtMode::Literal,
                Mode::Effective => MrtMode::Effective,
            };
        }
        spec.validate().map_err(Failure::from)
    }

    fn execute(&self, spec: &ExperimentSpec) -> Result<(), Failure> {
        eprintln!("running {}", spec.name);
        let outcome = experiment::run(spec, self.jobs)?;
        for path in experiment::write_outcome(spec, &outcome, &self.out_dir)? {
            println!("{}", path.display());
        }
        Ok(())
    }
}

fn load_config(path: &Path) -> Result<HlfConfig, Failure> {
    let mut cfg = HlfConfig::from_toml_str(&read(path)?).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })?;
    if cfg.arrival_delay.is_none() {
        // the delay only appears as a parameter value in exports
        cfg.arrival_delay = Some(1.0);
    }
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { spec } => {
            let mut s = parse_spec(spec)?;
            cli.apply(&mut s)?;
            cli.execute(&s)
        }
        Command::Solve { spec } => {
            let mut s = parse_spec(spec)?;
            s.method = Method::Exact {
                max_states: cli.max_states,
            };
            cli.apply(&mut s)?;
            cli.execute(&s)
        }
        Command::CaseStudy { id } => {
            for mut s in case_study(*id).expect("id range is checked by the parser") {
                cli.apply(&mut s)?;
                cli.execute(&s)?;
            }
            Ok(())
        }
        Command::ExportDot { config } | Command::ExportNet { config } => {
            let handle = build_hlf_net(&load_config(config)?).map_err(|e| Failure {
                code: EXIT_PARSE,
                message: e.to_string(),
            })?;
            match cli.command {
                Command::ExportDot { .. } => print!("{}", handle.net.to_dot()),
                _ => print!("{}", handle.net.to_text()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
