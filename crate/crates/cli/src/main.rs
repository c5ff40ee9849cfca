use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use emac_core::emit::{self, format, CompileOptions, ModeSelection};
use emac_core::model::{validate_spec, validate_spec_document, DomainMap, EvidenceModel, JourneySpec, Limits};
use emac_core::oracle::{self, SimConfig};
use emac_core::parser::{self, Parsed};
use emac_core::plan::Coupling;
use emac_core::{Diagnostic, Error};

const EXIT_INVALID: u8 = 1;
const EXIT_GATE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

/// Compiles journey reliability specs into recording rules, burn-rate
/// alerts, rollout gates and a provenance report.
#[derive(Debug, Parser)]
#[command(name = "emac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Pessimistic,
    Optimistic,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Independent,
    Comonotone,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write recording rules, alerting rules, rollout gate and provenance.
    Compile {
        spec: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Exit 0 even when the objective verdict is "fail".
        #[arg(long)]
        no_gate: bool,
    },
    /// Check a spec, and its bindings when a model is given.
    Validate {
        spec: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print the derivation trace.
    Explain {
        spec: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the reference simulator.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "independent")]
        coupling: CouplingArg,
        /// Enumerate every joint outcome instead of sampling.
        #[arg(long)]
        enumerate: bool,
        /// Worker threads (default: all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Compare two compilations.
    Whatif {
        spec_a: PathBuf,
        model_a: PathBuf,
        spec_b: PathBuf,
        model_b: PathBuf,
    },
    /// Convert a journey script into a spec document.
    ParseScript {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Gate,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Gate => EXIT_GATE,
            Failure::Io(..) | Failure::Core(Error::Io(_)) => EXIT_IO,
            Failure::Core(Error::Resource(_)) => EXIT_RESOURCE,
            Failure::Core(_) => EXIT_INVALID,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn report(path: &Path, warnings: &[Diagnostic]) {
    for w in warnings {
        eprintln!("{}: {w}", path.display());
    }
}

fn load_spec(path: &Path) -> Result<JourneySpec, Failure> {
    let Parsed { value, warnings } = parser::load_spec_document(&read(path)?)?;
    report(path, &warnings);
    Ok(value)
}

fn load_model(path: &Path) -> Result<EvidenceModel, Failure> {
    let Parsed { value, warnings } = parser::load_model_document(&read(path)?)?;
    report(path, &warnings);
    Ok(value)
}

/// Validated pair; warnings go to stderr, errors become a failure.
fn load_pair(spec: &Path, model: &Path) -> Result<(JourneySpec, EvidenceModel), Failure> {
    let (s, m) = (load_spec(spec)?, load_model(model)?);
    let diags = validate_spec(&s, &m);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(Error::Invalid(diags).into());
    }
    report(spec, &diags);
    Ok((s, m))
}

/// Write-then-rename so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(path.to_path_buf(), e);
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Compile {
            spec,
            model,
            out,
            mode,
            no_gate,
        } => {
            let (s, m) = load_pair(&spec, &model)?;
            let options = CompileOptions {
                modes: mode.map(|m| match m {
                    Mode::Pessimistic => ModeSelection::Pessimistic,
                    Mode::Optimistic => ModeSelection::Optimistic,
                    Mode::Both => ModeSelection::Both,
                }),
                domains: DomainMap::new(),
            };
            let bundle = emit::compile(&s, &m, &options)?;
            for w in &bundle.warnings {
                eprintln!("warning: {w}");
            }
            fs::create_dir_all(&out).map_err(|e| Failure::Io(out.clone(), e))?;
            for (name, contents) in bundle.files() {
                write_atomic(&out.join(name), contents)?;
                println!("wrote {}", out.join(name).display());
            }
            let verdict = &bundle.trace.verdict;
            println!(
                "verdict: {}",
                if verdict.passed() { "pass" } else { "fail" }
            );
            if !verdict.passed() && !no_gate {
                return Err(Failure::Gate);
            }
            Ok(())
        }
        Command::Validate { spec, model } => {
            let s = load_spec(&spec)?;
            let diags = match model {
                Some(model) => validate_spec(&s, &load_model(&model)?),
                None => validate_spec_document(&s, Limits::default()),
            };
            if diags.iter().any(Diagnostic::is_error) {
                return Err(Error::Invalid(diags).into());
            }
            report(&spec, &diags);
            println!("{}: ok", spec.display());
            Ok(())
        }
        Command::Explain { spec, model, format } => {
            let (s, m) = load_pair(&spec, &model)?;
            let trace = emit::build_trace(&s, &m, &DomainMap::new())?;
            match format {
                Format::Json => print!("{}", format::to_json(&trace)),
                Format::Text => print!("{}", emit::render_trace_text(&trace)),
            }
            Ok(())
        }
        Command::Simulate {
            spec,
            model,
            trials,
            seed,
            coupling,
            enumerate,
            workers,
        } => {
            let (s, m) = load_pair(&spec, &model)?;
            let coupling = match coupling {
                CouplingArg::Independent => Coupling::Independent,
                CouplingArg::Comonotone => Coupling::Comonotone,
            };
            let mut cfg = if enumerate {
                SimConfig::enumerate(coupling)
            } else {
                SimConfig::monte_carlo(trials, seed, coupling)
            };
            cfg.workers = workers;
            if let Some(l) = s.objective.latency {
                if !cfg.percentiles.contains(&l.percentile) {
                    cfg.percentiles.push(l.percentile);
                    cfg.percentiles.sort_by(f64::total_cmp);
                }
            }
            let result = oracle::run(&s.expression, &m, &s.domains, &cfg)?;
            print!("{}", format::to_json(&result));
            Ok(())
        }
        Command::Whatif {
            spec_a,
            model_a,
            spec_b,
            model_b,
        } => {
            let (sa, ma) = load_pair(&spec_a, &model_a)?;
            let (sb, mb) = load_pair(&spec_b, &model_b)?;
            print!("{}", format::to_json(&emit::whatif(&sa, &ma, &sb, &mb)?));
            Ok(())
        }
        Command::ParseScript { file, out } => {
            let text = read(&file)?;
            let text = String::from_utf8_lossy(&text);
            let Parsed { value, warnings } = parser::parse_script(&text)?;
            report(&file, &warnings);
            let spec = JourneySpec::new(value.name, value.expression, value.objective);
            let doc = parser::spec_document_yaml(&spec);
            match out {
                Some(path) => write_atomic(&path, &doc)?,
                None => print!("{doc}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Io(path, e) => eprintln!("error: {}: {e}", path.display()),
                Failure::Gate => eprintln!("error: objective verdict is fail (use --no-gate to ignore)"),
            }
            ExitCode::from(failure.code())
        }
    }
}
