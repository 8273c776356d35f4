use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use psk_core::cert::{certify, Certificate};
use psk_core::engine::{EngineError, Prover};
use psk_core::library::retrieve_hints;
use psk_core::repair::{self, proposer, RepairConfig};
use psk_core::sketch::{render_sketch, WellFormedReport};
use psk_core::store::StoredCert;
use psk_core::{
    claimed_sequent, extract, parse_sketch, validate_sketch, Kernel, LemmaLibrary, ProofObject, ProverConfig, Sketch,
    Store, Verdict,
};

mod output;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "psk",
    version,
    about = "Check typed proof sketches against a small trusted kernel"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a sketch.
    Check {
        file: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
    },
    /// Print the obligations of a sketch.
    Obligations {
        file: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
    },
    /// Discharge all obligations and assemble the theorem.
    Prove {
        file: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        /// Write the proof object here, and its certificates to `<path>.certs`.
        #[arg(long)]
        emit_proof: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the repair loop against an external proposer.
    Repair {
        file: PathBuf,
        /// Shell command or http(s) URL.
        #[arg(long)]
        proposer: String,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        max_rounds: u64,
        /// Seconds to wait for each proposer reply.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
        #[arg(long)]
        lib: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        /// Write the final sketch here.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        emit_proof: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Replay a proof object against the theorem of a sketch.
    Replay {
        proof: PathBuf,
        #[arg(long)]
        claim: PathBuf,
        #[arg(long)]
        lib: Option<PathBuf>,
        /// Certificate sidecar; defaults to `<proof>.certs` when present.
        #[arg(long)]
        certs: Option<PathBuf>,
    },
    /// Replay every cached entry.
    Audit {
        #[arg(long)]
        store: PathBuf,
    },
    /// Remove corrupt or non-replaying cache entries.
    Gc {
        #[arg(long)]
        store: PathBuf,
    },
    /// Lemma retrieval.
    Lemmas {
        #[command(subcommand)]
        command: LemmasCommand,
    },
}

#[derive(Subcommand, Debug)]
enum LemmasCommand {
    /// Rank library lemmas against each goal of a sketch.
    Search {
        file: PathBuf,
        #[arg(long)]
        lib: PathBuf,
        #[arg(short, default_value_t = 5)]
        k: usize,
    },
}

#[derive(clap::Args, Debug)]
struct StoreArgs {
    /// Cache directory (default: $PSK_STORE, else `.psk-store` beside the sketch).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Keep the cache in memory only.
    #[arg(long, conflicts_with = "store")]
    no_store: bool,
}

/// Exit statuses.
enum Failure {
    Rejected,
    Input(String),
    Internal(String),
    /// Already reported on stdout.
    Reported(u8),
}

type Outcome = Result<(), Failure>;

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Rejected => 1,
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
            Failure::Reported(c) => *c,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_sketch(path: &Path) -> Result<Sketch, Failure> {
    let text = read(path)?;
    parse_sketch(&text).map_err(|e| {
        let (line, col) = e.location();
        Failure::Input(format!("{}:{line}:{col}: {e}", path.display()))
    })
}

fn load_lib(path: Option<&Path>) -> Result<LemmaLibrary, Failure> {
    match path {
        None => Ok(LemmaLibrary::default()),
        Some(p) => LemmaLibrary::parse(&read(p)?).map_err(|e| {
            let (line, col) = e.location();
            Failure::Input(format!("{}:{line}:{col}: {e}", p.display()))
        }),
    }
}

fn open_store(args: &StoreArgs, sketch: &Path) -> Result<Store, Failure> {
    if args.no_store {
        return Ok(Store::in_memory());
    }
    let root = match (&args.store, std::env::var_os("PSK_STORE")) {
        (Some(p), _) => p.clone(),
        (None, Some(env)) => PathBuf::from(env),
        (None, None) => sketch.parent().unwrap_or(Path::new(".")).join(".psk-store"),
    };
    Store::open(&root).map_err(|e| Failure::Internal(e.to_string()))
}

fn invalid(fmt: Format, report: &WellFormedReport) -> Failure {
    output::well_formed(fmt, report);
    Failure::Reported(2)
}

fn write(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn emit_proof(path: &Path, acc: &psk_core::engine::Accepted) -> Outcome {
    write(path, &acc.proof.to_text())?;
    let certs = serde_json::to_string_pretty(&acc.certificates).expect("certificates serialize");
    write(&certs_path(path), &certs)
}

fn certs_path(proof: &Path) -> PathBuf {
    let mut s = proof.as_os_str().to_owned();
    s.push(".certs");
    PathBuf::from(s)
}

fn check(fmt: Format, file: &Path, lib: Option<&Path>) -> Outcome {
    let s = load_sketch(file)?;
    let lib = lib.map(|p| load_lib(Some(p))).transpose()?;
    let report = validate_sketch(&s, lib.as_ref());
    output::well_formed(fmt, &report);
    if report.ok {
        Ok(())
    } else {
        Err(Failure::Reported(2))
    }
}

fn obligations(fmt: Format, file: &Path, lib: Option<&Path>) -> Outcome {
    let s = load_sketch(file)?;
    let lib = lib.map(|p| load_lib(Some(p))).transpose()?;
    let report = validate_sketch(&s, lib.as_ref());
    if report
        .issues
        .iter()
        .any(|i| i.kind != psk_core::sketch::IssueKind::UnknownFact)
    {
        return Err(invalid(fmt, &report));
    }
    output::obligations(fmt, &extract(&s, lib.as_ref()));
    Ok(())
}

fn prove(fmt: Format, file: &Path, lib: Option<&Path>, store: &StoreArgs, emit: Option<&Path>, jobs: usize) -> Outcome {
    let s = load_sketch(file)?;
    let lib = load_lib(lib)?;
    let store = open_store(store, file)?;
    let cfg = ProverConfig {
        jobs: jobs.max(1),
        ..ProverConfig::default()
    };
    let report = match Prover::new(&s, &lib, &store, cfg).run() {
        Ok(r) => r,
        Err(EngineError::Invalid(wf)) => return Err(invalid(fmt, &wf)),
    };
    output::prove(fmt, &s, &report);
    match &report.verdict {
        Verdict::Accepted(acc) => {
            if let Some(p) = emit {
                emit_proof(p, acc)?;
            }
            Ok(())
        }
        Verdict::Rejected(_) => Err(Failure::Rejected),
    }
}

#[allow(clippy::too_many_arguments)]
fn repair_cmd(
    fmt: Format,
    file: &Path,
    endpoint: &str,
    max_rounds: usize,
    timeout: Duration,
    lib: Option<&Path>,
    store: &StoreArgs,
    out: Option<&Path>,
    emit: Option<&Path>,
    jobs: usize,
) -> Outcome {
    let s = load_sketch(file)?;
    let lib = load_lib(lib)?;
    let store = open_store(store, file)?;
    let mut p = proposer::connect(endpoint, timeout).map_err(|e| Failure::Internal(e.to_string()))?;
    let cfg = RepairConfig {
        max_rounds,
        round_timeout: timeout,
        prover: ProverConfig {
            jobs: jobs.max(1),
            ..ProverConfig::default()
        },
    };
    let outcome = match repair::run(&s, &lib, &store, &mut p, &cfg) {
        Ok(o) => o,
        Err(EngineError::Invalid(wf)) => return Err(invalid(fmt, &wf)),
    };
    output::repair(fmt, &outcome);
    if let Some(path) = out {
        write(path, &render_sketch(&outcome.sketch))?;
    }
    match &outcome.report.verdict {
        Verdict::Accepted(acc) => {
            if let Some(p) = emit {
                emit_proof(p, acc)?;
            }
            Ok(())
        }
        Verdict::Rejected(_) => Err(Failure::Rejected),
    }
}

fn replay(fmt: Format, proof: &Path, claim: &Path, lib: Option<&Path>, certs: Option<&Path>) -> Outcome {
    let po = ProofObject::parse(&read(proof)?).map_err(|e| Failure::Input(format!("{}: {e}", proof.display())))?;
    let s = load_sketch(claim)?;
    let lib = load_lib(lib)?;
    let claimed = claimed_sequent(&s, &lib);
    let kernel = Kernel::new(s.signature.clone());
    let sidecar = certs
        .map(Path::to_path_buf)
        .or_else(|| Some(certs_path(proof)).filter(|p| p.exists()));
    let mut result = Ok(());
    if let Some(path) = sidecar {
        let stored: Vec<StoredCert> =
            serde_json::from_str(&read(&path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        for c in &stored {
            let admitted = Certificate::parse(&c.kind, &c.text)
                .map_err(|e| e.to_string())
                .and_then(|cert| certify(&c.sequent, &cert).map_err(|e| e.to_string()))
                .and_then(|tok| kernel.admit_certified(&c.sequent, &tok).map_err(|e| e.to_string()));
            if let Err(e) = admitted {
                result = Err(format!("certificate for `{}` rejected: {e}", c.sequent));
                break;
            }
        }
    }
    let result = result.and_then(|_| kernel.replay(&po, &claimed).map_err(|e| e.to_string()));
    output::replay(fmt, &claimed, &result);
    result.map(|_| ()).map_err(|_| Failure::Rejected)
}

fn audit(fmt: Format, root: &Path, gc: bool) -> Outcome {
    if !root.is_dir() {
        return Err(Failure::Input(format!("{}: no such store", root.display())));
    }
    let store = Store::open(root).map_err(|e| Failure::Internal(e.to_string()))?;
    if gc {
        let removed = store.gc().map_err(|e| Failure::Internal(e.to_string()))?;
        output::gc(fmt, removed);
        return Ok(());
    }
    let report = store.audit();
    output::audit(fmt, &report);
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Rejected)
    }
}

fn lemmas(fmt: Format, file: &Path, lib: &Path, k: usize) -> Outcome {
    let s = load_sketch(file)?;
    let lib = load_lib(Some(lib))?;
    let goals: Vec<(String, psk_core::Formula, Vec<String>)> = s
        .nodes()
        .into_iter()
        .map(|n| (n.id.clone(), n.goal.clone(), retrieve_hints(&n.goal, &lib, k)))
        .collect();
    output::lemmas(fmt, &lib, &goals);
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let fmt = cli.format;
    match cli.command {
        Command::Check { file, lib } => check(fmt, &file, lib.as_deref()),
        Command::Obligations { file, lib } => obligations(fmt, &file, lib.as_deref()),
        Command::Prove {
            file,
            lib,
            store,
            emit_proof,
            jobs,
        } => prove(fmt, &file, lib.as_deref(), &store, emit_proof.as_deref(), jobs),
        Command::Repair {
            file,
            proposer,
            max_rounds,
            timeout,
            lib,
            store,
            output,
            emit_proof,
            jobs,
        } => repair_cmd(
            fmt,
            &file,
            &proposer,
            max_rounds as usize,
            Duration::from_secs(timeout),
            lib.as_deref(),
            &store,
            output.as_deref(),
            emit_proof.as_deref(),
            jobs,
        ),
        Command::Replay {
            proof,
            claim,
            lib,
            certs,
        } => replay(fmt, &proof, &claim, lib.as_deref(), certs.as_deref()),
        Command::Audit { store } => audit(fmt, &store, false),
        Command::Gc { store } => audit(fmt, &store, true),
        Command::Lemmas {
            command: LemmasCommand::Search { file, lib, k },
        } => lemmas(fmt, &file, &lib, k),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let fmt = cli.format;
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(m) | Failure::Internal(m) => output::error(fmt, f.code(), m),
                Failure::Rejected | Failure::Reported(_) => {}
            }
            ExitCode::from(f.code())
        }
    }
}
