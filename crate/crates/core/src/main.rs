use std::io::{self, Read};
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use dske::attack::{case_report, AttackError, Case, ParamBounds, Scenario, SearchOptions};
use dske::dump::BoxDump;
use dske::exec::Execution;
use dske::sbox::{
    find_duplicate_free_selection, generate_s1, generate_s2, validate_params, BoxGrid,
    SecretParams, SubBoxSelection, WINDOW_SIZES,
};
use dske::session::{SessionConfig, DEFAULT_KEY_LEN};
use dske::wire::{run_initiator, HandshakeError, Responder, DEFAULT_PORT};

#[derive(Parser)]
#[command(
    name = "dske",
    version,
    about = "Session key exchange over paired substitution boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the residue and label boxes for a parameter set.
    Genbox {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Summarize a box dump (file, `-` for stdin) or the boxes for given parameters.
    Inspect {
        file: Option<PathBuf>,
        #[command(flatten)]
        params: OptParamArgs,
    },
    /// Run one session as initiator or responder.
    Handshake(HandshakeArgs),
    /// Count the session keys an attacker cannot rule out under a compromise case.
    Attack(AttackArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Vectors,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HandshakeRole {
    Init,
    Resp,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, env = "DSKE_P", allow_hyphen_values = true)]
    p: i64,
    #[arg(long, env = "DSKE_Q", allow_hyphen_values = true)]
    q: i64,
    #[arg(long, env = "DSKE_N", allow_hyphen_values = true)]
    n: i64,
}

#[derive(Args)]
struct OptParamArgs {
    #[arg(long, env = "DSKE_P", allow_hyphen_values = true)]
    p: Option<i64>,
    #[arg(long, env = "DSKE_Q", allow_hyphen_values = true)]
    q: Option<i64>,
    #[arg(long, env = "DSKE_N", allow_hyphen_values = true)]
    n: Option<i64>,
}

#[derive(Args)]
struct HandshakeArgs {
    #[arg(long, value_enum)]
    role: Option<HandshakeRole>,
    #[arg(long, default_value = "127.0.0.1")]
    addr: String,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[command(flatten)]
    params: ParamArgs,
    /// Window size; derived from the nonce when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_KEY_LEN)]
    key_len: usize,
    /// Session nonce (initiator); random when omitted.
    #[arg(long)]
    nonce: Option<u64>,
    /// Seed for key-symbol sampling (initiator); random when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Run a responder and an initiator against each other over loopback.
    #[arg(long, conflicts_with = "role")]
    self_test: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    case: u8,
    /// The single broken layer for case 3; all three are reported when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    layer: Option<u8>,
    #[arg(long, env = "DSKE_P", default_value_t = 5)]
    p: i64,
    #[arg(long, env = "DSKE_Q", default_value_t = 29)]
    q: i64,
    #[arg(long, env = "DSKE_N", default_value_t = 3)]
    n: i64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_KEY_LEN)]
    key_len: usize,
    #[arg(long, default_value_t = 0)]
    nonce: u64,
    /// Nonce of the follow-up session.
    #[arg(long, default_value_t = 1)]
    next_nonce: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 31)]
    pmax: u32,
    #[arg(long, default_value_t = 31)]
    qmax: u32,
    #[arg(long, default_value_t = 5)]
    nmax: u32,
    /// Maximum number of assignments to enumerate.
    #[arg(long, default_value_t = dske::attack::DEFAULT_SEARCH_CAP)]
    cap: u64,
    /// Skip the follow-up session.
    #[arg(long)]
    no_next: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Transport(String),
    Protocol(String),
    SearchCap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Transport(_) => 3,
            Failure::Protocol(_) => 4,
            Failure::SearchCap(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Transport(m)
            | Failure::Protocol(m)
            | Failure::SearchCap(m) => m,
        }
    }
}

impl From<HandshakeError> for Failure {
    fn from(e: HandshakeError) -> Self {
        if e.is_transport() {
            Failure::Transport(e.to_string())
        } else {
            Failure::Protocol(e.to_string())
        }
    }
}

impl From<AttackError> for Failure {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::SearchSpaceTooLarge { .. } => Failure::SearchCap(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn usage<E: ToString>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn params(p: i64, q: i64, n: i64) -> Result<SecretParams, Failure> {
    validate_params(p, q, n).map_err(usage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Genbox { params, format } => genbox(&params, format),
        Command::Inspect { file, params } => inspect(file, &params),
        Command::Handshake(args) => handshake(&args),
        Command::Attack(args) => attack(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn duplicate_free_origins<B: BoxGrid<Cell = u32>>(grid: &B, k: usize) -> Vec<SubBoxSelection> {
    SubBoxSelection::all(k)
        .filter(|sel| find_duplicate_free_selection(grid, k, sel.index()).ok() == Some(*sel))
        .collect()
}

fn genbox(args: &ParamArgs, format: Format) -> Result<(), Failure> {
    let params = params(args.p, args.q, args.n)?;
    let s1 = generate_s1(params);
    let s2 = generate_s2();
    match format {
        Format::Text => print!("{}", BoxDump::new(&s1, &s2).render()),
        Format::Vectors => {
            let windows: serde_json::Map<String, serde_json::Value> = WINDOW_SIZES
                .iter()
                .map(|&k| {
                    let origins: Vec<[usize; 2]> = duplicate_free_origins(&s1, k)
                        .iter()
                        .map(|s| [s.row, s.col])
                        .collect();
                    (k.to_string(), json!(origins))
                })
                .collect();
            let doc = json!({
                "params": params,
                "s1": s1.cells(),
                "s2": s2.cells(),
                "duplicate_free_windows": windows,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("serializable")
            );
        }
    }
    Ok(())
}

fn inspect(file: Option<PathBuf>, args: &OptParamArgs) -> Result<(), Failure> {
    let given = match (args.p, args.q, args.n) {
        (Some(p), Some(q), Some(n)) => Some(params(p, q, n)?),
        (None, None, None) => None,
        _ => return Err(usage("--p, --q and --n must be given together")),
    };
    let dump = match (&file, given) {
        (Some(path), _) => {
            let mut text = String::new();
            if path.as_os_str() == "-" {
                io::stdin().read_to_string(&mut text).map_err(usage)?;
            } else {
                text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
            BoxDump::parse(&text).map_err(usage)?
        }
        (None, Some(params)) => BoxDump::new(&generate_s1(params), &generate_s2()),
        (None, None) => return Err(usage("give a dump file or --p, --q and --n")),
    };

    println!("q={}", dump.q);
    println!("s2_standard={}", dump.has_standard_s2());
    for k in WINDOW_SIZES {
        let origins: Vec<String> = duplicate_free_origins(&dump.s1, k)
            .iter()
            .map(|s| format!("{},{}", s.row, s.col))
            .collect();
        println!("duplicate_free_k{k}={}", origins.join(" "));
    }
    if let Some(params) = given {
        println!("params_match={}", generate_s1(params).cells() == &dump.s1);
    }
    Ok(())
}

fn rng_from(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_entropy(),
    }
}

fn handshake(args: &HandshakeArgs) -> Result<(), Failure> {
    let p = &args.params;
    let config = SessionConfig::new(params(p.p, p.q, p.n)?)
        .with_key_len(args.key_len)
        .and_then(|c| c.with_window_size(args.k))
        .map_err(usage)?;
    let nonce = args.nonce.unwrap_or_else(rand::random);
    let mut rng = rng_from(args.seed);

    if args.self_test {
        let responder = Responder::bind((args.addr.as_str(), 0)).map_err(HandshakeError::from)?;
        let addr = responder.local_addr().map_err(HandshakeError::from)?;
        let server = thread::spawn(move || responder.accept_one(&config));
        let initiator = run_initiator(addr, &config, nonce, &mut rng);
        let responder = server.join().expect("responder thread panicked");
        let (a, b) = (initiator?, responder?);
        if a.key_bytes() != b.key_bytes() {
            return Err(Failure::Protocol("keys differ".into()));
        }
        println!("{}", hex::encode(a.key_bytes()));
        return Ok(());
    }

    let outcome = match args.role {
        Some(HandshakeRole::Init) => {
            run_initiator((args.addr.as_str(), args.port), &config, nonce, &mut rng)?
        }
        Some(HandshakeRole::Resp) => {
            let responder =
                Responder::bind((args.addr.as_str(), args.port)).map_err(HandshakeError::from)?;
            let local = responder.local_addr().map_err(HandshakeError::from)?;
            eprintln!("listening on {local}");
            responder.accept_one(&config)?
        }
        None => return Err(usage("--role or --self-test is required")),
    };
    println!("{}", hex::encode(outcome.key_bytes()));
    Ok(())
}

fn attack(args: &AttackArgs) -> Result<(), Failure> {
    let cases = match (args.case, args.layer) {
        (1, None) => vec![Case::I],
        (2, None) => vec![Case::II],
        (3, Some(l)) => vec![Case::III(l)],
        (3, None) => vec![Case::III(1), Case::III(2), Case::III(3)],
        _ => return Err(usage("--layer applies to case 3 only")),
    };
    let scenario = Scenario {
        params: params(args.p, args.q, args.n)?,
        nonce: args.nonce,
        next_nonce: args.next_nonce,
        seed: args.seed,
        key_len: args.key_len,
        k: Some(args.k),
        bounds: ParamBounds::new(args.pmax, args.qmax, args.nmax),
        options: SearchOptions {
            cap: args.cap,
            execution: if args.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        },
    };
    let reports = cases
        .into_iter()
        .map(|c| case_report(c, !args.no_next, &scenario))
        .collect::<Result<Vec<_>, _>>()?;
    let texts: Vec<String> = reports.iter().map(|r| r.to_text()).collect();
    print!("{}", texts.join("\n"));
    Ok(())
}
