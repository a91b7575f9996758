//! `ptinfer`: run a party, benchmark protocols, and report approximation error.

mod mae;
mod report;
mod workload;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ptinfer::approx::{table_by_name, PiecewisePoly};
use ptinfer::channel::Endpoint;
use ptinfer::config::HeBackendName;
use ptinfer::{BlockWeights, Config, Error, Party, Result, Role, Session};

use crate::mae::MaeRange;
use crate::report::{render, write_csv, RunRow};
use crate::workload::{max_abs_error, open, run_local, ProtocolName, Workload};

const DEFAULT_ADDR: &str = "127.0.0.1:7700";

#[derive(Parser)]
#[command(
    name = "ptinfer",
    version,
    about = "Two-party transformer inference over HE and secret sharing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol or a block as one party, or as both with --local.
    Party(PartyArgs),
    /// Repeat a protocol in-process and emit one CSV row per run plus the mean.
    Bench(BenchArgs),
    /// Mean absolute error of the approximation tables.
    Mae(MaeArgs),
    /// Print a shipped coefficient table as TOML.
    Table(TableArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Rlwe,
    Clear,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "matmul")]
    protocol: ProtocolName,
    /// `MxNxK` for matmul, `RxC` for softmax/ln/gelu, `d_sxd_mxhxd_f` for block.
    #[arg(long)]
    shape: Option<String>,
    /// `lan`, `wan1` or `wan2`; overrides the config file.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// HE backend; overrides the config file.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Ring degree; overrides the config file.
    #[arg(long)]
    degree: Option<usize>,
    /// Block weight container used by party B.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
                other => other,
            })?,
            None => Config::default(),
        };
        if let Some(p) = &self.profile {
            c.network.profile = p.clone();
            c.network.bandwidth_bps = None;
            c.network.latency_s = None;
        }
        if let Some(b) = self.backend {
            c.he.backend = match b {
                BackendArg::Rlwe => HeBackendName::Rlwe,
                BackendArg::Clear => HeBackendName::Clear,
            };
        }
        if let Some(d) = self.degree {
            c.he.degree = d;
        }
        c.validate()?;
        Ok(c)
    }

    fn weights(&self) -> Result<Option<BlockWeights>> {
        self.weights.as_deref().map(BlockWeights::load).transpose()
    }
}

#[derive(Args)]
struct PartyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, required_unless_present = "local")]
    role: Option<RoleArg>,
    /// Run both parties in this process.
    #[arg(long)]
    local: bool,
    /// Accept the peer on this address (default for party B).
    #[arg(long, conflicts_with = "connect")]
    listen: Option<String>,
    /// Connect to the peer at this address (default for party A).
    #[arg(long)]
    connect: Option<String>,
    /// Seconds to keep retrying the connection.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    /// Write this party's output share, or the opened output with --local.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
}

#[derive(Args)]
struct MaeArgs {
    /// `gelu`, `sigmoid`, `tanh`, `mish` or `all`.
    #[arg(long, default_value = "all")]
    function: String,
    #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    hi: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    points: u64,
    /// TOML table to evaluate instead of the shipped one.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Write the per-point curve of one function here.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    function: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Shape(_)
        | Error::HandshakeMismatch { .. }
        | Error::RoleClash(_) => 2,
        Error::Io(_) | Error::PeerClosed => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Party(args) => cmd_party(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Mae(args) => cmd_mae(args),
        Command::Table(args) => cmd_table(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn row_for(work: &Workload, config: &Config, rep: &str, run: &workload::PartyRun) -> RunRow {
    let mut row = RunRow::new(
        rep,
        work.protocol.name(),
        &work.shape_text(),
        &config.network.profile,
        &run.cost,
    );
    row.wall_time = run.wall.as_secs_f64();
    row
}

fn cmd_party(args: PartyArgs) -> Result<()> {
    let config = args.common.config()?;
    let work = Workload::new(
        args.common.protocol,
        args.common.shape.as_deref(),
        &config,
        args.common.seed,
    )?;
    let weights = args.common.weights()?;
    if args.local {
        let (a, b) = run_local(&work, &config, weights.as_ref())?;
        let got = open(&config, &a, &b)?;
        let want = work.expected(&config, weights.as_ref())?;
        let mut row = row_for(&work, &config, "0", &a);
        row.wall_time = a.wall.max(b.wall).as_secs_f64();
        row.max_abs_error = Some(max_abs_error(&got, &want));
        print!("{}", render(&a.cost));
        println!("max_abs_error {:.3e}", row.max_abs_error.unwrap_or(0.0));
        if let Some(path) = &args.dump {
            let raw = ptinfer::sharing::reconstruct(&a.share, &b.share, &config.fixedpoint)?;
            write_values(path, &format!("{:?}", a.share.domain).to_lowercase(), &raw)?;
        }
        if let Some(path) = &args.common.out {
            write_csv(&[row], Some(path))?;
        }
        return Ok(());
    }
    let role = match args.role.expect("clap requires --role without --local") {
        RoleArg::A => Role::A,
        RoleArg::B => Role::B,
    };
    let endpoint = match (&args.listen, &args.connect, role) {
        (Some(addr), _, _) => Endpoint::Listen(addr.clone()),
        (None, Some(addr), _) => Endpoint::Connect {
            addr: addr.clone(),
            timeout: Duration::from_secs(args.timeout),
        },
        (None, None, Role::B) => Endpoint::Listen(DEFAULT_ADDR.into()),
        (None, None, Role::A) => Endpoint::Connect {
            addr: DEFAULT_ADDR.into(),
            timeout: Duration::from_secs(args.timeout),
        },
    };
    let session = Session::connect(role, &endpoint, config.profile()?, config.fingerprint()?)?;
    let mut party = Party::setup(&config, config.he_context()?, session, work.seed)?;
    let run = work.run(&mut party, &config, weights.as_ref())?;
    print!("{}", render(&run.cost));
    if let Some(path) = &args.dump {
        write_values(
            path,
            &format!("{:?}", run.share.domain).to_lowercase(),
            &run.share.values,
        )?;
    }
    if let Some(path) = &args.common.out {
        write_csv(&[row_for(&work, &config, "0", &run)], Some(path))?;
    }
    Ok(())
}

/// Domain name on the first line, then one element per line.
fn write_values(path: &std::path::Path, domain: &str, values: &[u64]) -> Result<()> {
    let mut text = format!("{domain}\n");
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let config = args.common.config()?;
    let work = Workload::new(
        args.common.protocol,
        args.common.shape.as_deref(),
        &config,
        args.common.seed,
    )?;
    let weights = args.common.weights()?;
    let want = work.expected(&config, weights.as_ref())?;
    let mut rows = Vec::with_capacity(args.reps as usize + 1);
    for rep in 1..=args.reps {
        let (a, b) = run_local(&work, &config, weights.as_ref())?;
        let mut row = row_for(&work, &config, &rep.to_string(), &a);
        row.wall_time = a.wall.max(b.wall).as_secs_f64();
        row.max_abs_error = Some(max_abs_error(&open(&config, &a, &b)?, &want));
        rows.push(row);
    }
    rows.extend(RunRow::mean(&rows));
    write_csv(&rows, args.common.out.as_deref())
}

fn cmd_mae(args: MaeArgs) -> Result<()> {
    if !(args.lo < args.hi) {
        return Err(Error::Config(format!(
            "empty range [{}, {}]",
            args.lo, args.hi
        )));
    }
    let range = MaeRange {
        lo: args.lo,
        hi: args.hi,
        points: args.points as usize,
    };
    let custom: Option<PiecewisePoly<f64>> = match &args.table {
        Some(path) => Some(PiecewisePoly::from_text(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let function = match (&custom, args.function.as_str()) {
        (Some(t), "all") => t.name.clone(),
        (_, f) => f.to_string(),
    };
    let rows = if function == "all" {
        mae::all(&range)?
    } else {
        mae::suite(&function, custom.as_ref(), &range)?
    };
    if let Some(path) = &args.grid {
        if function == "all" {
            return Err(Error::Config("--grid needs a single --function".into()));
        }
        let table = match &custom {
            Some(t) => t.clone(),
            None => table_by_name(&function)?,
        };
        let mut w =
            csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        w.write_record(["x", "exact", "approx", "abs_err"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for (x, e, a, d) in mae::grid_rows(&table, &function, &range)? {
            w.write_record([x, e, a, d].map(|v| v.to_string()))
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    write_csv(&rows, args.out.as_deref())
}

fn cmd_table(args: TableArgs) -> Result<()> {
    let text = table_by_name::<f64>(&args.function)?.to_text();
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
