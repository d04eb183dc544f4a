use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use hrcc::config;
use hrcc::io::{
    bits_to_hex, bits_to_string, format_received, hex_to_bits, parse_bits, read_received, trellis_to_dot, VectorFormat,
};
use hrcc::sim::{self, channel_transmit, run_fer_simulation, trial_data, Simulator, StopRule};
use hrcc::Error;
use hrcc_core::crcdesign::{design_dso_crc, evaluate_candidate, DesignRequest};
use hrcc_core::decoder::DecodeStatus;
use hrcc_core::encoder::{termination_steps, Mode};
use hrcc_core::trellis::{
    augment_root_node, build_dual_trellis, build_multi_trellis_forest, build_termination_table, build_zt_trellis,
};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "hrcc",
    version,
    about = "CRC-aided list decoding of high-rate convolutional codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the distance-spectrum-optimal CRC of a given degree.
    DesignCrc(DesignArgs),
    /// Monte Carlo FER and complexity over an SNR sweep, as CSV.
    Simulate(SimulateArgs),
    /// Decode one received vector, printing a JSON result.
    Decode(DecodeArgs),
    /// Encode one message, printing a JSON result.
    Encode(EncodeArgs),
    /// Print a dual trellis in Graphviz DOT.
    DumpTrellis(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Zt,
    Tb,
}

#[derive(clap::Args)]
struct DesignArgs {
    /// Octal parity polynomials, highest rail first.
    #[arg(long = "H")]
    h: String,
    #[arg(long)]
    v: usize,
    #[arg(long)]
    n: usize,
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Fixed weight threshold instead of automatic growth.
    #[arg(long)]
    d_tilde: Option<u32>,
    /// Threshold increments spent separating tied candidates.
    #[arg(long, default_value_t = 3)]
    tie_break_rounds: u32,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// SNR points in dB, replacing the config's sweep.
    #[arg(long, num_args = 1..)]
    snr: Vec<f64>,
    #[arg(long)]
    max_trials: Option<u64>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    list_cap: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// CSV destination; overrides the config, standard output otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines per-trial log.
    #[arg(long)]
    trial_log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

#[derive(clap::Args)]
struct DecodeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Received vector file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// SNR defining the metric amplitude; defaults to the config channel.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    list_cap: Option<u64>,
}

#[derive(clap::Args)]
struct EncodeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Data as a string of K bits.
    #[arg(long, conflicts_with_all = ["data_hex", "trial"])]
    data_bits: Option<String>,
    /// Data as hex, most significant bit first.
    #[arg(long, conflicts_with = "trial")]
    data_hex: Option<String>,
    /// Draw the data of this simulation trial from the config seed.
    #[arg(long)]
    trial: Option<u64>,
    /// Also write the BPSK vector, one real per line.
    #[arg(long)]
    received_out: Option<PathBuf>,
    /// Add the channel noise of `--trial` (default trial 0) to the vector.
    #[arg(long, requires = "received_out")]
    noisy: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrellisKind {
    /// Unpinned, no root.
    Plain,
    /// Zero-terminated with the termination tail.
    Zt,
    /// Unpinned with a root node.
    Root,
    /// Pinned to start and end in `--state`.
    Pinned,
}

#[derive(clap::Args)]
struct DumpArgs {
    #[arg(long = "H")]
    h: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    v: usize,
    /// Primal steps; zero-terminated trellises add their tail.
    #[arg(long, default_value_t = 2)]
    steps: usize,
    #[arg(long, value_enum, default_value = "plain")]
    kind: TrellisKind,
    #[arg(long, default_value_t = 0)]
    state: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "stdout".into(),
            source: e,
        }),
    }
}

fn design(args: DesignArgs) -> Result<(), Error> {
    let pc = config::parity_check(&args.h, args.n, args.v, "H")?;
    let mode = match args.mode {
        ModeArg::Zt => Mode::ZeroTerminated,
        ModeArg::Tb => Mode::TailBiting,
    };
    let bits = args.k + args.m;
    if args.m == 0 || args.m > 63 {
        return Err(Error::Config {
            path: "m".into(),
            message: "must be in 1..=63".into(),
        });
    }
    if !bits.is_multiple_of(args.n - 1) {
        return Err(Error::Config {
            path: "K".into(),
            message: format!("K + m = {bits} must be divisible by n - 1 = {}", args.n - 1),
        });
    }
    let steps = bits / (args.n - 1)
        + match mode {
            Mode::ZeroTerminated => termination_steps(&pc),
            Mode::TailBiting => 0,
        };
    let req = DesignRequest {
        pc,
        mode,
        k: args.k,
        m: args.m,
        d_tilde: args.d_tilde,
        tie_break_rounds: args.tie_break_rounds,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let design = pool.install(|| {
        design_dso_crc(&req, |paths, candidates| {
            candidates.par_iter().map(|p| evaluate_candidate(paths, p)).collect()
        })
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let spectrum: Vec<_> = design
        .search
        .spectrum
        .iter()
        .map(|(d, c)| json!({"d": d, "count": c}))
        .collect();
    let out = json!({
        "crc_hex": design.search.crc.to_hex(),
        "d_min": design.search.spectrum.min_distance(),
        "spectrum": spectrum,
        "d_tilde_used": design.d_tilde,
        "co_winners": design.search.co_winners.iter().map(|p| p.to_hex()).collect::<Vec<_>>(),
        "paths": design.paths,
        "mode": match mode { Mode::ZeroTerminated => "zt", Mode::TailBiting => "tb" },
        "K": args.k,
        "m": args.m,
        "N": steps * args.n,
        "elapsed": elapsed,
    });
    println!("{out}");
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = config::load_config(&args.config)?;
    if !args.snr.is_empty() {
        cfg.snr_points = args.snr.clone();
    }
    if let Some(t) = args.max_trials {
        cfg.stop.max_trials = t;
    }
    if let Some(e) = args.min_errors {
        cfg.stop.min_errors = e;
    }
    if let Some(s) = args.seed {
        cfg.channel.seed = s;
    }
    if args.list_cap.is_some() {
        cfg.list_cap = args.list_cap;
    }
    cfg.validate()?;
    let sim = Simulator::new(cfg.code_config()?, cfg.decoder, cfg.list_cap)?;
    let log_path = args
        .trial_log
        .or_else(|| cfg.output.trial_log.as_ref().map(PathBuf::from));
    let mut log = match &log_path {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        })?)),
        None => None,
    };
    let stop = StopRule {
        min_errors: cfg.stop.min_errors,
        max_trials: cfg.stop.max_trials,
    };
    let rows = run_fer_simulation(
        &sim,
        cfg.channel.seed,
        &cfg.snr_points,
        stop,
        args.workers,
        log.as_mut().map(|w| w as &mut dyn Write),
    )?;
    if let Some(mut w) = log {
        w.flush().map_err(|e| Error::Io {
            path: "trial log".into(),
            source: e,
        })?;
    }
    let mut csv = Vec::new();
    sim::write_csv(&mut csv, &rows)?;
    let out = args.out.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
    write_output(out.as_deref(), std::str::from_utf8(&csv).expect("csv is UTF-8"))
}

fn decode(args: DecodeArgs) -> Result<(), Error> {
    let cfg = config::load_config(&args.config)?;
    let bytes = fs::read(&args.input).map_err(|e| Error::Io {
        path: args.input.display().to_string(),
        source: e,
    })?;
    let format = match args.format {
        FormatArg::Text => VectorFormat::Text,
        FormatArg::Binary => VectorFormat::Binary,
    };
    let received = read_received(&bytes, format)?;
    let code = cfg.code_config()?;
    if received.len() != code.blocklength() {
        return Err(Error::Input(format!(
            "received vector has {} values, blocklength is {}",
            received.len(),
            code.blocklength()
        )));
    }
    let sim = Simulator::new(code, cfg.decoder, args.list_cap.or(cfg.list_cap))?;
    let a = sim::amplitude(args.snr.unwrap_or(cfg.channel.snr_db));
    let res = sim.decode(&received, a)?;
    let out = json!({
        "data": res.data.as_ref().map(|d| bits_to_hex(d)),
        "data_bits": res.data.as_ref().map(|d| bits_to_string(d)),
        "status": match res.status { DecodeStatus::Found => "found", DecodeStatus::ListExhausted => "list_exhausted" },
        "L": res.list_rank,
        "I": res.insertions,
        "metric": if res.final_metric.is_finite() { json!(res.final_metric) } else { json!(null) },
        "tb": res.tb_satisfied,
        "wava_early": res.wava_early,
    });
    println!("{out}");
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<(), Error> {
    let cfg = config::load_config(&args.config)?;
    let code = cfg.code_config()?;
    let k = code.k();
    let trial = args.trial.unwrap_or(0);
    let data = match (&args.data_bits, &args.data_hex) {
        (Some(b), _) => parse_bits(b)?,
        (None, Some(h)) => hex_to_bits(h, k)?,
        (None, None) => trial_data(cfg.channel.seed, trial, k),
    };
    if data.len() != k {
        return Err(Error::Input(format!("data has {} bits, K = {k}", data.len())));
    }
    let sim = Simulator::new(code, cfg.decoder, cfg.list_cap)?;
    let (codeword, start) = sim.encode(&data)?;
    if let Some(path) = &args.received_out {
        let values = if args.noisy {
            channel_transmit(&codeword, &cfg.channel, trial)
        } else {
            let a = cfg.channel.amplitude();
            codeword.iter().map(|&b| if b == 0 { a } else { -a }).collect()
        };
        write_output(Some(path), &format_received(&values))?;
    }
    let out = json!({
        "data": bits_to_hex(&data),
        "data_bits": bits_to_string(&data),
        "codeword": bits_to_string(&codeword),
        "start_state": start.0,
        "N": codeword.len(),
    });
    println!("{out}");
    Ok(())
}

fn dump(args: DumpArgs) -> Result<(), Error> {
    let pc = config::parity_check(&args.h, args.n, args.v, "H")?;
    if args.steps == 0 {
        return Err(Error::Config {
            path: "steps".into(),
            message: "must be positive".into(),
        });
    }
    let n = args.n;
    let t = match args.kind {
        TrellisKind::Plain => build_dual_trellis(&pc, args.steps * n)?,
        TrellisKind::Root => augment_root_node(&build_dual_trellis(&pc, args.steps * n)?)?,
        TrellisKind::Zt => {
            let table = Arc::new(build_termination_table(&pc)?);
            build_zt_trellis(&pc, (args.steps + table.steps()) * n, table)?
        }
        TrellisKind::Pinned => {
            let forest = build_multi_trellis_forest(&pc, args.steps * n)?;
            forest.into_iter().nth(args.state).ok_or_else(|| Error::Config {
                path: "state".into(),
                message: format!("must be below 2^v = {}", 1usize << args.v),
            })?
        }
    };
    write_output(args.out.as_deref(), &trellis_to_dot(&t))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::DesignCrc(a) => design(a),
        Command::Simulate(a) => simulate(a),
        Command::Decode(a) => decode(a),
        Command::Encode(a) => encode(a),
        Command::DumpTrellis(a) => dump(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hrcc: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
