use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use lbsteer::engine::Engine;
use lbsteer::protocol::{golden, MAX_MESSAGE_LEN};
use lbsteer::runner::{self, BenchOptions, RunOptions};
use lbsteer::scenario::{Scenario, ScenarioError};
use lbsteer::server::{self, ServerConfig};

const EXIT_SCENARIO: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "lbsteer", version, about = "Steerable lattice-Boltzmann free-surface simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve a simulation to steering clients over TCP and WebSocket.
    Serve(ServeArgs),
    /// Run a scenario headless, optionally dumping frames.
    Run(RunArgs),
    /// Measure iteration throughput of a scenario.
    Bench(BenchArgs),
    /// Convert a dumped frame to CSV.
    ToCsv {
        /// The frame's .f32 or .txt file.
        frame: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the wire-format golden file shared with client codecs.
    TestVectors {
        #[arg(long, default_value = "testdata/test-vectors.bin")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Seed for scenario noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data-parallel collision and streaming.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Initial simulation; a 64x64 walled box of fluid when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value = "127.0.0.1:7070")]
    bind_tcp: String,
    #[arg(long, default_value = "127.0.0.1:7071")]
    bind_ws: String,
    /// Largest message accepted or sent, in MiB.
    #[arg(long, default_value_t = 64)]
    max_frame_mb: usize,
    /// Seconds between STATS broadcasts.
    #[arg(long, default_value_t = 1.0)]
    stats_period: f64,
    /// Start stepping without waiting for a client START.
    #[arg(long)]
    start: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Frame output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario's run length.
    #[arg(long)]
    iterations: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement time budget.
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    /// Stop after this many timed iterations.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value_t = 50)]
    warmup: u64,
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    Scenario::load(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_SCENARIO)
    })
}

fn scenario_failure(e: ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        ScenarioError::Sim(lbsteer::SimError::Divergence { .. }) => ExitCode::from(EXIT_DIVERGED),
        ScenarioError::Io { .. } => ExitCode::FAILURE,
        _ => ExitCode::from(EXIT_SCENARIO),
    }
}

fn default_scenario() -> Scenario {
    Scenario::parse("dims = [64, 64]\ntau = 0.8\nwalls = true\n", "box")
        .expect("built-in scenario is valid")
}

fn serve(args: ServeArgs) -> Result<(), ExitCode> {
    let scenario = match &args.scenario {
        Some(p) => load(p)?,
        None => default_scenario(),
    };
    let (sim, _) = scenario.build(args.seed).map_err(scenario_failure)?;
    let (mut engine, _) = Engine::new(sim);
    engine.set_parallel(args.parallel);
    if args.start || scenario.autostart {
        engine.start();
    }
    let config = ServerConfig {
        bind_tcp: Some(args.bind_tcp),
        bind_ws: Some(args.bind_ws),
        max_message: (args.max_frame_mb << 20).min(MAX_MESSAGE_LEN),
        stats_period: Duration::from_secs_f64(args.stats_period.max(0.01)),
        ..ServerConfig::default()
    };
    let handle = server::serve(engine, &config).map_err(|e| {
        eprintln!("error: cannot start server: {e}");
        ExitCode::FAILURE
    })?;
    eprintln!(
        "serving `{}` on tcp {} and ws {}",
        scenario.name,
        handle.tcp_addr().unwrap(),
        handle.ws_addr().unwrap()
    );
    handle.wait();
    Ok(())
}

fn run(args: RunArgs) -> Result<(), ExitCode> {
    let scenario = load(&args.common.scenario)?;
    let opts = RunOptions {
        out: args.out.clone(),
        iterations: args.iterations,
        seed: args.common.seed,
        parallel: args.common.parallel,
    };
    let report = runner::run_headless(&scenario, &opts).map_err(scenario_failure)?;
    print!("{report}");
    if let Some(dir) = &args.out {
        if let Err(e) = fs::write(dir.join("report.txt"), report.to_string()) {
            eprintln!("error: cannot write report: {e}");
            return Err(ExitCode::FAILURE);
        }
    }
    if report.divergence.is_some() {
        return Err(ExitCode::from(EXIT_DIVERGED));
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), ExitCode> {
    let scenario = load(&args.common.scenario)?;
    let opts = BenchOptions {
        warmup: args.warmup,
        seconds: args.seconds,
        max_iterations: args.iterations,
        parallel: args.common.parallel,
        seed: args.common.seed,
    };
    let report = runner::benchmark(&scenario, &opts).map_err(scenario_failure)?;
    print!("{report}");
    Ok(())
}

fn to_csv(frame: &Path, out: Option<&Path>) -> io::Result<()> {
    let (header, data) = runner::read_frame(frame)?;
    match out {
        Some(p) => {
            let mut w = io::BufWriter::new(fs::File::create(p)?);
            runner::write_csv(&mut w, &header, &data)?;
            w.flush()
        }
        None => {
            let mut w = io::BufWriter::new(io::stdout().lock());
            runner::write_csv(&mut w, &header, &data)?;
            w.flush()
        }
    }
}

fn test_vectors(out: &Path) -> io::Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let bytes = golden::encode_vectors();
    fs::write(out, &bytes)?;
    eprintln!(
        "wrote {} messages ({} bytes) to {}",
        golden::messages().len(),
        bytes.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let io_result = |r: io::Result<()>| match r {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }),
    };
    let result = match cli.cmd {
        Cmd::Serve(a) => serve(a),
        Cmd::Run(a) => run(a),
        Cmd::Bench(a) => bench(a),
        Cmd::ToCsv { frame, out } => io_result(to_csv(&frame, out.as_deref())),
        Cmd::TestVectors { out } => io_result(test_vectors(&out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
