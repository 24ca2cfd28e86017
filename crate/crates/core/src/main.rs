use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cass::frontends::{render, serve, Engine, EngineError, OutputFormat};
use cass::scheduler::PoolConfig;

/// Runs a program analysis on a module and everything it imports.
#[derive(Debug, Parser)]
#[command(name = "cass", version)]
struct Cli {
    /// Analysis name (see --list).
    analysis: Option<String>,
    /// Module name; the IR file is <module>.fcy.json on the search path.
    module: Option<String>,
    #[arg(long, default_value = "plain")]
    format: OutputFormat,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Only dispatch the first unfinished module in topological order.
    #[arg(long)]
    head_only: bool,
    /// Comma-separated module directories. Defaults to $CASS_PATH, then ".".
    #[arg(long, value_delimiter = ',')]
    path: Vec<PathBuf>,
    /// Defaults to .cass_cache in the first search directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    delete_cache: bool,
    #[arg(long)]
    list: bool,
    /// Serve the line protocol on this TCP port instead of analyzing once.
    #[arg(long)]
    server: Option<u16>,
    /// Append scheduling events as JSON lines to this file.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

const USAGE: u8 = 1;
const FAILED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let engine = engine(&cli);

    if cli.delete_cache {
        if let Err(e) = engine.delete_cache() {
            eprintln!("cass: {e}");
            return ExitCode::from(FAILED);
        }
    }
    if cli.list {
        for name in engine.registry().names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    if let Some(port) = cli.server {
        let listener = match TcpListener::bind(("127.0.0.1", port)) {
            Ok(l) => l,
            Err(e) => {
                eprintln!("cass: cannot listen on port {port}: {e}");
                return ExitCode::from(FAILED);
            }
        };
        if let Ok(addr) = listener.local_addr() {
            eprintln!("cass: listening on {addr}");
        }
        return match serve(&engine, listener) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("cass: {e}");
                ExitCode::from(FAILED)
            }
        };
    }
    let (analysis, module) = match (&cli.analysis, &cli.module) {
        (Some(a), Some(m)) => (a, m),
        _ if cli.delete_cache => return ExitCode::SUCCESS,
        _ => {
            eprintln!("cass: expected <analysis> <module>; try --help");
            return ExitCode::from(USAGE);
        }
    };
    match engine.module_results(analysis, module) {
        Ok(results) => {
            for line in render(&results, cli.format) {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e @ EngineError::UnknownAnalysis { .. }) => {
            eprintln!("cass: {e}");
            ExitCode::from(USAGE)
        }
        Err(e) => {
            eprintln!("cass: {e}");
            ExitCode::from(FAILED)
        }
    }
}

fn engine(cli: &Cli) -> Engine {
    let path = if !cli.path.is_empty() {
        cli.path.clone()
    } else if let Some(p) = std::env::var_os("CASS_PATH").filter(|p| !p.is_empty()) {
        std::env::split_paths(&p).collect()
    } else {
        vec![PathBuf::from(".")]
    };
    let cache = cli
        .cache_dir
        .clone()
        .unwrap_or_else(|| path[0].join(".cass_cache"));
    let pool = PoolConfig {
        workers: cli.workers as usize,
        head_only: cli.head_only,
    };
    let mut engine = Engine::new(path).cache_dir(cache).pool(pool);
    if let Some(log) = &cli.event_log {
        engine = engine.event_log(log);
    }
    engine
}
