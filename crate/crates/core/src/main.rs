use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rxe::engine::{
    self, BackendChoice, BackendKind, BenchConfig, EngineConfig, EngineError, Matcher,
};

#[derive(Parser)]
#[command(
    name = "rxe",
    version,
    about = "Full-line regular expression matching by bit-parallel NFA simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the input lines that the pattern matches in full
    Match(MatchArgs),
    /// Describe the automaton and backend chosen for a pattern
    Explain(ExplainArgs),
    /// Time backends on random patterns and texts; prints CSV
    Bench(BenchArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Pattern: literals, concatenation, '|', '*', parentheses, '\' escapes
    #[arg(short = 'e', long = "regexp", value_name = "PAT")]
    pattern: String,
    /// auto, naive, simple, separator or decomposed
    #[arg(long, default_value = "auto")]
    backend: BackendChoice,
    /// Simulated word width: 8, 16, 32 or 64
    #[arg(long = "word-size", default_value_t = 64)]
    word_size: usize,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Largest automaton in a decomposition, in states (default: word size)
    #[arg(long = "cluster-size", value_name = "X")]
    cluster_size: Option<usize>,
    /// Report only through the exit status
    #[arg(short, long)]
    quiet: bool,
    /// Input file; '-' or absent reads standard input
    file: Option<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated automaton sizes (states)
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long = "text-len", default_value_t = 100_000)]
    text_len: usize,
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    /// Comma-separated backends: naive, simple, separator, decomposed
    #[arg(long, value_delimiter = ',', default_value = "naive,decomposed")]
    backends: Vec<BackendChoice>,
    #[arg(long = "word-size", default_value_t = 64)]
    word_size: usize,
    #[arg(long = "cluster-size", value_name = "X")]
    cluster_size: Option<usize>,
}

fn config(e: &EngineArgs, x: Option<usize>) -> EngineConfig {
    EngineConfig {
        backend: e.backend,
        w: e.word_size,
        x,
    }
}

fn run_match(args: MatchArgs) -> Result<bool, String> {
    let cfg = config(&args.engine, args.cluster_size);
    let matcher = Matcher::from_pattern(args.engine.pattern.as_bytes(), &cfg).map_err(describe)?;
    let input: Box<dyn BufRead> = match args.file.as_deref() {
        None | Some("-") => Box::new(BufReader::new(io::stdin().lock())),
        Some(path) => Box::new(BufReader::new(
            File::open(path).map_err(|e| format!("{path}: {e}"))?,
        )),
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut any = false;
    for line in input.split(b'\n') {
        let line = line.map_err(|e| format!("read error: {e}"))?;
        if matcher.is_match(&line) {
            any = true;
            if args.quiet {
                break;
            }
            out.write_all(&line)
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| format!("write error: {e}"))?;
        }
    }
    out.flush().map_err(|e| format!("write error: {e}"))?;
    Ok(any)
}

fn run_explain(args: ExplainArgs) -> Result<(), String> {
    let cfg = config(&args.engine, None);
    let report = engine::explain(args.engine.pattern.as_bytes(), &cfg).map_err(describe)?;
    for (k, v) in report {
        println!("{k}: {v}");
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), String> {
    let backends = args
        .backends
        .iter()
        .map(|b| match b {
            BackendChoice::Fixed(k) => Ok(*k),
            BackendChoice::Auto => Err("bench needs explicit backends".to_string()),
        })
        .collect::<Result<Vec<BackendKind>, _>>()?;
    let cfg = BenchConfig {
        seed: args.seed,
        sizes: args.sizes,
        text_len: args.text_len,
        repeat: args.repeat,
        backends,
        w: args.word_size,
        x: args.cluster_size,
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", engine::CSV_HEADER).map_err(|e| e.to_string())?;
    engine::bench(&cfg, |row| {
        let _ = writeln!(out, "{}", row.csv());
        let _ = out.flush();
    })
    .map_err(describe)?;
    Ok(())
}

fn describe(e: EngineError) -> String {
    match e {
        EngineError::Parse(p) => format!("invalid pattern: {p}"),
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Match(a) => run_match(a).map(|found| if found { 0 } else { 1 }),
        Command::Explain(a) => run_explain(a).map(|_| 0),
        Command::Bench(a) => run_bench(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("rxe: {msg}");
            ExitCode::from(2)
        }
    }
}
