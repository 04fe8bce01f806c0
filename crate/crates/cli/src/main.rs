mod bench;
mod runner;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Bounded model checker with loop acceleration and trace-automaton
/// instrumentation for a small unsigned integer language.
#[derive(Parser, Debug)]
#[command(name = "accelbmc", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Option<Cmd>,

    /// Program to check.
    pub file: Option<PathBuf>,

    #[command(flatten)]
    pub check: CheckOpts,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Run every `.imp` file under a directory and compare against its
    /// `// EXPECT:` header.
    Bench {
        dir: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = CliMode::AccelTa)]
        mode: CliMode,
        /// Per-file wall-clock timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Emit a random well-formed program on stdout.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        width: u32,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CliMode {
    /// Plain bounded model checking.
    Plain,
    /// Loop acceleration only.
    Accel,
    /// Acceleration plus trace automata.
    AccelTa,
    /// Exhaustive concrete enumeration (small widths only).
    Oracle,
}

#[derive(Parser, Debug, Clone)]
pub struct CheckOpts {
    #[arg(long, value_enum, default_value_t = CliMode::AccelTa)]
    pub mode: CliMode,

    /// Unwinding bound. Defaults to 100 in plain mode and 3 otherwise.
    #[arg(long)]
    pub unwind: Option<u32>,

    /// Try bounds 0..=KMAX instead of a single bound.
    #[arg(long)]
    pub kmax: Option<u32>,

    /// Override the bit width of all program variables.
    #[arg(long)]
    pub width: Option<u32>,

    /// Wall-clock timeout in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,

    /// Disable trace automata (forces accel mode when mode is accel-ta).
    #[arg(long)]
    pub no_trace_automata: bool,

    /// Cap on looping paths enumerated per loop.
    #[arg(long, default_value_t = 8)]
    pub max_loop_paths: usize,

    /// Write the checked CFA as Graphviz dot.
    #[arg(long)]
    pub dump_cfa: Option<PathBuf>,

    /// Write the determinized restriction automaton as text.
    #[arg(long)]
    pub dump_ta: Option<PathBuf>,

    /// Write the error-query CNF in DIMACS format.
    #[arg(long)]
    pub dimacs: Option<PathBuf>,

    /// External DIMACS solver command instead of the embedded one.
    #[arg(long)]
    pub external_solver: Option<String>,

    /// SAT conflict budget before giving up.
    #[arg(long)]
    pub conflict_budget: Option<u64>,

    /// Reproducibility seed. The pipeline is deterministic, so this only
    /// tags the report; it exists so runs can be labeled and compared.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Reserved: minimize the trace automaton before inlining. Not
    /// implemented; the flag is accepted and ignored with a warning.
    #[arg(long)]
    pub minimize_ta: bool,

    /// Emit machine-readable JSON lines instead of the human report.
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Some(Cmd::Bench {
            dir,
            jobs,
            mode,
            timeout,
        }) => bench::run(&dir, jobs, mode, timeout),
        Some(Cmd::Gen { seed, width }) => {
            let cfg = accelbmc_core::testgen::GenConfig {
                width,
                ..Default::default()
            };
            let mut g = accelbmc_core::testgen::Gen::new(seed, cfg);
            print!("{}", g.program());
            0
        }
        None => match cli.file {
            None => {
                eprintln!("error: expected a file to check (or a subcommand)");
                3
            }
            Some(file) => runner::run_file(&file, &cli.check),
        },
    };
    ExitCode::from(code)
}
