// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: run programs and kernels, benchmark both modes,
//! run fault campaigns and dump traces.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use odrg::campaign::{run_campaign, CampaignConfig};
use odrg::firmware::KernelKind;
use odrg::odrg::Mode;
use odrg::run::{execute, load_program, RunConfig, RunSummary};
use odrg::{bench, isa};

#[derive(Parser)]
#[command(name = "odrg", version, about = "Six-core RV32IM cluster simulator with on-demand redundancy grouping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boot the cluster and run a kernel or assembly program.
    Run(RunArgs),
    /// Run like `run` and print one line per executed instruction.
    Trace(RunArgs),
    /// Cycle counts and speedup of every kernel in both modes.
    Bench {
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a fault-injection campaign described by a TOML file.
    Campaign {
        path: PathBuf,
        /// Write one JSON record per run plus a summary line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the summary as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Assemble a source file and print the listing.
    Asm { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, conflicts_with = "program")]
    kernel: Option<KernelKind>,
    #[arg(long)]
    program: Option<PathBuf>,
    /// Print an instruction trace.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    max_cycles: Option<u64>,
    #[arg(long)]
    resync_delay: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with any of the settings above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace (for `trace`) or JSON summary (for `run`) destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Box<dyn std::error::Error>> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            mode: self.mode,
            kernel: self.kernel,
            program: self.program.clone(),
            trace: self.trace.then_some(true),
            max_cycles: self.max_cycles,
            resync_delay: self.resync_delay,
            seed: self.seed,
        };
        Ok(base.overlay(flags))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Box<dyn std::error::Error>> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Flushes a trace, treating a closed reader (e.g. `| head`) as success.
fn finish_trace(out: &mut impl Write) -> io::Result<()> {
    match out.flush() {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn print_summary(s: &RunSummary) {
    match s.exit_code {
        Some(code) => println!("mode {}: exit {code} after {} cycles", s.mode.name(), s.cycles),
        None => println!("mode {}: no exit after {} cycles", s.mode.name(), s.cycles),
    }
    if s.mode == Mode::Tmr {
        for (g, counts) in s.mismatch_counts.iter().enumerate() {
            println!("group {g}: mismatches {counts:?}, resyncs {}", s.resyncs[g]);
        }
    }
}

fn cmd_run(args: &RunArgs, always_trace: bool) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let config = args.config()?;
    let tracing = always_trace || config.trace.unwrap_or(false);
    let summary = if tracing {
        match (&args.out, always_trace) {
            (Some(path), true) => {
                let mut out = create(path)?;
                let s = execute(&config, Some(&mut out))?;
                finish_trace(&mut out)?;
                s
            }
            _ => {
                let stdout = io::stdout();
                let mut out = BufWriter::new(stdout.lock());
                let s = execute(&config, Some(&mut out))?;
                finish_trace(&mut out)?;
                s
            }
        }
    } else {
        execute(&config, None)?
    };
    if !always_trace {
        print_summary(&summary);
        if let Some(path) = &args.out {
            let mut out = create(path)?;
            serde_json::to_writer_pretty(&mut out, &summary)?;
            writeln!(out)?;
        }
    }
    Ok(ExitCode::from(summary.process_status() as u8))
}

fn cmd_asm(path: &Path) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let image = load_program(path)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, word) in image.words.iter().enumerate() {
        let addr = image.load_addr + 4 * i as u32;
        for (name, _) in image.symbols.iter().filter(|(_, a)| *a == addr) {
            writeln!(out, "{name}:")?;
        }
        writeln!(out, "{addr:#010x}: {word:08x}  {}", isa::decode(*word))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, false),
        Command::Trace(args) => cmd_run(args, true),
        Command::Bench { seed, out } => (|| {
            let rows = bench::bench(seed.unwrap_or(bench::DEFAULT_SEED))?;
            print!("{}", bench::format_table(&rows));
            if let Some(path) = out {
                create(path)?.write_all(bench::format_csv(&rows).as_bytes())?;
            }
            let ok = rows.iter().all(|r| r.passed());
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        })(),
        Command::Campaign { path, out, csv } => (|| {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let report = run_campaign(&CampaignConfig::from_toml(&text)?)?;
            print!("{}", report.format_summary());
            if let Some(path) = out {
                create(path)?.write_all(report.to_jsonl().as_bytes())?;
            }
            if let Some(path) = csv {
                create(path)?.write_all(report.summary_csv().as_bytes())?;
            }
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Asm { path } => cmd_asm(path),
    };
    result.unwrap_or_else(|e: Box<dyn std::error::Error>| {
        eprintln!("odrg: {e}");
        ExitCode::from(2)
    })
}
