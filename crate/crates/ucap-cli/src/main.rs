//! Command-line front end: assemble programs, run images, inspect images.
//!
//! Exit codes follow the machine's documented table: `run` exits with the
//! program's halt code, 9 on step-limit exhaustion, and 10 + the per-cause
//! offset on traps. Usage, I/O, and malformed-image errors exit with 2;
//! assembly diagnostics exit with 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ucap::asm;
use ucap::image::{DataPayload, ProgramImage};
use ucap::isa::Instruction;
use ucap::machine::{Machine, Outcome, TrapCause};
use ucap::mem::LINE;

#[derive(Parser)]
#[command(
    name = "ucap",
    version,
    about = "Capability machine with uninitialized capabilities"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a source file into a program image.
    Asm {
        /// Assembly source file.
        input: PathBuf,
        /// Output image path (defaults to the input with extension `img`).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Load a program image and execute it.
    Run {
        /// Program image produced by `ucap asm`.
        image: PathBuf,
        /// Memory size in bytes; must be a multiple of 32.
        #[arg(long, default_value_t = 65536)]
        mem_size: u64,
        /// Instruction budget before the run is abandoned.
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// Print one line per executed instruction.
        #[arg(long)]
        trace: bool,
        /// Print a memory range after the run; repeatable.
        #[arg(long = "dump", value_name = "START:END")]
        dump: Vec<String>,
    },
    /// Print the contents of a program image.
    Dump {
        /// Program image produced by `ucap asm`.
        image: PathBuf,
    },
}

/// Restore default SIGPIPE behavior so `ucap dump | head` dies quietly
/// like any other filter instead of panicking on the closed pipe.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() -> ExitCode {
    reset_sigpipe();
    match Cli::parse().cmd {
        Cmd::Asm { input, output } => cmd_asm(&input, output),
        Cmd::Run {
            image,
            mem_size,
            max_steps,
            trace,
            dump,
        } => cmd_run(&image, mem_size, max_steps, trace, &dump),
        Cmd::Dump { image } => cmd_dump(&image),
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("ucap: {message}");
    ExitCode::from(2)
}

fn cmd_asm(input: &Path, output: Option<PathBuf>) -> ExitCode {
    let source = match fs::read_to_string(input) {
        Ok(s) => s,
        Err(e) => return fail(format_args!("{}: {e}", input.display())),
    };
    match asm::assemble_source(&input.to_string_lossy(), &source) {
        Ok(image) => {
            let out = output.unwrap_or_else(|| input.with_extension("img"));
            match fs::write(&out, image.to_bytes()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(format_args!("{}: {e}", out.display())),
            }
        }
        Err(diags) => {
            for d in &diags {
                eprintln!("{d}");
            }
            eprintln!("{} error(s)", diags.len());
            ExitCode::from(1)
        }
    }
}

fn parse_addr(s: &str) -> Option<u64> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        s.parse().ok()
    }
}

fn parse_range(s: &str) -> Option<(u64, u64)> {
    let (start, end) = s.split_once(':')?;
    let (start, end) = (parse_addr(start)?, parse_addr(end)?);
    (start <= end).then_some((start, end))
}

fn load_image(path: &Path) -> Result<ProgramImage, ExitCode> {
    let bytes = fs::read(path).map_err(|e| fail(format_args!("{}: {e}", path.display())))?;
    ProgramImage::from_bytes(&bytes)
        .map_err(|e| fail(format_args!("{}: not a program image: {e}", path.display())))
}

fn cmd_run(path: &Path, mem_size: u64, max_steps: u64, trace: bool, dump: &[String]) -> ExitCode {
    let mut ranges = Vec::new();
    for spec in dump {
        match parse_range(spec) {
            Some(range) => ranges.push(range),
            None => return fail(format_args!("bad --dump range `{spec}` (want START:END)")),
        }
    }
    if mem_size % LINE != 0 {
        return fail(format_args!("--mem-size must be a multiple of {LINE}"));
    }
    let image = match load_image(path) {
        Ok(image) => image,
        Err(code) => return code,
    };
    let mut machine = match Machine::new(&image, mem_size) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };

    let outcome = if trace {
        machine.run_with(max_steps, |rec| println!("{rec}"))
    } else {
        machine.run(max_steps)
    };

    match outcome {
        Outcome::Halted(code) => eprintln!("halted with code {code}"),
        Outcome::StepLimit => eprintln!("step limit of {max_steps} exhausted"),
        Outcome::Trapped(cause, pc) => {
            let detail = match cause {
                TrapCause::Cap(e) => match e.addr() {
                    Some(addr) => format!(" (address 0x{addr:x})"),
                    None => String::new(),
                },
                TrapCause::Decode(_) => String::new(),
            };
            eprintln!("trap: {} at pc=0x{pc:x}{detail}", cause.name());
        }
    }
    for (start, end) in ranges {
        print!("{}", machine.mem().dump_range(start, end));
    }
    ExitCode::from(outcome.exit_code())
}

fn cmd_dump(path: &Path) -> ExitCode {
    let image = match load_image(path) {
        Ok(image) => image,
        Err(code) => return code,
    };
    println!("entry    0x{:x}", image.entry);
    println!(
        "code     0x{:x}..0x{:x}  ({} instructions)",
        image.code_base,
        image.code_end(),
        image.code.len() / 8
    );
    println!("stack    0x{:x}..0x{:x}", image.stack_base, image.stack_end);
    println!("data     {} entries", image.data.len());
    for entry in &image.data {
        match &entry.payload {
            DataPayload::Bytes(bytes) => {
                let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
                println!("  0x{:x}  {} bytes: {}", entry.addr, bytes.len(), hex.join(" "));
            }
            DataPayload::Cap(cap, tag) => {
                println!(
                    "  0x{:x}  {cap}{}",
                    entry.addr,
                    if *tag { "" } else { " untagged" }
                );
            }
        }
    }
    if !image.code.is_empty() {
        println!("listing:");
        for (i, chunk) in image.code.chunks(8).enumerate() {
            let addr = image.code_base + i as u64 * 8;
            match Instruction::decode(chunk.try_into().expect("8-byte chunk")) {
                Ok(instr) => println!("  0x{addr:x}  {instr}"),
                Err(_) => println!("  0x{addr:x}  ??"),
            }
        }
    }
    ExitCode::SUCCESS
}
