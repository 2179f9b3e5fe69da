//! Scenario harness: self-describing assembly fixtures.
//!
//! A scenario is an assembly file whose expected outcome is written into
//! the file itself as `#!` comment lines (ordinary comments to the
//! assembler):
//!
//! ```text
//! #! exit: 12
//! #! mem[0x8010]: 0
//! #! reg r5: 0xC0FFEE
//! ```
//!
//! `exit` is required and names the process exit code the program must
//! produce (0–255, traps included). `mem[ADDR]: V` asserts an 8-byte
//! little-endian read of final memory; `reg rN: V` asserts a final
//! register value. The harness assembles the source, runs it, and reports
//! every expectation that does not hold.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use crate::asm::{self, Diagnostic};
use crate::machine::{LoadError, Machine};

/// Memory given to scenario programs.
pub const SCENARIO_MEM_SIZE: u64 = 65536;
/// Step budget for scenario programs.
pub const SCENARIO_MAX_STEPS: u64 = 100_000;

#[derive(Debug)]
pub enum ScenarioError {
    /// No `#! exit:` line in the source.
    MissingExit,
    /// A `#!` line that does not parse.
    BadExpectation { line: u32, text: String },
    /// The program does not assemble.
    Assembly(Vec<Diagnostic>),
    /// The image does not load.
    Load(LoadError),
    /// The scenario file itself cannot be read.
    Io(io::Error),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::MissingExit => write!(f, "scenario has no `#! exit:` expectation"),
            ScenarioError::BadExpectation { line, text } => {
                write!(f, "line {line}: bad expectation `{text}`")
            }
            ScenarioError::Assembly(diags) => {
                write!(f, "assembly failed:")?;
                for d in diags {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            ScenarioError::Load(e) => write!(f, "image load failed: {e}"),
            ScenarioError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// A parsed scenario: program text plus its expected outcome.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub source: String,
    pub expect_exit: u8,
    pub expect_mem: Vec<(u64, u64)>,
    pub expect_reg: Vec<(u8, u64)>,
}

/// What actually happened, against what was expected.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub exit_code: u8,
    pub expect_exit: u8,
    pub steps: u64,
    /// One line per failed expectation; empty means the scenario passed.
    pub failures: Vec<String>,
}

impl ScenarioResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ScenarioResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(
                f,
                "{}: pass (exit {}, {} steps)",
                self.name, self.exit_code, self.steps
            )
        } else {
            write!(f, "{}: FAIL", self.name)?;
            for line in &self.failures {
                write!(f, "\n  {line}")?;
            }
            Ok(())
        }
    }
}

impl Scenario {
    /// Extracts `#!` expectations from scenario source.
    pub fn parse(name: &str, source: &str) -> Result<Scenario, ScenarioError> {
        let mut expect_exit = None;
        let mut expect_mem = Vec::new();
        let mut expect_reg = Vec::new();

        for (idx, raw) in source.lines().enumerate() {
            let Some(rest) = raw.trim_start().strip_prefix("#!") else {
                continue;
            };
            let bad = || ScenarioError::BadExpectation {
                line: idx as u32 + 1,
                text: rest.trim().to_string(),
            };
            let (key, value) = rest.split_once(':').ok_or_else(bad)?;
            let (key, value) = (key.trim(), value.trim());
            if key == "exit" {
                let v = asm::parse_int(value).filter(|v| (0..=255).contains(v)).ok_or_else(bad)?;
                expect_exit = Some(v as u8);
            } else if let Some(addr) = key.strip_prefix("mem[").and_then(|k| k.strip_suffix(']')) {
                let addr = asm::parse_int(addr.trim()).ok_or_else(bad)?;
                let v = asm::parse_int(value).ok_or_else(bad)?;
                expect_mem.push((addr as u64, v as u64));
            } else if let Some(reg) = key.strip_prefix("reg") {
                let reg = reg.trim().strip_prefix('r').ok_or_else(bad)?;
                let reg: u8 = reg.parse().ok().filter(|r| *r < 32).ok_or_else(bad)?;
                let v = asm::parse_int(value).ok_or_else(bad)?;
                expect_reg.push((reg, v as u64));
            } else {
                return Err(bad());
            }
        }

        Ok(Scenario {
            name: name.to_string(),
            source: source.to_string(),
            expect_exit: expect_exit.ok_or(ScenarioError::MissingExit)?,
            expect_mem,
            expect_reg,
        })
    }

    /// Reads and parses a scenario file; the name is the file stem.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let source = fs::read_to_string(path).map_err(ScenarioError::Io)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Scenario::parse(&name, &source)
    }

    /// Assembles, runs, and checks every expectation.
    pub fn run(&self, mem_size: u64, max_steps: u64) -> Result<ScenarioResult, ScenarioError> {
        let image = asm::assemble_source(&format!("{}.s", self.name), &self.source)
            .map_err(ScenarioError::Assembly)?;
        let mut machine = Machine::new(&image, mem_size).map_err(ScenarioError::Load)?;
        let outcome = machine.run(max_steps);
        let exit_code = outcome.exit_code();

        let mut failures = Vec::new();
        if exit_code != self.expect_exit {
            failures.push(format!(
                "exit code {exit_code}, expected {} (final status: {})",
                self.expect_exit,
                machine.status()
            ));
        }
        for &(addr, want) in &self.expect_mem {
            match machine.mem().read_data(addr, 8) {
                Ok(got) if got == want => {}
                Ok(got) => failures.push(format!(
                    "mem[0x{addr:x}] = 0x{got:x}, expected 0x{want:x}"
                )),
                Err(e) => failures.push(format!("mem[0x{addr:x}] unreadable: {e}")),
            }
        }
        for &(reg, want) in &self.expect_reg {
            let got = machine.regs().gpr(reg);
            if got != want {
                failures.push(format!("r{reg} = 0x{got:x}, expected 0x{want:x}"));
            }
        }

        Ok(ScenarioResult {
            name: self.name.clone(),
            exit_code,
            expect_exit: self.expect_exit,
            steps: machine.steps(),
            failures,
        })
    }

    /// [`Scenario::run`] with the standard scenario budget.
    pub fn run_default(&self) -> Result<ScenarioResult, ScenarioError> {
        self.run(SCENARIO_MEM_SIZE, SCENARIO_MAX_STEPS)
    }
}

/// Loads every `*.s` file in a directory, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(ScenarioError::Io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "s"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Scenario::load(p)).collect()
}
