//! The machine: register files, the fetch–decode–execute loop, and the
//! per-instruction semantics, including the uninitialized-capability rules
//! (gated loads, monotone cursors, and the cursor-decrementing stores).
//!
//! Traps are atomic: an instruction that raises any violation changes no
//! register or memory state, and the machine finishes in `Trapped` status.

use std::fmt;

use crate::cap::{AccessKind, CapError, Capability, Permissions};
use crate::image::{DataPayload, ProgramImage};
use crate::isa::{DecodeError, Instruction, Opcode};
use crate::mem::{MemError, Memory, TaggedWord, LINE};

/// Exit code for a simulation stopped by the step budget.
pub const EXIT_STEP_LIMIT: u8 = 9;
/// Exit codes for traps start here; add [`TrapCause::exit_offset`].
pub const EXIT_TRAP_BASE: u8 = 10;

/// General-purpose and capability register files plus the program counter
/// capability. `r0` is hardwired to zero; capability registers each carry a
/// validity tag, exactly like memory lines.
pub struct RegisterFile {
    gpr: [u64; 32],
    creg: [(Capability, bool); 32],
    pcc: Capability,
}

impl RegisterFile {
    fn new(pcc: Capability) -> RegisterFile {
        RegisterFile {
            gpr: [0; 32],
            creg: [(Capability::null(), false); 32],
            pcc,
        }
    }

    pub fn gpr(&self, idx: u8) -> u64 {
        self.gpr[idx as usize]
    }

    /// Writes a general-purpose register; writes to `r0` are discarded.
    pub fn set_gpr(&mut self, idx: u8, value: u64) {
        if idx != 0 {
            self.gpr[idx as usize] = value;
        }
    }

    pub fn creg(&self, idx: u8) -> (Capability, bool) {
        self.creg[idx as usize]
    }

    pub fn set_creg(&mut self, idx: u8, cap: Capability, tag: bool) {
        self.creg[idx as usize] = (cap, tag);
    }

    pub fn pcc(&self) -> Capability {
        self.pcc
    }

    /// Replaces the program counter capability. The machine never lets an
    /// uninitialized capability become the pcc (jumps refuse them), and
    /// neither does this.
    pub fn set_pcc(&mut self, pcc: Capability) {
        assert!(!pcc.perms().uninit(), "pcc may not be uninitialized");
        self.pcc = pcc;
    }
}

/// Why a step trapped: a capability violation or an undecodable word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrapCause {
    Cap(CapError),
    Decode(DecodeError),
}

impl TrapCause {
    pub fn name(&self) -> &'static str {
        match self {
            TrapCause::Cap(e) => e.name(),
            TrapCause::Decode(_) => "DecodeError",
        }
    }

    /// Offset added to [`EXIT_TRAP_BASE`] in the documented exit-code table.
    pub fn exit_offset(&self) -> u8 {
        match self {
            TrapCause::Cap(e) => e.trap_offset(),
            TrapCause::Decode(_) => 8,
        }
    }
}

impl fmt::Display for TrapCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrapCause::Cap(e) => write!(f, "{}: {e}", self.name()),
            TrapCause::Decode(e) => write!(f, "{}: {e}", self.name()),
        }
    }
}

/// Machine status; `Halted` and `Trapped` are final.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted(u8),
    Trapped(TrapCause, u64),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Running => f.write_str("running"),
            Status::Halted(code) => write!(f, "halted with code {code}"),
            Status::Trapped(cause, pc) => write!(f, "{cause} at pc=0x{pc:x}"),
        }
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Halted(u8),
    Trapped(TrapCause, u64),
    StepLimit,
}

impl Outcome {
    /// The documented process exit code: halt code as-is, 9 for the step
    /// limit, 10 + per-cause offset for traps.
    pub fn exit_code(&self) -> u8 {
        match self {
            Outcome::Halted(code) => *code,
            Outcome::StepLimit => EXIT_STEP_LIMIT,
            Outcome::Trapped(cause, _) => EXIT_TRAP_BASE + cause.exit_offset(),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Halted(code) => write!(f, "halted with code {code}"),
            Outcome::StepLimit => f.write_str("step limit exhausted"),
            Outcome::Trapped(cause, pc) => write!(f, "trap at pc=0x{pc:x}: {cause}"),
        }
    }
}

/// Register this delta names: general-purpose or capability file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegName {
    R(u8),
    C(u8),
}

impl fmt::Display for RegName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegName::R(i) => write!(f, "r{i}"),
            RegName::C(i) => write!(f, "c{i}"),
        }
    }
}

/// One observable state change made by an instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delta {
    Reg { reg: RegName, value: TaggedWord },
    Mem { addr: u64, size: u64, value: TaggedWord },
    Pc { target: u64 },
    Halt { code: u8 },
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Reg { reg, value } => write!(f, "{reg}={value}"),
            Delta::Mem { addr, size, value } => write!(f, "mem[0x{addr:x}]={value} ({size}B)"),
            Delta::Pc { target } => write!(f, "pc=0x{target:x}"),
            Delta::Halt { code } => write!(f, "HALT({code})"),
        }
    }
}

/// Everything one step did, in trace-line form via `Display`:
/// `stepN pc=0x… op=… rd=… rs1=… rs2=… imm=… | effect=…`.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: u64,
    pub pc: u64,
    /// `None` when fetch or decode trapped before an instruction existed.
    pub instr: Option<Instruction>,
    pub deltas: Vec<Delta>,
    pub trap: Option<TrapCause>,
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step{} pc=0x{:x} ", self.step, self.pc)?;
        match &self.instr {
            Some(i) => write!(
                f,
                "op={} rd={} rs1={} rs2={} imm={}",
                i.op, i.rd, i.rs1, i.rs2, i.imm
            )?,
            None => write!(f, "op=?? rd=0 rs1=0 rs2=0 imm=0")?,
        }
        f.write_str(" | effect=")?;
        if let Some(cause) = &self.trap {
            return write!(f, "TRAP({})", EXIT_TRAP_BASE + cause.exit_offset());
        }
        if self.deltas.is_empty() {
            return f.write_str("none");
        }
        for (i, delta) in self.deltas.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{delta}")?;
        }
        Ok(())
    }
}

/// Why an image could not be loaded into a machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadError {
    CodeOutOfMemory { code_end: u64, mem_size: u64 },
    DataOutOfMemory { addr: u64, end: u64, mem_size: u64 },
    StackOutOfMemory { base: u64, end: u64, mem_size: u64 },
    CodeDataOverlap { addr: u64 },
    MisalignedCapEntry { addr: u64 },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::CodeOutOfMemory { code_end, mem_size } => {
                write!(f, "code ends at 0x{code_end:x}, past memory size 0x{mem_size:x}")
            }
            LoadError::DataOutOfMemory { addr, end, mem_size } => write!(
                f,
                "data at 0x{addr:x}..0x{end:x} does not fit in memory of 0x{mem_size:x}"
            ),
            LoadError::StackOutOfMemory { base, end, mem_size } => write!(
                f,
                "stack range 0x{base:x}..0x{end:x} invalid for memory of 0x{mem_size:x}"
            ),
            LoadError::CodeDataOverlap { addr } => {
                write!(f, "data entry at 0x{addr:x} overlaps the code segment")
            }
            LoadError::MisalignedCapEntry { addr } => {
                write!(f, "capability data entry at 0x{addr:x} not {LINE}-byte aligned")
            }
        }
    }
}

impl std::error::Error for LoadError {}

/// A loaded machine ready to step. Holds the register files, tagged memory,
/// final status, and a step counter.
pub struct Machine {
    pub regs: RegisterFile,
    pub mem: Memory,
    status: Status,
    steps: u64,
}

impl Machine {
    /// Loads an image: code and data are placed at their addresses, the pcc
    /// covers the code segment with its cursor at the entry point, `c1`
    /// spans the data extent read-write (untagged null when there is no
    /// data), and `c2` is the stack capability with its cursor parked at
    /// `stack_end`.
    pub fn new(image: &ProgramImage, mem_size: u64) -> Result<Machine, LoadError> {
        let mut mem = Memory::new(mem_size);
        let mem_size = mem.size();

        let code_end = image.code_base + image.code.len() as u64;
        if code_end > mem_size {
            return Err(LoadError::CodeOutOfMemory { code_end, mem_size });
        }
        if image.stack_base > image.stack_end || image.stack_end > mem_size {
            return Err(LoadError::StackOutOfMemory {
                base: image.stack_base,
                end: image.stack_end,
                mem_size,
            });
        }

        let mut data_extent: Option<(u64, u64)> = None;
        for entry in &image.data {
            let len = match &entry.payload {
                DataPayload::Bytes(b) => b.len() as u64,
                DataPayload::Cap(..) => {
                    if entry.addr % LINE != 0 {
                        return Err(LoadError::MisalignedCapEntry { addr: entry.addr });
                    }
                    LINE
                }
            };
            let end = entry
                .addr
                .checked_add(len)
                .filter(|end| *end <= mem_size)
                .ok_or(LoadError::DataOutOfMemory {
                    addr: entry.addr,
                    end: entry.addr.wrapping_add(len),
                    mem_size,
                })?;
            if len > 0 && entry.addr < code_end && end > image.code_base {
                return Err(LoadError::CodeDataOverlap { addr: entry.addr });
            }
            data_extent = match data_extent {
                None => Some((entry.addr, end)),
                Some((lo, hi)) => Some((lo.min(entry.addr), hi.max(end))),
            };
        }

        mem.write_bytes(image.code_base, &image.code).unwrap();
        for entry in &image.data {
            match &entry.payload {
                DataPayload::Bytes(b) => mem.write_bytes(entry.addr, b).unwrap(),
                DataPayload::Cap(cap, tag) => mem.write_cap(entry.addr, *cap, *tag).unwrap(),
            }
        }

        let mut regs = RegisterFile::new(Capability::new(
            Permissions::RX,
            image.code_base,
            code_end,
            image.entry,
        ));
        if let Some((lo, hi)) = data_extent {
            regs.set_creg(1, Capability::new(Permissions::RW, lo, hi, lo), true);
        }
        regs.set_creg(
            2,
            Capability::new(
                Permissions::RW,
                image.stack_base,
                image.stack_end,
                image.stack_end,
            ),
            true,
        );

        Ok(Machine {
            regs,
            mem,
            status: Status::Running,
            steps: 0,
        })
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn regs(&self) -> &RegisterFile {
        &self.regs
    }

    pub fn mem(&self) -> &Memory {
        &self.mem
    }

    /// Executes one instruction. Panics if the machine already halted or
    /// trapped; check [`Machine::status`] first.
    pub fn step(&mut self) -> StepRecord {
        assert!(
            self.status == Status::Running,
            "step on a finished machine"
        );
        let step = self.steps;
        self.steps += 1;
        let pc = self.regs.pcc.cursor();

        let mut record = StepRecord {
            step,
            pc,
            instr: None,
            deltas: Vec::new(),
            trap: None,
        };
        let word = match self.fetch(pc) {
            Ok(word) => word,
            Err(cause) => {
                self.status = Status::Trapped(cause, pc);
                record.trap = Some(cause);
                return record;
            }
        };
        let instr = match Instruction::decode(word) {
            Ok(instr) => instr,
            Err(e) => {
                let cause = TrapCause::Decode(e);
                self.status = Status::Trapped(cause, pc);
                record.trap = Some(cause);
                return record;
            }
        };
        record.instr = Some(instr);
        match self.exec(pc, instr) {
            Ok(deltas) => record.deltas = deltas,
            Err(cause) => {
                self.status = Status::Trapped(cause, pc);
                record.trap = Some(cause);
            }
        }
        record
    }

    /// Runs until halt, trap, or the step budget is used up, feeding every
    /// step record to `observe`.
    pub fn run_with<F: FnMut(&StepRecord)>(&mut self, max_steps: u64, mut observe: F) -> Outcome {
        loop {
            match self.status {
                Status::Halted(code) => return Outcome::Halted(code),
                Status::Trapped(cause, pc) => return Outcome::Trapped(cause, pc),
                Status::Running if self.steps >= max_steps => return Outcome::StepLimit,
                Status::Running => {
                    let record = self.step();
                    observe(&record);
                }
            }
        }
    }

    pub fn run(&mut self, max_steps: u64) -> Outcome {
        self.run_with(max_steps, |_| {})
    }

    fn fetch(&self, pc: u64) -> Result<[u8; 8], TrapCause> {
        self.regs
            .pcc
            .check_access(pc, 8, AccessKind::Execute)
            .map_err(TrapCause::Cap)?;
        if pc % 8 != 0 {
            return Err(TrapCause::Cap(CapError::AlignmentViolation {
                addr: pc,
                required: 8,
            }));
        }
        let bytes = self
            .mem
            .read_bytes(pc, 8)
            .map_err(|e| TrapCause::Cap(mem_trap(self.regs.pcc, e)))?;
        Ok(bytes.try_into().unwrap())
    }

    /// Executes a decoded instruction. Every check happens before any state
    /// change, so an `Err` leaves the machine exactly as it was.
    fn exec(&mut self, pc: u64, instr: Instruction) -> Result<Vec<Delta>, TrapCause> {
        use Opcode::*;
        let Instruction { op, rd, rs1, rs2, imm } = instr;
        let next = pc.wrapping_add(8);
        let mut deltas = Vec::new();

        match op {
            Add | Sub | And | Or | Xor | Sll | Srl | Slt | Addi | Li | Mov => {
                let a = self.regs.gpr(rs1);
                let b = self.regs.gpr(rs2);
                let value = match op {
                    Add => a.wrapping_add(b),
                    Sub => a.wrapping_sub(b),
                    And => a & b,
                    Or => a | b,
                    Xor => a ^ b,
                    Sll => a << (b & 63),
                    Srl => a >> (b & 63),
                    Slt => ((a as i64) < (b as i64)) as u64,
                    Addi => a.wrapping_add_signed(imm as i64),
                    Li => imm as i64 as u64,
                    Mov => a,
                    _ => unreachable!(),
                };
                self.regs.set_gpr(rd, value);
                deltas.push(Delta::Reg {
                    reg: RegName::R(rd),
                    value: TaggedWord::Data(self.regs.gpr(rd)),
                });
            }
            Halt => {
                let code = (self.regs.gpr(2) & 0xff) as u8;
                self.status = Status::Halted(code);
                deltas.push(Delta::Halt { code });
                return Ok(deltas);
            }
            J | Beq | Bne => {
                let taken = match op {
                    J => true,
                    Beq => self.regs.gpr(rs1) == self.regs.gpr(rs2),
                    Bne => self.regs.gpr(rs1) != self.regs.gpr(rs2),
                    _ => unreachable!(),
                };
                if taken {
                    let target = next.wrapping_add_signed(imm as i64 * 8);
                    self.set_pc(target);
                    deltas.push(Delta::Pc { target });
                } else {
                    self.set_pc(next);
                }
                return Ok(deltas);
            }
            Cjr | Cjalr => {
                let (target, tag) = self.regs.creg(rs1);
                if !tag {
                    return Err(TrapCause::Cap(CapError::TagViolation { cap: target }));
                }
                if !target.perms().execute() || target.perms().uninit() {
                    return Err(TrapCause::Cap(CapError::PermissionViolation {
                        kind: AccessKind::Execute,
                        cap: target,
                        addr: target.cursor(),
                    }));
                }
                if op == Cjalr {
                    let link = self.regs.pcc.set_cursor(next).expect("pcc is never uninit");
                    self.regs.set_creg(rd, link, true);
                    deltas.push(Delta::Reg {
                        reg: RegName::C(rd),
                        value: TaggedWord::Cap(link, true),
                    });
                }
                self.regs.set_pcc(target);
                deltas.push(Delta::Pc {
                    target: target.cursor(),
                });
                return Ok(deltas);
            }
            Clb | Clbu | Clh | Clhu | Clw | Clwu | Cld => {
                let size = op.access_size().unwrap();
                let (cap, ea) = self.mem_operand(rs2, imm, size, AccessKind::Read)?;
                let raw = self
                    .mem
                    .read_data(ea, size)
                    .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
                let value = match op {
                    Clb => raw as u8 as i8 as i64 as u64,
                    Clh => raw as u16 as i16 as i64 as u64,
                    Clw => raw as u32 as i32 as i64 as u64,
                    _ => raw, // unsigned variants and cld: already zero-extended
                };
                self.regs.set_gpr(rd, value);
                deltas.push(Delta::Reg {
                    reg: RegName::R(rd),
                    value: TaggedWord::Data(self.regs.gpr(rd)),
                });
            }
            Clc => {
                let (cap, ea) = self.mem_operand(rs2, imm, LINE, AccessKind::Read)?;
                let (loaded, tag) = self
                    .mem
                    .read_cap(ea)
                    .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
                self.regs.set_creg(rd, loaded, tag);
                deltas.push(Delta::Reg {
                    reg: RegName::C(rd),
                    value: TaggedWord::Cap(loaded, tag),
                });
            }
            Csb | Csh | Csw | Csd => {
                let size = op.access_size().unwrap();
                let (cap, ea) = self.mem_operand(rs2, imm, size, AccessKind::Write)?;
                let value = self.regs.gpr(rs1);
                self.mem
                    .write_data(ea, size, value)
                    .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
                deltas.push(Delta::Mem {
                    addr: ea,
                    size,
                    value: TaggedWord::Data(value & mask(size)),
                });
            }
            Csc => {
                let (cap, ea) = self.mem_operand(rs2, imm, LINE, AccessKind::Write)?;
                let (stored, tag) = self.regs.creg(rs1);
                self.mem
                    .write_cap(ea, stored, tag)
                    .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
                deltas.push(Delta::Mem {
                    addr: ea,
                    size: LINE,
                    value: TaggedWord::Cap(stored, tag),
                });
            }
            Ucsb | Ucsh | Ucsw | Ucsd | Ucsc => {
                return self.exec_ucstore(instr);
            }
            Cgetperm | Cgetbase | Cgetlen | Cgetaddr | Cgetuninit => {
                // Field reads work regardless of the tag: reading metadata
                // exercises no authority.
                let (cap, _) = self.regs.creg(rs1);
                let value = match op {
                    Cgetperm => cap.perms().bits() as u64,
                    Cgetbase => cap.base(),
                    Cgetlen => cap.len(),
                    Cgetaddr => cap.cursor(),
                    Cgetuninit => cap.uninit_bit(),
                    _ => unreachable!(),
                };
                self.regs.set_gpr(rd, value);
                deltas.push(Delta::Reg {
                    reg: RegName::R(rd),
                    value: TaggedWord::Data(self.regs.gpr(rd)),
                });
            }
            Candperm | Cmove | Csetoffset | Cincoffset | Cincoffsetimm | Csetaddr | Candaddr
            | Csetbounds | Csetboundsimm | Cuninit | Cshrink | Cshrinkimm => {
                let (cap, tag) = self.regs.creg(rs1);
                if !tag {
                    return Err(TrapCause::Cap(CapError::TagViolation { cap }));
                }
                let derived = match op {
                    Candperm => {
                        cap.and_perm(Permissions::from_bits(self.regs.gpr(rs2) as u8))
                    }
                    Cmove => cap,
                    Csetoffset => {
                        cap.set_cursor(cap.base().wrapping_add(self.regs.gpr(rs2)))
                            .map_err(TrapCause::Cap)?
                    }
                    Cincoffset => {
                        cap.set_cursor(cap.cursor().wrapping_add(self.regs.gpr(rs2)))
                            .map_err(TrapCause::Cap)?
                    }
                    Cincoffsetimm => {
                        cap.set_cursor(cap.cursor().wrapping_add_signed(imm as i64))
                            .map_err(TrapCause::Cap)?
                    }
                    Csetaddr => cap.set_cursor(self.regs.gpr(rs2)).map_err(TrapCause::Cap)?,
                    Candaddr => {
                        cap.set_cursor(cap.cursor() & self.regs.gpr(rs2))
                            .map_err(TrapCause::Cap)?
                    }
                    Csetbounds => cap.set_bounds(self.regs.gpr(rs2)).map_err(TrapCause::Cap)?,
                    Csetboundsimm => cap.set_bounds(imm as u32 as u64).map_err(TrapCause::Cap)?,
                    Cuninit => cap.derive_uninit().map_err(TrapCause::Cap)?,
                    Cshrink => cap.shrink(self.regs.gpr(rs2)).map_err(TrapCause::Cap)?,
                    Cshrinkimm => cap.shrink_imm(imm as u32 as u64).map_err(TrapCause::Cap)?,
                    _ => unreachable!(),
                };
                self.regs.set_creg(rd, derived, true);
                deltas.push(Delta::Reg {
                    reg: RegName::C(rd),
                    value: TaggedWord::Cap(derived, true),
                });
            }
        }

        self.set_pc(next);
        Ok(deltas)
    }

    /// The store path shared by all `ucs*` widths: with `U` set and an
    /// offset of −1 the store lands immediately below the cursor and the
    /// result capability's cursor drops by exactly the bytes written — the
    /// only cursor decrement in the machine. Any other combination is a
    /// plain store with the capability passed through unchanged.
    fn exec_ucstore(&mut self, instr: Instruction) -> Result<Vec<Delta>, TrapCause> {
        let Instruction { op, rd, rs1, rs2, imm } = instr;
        let size = op.access_size().unwrap();
        let (cap, tag) = self.regs.creg(rs2);
        if !tag {
            return Err(TrapCause::Cap(CapError::TagViolation { cap }));
        }
        let decrement = cap.perms().uninit() && imm == -1;
        // With imm = −1 both paths agree on ea = cursor − size; they differ
        // only in whether the result capability's cursor moves.
        let ea = effective_addr(cap.cursor(), imm, size);
        cap.check_access(ea, size, AccessKind::Write)
            .map_err(TrapCause::Cap)?;
        if ea % size != 0 {
            return Err(TrapCause::Cap(CapError::AlignmentViolation {
                addr: ea,
                required: size,
            }));
        }

        let mut deltas = Vec::new();
        if op == Opcode::Ucsc {
            let (stored, stored_tag) = self.regs.creg(rs1);
            self.mem
                .write_cap(ea, stored, stored_tag)
                .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
            deltas.push(Delta::Mem {
                addr: ea,
                size,
                value: TaggedWord::Cap(stored, stored_tag),
            });
        } else {
            let value = self.regs.gpr(rs1);
            self.mem
                .write_data(ea, size, value)
                .map_err(|e| TrapCause::Cap(mem_trap(cap, e)))?;
            deltas.push(Delta::Mem {
                addr: ea,
                size,
                value: TaggedWord::Data(value & mask(size)),
            });
        }

        let result = if decrement { cap.with_cursor(ea) } else { cap };
        self.regs.set_creg(rd, result, true);
        deltas.push(Delta::Reg {
            reg: RegName::C(rd),
            value: TaggedWord::Cap(result, true),
        });
        self.set_pc(self.regs.pcc.cursor().wrapping_add(8));
        Ok(deltas)
    }

    /// Resolves a memory operand: tag check, effective address, capability
    /// check, then natural alignment.
    fn mem_operand(
        &self,
        creg: u8,
        imm: i32,
        size: u64,
        kind: AccessKind,
    ) -> Result<(Capability, u64), TrapCause> {
        let (cap, tag) = self.regs.creg(creg);
        if !tag {
            return Err(TrapCause::Cap(CapError::TagViolation { cap }));
        }
        let ea = effective_addr(cap.cursor(), imm, size);
        cap.check_access(ea, size, kind).map_err(TrapCause::Cap)?;
        if ea % size != 0 {
            return Err(TrapCause::Cap(CapError::AlignmentViolation {
                addr: ea,
                required: size,
            }));
        }
        Ok((cap, ea))
    }

    fn set_pc(&mut self, target: u64) {
        self.regs.pcc = self
            .regs
            .pcc
            .set_cursor(target)
            .expect("pcc is never uninit");
    }
}

/// Memory-operand address: the capability's cursor plus the immediate
/// scaled by the access size, wrapping (bounds checks catch wraps).
fn effective_addr(cursor: u64, imm: i32, size: u64) -> u64 {
    cursor.wrapping_add_signed(imm as i64 * size as i64)
}

fn mask(size: u64) -> u64 {
    if size >= 8 {
        u64::MAX
    } else {
        (1u64 << (size * 8)) - 1
    }
}

/// A raw memory failure surfaced through the capability that authorized the
/// access: out-of-memory becomes a bounds trap, misalignment an alignment
/// trap.
fn mem_trap(cap: Capability, e: MemError) -> CapError {
    match e {
        MemError::OutOfRange { addr, size } => CapError::BoundsViolation { cap, addr, size },
        MemError::Misaligned { addr, required } => CapError::AlignmentViolation { addr, required },
    }
}
