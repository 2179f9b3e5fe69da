//! Instruction set: opcode table, operand forms, and the fixed 8-byte
//! little-endian encoding.
//!
//! Encoding layout: byte 0 opcode, byte 1 `rd`, byte 2 `rs1`, byte 3 `rs2`,
//! bytes 4–7 a signed 32-bit immediate. Whether a register byte names a
//! general-purpose or a capability register is a property of the opcode's
//! operand form, not of the encoding.

use std::fmt;

/// Every opcode, with its fixed encoding byte. Gaps are reserved; decoding
/// them fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    // Scalar core.
    Add = 0x01,
    Sub = 0x02,
    And = 0x03,
    Or = 0x04,
    Xor = 0x05,
    Sll = 0x06,
    Srl = 0x07,
    Slt = 0x08,
    Addi = 0x09,
    Li = 0x0A,
    Mov = 0x0B,
    Halt = 0x0F,
    // Control flow.
    J = 0x10,
    Beq = 0x11,
    Bne = 0x12,
    Cjr = 0x15,
    Cjalr = 0x16,
    // Loads through a capability.
    Clb = 0x20,
    Clbu = 0x21,
    Clh = 0x22,
    Clhu = 0x23,
    Clw = 0x24,
    Clwu = 0x25,
    Cld = 0x26,
    Clc = 0x27,
    // Stores through a capability.
    Csb = 0x30,
    Csh = 0x31,
    Csw = 0x32,
    Csd = 0x33,
    Csc = 0x34,
    // Uninitialized stores: the only cursor-decrementing instructions.
    Ucsb = 0x38,
    Ucsh = 0x39,
    Ucsw = 0x3A,
    Ucsd = 0x3B,
    Ucsc = 0x3C,
    // Capability field reads.
    Cgetperm = 0x40,
    Cgetbase = 0x41,
    Cgetlen = 0x42,
    Cgetaddr = 0x43,
    Cgetuninit = 0x44,
    // Capability derivation.
    Candperm = 0x48,
    Cmove = 0x49,
    Csetoffset = 0x4A,
    Cincoffset = 0x4B,
    Cincoffsetimm = 0x4C,
    Csetaddr = 0x4D,
    Candaddr = 0x4E,
    Csetbounds = 0x50,
    Csetboundsimm = 0x51,
    Cuninit = 0x52,
    Cshrink = 0x53,
    Cshrinkimm = 0x54,
}

/// Operand shape of an opcode: what the assembler parses, what the
/// disassembler prints, and which register bytes index which file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperandForm {
    /// `op rd, rs1, rs2` — all general-purpose.
    ThreeReg,
    /// `op rd, rs1, imm`.
    TwoRegImm,
    /// `op rd, imm`.
    RegImm,
    /// `op rd, rs1`.
    TwoReg,
    /// Bare mnemonic.
    NoArgs,
    /// `j target` — imm counts instructions from the next one.
    Jump,
    /// `op rs1, rs2, target`.
    Branch,
    /// `cjr crs1`.
    CapJump,
    /// `cjalr crd, crs1` — link capability written to `crd`.
    CapJumpLink,
    /// `op rd, imm(crs2)` — data load, `rd` general-purpose.
    Load,
    /// `clc crd, imm(crs2)`.
    CapLoad,
    /// `op rs1, imm(crs2)` — data store, value from `rs1`.
    Store,
    /// `csc crs1, imm(crs2)`.
    CapStore,
    /// `op crd, rs1, imm(crs2)` — store that may decrement the cursor,
    /// updated capability written to `crd`.
    UStore,
    /// `ucsc crd, crs1, imm(crs2)`.
    UCapStore,
    /// `op rd, crs1` — capability field into a general-purpose register.
    CapGet,
    /// `op crd, crs1`.
    CapTwoReg,
    /// `op crd, crs1, rs2` — derivation with a general-purpose operand.
    CapRegReg,
    /// `op crd, crs1, imm`.
    CapRegImm,
}

impl Opcode {
    /// All opcodes in encoding order; drives exhaustive round-trip tests
    /// and the published table in the ISA reference.
    pub const ALL: [Opcode; 52] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Sll,
        Opcode::Srl,
        Opcode::Slt,
        Opcode::Addi,
        Opcode::Li,
        Opcode::Mov,
        Opcode::Halt,
        Opcode::J,
        Opcode::Beq,
        Opcode::Bne,
        Opcode::Cjr,
        Opcode::Cjalr,
        Opcode::Clb,
        Opcode::Clbu,
        Opcode::Clh,
        Opcode::Clhu,
        Opcode::Clw,
        Opcode::Clwu,
        Opcode::Cld,
        Opcode::Clc,
        Opcode::Csb,
        Opcode::Csh,
        Opcode::Csw,
        Opcode::Csd,
        Opcode::Csc,
        Opcode::Ucsb,
        Opcode::Ucsh,
        Opcode::Ucsw,
        Opcode::Ucsd,
        Opcode::Ucsc,
        Opcode::Cgetperm,
        Opcode::Cgetbase,
        Opcode::Cgetlen,
        Opcode::Cgetaddr,
        Opcode::Cgetuninit,
        Opcode::Candperm,
        Opcode::Cmove,
        Opcode::Csetoffset,
        Opcode::Cincoffset,
        Opcode::Cincoffsetimm,
        Opcode::Csetaddr,
        Opcode::Candaddr,
        Opcode::Csetbounds,
        Opcode::Csetboundsimm,
        Opcode::Cuninit,
        Opcode::Cshrink,
        Opcode::Cshrinkimm,
    ];

    pub fn from_byte(byte: u8) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| *op as u8 == byte)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Sll => "sll",
            Opcode::Srl => "srl",
            Opcode::Slt => "slt",
            Opcode::Addi => "addi",
            Opcode::Li => "li",
            Opcode::Mov => "mov",
            Opcode::Halt => "halt",
            Opcode::J => "j",
            Opcode::Beq => "beq",
            Opcode::Bne => "bne",
            Opcode::Cjr => "cjr",
            Opcode::Cjalr => "cjalr",
            Opcode::Clb => "clb",
            Opcode::Clbu => "clbu",
            Opcode::Clh => "clh",
            Opcode::Clhu => "clhu",
            Opcode::Clw => "clw",
            Opcode::Clwu => "clwu",
            Opcode::Cld => "cld",
            Opcode::Clc => "clc",
            Opcode::Csb => "csb",
            Opcode::Csh => "csh",
            Opcode::Csw => "csw",
            Opcode::Csd => "csd",
            Opcode::Csc => "csc",
            Opcode::Ucsb => "ucsb",
            Opcode::Ucsh => "ucsh",
            Opcode::Ucsw => "ucsw",
            Opcode::Ucsd => "ucsd",
            Opcode::Ucsc => "ucsc",
            Opcode::Cgetperm => "cgetperm",
            Opcode::Cgetbase => "cgetbase",
            Opcode::Cgetlen => "cgetlen",
            Opcode::Cgetaddr => "cgetaddr",
            Opcode::Cgetuninit => "cgetuninit",
            Opcode::Candperm => "candperm",
            Opcode::Cmove => "cmove",
            Opcode::Csetoffset => "csetoffset",
            Opcode::Cincoffset => "cincoffset",
            Opcode::Cincoffsetimm => "cincoffsetimm",
            Opcode::Csetaddr => "csetaddr",
            Opcode::Candaddr => "candaddr",
            Opcode::Csetbounds => "csetbounds",
            Opcode::Csetboundsimm => "csetboundsimm",
            Opcode::Cuninit => "cuninit",
            Opcode::Cshrink => "cshrink",
            Opcode::Cshrinkimm => "cshrinkimm",
        }
    }

    pub fn from_mnemonic(name: &str) -> Option<Opcode> {
        Opcode::ALL
            .iter()
            .copied()
            .find(|op| op.mnemonic() == name)
    }

    pub fn form(self) -> OperandForm {
        use OperandForm::*;
        match self {
            Opcode::Add
            | Opcode::Sub
            | Opcode::And
            | Opcode::Or
            | Opcode::Xor
            | Opcode::Sll
            | Opcode::Srl
            | Opcode::Slt => ThreeReg,
            Opcode::Addi => TwoRegImm,
            Opcode::Li => RegImm,
            Opcode::Mov => TwoReg,
            Opcode::Halt => NoArgs,
            Opcode::J => Jump,
            Opcode::Beq | Opcode::Bne => Branch,
            Opcode::Cjr => CapJump,
            Opcode::Cjalr => CapJumpLink,
            Opcode::Clb
            | Opcode::Clbu
            | Opcode::Clh
            | Opcode::Clhu
            | Opcode::Clw
            | Opcode::Clwu
            | Opcode::Cld => Load,
            Opcode::Clc => CapLoad,
            Opcode::Csb | Opcode::Csh | Opcode::Csw | Opcode::Csd => Store,
            Opcode::Csc => CapStore,
            Opcode::Ucsb | Opcode::Ucsh | Opcode::Ucsw | Opcode::Ucsd => UStore,
            Opcode::Ucsc => UCapStore,
            Opcode::Cgetperm
            | Opcode::Cgetbase
            | Opcode::Cgetlen
            | Opcode::Cgetaddr
            | Opcode::Cgetuninit => CapGet,
            Opcode::Cmove | Opcode::Cuninit => CapTwoReg,
            Opcode::Candperm
            | Opcode::Csetoffset
            | Opcode::Cincoffset
            | Opcode::Csetaddr
            | Opcode::Candaddr
            | Opcode::Csetbounds
            | Opcode::Cshrink => CapRegReg,
            Opcode::Cincoffsetimm | Opcode::Csetboundsimm | Opcode::Cshrinkimm => CapRegImm,
        }
    }

    /// Access width in bytes for memory instructions, `None` otherwise.
    pub fn access_size(self) -> Option<u64> {
        match self {
            Opcode::Clb | Opcode::Clbu | Opcode::Csb | Opcode::Ucsb => Some(1),
            Opcode::Clh | Opcode::Clhu | Opcode::Csh | Opcode::Ucsh => Some(2),
            Opcode::Clw | Opcode::Clwu | Opcode::Csw | Opcode::Ucsw => Some(4),
            Opcode::Cld | Opcode::Csd | Opcode::Ucsd => Some(8),
            Opcode::Clc | Opcode::Csc | Opcode::Ucsc => Some(32),
            _ => None,
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Why an 8-byte word failed to decode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeError {
    UnknownOpcode(u8),
    BadRegister(u8),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::UnknownOpcode(b) => write!(f, "unknown opcode 0x{b:02x}"),
            DecodeError::BadRegister(r) => write!(f, "register index {r} out of range"),
        }
    }
}

impl std::error::Error for DecodeError {}

/// One decoded instruction. Register fields an opcode's form does not use
/// are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub op: Opcode,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i32,
}

impl Instruction {
    pub fn new(op: Opcode, rd: u8, rs1: u8, rs2: u8, imm: i32) -> Instruction {
        assert!(rd < 32 && rs1 < 32 && rs2 < 32, "register index out of range");
        Instruction { op, rd, rs1, rs2, imm }
    }

    pub fn encode(&self) -> [u8; 8] {
        debug_assert!(self.rd < 32 && self.rs1 < 32 && self.rs2 < 32);
        let mut word = [0u8; 8];
        word[0] = self.op as u8;
        word[1] = self.rd;
        word[2] = self.rs1;
        word[3] = self.rs2;
        word[4..8].copy_from_slice(&self.imm.to_le_bytes());
        word
    }

    pub fn decode(word: [u8; 8]) -> Result<Instruction, DecodeError> {
        let op = Opcode::from_byte(word[0]).ok_or(DecodeError::UnknownOpcode(word[0]))?;
        for reg in [word[1], word[2], word[3]] {
            if reg >= 32 {
                return Err(DecodeError::BadRegister(reg));
            }
        }
        Ok(Instruction {
            op,
            rd: word[1],
            rs1: word[2],
            rs2: word[3],
            imm: i32::from_le_bytes(word[4..8].try_into().unwrap()),
        })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use OperandForm::*;
        let Instruction { op, rd, rs1, rs2, imm } = *self;
        match op.form() {
            ThreeReg => write!(f, "{op} r{rd}, r{rs1}, r{rs2}"),
            TwoRegImm => write!(f, "{op} r{rd}, r{rs1}, {imm}"),
            RegImm => write!(f, "{op} r{rd}, {imm}"),
            TwoReg => write!(f, "{op} r{rd}, r{rs1}"),
            NoArgs => write!(f, "{op}"),
            Jump => write!(f, "{op} {imm}"),
            Branch => write!(f, "{op} r{rs1}, r{rs2}, {imm}"),
            CapJump => write!(f, "{op} c{rs1}"),
            CapJumpLink => write!(f, "{op} c{rd}, c{rs1}"),
            Load => write!(f, "{op} r{rd}, {imm}(c{rs2})"),
            CapLoad => write!(f, "{op} c{rd}, {imm}(c{rs2})"),
            Store => write!(f, "{op} r{rs1}, {imm}(c{rs2})"),
            CapStore => write!(f, "{op} c{rs1}, {imm}(c{rs2})"),
            UStore => write!(f, "{op} c{rd}, r{rs1}, {imm}(c{rs2})"),
            UCapStore => write!(f, "{op} c{rd}, c{rs1}, {imm}(c{rs2})"),
            CapGet => write!(f, "{op} r{rd}, c{rs1}"),
            CapTwoReg => write!(f, "{op} c{rd}, c{rs1}"),
            CapRegReg => write!(f, "{op} c{rd}, c{rs1}, r{rs2}"),
            CapRegImm => write!(f, "{op} c{rd}, c{rs1}, {imm}"),
        }
    }
}
