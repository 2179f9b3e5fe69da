//! Two-pass assembler for the textual assembly language.
//!
//! Pass 1 (`parse`) checks syntax: mnemonics, operand shapes, directive
//! arguments, duplicate labels. Pass 2 (`assemble`) lays out addresses,
//! resolves labels — branch targets become instruction counts relative to
//! the next instruction, everything else resolves to absolute addresses —
//! and emits the binary encoding.
//!
//! Grammar per line: `[label:] item [# comment]` where item is an
//! instruction or a directive. Directives: `.text [ADDR]`, `.data [ADDR]`,
//! `.stack BASE,END`, `.entry LABEL`, `.word N`, `.byte N`, `.space N`,
//! `.cap PERMS,BASE,END,CURSOR`. `.word` emits 8 little-endian bytes (the
//! machine's natural load/store unit). Mnemonics and registers are
//! case-insensitive; labels are case-sensitive.

use std::collections::HashMap;
use std::fmt;

use crate::cap::{Capability, Permissions};
use crate::image::{DataEntry, DataPayload, ProgramImage};
use crate::isa::{Instruction, Opcode, OperandForm};

/// Default code base when no `.text` directive gives one.
pub const DEFAULT_CODE_BASE: u64 = 0x0000;
/// Default data placement when no `.data` directive gives one.
pub const DEFAULT_DATA_BASE: u64 = 0x4000;
/// Default stack range when no `.stack` directive gives one.
pub const DEFAULT_STACK: (u64, u64) = (0x8000, 0x10000);

/// A located assembler error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file, self.line, self.col, self.message)
    }
}

/// An immediate operand: a literal (stored as its 64-bit pattern) or a
/// label reference, resolved in pass 2.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Imm {
    Lit(i64),
    Label(String, u32),
}

/// A parsed instruction with possibly unresolved immediate.
#[derive(Clone, Debug)]
struct ParsedInstr {
    op: Opcode,
    rd: u8,
    rs1: u8,
    rs2: u8,
    imm: Imm,
}

#[derive(Clone, Debug)]
enum Item {
    Instr(ParsedInstr),
    Text(Option<u64>),
    Data(Option<u64>),
    Stack(u64, u64),
    Entry(String, u32),
    Word(Imm),
    Byte(u8),
    Space(u64),
    Cap {
        perms: Permissions,
        base: Imm,
        end: Imm,
        cursor: Imm,
    },
}

#[derive(Clone, Debug)]
struct SourceLine {
    line: u32,
    label: Option<String>,
    item: Option<Item>,
}

/// Parse output: the file's lines with labels and typed items, syntax
/// already validated.
#[derive(Clone, Debug)]
pub struct SourceUnit {
    file: String,
    lines: Vec<SourceLine>,
}

/// Syntax pass: line grammar, mnemonics, operand shapes, directive
/// arguments, duplicate labels. All errors are collected, not just the
/// first.
pub fn parse(file: &str, source: &str) -> Result<SourceUnit, Vec<Diagnostic>> {
    let mut lines = Vec::new();
    let mut diags = Vec::new();
    let mut seen_labels: HashMap<String, u32> = HashMap::new();

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let diag = |col: u32, message: String| Diagnostic {
            file: file.to_string(),
            line: line_no,
            col,
            message,
        };

        let text = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        };

        let mut label = None;
        let mut rest = text;
        let mut rest_at = 0usize;
        if let Some(colon) = text.find(':') {
            let candidate = text[..colon].trim();
            if is_label(candidate) {
                if let Some(first) = seen_labels.get(candidate) {
                    diags.push(diag(
                        col_at(text, candidate) as u32,
                        format!("duplicate label `{candidate}` (first defined on line {first})"),
                    ));
                } else {
                    seen_labels.insert(candidate.to_string(), line_no);
                }
                label = Some(candidate.to_string());
                rest = &text[colon + 1..];
                rest_at = colon + 1;
            }
        }

        let body = rest.trim();
        if body.is_empty() {
            if label.is_some() {
                lines.push(SourceLine {
                    line: line_no,
                    label,
                    item: None,
                });
            }
            continue;
        }
        let body_col = (rest_at + col_at(rest, body)) as u32;

        let (head, tail) = match body.find(char::is_whitespace) {
            Some(at) => (&body[..at], body[at..].trim_start()),
            None => (body, ""),
        };
        let tail_col = body_col + (body.len() - tail.len()) as u32;

        let item = if let Some(directive) = head.strip_prefix('.') {
            parse_directive(directive, tail, body_col, tail_col, &diag)
        } else {
            parse_instr(head, tail, body_col, tail_col, &diag)
        };
        match item {
            Ok(item) => lines.push(SourceLine {
                line: line_no,
                label,
                item: Some(item),
            }),
            Err(e) => diags.push(e),
        }
    }

    if diags.is_empty() {
        Ok(SourceUnit {
            file: file.to_string(),
            lines,
        })
    } else {
        Err(diags)
    }
}

fn is_label(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// 0-based byte offset of `needle` (a slice of `hay`) within `hay`.
fn col_at(hay: &str, needle: &str) -> usize {
    needle.as_ptr() as usize - hay.as_ptr() as usize
}

/// Splits an operand list on top-level commas, keeping each operand's
/// column (1-based, relative to the given start).
fn split_operands(s: &str, start: u32) -> Vec<(u32, &str)> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(',')
        .map(|part| {
            let trimmed = part.trim();
            (start + col_at(s, trimmed) as u32 + 1, trimmed)
        })
        .collect()
}

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let (neg, t) = match s.strip_prefix('-') {
        Some(t) => (true, t),
        None => (false, s),
    };
    let mag: u128 = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u128::from_str_radix(hex, 16).ok()?
    } else {
        t.parse().ok()?
    };
    if neg {
        (mag <= 1 << 63).then(|| (mag as i128).wrapping_neg() as i64)
    } else {
        (mag <= u64::MAX as u128).then(|| mag as u64 as i64)
    }
}

fn parse_reg(s: &str, prefix: char) -> Option<u8> {
    let lower = s.to_ascii_lowercase();
    let num = lower.strip_prefix(prefix)?;
    if num.len() > 1 && num.starts_with('0') {
        return None;
    }
    num.parse::<u8>().ok().filter(|n| *n < 32)
}

fn parse_perms(s: &str) -> Option<Permissions> {
    let mut perms = Permissions::NONE;
    for c in s.chars() {
        perms = perms
            | match c.to_ascii_uppercase() {
                '+' => continue,
                'R' => Permissions::R,
                'W' => Permissions::W,
                'X' => Permissions::X,
                'U' => Permissions::U,
                _ => return None,
            };
    }
    perms.is_valid().then_some(perms)
}

/// An immediate operand: integer literal or label reference.
fn parse_imm(col: u32, s: &str) -> Result<Imm, String> {
    if let Some(v) = parse_int(s) {
        Ok(Imm::Lit(v))
    } else if is_label(s) {
        Ok(Imm::Label(s.to_string(), col))
    } else {
        Err(format!("expected an integer or label, got `{s}`"))
    }
}

/// A memory operand `OFFSET(cN)`; the base must be a capability register.
fn parse_memref(s: &str) -> Result<(i64, u8), String> {
    let open = s.find('(').ok_or_else(|| memref_shape(s))?;
    let close = s.strip_suffix(')').ok_or_else(|| memref_shape(s))?;
    let offset_str = s[..open].trim();
    let reg_str = close[open + 1..].trim();
    let offset = parse_int(offset_str).ok_or_else(|| memref_shape(s))?;
    match parse_reg(reg_str, 'c') {
        Some(c) => Ok((offset, c)),
        None if parse_reg(reg_str, 'r').is_some() => {
            Err("memory base must be a capability register".to_string())
        }
        None => Err(memref_shape(s)),
    }
}

fn memref_shape(s: &str) -> String {
    format!("expected a memory operand `imm(cN)`, got `{s}`")
}

fn parse_instr(
    head: &str,
    tail: &str,
    head_col: u32,
    tail_col: u32,
    diag: &dyn Fn(u32, String) -> Diagnostic,
) -> Result<Item, Diagnostic> {
    use OperandForm::*;
    let op = Opcode::from_mnemonic(&head.to_ascii_lowercase())
        .ok_or_else(|| diag(head_col + 1, format!("unknown mnemonic `{head}`")))?;
    let ops = split_operands(tail, tail_col);

    let expect = |n: usize| -> Result<(), Diagnostic> {
        if ops.len() == n {
            Ok(())
        } else {
            Err(diag(
                head_col + 1,
                format!(
                    "{} expects {n} operand{}, got {}",
                    op.mnemonic(),
                    if n == 1 { "" } else { "s" },
                    ops.len()
                ),
            ))
        }
    };
    let gpr = |i: usize| -> Result<u8, Diagnostic> {
        parse_reg(ops[i].1, 'r')
            .ok_or_else(|| diag(ops[i].0, format!("expected a register r0–r31, got `{}`", ops[i].1)))
    };
    let creg = |i: usize| -> Result<u8, Diagnostic> {
        parse_reg(ops[i].1, 'c').ok_or_else(|| {
            diag(
                ops[i].0,
                format!("expected a capability register c0–c31, got `{}`", ops[i].1),
            )
        })
    };
    let imm = |i: usize| -> Result<Imm, Diagnostic> {
        parse_imm(ops[i].0, ops[i].1).map_err(|m| diag(ops[i].0, m))
    };
    let lit = |i: usize| -> Result<i64, Diagnostic> {
        parse_int(ops[i].1)
            .ok_or_else(|| diag(ops[i].0, format!("expected an integer, got `{}`", ops[i].1)))
    };
    let memref = |i: usize| -> Result<(i64, u8), Diagnostic> {
        parse_memref(ops[i].1).map_err(|m| diag(ops[i].0, m))
    };

    let mut instr = ParsedInstr {
        op,
        rd: 0,
        rs1: 0,
        rs2: 0,
        imm: Imm::Lit(0),
    };
    match op.form() {
        ThreeReg => {
            expect(3)?;
            instr.rd = gpr(0)?;
            instr.rs1 = gpr(1)?;
            instr.rs2 = gpr(2)?;
        }
        TwoRegImm => {
            expect(3)?;
            instr.rd = gpr(0)?;
            instr.rs1 = gpr(1)?;
            instr.imm = Imm::Lit(lit(2)?);
        }
        RegImm => {
            expect(2)?;
            instr.rd = gpr(0)?;
            instr.imm = imm(1)?;
        }
        TwoReg => {
            expect(2)?;
            instr.rd = gpr(0)?;
            instr.rs1 = gpr(1)?;
        }
        NoArgs => expect(0)?,
        Jump => {
            expect(1)?;
            instr.imm = imm(0)?;
        }
        Branch => {
            expect(3)?;
            instr.rs1 = gpr(0)?;
            instr.rs2 = gpr(1)?;
            instr.imm = imm(2)?;
        }
        CapJump => {
            expect(1)?;
            instr.rs1 = creg(0)?;
        }
        CapJumpLink => {
            expect(2)?;
            instr.rd = creg(0)?;
            instr.rs1 = creg(1)?;
        }
        Load => {
            expect(2)?;
            instr.rd = gpr(0)?;
            let (offset, base) = memref(1)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        CapLoad => {
            expect(2)?;
            instr.rd = creg(0)?;
            let (offset, base) = memref(1)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        Store => {
            expect(2)?;
            instr.rs1 = gpr(0)?;
            let (offset, base) = memref(1)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        CapStore => {
            expect(2)?;
            instr.rs1 = creg(0)?;
            let (offset, base) = memref(1)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        UStore => {
            expect(3)?;
            instr.rd = creg(0)?;
            instr.rs1 = gpr(1)?;
            let (offset, base) = memref(2)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        UCapStore => {
            expect(3)?;
            instr.rd = creg(0)?;
            instr.rs1 = creg(1)?;
            let (offset, base) = memref(2)?;
            instr.imm = Imm::Lit(offset);
            instr.rs2 = base;
        }
        CapGet => {
            expect(2)?;
            instr.rd = gpr(0)?;
            instr.rs1 = creg(1)?;
        }
        CapTwoReg => {
            expect(2)?;
            instr.rd = creg(0)?;
            instr.rs1 = creg(1)?;
        }
        CapRegReg => {
            expect(3)?;
            instr.rd = creg(0)?;
            instr.rs1 = creg(1)?;
            instr.rs2 = gpr(2)?;
        }
        CapRegImm => {
            expect(3)?;
            instr.rd = creg(0)?;
            instr.rs1 = creg(1)?;
            instr.imm = Imm::Lit(lit(2)?);
        }
    }
    Ok(Item::Instr(instr))
}

fn parse_directive(
    name: &str,
    tail: &str,
    head_col: u32,
    tail_col: u32,
    diag: &dyn Fn(u32, String) -> Diagnostic,
) -> Result<Item, Diagnostic> {
    let ops = split_operands(tail, tail_col);
    let expect = |lo: usize, hi: usize| -> Result<(), Diagnostic> {
        if (lo..=hi).contains(&ops.len()) {
            Ok(())
        } else {
            let want = if hi > lo {
                format!("{lo} to {hi}")
            } else {
                lo.to_string()
            };
            Err(diag(
                head_col + 1,
                format!(".{name} expects {want} argument(s), got {}", ops.len()),
            ))
        }
    };
    let lit = |i: usize| -> Result<i64, Diagnostic> {
        parse_int(ops[i].1)
            .ok_or_else(|| diag(ops[i].0, format!("expected an integer, got `{}`", ops[i].1)))
    };
    let addr = |i: usize| -> Result<u64, Diagnostic> {
        let v = lit(i)?;
        if v < 0 {
            Err(diag(ops[i].0, format!("address may not be negative: {v}")))
        } else {
            Ok(v as u64)
        }
    };
    let imm = |i: usize| -> Result<Imm, Diagnostic> {
        parse_imm(ops[i].0, ops[i].1).map_err(|m| diag(ops[i].0, m))
    };

    match name.to_ascii_lowercase().as_str() {
        "text" => {
            expect(0, 1)?;
            Ok(Item::Text(if ops.is_empty() { None } else { Some(addr(0)?) }))
        }
        "data" => {
            expect(0, 1)?;
            Ok(Item::Data(if ops.is_empty() { None } else { Some(addr(0)?) }))
        }
        "stack" => {
            expect(2, 2)?;
            Ok(Item::Stack(addr(0)?, addr(1)?))
        }
        "entry" => {
            expect(1, 1)?;
            if is_label(ops[0].1) {
                Ok(Item::Entry(ops[0].1.to_string(), ops[0].0))
            } else {
                Err(diag(ops[0].0, format!("expected a label, got `{}`", ops[0].1)))
            }
        }
        "word" => {
            expect(1, 1)?;
            Ok(Item::Word(imm(0)?))
        }
        "byte" => {
            expect(1, 1)?;
            let v = lit(0)?;
            if !(-128..=255).contains(&v) {
                return Err(diag(ops[0].0, format!("byte value out of range: {v}")));
            }
            Ok(Item::Byte(v as u8))
        }
        "space" => {
            expect(1, 1)?;
            let v = lit(0)?;
            if v < 0 {
                return Err(diag(ops[0].0, format!("space size may not be negative: {v}")));
            }
            Ok(Item::Space(v as u64))
        }
        "cap" => {
            expect(4, 4)?;
            let perms = parse_perms(ops[0].1).ok_or_else(|| {
                diag(
                    ops[0].0,
                    format!("invalid permission set `{}` (use R, W, X, U)", ops[0].1),
                )
            })?;
            Ok(Item::Cap {
                perms,
                base: imm(1)?,
                end: imm(2)?,
                cursor: imm(3)?,
            })
        }
        other => Err(diag(head_col + 1, format!("unknown directive `.{other}`"))),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Text,
    Data,
}

/// Layout-and-encode pass over a parsed unit.
pub fn assemble(unit: &SourceUnit) -> Result<ProgramImage, Vec<Diagnostic>> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let diag = |diags: &mut Vec<Diagnostic>, line: u32, col: u32, message: String| {
        diags.push(Diagnostic {
            file: unit.file.clone(),
            line,
            col,
            message,
        });
    };

    // Pass 1: assign addresses to every instruction, data item, and label.
    let mut section = Section::Text;
    let mut code_base = DEFAULT_CODE_BASE;
    let mut text_started = false;
    let mut n_instr = 0u64;
    let mut data_cursor: Option<u64> = None;
    let mut labels: HashMap<&str, (u64, Section)> = HashMap::new();
    let mut stack: Option<(u64, u64)> = None;
    let mut entry: Option<(&str, u32, u32)> = None;
    // (source line, code index) for pass 2, and (line, addr, item) data plan.
    let mut instr_plan: Vec<(&SourceLine, u64)> = Vec::new();
    let mut data_plan: Vec<(&SourceLine, u64)> = Vec::new();

    for sl in &unit.lines {
        // Section switches take effect before the line's label binds.
        match &sl.item {
            Some(Item::Text(at)) => {
                if text_started {
                    diag(
                        &mut diags,
                        sl.line,
                        1,
                        ".text must precede all instructions and code labels".to_string(),
                    );
                } else if let Some(at) = at {
                    code_base = *at;
                }
                section = Section::Text;
            }
            Some(Item::Data(at)) => {
                section = Section::Data;
                data_cursor = Some(at.unwrap_or(DEFAULT_DATA_BASE));
            }
            _ => {}
        }

        if sl.label.is_some() {
            let here = match section {
                Section::Text => {
                    text_started = true;
                    code_base + n_instr * 8
                }
                Section::Data => *data_cursor.get_or_insert(DEFAULT_DATA_BASE),
            };
            labels.insert(sl.label.as_deref().unwrap(), (here, section));
        }

        match &sl.item {
            None | Some(Item::Text(_)) | Some(Item::Data(_)) => {}
            Some(Item::Stack(base, end)) => {
                if stack.is_some() {
                    diag(&mut diags, sl.line, 1, "duplicate .stack directive".to_string());
                } else if base > end {
                    diag(
                        &mut diags,
                        sl.line,
                        1,
                        format!("stack range inverted: 0x{base:x}..0x{end:x}"),
                    );
                } else {
                    stack = Some((*base, *end));
                }
            }
            Some(Item::Entry(name, col)) => {
                if entry.is_some() {
                    diag(&mut diags, sl.line, 1, "duplicate .entry directive".to_string());
                } else {
                    entry = Some((name, sl.line, *col));
                }
            }
            Some(Item::Instr(_)) => {
                if section != Section::Text {
                    diag(
                        &mut diags,
                        sl.line,
                        1,
                        "instructions belong in the text section".to_string(),
                    );
                    continue;
                }
                text_started = true;
                instr_plan.push((sl, code_base + n_instr * 8));
                n_instr += 1;
            }
            Some(item @ (Item::Word(_) | Item::Byte(_) | Item::Space(_) | Item::Cap { .. })) => {
                if section != Section::Data {
                    diag(
                        &mut diags,
                        sl.line,
                        1,
                        "data directives belong in the data section (use .data)".to_string(),
                    );
                    continue;
                }
                let cursor = data_cursor.get_or_insert(DEFAULT_DATA_BASE);
                let here = *cursor;
                let len = match item {
                    Item::Word(_) => 8,
                    Item::Byte(_) => 1,
                    Item::Space(n) => *n,
                    Item::Cap { .. } => 32,
                    _ => unreachable!(),
                };
                if let Item::Cap { .. } = item {
                    if here % 32 != 0 {
                        diag(
                            &mut diags,
                            sl.line,
                            1,
                            format!(".cap at unaligned address 0x{here:x} (32-byte lines)"),
                        );
                    }
                }
                if !matches!(item, Item::Space(_)) {
                    data_plan.push((sl, here));
                }
                *cursor = here.wrapping_add(len);
            }
        }
    }

    // Pass 2: resolve labels and encode.
    let resolve_abs = |diags: &mut Vec<Diagnostic>, line: u32, imm: &Imm| -> Option<u64> {
        match imm {
            Imm::Lit(v) => Some(*v as u64),
            Imm::Label(name, col) => match labels.get(name.as_str()) {
                Some((addr, _)) => Some(*addr),
                None => {
                    diag(diags, line, *col, format!("undefined label `{name}`"));
                    None
                }
            },
        }
    };

    let mut code = Vec::with_capacity(instr_plan.len() * 8);
    for (sl, addr) in &instr_plan {
        let Some(Item::Instr(pi)) = &sl.item else { unreachable!() };
        let form = pi.op.form();
        let unsigned_imm = matches!(pi.op, Opcode::Cshrinkimm | Opcode::Csetboundsimm);
        let value: Option<i32> = match &pi.imm {
            Imm::Lit(v) => {
                if unsigned_imm {
                    if (*v as u64) > u32::MAX as u64 {
                        diag(
                            &mut diags,
                            sl.line,
                            1,
                            format!("{} immediate must fit in 32 unsigned bits", pi.op),
                        );
                        None
                    } else {
                        Some(*v as u32 as i32)
                    }
                } else if i32::try_from(*v).is_err() {
                    diag(
                        &mut diags,
                        sl.line,
                        1,
                        format!("immediate {v} does not fit in 32 bits"),
                    );
                    None
                } else {
                    Some(*v as i32)
                }
            }
            Imm::Label(name, col) => match labels.get(name.as_str()) {
                None => {
                    diag(&mut diags, sl.line, *col, format!("undefined label `{name}`"));
                    None
                }
                Some((target, target_sec)) =>

                    if matches!(form, OperandForm::Jump | OperandForm::Branch) {
                        if *target_sec != Section::Text {
                            diag(
                                &mut diags,
                                sl.line,
                                *col,
                                format!("branch target `{name}` is not a code label"),
                            );
                            None
                        } else {
                            let rel = (*target as i128 - (*addr + 8) as i128) / 8;
                            match i32::try_from(rel) {
                                Ok(rel) => Some(rel),
                                Err(_) => {
                                    diag(
                                        &mut diags,
                                        sl.line,
                                        *col,
                                        format!("branch target `{name}` out of immediate range"),
                                    );
                                    None
                                }
                            }
                        }
                    } else if *target > i32::MAX as u64 {
                        diag(
                            &mut diags,
                            sl.line,
                            *col,
                            format!("address of `{name}` (0x{target:x}) does not fit in an immediate"),
                        );
                        None
                    } else {
                        Some(*target as i32)
                    },
            },
        };
        if let Some(imm) = value {
            code.extend_from_slice(
                &Instruction::new(pi.op, pi.rd, pi.rs1, pi.rs2, imm).encode(),
            );
        }
    }

    let mut data: Vec<DataEntry> = Vec::new();
    let mut extents: Vec<(u64, u64, u32)> = Vec::new(); // (start, len, line)
    if n_instr > 0 {
        extents.push((code_base, n_instr * 8, 0));
    }
    for (sl, addr) in &data_plan {
        let payload = match sl.item.as_ref().unwrap() {
            Item::Word(imm) => resolve_abs(&mut diags, sl.line, imm)
                .map(|v| DataPayload::Bytes(v.to_le_bytes().to_vec())),
            Item::Byte(b) => Some(DataPayload::Bytes(vec![*b])),
            Item::Cap { perms, base, end, cursor } => {
                let base = resolve_abs(&mut diags, sl.line, base);
                let end = resolve_abs(&mut diags, sl.line, end);
                let cursor = resolve_abs(&mut diags, sl.line, cursor);
                match (base, end, cursor) {
                    (Some(b), Some(e), Some(cur)) => {
                        if b > e {
                            diag(
                                &mut diags,
                                sl.line,
                                1,
                                format!("capability range inverted: 0x{b:x}..0x{e:x}"),
                            );
                            None
                        } else {
                            Some(DataPayload::Cap(Capability::new(*perms, b, e, cur), true))
                        }
                    }
                    _ => None,
                }
            }
            _ => unreachable!(),
        };
        if let Some(payload) = payload {
            let len = match &payload {
                DataPayload::Bytes(b) => b.len() as u64,
                DataPayload::Cap(..) => 32,
            };
            extents.push((*addr, len, sl.line));
            data.push(DataEntry {
                addr: *addr,
                payload,
            });
        }
    }

    extents.sort();
    for pair in extents.windows(2) {
        let (a_start, a_len, _) = pair[0];
        let (b_start, _, b_line) = pair[1];
        if b_start < a_start + a_len && a_len > 0 {
            diag(
                &mut diags,
                b_line,
                1,
                format!("placement at 0x{b_start:x} overlaps earlier segment"),
            );
        }
    }

    let entry_addr = match entry {
        None => code_base,
        Some((name, line, col)) => match labels.get(name) {
            Some((addr, Section::Text)) => *addr,
            Some(_) => {
                diag(&mut diags, line, col, format!("entry `{name}` is not a code label"));
                code_base
            }
            None => {
                diag(&mut diags, line, col, format!("undefined label `{name}`"));
                code_base
            }
        },
    };

    if !diags.is_empty() {
        return Err(diags);
    }
    let (stack_base, stack_end) = stack.unwrap_or(DEFAULT_STACK);
    Ok(ProgramImage {
        code,
        code_base,
        entry: entry_addr,
        stack_base,
        stack_end,
        data,
    })
}

/// Parse and assemble in one call.
pub fn assemble_source(file: &str, source: &str) -> Result<ProgramImage, Vec<Diagnostic>> {
    assemble(&parse(file, source)?)
}
