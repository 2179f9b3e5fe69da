//! Byte-addressable memory with one validity tag per 32-byte line.
//!
//! The tag discipline is what makes capabilities unforgeable: a line's tag is
//! set only by [`Memory::write_cap`], and any data write into the line clears
//! it. Reading a capability from an untagged line yields a value that decodes
//! (lossily) but cannot authorize anything.

use std::fmt;

use crate::cap::{Capability, CAP_SIZE};

/// Bytes per tagged line; also the capability store/load granule.
pub const LINE: u64 = CAP_SIZE;

/// Raw memory access failure. The machine layer converts these into traps
/// with the authorizing capability attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemError {
    OutOfRange { addr: u64, size: u64 },
    Misaligned { addr: u64, required: u64 },
}

impl fmt::Display for MemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemError::OutOfRange { addr, size } => {
                write!(f, "{size} bytes at 0x{addr:x} outside memory")
            }
            MemError::Misaligned { addr, required } => {
                write!(f, "address 0x{addr:x} not {required}-byte aligned")
            }
        }
    }
}

impl std::error::Error for MemError {}

/// A value as a register or memory line holds it: either raw data or a
/// capability with its validity tag. An untagged capability decodes but is
/// refused at every use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaggedWord {
    Data(u64),
    Cap(Capability, bool),
}

impl fmt::Display for TaggedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaggedWord::Data(v) => write!(f, "0x{v:x}"),
            TaggedWord::Cap(c, tag) => {
                write!(f, "{c}{}", if *tag { "" } else { " untagged" })
            }
        }
    }
}

/// Tagged memory: a zero-initialized byte array plus one tag per line.
pub struct Memory {
    bytes: Vec<u8>,
    tags: Vec<bool>,
}

impl Memory {
    /// Allocates `size` bytes rounded up to a whole number of lines, all
    /// zero and untagged.
    pub fn new(size: u64) -> Memory {
        let size = size.div_ceil(LINE) * LINE;
        Memory {
            bytes: vec![0; size as usize],
            tags: vec![false; (size / LINE) as usize],
        }
    }

    pub fn size(&self) -> u64 {
        self.bytes.len() as u64
    }

    /// Range- and alignment-checks an access, returning the byte offset.
    fn locate(&self, addr: u64, size: u64, align: u64) -> Result<usize, MemError> {
        match addr.checked_add(size) {
            Some(end) if end <= self.size() => {}
            _ => return Err(MemError::OutOfRange { addr, size }),
        }
        if addr % align != 0 {
            return Err(MemError::Misaligned {
                addr,
                required: align,
            });
        }
        Ok(addr as usize)
    }

    /// Little-endian load of `size ∈ {1,2,4,8}` bytes, naturally aligned.
    /// Extension to 64 bits is zero; the caller sign-extends if it wants to.
    pub fn read_data(&self, addr: u64, size: u64) -> Result<u64, MemError> {
        debug_assert!(matches!(size, 1 | 2 | 4 | 8), "bad data size {size}");
        let at = self.locate(addr, size, size)?;
        let mut word = [0u8; 8];
        word[..size as usize].copy_from_slice(&self.bytes[at..at + size as usize]);
        Ok(u64::from_le_bytes(word))
    }

    /// Little-endian store of the low `size` bytes of `value`; clears the
    /// tag of the line it lands in. A naturally aligned data access never
    /// straddles a line.
    pub fn write_data(&mut self, addr: u64, size: u64, value: u64) -> Result<(), MemError> {
        debug_assert!(matches!(size, 1 | 2 | 4 | 8), "bad data size {size}");
        let at = self.locate(addr, size, size)?;
        self.bytes[at..at + size as usize].copy_from_slice(&value.to_le_bytes()[..size as usize]);
        self.tags[(addr / LINE) as usize] = false;
        Ok(())
    }

    /// Loads the line at `addr` (32-aligned) as a capability plus its tag.
    /// Untagged lines decode lossily — garbage in, unusable capability out.
    pub fn read_cap(&self, addr: u64) -> Result<(Capability, bool), MemError> {
        let at = self.locate(addr, LINE, LINE)?;
        let line: &[u8; 32] = self.bytes[at..at + LINE as usize].try_into().unwrap();
        Ok((
            Capability::from_bytes_lossy(line),
            self.tags[(addr / LINE) as usize],
        ))
    }

    /// Serializes `cap` into the line at `addr` (32-aligned) and sets the
    /// line's tag to `tag`. Storing with `tag = false` is how a capability
    /// value is deliberately laundered into plain data.
    pub fn write_cap(&mut self, addr: u64, cap: Capability, tag: bool) -> Result<(), MemError> {
        let at = self.locate(addr, LINE, LINE)?;
        self.bytes[at..at + LINE as usize].copy_from_slice(&cap.to_bytes());
        self.tags[(addr / LINE) as usize] = tag;
        Ok(())
    }

    /// Tag of the line containing `addr`; false for out-of-range addresses.
    pub fn tag(&self, addr: u64) -> bool {
        self.tags
            .get((addr / LINE) as usize)
            .copied()
            .unwrap_or(false)
    }

    /// Base addresses of all currently tagged lines.
    pub fn tagged_lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(i, _)| i as u64 * LINE)
    }

    /// Bulk loader used when placing an image; clears the tags of every
    /// line touched, like any other data write.
    pub fn write_bytes(&mut self, addr: u64, data: &[u8]) -> Result<(), MemError> {
        let at = self.locate(addr, data.len() as u64, 1)?;
        self.bytes[at..at + data.len()].copy_from_slice(data);
        if !data.is_empty() {
            let first = addr / LINE;
            let last = (addr + data.len() as u64 - 1) / LINE;
            for line in first..=last {
                self.tags[line as usize] = false;
            }
        }
        Ok(())
    }

    pub fn read_bytes(&self, addr: u64, len: u64) -> Result<&[u8], MemError> {
        let at = self.locate(addr, len, 1)?;
        Ok(&self.bytes[at..at + len as usize])
    }

    /// Renders `[start, end)` line by line: hex address, the 32 byte pairs,
    /// and a `T`/`.` tag marker. Bounds are clamped to memory and snapped
    /// outward to line boundaries.
    pub fn dump_range(&self, start: u64, end: u64) -> String {
        let start = (start / LINE * LINE).min(self.size());
        let end = end.div_ceil(LINE).saturating_mul(LINE).min(self.size());
        let mut out = String::new();
        let mut addr = start;
        while addr < end {
            let line = &self.bytes[addr as usize..(addr + LINE) as usize];
            out.push_str(&format!("{addr:08x} "));
            for byte in line {
                out.push_str(&format!(" {byte:02x}"));
            }
            out.push_str(if self.tag(addr) { "  T" } else { "  ." });
            out.push('\n');
            addr += LINE;
        }
        out
    }
}
