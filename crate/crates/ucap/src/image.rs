//! Program images: the assembled artifact the machine boots from, and its
//! on-disk serialization.
//!
//! File layout (all integers little-endian): magic `UCAP`, u16 version (=1),
//! u64 entry, u64 code_base, u64 code_len, the code bytes, u64 stack_base,
//! u64 stack_end, u32 data-entry count, then each entry as a u8 kind —
//! 0 = raw bytes (u64 len + bytes), 1 = capability (32-byte line + u8 tag) —
//! preceded by its u64 address.

use std::fmt;

use crate::cap::{Capability, CapDecodeError, CAP_SIZE};

const MAGIC: &[u8; 4] = b"UCAP";
const VERSION: u16 = 1;

/// Initial memory contents at one address: raw bytes or a tagged capability.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataPayload {
    Bytes(Vec<u8>),
    Cap(Capability, bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataEntry {
    pub addr: u64,
    pub payload: DataPayload,
}

/// An executable image: code at a fixed base, initial data entries, the
/// entry point, and the stack range the loader builds a capability over.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProgramImage {
    pub code: Vec<u8>,
    pub code_base: u64,
    pub entry: u64,
    pub stack_base: u64,
    pub stack_end: u64,
    pub data: Vec<DataEntry>,
}

/// Why an image file was rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ImageError {
    BadMagic,
    BadVersion(u16),
    Truncated,
    TrailingBytes(usize),
    BadEntryKind(u8),
    MisalignedCap(u64),
    BadCap(CapDecodeError),
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::BadMagic => f.write_str("not an image file (bad magic)"),
            ImageError::BadVersion(v) => write!(f, "unsupported image version {v}"),
            ImageError::Truncated => f.write_str("image file truncated"),
            ImageError::TrailingBytes(n) => write!(f, "{n} trailing bytes after image"),
            ImageError::BadEntryKind(k) => write!(f, "unknown data-entry kind {k}"),
            ImageError::MisalignedCap(addr) => {
                write!(f, "capability data entry at unaligned address 0x{addr:x}")
            }
            ImageError::BadCap(e) => write!(f, "malformed capability in image: {e}"),
        }
    }
}

impl std::error::Error for ImageError {}

impl ProgramImage {
    pub fn code_end(&self) -> u64 {
        self.code_base + self.code.len() as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.entry.to_le_bytes());
        out.extend_from_slice(&self.code_base.to_le_bytes());
        out.extend_from_slice(&(self.code.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.code);
        out.extend_from_slice(&self.stack_base.to_le_bytes());
        out.extend_from_slice(&self.stack_end.to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u32).to_le_bytes());
        for entry in &self.data {
            match &entry.payload {
                DataPayload::Bytes(bytes) => {
                    out.push(0);
                    out.extend_from_slice(&entry.addr.to_le_bytes());
                    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
                    out.extend_from_slice(bytes);
                }
                DataPayload::Cap(cap, tag) => {
                    out.push(1);
                    out.extend_from_slice(&entry.addr.to_le_bytes());
                    out.extend_from_slice(&cap.to_bytes());
                    out.push(*tag as u8);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ProgramImage, ImageError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ImageError::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(ImageError::BadVersion(version));
        }
        let entry = r.u64()?;
        let code_base = r.u64()?;
        let code_len = r.u64()?;
        let code = r.take(code_len as usize)?.to_vec();
        let stack_base = r.u64()?;
        let stack_end = r.u64()?;
        let count = r.u32()?;
        let mut data = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let kind = r.u8()?;
            let addr = r.u64()?;
            let payload = match kind {
                0 => {
                    let len = r.u64()?;
                    DataPayload::Bytes(r.take(len as usize)?.to_vec())
                }
                1 => {
                    if addr % CAP_SIZE != 0 {
                        return Err(ImageError::MisalignedCap(addr));
                    }
                    let line: &[u8; 32] = r.take(32)?.try_into().unwrap();
                    let cap = Capability::from_bytes(line).map_err(ImageError::BadCap)?;
                    DataPayload::Cap(cap, r.u8()? != 0)
                }
                k => return Err(ImageError::BadEntryKind(k)),
            };
            data.push(DataEntry { addr, payload });
        }
        if r.pos != bytes.len() {
            return Err(ImageError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(ProgramImage {
            code,
            code_base,
            entry,
            stack_base,
            stack_end,
            data,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        let end = self.pos.checked_add(n).ok_or(ImageError::Truncated)?;
        if end > self.bytes.len() {
            return Err(ImageError::Truncated);
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, ImageError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ImageError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ImageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ImageError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
