//! Capability values, their permission algebra, and the derivation rules.
//!
//! A capability is a `(permissions, base, end, cursor)` tuple granting
//! authority over the byte range `[base, end)`. The uninitialized flavor
//! (`U`) is a read-write capability that only permits reads at or above its
//! cursor; the cursor acts as the read frontier and can be lowered only by
//! the dedicated store instructions in the machine layer.
//!
//! Everything in this module is pure: derivation ops take a capability by
//! value and return a new one (or an error), never touching machine state.

use std::collections::BTreeSet;
use std::fmt;

/// Permission bits. `U` is only meaningful together with `R` and `W` and
/// never with `X`; [`Permissions::is_valid`] checks that closure.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Permissions(u8);

impl Permissions {
    pub const NONE: Permissions = Permissions(0);
    pub const R: Permissions = Permissions(1 << 0);
    pub const W: Permissions = Permissions(1 << 1);
    pub const X: Permissions = Permissions(1 << 2);
    pub const U: Permissions = Permissions(1 << 3);

    pub const RW: Permissions = Permissions(0b0011);
    pub const RX: Permissions = Permissions(0b0101);
    pub const RWX: Permissions = Permissions(0b0111);
    /// The uninitialized read-write permission set.
    pub const RWU: Permissions = Permissions(0b1011);

    /// Builds a permission set from the low four bits; higher bits are dropped.
    pub fn from_bits(bits: u8) -> Permissions {
        Permissions(bits & 0b1111)
    }

    /// Raw bitmask: bit0=R, bit1=W, bit2=X, bit3=U.
    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn read(self) -> bool {
        self.0 & Self::R.0 != 0
    }

    pub fn write(self) -> bool {
        self.0 & Self::W.0 != 0
    }

    pub fn execute(self) -> bool {
        self.0 & Self::X.0 != 0
    }

    pub fn uninit(self) -> bool {
        self.0 & Self::U.0 != 0
    }

    /// True unless `U` is set without read-write authority or alongside `X`.
    pub fn is_valid(self) -> bool {
        !self.uninit() || (self.read() && self.write() && !self.execute())
    }

    /// Clears `U` when the combination would be invalid.
    pub fn normalized(self) -> Permissions {
        if self.is_valid() {
            self
        } else {
            Permissions(self.0 & !Self::U.0)
        }
    }

    pub fn intersect(self, mask: Permissions) -> Permissions {
        Permissions(self.0 & mask.0)
    }
}

impl std::ops::BitOr for Permissions {
    type Output = Permissions;
    fn bitor(self, rhs: Permissions) -> Permissions {
        Permissions(self.0 | rhs.0)
    }
}

impl fmt::Display for Permissions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 & 0b0111 == 0 && !self.uninit() {
            return f.write_str("-");
        }
        if self.read() {
            f.write_str("R")?;
        }
        if self.write() {
            f.write_str("W")?;
        }
        if self.execute() {
            f.write_str("X")?;
        }
        if self.uninit() {
            if self.0 & 0b0111 != 0 {
                f.write_str("+U")?;
            } else {
                f.write_str("U")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Permissions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Kind of memory access a capability is asked to authorize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessKind {
    Read,
    Write,
    Execute,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
            AccessKind::Execute => "execute",
        })
    }
}

/// Authority violation raised by an access check or a derivation op.
///
/// Each variant carries the offending capability and address where one
/// exists, so traps can be reported precisely.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapError {
    /// The capability's validity tag is clear.
    TagViolation { cap: Capability },
    /// The required permission flag is missing.
    PermissionViolation {
        kind: AccessKind,
        cap: Capability,
        addr: u64,
    },
    /// Read below the cursor of an uninitialized capability.
    UninitRead { cap: Capability, addr: u64 },
    /// Access or derivation outside `[base, end)`.
    BoundsViolation { cap: Capability, addr: u64, size: u64 },
    /// Address not naturally aligned for the access width.
    AlignmentViolation { addr: u64, required: u64 },
    /// Attempt to lower the cursor of an uninitialized capability.
    CursorMonotonicityViolation { cap: Capability, new_cursor: u64 },
    /// Shrink would expand or invert the capability's range.
    ShrinkViolation { cap: Capability, new_base: u64 },
    /// Uninit derivation from a capability without plain read-write authority.
    UninitDeriveViolation { cap: Capability },
}

impl CapError {
    /// Stable name used in trap reports and documented alongside exit codes.
    pub fn name(&self) -> &'static str {
        match self {
            CapError::TagViolation { .. } => "TagViolation",
            CapError::PermissionViolation { .. } => "PermissionViolation",
            CapError::UninitRead { .. } => "UninitRead",
            CapError::BoundsViolation { .. } => "BoundsViolation",
            CapError::AlignmentViolation { .. } => "AlignmentViolation",
            CapError::CursorMonotonicityViolation { .. } => "CursorMonotonicityViolation",
            CapError::ShrinkViolation { .. } => "ShrinkViolation",
            CapError::UninitDeriveViolation { .. } => "UninitDeriveViolation",
        }
    }

    /// Stable per-error offset added to the trap exit-code base.
    pub fn trap_offset(&self) -> u8 {
        match self {
            CapError::TagViolation { .. } => 0,
            CapError::PermissionViolation { .. } => 1,
            CapError::UninitRead { .. } => 2,
            CapError::BoundsViolation { .. } => 3,
            CapError::AlignmentViolation { .. } => 4,
            CapError::CursorMonotonicityViolation { .. } => 5,
            CapError::ShrinkViolation { .. } => 6,
            CapError::UninitDeriveViolation { .. } => 7,
        }
    }

    /// Faulting address, when the violation has one.
    pub fn addr(&self) -> Option<u64> {
        match self {
            CapError::TagViolation { .. } | CapError::UninitDeriveViolation { .. } => None,
            CapError::PermissionViolation { addr, .. }
            | CapError::UninitRead { addr, .. }
            | CapError::BoundsViolation { addr, .. }
            | CapError::AlignmentViolation { addr, .. } => Some(*addr),
            CapError::CursorMonotonicityViolation { new_cursor, .. } => Some(*new_cursor),
            CapError::ShrinkViolation { new_base, .. } => Some(*new_base),
        }
    }
}

impl fmt::Display for CapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapError::TagViolation { cap } => {
                write!(f, "use of untagged capability {cap}")
            }
            CapError::PermissionViolation { kind, cap, addr } => {
                write!(f, "no {kind} permission at 0x{addr:x} via {cap}")
            }
            CapError::UninitRead { cap, addr } => {
                write!(
                    f,
                    "read at 0x{addr:x} below cursor 0x{:x} of uninitialized capability {cap}",
                    cap.cursor()
                )
            }
            CapError::BoundsViolation { cap, addr, size } => {
                write!(f, "access of {size} bytes at 0x{addr:x} outside {cap}")
            }
            CapError::AlignmentViolation { addr, required } => {
                write!(f, "address 0x{addr:x} not {required}-byte aligned")
            }
            CapError::CursorMonotonicityViolation { cap, new_cursor } => {
                write!(
                    f,
                    "cursor of uninitialized capability {cap} may not move down to 0x{new_cursor:x}"
                )
            }
            CapError::ShrinkViolation { cap, new_base } => {
                write!(f, "shrink of {cap} to base 0x{new_base:x} rejected")
            }
            CapError::UninitDeriveViolation { cap } => {
                write!(f, "cannot derive uninitialized capability from {cap}")
            }
        }
    }
}

impl std::error::Error for CapError {}

/// Strict capability decoding failure (reserved bits, bad permission
/// combination, or a length that overflows the address space).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapDecodeError {
    ReservedBits,
    InvalidPerms(u8),
    LengthOverflow,
}

impl fmt::Display for CapDecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapDecodeError::ReservedBits => f.write_str("reserved flag bits are nonzero"),
            CapDecodeError::InvalidPerms(bits) => {
                write!(f, "invalid permission combination 0b{bits:04b}")
            }
            CapDecodeError::LengthOverflow => f.write_str("base + length overflows"),
        }
    }
}

impl std::error::Error for CapDecodeError {}

/// Size of a serialized capability and the alignment of capability lines.
pub const CAP_SIZE: u64 = 32;

/// A memory capability: permissions over `[base, end)` plus a cursor.
///
/// Values are immutable; every derivation returns a fresh capability. The
/// cursor is unconstrained by construction (it may sit outside the bounds;
/// access checks revalidate), but an uninitialized capability built through
/// the normal constructors always keeps `base <= cursor`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Capability {
    perms: Permissions,
    base: u64,
    end: u64,
    cursor: u64,
}

impl Capability {
    /// New capability over `[base, end)` pointing at `cursor`.
    ///
    /// Panics if `base > end`; the range must be well formed.
    pub fn new(perms: Permissions, base: u64, end: u64, cursor: u64) -> Capability {
        assert!(base <= end, "capability range inverted: {base:#x}..{end:#x}");
        Capability {
            perms,
            base,
            end,
            cursor,
        }
    }

    /// The untagged null capability: no permissions, empty range.
    pub fn null() -> Capability {
        Capability {
            perms: Permissions::NONE,
            base: 0,
            end: 0,
            cursor: 0,
        }
    }

    pub fn perms(&self) -> Permissions {
        self.perms
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// Exclusive upper bound; `end = base + len`.
    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn len(&self) -> u64 {
        self.end - self.base
    }

    pub fn is_empty(&self) -> bool {
        self.base == self.end
    }

    /// Uninitialized bit as an integer, the way the machine exposes it.
    pub fn uninit_bit(&self) -> u64 {
        self.perms.uninit() as u64
    }

    /// Checks whether this capability authorizes `size` bytes of `kind`
    /// access at `addr`.
    ///
    /// Reads through an uninitialized capability are additionally gated at
    /// the cursor: loading from below it is refused. Execute is never
    /// granted by an uninitialized capability.
    pub fn check_access(&self, addr: u64, size: u64, kind: AccessKind) -> Result<(), CapError> {
        debug_assert!(matches!(size, 1 | 2 | 4 | 8 | 32), "bad access size {size}");
        let permitted = match kind {
            AccessKind::Read => self.perms.read(),
            AccessKind::Write => self.perms.write(),
            AccessKind::Execute => self.perms.execute() && !self.perms.uninit(),
        };
        if !permitted {
            return Err(CapError::PermissionViolation {
                kind,
                cap: *self,
                addr,
            });
        }
        let upper = addr.checked_add(size);
        if addr < self.base || upper.is_none() || upper.unwrap() > self.end {
            return Err(CapError::BoundsViolation {
                cap: *self,
                addr,
                size,
            });
        }
        if kind == AccessKind::Read && self.perms.uninit() && addr < self.cursor {
            return Err(CapError::UninitRead { cap: *self, addr });
        }
        Ok(())
    }

    /// Returns this capability with the uninitialized permission set and all
    /// other fields unchanged.
    ///
    /// Requires plain read-write authority; execute is rejected because the
    /// machine never combines `U` with `X`.
    pub fn derive_uninit(&self) -> Result<Capability, CapError> {
        if !(self.perms.read() && self.perms.write()) || self.perms.execute() {
            return Err(CapError::UninitDeriveViolation { cap: *self });
        }
        Ok(Capability {
            perms: self.perms | Permissions::U,
            ..*self
        })
    }

    /// Shrinks the range to `[new_base, cursor)`, leaving the cursor where
    /// it is. This is how a caller carves a callee frame out of its own
    /// stack capability without ever lowering the cursor.
    pub fn shrink(&self, new_base: u64) -> Result<Capability, CapError> {
        if self.cursor > self.end || new_base < self.base || new_base > self.cursor {
            return Err(CapError::ShrinkViolation {
                cap: *self,
                new_base,
            });
        }
        Ok(Capability {
            perms: self.perms,
            base: new_base,
            end: self.cursor,
            cursor: self.cursor,
        })
    }

    /// [`Capability::shrink`] with the new base given relative to the old one.
    pub fn shrink_imm(&self, imm: u64) -> Result<Capability, CapError> {
        self.shrink(self.base.wrapping_add(imm))
    }

    /// Rebounds to `[cursor, cursor + length)`. The new range must be
    /// enclosed by the old one; authority never grows.
    pub fn set_bounds(&self, length: u64) -> Result<Capability, CapError> {
        let new_end = self.cursor.checked_add(length);
        if self.cursor < self.base || new_end.is_none() || new_end.unwrap() > self.end {
            return Err(CapError::BoundsViolation {
                cap: *self,
                addr: self.cursor,
                size: length,
            });
        }
        Ok(Capability {
            perms: self.perms,
            base: self.cursor,
            end: new_end.unwrap(),
            cursor: self.cursor,
        })
    }

    /// Moves the cursor. Out-of-bounds cursors are allowed (bounds are
    /// enforced at access time), but the cursor of an uninitialized
    /// capability may never move down.
    pub fn set_cursor(&self, new_cursor: u64) -> Result<Capability, CapError> {
        if self.perms.uninit() && new_cursor < self.cursor {
            return Err(CapError::CursorMonotonicityViolation {
                cap: *self,
                new_cursor,
            });
        }
        Ok(Capability {
            cursor: new_cursor,
            ..*self
        })
    }

    /// Unchecked cursor replacement for the machine's store-with-decrement
    /// path — the single place allowed to move a `U` cursor down.
    pub(crate) fn with_cursor(&self, cursor: u64) -> Capability {
        Capability { cursor, ..*self }
    }

    /// Intersects the permission set with `mask` and re-normalizes, so the
    /// result never carries `U` without read-write or alongside execute.
    ///
    /// Dropping the `U` bit converts the capability into a plain view of
    /// its *initialized* window: the base rises to the cursor (clamped to
    /// the range). Without that, stripping `U` would grant reads over the
    /// never-written region below the cursor — growing authority through a
    /// pure restriction operation.
    pub fn and_perm(&self, mask: Permissions) -> Capability {
        let perms = self.perms.intersect(mask).normalized();
        let base = if self.perms.uninit() && !perms.uninit() {
            self.cursor.clamp(self.base, self.end)
        } else {
            self.base
        };
        Capability {
            perms,
            base,
            end: self.end,
            cursor: self.cursor,
        }
    }

    /// Brute-force enumeration of every `(address, access)` right this
    /// capability grants. Reads through an uninitialized capability start at
    /// the cursor; writes cover the whole range.
    ///
    /// Intended for property checks on small ranges; cost is linear in
    /// `end - base`.
    pub fn authority(&self) -> BTreeSet<(u64, AccessKind)> {
        let mut rights = BTreeSet::new();
        if self.perms.read() {
            let from = if self.perms.uninit() {
                self.cursor.max(self.base)
            } else {
                self.base
            };
            for addr in from..self.end {
                rights.insert((addr, AccessKind::Read));
            }
        }
        if self.perms.write() {
            for addr in self.base..self.end {
                rights.insert((addr, AccessKind::Write));
            }
        }
        if self.perms.execute() {
            for addr in self.base..self.end {
                rights.insert((addr, AccessKind::Execute));
            }
        }
        rights
    }

    /// Serializes to the 32-byte line format: four little-endian 64-bit
    /// fields `flags, cursor, base, length`, flags bit0=R bit1=W bit2=X
    /// bit3=U, everything above reserved-zero.
    pub fn to_bytes(&self) -> [u8; 32] {
        let mut bytes = [0u8; 32];
        bytes[0..8].copy_from_slice(&(self.perms.bits() as u64).to_le_bytes());
        bytes[8..16].copy_from_slice(&self.cursor.to_le_bytes());
        bytes[16..24].copy_from_slice(&self.base.to_le_bytes());
        bytes[24..32].copy_from_slice(&(self.end - self.base).to_le_bytes());
        bytes
    }

    /// Strict inverse of [`Capability::to_bytes`]: rejects nonzero reserved
    /// bits, invalid permission combinations, and lengths that overflow.
    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Capability, CapDecodeError> {
        let word = |i: usize| u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
        let flags = word(0);
        if flags & !0b1111 != 0 {
            return Err(CapDecodeError::ReservedBits);
        }
        let perms = Permissions::from_bits(flags as u8);
        if !perms.is_valid() {
            return Err(CapDecodeError::InvalidPerms(perms.bits()));
        }
        let cursor = word(1);
        let base = word(2);
        let length = word(3);
        let end = base
            .checked_add(length)
            .ok_or(CapDecodeError::LengthOverflow)?;
        Ok(Capability {
            perms,
            base,
            end,
            cursor,
        })
    }

    /// Total decoder for raw memory lines. Untagged lines may hold arbitrary
    /// data; this normalizes it into some capability value (which is unusable
    /// anyway without a tag) instead of failing: reserved bits are dropped,
    /// invalid permission combinations lose `U`, and an overflowing length
    /// saturates. Bytes produced by [`Capability::to_bytes`] decode exactly.
    pub fn from_bytes_lossy(bytes: &[u8; 32]) -> Capability {
        let word = |i: usize| u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
        let perms = Permissions::from_bits(word(0) as u8).normalized();
        let cursor = word(1);
        let base = word(2);
        let end = base.saturating_add(word(3));
        Capability {
            perms,
            base,
            end,
            cursor,
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} base=0x{:x} end=0x{:x} cursor=0x{:x})",
            self.perms, self.base, self.end, self.cursor
        )
    }
}

impl fmt::Debug for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
