//! A simulator for a capability machine with uninitialized capabilities.
//!
//! A capability grants access to a memory range `[base, end)` through a
//! cursor. The uninitialized (`U`) variant additionally refuses to read any
//! byte it has not yet written: loads are only legal at or above the cursor,
//! and the cursor can move down only by storing immediately below it. That
//! single rule lets a caller hand a callee a writable stack frame whose
//! stale contents are unreadable — no clearing required.
//!
//! The crate is layered bottom-up:
//!
//! * [`cap`] — capability values and their derivation rules.
//! * [`mem`] — byte-addressable memory with one validity tag per 32-byte line.
//! * [`isa`] — the opcode table and the fixed 8-byte instruction encoding.
//! * [`image`] — executable images and their on-disk format.
//! * [`machine`] — register files and the fetch–decode–execute loop.
//! * [`asm`] — a two-pass assembler for the textual assembly language.
//! * [`scenario`] — an assemble-run-assert harness for whole programs.

pub mod asm;
pub mod cap;
pub mod image;
pub mod isa;
pub mod machine;
pub mod mem;
pub mod scenario;

pub use cap::{AccessKind, CapError, Capability, Permissions};
pub use image::ProgramImage;
pub use isa::{Instruction, Opcode};
pub use machine::{Machine, Outcome, Status};
