//! Toolkit for relaying task instructions over bandwidth- and delay-constrained
//! space links by sending pose references into an on-device asset catalog
//! instead of the 3D models themselves.
//!
//! The crate is organized around the life of one instruction set:
//!
//! * [`authoring`] compiles operator-written CSV procedures into an
//!   [`instructions::InstructionSet`],
//! * [`wire`] encodes the set into a compact, checksummed binary document
//!   (`.mri`) for uplink,
//! * [`link`] simulates the store-and-forward channel the document crosses,
//! * [`pose`] places each instruction cue relative to the tracked target
//!   object and animates it along keyframe tracks,
//! * [`telemetry`] and [`console`] model the suit-side monitoring display and
//!   the key-phrase voice console,
//! * [`scenario`] drives all of the above through a deterministic virtual
//!   clock and produces diff-able run logs.

pub mod authoring;
pub mod catalog;
pub mod console;
pub mod instructions;
pub mod link;
pub mod pose;
pub mod scenario;
pub mod telemetry;
pub mod wire;
