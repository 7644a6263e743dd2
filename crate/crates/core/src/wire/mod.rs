//! MAVLink-v2-compatible framing for the AutoServe message set.
//!
//! Frame layout (all integers little-endian):
//!
//! ```text
//! 0xFD | len | incompat | compat | seq | sys | comp | msg_id (3) | payload (len) | crc (2) | [link | ts (6) | sig (6)]
//! ```
//!
//! Payloads have trailing zero bytes stripped (at least one byte remains).
//! The checksum covers everything after the magic byte and is seeded with
//! the message's `crc_extra`. Bit 0 of `incompat` marks a signed frame.

mod crc;
mod frame;
mod liveness;
mod message;
mod signing;

pub use crc::{compute_checksum, crc_extra, Crc16X25};
pub use frame::{
    decode_frame, dump_fields, encode_frame, Frame, FrameHeader, CHECKSUM_LEN, HEADER_LEN,
    INCOMPAT_FLAG_SIGNED, MAGIC_V1, MAGIC_V2, MAX_FRAME_LEN, MAX_PAYLOAD_LEN,
};
pub use liveness::{track_liveness, Liveness, LivenessTracker};
pub use message::*;
pub use signing::{
    compute_signature, Keystore, ManualClock, SecretKey, Signature, SigningContext, SystemClock,
    TimestampSource, DEFAULT_EPOCH_UNIX_S, REPLAY_WINDOW_TICKS, TICKS_PER_SECOND, TIMESTAMP_MAX,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic byte 0x{0:02X}")]
    BadMagic(u8),
    #[error("MAVLink v1 frames are not accepted")]
    UnsupportedVersion,
    #[error("truncated frame: need {needed} bytes, got {got}")]
    TruncatedFrame { needed: usize, got: usize },
    #[error("{0} unexpected bytes after frame")]
    TrailingBytes(usize),
    #[error("unsupported incompat flags 0x{0:02X}")]
    UnsupportedFlags(u8),
    #[error("checksum mismatch: computed 0x{expected:04X}, frame carries 0x{received:04X}")]
    ChecksumMismatch { expected: u16, received: u16 },
    #[error("unknown message id {0}")]
    UnknownMsgId(u32),
    #[error("payload of {len} bytes is too long for message {msg_id}")]
    PayloadLength { msg_id: u32, len: usize },
    #[error("payload of {0} bytes exceeds 255")]
    PayloadTooLarge(usize),
    #[error("field {field} has invalid value {value}")]
    InvalidField { field: &'static str, value: u32 },
    #[error("signature verification failed")]
    SignatureInvalid,
    #[error("unsigned frame where signing is required")]
    SignatureMissing,
    #[error("stale signature timestamp {0}")]
    StaleTimestamp(u64),
}
