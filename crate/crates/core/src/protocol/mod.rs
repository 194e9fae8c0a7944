//! Framed binary protocol shared by every link.
//!
//! ```text
//! 0x52 0x50 | 0x01 | type | payload_len (u32 BE) | payload | crc16 (BE)
//! ```
//! The CRC (CCITT-FALSE) covers `type`, `payload_len` and `payload`.

mod codec;
mod crc;
mod handshake;
mod link;
mod message;

pub use codec::{
    encode, encode_into, DecodeStats, Decoder, EncodeError, FrameError, FRAME_OVERHEAD, HEADER_LEN, MAGIC,
    MAX_PAYLOAD, TRAILER_LEN, VERSION,
};
pub use crc::{crc16, Crc16};
pub use handshake::{handshake_answer, new_challenge, verify_handshake, HandshakeError, CHALLENGE_LEN};
pub use link::{FramedLink, LinkError, LinkReader, LinkWriter};
pub use message::{msg_type, AdcReading, Message, PayloadError, Telemetry, CHALLENGE_MAX, PWM_MAX};
