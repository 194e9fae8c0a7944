use super::crc::Crc16;
use super::message::{Message, PayloadError};

pub const MAGIC: [u8; 2] = [0x52, 0x50];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const TRAILER_LEN: usize = 2;
/// Bytes a frame adds around its payload.
pub const FRAME_OVERHEAD: usize = HEADER_LEN + TRAILER_LEN;
pub const MAX_PAYLOAD: usize = 65536;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD}")]
    OversizePayload(usize),
    #[error(transparent)]
    Invalid(#[from] PayloadError),
}

/// Encodes one message as a complete frame.
pub fn encode(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + msg.payload_len());
    encode_into(msg, &mut out)?;
    Ok(out)
}

/// Appends one frame to `out`. On error `out` is left unchanged.
pub fn encode_into(msg: &Message, out: &mut Vec<u8>) -> Result<(), EncodeError> {
    let len = msg.payload_len();
    if len > MAX_PAYLOAD {
        return Err(EncodeError::OversizePayload(len));
    }
    msg.validate()?;
    let start = out.len();
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.msg_type());
    out.extend_from_slice(&(len as u32).to_be_bytes());
    msg.write_payload(out);
    debug_assert_eq!(out.len() - start, HEADER_LEN + len);
    let mut crc = Crc16::default();
    crc.update(&out[start + 3..]);
    out.extend_from_slice(&crc.finish().to_be_bytes());
    Ok(())
}

/// Why bytes or a frame were discarded.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("skipped {0} bytes while scanning for frame magic")]
    BadMagic(usize),
    #[error("bad frame header: {0}")]
    BadHeader(&'static str),
    #[error("CRC mismatch: frame says 0x{expected:04x}, computed 0x{actual:04x}")]
    BadCrc { expected: u16, actual: u16 },
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("message type 0x{msg_type:02x} rejected: {reason}")]
    BadValue { msg_type: u8, reason: String },
}

/// Counters of everything a decoder has dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub frames: u64,
    pub skipped_bytes: u64,
    pub bad_header: u64,
    pub bad_crc: u64,
    pub unknown_type: u64,
    pub bad_value: u64,
}

impl DecodeStats {
    pub fn dropped_frames(&self) -> u64 {
        self.bad_crc + self.unknown_type + self.bad_value
    }
}

/// Incremental frame decoder for one byte stream.
#[derive(Debug, Default)]
pub struct Decoder {
    buf: Vec<u8>,
    pos: usize,
    stats: DecodeStats,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.pos > 0 && self.pos * 2 >= self.buf.len() {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    pub fn stats(&self) -> DecodeStats {
        self.stats
    }

    /// Bytes held but not yet consumed.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Next decoded message or drop event; `None` means more bytes are
    /// needed.
    pub fn poll(&mut self) -> Option<Result<Message, FrameError>> {
        let avail = &self.buf[self.pos..];
        if avail.is_empty() {
            return None;
        }

        // Resynchronize on the magic. A trailing lone 0x52 may be the start
        // of the next frame, so it is kept.
        let skip = find_magic(avail);
        if skip > 0 {
            self.pos += skip;
            self.stats.skipped_bytes += skip as u64;
            return Some(Err(FrameError::BadMagic(skip)));
        }
        if avail.len() < HEADER_LEN {
            return None;
        }
        if avail[2] != VERSION {
            return Some(Err(self.reject_header("unsupported version")));
        }
        let msg_type = avail[3];
        let len = u32::from_be_bytes([avail[4], avail[5], avail[6], avail[7]]) as usize;
        if len > MAX_PAYLOAD {
            return Some(Err(self.reject_header("payload length too large")));
        }
        let total = HEADER_LEN + len + TRAILER_LEN;
        if avail.len() < total {
            return None;
        }
        let mut crc = Crc16::default();
        crc.update(&avail[3..HEADER_LEN + len]);
        let actual = crc.finish();
        let expected = u16::from_be_bytes([avail[total - 2], avail[total - 1]]);
        if actual != expected {
            // The length field itself may be corrupt, so only the magic is
            // consumed and the scan restarts inside the frame.
            self.pos += 1;
            self.stats.bad_crc += 1;
            return Some(Err(FrameError::BadCrc { expected, actual }));
        }
        let result = Message::from_payload(msg_type, &avail[HEADER_LEN..HEADER_LEN + len]);
        self.pos += total;
        Some(match result {
            Ok(msg) => {
                self.stats.frames += 1;
                Ok(msg)
            }
            Err(PayloadError::UnknownType(t)) => {
                self.stats.unknown_type += 1;
                Err(FrameError::UnknownType(t))
            }
            Err(PayloadError::BadValue(reason)) => {
                self.stats.bad_value += 1;
                Err(FrameError::BadValue { msg_type, reason })
            }
        })
    }

    /// Next message, silently passing over drop events (they are still
    /// counted in [`Decoder::stats`]).
    pub fn next_message(&mut self) -> Option<Message> {
        loop {
            match self.poll()? {
                Ok(m) => return Some(m),
                Err(e) => tracing::debug!(error = %e, "frame dropped"),
            }
        }
    }

    fn reject_header(&mut self, why: &'static str) -> FrameError {
        self.pos += 1;
        self.stats.bad_header += 1;
        FrameError::BadHeader(why)
    }
}

fn find_magic(avail: &[u8]) -> usize {
    let mut i = 0;
    while i < avail.len() {
        if avail[i] == MAGIC[0] && (i + 1 == avail.len() || avail[i + 1] == MAGIC[1]) {
            return i;
        }
        i += 1;
    }
    i
}
