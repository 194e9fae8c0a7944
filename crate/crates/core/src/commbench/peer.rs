//! Both ends of the throughput exchange and the echo side of the latency
//! test. Devices and test peers share these so the accounting is identical.

use crate::protocol::{Message, FRAME_OVERHEAD};

/// Set in `seq` to ask the peer for an acknowledgement now.
pub const ACK_NOW: u32 = 1 << 31;

/// Smallest frame that still carries a sequence number.
pub const MIN_DATA_FRAME: usize = FRAME_OVERHEAD + 4;

pub fn pattern_byte(i: usize) -> u8 {
    (i % 256) as u8
}

/// ThroughputData whose encoded frame is exactly `frame_size` bytes.
pub fn data_frame(seq: u32, frame_size: usize, ack: bool) -> Message {
    let len = frame_size.saturating_sub(MIN_DATA_FRAME);
    Message::ThroughputData {
        seq: if ack { seq | ACK_NOW } else { seq & !ACK_NOW },
        pattern: (0..len).map(pattern_byte).collect(),
    }
}

/// Receiver-side byte accounting.
#[derive(Debug, Default)]
pub struct ThroughputSink {
    pending: u64,
}

impl ThroughputSink {
    /// Counts a data frame; returns the ack to send when one was requested.
    /// Bytes of the pattern that do not match are not counted.
    pub fn on_data(&mut self, seq: u32, pattern: &[u8]) -> Option<Message> {
        let bad = pattern
            .iter()
            .enumerate()
            .filter(|&(i, &b)| b != pattern_byte(i))
            .count();
        self.pending += (MIN_DATA_FRAME + pattern.len() - bad) as u64;
        (seq & ACK_NOW != 0).then(|| Message::ThroughputAck {
            bytes_ok: std::mem::take(&mut self.pending),
        })
    }
}

/// Reply a benchmark peer owes for `msg`, if any.
pub fn bench_reply(sink: &mut ThroughputSink, msg: &Message) -> Option<Message> {
    match msg {
        Message::LatencyProbe { probe_id } => Some(Message::LatencyEcho { probe_id: *probe_id }),
        Message::ThroughputData { seq, pattern } => sink.on_data(*seq, pattern),
        _ => None,
    }
}
