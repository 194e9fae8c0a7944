//! Stop-and-wait latency and throughput benchmarks over a framed link.
//!
//! Latency: 10 rounds of 100 sequential probes, each awaiting its echo.
//! Throughput: 1000 packets of a buffer size, each frame filling the buffer
//! exactly. Non-chunked mode acks every packet; chunked mode sends
//! `size / 64` frames of 64 bytes and acks the train.

pub mod peer;
mod report;

use std::time::Duration;

use crate::clock::Clock;
use crate::protocol::{encode, new_challenge, verify_handshake, FramedLink, LinkError, Message};

pub use report::{report_csv, report_table};

pub const DEFAULT_SIZES: [usize; 4] = [64, 256, 512, 1024];
pub const CHUNK_SIZE: usize = 64;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("buffer size {0} unsupported: need at least {min} bytes, multiple of 64 when chunked", min = peer::MIN_DATA_FRAME)]
    BadSize(usize),
    #[error("echo for probe {got} while waiting for probe {expected}")]
    MismatchedId { expected: u64, got: u64 },
    #[error("peer handshake failed: {0}")]
    Handshake(String),
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub rounds: usize,
    pub probes_per_round: usize,
    pub packets: usize,
    pub timeout: Duration,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            rounds: 10,
            probes_per_round: 100,
            packets: 1000,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    /// Mean round-trip time over answered probes.
    pub mean_ms: f64,
    pub std_ms: f64,
    pub received: usize,
    /// Probes whose echo did not arrive within the timeout.
    pub lost: usize,
    /// Encoded probe frame size.
    pub frame_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputResult {
    pub size: usize,
    pub chunked: bool,
    pub bytes_ok: u64,
    pub elapsed: Duration,
    pub timeouts: usize,
}

impl ThroughputResult {
    pub fn kib_per_s(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs == 0.0 {
            return 0.0;
        }
        self.bytes_ok as f64 / secs / 1024.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub latency: Option<LatencyStats>,
    pub throughput: Vec<ThroughputResult>,
}

/// Waits for the next message matching `pick`, skipping the rest
/// (telemetry, stale replies). `None` on timeout.
async fn await_reply<T>(
    link: &mut FramedLink,
    clock: Clock,
    deadline: Duration,
    mut pick: impl FnMut(Message) -> Option<Result<T, BenchError>>,
) -> Result<Option<T>, BenchError> {
    loop {
        let left = deadline.saturating_sub(clock.now());
        match clock.timeout(left, link.recv()).await {
            Err(_) => return Ok(None),
            Ok(msg) => {
                if let Some(r) = pick(msg?) {
                    return r.map(Some);
                }
            }
        }
    }
}

pub async fn bench_latency(
    link: &mut FramedLink,
    clock: Clock,
    opts: &BenchOptions,
) -> Result<LatencyStats, BenchError> {
    let total = (opts.rounds * opts.probes_per_round) as u64;
    let mut rtts = Vec::with_capacity(total as usize);
    let mut lost = 0;
    for probe_id in 0..total {
        let sent = clock.now();
        link.send(&Message::LatencyProbe { probe_id }).await?;
        let echo = await_reply(link, clock, sent + opts.timeout, |m| match m {
            Message::LatencyEcho { probe_id: got } if got == probe_id => Some(Ok(())),
            // Late echo of a probe that already timed out.
            Message::LatencyEcho { probe_id: got } if got < probe_id => None,
            Message::LatencyEcho { probe_id: got } => Some(Err(BenchError::MismatchedId {
                expected: probe_id,
                got,
            })),
            _ => None,
        })
        .await?;
        match echo {
            Some(()) => rtts.push((clock.now() - sent).as_secs_f64() * 1e3),
            None => lost += 1,
        }
    }
    let n = rtts.len();
    let mean = if n == 0 {
        0.0
    } else {
        rtts.iter().sum::<f64>() / n as f64
    };
    let std = if n < 2 {
        0.0
    } else {
        (rtts.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(LatencyStats {
        mean_ms: mean,
        std_ms: std,
        received: n,
        lost,
        frame_bytes: encode(&Message::LatencyProbe { probe_id: 0 })
            .map(|f| f.len())
            .unwrap_or_default(),
    })
}

pub async fn bench_throughput(
    link: &mut FramedLink,
    size: usize,
    chunked: bool,
    clock: Clock,
    opts: &BenchOptions,
) -> Result<ThroughputResult, BenchError> {
    if !(peer::MIN_DATA_FRAME..=crate::protocol::MAX_PAYLOAD).contains(&size)
        || (chunked && !size.is_multiple_of(CHUNK_SIZE))
    {
        return Err(BenchError::BadSize(size));
    }
    let (frames_per_packet, frame_size) = if chunked {
        (size / CHUNK_SIZE, CHUNK_SIZE)
    } else {
        (1, size)
    };
    let start = clock.now();
    let mut bytes_ok = 0;
    let mut timeouts = 0;
    let mut seq = 0u32;
    for _ in 0..opts.packets {
        for j in 0..frames_per_packet {
            let last = j + 1 == frames_per_packet;
            link.send(&peer::data_frame(seq, frame_size, last)).await?;
            seq = seq.wrapping_add(1) & !peer::ACK_NOW;
        }
        let deadline = clock.now() + opts.timeout;
        let ack = await_reply(link, clock, deadline, |m| match m {
            Message::ThroughputAck { bytes_ok } => Some(Ok(bytes_ok)),
            _ => None,
        })
        .await?;
        match ack {
            Some(b) => bytes_ok += b,
            None => timeouts += 1,
        }
    }
    Ok(ThroughputResult {
        size,
        chunked,
        bytes_ok,
        elapsed: clock.now() - start,
        timeouts,
    })
}

/// Challenges a device peer, which refuses anything before a handshake.
pub async fn verify_peer(link: &mut FramedLink, clock: Clock, timeout: Duration) -> Result<(), BenchError> {
    let challenge = new_challenge();
    link.send(&Message::TestRequest {
        challenge: challenge.clone(),
    })
    .await?;
    let answer = await_reply(link, clock, clock.now() + timeout, |m| match m {
        Message::TestResponse { answer } => Some(Ok(answer)),
        _ => None,
    })
    .await?
    .ok_or_else(|| BenchError::Handshake("no TestResponse".into()))?;
    if verify_handshake(&challenge, &answer) {
        Ok(())
    } else {
        Err(BenchError::Handshake("wrong answer to challenge".into()))
    }
}

/// Latency plus one throughput run per size.
pub async fn run_bench(
    link: &mut FramedLink,
    label: &str,
    sizes: &[usize],
    chunked: bool,
    clock: Clock,
    opts: &BenchOptions,
) -> Result<BenchResult, BenchError> {
    let latency = bench_latency(link, clock, opts).await?;
    let mut throughput = Vec::with_capacity(sizes.len());
    for &size in sizes {
        throughput.push(bench_throughput(link, size, chunked, clock, opts).await?);
    }
    Ok(BenchResult {
        label: label.to_string(),
        latency: Some(latency),
        throughput,
    })
}

/// Answers probes and data frames on `link` until it closes.
pub async fn serve_bench_peer(mut link: FramedLink) -> Result<(), LinkError> {
    let mut sink = peer::ThroughputSink::default();
    loop {
        let msg = match link.recv().await {
            Ok(m) => m,
            Err(LinkError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        };
        if let Some(reply) = peer::bench_reply(&mut sink, &msg) {
            link.send(&reply).await?;
        }
    }
}
