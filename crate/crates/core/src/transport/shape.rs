//! Delay and bandwidth shaping over any channel.
//!
//! Each direction runs a reader pump that stamps every chunk with a delivery
//! time and a writer pump that releases chunks at that time. Bandwidth is
//! charged on egress only: bytes written by the wrapped side serialize at
//! `bandwidth`, bytes flowing back only see the one-way delay.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};
use tokio::sync::mpsc;

use super::Channel;
use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Unlimited,
    BytesPerSec(f64),
}

impl Bandwidth {
    /// Serialization time of `len` bytes.
    pub fn transmit_time(&self, len: usize) -> Duration {
        match self {
            Bandwidth::Unlimited => Duration::ZERO,
            Bandwidth::BytesPerSec(b) => Duration::from_secs_f64(len as f64 / b),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Unlimited => f.write_str("inf"),
            Bandwidth::BytesPerSec(b) => write!(f, "{b}B/s"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = String;

    /// `inf`, or a positive number with an optional `B/s`, `KB/s`, `KiB/s`,
    /// `MB/s` or `MiB/s` suffix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("unlimited") {
            return Ok(Bandwidth::Unlimited);
        }
        let split = s
            .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E'))
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let value: f64 = num.parse().map_err(|_| format!("bad bandwidth {s:?}"))?;
        let scale = match unit.trim() {
            "" | "B/s" => 1.0,
            "KB/s" | "kB/s" => 1e3,
            "KiB/s" => 1024.0,
            "MB/s" => 1e6,
            "MiB/s" => 1024.0 * 1024.0,
            other => return Err(format!("unknown bandwidth unit {other:?}")),
        };
        let bps = value * scale;
        if !(bps.is_finite() && bps > 0.0) {
            return Err(format!("bandwidth must be positive, got {s:?}"));
        }
        Ok(Bandwidth::BytesPerSec(bps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingParams {
    pub one_way_delay: Duration,
    pub bandwidth: Bandwidth,
    pub jitter_std: Duration,
    pub seed: u64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        Self {
            one_way_delay: Duration::ZERO,
            bandwidth: Bandwidth::Unlimited,
            jitter_std: Duration::ZERO,
            seed: 0,
        }
    }
}

impl ShapingParams {
    pub fn delay(one_way_delay: Duration) -> Self {
        Self {
            one_way_delay,
            ..Self::default()
        }
    }

    pub fn with_bandwidth(mut self, bandwidth: Bandwidth) -> Self {
        self.bandwidth = bandwidth;
        self
    }
}

impl fmt::Display for ShapingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "delay={},bw={},jitter={}",
            humantime::format_duration(self.one_way_delay),
            self.bandwidth,
            humantime::format_duration(self.jitter_std)
        )
    }
}

impl FromStr for ShapingParams {
    type Err = String;

    /// Comma-separated `key=value` list; keys `delay`, `bw`, `jitter`, `seed`.
    /// Example: `delay=5ms,bw=8KiB/s`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = ShapingParams::default();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {item:?}"))?;
            let duration = |v: &str| {
                if v.trim() == "0" {
                    return Ok(Duration::ZERO);
                }
                humantime::parse_duration(v.trim()).map_err(|e| format!("{key}: {e}"))
            };
            match key.trim() {
                "delay" => p.one_way_delay = duration(value)?,
                "bw" | "bandwidth" => p.bandwidth = value.parse()?,
                "jitter" => p.jitter_std = duration(value)?,
                "seed" => p.seed = value.trim().parse().map_err(|_| format!("bad seed {value:?}"))?,
                other => return Err(format!("unknown shaping key {other:?}")),
            }
        }
        Ok(p)
    }
}

/// Wraps `channel` so traffic through it sees the configured delay and
/// bandwidth, timed by `clock`. Content and order are preserved.
pub fn shape(channel: Channel, params: ShapingParams, clock: Clock) -> Channel {
    let (user, inner) = tokio::io::duplex(super::PIPE_BUFFER);
    let (inner_r, inner_w) = tokio::io::split(inner);
    let (chan_r, chan_w) = tokio::io::split(channel);
    let egress = Direction::new(params, params.bandwidth, params.seed);
    let ingress = Direction::new(params, Bandwidth::Unlimited, params.seed ^ 0x9E37_79B9_7F4A_7C15);
    spawn_direction(inner_r, chan_w, egress, clock);
    spawn_direction(chan_r, inner_w, ingress, clock);
    Box::new(user)
}

struct Direction {
    delay: Duration,
    bandwidth: Bandwidth,
    jitter: Option<(Normal<f64>, ChaCha8Rng)>,
    link_free: Duration,
    last_delivery: Duration,
}

impl Direction {
    fn new(params: ShapingParams, bandwidth: Bandwidth, seed: u64) -> Self {
        let jitter = (!params.jitter_std.is_zero()).then(|| {
            let normal = Normal::new(0.0, params.jitter_std.as_secs_f64()).expect("finite jitter std");
            (normal, ChaCha8Rng::seed_from_u64(seed))
        });
        Self {
            delay: params.one_way_delay,
            bandwidth,
            jitter,
            link_free: Duration::ZERO,
            last_delivery: Duration::ZERO,
        }
    }

    /// Delivery time of a chunk of `len` bytes handed over at `now`.
    fn schedule(&mut self, now: Duration, len: usize) -> Duration {
        let start = now.max(self.link_free);
        self.link_free = start + self.bandwidth.transmit_time(len);
        let offset = self.delay.as_secs_f64() + self.jitter.as_mut().map_or(0.0, |(n, rng)| n.sample(rng));
        let deliver = self.link_free + Duration::from_secs_f64(offset.max(0.0));
        // Jitter must not reorder bytes.
        self.last_delivery = deliver.max(self.last_delivery);
        self.last_delivery
    }
}

fn spawn_direction<R, W>(mut from: R, mut to: W, mut dir: Direction, clock: Clock)
where
    R: AsyncRead + Unpin + Send + 'static,
    W: AsyncWrite + Unpin + Send + 'static,
{
    let (tx, mut rx) = mpsc::unbounded_channel::<(Duration, Vec<u8>)>();
    tokio::spawn(async move {
        let mut buf = vec![0u8; 64 * 1024];
        loop {
            let n = match from.read(&mut buf).await {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            };
            let at = dir.schedule(clock.now(), n);
            if tx.send((at, buf[..n].to_vec())).is_err() {
                break;
            }
        }
    });
    tokio::spawn(async move {
        let mut pending = VecDeque::new();
        while let Some(item) = rx.recv().await {
            pending.push_back(item);
            while let Some((at, bytes)) = pending.pop_front() {
                clock.sleep_until(at).await;
                if to.write_all(&bytes).await.is_err() || to.flush().await.is_err() {
                    return;
                }
                while let Ok(next) = rx.try_recv() {
                    pending.push_back(next);
                }
            }
        }
        let _ = to.shutdown().await;
    });
}
