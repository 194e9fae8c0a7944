//! Line-delimited JSON gateway for user interfaces.
//!
//! Inbound, one object per line:
//! `{"type":"digital","line":0,"value":1}`, `{"type":"pwm","values":[a,b,c,d]}`,
//! `{"type":"latency_test"}` (optional `"sizes":[..]`, `"chunked":bool`).
//!
//! Outbound: `status`, `telemetry`, `ack`, `bench_result` and `error`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWriteExt, BufReader};

use super::{BenchRequest, Station, StationStatus, SubmitError};
use crate::commbench::{BenchOptions, BenchResult};
use crate::protocol::{Message, Telemetry};
use crate::transport::Channel;

/// Longest inbound line accepted.
pub const MAX_LINE: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UiRequest {
    Digital {
        line: u8,
        value: u8,
    },
    Pwm {
        values: [u16; 4],
    },
    LatencyTest {
        #[serde(default)]
        sizes: Vec<usize>,
        #[serde(default)]
        chunked: bool,
    },
}

impl UiRequest {
    /// Device command for command requests.
    pub fn to_command(&self) -> Result<Option<Message>, SubmitError> {
        match *self {
            UiRequest::Digital { line, value } => {
                if value > 1 {
                    return Err(SubmitError::BadValue(format!("digital value {value} not 0 or 1")));
                }
                Ok(Some(Message::CmdDigital {
                    line,
                    value: value == 1,
                }))
            }
            UiRequest::Pwm { values } => Ok(Some(Message::CmdPwm { strengths: values })),
            UiRequest::LatencyTest { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiAdc {
    pub ch: u8,
    pub v: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiThroughput {
    pub size: usize,
    pub kibps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UiEvent {
    Status {
        connected: bool,
        verified: bool,
    },
    Telemetry {
        t_ns: i64,
        car_pos_m: f64,
        pwm: [u16; 4],
        adc: Vec<UiAdc>,
        attitude: [f64; 2],
    },
    Ack {
        accepted: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    BenchResult {
        latency_ms: f64,
        latency_std_ms: f64,
        lost: usize,
        throughput: Vec<UiThroughput>,
    },
    Error {
        message: String,
    },
}

impl From<StationStatus> for UiEvent {
    fn from(s: StationStatus) -> Self {
        UiEvent::Status {
            connected: s.connected,
            verified: s.verified,
        }
    }
}

impl From<&Telemetry> for UiEvent {
    fn from(t: &Telemetry) -> Self {
        UiEvent::Telemetry {
            t_ns: t.t_ns,
            car_pos_m: t.car_pos_m,
            pwm: t.pwm,
            adc: t
                .adc
                .iter()
                .map(|a| UiAdc {
                    ch: a.channel,
                    v: a.reading,
                })
                .collect(),
            attitude: t.attitude,
        }
    }
}

impl From<&BenchResult> for UiEvent {
    fn from(r: &BenchResult) -> Self {
        let (latency_ms, latency_std_ms, lost) = r
            .latency
            .as_ref()
            .map_or((0.0, 0.0, 0), |l| (l.mean_ms, l.std_ms, l.lost));
        UiEvent::BenchResult {
            latency_ms,
            latency_std_ms,
            lost,
            throughput: r
                .throughput
                .iter()
                .map(|t| UiThroughput {
                    size: t.size,
                    kibps: t.kib_per_s(),
                })
                .collect(),
        }
    }
}

impl UiEvent {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("UI events serialize");
        s.push('\n');
        s
    }
}

async fn handle_line(line: &str, station: &Station) -> UiEvent {
    let req: UiRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            return UiEvent::Error {
                message: format!("malformed request: {e}"),
            }
        }
    };
    let ack = |r: Result<(), SubmitError>| UiEvent::Ack {
        accepted: r.is_ok(),
        reason: r.err().map(|e| e.to_string()),
    };
    match req.to_command() {
        Err(e) => ack(Err(e)),
        Ok(Some(cmd)) => ack(station.submit_command(cmd).await),
        Ok(None) => {
            let UiRequest::LatencyTest { sizes, chunked } = req else {
                unreachable!("only latency tests carry no command")
            };
            let bench = BenchRequest {
                sizes,
                chunked,
                options: BenchOptions::default(),
            };
            match station.bench(bench).await {
                Ok(r) => UiEvent::from(&r),
                Err(e) => ack(Err(e)),
            }
        }
    }
}

/// Appends to `buf` up to and including a newline. Returns 0 at end of
/// stream. Stops early once `buf` exceeds [`MAX_LINE`]. Cancel-safe: bytes
/// already moved into `buf` stay there.
async fn read_line_bounded<R: AsyncRead + Unpin>(
    r: &mut BufReader<R>,
    buf: &mut Vec<u8>,
) -> std::io::Result<usize> {
    loop {
        let available = r.fill_buf().await?;
        if available.is_empty() {
            return Ok(0);
        }
        let (n, done) = match available.iter().position(|&b| b == b'\n') {
            Some(i) => (i + 1, true),
            None => (available.len(), false),
        };
        buf.extend_from_slice(&available[..n]);
        r.consume(n);
        if done || buf.len() > MAX_LINE {
            return Ok(buf.len());
        }
    }
}

/// Serves one UI connection until it closes.
pub async fn serve_ui_session(channel: Channel, station: &Station) {
    let (r, mut w) = tokio::io::split(channel);
    let mut lines = BufReader::new(r);
    let mut status = station.status_watch();
    let mut telemetry = station.telemetry_watch();
    let clock = station.clock();
    let min_gap = Duration::from_secs_f64(1.0 / station.options().telemetry_max_hz);
    let mut next_telemetry_at = Duration::ZERO;
    let mut telemetry_pending = false;
    telemetry.mark_unchanged();

    let first = UiEvent::from(*status.borrow_and_update()).to_line();
    if w.write_all(first.as_bytes()).await.is_err() {
        return;
    }
    let mut buf = Vec::new();
    loop {
        let out = tokio::select! {
            r = read_line_bounded(&mut lines, &mut buf) => match r {
                Ok(0) | Err(_) => return,
                Ok(_) if buf.len() > MAX_LINE => {
                    let _ = w.write_all(UiEvent::Error { message: "line too long".into() }.to_line().as_bytes()).await;
                    return;
                }
                Ok(_) => {
                    let text = String::from_utf8_lossy(&buf).trim().to_string();
                    buf.clear();
                    if text.is_empty() {
                        continue;
                    }
                    handle_line(&text, station).await.to_line()
                }
            },
            r = status.changed() => {
                if r.is_err() {
                    return;
                }
                UiEvent::from(*status.borrow_and_update()).to_line()
            }
            r = telemetry.changed(), if !telemetry_pending => {
                if r.is_err() {
                    return;
                }
                telemetry_pending = true;
                continue;
            }
            _ = clock.sleep_until(next_telemetry_at), if telemetry_pending => {
                telemetry_pending = false;
                next_telemetry_at = clock.now() + min_gap;
                let snap = telemetry.borrow_and_update().clone();
                match snap {
                    Some(t) => UiEvent::from(&t).to_line(),
                    None => continue,
                }
            }
        };
        if w.write_all(out.as_bytes()).await.is_err() {
            return;
        }
    }
}
