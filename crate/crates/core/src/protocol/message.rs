use super::MAX_PAYLOAD;

pub const PWM_MAX: u16 = 1000;
pub const CHALLENGE_MAX: usize = 64;

/// One ADC channel value as carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcReading {
    pub channel: u8,
    pub reading: u16,
}

/// Device state snapshot pushed upstream for display.
#[derive(Debug, Clone, PartialEq)]
pub struct Telemetry {
    pub t_ns: i64,
    pub enable: bool,
    pub forward: bool,
    pub car_pos_m: f64,
    pub car_vel_mps: f64,
    pub pwm: [u16; 4],
    /// Roll, pitch in radians.
    pub attitude: [f64; 2],
    /// Latest reading per ADC channel.
    pub adc: Vec<AdcReading>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    TestRequest {
        challenge: Vec<u8>,
    },
    TestResponse {
        answer: Vec<u8>,
    },
    CmdDigital {
        line: u8,
        value: bool,
    },
    CmdPwm {
        strengths: [u16; 4],
    },
    AdcRequest,
    AdcReport {
        samples: Vec<AdcReading>,
    },
    ConfigRequest,
    ConfigResponse {
        channels: u8,
        resolution_bits: u8,
        sample_rate_hz: u16,
    },
    LatencyProbe {
        probe_id: u64,
    },
    LatencyEcho {
        probe_id: u64,
    },
    ThroughputData {
        seq: u32,
        pattern: Vec<u8>,
    },
    ThroughputAck {
        bytes_ok: u64,
    },
    Telemetry(Telemetry),
}

/// Wire type codes.
pub mod msg_type {
    pub const TEST_REQUEST: u8 = 0x01;
    pub const TEST_RESPONSE: u8 = 0x02;
    pub const CMD_DIGITAL: u8 = 0x10;
    pub const CMD_PWM: u8 = 0x11;
    pub const ADC_REQUEST: u8 = 0x20;
    pub const ADC_REPORT: u8 = 0x21;
    pub const CONFIG_REQUEST: u8 = 0x22;
    pub const CONFIG_RESPONSE: u8 = 0x23;
    pub const LATENCY_PROBE: u8 = 0x30;
    pub const LATENCY_ECHO: u8 = 0x31;
    pub const THROUGHPUT_DATA: u8 = 0x32;
    pub const THROUGHPUT_ACK: u8 = 0x33;
    pub const TELEMETRY: u8 = 0x40;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("bad value: {0}")]
    BadValue(String),
}

fn bad<T>(msg: impl Into<String>) -> Result<T, PayloadError> {
    Err(PayloadError::BadValue(msg.into()))
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Message::TestRequest { .. } => TEST_REQUEST,
            Message::TestResponse { .. } => TEST_RESPONSE,
            Message::CmdDigital { .. } => CMD_DIGITAL,
            Message::CmdPwm { .. } => CMD_PWM,
            Message::AdcRequest => ADC_REQUEST,
            Message::AdcReport { .. } => ADC_REPORT,
            Message::ConfigRequest => CONFIG_REQUEST,
            Message::ConfigResponse { .. } => CONFIG_RESPONSE,
            Message::LatencyProbe { .. } => LATENCY_PROBE,
            Message::LatencyEcho { .. } => LATENCY_ECHO,
            Message::ThroughputData { .. } => THROUGHPUT_DATA,
            Message::ThroughputAck { .. } => THROUGHPUT_ACK,
            Message::Telemetry(_) => TELEMETRY,
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(self, Message::CmdDigital { .. } | Message::CmdPwm { .. })
    }

    /// Variant-specific bounds shared by encoder and decoder.
    pub fn validate(&self) -> Result<(), PayloadError> {
        match self {
            Message::TestRequest { challenge } => {
                if challenge.is_empty() || challenge.len() > CHALLENGE_MAX {
                    return bad(format!("challenge length {} not in 1..=64", challenge.len()));
                }
            }
            Message::TestResponse { answer } if answer.len() > CHALLENGE_MAX => {
                return bad(format!("answer length {} exceeds 64", answer.len()));
            }
            Message::CmdPwm { strengths } | Message::Telemetry(Telemetry { pwm: strengths, .. }) => {
                if let Some(s) = strengths.iter().find(|&&s| s > PWM_MAX) {
                    return bad(format!("PWM strength {s} exceeds {PWM_MAX}"));
                }
            }
            Message::AdcReport { samples } if samples.len() > 255 => {
                return bad("more than 255 ADC samples in one report");
            }
            _ => {}
        }
        if let Message::Telemetry(t) = self {
            if t.adc.len() > 255 {
                return bad("more than 255 ADC channels in telemetry");
            }
            let reals = [t.car_pos_m, t.car_vel_mps, t.attitude[0], t.attitude[1]];
            if reals.iter().any(|v| !v.is_finite()) {
                return bad("non-finite telemetry value");
            }
        }
        Ok(())
    }

    pub(crate) fn write_payload(&self, out: &mut Vec<u8>) {
        match self {
            Message::TestRequest { challenge } => out.extend_from_slice(challenge),
            Message::TestResponse { answer } => out.extend_from_slice(answer),
            Message::CmdDigital { line, value } => out.extend_from_slice(&[*line, *value as u8]),
            Message::CmdPwm { strengths } => strengths
                .iter()
                .for_each(|s| out.extend_from_slice(&s.to_be_bytes())),
            Message::AdcRequest | Message::ConfigRequest => {}
            Message::AdcReport { samples } => write_adc(out, samples),
            Message::ConfigResponse {
                channels,
                resolution_bits,
                sample_rate_hz,
            } => {
                out.push(*channels);
                out.push(*resolution_bits);
                out.extend_from_slice(&sample_rate_hz.to_be_bytes());
            }
            Message::LatencyProbe { probe_id } | Message::LatencyEcho { probe_id } => {
                out.extend_from_slice(&probe_id.to_be_bytes())
            }
            Message::ThroughputData { seq, pattern } => {
                out.extend_from_slice(&seq.to_be_bytes());
                out.extend_from_slice(pattern);
            }
            Message::ThroughputAck { bytes_ok } => out.extend_from_slice(&bytes_ok.to_be_bytes()),
            Message::Telemetry(t) => {
                out.extend_from_slice(&t.t_ns.to_be_bytes());
                out.push(t.enable as u8 | (t.forward as u8) << 1);
                for v in [t.car_pos_m, t.car_vel_mps] {
                    out.extend_from_slice(&v.to_be_bytes());
                }
                t.pwm.iter().for_each(|s| out.extend_from_slice(&s.to_be_bytes()));
                for v in t.attitude {
                    out.extend_from_slice(&v.to_be_bytes());
                }
                out.push(t.adc.len() as u8);
                write_adc(out, &t.adc);
            }
        }
    }

    pub(crate) fn payload_len(&self) -> usize {
        match self {
            Message::TestRequest { challenge } => challenge.len(),
            Message::TestResponse { answer } => answer.len(),
            Message::CmdDigital { .. } => 2,
            Message::CmdPwm { .. } => 8,
            Message::AdcRequest | Message::ConfigRequest => 0,
            Message::AdcReport { samples } => 3 * samples.len(),
            Message::ConfigResponse { .. } => 4,
            Message::LatencyProbe { .. } | Message::LatencyEcho { .. } => 8,
            Message::ThroughputData { pattern, .. } => 4 + pattern.len(),
            Message::ThroughputAck { .. } => 8,
            Message::Telemetry(t) => TELEMETRY_FIXED + 3 * t.adc.len(),
        }
    }

    pub(crate) fn from_payload(msg_type: u8, p: &[u8]) -> Result<Message, PayloadError> {
        use msg_type::*;
        let exact = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                bad(format!(
                    "payload length {} for type 0x{msg_type:02x}, expected {n}",
                    p.len()
                ))
            }
        };
        let msg = match msg_type {
            TEST_REQUEST => Message::TestRequest {
                challenge: p.to_vec(),
            },
            TEST_RESPONSE => Message::TestResponse { answer: p.to_vec() },
            CMD_DIGITAL => {
                exact(2)?;
                let value = match p[1] {
                    0 => false,
                    1 => true,
                    v => return bad(format!("digital value {v} not 0 or 1")),
                };
                Message::CmdDigital { line: p[0], value }
            }
            CMD_PWM => {
                exact(8)?;
                Message::CmdPwm {
                    strengths: std::array::from_fn(|i| be_u16(&p[2 * i..])),
                }
            }
            ADC_REQUEST => {
                exact(0)?;
                Message::AdcRequest
            }
            ADC_REPORT => Message::AdcReport {
                samples: read_adc(p)?,
            },
            CONFIG_REQUEST => {
                exact(0)?;
                Message::ConfigRequest
            }
            CONFIG_RESPONSE => {
                exact(4)?;
                Message::ConfigResponse {
                    channels: p[0],
                    resolution_bits: p[1],
                    sample_rate_hz: be_u16(&p[2..]),
                }
            }
            LATENCY_PROBE => {
                exact(8)?;
                Message::LatencyProbe { probe_id: be_u64(p) }
            }
            LATENCY_ECHO => {
                exact(8)?;
                Message::LatencyEcho { probe_id: be_u64(p) }
            }
            THROUGHPUT_DATA => {
                if p.len() < 4 {
                    return bad("throughput payload shorter than its sequence number");
                }
                Message::ThroughputData {
                    seq: u32::from_be_bytes([p[0], p[1], p[2], p[3]]),
                    pattern: p[4..].to_vec(),
                }
            }
            THROUGHPUT_ACK => {
                exact(8)?;
                Message::ThroughputAck { bytes_ok: be_u64(p) }
            }
            TELEMETRY => {
                if p.len() < TELEMETRY_FIXED {
                    return bad("short telemetry payload");
                }
                let n = p[TELEMETRY_FIXED - 1] as usize;
                exact(TELEMETRY_FIXED + 3 * n)?;
                Message::Telemetry(Telemetry {
                    t_ns: be_u64(p) as i64,
                    enable: p[8] & 1 != 0,
                    forward: p[8] & 2 != 0,
                    car_pos_m: be_f64(&p[9..]),
                    car_vel_mps: be_f64(&p[17..]),
                    pwm: std::array::from_fn(|i| be_u16(&p[25 + 2 * i..])),
                    attitude: [be_f64(&p[33..]), be_f64(&p[41..])],
                    adc: read_adc(&p[TELEMETRY_FIXED..])?,
                })
            }
            other => return Err(PayloadError::UnknownType(other)),
        };
        msg.validate()?;
        debug_assert!(msg.payload_len() <= MAX_PAYLOAD);
        Ok(msg)
    }
}

// t_ns(8) flags(1) pos(8) vel(8) pwm(8) roll(8) pitch(8) count(1)
const TELEMETRY_FIXED: usize = 50;

fn write_adc(out: &mut Vec<u8>, samples: &[AdcReading]) {
    for s in samples {
        out.push(s.channel);
        out.extend_from_slice(&s.reading.to_be_bytes());
    }
}

fn read_adc(p: &[u8]) -> Result<Vec<AdcReading>, PayloadError> {
    if !p.len().is_multiple_of(3) {
        return bad("ADC payload length not a multiple of 3");
    }
    Ok(p.chunks_exact(3)
        .map(|c| AdcReading {
            channel: c[0],
            reading: be_u16(&c[1..]),
        })
        .collect())
}

fn be_u16(p: &[u8]) -> u16 {
    u16::from_be_bytes([p[0], p[1]])
}

fn be_u64(p: &[u8]) -> u64 {
    u64::from_be_bytes(p[..8].try_into().expect("8 bytes"))
}

fn be_f64(p: &[u8]) -> f64 {
    f64::from_bits(be_u64(p))
}
