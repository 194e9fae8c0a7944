//! Random valid protocol messages of every type.

use rand::Rng;
use roboplat_core::protocol::{AdcReading, Message, Telemetry, CHALLENGE_MAX, PWM_MAX};

use super::records::real;

fn bytes(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

fn pwm(rng: &mut impl Rng) -> [u16; 4] {
    std::array::from_fn(|_| rng.random_range(0..=PWM_MAX))
}

fn adc(rng: &mut impl Rng, max: usize) -> Vec<AdcReading> {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| AdcReading {
            channel: rng.random(),
            reading: rng.random(),
        })
        .collect()
}

pub fn message(rng: &mut impl Rng) -> Message {
    match rng.random_range(0..13) {
        0 => Message::TestRequest {
            challenge: {
                let n = rng.random_range(1..=CHALLENGE_MAX);
                bytes(rng, n)
            },
        },
        1 => Message::TestResponse {
            answer: {
                let n = rng.random_range(0..=CHALLENGE_MAX);
                bytes(rng, n)
            },
        },
        2 => Message::CmdDigital {
            line: rng.random(),
            value: rng.random(),
        },
        3 => Message::CmdPwm { strengths: pwm(rng) },
        4 => Message::AdcRequest,
        5 => Message::AdcReport {
            samples: adc(rng, 255),
        },
        6 => Message::ConfigRequest,
        7 => Message::ConfigResponse {
            channels: rng.random(),
            resolution_bits: rng.random(),
            sample_rate_hz: rng.random(),
        },
        8 => Message::LatencyProbe {
            probe_id: rng.random(),
        },
        9 => Message::LatencyEcho {
            probe_id: rng.random(),
        },
        10 => Message::ThroughputData {
            seq: rng.random(),
            pattern: {
                let n = rng.random_range(0..=1024);
                bytes(rng, n)
            },
        },
        11 => Message::ThroughputAck {
            bytes_ok: rng.random(),
        },
        _ => Message::Telemetry(Telemetry {
            t_ns: rng.random(),
            enable: rng.random(),
            forward: rng.random(),
            car_pos_m: real(rng),
            car_vel_mps: real(rng),
            pwm: pwm(rng),
            attitude: [real(rng), real(rng)],
            adc: adc(rng, 16),
        }),
    }
}

/// Every frame whose payload is at most 16 bytes: each variable-length type
/// at every length, each fixed-size type once.
pub fn small_messages(rng: &mut impl Rng) -> Vec<Message> {
    let mut out = vec![
        Message::CmdDigital { line: 3, value: true },
        Message::CmdPwm { strengths: pwm(rng) },
        Message::AdcRequest,
        Message::ConfigRequest,
        Message::ConfigResponse {
            channels: 2,
            resolution_bits: 10,
            sample_rate_hz: 100,
        },
        Message::LatencyProbe {
            probe_id: rng.random(),
        },
        Message::LatencyEcho {
            probe_id: rng.random(),
        },
        Message::ThroughputAck {
            bytes_ok: rng.random(),
        },
    ];
    for n in 1..=16 {
        out.push(Message::TestRequest {
            challenge: bytes(rng, n),
        });
    }
    for n in 0..=16 {
        out.push(Message::TestResponse {
            answer: bytes(rng, n),
        });
    }
    for n in 0..=12 {
        out.push(Message::ThroughputData {
            seq: rng.random(),
            pattern: bytes(rng, n),
        });
    }
    for n in 0..=5 {
        out.push(Message::AdcReport {
            samples: adc_exact(rng, n),
        });
    }
    out
}

fn adc_exact(rng: &mut impl Rng, n: usize) -> Vec<AdcReading> {
    (0..n)
        .map(|_| AdcReading {
            channel: rng.random(),
            reading: rng.random(),
        })
        .collect()
}
