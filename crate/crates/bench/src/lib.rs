//! Deterministic inputs shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roboplat_core::dataset::ImuSample;
use roboplat_core::protocol::{AdcReading, Message};

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

/// A throughput frame that encodes to exactly `size` bytes.
pub fn throughput_frame(size: usize) -> Message {
    let pattern_len = size.checked_sub(14).expect("frame smaller than its header");
    Message::ThroughputData {
        seq: 7,
        pattern: (0..pattern_len).map(|i| i as u8).collect(),
    }
}

/// The mixed traffic a bridge sees: commands, ADC reports and probes.
pub fn mixed_traffic(n: usize) -> Vec<Message> {
    let mut rng = rng();
    (0..n)
        .map(|i| match i % 4 {
            0 => Message::CmdDigital {
                line: rng.random_range(0..4),
                value: rng.random(),
            },
            1 => Message::CmdPwm {
                strengths: std::array::from_fn(|_| rng.random_range(0..=1000)),
            },
            2 => Message::AdcReport {
                samples: (0..4)
                    .map(|channel| AdcReading {
                        channel,
                        reading: rng.random_range(0..1024),
                    })
                    .collect(),
            },
            _ => Message::LatencyProbe { probe_id: i as u64 },
        })
        .collect()
}

/// Gyro at 200 Hz and accel at 100 Hz with jittered timestamps.
pub fn imu_streams(seconds: usize) -> (Vec<ImuSample>, Vec<ImuSample>) {
    let mut rng = rng();
    let mut stream = |period_ns: i64, n: usize| {
        let mut t = 0i64;
        (0..n)
            .map(|_| {
                t += period_ns + rng.random_range(-period_ns / 10..=period_ns / 10);
                ImuSample {
                    timestamp_ns: t,
                    axis_values: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                    bias: None,
                    sensor_id: 0,
                }
            })
            .collect()
    };
    let gyro = stream(5_000_000, seconds * 200);
    let accel = stream(10_000_000, seconds * 100);
    (gyro, accel)
}
