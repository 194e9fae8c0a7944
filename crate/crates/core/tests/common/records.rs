//! Random valid records of every schema.

use rand::Rng;
use roboplat_core::dataset::{
    AdcSample, CameraIndexEntry, GnssMeasurement, GnssNavMessage, GpsFix, ImuSample, SensorKind, SensorRecord,
};

/// Any finite double, weighted toward awkward ones.
pub fn real(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => loop {
            let v = f64::from_bits(rng.next_u64());
            if v.is_finite() {
                break v;
            }
        },
        1 => [0.0, -0.0, 1e-300, -5e-324, f64::MAX, f64::MIN_POSITIVE][rng.random_range(0..6)],
        2 => rng.random_range(-1e6..1e6f64).round(),
        _ => rng.random_range(-100.0..100.0),
    }
}

fn timestamp(rng: &mut impl Rng) -> i64 {
    match rng.random_range(0..4) {
        0 => 0,
        1 => i64::MAX,
        _ => rng.random_range(0..4_000_000_000_000_000_000),
    }
}

fn vec3(rng: &mut impl Rng) -> [f64; 3] {
    [real(rng), real(rng), real(rng)]
}

fn imu(rng: &mut impl Rng) -> ImuSample {
    ImuSample {
        timestamp_ns: timestamp(rng),
        axis_values: vec3(rng),
        bias: rng.random_bool(0.5).then(|| vec3(rng)),
        sensor_id: rng.random(),
    }
}

fn token(rng: &mut impl Rng, alphabet: &[u8], len: std::ops::RangeInclusive<usize>) -> String {
    let n = rng.random_range(len);
    (0..n)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
        .collect()
}

pub fn record(rng: &mut impl Rng, kind: SensorKind) -> SensorRecord {
    match kind {
        SensorKind::Gyro => SensorRecord::Gyro(imu(rng)),
        SensorKind::Accel => SensorRecord::Accel(imu(rng)),
        SensorKind::Mag => SensorRecord::Mag(imu(rng)),
        SensorKind::Gps => SensorRecord::Gps(GpsFix {
            timestamp_ns: timestamp(rng),
            latitude_deg: rng.random_range(-90.0..=90.0),
            longitude_deg: rng.random_range(-180.0..=180.0),
            altitude_m: real(rng),
            velocity_mps: real(rng).abs(),
            bearing_deg: if rng.random_bool(0.9) {
                rng.random_range(0.0..360.0)
            } else {
                real(rng)
            },
        }),
        SensorKind::GnssNav => SensorRecord::GnssNav(GnssNavMessage {
            timestamp_ns: timestamp(rng),
            sv_id: rng.random(),
            nav_type: rng.random(),
            msg_id: rng.random(),
            sub_msg_id: rng.random(),
            data: {
                let n = rng.random_range(0..48);
                (0..n).map(|_| rng.random()).collect()
            },
        }),
        SensorKind::GnssMeas => SensorRecord::GnssMeas(GnssMeasurement {
            timestamp_ns: timestamp(rng),
            time_offset_ns: real(rng),
            rx_sv_time_ns: rng.random(),
            acc_delta_range_m: real(rng),
            ps_range_rate_mps: real(rng),
            cn0_dbhz: real(rng),
            snr_db: real(rng),
            cr_freq_hz: real(rng),
            cr_cycles: rng.random(),
            cr_phase: real(rng),
            sv_id: rng.random(),
            const_type: rng.random(),
            inter_signal: rng.random_bool(0.5).then(|| {
                (
                    real(rng),
                    token(rng, b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_", 1..=6),
                )
            }),
        }),
        SensorKind::Camera => {
            let dirs = rng.random_range(0..3);
            let mut path = String::new();
            for _ in 0..dirs {
                path.push_str(&token(rng, b"abcxyz019_-", 1..=8));
                path.push('/');
            }
            path.push_str(&token(rng, b"abcxyz019_-.", 1..=12));
            path.push('.');
            path.push_str(["jpg", "jpeg", "png", "bmp", "PNG"][rng.random_range(0..5)]);
            SensorRecord::Camera(CameraIndexEntry {
                timestamp_ns: timestamp(rng),
                image_path: path,
            })
        }
        SensorKind::Adc => SensorRecord::Adc(AdcSample {
            timestamp_ns: timestamp(rng),
            reading: rng.random(),
            channel_id: rng.random_bool(0.5).then(|| rng.random()),
        }),
    }
}
