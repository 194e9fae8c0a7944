use crate::dataset::ImuSample;

/// One combined IMU row on an accelerometer timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedImuRow {
    pub timestamp_ns: i64,
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rows: Vec<AlignedImuRow>,
    /// Accel samples outside the gyro span or repeating a timestamp.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("{0} stream is empty")]
    EmptyStream(&'static str),
    #[error("accelerometer and gyroscope time ranges do not overlap")]
    EmptyOverlap,
}

/// Resamples the gyro stream onto accelerometer timestamps by linear
/// interpolation. Both inputs must be sorted by timestamp.
///
/// Output timestamps are exactly the accel timestamps inside
/// `[first gyro t, last gyro t]`, strictly increasing.
pub fn align_imu(gyro: &[ImuSample], accel: &[ImuSample]) -> Result<Alignment, AlignError> {
    if gyro.is_empty() {
        return Err(AlignError::EmptyStream("gyroscope"));
    }
    if accel.is_empty() {
        return Err(AlignError::EmptyStream("accelerometer"));
    }
    let first = gyro[0].timestamp_ns;
    let last = gyro[gyro.len() - 1].timestamp_ns;

    let mut rows: Vec<AlignedImuRow> = Vec::with_capacity(accel.len());
    let mut dropped = 0;
    // `seg` is the index of the last gyro sample with timestamp <= t.
    let mut seg = 0usize;
    for a in accel {
        let t = a.timestamp_ns;
        let repeated = rows.last().is_some_and(|r| r.timestamp_ns >= t);
        if t < first || t > last || repeated {
            dropped += 1;
            continue;
        }
        while seg + 1 < gyro.len() && gyro[seg + 1].timestamp_ns <= t {
            seg += 1;
        }
        let g0 = &gyro[seg];
        let value = if g0.timestamp_ns == t || seg + 1 == gyro.len() {
            g0.axis_values
        } else {
            let g1 = &gyro[seg + 1];
            let w = (t - g0.timestamp_ns) as f64 / (g1.timestamp_ns - g0.timestamp_ns) as f64;
            lerp(&g0.axis_values, &g1.axis_values, w)
        };
        rows.push(AlignedImuRow {
            timestamp_ns: t,
            gyro: value,
            accel: a.axis_values,
        });
    }
    if rows.is_empty() {
        return Err(AlignError::EmptyOverlap);
    }
    Ok(Alignment { rows, dropped })
}

fn lerp(a: &[f64; 3], b: &[f64; 3], w: f64) -> [f64; 3] {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t_ms: i64, v: f64) -> ImuSample {
        ImuSample {
            timestamp_ns: t_ms * 1_000_000,
            axis_values: [v; 3],
            bias: None,
            sensor_id: 0,
        }
    }

    #[test]
    fn midpoints() {
        let gyro = [s(0, 0.0), s(10, 1.0), s(20, 2.0)];
        let accel = [s(5, 9.0), s(15, 9.5)];
        let out = align_imu(&gyro, &accel).unwrap();
        assert_eq!(out.dropped, 0);
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].timestamp_ns, 5_000_000);
        assert_eq!(out.rows[0].gyro, [0.5; 3]);
        assert_eq!(out.rows[1].gyro, [1.5; 3]);
        assert_eq!(out.rows[1].accel, [9.5; 3]);
    }

    #[test]
    fn knots_copied_exactly() {
        let gyro = [s(0, 0.1), s(10, 0.7), s(20, 0.3)];
        let accel = [s(0, 1.0), s(10, 1.0), s(20, 1.0)];
        let out = align_imu(&gyro, &accel).unwrap();
        let got: Vec<f64> = out.rows.iter().map(|r| r.gyro[0]).collect();
        assert_eq!(got, vec![0.1, 0.7, 0.3]);
    }

    #[test]
    fn outside_span_is_dropped() {
        let gyro = [s(0, 0.0), s(10, 1.0), s(20, 2.0)];
        let accel = [s(-5, 0.0), s(25, 0.0)];
        assert_eq!(align_imu(&gyro, &accel), Err(AlignError::EmptyOverlap));
        let accel = [s(-5, 0.0), s(10, 0.0), s(25, 0.0)];
        let out = align_imu(&gyro, &accel).unwrap();
        assert_eq!(out.dropped, 2);
        assert_eq!(out.rows.len(), 1);
    }

    #[test]
    fn duplicate_gyro_timestamps() {
        let gyro = [s(0, 0.0), s(10, 1.0), s(10, 3.0), s(20, 5.0)];
        let accel = [s(10, 0.0), s(15, 0.0)];
        let out = align_imu(&gyro, &accel).unwrap();
        assert_eq!(out.rows[0].gyro, [3.0; 3]);
        assert_eq!(out.rows[1].gyro, [4.0; 3]);
    }

    #[test]
    fn repeated_accel_timestamp_dropped() {
        let gyro = [s(0, 0.0), s(20, 2.0)];
        let accel = [s(5, 0.0), s(5, 1.0), s(6, 0.0)];
        let out = align_imu(&gyro, &accel).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            align_imu(&[], &[s(0, 0.0)]),
            Err(AlignError::EmptyStream(_))
        ));
        assert!(matches!(
            align_imu(&[s(0, 0.0)], &[]),
            Err(AlignError::EmptyStream(_))
        ));
    }
}
