//! Attitude estimation and quadcopter PWM mixing.

use crate::device::{PITCH_SIGNS, ROLL_SIGNS};
use crate::protocol::PWM_MAX;

pub const DEFAULT_ALPHA: f64 = 0.98;

/// Below this accelerometer norm only the gyro term is used.
const MIN_ACCEL_NORM: f64 = 1e-6;

/// Roll and pitch from the gravity direction.
pub fn accel_attitude(accel: [f64; 3]) -> [f64; 2] {
    let [ax, ay, az] = accel;
    [ay.atan2(az), (-ax).atan2((ay * ay + az * az).sqrt())]
}

/// One complementary filter step on roll and pitch. `gyro` is rad/s about
/// x, y, z; `accel` m/s².
pub fn complementary_filter(
    prev: [f64; 2],
    gyro: [f64; 3],
    accel: [f64; 3],
    dt: f64,
    alpha: f64,
) -> [f64; 2] {
    let predicted = [prev[0] + gyro[0] * dt, prev[1] + gyro[1] * dt];
    let norm = accel.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < MIN_ACCEL_NORM {
        return predicted;
    }
    let measured = accel_attitude(accel);
    [
        alpha * predicted[0] + (1.0 - alpha) * measured[0],
        alpha * predicted[1] + (1.0 - alpha) * measured[1],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerState {
    pub base_throttle: u16,
    /// Roll, pitch.
    pub kp: [f64; 2],
    pub kd: [f64; 2],
    pub last_pwm: [u16; 4],
}

impl Default for MixerState {
    fn default() -> Self {
        Self {
            base_throttle: 0,
            kp: [100.0; 2],
            kd: [10.0; 2],
            last_pwm: [0; 4],
        }
    }
}

/// X-layout PD mix. `attitude` and `rates` are roll, pitch.
pub fn mix_pwm(mixer: &MixerState, attitude: [f64; 2], rates: [f64; 2]) -> [u16; 4] {
    let roll = mixer.kp[0] * attitude[0] + mixer.kd[0] * rates[0];
    let pitch = mixer.kp[1] * attitude[1] + mixer.kd[1] * rates[1];
    let mut out = [0u16; 4];
    for (i, o) in out.iter_mut().enumerate() {
        let v = mixer.base_throttle as f64 + ROLL_SIGNS[i] * roll + PITCH_SIGNS[i] * pitch;
        *o = v.round().clamp(0.0, PWM_MAX as f64) as u16;
    }
    out
}
