use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::protocol::{AdcReading, Message, Telemetry, PWM_MAX};

/// Car speed while enabled, m/s.
pub const V_MAX: f64 = 1.0;
/// Quad attitude time constant.
pub const QUAD_TAU: Duration = Duration::from_millis(200);
/// Roll and pitch sign of each motor in the X layout.
pub const ROLL_SIGNS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];
pub const PITCH_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Plant {
    #[default]
    Car,
    Quad,
}

impl FromStr for Plant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "car" => Ok(Plant::Car),
            "quad" => Ok(Plant::Quad),
            _ => Err(format!("unknown plant {s:?}, expected car or quad")),
        }
    }
}

impl fmt::Display for Plant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plant::Car => "car",
            Plant::Quad => "quad",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceConfig {
    pub channels: u8,
    pub resolution_bits: u8,
    pub sample_rate_hz: u16,
    pub plant: Plant,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            channels: 2,
            resolution_bits: 10,
            sample_rate_hz: 100,
            plant: Plant::Car,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeviceError {
    #[error("invalid device config: {0}")]
    InvalidConfig(String),
    #[error("unknown digital line {0}")]
    UnknownLine(u8),
    #[error("PWM strength {0} exceeds {PWM_MAX}")]
    BadValue(u16),
    #[error("not a device command")]
    NotACommand,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("device link: {0}")]
    Link(String),
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: String| Err(DeviceError::InvalidConfig(m));
        if self.channels == 0 {
            return bad("at least one ADC channel is required".into());
        }
        if !(8..=16).contains(&self.resolution_bits) {
            return bad(format!("resolution_bits {} not in 8..=16", self.resolution_bits));
        }
        if !(1..=1000).contains(&self.sample_rate_hz) {
            return bad(format!("sample_rate_hz {} not in 1..=1000", self.sample_rate_hz));
        }
        Ok(())
    }

    pub fn max_reading(&self) -> u16 {
        ((1u32 << self.resolution_bits) - 1) as u16
    }

    /// Time of the k-th ADC sample, k ≥ 1.
    pub fn sample_time_ns(&self, k: u64) -> u64 {
        (k as u128 * 1_000_000_000 / self.sample_rate_hz as u128) as u64
    }

    /// Synthetic analog source: a sine per channel, quantized.
    pub fn adc_source(&self, channel: u8, t_ns: u64) -> u16 {
        let max = self.max_reading() as f64;
        let freq = 1.0 + 0.5 * channel as f64;
        let t = t_ns as f64 * 1e-9;
        let v = 0.5 * max + 0.4 * max * (2.0 * PI * freq * t).sin();
        v.round().clamp(0.0, max) as u16
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdcSlot {
    pub reading: u16,
    pub fresh: bool,
    /// Samples produced since start.
    pub produced: u64,
}

/// Everything the simulated board knows. Time is clock time since start.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub config: DeviceConfig,
    pub t: Duration,
    pub enable: bool,
    pub forward: bool,
    pub pwm: [u16; 4],
    pub adc: Vec<AdcSlot>,
    pub car_pos_m: f64,
    /// Roll, pitch in radians.
    pub attitude: [f64; 2],
    samples_taken: u64,
}

impl DeviceState {
    pub fn new(config: DeviceConfig) -> Result<Self, DeviceError> {
        config.validate()?;
        Ok(Self {
            config,
            t: Duration::ZERO,
            enable: false,
            forward: false,
            pwm: [0; 4],
            adc: vec![AdcSlot::default(); config.channels as usize],
            car_pos_m: 0.0,
            attitude: [0.0; 2],
            samples_taken: 0,
        })
    }

    pub fn car_velocity(&self) -> f64 {
        match (self.config.plant, self.enable, self.forward) {
            (Plant::Car, true, true) => V_MAX,
            (Plant::Car, true, false) => -V_MAX,
            _ => 0.0,
        }
    }

    /// Attitude the quad settles to under the current PWM.
    pub fn attitude_equilibrium(&self) -> [f64; 2] {
        let mix =
            |signs: &[f64; 4]| -signs.iter().zip(self.pwm).map(|(s, p)| s * p as f64).sum::<f64>() / 4000.0;
        [mix(&ROLL_SIGNS), mix(&PITCH_SIGNS)]
    }

    pub fn apply_command(&mut self, msg: &Message) -> Result<(), DeviceError> {
        match msg {
            Message::CmdDigital { line: 0, value } => self.enable = *value,
            Message::CmdDigital { line: 1, value } => self.forward = *value,
            Message::CmdDigital { line, .. } => return Err(DeviceError::UnknownLine(*line)),
            Message::CmdPwm { strengths } => {
                if let Some(&s) = strengths.iter().find(|&&s| s > PWM_MAX) {
                    return Err(DeviceError::BadValue(s));
                }
                self.pwm = *strengths;
            }
            _ => return Err(DeviceError::NotACommand),
        }
        Ok(())
    }

    /// Advances the plant and the ADC by `dt`.
    pub fn tick(&mut self, dt: Duration) {
        let dt_s = dt.as_secs_f64();
        match self.config.plant {
            Plant::Car => self.car_pos_m += self.car_velocity() * dt_s,
            Plant::Quad => {
                let eq = self.attitude_equilibrium();
                let keep = (-dt_s / QUAD_TAU.as_secs_f64()).exp();
                for (a, e) in self.attitude.iter_mut().zip(eq) {
                    *a = e + (*a - e) * keep;
                }
            }
        }
        self.t += dt;
        let now_ns = self.t.as_nanos() as u64;
        let mut last = None;
        while self.config.sample_time_ns(self.samples_taken + 1) <= now_ns {
            self.samples_taken += 1;
            last = Some(self.config.sample_time_ns(self.samples_taken));
        }
        if let Some(t_ns) = last {
            let cfg = self.config;
            let produced = self.samples_taken;
            for (ch, slot) in self.adc.iter_mut().enumerate() {
                *slot = AdcSlot {
                    reading: cfg.adc_source(ch as u8, t_ns),
                    fresh: true,
                    produced,
                };
            }
        }
    }

    pub fn advance_to(&mut self, t: Duration) {
        if t > self.t {
            self.tick(t - self.t);
        }
    }

    /// Fresh readings, clearing their flags.
    pub fn take_fresh(&mut self) -> Vec<AdcReading> {
        self.adc
            .iter_mut()
            .enumerate()
            .filter(|(_, s)| s.fresh)
            .map(|(ch, s)| {
                s.fresh = false;
                AdcReading {
                    channel: ch as u8,
                    reading: s.reading,
                }
            })
            .collect()
    }

    pub fn config_response(&self) -> Message {
        Message::ConfigResponse {
            channels: self.config.channels,
            resolution_bits: self.config.resolution_bits,
            sample_rate_hz: self.config.sample_rate_hz,
        }
    }

    pub fn snapshot(&self) -> Telemetry {
        Telemetry {
            t_ns: self.t.as_nanos() as i64,
            enable: self.enable,
            forward: self.forward,
            car_pos_m: self.car_pos_m,
            car_vel_mps: self.car_velocity(),
            pwm: self.pwm,
            attitude: self.attitude,
            adc: self
                .adc
                .iter()
                .enumerate()
                .map(|(ch, s)| AdcReading {
                    channel: ch as u8,
                    reading: s.reading,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car() -> DeviceState {
        DeviceState::new(DeviceConfig::default()).unwrap()
    }

    fn quad() -> DeviceState {
        DeviceState::new(DeviceConfig {
            plant: Plant::Quad,
            ..DeviceConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn config_bounds() {
        let ok = DeviceConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            DeviceConfig { channels: 0, ..ok },
            DeviceConfig {
                resolution_bits: 7,
                ..ok
            },
            DeviceConfig {
                resolution_bits: 17,
                ..ok
            },
            DeviceConfig {
                sample_rate_hz: 0,
                ..ok
            },
            DeviceConfig {
                sample_rate_hz: 1001,
                ..ok
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn commands_touch_only_their_target() {
        let mut s = car();
        let before = s.clone();
        s.apply_command(&Message::CmdDigital { line: 0, value: true })
            .unwrap();
        assert!(s.enable);
        assert_eq!(
            DeviceState {
                enable: false,
                ..s.clone()
            },
            before
        );
        s.apply_command(&Message::CmdPwm { strengths: [500; 4] }).unwrap();
        assert_eq!(s.pwm, [500; 4]);
        assert_eq!(
            s.apply_command(&Message::CmdDigital { line: 7, value: true }),
            Err(DeviceError::UnknownLine(7))
        );
        assert_eq!(
            s.apply_command(&Message::CmdPwm {
                strengths: [0, 0, 1001, 0]
            }),
            Err(DeviceError::BadValue(1001))
        );
    }

    #[test]
    fn car_moves_at_v_max() {
        let mut s = car();
        s.tick(Duration::from_secs(1));
        assert_eq!(s.car_pos_m, 0.0);
        s.enable = true;
        s.forward = true;
        s.tick(Duration::from_secs(1));
        assert!((s.car_pos_m - 1.0).abs() < 1e-12);
        s.forward = false;
        s.tick(Duration::from_millis(250));
        assert!((s.car_pos_m - 0.75).abs() < 1e-12);
    }

    #[test]
    fn adc_produces_rate_samples_per_second() {
        let mut s = car();
        for _ in 0..1000 {
            s.tick(Duration::from_millis(1));
        }
        assert!(s.adc.iter().all(|a| a.produced == 100 && a.fresh));
        let max = s.config.max_reading();
        let fresh = s.take_fresh();
        assert_eq!(fresh.len(), 2);
        assert!(fresh.iter().all(|r| r.reading <= max));
        assert!(s.take_fresh().is_empty());
    }

    #[test]
    fn adc_sample_times_are_exact() {
        let cfg = DeviceConfig {
            sample_rate_hz: 3,
            ..DeviceConfig::default()
        };
        assert_eq!(cfg.sample_time_ns(1), 333_333_333);
        assert_eq!(cfg.sample_time_ns(3), 1_000_000_000);
    }

    #[test]
    fn quad_settles_within_five_tau() {
        let mut s = quad();
        s.attitude = [0.3, -0.2];
        s.pwm = [600; 4];
        for _ in 0..100 {
            s.tick(Duration::from_millis(10));
        }
        assert!(
            s.attitude.iter().all(|a| a.abs() < 0.01 * 0.3),
            "{:?}",
            s.attitude
        );
    }

    #[test]
    fn differential_pwm_tilts_against_the_mixer() {
        let mut s = quad();
        s.pwm = [510, 490, 490, 510];
        let eq = s.attitude_equilibrium();
        assert!((eq[0] + 0.01).abs() < 1e-12);
        assert_eq!(eq[1], 0.0);
    }
}
