//! Typed sensor rows and their one-line CSV encoding.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::DatasetError;

/// Row schema selector. Each variant owns one column layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    Gyro,
    Accel,
    Mag,
    Gps,
    GnssNav,
    GnssMeas,
    Camera,
    Adc,
}

impl SensorKind {
    pub const ALL: [SensorKind; 8] = [
        SensorKind::Gyro,
        SensorKind::Accel,
        SensorKind::Mag,
        SensorKind::Gps,
        SensorKind::GnssNav,
        SensorKind::GnssMeas,
        SensorKind::Camera,
        SensorKind::Adc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Gyro => "gyro",
            SensorKind::Accel => "accel",
            SensorKind::Mag => "mag",
            SensorKind::Gps => "gps",
            SensorKind::GnssNav => "gnss_nav",
            SensorKind::GnssMeas => "gnss_meas",
            SensorKind::Camera => "camera",
            SensorKind::Adc => "adc",
        }
    }

    /// Column header for calibrated (`raw == false`) or raw rows.
    pub fn header(self, raw: bool) -> &'static str {
        match (self, raw) {
            (SensorKind::Gyro, false) => "# timestamp_ns,rx_rad_s,ry_rad_s,rz_rad_s,sensor_id",
            (SensorKind::Gyro, true) => {
                "# timestamp_ns,rx_rad_s,ry_rad_s,rz_rad_s,b_rx_rad_s,b_ry_rad_s,b_rz_rad_s,sensor_id"
            }
            (SensorKind::Accel, false) => "# timestamp_ns,ax_m_s2,ay_m_s2,az_m_s2,sensor_id",
            (SensorKind::Accel, true) => {
                "# timestamp_ns,ax_m_s2,ay_m_s2,az_m_s2,b_ax_m_s2,b_ay_m_s2,b_az_m_s2,sensor_id"
            }
            (SensorKind::Mag, false) => "# timestamp_ns,mx_uT,my_uT,mz_uT,sensor_id",
            (SensorKind::Mag, true) => "# timestamp_ns,mx_uT,my_uT,mz_uT,b_mx_uT,b_my_uT,b_mz_uT,sensor_id",
            (SensorKind::Gps, _) => {
                "# timestamp_ns,latitude_deg,longitude_deg,altitude_m,velocity_mps,bearing"
            }
            (SensorKind::GnssNav, _) => "# timestamp_ns,sv_id,nav_type,msg_id,sub_msg_id,data_bytes_hex",
            (SensorKind::GnssMeas, _) => {
                "# timestamp_ns,time_offset_ns,rx_sv_time_ns,acc_delta_range_m,ps_range_rate_mps,\
cn0_dbhz,snr_db,cr_freq_hz,cr_cycles,cr_phase,sv_id,const_type,[bias_inter_signal_ns,type_code]"
            }
            (SensorKind::Camera, _) => "# timestamp_ns,image_path",
            (SensorKind::Adc, _) => "# timestamp_ns,adc_reading,[adc_channel_id]",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DatasetError::UnknownKind(s.to_string()))
    }
}

/// Gyroscope, accelerometer or magnetometer row.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSample {
    pub timestamp_ns: i64,
    pub axis_values: [f64; 3],
    /// Present only for raw (uncalibrated) rows.
    pub bias: Option<[f64; 3]>,
    pub sensor_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFix {
    pub timestamp_ns: i64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
    pub velocity_mps: f64,
    pub bearing_deg: f64,
}

impl GpsFix {
    /// Bearing is expected in `[0, 360)`; readers accept other values and
    /// leave flagging to validation.
    pub fn bearing_in_range(&self) -> bool {
        (0.0..360.0).contains(&self.bearing_deg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnssNavMessage {
    pub timestamp_ns: i64,
    pub sv_id: i32,
    pub nav_type: i32,
    pub msg_id: i32,
    pub sub_msg_id: i32,
    pub data: Vec<u8>,
}

/// Raw GNSS measurement. Values are carried as recorded, without
/// interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct GnssMeasurement {
    pub timestamp_ns: i64,
    pub time_offset_ns: f64,
    pub rx_sv_time_ns: i64,
    pub acc_delta_range_m: f64,
    pub ps_range_rate_mps: f64,
    pub cn0_dbhz: f64,
    pub snr_db: f64,
    pub cr_freq_hz: f64,
    pub cr_cycles: i64,
    pub cr_phase: f64,
    pub sv_id: i32,
    pub const_type: i32,
    /// `(bias_inter_signal_ns, type_code)`, both or neither.
    pub inter_signal: Option<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CameraIndexEntry {
    pub timestamp_ns: i64,
    pub image_path: String,
}

pub const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcSample {
    pub timestamp_ns: i64,
    pub reading: u32,
    pub channel_id: Option<u8>,
}

/// One row of any sensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorRecord {
    Gyro(ImuSample),
    Accel(ImuSample),
    Mag(ImuSample),
    Gps(GpsFix),
    GnssNav(GnssNavMessage),
    GnssMeas(GnssMeasurement),
    Camera(CameraIndexEntry),
    Adc(AdcSample),
}

impl SensorRecord {
    pub fn kind(&self) -> SensorKind {
        match self {
            SensorRecord::Gyro(_) => SensorKind::Gyro,
            SensorRecord::Accel(_) => SensorKind::Accel,
            SensorRecord::Mag(_) => SensorKind::Mag,
            SensorRecord::Gps(_) => SensorKind::Gps,
            SensorRecord::GnssNav(_) => SensorKind::GnssNav,
            SensorRecord::GnssMeas(_) => SensorKind::GnssMeas,
            SensorRecord::Camera(_) => SensorKind::Camera,
            SensorRecord::Adc(_) => SensorKind::Adc,
        }
    }

    pub fn timestamp_ns(&self) -> i64 {
        match self {
            SensorRecord::Gyro(s) | SensorRecord::Accel(s) | SensorRecord::Mag(s) => s.timestamp_ns,
            SensorRecord::Gps(r) => r.timestamp_ns,
            SensorRecord::GnssNav(r) => r.timestamp_ns,
            SensorRecord::GnssMeas(r) => r.timestamp_ns,
            SensorRecord::Camera(r) => r.timestamp_ns,
            SensorRecord::Adc(r) => r.timestamp_ns,
        }
    }

    /// Stream discriminator within a file: IMU sensor id or ADC channel.
    pub fn source_id(&self) -> Option<u32> {
        match self {
            SensorRecord::Gyro(s) | SensorRecord::Accel(s) | SensorRecord::Mag(s) => Some(s.sensor_id),
            SensorRecord::Adc(r) => r.channel_id.map(u32::from),
            _ => None,
        }
    }

    pub fn as_imu(&self) -> Option<&ImuSample> {
        match self {
            SensorRecord::Gyro(s) | SensorRecord::Accel(s) | SensorRecord::Mag(s) => Some(s),
            _ => None,
        }
    }
}

/// Reasons a single row fails to decode.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineError {
    #[error("expected {expected} columns, found {found}")]
    MalformedLine { expected: &'static str, found: usize },
    #[error("column {column} is not a valid {what}: {value:?}")]
    NonNumericField {
        column: usize,
        what: &'static str,
        value: String,
    },
    #[error("column {column} out of range: {reason}")]
    RangeViolation { column: usize, reason: String },
}

fn split_columns(line: &str) -> Vec<&str> {
    line.trim_end_matches(['\r', '\n'])
        .split(',')
        .map(str::trim)
        .collect()
}

struct Columns<'a> {
    cols: Vec<&'a str>,
}

impl<'a> Columns<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.cols[i]
    }

    fn timestamp(&self, i: usize) -> Result<i64, LineError> {
        let t: i64 = self.int(i)?;
        if t < 0 {
            return Err(LineError::RangeViolation {
                column: i,
                reason: format!("negative timestamp {t}"),
            });
        }
        Ok(t)
    }

    fn int<T: FromStr>(&self, i: usize) -> Result<T, LineError> {
        self.cols[i].parse().map_err(|_| LineError::NonNumericField {
            column: i,
            what: "integer",
            value: self.cols[i].to_string(),
        })
    }

    fn real(&self, i: usize) -> Result<f64, LineError> {
        let v: f64 = self.cols[i].parse().map_err(|_| LineError::NonNumericField {
            column: i,
            what: "number",
            value: self.cols[i].to_string(),
        })?;
        if !v.is_finite() {
            return Err(LineError::RangeViolation {
                column: i,
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }

    fn vec3(&self, start: usize) -> Result<[f64; 3], LineError> {
        Ok([self.real(start)?, self.real(start + 1)?, self.real(start + 2)?])
    }

    fn bounded(&self, i: usize, lo: f64, hi: f64) -> Result<f64, LineError> {
        let v = self.real(i)?;
        if v < lo || v > hi {
            return Err(LineError::RangeViolation {
                column: i,
                reason: format!("{v} not in [{lo}, {hi}]"),
            });
        }
        Ok(v)
    }
}

/// Decodes one non-header row against the schema selected by `kind`.
pub fn parse_line(line: &str, kind: SensorKind) -> Result<SensorRecord, LineError> {
    let c = Columns {
        cols: split_columns(line),
    };
    let n = c.cols.len();
    let arity = |expected: &'static str| LineError::MalformedLine { expected, found: n };

    match kind {
        SensorKind::Gyro | SensorKind::Accel | SensorKind::Mag => {
            let (bias, id_col) = match n {
                5 => (None, 4),
                8 => (Some(c.vec3(4)?), 7),
                _ => return Err(arity("5 or 8")),
            };
            let sample = ImuSample {
                timestamp_ns: c.timestamp(0)?,
                axis_values: c.vec3(1)?,
                bias,
                sensor_id: c.int(id_col)?,
            };
            Ok(match kind {
                SensorKind::Gyro => SensorRecord::Gyro(sample),
                SensorKind::Accel => SensorRecord::Accel(sample),
                _ => SensorRecord::Mag(sample),
            })
        }
        SensorKind::Gps => {
            if n != 6 {
                return Err(arity("6"));
            }
            let velocity = c.real(4)?;
            if velocity < 0.0 {
                return Err(LineError::RangeViolation {
                    column: 4,
                    reason: format!("negative velocity {velocity}"),
                });
            }
            Ok(SensorRecord::Gps(GpsFix {
                timestamp_ns: c.timestamp(0)?,
                latitude_deg: c.bounded(1, -90.0, 90.0)?,
                longitude_deg: c.bounded(2, -180.0, 180.0)?,
                altitude_m: c.real(3)?,
                velocity_mps: velocity,
                bearing_deg: c.real(5)?,
            }))
        }
        SensorKind::GnssNav => {
            if n != 6 {
                return Err(arity("6"));
            }
            let hex_text = c.text(5);
            let data = hex::decode(hex_text).map_err(|_| LineError::NonNumericField {
                column: 5,
                what: "even-length hex string",
                value: hex_text.to_string(),
            })?;
            Ok(SensorRecord::GnssNav(GnssNavMessage {
                timestamp_ns: c.timestamp(0)?,
                sv_id: c.int(1)?,
                nav_type: c.int(2)?,
                msg_id: c.int(3)?,
                sub_msg_id: c.int(4)?,
                data,
            }))
        }
        SensorKind::GnssMeas => {
            let inter_signal = match n {
                12 => None,
                14 => {
                    let code = c.text(13);
                    if code.is_empty() {
                        return Err(LineError::RangeViolation {
                            column: 13,
                            reason: "empty type code".into(),
                        });
                    }
                    Some((c.real(12)?, code.to_string()))
                }
                _ => return Err(arity("12 or 14")),
            };
            Ok(SensorRecord::GnssMeas(GnssMeasurement {
                timestamp_ns: c.timestamp(0)?,
                time_offset_ns: c.real(1)?,
                rx_sv_time_ns: c.int(2)?,
                acc_delta_range_m: c.real(3)?,
                ps_range_rate_mps: c.real(4)?,
                cn0_dbhz: c.real(5)?,
                snr_db: c.real(6)?,
                cr_freq_hz: c.real(7)?,
                cr_cycles: c.int(8)?,
                cr_phase: c.real(9)?,
                sv_id: c.int(10)?,
                const_type: c.int(11)?,
                inter_signal,
            }))
        }
        SensorKind::Camera => {
            if n != 2 {
                return Err(arity("2"));
            }
            let path = c.text(1);
            check_image_path(path).map_err(|reason| LineError::RangeViolation { column: 1, reason })?;
            Ok(SensorRecord::Camera(CameraIndexEntry {
                timestamp_ns: c.timestamp(0)?,
                image_path: path.to_string(),
            }))
        }
        SensorKind::Adc => {
            let channel_id = match n {
                2 => None,
                3 => Some(c.int(2)?),
                _ => return Err(arity("2 or 3")),
            };
            Ok(SensorRecord::Adc(AdcSample {
                timestamp_ns: c.timestamp(0)?,
                reading: c.int(1)?,
                channel_id,
            }))
        }
    }
}

/// Camera index paths are relative, free of `..`, and name an image file.
pub fn check_image_path(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("empty image path".into());
    }
    if path.starts_with('/') || path.starts_with('\\') || path.contains(':') {
        return Err(format!("image path {path:?} is not relative"));
    }
    if path
        .split(['/', '\\'])
        .any(|part| part == ".." || part.is_empty())
    {
        return Err(format!("image path {path:?} has an empty or parent component"));
    }
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext {
        Some(e) if IMAGE_EXTENSIONS.contains(&e.as_str()) => Ok(()),
        _ => Err(format!("image path {path:?} has no recognized image extension")),
    }
}

// Debug formatting of f64 is the shortest text that parses back to the same
// value and always carries a decimal point or exponent.
fn push_real(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:?}");
}

fn push_int(out: &mut String, v: impl fmt::Display) {
    let _ = write!(out, ",{v}");
}

/// Encodes a record as one CSV row without the trailing newline.
pub fn write_line(record: &SensorRecord) -> String {
    let mut out = record.timestamp_ns().to_string();
    match record {
        SensorRecord::Gyro(s) | SensorRecord::Accel(s) | SensorRecord::Mag(s) => {
            s.axis_values.iter().for_each(|&v| push_real(&mut out, v));
            if let Some(bias) = s.bias {
                bias.iter().for_each(|&v| push_real(&mut out, v));
            }
            push_int(&mut out, s.sensor_id);
        }
        SensorRecord::Gps(g) => {
            for v in [
                g.latitude_deg,
                g.longitude_deg,
                g.altitude_m,
                g.velocity_mps,
                g.bearing_deg,
            ] {
                push_real(&mut out, v);
            }
        }
        SensorRecord::GnssNav(m) => {
            for v in [m.sv_id, m.nav_type, m.msg_id, m.sub_msg_id] {
                push_int(&mut out, v);
            }
            out.push(',');
            out.push_str(&hex::encode(&m.data));
        }
        SensorRecord::GnssMeas(m) => {
            push_real(&mut out, m.time_offset_ns);
            push_int(&mut out, m.rx_sv_time_ns);
            for v in [
                m.acc_delta_range_m,
                m.ps_range_rate_mps,
                m.cn0_dbhz,
                m.snr_db,
                m.cr_freq_hz,
            ] {
                push_real(&mut out, v);
            }
            push_int(&mut out, m.cr_cycles);
            push_real(&mut out, m.cr_phase);
            push_int(&mut out, m.sv_id);
            push_int(&mut out, m.const_type);
            if let Some((bias, code)) = &m.inter_signal {
                push_real(&mut out, *bias);
                out.push(',');
                out.push_str(code);
            }
        }
        SensorRecord::Camera(c) => {
            out.push(',');
            out.push_str(&c.image_path);
        }
        SensorRecord::Adc(a) => {
            push_int(&mut out, a.reading);
            if let Some(ch) = a.channel_id {
                push_int(&mut out, ch);
            }
        }
    }
    out
}
