use std::fmt;
use std::fs;
use std::path::PathBuf;

use crate::dataset::{parse_line, read_calibration, SensorRecord, Session, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    MissingHeader,
    Malformed(String),
    /// Row column count differs from the file's first row, or a raw stream
    /// row lacks its bias columns.
    Arity(String),
    NonMonotonic {
        previous: i64,
        current: i64,
    },
    MissingImage(String),
    AdcOutOfRange {
        reading: u32,
        resolution_bits: u32,
    },
    BearingOutOfRange(String),
    UnknownFile,
    BadCalibration(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub file: PathBuf,
    /// 1-based; `None` for whole-file findings.
    pub line: Option<usize>,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}", self.file.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        match &self.kind {
            DiagnosticKind::MissingHeader => write!(f, ": missing '#' header line"),
            DiagnosticKind::Malformed(m) => write!(f, ": {m}"),
            DiagnosticKind::Arity(m) => write!(f, ": {m}"),
            DiagnosticKind::NonMonotonic { previous, current } => {
                write!(f, ": timestamp {current} before previous {previous}")
            }
            DiagnosticKind::MissingImage(p) => write!(f, ": image {p} does not exist"),
            DiagnosticKind::AdcOutOfRange {
                reading,
                resolution_bits,
            } => write!(f, ": ADC reading {reading} exceeds {resolution_bits}-bit range"),
            DiagnosticKind::BearingOutOfRange(m) => write!(f, ": {m}"),
            DiagnosticKind::UnknownFile => write!(f, ": not a recognized session file"),
            DiagnosticKind::BadCalibration(m) => write!(f, ": {m}"),
        }
    }
}

pub fn error_count(diags: &[Diagnostic]) -> usize {
    diags.iter().filter(|d| d.severity == Severity::Error).count()
}

/// ADC resolution from `calibration/device.txt`, if recorded.
fn adc_resolution(session: &Session, diags: &mut Vec<Diagnostic>) -> Option<u32> {
    let path = session.layout.calibration_path("device");
    if !path.is_file() {
        return None;
    }
    let kv = match read_calibration(&path) {
        Ok(kv) => kv,
        Err(e) => {
            diags.push(Diagnostic {
                severity: Severity::Error,
                file: path,
                line: None,
                kind: DiagnosticKind::BadCalibration(e.to_string()),
            });
            return None;
        }
    };
    let bits = kv.get("resolution_bits")?;
    match bits.parse::<u32>() {
        Ok(b) if (1..=32).contains(&b) => Some(b),
        _ => {
            diags.push(Diagnostic {
                severity: Severity::Error,
                file: path,
                line: None,
                kind: DiagnosticKind::BadCalibration(format!("bad resolution_bits {bits:?}")),
            });
            None
        }
    }
}

/// Checks headers, arity, timestamp order, image references and ADC range
/// for every stream in the session.
pub fn validate(session: &Session) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for file in &session.unknown_files {
        diags.push(Diagnostic {
            severity: Severity::Warning,
            file: file.clone(),
            line: None,
            kind: DiagnosticKind::UnknownFile,
        });
    }
    let resolution = adc_resolution(session, &mut diags);

    for (stream, path) in &session.layout.streams {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    file: path.clone(),
                    line: None,
                    kind: DiagnosticKind::Malformed(e.to_string()),
                });
                continue;
            }
        };
        let mut push = |severity, line, kind| {
            diags.push(Diagnostic {
                severity,
                file: path.clone(),
                line,
                kind,
            })
        };
        if !text.starts_with('#') {
            push(Severity::Error, None, DiagnosticKind::MissingHeader);
        }
        let mut arity: Option<usize> = None;
        let mut previous: Option<i64> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = Some(i + 1);
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let columns = line.split(',').count();
            match arity {
                None => arity = Some(columns),
                Some(n) if n != columns => push(
                    Severity::Error,
                    line_no,
                    DiagnosticKind::Arity(format!("{columns} columns, file started with {n}")),
                ),
                _ => {}
            }
            let record = match parse_line(line, stream.kind()) {
                Ok(r) => r,
                Err(e) => {
                    push(Severity::Error, line_no, DiagnosticKind::Malformed(e.to_string()));
                    continue;
                }
            };
            if let Some(imu) = record.as_imu() {
                if stream.is_raw() != imu.bias.is_some() {
                    let msg = if stream.is_raw() {
                        "raw stream row without bias columns"
                    } else {
                        "calibrated stream row with bias columns"
                    };
                    push(Severity::Error, line_no, DiagnosticKind::Arity(msg.into()));
                }
            }
            let t = record.timestamp_ns();
            if let Some(prev) = previous {
                if t < prev {
                    push(
                        Severity::Error,
                        line_no,
                        DiagnosticKind::NonMonotonic {
                            previous: prev,
                            current: t,
                        },
                    );
                }
            }
            previous = Some(t);
            match (&record, stream) {
                (SensorRecord::Camera(c), Stream::Camera(id)) => {
                    let img = Stream::camera_dir(&session.layout.root, id).join(&c.image_path);
                    if !img.is_file() {
                        push(
                            Severity::Error,
                            line_no,
                            DiagnosticKind::MissingImage(c.image_path.clone()),
                        );
                    }
                }
                (SensorRecord::Adc(a), _) => {
                    if let Some(bits) = resolution {
                        if u64::from(a.reading) >= 1u64 << bits {
                            push(
                                Severity::Error,
                                line_no,
                                DiagnosticKind::AdcOutOfRange {
                                    reading: a.reading,
                                    resolution_bits: bits,
                                },
                            );
                        }
                    }
                }
                (SensorRecord::Gps(g), _) if !g.bearing_in_range() => push(
                    Severity::Warning,
                    line_no,
                    DiagnosticKind::BearingOutOfRange(format!("bearing {} outside [0, 360)", g.bearing_deg)),
                ),
                _ => {}
            }
        }
    }
    diags
}
