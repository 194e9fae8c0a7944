//! Sensor record formats and the recording-session folder layout.

mod layout;
mod record;

use std::path::{Path, PathBuf};

pub use layout::{
    open_session, read_calibration, read_session, write_calibration, DatasetLayout, Row, Session,
    SessionWriter, Stream, CALIBRATION_DIR, MANIFEST_FILE,
};
pub use record::{
    check_image_path, parse_line, write_line, AdcSample, CameraIndexEntry, GnssMeasurement, GnssNavMessage,
    GpsFix, ImuSample, LineError, SensorKind, SensorRecord, IMAGE_EXTENSIONS,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{file}:{line}: {source}")]
    Malformed {
        file: PathBuf,
        line: usize,
        #[source]
        source: LineError,
    },
    #[error("session root {0} already exists and is not empty")]
    PathExists(PathBuf),
    #[error("no sensor streams selected")]
    EmptySelection,
    #[error("unknown sensor stream {0:?}")]
    UnknownKind(String),
    #[error("stream {0} is not part of this session")]
    NotSelected(String),
    #[error("stream {0} not present in session")]
    MissingStream(String),
    #[error("a {kind} record cannot be written to stream {stream}")]
    KindMismatch { stream: String, kind: SensorKind },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
