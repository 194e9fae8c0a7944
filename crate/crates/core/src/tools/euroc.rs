//! Export of a recorded session into the EuRoC MAV directory layout
//! (`mav0/imu0/data.csv`, `mav0/cam0/data.csv` + `mav0/cam0/data/`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::align::{align_imu, AlignError, AlignedImuRow};
use crate::dataset::{DatasetError, ImuSample, SensorRecord, Session, Stream};

pub const IMU_HEADER: &str = "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],\
w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]";
pub const CAM_HEADER: &str = "#timestamp [ns],filename";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Camera to export; `None` picks the first camera present, if any.
    pub camera: Option<String>,
    /// IMU `sensor_id` fed into the export.
    pub imu_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportReport {
    pub imu_rows: usize,
    pub dropped_accel: usize,
    pub gyro_stream: String,
    pub accel_stream: String,
    /// `None` when the session has no camera (imu-only export).
    pub camera: Option<String>,
    pub camera_rows: usize,
    pub images_copied: usize,
    pub images_missing: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("session has no {0} stream for sensor id {1}")]
    MissingImu(&'static str, u32),
    #[error("camera {0} not present in session")]
    MissingCamera(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads IMU samples of one sensor id, preferring the calibrated stream and
/// falling back to the raw one with its bias subtracted. Sorted by time.
pub fn load_imu(
    session: &Session,
    calibrated: Stream,
    raw: Stream,
    sensor_id: u32,
) -> Result<Option<(Stream, Vec<ImuSample>)>, DatasetError> {
    for stream in [calibrated, raw] {
        if !session.layout.streams.contains_key(&stream) {
            continue;
        }
        let mut samples: Vec<ImuSample> = session
            .records(&stream)?
            .into_iter()
            .filter_map(|r| match r {
                SensorRecord::Gyro(s) | SensorRecord::Accel(s) | SensorRecord::Mag(s) => Some(s),
                _ => None,
            })
            .filter(|s| s.sensor_id == sensor_id)
            .map(|mut s| {
                if let Some(b) = s.bias.take() {
                    s.axis_values = std::array::from_fn(|i| s.axis_values[i] - b[i]);
                }
                s
            })
            .collect();
        if samples.is_empty() {
            continue;
        }
        if samples.windows(2).any(|w| w[0].timestamp_ns > w[1].timestamp_ns) {
            tracing::warn!(%stream, "timestamps out of order, sorting");
            samples.sort_by_key(|s| s.timestamp_ns);
        }
        return Ok(Some((stream, samples)));
    }
    Ok(None)
}

/// Aligned rows as EuRoC `imu0/data.csv` text, header included. Floats use
/// the shortest representation that reads back exactly.
pub fn imu_csv(rows: &[AlignedImuRow]) -> String {
    let mut csv = String::with_capacity(rows.len() * 96 + IMU_HEADER.len() + 1);
    csv.push_str(IMU_HEADER);
    csv.push('\n');
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.timestamp_ns, r.gyro[0], r.gyro[1], r.gyro[2], r.accel[0], r.accel[1], r.accel[2]
        );
    }
    csv
}

/// Writes the EuRoC tree under `out`. Output is a pure function of the
/// session contents, so re-exporting produces identical files.
pub fn export_euroc(
    session: &Session,
    out: &Path,
    options: &ExportOptions,
) -> Result<ExportReport, ExportError> {
    let (gyro_stream, gyro) = load_imu(session, Stream::Gyro, Stream::GyroRaw, options.imu_id)?
        .ok_or(ExportError::MissingImu("gyroscope", options.imu_id))?;
    let (accel_stream, accel) = load_imu(session, Stream::Accel, Stream::AccelRaw, options.imu_id)?
        .ok_or(ExportError::MissingImu("accelerometer", options.imu_id))?;
    let aligned = align_imu(&gyro, &accel)?;

    let imu_dir = out.join("mav0").join("imu0");
    fs::create_dir_all(&imu_dir).map_err(io_err(&imu_dir))?;
    let csv = imu_csv(&aligned.rows);
    let imu_csv = imu_dir.join("data.csv");
    fs::write(&imu_csv, csv).map_err(io_err(&imu_csv))?;

    let mut report = ExportReport {
        imu_rows: aligned.rows.len(),
        dropped_accel: aligned.dropped,
        gyro_stream: gyro_stream.to_string(),
        accel_stream: accel_stream.to_string(),
        camera: None,
        camera_rows: 0,
        images_copied: 0,
        images_missing: 0,
    };

    let camera = match &options.camera {
        Some(id) => {
            if !session.layout.streams.contains_key(&Stream::Camera(id.clone())) {
                return Err(ExportError::MissingCamera(id.clone()));
            }
            Some(id.clone())
        }
        None => session.layout.cameras().next().map(str::to_string),
    };
    let Some(cam_id) = camera else {
        return Ok(report);
    };
    let cam_dir = out.join("mav0").join("cam0");
    let data_dir = cam_dir.join("data");
    fs::create_dir_all(&data_dir).map_err(io_err(&data_dir))?;
    let src_dir = Stream::camera_dir(&session.layout.root, &cam_id);
    let mut csv = String::from(CAM_HEADER);
    csv.push('\n');
    let mut entries: Vec<_> = session
        .records(&Stream::Camera(cam_id.clone()))?
        .into_iter()
        .filter_map(|r| match r {
            SensorRecord::Camera(c) => Some(c),
            _ => None,
        })
        .collect();
    entries.sort_by_key(|c| c.timestamp_ns);
    for entry in &entries {
        let src = src_dir.join(&entry.image_path);
        let file_name = Path::new(&entry.image_path)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(csv, "{},{}", entry.timestamp_ns, file_name);
        if src.is_file() {
            let dst = data_dir.join(&file_name);
            fs::copy(&src, &dst).map_err(io_err(&dst))?;
            report.images_copied += 1;
        } else {
            report.images_missing += 1;
        }
    }
    let cam_csv = cam_dir.join("data.csv");
    fs::write(&cam_csv, csv).map_err(io_err(&cam_csv))?;
    report.camera = Some(cam_id);
    report.camera_rows = entries.len();
    Ok(report)
}

impl std::fmt::Display for ExportReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "imu0: {} rows from {} + {} ({} accel samples dropped)",
            self.imu_rows, self.gyro_stream, self.accel_stream, self.dropped_accel
        )?;
        match &self.camera {
            Some(id) => write!(
                f,
                "cam0: camera {id}, {} rows, {} images copied, {} missing",
                self.camera_rows, self.images_copied, self.images_missing
            ),
            None => write!(f, "cam0: no camera in session, imu-only export"),
        }
    }
}
