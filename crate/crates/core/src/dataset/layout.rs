//! On-disk session tree: one root folder per recording, one text file per
//! sensor stream.
//!
//! ```text
//! <root>/
//!   imu/accel.txt  imu/gyro.txt  imu/accel_raw.txt  imu/gyro_raw.txt
//!   mag/mag.txt    mag/mag_raw.txt
//!   gnss/gps.txt   gnss/gnss_nav.txt  gnss/gnss_meas.txt
//!   camera/<cam_id>/data.txt  camera/<cam_id>/images/
//!   usb/adc.txt
//!   calibration/<name>.txt
//! ```
//!
//! A `roboplat.manifest` file in the root (lines of `stream = relative/path`)
//! maps foreign layouts onto the canonical streams when reading.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::record::{parse_line, write_line, SensorKind, SensorRecord};
use super::DatasetError;

pub const MANIFEST_FILE: &str = "roboplat.manifest";
pub const CALIBRATION_DIR: &str = "calibration";

/// One data file of a session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Gyro,
    GyroRaw,
    Accel,
    AccelRaw,
    Mag,
    MagRaw,
    Gps,
    GnssNav,
    GnssMeas,
    Camera(String),
    Adc,
}

impl Stream {
    /// Every stream, with a single camera `0`.
    pub fn all() -> Vec<Stream> {
        vec![
            Stream::Gyro,
            Stream::GyroRaw,
            Stream::Accel,
            Stream::AccelRaw,
            Stream::Mag,
            Stream::MagRaw,
            Stream::Gps,
            Stream::GnssNav,
            Stream::GnssMeas,
            Stream::Camera("0".into()),
            Stream::Adc,
        ]
    }

    pub fn kind(&self) -> SensorKind {
        match self {
            Stream::Gyro | Stream::GyroRaw => SensorKind::Gyro,
            Stream::Accel | Stream::AccelRaw => SensorKind::Accel,
            Stream::Mag | Stream::MagRaw => SensorKind::Mag,
            Stream::Gps => SensorKind::Gps,
            Stream::GnssNav => SensorKind::GnssNav,
            Stream::GnssMeas => SensorKind::GnssMeas,
            Stream::Camera(_) => SensorKind::Camera,
            Stream::Adc => SensorKind::Adc,
        }
    }

    /// Raw IMU streams carry the bias columns on every row.
    pub fn is_raw(&self) -> bool {
        matches!(self, Stream::GyroRaw | Stream::AccelRaw | Stream::MagRaw)
    }

    pub fn header(&self) -> &'static str {
        self.kind().header(self.is_raw())
    }

    /// Path relative to the session root.
    pub fn relative_path(&self) -> PathBuf {
        match self {
            Stream::Gyro => "imu/gyro.txt".into(),
            Stream::GyroRaw => "imu/gyro_raw.txt".into(),
            Stream::Accel => "imu/accel.txt".into(),
            Stream::AccelRaw => "imu/accel_raw.txt".into(),
            Stream::Mag => "mag/mag.txt".into(),
            Stream::MagRaw => "mag/mag_raw.txt".into(),
            Stream::Gps => "gnss/gps.txt".into(),
            Stream::GnssNav => "gnss/gnss_nav.txt".into(),
            Stream::GnssMeas => "gnss/gnss_meas.txt".into(),
            Stream::Camera(id) => Path::new("camera").join(id).join("data.txt"),
            Stream::Adc => "usb/adc.txt".into(),
        }
    }

    /// Directory that image paths of a camera index are relative to.
    pub fn camera_dir(root: &Path, cam_id: &str) -> PathBuf {
        root.join("camera").join(cam_id)
    }

    fn from_relative(path: &Path) -> Option<Stream> {
        let parts: Vec<_> = path.iter().filter_map(|p| p.to_str()).collect();
        match parts.as_slice() {
            ["camera", id, "data.txt"] => Some(Stream::Camera((*id).to_string())),
            _ => Stream::all()
                .into_iter()
                .filter(|s| !matches!(s, Stream::Camera(_)))
                .find(|s| s.relative_path() == path),
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stream::Gyro => f.write_str("gyro"),
            Stream::GyroRaw => f.write_str("gyro_raw"),
            Stream::Accel => f.write_str("accel"),
            Stream::AccelRaw => f.write_str("accel_raw"),
            Stream::Mag => f.write_str("mag"),
            Stream::MagRaw => f.write_str("mag_raw"),
            Stream::Gps => f.write_str("gps"),
            Stream::GnssNav => f.write_str("gnss_nav"),
            Stream::GnssMeas => f.write_str("gnss_meas"),
            Stream::Camera(id) => write!(f, "camera/{id}"),
            Stream::Adc => f.write_str("adc"),
        }
    }
}

impl FromStr for Stream {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(id) = s.strip_prefix("camera/") {
            if id.is_empty() || id.contains(['/', '\\']) {
                return Err(DatasetError::UnknownKind(s.to_string()));
            }
            return Ok(Stream::Camera(id.to_string()));
        }
        Stream::all()
            .into_iter()
            .find(|st| !matches!(st, Stream::Camera(_)) && st.to_string() == s)
            .ok_or_else(|| DatasetError::UnknownKind(s.to_string()))
    }
}

/// Files of one recording session.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub streams: BTreeMap<Stream, PathBuf>,
}

impl DatasetLayout {
    pub fn path(&self, stream: &Stream) -> Option<&Path> {
        self.streams.get(stream).map(PathBuf::as_path)
    }

    pub fn calibration_path(&self, name: &str) -> PathBuf {
        self.root.join(CALIBRATION_DIR).join(format!("{name}.txt"))
    }

    pub fn cameras(&self) -> impl Iterator<Item = &str> {
        self.streams.keys().filter_map(|s| match s {
            Stream::Camera(id) => Some(id.as_str()),
            _ => None,
        })
    }
}

/// Single-owner writer for a session being recorded.
pub struct SessionWriter {
    layout: DatasetLayout,
    files: BTreeMap<Stream, BufWriter<File>>,
}

/// Creates the session tree for `selected` streams, each file starting with
/// its `#` header line.
pub fn open_session(root: &Path, selected: &[Stream]) -> Result<SessionWriter, DatasetError> {
    if selected.is_empty() {
        return Err(DatasetError::EmptySelection);
    }
    if root.exists() {
        let non_empty = fs::read_dir(root)
            .map_err(|e| DatasetError::io(root, e))?
            .next()
            .is_some();
        if non_empty {
            return Err(DatasetError::PathExists(root.to_path_buf()));
        }
    }
    let mut layout = DatasetLayout {
        root: root.to_path_buf(),
        streams: BTreeMap::new(),
    };
    let mut files = BTreeMap::new();
    let unique: BTreeSet<&Stream> = selected.iter().collect();
    for stream in unique {
        let path = root.join(stream.relative_path());
        let dir = path.parent().expect("stream paths have a parent");
        fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        if let Stream::Camera(id) = stream {
            let images = Stream::camera_dir(root, id).join("images");
            fs::create_dir_all(&images).map_err(|e| DatasetError::io(&images, e))?;
        }
        let file = File::create(&path).map_err(|e| DatasetError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", stream.header()).map_err(|e| DatasetError::io(&path, e))?;
        layout.streams.insert(stream.clone(), path);
        files.insert(stream.clone(), w);
    }
    let calib = root.join(CALIBRATION_DIR);
    fs::create_dir_all(&calib).map_err(|e| DatasetError::io(&calib, e))?;
    Ok(SessionWriter { layout, files })
}

impl SessionWriter {
    pub fn layout(&self) -> &DatasetLayout {
        &self.layout
    }

    pub fn append(&mut self, stream: &Stream, record: &SensorRecord) -> Result<(), DatasetError> {
        if record.kind() != stream.kind() {
            return Err(DatasetError::KindMismatch {
                stream: stream.to_string(),
                kind: record.kind(),
            });
        }
        let w = self
            .files
            .get_mut(stream)
            .ok_or_else(|| DatasetError::NotSelected(stream.to_string()))?;
        writeln!(w, "{}", write_line(record)).map_err(|e| DatasetError::io(&self.layout.streams[stream], e))
    }

    pub fn write_calibration(&self, name: &str, entries: &[(&str, String)]) -> Result<PathBuf, DatasetError> {
        write_calibration(&self.layout.root, name, entries)
    }

    pub fn flush(&mut self) -> Result<(), DatasetError> {
        for (stream, w) in &mut self.files {
            w.flush()
                .map_err(|e| DatasetError::io(&self.layout.streams[stream], e))?;
        }
        Ok(())
    }

    /// Flushes every file and returns the layout.
    pub fn finish(mut self) -> Result<DatasetLayout, DatasetError> {
        self.flush()?;
        Ok(self.layout)
    }
}

/// Writes `calibration/<name>.txt` as `key: value` lines.
pub fn write_calibration(
    root: &Path,
    name: &str,
    entries: &[(&str, String)],
) -> Result<PathBuf, DatasetError> {
    let dir = root.join(CALIBRATION_DIR);
    fs::create_dir_all(&dir).map_err(|e| DatasetError::io(&dir, e))?;
    let path = dir.join(format!("{name}.txt"));
    let mut text = format!("# {name} calibration\n");
    for (k, v) in entries {
        text.push_str(&format!("{k}: {v}\n"));
    }
    fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

pub fn read_calibration(path: &Path) -> Result<BTreeMap<String, String>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

/// A session opened for reading.
#[derive(Debug, Clone)]
pub struct Session {
    pub layout: DatasetLayout,
    /// Files under the root that map to no stream.
    pub unknown_files: Vec<PathBuf>,
}

/// A decoded row with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: usize,
    pub record: SensorRecord,
}

/// Discovers the streams present under `root`.
pub fn read_session(root: &Path) -> Result<Session, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "session root not found"),
        ));
    }
    let overrides = read_manifest(root)?;
    let mut layout = DatasetLayout {
        root: root.to_path_buf(),
        streams: BTreeMap::new(),
    };
    let mut unknown_files = Vec::new();
    let mut claimed: BTreeSet<PathBuf> = BTreeSet::new();
    for (stream, rel) in overrides {
        let path = root.join(&rel);
        if path.is_file() {
            claimed.insert(rel);
            layout.streams.insert(stream, path);
        }
    }
    for rel in walk_files(root)? {
        if claimed.contains(&rel) || rel == Path::new(MANIFEST_FILE) {
            continue;
        }
        let first = rel.iter().next().and_then(|p| p.to_str());
        if first == Some(CALIBRATION_DIR) || is_camera_image(&rel) {
            continue;
        }
        match Stream::from_relative(&rel) {
            Some(stream) if !layout.streams.contains_key(&stream) => {
                layout.streams.insert(stream, root.join(&rel));
            }
            _ => {
                tracing::warn!(file = %rel.display(), "unknown file in session");
                unknown_files.push(root.join(&rel));
            }
        }
    }
    Ok(Session {
        layout,
        unknown_files,
    })
}

fn is_camera_image(rel: &Path) -> bool {
    let parts: Vec<_> = rel.iter().filter_map(|p| p.to_str()).collect();
    parts.len() >= 3 && parts[0] == "camera" && parts[2] == "images"
}

fn read_manifest(root: &Path) -> Result<Vec<(Stream, PathBuf)>, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, rel) = line.split_once('=').ok_or_else(|| DatasetError::Malformed {
            file: path.clone(),
            line: i + 1,
            source: super::record::LineError::MalformedLine {
                expected: "stream = path",
                found: 1,
            },
        })?;
        out.push((name.trim().parse()?, PathBuf::from(rel.trim())));
    }
    Ok(out)
}

fn walk_files(root: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    let mut pending = vec![PathBuf::new()];
    while let Some(rel) = pending.pop() {
        let dir = root.join(&rel);
        let mut entries: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| DatasetError::io(&dir, e))?
            .filter_map(Result::ok)
            .collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let child = rel.join(entry.file_name());
            if entry.path().is_dir() {
                pending.push(child);
            } else {
                out.push(child);
            }
        }
    }
    out.sort();
    Ok(out)
}

impl Session {
    pub fn open(root: &Path) -> Result<Self, DatasetError> {
        read_session(root)
    }

    /// All rows of `stream` in file order. The first malformed line aborts
    /// with its file and line number.
    pub fn rows(&self, stream: &Stream) -> Result<Vec<Row>, DatasetError> {
        let mut out = Vec::new();
        for item in self.iter_rows(stream)? {
            out.push(item?);
        }
        Ok(out)
    }

    pub fn records(&self, stream: &Stream) -> Result<Vec<SensorRecord>, DatasetError> {
        Ok(self.rows(stream)?.into_iter().map(|r| r.record).collect())
    }

    /// Lazily decoded rows of `stream`.
    pub fn iter_rows(
        &self,
        stream: &Stream,
    ) -> Result<impl Iterator<Item = Result<Row, DatasetError>>, DatasetError> {
        let path = self
            .layout
            .path(stream)
            .ok_or_else(|| DatasetError::MissingStream(stream.to_string()))?
            .to_path_buf();
        let file = File::open(&path).map_err(|e| DatasetError::io(&path, e))?;
        let kind = stream.kind();
        Ok(BufReader::new(file)
            .lines()
            .enumerate()
            .filter_map(move |(i, line)| {
                let line = match line {
                    Ok(l) => l,
                    Err(e) => return Some(Err(DatasetError::io(&path, e))),
                };
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    return None;
                }
                Some(
                    parse_line(trimmed, kind)
                        .map(|record| Row { line: i + 1, record })
                        .map_err(|source| DatasetError::Malformed {
                            file: path.clone(),
                            line: i + 1,
                            source,
                        }),
                )
            }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AdcSample, ImuSample};

    fn gyro(t: i64) -> SensorRecord {
        SensorRecord::Gyro(ImuSample {
            timestamp_ns: t,
            axis_values: [0.1, -0.2, 0.3],
            bias: None,
            sensor_id: 0,
        })
    }

    #[test]
    fn selected_streams_only() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("s");
        let w = open_session(&root, &[Stream::Gyro, Stream::Adc]).unwrap();
        w.finish().unwrap();
        assert!(root.join("imu/gyro.txt").is_file());
        assert!(root.join("usb/adc.txt").is_file());
        assert!(!root.join("imu/accel.txt").exists());
        assert!(!root.join("gnss").exists());
        let text = fs::read_to_string(root.join("imu/gyro.txt")).unwrap();
        assert!(text.starts_with("# timestamp_ns"));
    }

    #[test]
    fn full_tree() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("s");
        open_session(&root, &Stream::all()).unwrap().finish().unwrap();
        for s in Stream::all() {
            assert!(root.join(s.relative_path()).is_file(), "{s}");
        }
        assert!(root.join("camera/0/images").is_dir());
        assert!(root.join("calibration").is_dir());
    }

    #[test]
    fn empty_selection_and_existing_root() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            open_session(&dir.path().join("x"), &[]),
            Err(DatasetError::EmptySelection)
        ));
        fs::write(dir.path().join("junk"), "x").unwrap();
        assert!(matches!(
            open_session(dir.path(), &[Stream::Gyro]),
            Err(DatasetError::PathExists(_))
        ));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("s");
        let mut w = open_session(&root, &[Stream::Gyro, Stream::Adc]).unwrap();
        let recs: Vec<_> = (0..5).map(|i| gyro(i * 10)).collect();
        for r in &recs {
            w.append(&Stream::Gyro, r).unwrap();
        }
        assert!(w.append(&Stream::Accel, &recs[0]).is_err());
        assert!(w.append(&Stream::Adc, &recs[0]).is_err());
        w.finish().unwrap();
        fs::write(root.join("notes.md"), "stray").unwrap();

        let session = read_session(&root).unwrap();
        assert_eq!(session.records(&Stream::Gyro).unwrap(), recs);
        assert!(session.records(&Stream::Adc).unwrap().is_empty());
        assert_eq!(session.unknown_files, vec![root.join("notes.md")]);
    }

    #[test]
    fn malformed_line_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("s");
        open_session(&root, &[Stream::Adc]).unwrap().finish().unwrap();
        fs::write(root.join("usb/adc.txt"), "# h\n1,2,0\n2,x\n").unwrap();
        let session = read_session(&root).unwrap();
        match session.rows(&Stream::Adc) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_override() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::write(root.join("adc_log.csv"), "# t,v\n5,100\n").unwrap();
        fs::write(root.join(MANIFEST_FILE), "adc = adc_log.csv\n").unwrap();
        let session = read_session(root).unwrap();
        assert!(session.unknown_files.is_empty());
        assert_eq!(
            session.records(&Stream::Adc).unwrap(),
            vec![SensorRecord::Adc(AdcSample {
                timestamp_ns: 5,
                reading: 100,
                channel_id: None
            })]
        );
    }

    #[test]
    fn calibration_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_calibration(dir.path(), "device", &[("channels", "2".into())]).unwrap();
        let kv = read_calibration(&p).unwrap();
        assert_eq!(kv.get("channels").map(String::as_str), Some("2"));
    }

    #[test]
    fn stream_names_parse() {
        for s in Stream::all() {
            assert_eq!(s.to_string().parse::<Stream>().unwrap(), s);
        }
    }
}
