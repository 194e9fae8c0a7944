//! Post-processing over recorded sessions: timing statistics, IMU
//! alignment, EuRoC export and validation.

mod align;
mod euroc;
mod stats;
mod validate;

pub use align::{align_imu, AlignError, AlignedImuRow, Alignment};
pub use euroc::{
    export_euroc, imu_csv, load_imu, ExportError, ExportOptions, ExportReport, CAM_HEADER, IMU_HEADER,
};
pub use stats::{compute_stats, timing_stats, StatsIssue, StatsReport, TimingStats};
pub use validate::{error_count, validate, Diagnostic, DiagnosticKind, Severity};
