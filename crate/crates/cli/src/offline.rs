//! Subcommands over recorded sessions.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use roboplat_core::dataset::{read_session, Stream};
use roboplat_core::tools::{
    align_imu, compute_stats, error_count, export_euroc, imu_csv, load_imu, validate as check, ExportOptions,
};

pub fn stats(session: &Path, csv: Option<&Path>) -> anyhow::Result<ExitCode> {
    let report = compute_stats(&read_session(session)?)?;
    for issue in &report.issues {
        eprintln!("note: {issue}");
    }
    print!("{}", report.to_table());
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn align(session: &Path, output: &Path, imu_id: u32) -> anyhow::Result<ExitCode> {
    let session = read_session(session)?;
    let (_, gyro) = load_imu(&session, Stream::Gyro, Stream::GyroRaw, imu_id)?
        .ok_or_else(|| anyhow!("no gyroscope stream for sensor id {imu_id}"))?;
    let (_, accel) = load_imu(&session, Stream::Accel, Stream::AccelRaw, imu_id)?
        .ok_or_else(|| anyhow!("no accelerometer stream for sensor id {imu_id}"))?;
    let aligned = align_imu(&gyro, &accel)?;
    fs::write(output, imu_csv(&aligned.rows)).with_context(|| format!("writing {}", output.display()))?;
    println!(
        "{} rows, {} accel samples dropped",
        aligned.rows.len(),
        aligned.dropped
    );
    Ok(ExitCode::SUCCESS)
}

pub fn export(session: &Path, out: &Path, camera: Option<String>, imu_id: u32) -> anyhow::Result<ExitCode> {
    let session = read_session(session)?;
    let report = export_euroc(&session, out, &ExportOptions { camera, imu_id })?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

pub fn validate(session: &Path) -> anyhow::Result<ExitCode> {
    let diags = check(&read_session(session)?);
    for d in &diags {
        println!("{d}");
    }
    let errors = error_count(&diags);
    println!("{errors} errors, {} warnings", diags.len() - errors);
    Ok(if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
