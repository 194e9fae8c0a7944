//! Long-running teleoperation nodes on the wall clock.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use roboplat_core::bridge::{run_bridge, BridgeConfig, DeviceSource};
use roboplat_core::clock::Clock;
use roboplat_core::device::{run_device, DeviceConfig, ServeOptions};
use roboplat_core::station::{parse_script, run_script, start_station, StationOptions};
use roboplat_core::transport::Endpoint;

use crate::DeviceArg;

async fn ctrl_c() {
    if tokio::signal::ctrl_c().await.is_err() {
        std::future::pending::<()>().await;
    }
}

pub async fn device(listen: Endpoint, config: DeviceConfig, telemetry: Duration) -> anyhow::Result<ExitCode> {
    let opts = ServeOptions {
        telemetry_period: (!telemetry.is_zero()).then_some(telemetry),
    };
    tokio::select! {
        r = run_device(&listen, config, opts, Clock::wall()) => r?,
        _ = ctrl_c() => {}
    }
    Ok(ExitCode::SUCCESS)
}

pub async fn bridge(
    server: Endpoint,
    device: DeviceArg,
    record: Option<PathBuf>,
    poll_period: Duration,
    sim: DeviceConfig,
) -> anyhow::Result<ExitCode> {
    let source = match device {
        DeviceArg::Spawn => DeviceSource::Spawn(sim),
        DeviceArg::Endpoint(ep) => DeviceSource::Connect(ep),
    };
    let cfg = BridgeConfig {
        poll_period,
        record_dir: record,
        plant: sim.plant,
        ..BridgeConfig::default()
    };
    match run_bridge(&server, source, cfg, Clock::wall(), ctrl_c()).await {
        Ok(s) => {
            println!(
                "stopped: {:?}; {} commands forwarded, {} ADC samples, failsafe {:?}",
                s.reason, s.forwarded, s.adc_samples, s.failsafe
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(e.exit_code() as u8))
        }
    }
}

pub async fn station(
    listen: Endpoint,
    ui: Option<Endpoint>,
    script: Option<PathBuf>,
    hold: Duration,
    wait: Duration,
) -> anyhow::Result<ExitCode> {
    let script = match script {
        Some(path) => {
            let text =
                std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Some(parse_script(&text)?)
        }
        None => None,
    };
    let clock = Clock::wall();
    let station = start_station(&listen, ui.as_ref(), clock, StationOptions::default()).await?;
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "control {}", station.control_endpoint())?;
        if let Some(ep) = station.ui_endpoint() {
            writeln!(out, "ui {ep}")?;
        }
        out.flush()?;
    }
    let Some(entries) = script else {
        ctrl_c().await;
        station.shutdown();
        return Ok(ExitCode::SUCCESS);
    };
    if clock.timeout(wait, station.wait_verified()).await.is_err() {
        station.shutdown();
        bail!("no verified bridge within {}", humantime::format_duration(wait));
    }
    tokio::select! {
        r = run_script(&station, &entries) => r?,
        _ = ctrl_c() => {
            station.shutdown();
            bail!("interrupted");
        }
    }
    clock.sleep(hold).await;
    println!("script done: {} commands sent", station.command_log().len());
    station.shutdown();
    Ok(ExitCode::SUCCESS)
}
