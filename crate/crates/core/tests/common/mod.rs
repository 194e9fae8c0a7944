#![allow(dead_code)]

use std::future::pending;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU32, Ordering};

use roboplat_core::bridge::{run_bridge_on, BridgeConfig, BridgeError, BridgeSummary};
use roboplat_core::clock::Clock;
use roboplat_core::device::{serve, Device, DeviceConfig, ServeOptions};
use roboplat_core::station::{start_station, Station, StationOptions};
use roboplat_core::transport::{connect, pipe_pair, shape, Endpoint, ShapingParams};
use tokio::task::JoinHandle;

pub mod messages;
pub mod records;

/// Pipe label no other test uses.
pub fn unique_label(prefix: &str) -> String {
    static N: AtomicU32 = AtomicU32::new(0);
    format!(
        "{prefix}-{}-{}",
        std::process::id(),
        N.fetch_add(1, Ordering::Relaxed)
    )
}

pub struct Rig {
    pub clock: Clock,
    pub station: Station,
    pub device: Device,
    pub bridge: JoinHandle<Result<BridgeSummary, BridgeError>>,
}

/// Station, bridge and simulated device on in-process pipes. `uplink`
/// shapes the bridge's station link.
pub async fn rig(device_cfg: DeviceConfig, bridge_cfg: BridgeConfig, uplink: ShapingParams) -> Rig {
    rig_with(device_cfg, bridge_cfg, uplink, ServeOptions::default()).await
}

pub async fn rig_with(
    device_cfg: DeviceConfig,
    bridge_cfg: BridgeConfig,
    uplink: ShapingParams,
    serve_opts: ServeOptions,
) -> Rig {
    let clock = Clock::virtual_time();
    let station = start_station(
        &Endpoint::pipe(unique_label("station")),
        Some(&Endpoint::pipe(unique_label("ui"))),
        clock,
        StationOptions::default(),
    )
    .await
    .unwrap();
    let device = Device::spawn(device_cfg, clock).unwrap();
    let (near, far) = pipe_pair();
    let d = device.clone();
    tokio::spawn(async move { serve(far, &d, serve_opts, clock).await });
    let up = shape(connect(station.control_endpoint()).await.unwrap(), uplink, clock);
    let bridge = tokio::spawn(run_bridge_on(up, near, bridge_cfg, clock, pending()));
    Rig {
        clock,
        station,
        device,
        bridge,
    }
}

pub fn temp_session() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session");
    (dir, path)
}
