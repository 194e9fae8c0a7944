//! The phone node between the control station and the device board.
//!
//! Upstream it is a client of the station; downstream it drives the board.
//! After both handshakes, independent activities exchange messages only
//! through the bus:
//!
//! | topic       | publisher          | subscribers                  |
//! |-------------|--------------------|------------------------------|
//! | `cmd`       | upstream reader    | downstream writer, mixer     |
//! | `device`    | poller, mixer      | downstream writer            |
//! | `uplink`    | upstream reader    | upstream writer              |
//! | `adc`       | downstream reader  | recorder                     |
//! | `telemetry` | downstream reader  | upstream writer, mixer       |
//! | `config`    | downstream reader  | (none by default)            |

pub mod bus;
pub mod control;

use std::future::Future;
use std::path::PathBuf;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tokio::sync::oneshot;
use tokio::task::AbortHandle;

use crate::clock::Clock;
use crate::commbench::peer::{bench_reply, ThroughputSink};
use crate::dataset::{open_session, AdcSample, DatasetError, SensorRecord, SessionWriter, Stream};
use crate::device::{serve, Device, DeviceConfig, Plant, ServeOptions};
use crate::protocol::{
    handshake_answer, new_challenge, verify_handshake, FramedLink, LinkError, LinkReader, LinkWriter,
    Message, Telemetry,
};
use crate::transport::{connect, pipe_pair, Channel, Endpoint, TransportError};

pub use bus::{Bus, BusMessage, BusPayload, Subscription, DEFAULT_QUEUE_BOUND};
pub use control::{accel_attitude, complementary_filter, mix_pwm, MixerState, DEFAULT_ALPHA};

pub const DEFAULT_POLL_PERIOD: Duration = Duration::from_millis(10);
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
/// Calibration file holding the device configuration of a recording.
pub const DEVICE_CALIBRATION: &str = "device";

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upstream,
    Downstream,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Upstream => "upstream",
            Side::Downstream => "downstream",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot reach {0}: {1}")]
    Connect(Side, TransportError),
    #[error("{0} handshake failed: {1}")]
    HandshakeFailed(Side, String),
    #[error("{0} link: {1}")]
    Link(Side, LinkError),
    #[error("recording: {0}")]
    Record(#[from] DatasetError),
    #[error("device: {0}")]
    Device(String),
}

impl BridgeError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            BridgeError::HandshakeFailed(Side::Upstream, _) => 3,
            BridgeError::HandshakeFailed(Side::Downstream, _) => 4,
            BridgeError::Connect(..) => 5,
            BridgeError::Link(..) => 6,
            BridgeError::Record(_) => 7,
            BridgeError::Device(_) => 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub poll_period: Duration,
    pub record_dir: Option<PathBuf>,
    /// Selects the failsafe command and enables the mixer for quads.
    pub plant: Plant,
    pub mixer: MixerState,
    /// Accelerometer noise of the synthetic IMU feeding the filter, m/s².
    pub imu_noise_std: f64,
    pub seed: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            poll_period: DEFAULT_POLL_PERIOD,
            record_dir: None,
            plant: Plant::Car,
            mixer: MixerState::default(),
            imu_noise_std: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    UpstreamLost,
    DownstreamLost,
    Shutdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSummary {
    pub reason: StopReason,
    /// Station commands written to the device.
    pub forwarded: u64,
    pub adc_samples: u64,
    /// Last command sent downstream before closing, if the link was alive.
    pub failsafe: Option<Message>,
    pub device_config: Message,
}

/// Where the bridge finds its device.
#[derive(Debug, Clone)]
pub enum DeviceSource {
    Connect(Endpoint),
    /// Runs a simulated device in-process.
    Spawn(DeviceConfig),
}

fn failsafe_command(plant: Plant) -> Message {
    match plant {
        Plant::Car => Message::CmdDigital {
            line: 0,
            value: false,
        },
        Plant::Quad => Message::CmdPwm { strengths: [0; 4] },
    }
}

/// Receives until `pick` accepts a message, skipping telemetry.
async fn expect<T>(
    link: &mut FramedLink,
    clock: Clock,
    side: Side,
    what: &str,
    mut pick: impl FnMut(Message) -> Result<Option<T>, String>,
) -> Result<T, BridgeError> {
    let failed = |why: String| BridgeError::HandshakeFailed(side, why);
    let deadline = clock.now() + HANDSHAKE_TIMEOUT;
    loop {
        let left = deadline.saturating_sub(clock.now());
        let msg = match clock.timeout(left, link.recv()).await {
            Err(_) => return Err(failed(format!("timed out waiting for {what}"))),
            Ok(Err(LinkError::Closed)) => return Err(failed(format!("link closed before {what}"))),
            Ok(Err(e)) => return Err(BridgeError::Link(side, e)),
            Ok(Ok(m)) => m,
        };
        if matches!(msg, Message::Telemetry(_)) {
            continue;
        }
        if let Some(v) = pick(msg).map_err(failed)? {
            return Ok(v);
        }
    }
}

async fn send(link: &mut FramedLink, side: Side, msg: &Message) -> Result<(), BridgeError> {
    link.send(msg).await.map_err(|e| BridgeError::Link(side, e))
}

/// Challenges the device and fetches its configuration.
async fn downstream_handshake(link: &mut FramedLink, clock: Clock) -> Result<Message, BridgeError> {
    let side = Side::Downstream;
    let challenge = new_challenge();
    send(
        link,
        side,
        &Message::TestRequest {
            challenge: challenge.clone(),
        },
    )
    .await?;
    expect(link, clock, side, "TestResponse", |m| match m {
        Message::TestResponse { answer } if verify_handshake(&challenge, &answer) => Ok(Some(())),
        Message::TestResponse { .. } => Err("device answered the challenge wrongly".into()),
        other => Err(format!("unexpected message type 0x{:02x}", other.msg_type())),
    })
    .await?;
    send(link, side, &Message::ConfigRequest).await?;
    expect(link, clock, side, "ConfigResponse", |m| match m {
        m @ Message::ConfigResponse { .. } => Ok(Some(m)),
        _ => Ok(None),
    })
    .await
}

/// Answers the station's challenge, then waits for its ConfigRequest, which
/// the station only sends once it has accepted the answer.
async fn upstream_handshake(
    link: &mut FramedLink,
    clock: Clock,
    device_config: &Message,
) -> Result<(), BridgeError> {
    let side = Side::Upstream;
    let challenge = expect(link, clock, side, "TestRequest", |m| match m {
        Message::TestRequest { challenge } => Ok(Some(challenge)),
        other => Err(format!("unexpected message type 0x{:02x}", other.msg_type())),
    })
    .await?;
    let answer =
        handshake_answer(&challenge).map_err(|e| BridgeError::HandshakeFailed(side, e.to_string()))?;
    send(link, side, &Message::TestResponse { answer }).await?;
    expect(link, clock, side, "acceptance", |m| match m {
        Message::ConfigRequest => Ok(Some(())),
        _ => Ok(None),
    })
    .await?;
    send(link, side, device_config).await
}

fn open_recording(cfg: &BridgeConfig, device_config: &Message) -> Result<Option<SessionWriter>, BridgeError> {
    let Some(dir) = &cfg.record_dir else {
        return Ok(None);
    };
    let writer = open_session(dir, &[Stream::Adc])?;
    if let Message::ConfigResponse {
        channels,
        resolution_bits,
        sample_rate_hz,
    } = device_config
    {
        writer.write_calibration(
            DEVICE_CALIBRATION,
            &[
                ("channels", channels.to_string()),
                ("resolution_bits", resolution_bits.to_string()),
                ("sample_rate_hz", sample_rate_hz.to_string()),
            ],
        )?;
    }
    Ok(Some(writer))
}

/// Runs the bridge over already-connected links until a link drops or
/// `shutdown` resolves.
pub async fn run_bridge_on(
    upstream: Channel,
    downstream: Channel,
    cfg: BridgeConfig,
    clock: Clock,
    shutdown: impl Future<Output = ()>,
) -> Result<BridgeSummary, BridgeError> {
    let mut down = FramedLink::new(downstream);
    let device_config = downstream_handshake(&mut down, clock).await?;
    let recording = open_recording(&cfg, &device_config)?;
    let mut up = FramedLink::new(upstream);
    upstream_handshake(&mut up, clock, &device_config).await?;
    tracing::info!("bridge connected: both handshakes verified");

    let bus = Bus::new(clock);
    let down_sub = bus.subscribe_topics(&["cmd", "device"]);
    let up_sub = bus.subscribe_topics(&["uplink", "telemetry"]);
    let adc_sub = bus.subscribe("adc");
    let mixer_sub = (cfg.plant == Plant::Quad).then(|| bus.subscribe_topics(&["cmd", "telemetry"]));

    let (up_r, up_w) = up.split();
    let (down_r, down_w) = down.split();
    let (stop_tx, stop_rx) = oneshot::channel();

    let mut upstream_reader = tokio::spawn(upstream_reader(up_r, bus.clone(), device_config.clone()));
    let upstream_writer = tokio::spawn(upstream_writer(up_w, up_sub));
    let mut downstream_reader = tokio::spawn(downstream_reader(down_r, bus.clone(), clock));
    let downstream_writer = tokio::spawn(downstream_writer(down_w, down_sub, cfg.plant, stop_rx));
    let recorder = tokio::spawn(recorder(adc_sub, recording));
    let poller = tokio::spawn(poller(bus.clone(), cfg.poll_period, clock));
    let mixer = mixer_sub.map(|sub| tokio::spawn(mixer(sub, bus.clone(), cfg.clone())));
    // Activities must not outlive the bridge if it is cancelled.
    let _guard = AbortOnDrop(
        [
            upstream_reader.abort_handle(),
            upstream_writer.abort_handle(),
            downstream_reader.abort_handle(),
            downstream_writer.abort_handle(),
            recorder.abort_handle(),
            poller.abort_handle(),
        ]
        .into_iter()
        .chain(mixer.as_ref().map(|m| m.abort_handle()))
        .collect(),
    );

    let reason = tokio::select! {
        _ = &mut upstream_reader => StopReason::UpstreamLost,
        _ = &mut downstream_reader => StopReason::DownstreamLost,
        _ = shutdown => StopReason::Shutdown,
    };
    tracing::info!("bridge stopping: {reason:?}");
    poller.abort();
    if let Some(m) = &mixer {
        m.abort();
    }
    upstream_reader.abort();
    let _ = stop_tx.send(());
    let (forwarded, failsafe) = downstream_writer.await.unwrap_or((0, None));
    downstream_reader.abort();
    bus.close();
    upstream_writer.abort();
    let adc_samples = recorder.await.map_err(|e| BridgeError::Device(e.to_string()))??;
    Ok(BridgeSummary {
        reason,
        forwarded,
        adc_samples,
        failsafe,
        device_config,
    })
}

struct AbortOnDrop(Vec<AbortHandle>);

impl Drop for AbortOnDrop {
    fn drop(&mut self) {
        self.0.iter().for_each(AbortHandle::abort);
    }
}

async fn upstream_reader(mut link: LinkReader, bus: Bus, device_config: Message) {
    let mut sink = ThroughputSink::default();
    loop {
        let msg = match link.recv().await {
            Ok(m) => m,
            Err(e) => {
                tracing::warn!("upstream link lost: {e}");
                return;
            }
        };
        match &msg {
            Message::CmdDigital { .. } | Message::CmdPwm { .. } => {
                bus.publish_message("cmd", msg);
            }
            Message::TestRequest { challenge } => {
                let answer = handshake_answer(challenge).unwrap_or_default();
                bus.publish_message("uplink", Message::TestResponse { answer });
            }
            Message::ConfigRequest => {
                bus.publish_message("uplink", device_config.clone());
            }
            Message::LatencyProbe { .. } | Message::ThroughputData { .. } => {
                if let Some(r) = bench_reply(&mut sink, &msg) {
                    bus.publish_message("uplink", r);
                }
            }
            other => tracing::debug!("bridge ignores upstream type 0x{:02x}", other.msg_type()),
        }
    }
}

async fn upstream_writer(mut link: LinkWriter, sub: Subscription) {
    while let Some(m) = sub.recv().await {
        if let BusPayload::Message(msg) = m.payload {
            if link.send(&msg).await.is_err() {
                return;
            }
        }
    }
}

async fn downstream_reader(mut link: LinkReader, bus: Bus, clock: Clock) {
    loop {
        let msg = match link.recv().await {
            Ok(m) => m,
            Err(e) => {
                tracing::warn!("device link lost: {e}");
                return;
            }
        };
        match msg {
            Message::AdcReport { samples } => {
                // Samples carry the time the report arrived.
                let t = clock.now_ns();
                for s in samples {
                    bus.publish(
                        "adc",
                        BusPayload::Record(SensorRecord::Adc(AdcSample {
                            timestamp_ns: t,
                            reading: s.reading as u32,
                            channel_id: Some(s.channel),
                        })),
                    );
                }
            }
            m @ Message::Telemetry(_) => {
                bus.publish_message("telemetry", m);
            }
            m @ Message::ConfigResponse { .. } => {
                bus.publish_message("config", m);
            }
            other => tracing::debug!("bridge ignores device type 0x{:02x}", other.msg_type()),
        }
    }
}

/// Sole writer of the device link, so the failsafe is always last.
async fn downstream_writer(
    mut link: LinkWriter,
    sub: Subscription,
    plant: Plant,
    mut stop: oneshot::Receiver<()>,
) -> (u64, Option<Message>) {
    let mut forwarded = 0;
    loop {
        let m = tokio::select! {
            biased;
            _ = &mut stop => break,
            m = sub.recv() => m,
        };
        let Some(BusMessage {
            topic,
            payload: BusPayload::Message(msg),
            ..
        }) = m
        else {
            continue;
        };
        // The mixer owns the motors of a quad.
        if plant == Plant::Quad && topic == "cmd" && matches!(msg, Message::CmdPwm { .. }) {
            continue;
        }
        if link.send(&msg).await.is_err() {
            return (forwarded, None);
        }
        if topic == "cmd" {
            forwarded += 1;
        }
    }
    let failsafe = failsafe_command(plant);
    let sent = link.send(&failsafe).await.is_ok();
    let _ = link.shutdown().await;
    (forwarded, sent.then_some(failsafe))
}

async fn poller(bus: Bus, period: Duration, clock: Clock) {
    let mut next = clock.now() + period;
    loop {
        clock.sleep_until(next).await;
        bus.publish_message("device", Message::AdcRequest);
        next += period;
    }
}

async fn recorder(sub: Subscription, mut writer: Option<SessionWriter>) -> Result<u64, BridgeError> {
    let mut n = 0;
    while let Some(m) = sub.recv().await {
        if let BusPayload::Record(r) = m.payload {
            if let Some(w) = writer.as_mut() {
                w.append(&Stream::Adc, &r)?;
            }
            n += 1;
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(n)
}

/// Accelerometer reading of a body at rest with the given attitude.
pub fn gravity_in_body(attitude: [f64; 2]) -> [f64; 3] {
    let [roll, pitch] = attitude;
    [
        -GRAVITY * pitch.sin(),
        GRAVITY * roll.sin() * pitch.cos(),
        GRAVITY * roll.cos() * pitch.cos(),
    ]
}

/// Quad stabilization: estimates attitude from a synthetic IMU built on the
/// device's telemetry and publishes mixed PWM to the device.
async fn mixer(sub: Subscription, bus: Bus, cfg: BridgeConfig) {
    let mut state = cfg.mixer;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.imu_noise_std.max(0.0)).expect("finite noise std");
    let mut estimate = [0.0; 2];
    let mut last: Option<(i64, [f64; 2])> = None;
    let mut armed = false;
    while let Some(m) = sub.recv().await {
        match m.payload {
            BusPayload::Message(Message::CmdPwm { strengths }) => {
                state.base_throttle = (strengths.iter().map(|&s| s as u32).sum::<u32>() / 4) as u16;
                armed = true;
            }
            BusPayload::Message(Message::Telemetry(Telemetry { t_ns, attitude, .. })) => {
                let Some((t_prev, a_prev)) = last.replace((t_ns, attitude)) else {
                    estimate = attitude;
                    continue;
                };
                let dt = (t_ns - t_prev) as f64 * 1e-9;
                if dt <= 0.0 {
                    continue;
                }
                let rates = [(attitude[0] - a_prev[0]) / dt, (attitude[1] - a_prev[1]) / dt];
                let mut accel = gravity_in_body(attitude);
                for a in &mut accel {
                    *a += noise.sample(&mut rng);
                }
                estimate =
                    complementary_filter(estimate, [rates[0], rates[1], 0.0], accel, dt, DEFAULT_ALPHA);
                if armed {
                    state.last_pwm = mix_pwm(&state, estimate, rates);
                    bus.publish_message(
                        "device",
                        Message::CmdPwm {
                            strengths: state.last_pwm,
                        },
                    );
                }
            }
            _ => {}
        }
    }
}

/// Connects to the device and the station, then runs the bridge.
pub async fn run_bridge(
    server: &Endpoint,
    device: DeviceSource,
    cfg: BridgeConfig,
    clock: Clock,
    shutdown: impl Future<Output = ()>,
) -> Result<BridgeSummary, BridgeError> {
    let downstream = match device {
        DeviceSource::Connect(ep) => connect(&ep)
            .await
            .map_err(|e| BridgeError::Connect(Side::Downstream, e))?,
        DeviceSource::Spawn(config) => {
            let sim = Device::spawn(config, clock).map_err(|e| BridgeError::Device(e.to_string()))?;
            let (near, far) = pipe_pair();
            tokio::spawn(async move { serve(far, &sim, ServeOptions::default(), clock).await });
            near
        }
    };
    let upstream = connect(server)
        .await
        .map_err(|e| BridgeError::Connect(Side::Upstream, e))?;
    run_bridge_on(upstream, downstream, cfg, clock, shutdown).await
}
