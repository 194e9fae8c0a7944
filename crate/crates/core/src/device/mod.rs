//! Simulated microcontroller board: digital lines, four PWM outputs, a
//! sampled ADC and a car or quadcopter plant, reachable over a framed link.

mod state;

use std::time::Duration;

use tokio::sync::{mpsc, oneshot, watch};

use crate::clock::Clock;
use crate::commbench::peer::{bench_reply, ThroughputSink};
use crate::protocol::{handshake_answer, AdcReading, FramedLink, LinkError, Message, Telemetry};
use crate::transport::{listen, Channel, ClientPolicy, Endpoint, Listener};

pub use state::{
    AdcSlot, DeviceConfig, DeviceError, DeviceState, Plant, PITCH_SIGNS, QUAD_TAU, ROLL_SIGNS, V_MAX,
};

pub const DEFAULT_TELEMETRY_PERIOD: Duration = Duration::from_millis(50);

enum Request {
    Command(Message, oneshot::Sender<Result<(), DeviceError>>),
    TakeAdc(oneshot::Sender<Vec<AdcReading>>),
    Config(oneshot::Sender<Message>),
    Snapshot(oneshot::Sender<Telemetry>),
}

/// Handle to a running simulation. The state lives in one task; handles
/// talk to it by message. The simulation stops when every handle is gone.
#[derive(Clone)]
pub struct Device {
    tx: mpsc::UnboundedSender<Request>,
    watch: watch::Receiver<Telemetry>,
}

impl Device {
    pub fn spawn(config: DeviceConfig, clock: Clock) -> Result<Device, DeviceError> {
        let mut state = DeviceState::new(config)?;
        let (tx, mut rx) = mpsc::unbounded_channel();
        let (watch_tx, watch) = watch::channel(state.snapshot());
        tokio::spawn(async move {
            while let Some(req) = rx.recv().await {
                state.advance_to(clock.now());
                match req {
                    Request::Command(m, reply) => {
                        let _ = reply.send(state.apply_command(&m));
                    }
                    Request::TakeAdc(reply) => {
                        let _ = reply.send(state.take_fresh());
                    }
                    Request::Config(reply) => {
                        let _ = reply.send(state.config_response());
                    }
                    Request::Snapshot(reply) => {
                        let _ = reply.send(state.snapshot());
                    }
                }
                watch_tx.send_replace(state.snapshot());
            }
        });
        Ok(Device { tx, watch })
    }

    async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Request) -> T {
        let (tx, rx) = oneshot::channel();
        self.tx
            .send(make(tx))
            .unwrap_or_else(|_| unreachable!("simulation outlives its handles"));
        rx.await.expect("simulation task alive")
    }

    pub async fn command(&self, msg: Message) -> Result<(), DeviceError> {
        self.ask(|r| Request::Command(msg, r)).await
    }

    /// Fresh ADC readings; each sample is returned once.
    pub async fn take_adc(&self) -> Vec<AdcReading> {
        self.ask(Request::TakeAdc).await
    }

    pub async fn config_response(&self) -> Message {
        self.ask(Request::Config).await
    }

    /// State advanced to the current clock time.
    pub async fn snapshot(&self) -> Telemetry {
        self.ask(Request::Snapshot).await
    }

    /// Snapshot as of the last request handled.
    pub fn watch(&self) -> watch::Receiver<Telemetry> {
        self.watch.clone()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ServeOptions {
    /// Unsolicited Telemetry cadence; `None` disables it.
    pub telemetry_period: Option<Duration>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            telemetry_period: Some(DEFAULT_TELEMETRY_PERIOD),
        }
    }
}

/// Serves one link until the peer disconnects. The first message must be a
/// TestRequest; anything else closes the link with ProtocolViolation.
pub async fn serve(
    channel: Channel,
    device: &Device,
    opts: ServeOptions,
    clock: Clock,
) -> Result<(), DeviceError> {
    let link_err = |e: LinkError| DeviceError::Link(e.to_string());
    let (mut reader, mut writer) = FramedLink::new(channel).split();
    match reader.recv().await {
        Ok(Message::TestRequest { challenge }) => {
            let answer = handshake_answer(&challenge).unwrap_or_default();
            writer
                .send(&Message::TestResponse { answer })
                .await
                .map_err(link_err)?;
        }
        Ok(other) => {
            let _ = writer.shutdown().await;
            return Err(DeviceError::ProtocolViolation(format!(
                "message type 0x{:02x} before handshake",
                other.msg_type()
            )));
        }
        Err(LinkError::Closed) => return Ok(()),
        Err(e) => return Err(link_err(e)),
    }
    tracing::debug!("device link handshake answered");

    let mut sink = ThroughputSink::default();
    let mut next_telemetry = opts.telemetry_period.map(|p| clock.now() + p);
    loop {
        let incoming = tokio::select! {
            r = reader.recv() => r,
            _ = async {
                match next_telemetry {
                    Some(t) => clock.sleep_until(t).await,
                    None => std::future::pending().await,
                }
            } => {
                let snap = device.snapshot().await;
                writer.send(&Message::Telemetry(snap)).await.map_err(link_err)?;
                if let (Some(t), Some(p)) = (next_telemetry.as_mut(), opts.telemetry_period) {
                    *t += p;
                }
                continue;
            }
        };
        let msg = match incoming {
            Ok(m) => m,
            Err(LinkError::Closed) => return Ok(()),
            Err(e) => return Err(link_err(e)),
        };
        let reply = match &msg {
            Message::TestRequest { challenge } => Some(Message::TestResponse {
                answer: handshake_answer(challenge).unwrap_or_default(),
            }),
            Message::CmdDigital { .. } | Message::CmdPwm { .. } => {
                if let Err(e) = device.command(msg.clone()).await {
                    tracing::warn!("command rejected: {e}");
                }
                None
            }
            Message::AdcRequest => Some(Message::AdcReport {
                samples: device.take_adc().await,
            }),
            Message::ConfigRequest => Some(device.config_response().await),
            Message::LatencyProbe { .. } | Message::ThroughputData { .. } => bench_reply(&mut sink, &msg),
            other => {
                tracing::debug!("device ignores message type 0x{:02x}", other.msg_type());
                None
            }
        };
        if let Some(r) = reply {
            writer.send(&r).await.map_err(link_err)?;
        }
    }
}

/// Serves clients of `listener` one after another, sharing one device.
pub async fn serve_listener(
    mut listener: Listener,
    device: Device,
    opts: ServeOptions,
    clock: Clock,
) -> Result<(), DeviceError> {
    loop {
        let channel = listener
            .accept()
            .await
            .map_err(|e| DeviceError::Link(e.to_string()))?;
        match serve(channel, &device, opts, clock).await {
            Ok(()) => tracing::info!("device client disconnected"),
            Err(e) => tracing::warn!("device client dropped: {e}"),
        }
    }
}

/// Binds `endpoint` and runs a fresh device behind it.
pub async fn run_device(
    endpoint: &Endpoint,
    config: DeviceConfig,
    opts: ServeOptions,
    clock: Clock,
) -> Result<(), DeviceError> {
    let device = Device::spawn(config, clock)?;
    let listener = listen(endpoint, ClientPolicy::Single)
        .await
        .map_err(|e| DeviceError::Link(e.to_string()))?;
    tracing::info!("device listening on {}", listener.local_endpoint());
    serve_listener(listener, device, opts, clock).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::pipe_pair;

    async fn connected(opts: ServeOptions) -> (FramedLink, Device, Clock) {
        let clock = Clock::virtual_time();
        let device = Device::spawn(DeviceConfig::default(), clock).unwrap();
        let (a, b) = pipe_pair();
        let d = device.clone();
        tokio::spawn(async move { serve(b, &d, opts, clock).await });
        (FramedLink::new(a), device, clock)
    }

    async fn handshake(link: &mut FramedLink) {
        link.send(&Message::TestRequest {
            challenge: vec![1, 2, 3],
        })
        .await
        .unwrap();
        assert_eq!(
            link.recv().await.unwrap(),
            Message::TestResponse {
                answer: vec![3, 2, 1]
            }
        );
    }

    const QUIET: ServeOptions = ServeOptions {
        telemetry_period: None,
    };

    #[tokio::test(start_paused = true)]
    async fn command_before_handshake_closes_link() {
        let clock = Clock::virtual_time();
        let device = Device::spawn(DeviceConfig::default(), clock).unwrap();
        let (a, b) = pipe_pair();
        let mut link = FramedLink::new(a);
        link.send(&Message::CmdDigital { line: 0, value: true })
            .await
            .unwrap();
        let r = serve(b, &device, QUIET, clock).await;
        assert!(matches!(r, Err(DeviceError::ProtocolViolation(_))), "{r:?}");
        assert!(matches!(link.recv().await, Err(LinkError::Closed)));
        assert!(!device.snapshot().await.enable);
    }

    #[tokio::test(start_paused = true)]
    async fn requests_and_commands() {
        let (mut link, device, clock) = connected(QUIET).await;
        handshake(&mut link).await;
        link.send(&Message::AdcRequest).await.unwrap();
        assert_eq!(link.recv().await.unwrap(), Message::AdcReport { samples: vec![] });
        link.send(&Message::ConfigRequest).await.unwrap();
        assert_eq!(
            link.recv().await.unwrap(),
            Message::ConfigResponse {
                channels: 2,
                resolution_bits: 10,
                sample_rate_hz: 100
            }
        );
        link.send(&Message::CmdDigital { line: 1, value: true })
            .await
            .unwrap();
        link.send(&Message::CmdDigital { line: 0, value: true })
            .await
            .unwrap();
        link.send(&Message::LatencyProbe { probe_id: 9 }).await.unwrap();
        assert_eq!(link.recv().await.unwrap(), Message::LatencyEcho { probe_id: 9 });
        let t0 = clock.now();
        clock.sleep(Duration::from_millis(500)).await;
        let snap = device.snapshot().await;
        assert!(snap.enable && snap.forward);
        let expected = (clock.now() - t0).as_secs_f64();
        assert!((snap.car_pos_m - expected).abs() < 1e-9, "{}", snap.car_pos_m);
        link.send(&Message::AdcRequest).await.unwrap();
        let Message::AdcReport { samples } = link.recv().await.unwrap() else {
            panic!("expected AdcReport")
        };
        assert_eq!(samples.len(), 2);
    }

    #[tokio::test(start_paused = true)]
    async fn telemetry_is_pushed_periodically() {
        let (mut link, _device, clock) = connected(ServeOptions::default()).await;
        handshake(&mut link).await;
        let mut times = Vec::new();
        while times.len() < 4 {
            if let Message::Telemetry(t) = link.recv().await.unwrap() {
                times.push(t.t_ns);
            }
        }
        let step = DEFAULT_TELEMETRY_PERIOD.as_nanos() as i64;
        for w in times.windows(2) {
            assert_eq!(w[1] - w[0], step);
        }
        assert!(clock.now() >= Duration::from_millis(200));
    }
}
