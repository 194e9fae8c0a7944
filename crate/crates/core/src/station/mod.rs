//! Control station: accepts one bridge at a time, verifies it, sequences
//! commands onto its link and fans telemetry out to UI sessions.

mod script;
pub mod ui;

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::clock::Clock;
use crate::commbench::{bench_latency, bench_throughput, BenchOptions, BenchResult};
use crate::protocol::{new_challenge, verify_handshake, FramedLink, LinkError, Message, Telemetry};
use crate::transport::{listen, ClientPolicy, Endpoint, Listener, TransportError};

pub use script::{parse_script, run_script, ScriptEntry, ScriptError};
pub use ui::{serve_ui_session, UiEvent, UiRequest};

pub const COMMAND_LOG_LEN: usize = 1024;
pub const DEFAULT_TELEMETRY_HZ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct StationStatus {
    pub connected: bool,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubmitError {
    #[error("no client connected")]
    NotConnected,
    #[error("client not verified")]
    NotVerified,
    #[error("bad value: {0}")]
    BadValue(String),
    #[error("station stopped")]
    Stopped,
}

#[derive(Debug, thiserror::Error)]
pub enum StationError {
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedCommand {
    /// Clock time the command was written to the link.
    pub at: Duration,
    pub msg: Message,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StationEvent {
    ClientConnected,
    HandshakeFailed(String),
    Verified,
    ClientLost,
}

#[derive(Debug, Clone)]
pub struct BenchRequest {
    pub sizes: Vec<usize>,
    pub chunked: bool,
    pub options: BenchOptions,
}

#[derive(Debug, Clone, Copy)]
pub struct StationOptions {
    pub handshake_timeout: Duration,
    /// Per-UI-session telemetry ceiling.
    pub telemetry_max_hz: f64,
}

impl Default for StationOptions {
    fn default() -> Self {
        Self {
            handshake_timeout: Duration::from_secs(5),
            telemetry_max_hz: DEFAULT_TELEMETRY_HZ,
        }
    }
}

enum Request {
    Command(Message, oneshot::Sender<Result<(), SubmitError>>),
    Bench(BenchRequest, oneshot::Sender<Result<BenchResult, SubmitError>>),
}

struct Shared {
    log: Mutex<VecDeque<LoggedCommand>>,
    events: Mutex<Vec<StationEvent>>,
    tasks: Mutex<Vec<JoinHandle<()>>>,
}

/// Handle to a running station. Clones share it.
#[derive(Clone)]
pub struct Station {
    requests: mpsc::Sender<Request>,
    status: watch::Receiver<StationStatus>,
    telemetry: watch::Receiver<Option<Telemetry>>,
    shared: Arc<Shared>,
    control: Endpoint,
    ui: Option<Endpoint>,
    clock: Clock,
    options: StationOptions,
}

/// Binds the control endpoint (single client) and, optionally, the UI
/// endpoint, and starts serving both.
pub async fn start_station(
    control: &Endpoint,
    ui: Option<&Endpoint>,
    clock: Clock,
    options: StationOptions,
) -> Result<Station, StationError> {
    let control_listener = listen(control, ClientPolicy::Single).await?;
    let ui_listener = match ui {
        Some(ep) => Some(listen(ep, ClientPolicy::Multi).await?),
        None => None,
    };
    let (req_tx, req_rx) = mpsc::channel(64);
    let (status_tx, status) = watch::channel(StationStatus::default());
    let (telemetry_tx, telemetry) = watch::channel(None);
    let shared = Arc::new(Shared {
        log: Mutex::new(VecDeque::with_capacity(COMMAND_LOG_LEN)),
        events: Mutex::new(Vec::new()),
        tasks: Mutex::new(Vec::new()),
    });
    let station = Station {
        requests: req_tx,
        status,
        telemetry,
        shared: shared.clone(),
        control: control_listener.local_endpoint().clone(),
        ui: ui_listener.as_ref().map(|l| l.local_endpoint().clone()),
        clock,
        options,
    };
    let control_task = tokio::spawn(control_loop(
        control_listener,
        req_rx,
        status_tx,
        telemetry_tx,
        shared.clone(),
        clock,
        options,
    ));
    let mut tasks = vec![control_task];
    if let Some(l) = ui_listener {
        tasks.push(tokio::spawn(ui_accept_loop(l, station.clone())));
    }
    shared.tasks.lock().expect("station poisoned").extend(tasks);
    Ok(station)
}

impl Station {
    /// Sends a command to the verified client. Commands leave in the order
    /// they were submitted.
    pub async fn submit_command(&self, msg: Message) -> Result<(), SubmitError> {
        if !msg.is_command() {
            return Err(SubmitError::BadValue("not a device command".into()));
        }
        msg.validate().map_err(|e| SubmitError::BadValue(e.to_string()))?;
        let (tx, rx) = oneshot::channel();
        self.requests
            .send(Request::Command(msg, tx))
            .await
            .map_err(|_| SubmitError::Stopped)?;
        rx.await.map_err(|_| SubmitError::Stopped)?
    }

    /// Benchmarks the control link. Commands wait until it finishes.
    pub async fn bench(&self, req: BenchRequest) -> Result<BenchResult, SubmitError> {
        let (tx, rx) = oneshot::channel();
        self.requests
            .send(Request::Bench(req, tx))
            .await
            .map_err(|_| SubmitError::Stopped)?;
        rx.await.map_err(|_| SubmitError::Stopped)?
    }

    pub fn status(&self) -> StationStatus {
        *self.status.borrow()
    }

    pub fn status_watch(&self) -> watch::Receiver<StationStatus> {
        self.status.clone()
    }

    pub fn telemetry_watch(&self) -> watch::Receiver<Option<Telemetry>> {
        self.telemetry.clone()
    }

    pub async fn wait_verified(&self) {
        let mut rx = self.status.clone();
        let _ = rx.wait_for(|s| s.verified).await;
    }

    pub fn command_log(&self) -> Vec<LoggedCommand> {
        self.shared
            .log
            .lock()
            .expect("station poisoned")
            .iter()
            .cloned()
            .collect()
    }

    pub fn events(&self) -> Vec<StationEvent> {
        self.shared.events.lock().expect("station poisoned").clone()
    }

    pub fn control_endpoint(&self) -> &Endpoint {
        &self.control
    }

    pub fn ui_endpoint(&self) -> Option<&Endpoint> {
        self.ui.as_ref()
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn options(&self) -> StationOptions {
        self.options
    }

    /// Stops listening and drops the client link.
    pub fn shutdown(&self) {
        for t in self.shared.tasks.lock().expect("station poisoned").drain(..) {
            t.abort();
        }
    }
}

fn push_event(shared: &Shared, e: StationEvent) {
    tracing::info!("station: {e:?}");
    shared.events.lock().expect("station poisoned").push(e);
}

fn reject_all(req: Request, why: SubmitError) {
    match req {
        Request::Command(_, reply) => {
            let _ = reply.send(Err(why));
        }
        Request::Bench(_, reply) => {
            let _ = reply.send(Err(why));
        }
    }
}

async fn control_loop(
    mut listener: Listener,
    mut requests: mpsc::Receiver<Request>,
    status: watch::Sender<StationStatus>,
    telemetry: watch::Sender<Option<Telemetry>>,
    shared: Arc<Shared>,
    clock: Clock,
    options: StationOptions,
) {
    loop {
        status.send_replace(StationStatus::default());
        let channel = loop {
            tokio::select! {
                c = listener.accept() => match c {
                    Ok(c) => break c,
                    Err(e) => {
                        tracing::warn!("control accept: {e}");
                        return;
                    }
                },
                Some(req) = requests.recv() => reject_all(req, SubmitError::NotConnected),
            }
        };
        push_event(&shared, StationEvent::ClientConnected);
        status.send_replace(StationStatus {
            connected: true,
            verified: false,
        });
        let mut link = FramedLink::new(channel);
        match handshake(&mut link, &mut requests, clock, options.handshake_timeout).await {
            Ok(()) => {}
            Err(why) => {
                push_event(&shared, StationEvent::HandshakeFailed(why));
                continue;
            }
        }
        if link.send(&Message::ConfigRequest).await.is_err() {
            push_event(&shared, StationEvent::ClientLost);
            continue;
        }
        push_event(&shared, StationEvent::Verified);
        status.send_replace(StationStatus {
            connected: true,
            verified: true,
        });
        serve_client(&mut link, &mut requests, &telemetry, &shared, clock).await;
        push_event(&shared, StationEvent::ClientLost);
    }
}

/// Challenges the client. Requests arriving meanwhile are refused.
async fn handshake(
    link: &mut FramedLink,
    requests: &mut mpsc::Receiver<Request>,
    clock: Clock,
    timeout: Duration,
) -> Result<(), String> {
    let challenge = new_challenge();
    link.send(&Message::TestRequest {
        challenge: challenge.clone(),
    })
    .await
    .map_err(|e| e.to_string())?;
    let deadline = clock.now() + timeout;
    loop {
        let left = deadline.saturating_sub(clock.now());
        tokio::select! {
            r = clock.timeout(left, link.recv()) => match r {
                Err(_) => return Err("timed out waiting for TestResponse".into()),
                Ok(Err(e)) => return Err(e.to_string()),
                Ok(Ok(Message::TestResponse { answer })) => {
                    return if verify_handshake(&challenge, &answer) {
                        Ok(())
                    } else {
                        Err("wrong answer to challenge".into())
                    };
                }
                Ok(Ok(other)) => {
                    return Err(format!("message type 0x{:02x} before handshake", other.msg_type()));
                }
            },
            Some(req) = requests.recv() => reject_all(req, SubmitError::NotVerified),
        }
    }
}

async fn serve_client(
    link: &mut FramedLink,
    requests: &mut mpsc::Receiver<Request>,
    telemetry: &watch::Sender<Option<Telemetry>>,
    shared: &Shared,
    clock: Clock,
) {
    loop {
        tokio::select! {
            r = link.recv() => match r {
                Ok(Message::Telemetry(t)) => {
                    telemetry.send_replace(Some(t));
                }
                Ok(m @ Message::ConfigResponse { .. }) => tracing::info!("client device config: {m:?}"),
                Ok(other) => tracing::debug!("station ignores type 0x{:02x}", other.msg_type()),
                Err(LinkError::Closed) => return,
                Err(e) => {
                    tracing::warn!("control link: {e}");
                    return;
                }
            },
            req = requests.recv() => match req {
                None => return,
                Some(Request::Command(msg, reply)) => {
                    if link.send(&msg).await.is_err() {
                        let _ = reply.send(Err(SubmitError::NotConnected));
                        return;
                    }
                    let mut log = shared.log.lock().expect("station poisoned");
                    if log.len() == COMMAND_LOG_LEN {
                        log.pop_front();
                    }
                    log.push_back(LoggedCommand { at: clock.now(), msg });
                    drop(log);
                    let _ = reply.send(Ok(()));
                }
                Some(Request::Bench(req, reply)) => {
                    let r = run_bench(link, &req, clock).await;
                    let lost = r.is_err();
                    let _ = reply.send(r.map_err(|e| SubmitError::BadValue(e.to_string())));
                    if lost {
                        return;
                    }
                }
            },
        }
    }
}

async fn run_bench(
    link: &mut FramedLink,
    req: &BenchRequest,
    clock: Clock,
) -> Result<BenchResult, crate::commbench::BenchError> {
    let latency = bench_latency(link, clock, &req.options).await?;
    let mut throughput = Vec::new();
    for &size in &req.sizes {
        throughput.push(bench_throughput(link, size, req.chunked, clock, &req.options).await?);
    }
    Ok(BenchResult {
        label: "control".into(),
        latency: Some(latency),
        throughput,
    })
}

async fn ui_accept_loop(mut listener: Listener, station: Station) {
    loop {
        match listener.accept().await {
            Ok(channel) => {
                let s = station.clone();
                tokio::spawn(async move { serve_ui_session(channel, &s).await });
            }
            Err(e) => {
                tracing::warn!("ui accept: {e}");
                return;
            }
        }
    }
}
