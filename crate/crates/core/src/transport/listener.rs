use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use super::pipe::{self, PipeBinding};
use super::{Channel, Endpoint, Guarded, TransportError, DEFAULT_CONNECT_TIMEOUT};

/// Written to a connector refused because a client is already served.
pub const BUSY_NOTICE: &[u8] = b"BUSY\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientPolicy {
    /// One client at a time; others get [`BUSY_NOTICE`] and are closed.
    Single,
    Multi,
}

/// Accepts connections in the background according to its policy.
pub struct Listener {
    endpoint: Endpoint,
    rx: mpsc::UnboundedReceiver<Result<Channel, TransportError>>,
    task: JoinHandle<()>,
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.task.abort();
    }
}

enum Source {
    Tcp(TcpListener),
    Pipe(PipeBinding),
}

impl Source {
    async fn accept(&mut self) -> Option<Result<Channel, TransportError>> {
        match self {
            Source::Tcp(l) => Some(
                l.accept()
                    .await
                    .map(|(stream, _)| {
                        let _ = stream.set_nodelay(true);
                        Box::new(stream) as Channel
                    })
                    .map_err(|e| TransportError::AcceptFailure(e.to_string())),
            ),
            Source::Pipe(b) => b.rx.recv().await.map(Ok),
        }
    }
}

struct ActiveClient(Arc<AtomicBool>);

impl Drop for ActiveClient {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub async fn listen(endpoint: &Endpoint, policy: ClientPolicy) -> Result<Listener, TransportError> {
    let (source, bound) = match endpoint {
        Endpoint::Tcp { host, port } => {
            let l = TcpListener::bind((host.as_str(), *port))
                .await
                .map_err(|e| TransportError::BindFailure(endpoint.to_string(), e.to_string()))?;
            let addr = l.local_addr()?;
            (Source::Tcp(l), Endpoint::tcp(addr.ip().to_string(), addr.port()))
        }
        Endpoint::Pipe(label) => (Source::Pipe(pipe::bind(label)?), endpoint.clone()),
    };
    let (tx, rx) = mpsc::unbounded_channel();
    let task = tokio::spawn(accept_loop(source, policy, tx));
    Ok(Listener {
        endpoint: bound,
        rx,
        task,
    })
}

async fn accept_loop(
    mut source: Source,
    policy: ClientPolicy,
    tx: mpsc::UnboundedSender<Result<Channel, TransportError>>,
) {
    let active = Arc::new(AtomicBool::new(false));
    while let Some(result) = source.accept().await {
        let channel = match result {
            Ok(c) => c,
            Err(e) => {
                if tx.send(Err(e)).is_err() {
                    return;
                }
                continue;
            }
        };
        let channel = match policy {
            ClientPolicy::Multi => channel,
            ClientPolicy::Single => {
                if active.swap(true, Ordering::SeqCst) {
                    tracing::info!("refusing second client: busy");
                    tokio::spawn(refuse(channel));
                    continue;
                }
                Guarded::wrap(channel, ActiveClient(active.clone()))
            }
        };
        if tx.send(Ok(channel)).is_err() {
            return;
        }
    }
}

async fn refuse(mut channel: Channel) {
    let _ = channel.write_all(BUSY_NOTICE).await;
    let _ = channel.shutdown().await;
}

impl Listener {
    /// Endpoint actually bound (resolves TCP port 0).
    pub fn local_endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub async fn accept(&mut self) -> Result<Channel, TransportError> {
        self.rx
            .recv()
            .await
            .unwrap_or_else(|| Err(TransportError::AcceptFailure("listener closed".into())))
    }
}

pub async fn connect(endpoint: &Endpoint) -> Result<Channel, TransportError> {
    connect_timeout(endpoint, DEFAULT_CONNECT_TIMEOUT).await
}

pub async fn connect_timeout(endpoint: &Endpoint, timeout: Duration) -> Result<Channel, TransportError> {
    match endpoint {
        Endpoint::Pipe(label) => pipe::connect(label),
        Endpoint::Tcp { host, port } => {
            let fut = TcpStream::connect((host.as_str(), *port));
            match tokio::time::timeout(timeout, fut).await {
                Err(_) => Err(TransportError::Timeout(endpoint.to_string())),
                Ok(Err(e)) if e.kind() == std::io::ErrorKind::ConnectionRefused => {
                    Err(TransportError::ConnectRefused(endpoint.to_string()))
                }
                Ok(Err(e)) => Err(TransportError::Io(e)),
                Ok(Ok(stream)) => {
                    let _ = stream.set_nodelay(true);
                    Ok(Box::new(stream))
                }
            }
        }
    }
}
