//! Byte-stream transports: TCP, in-process pipes, and a shaping wrapper
//! that adds delay and bandwidth limits to either.

mod endpoint;
mod listener;
mod pipe;
mod shape;

use std::pin::Pin;
use std::task::{Context, Poll};
use std::time::Duration;

use tokio::io::{AsyncRead, AsyncWrite, ReadBuf};

pub use endpoint::Endpoint;
pub use listener::{connect, connect_timeout, listen, ClientPolicy, Listener, BUSY_NOTICE};
pub use pipe::{pipe_pair, PIPE_BUFFER};
pub use shape::{shape, Bandwidth, ShapingParams};

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

pub trait ByteStream: AsyncRead + AsyncWrite + Send + Unpin + 'static {}
impl<T: AsyncRead + AsyncWrite + Send + Unpin + 'static> ByteStream for T {}

/// Bidirectional, reliable, ordered byte channel.
pub type Channel = Box<dyn ByteStream>;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("invalid endpoint {0:?}: {1}")]
    InvalidEndpoint(String, &'static str),
    #[error("cannot bind {0}: {1}")]
    BindFailure(String, String),
    #[error("accept failed: {0}")]
    AcceptFailure(String),
    #[error("connection to {0} refused")]
    ConnectRefused(String),
    #[error("connection to {0} timed out")]
    Timeout(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Channel wrapper that keeps a value alive for as long as the channel.
pub(crate) struct Guarded<G> {
    inner: Channel,
    _guard: G,
}

impl<G: Send + Unpin + 'static> Guarded<G> {
    pub(crate) fn wrap(inner: Channel, guard: G) -> Channel {
        Box::new(Guarded { inner, _guard: guard })
    }
}

impl<G: Unpin> AsyncRead for Guarded<G> {
    fn poll_read(
        self: Pin<&mut Self>,
        cx: &mut Context<'_>,
        buf: &mut ReadBuf<'_>,
    ) -> Poll<std::io::Result<()>> {
        Pin::new(&mut self.get_mut().inner).poll_read(cx, buf)
    }
}

impl<G: Unpin> AsyncWrite for Guarded<G> {
    fn poll_write(self: Pin<&mut Self>, cx: &mut Context<'_>, buf: &[u8]) -> Poll<std::io::Result<usize>> {
        Pin::new(&mut self.get_mut().inner).poll_write(cx, buf)
    }

    fn poll_flush(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<std::io::Result<()>> {
        Pin::new(&mut self.get_mut().inner).poll_flush(cx)
    }

    fn poll_shutdown(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<std::io::Result<()>> {
        Pin::new(&mut self.get_mut().inner).poll_shutdown(cx)
    }
}
