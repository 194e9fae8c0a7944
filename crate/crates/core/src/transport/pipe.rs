//! In-process duplex pipes and the registry that lets `pipe:<label>`
//! endpoints be listened on and connected to by name.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};

use tokio::sync::mpsc;

use super::{Channel, TransportError};

/// Bytes buffered per direction before a writer waits.
pub const PIPE_BUFFER: usize = 256 * 1024;

/// Two connected ends of an in-memory channel.
pub fn pipe_pair() -> (Channel, Channel) {
    let (a, b) = tokio::io::duplex(PIPE_BUFFER);
    (Box::new(a), Box::new(b))
}

type Registry = Mutex<HashMap<String, (u64, mpsc::UnboundedSender<Channel>)>>;

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(Default::default)
}

/// Registers `label`; connections arrive on the returned receiver.
pub(crate) fn bind(label: &str) -> Result<PipeBinding, TransportError> {
    static NEXT_ID: AtomicU64 = AtomicU64::new(0);
    let mut map = registry().lock().expect("pipe registry poisoned");
    if map.get(label).is_some_and(|(_, tx)| !tx.is_closed()) {
        return Err(TransportError::BindFailure(
            format!("pipe:{label}"),
            "label already in use".into(),
        ));
    }
    let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
    let (tx, rx) = mpsc::unbounded_channel();
    map.insert(label.to_string(), (id, tx));
    Ok(PipeBinding {
        label: label.to_string(),
        id,
        rx,
    })
}

pub(crate) fn connect(label: &str) -> Result<Channel, TransportError> {
    let map = registry().lock().expect("pipe registry poisoned");
    let refused = || TransportError::ConnectRefused(format!("pipe:{label}"));
    let (_, tx) = map.get(label).ok_or_else(refused)?;
    let (near, far) = pipe_pair();
    tx.send(far).map_err(|_| refused())?;
    Ok(near)
}

pub(crate) struct PipeBinding {
    label: String,
    id: u64,
    pub(crate) rx: mpsc::UnboundedReceiver<Channel>,
}

impl Drop for PipeBinding {
    fn drop(&mut self) {
        if let Ok(mut map) = registry().lock() {
            if map.get(&self.label).is_some_and(|(id, _)| *id == self.id) {
                map.remove(&self.label);
            }
        }
    }
}
