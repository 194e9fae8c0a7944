//! Time source shared by every node of a run.
//!
//! The virtual clock runs on tokio's paused test clock, which jumps forward
//! whenever every task is idle. Tokio timers have millisecond granularity, so
//! virtual time is scaled: one virtual microsecond is one tokio millisecond.
//! Virtual runs must use in-process pipes only; real sockets would let the
//! paused clock race ahead while waiting on the network.

use std::future::Future;
use std::time::Duration;

use tokio::time::Instant;

const VIRTUAL_SCALE: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Wall,
    Virtual,
}

#[derive(Debug, Clone, Copy)]
pub struct Clock {
    mode: Mode,
    epoch: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("deadline elapsed")]
pub struct Elapsed;

impl Clock {
    pub fn wall() -> Self {
        Self {
            mode: Mode::Wall,
            epoch: Instant::now(),
        }
    }

    /// Virtual clock starting at zero. Must be created inside a
    /// current-thread runtime with paused time.
    pub fn virtual_time() -> Self {
        Self {
            mode: Mode::Virtual,
            epoch: Instant::now(),
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.mode == Mode::Virtual
    }

    fn to_tokio(self, d: Duration) -> Duration {
        match self.mode {
            Mode::Wall => d,
            Mode::Virtual => d.saturating_mul(VIRTUAL_SCALE),
        }
    }

    /// Time since the clock was created.
    pub fn now(&self) -> Duration {
        let real = self.epoch.elapsed();
        match self.mode {
            Mode::Wall => real,
            Mode::Virtual => real / VIRTUAL_SCALE,
        }
    }

    pub fn now_ns(&self) -> i64 {
        self.now().as_nanos() as i64
    }

    pub async fn sleep(&self, d: Duration) {
        if !d.is_zero() {
            tokio::time::sleep(self.to_tokio(d)).await
        }
    }

    /// Sleeps until clock time `t`; returns at once if it has passed.
    pub async fn sleep_until(&self, t: Duration) {
        // Tokio rounds even elapsed deadlines up to its next timer tick.
        if t > self.now() {
            tokio::time::sleep_until(self.epoch + self.to_tokio(t)).await
        }
    }

    pub async fn timeout<F: Future>(&self, d: Duration, fut: F) -> Result<F::Output, Elapsed> {
        tokio::time::timeout(self.to_tokio(d), fut)
            .await
            .map_err(|_| Elapsed)
    }
}
