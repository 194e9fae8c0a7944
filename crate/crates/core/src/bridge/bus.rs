//! In-process publish/subscribe with bounded, drop-oldest subscriber queues.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::Notify;

use crate::clock::Clock;
use crate::dataset::SensorRecord;
use crate::protocol::Message;

pub const DEFAULT_QUEUE_BOUND: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum BusPayload {
    Message(Message),
    Record(SensorRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub topic: String,
    pub payload: BusPayload,
    /// Clock time at publication.
    pub published: Duration,
}

struct Queue {
    items: Mutex<VecDeque<BusMessage>>,
    bound: usize,
    dropped: AtomicU64,
    closed: AtomicBool,
    abandoned: AtomicBool,
    notify: Notify,
}

/// Cheap to clone; all clones share the same topics.
#[derive(Clone)]
pub struct Bus {
    topics: Arc<Mutex<HashMap<String, Vec<Arc<Queue>>>>>,
    clock: Clock,
}

pub struct Subscription {
    queue: Arc<Queue>,
}

impl Bus {
    pub fn new(clock: Clock) -> Self {
        Self {
            topics: Default::default(),
            clock,
        }
    }

    pub fn subscribe(&self, topic: &str) -> Subscription {
        self.subscribe_bounded(topic, DEFAULT_QUEUE_BOUND)
    }

    /// One queue fed by several topics, in publication order.
    pub fn subscribe_topics(&self, topics: &[&str]) -> Subscription {
        self.subscribe_inner(topics, DEFAULT_QUEUE_BOUND)
    }

    pub fn subscribe_bounded(&self, topic: &str, bound: usize) -> Subscription {
        self.subscribe_inner(&[topic], bound)
    }

    fn subscribe_inner(&self, topics: &[&str], bound: usize) -> Subscription {
        let queue = Arc::new(Queue {
            items: Mutex::new(VecDeque::new()),
            bound: bound.max(1),
            dropped: AtomicU64::new(0),
            closed: AtomicBool::new(false),
            abandoned: AtomicBool::new(false),
            notify: Notify::new(),
        });
        let mut map = self.topics.lock().expect("bus poisoned");
        for topic in topics {
            map.entry(topic.to_string()).or_default().push(queue.clone());
        }
        Subscription { queue }
    }

    /// Delivers to every current subscriber of `topic`. Never blocks.
    pub fn publish(&self, topic: &str, payload: BusPayload) -> Duration {
        let published = self.clock.now();
        let mut topics = self.topics.lock().expect("bus poisoned");
        if let Some(queues) = topics.get_mut(topic) {
            queues.retain(|q| !q.abandoned.load(Ordering::Relaxed));
            for q in queues.iter() {
                let mut items = q.items.lock().expect("bus poisoned");
                if items.len() == q.bound {
                    items.pop_front();
                    q.dropped.fetch_add(1, Ordering::Relaxed);
                }
                items.push_back(BusMessage {
                    topic: topic.to_string(),
                    payload: payload.clone(),
                    published,
                });
                drop(items);
                q.notify.notify_one();
            }
        }
        published
    }

    pub fn publish_message(&self, topic: &str, msg: Message) -> Duration {
        self.publish(topic, BusPayload::Message(msg))
    }

    /// Ends every subscription once its queue drains.
    pub fn close(&self) {
        let topics = self.topics.lock().expect("bus poisoned");
        for q in topics.values().flatten() {
            q.closed.store(true, Ordering::SeqCst);
            q.notify.notify_one();
        }
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.queue.abandoned.store(true, Ordering::Relaxed);
    }
}

impl Subscription {
    /// Next message, or `None` once the bus is closed and the queue empty.
    pub async fn recv(&self) -> Option<BusMessage> {
        loop {
            if let Some(m) = self.try_recv() {
                return Some(m);
            }
            if self.queue.closed.load(Ordering::SeqCst) {
                return self.try_recv();
            }
            self.queue.notify.notified().await;
        }
    }

    pub fn try_recv(&self) -> Option<BusMessage> {
        self.queue.items.lock().expect("bus poisoned").pop_front()
    }

    /// Messages discarded because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.queue.dropped.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.queue.items.lock().expect("bus poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
