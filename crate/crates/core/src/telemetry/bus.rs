//! In-process publish/subscribe with per-topic ordering and at-least-once
//! delivery: a subscriber sees every message from its committed offset on
//! each poll until it commits past it.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use log::warn;

use super::{aggregate_ait, AitRecord, SensorReading};

#[derive(Debug, Default)]
struct TopicLog {
    /// Offset of `messages[0]`.
    base: u64,
    messages: VecDeque<String>,
}

#[derive(Debug, Default)]
pub struct MessageBus {
    topics: Mutex<BTreeMap<String, TopicLog>>,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a payload and returns its offset.
    pub fn publish(&self, topic: &str, payload: String) -> u64 {
        let mut topics = self.topics.lock().expect("bus lock poisoned");
        let log = topics.entry(topic.to_owned()).or_default();
        log.messages.push_back(payload);
        log.base + log.messages.len() as u64 - 1
    }

    /// Messages at or after `offset`, oldest first.
    fn fetch(&self, topic: &str, offset: u64, max: usize) -> Vec<(u64, String)> {
        let topics = self.topics.lock().expect("bus lock poisoned");
        let Some(log) = topics.get(topic) else {
            return Vec::new();
        };
        let skip = offset.saturating_sub(log.base) as usize;
        log.messages
            .iter()
            .enumerate()
            .skip(skip)
            .take(max)
            .map(|(i, m)| (log.base + i as u64, m.clone()))
            .collect()
    }

    /// Drops messages below `offset`. Only safe once every subscriber has
    /// committed past it.
    pub fn trim(&self, topic: &str, offset: u64) {
        let mut topics = self.topics.lock().expect("bus lock poisoned");
        if let Some(log) = topics.get_mut(topic) {
            while log.base < offset && !log.messages.is_empty() {
                log.messages.pop_front();
                log.base += 1;
            }
        }
    }

    pub fn backlog(&self, topic: &str) -> usize {
        let topics = self.topics.lock().expect("bus lock poisoned");
        topics.get(topic).map_or(0, |l| l.messages.len())
    }
}

#[derive(Debug, Clone)]
pub struct Subscription {
    topic: String,
    committed: u64,
}

impl Subscription {
    pub fn new(topic: impl Into<String>) -> Self {
        Subscription {
            topic: topic.into(),
            committed: 0,
        }
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Uncommitted messages; repeated polls redeliver them.
    pub fn poll(&self, bus: &MessageBus, max: usize) -> Vec<(u64, String)> {
        bus.fetch(&self.topic, self.committed, max)
    }

    /// Marks everything up to and including `offset` as processed.
    pub fn commit(&mut self, offset: u64) {
        self.committed = self.committed.max(offset + 1);
    }

    pub fn committed(&self) -> u64 {
        self.committed
    }
}

/// Consumer that turns sensor messages into one AIT record per window.
#[derive(Debug)]
pub struct AitAggregator {
    sub: Subscription,
}

impl AitAggregator {
    pub fn new(topic: &str) -> Self {
        AitAggregator {
            sub: Subscription::new(topic),
        }
    }

    /// Consumes the backlog. Returns the parsed readings (deduplicated per
    /// node and window) and one aggregate per window, both in arrival order.
    pub fn drain(&mut self, bus: &MessageBus) -> (Vec<SensorReading>, Vec<AitRecord>) {
        let batch = self.sub.poll(bus, usize::MAX);
        let Some(&(last, _)) = batch.last() else {
            return (Vec::new(), Vec::new());
        };
        let mut readings: Vec<SensorReading> = Vec::with_capacity(batch.len());
        for (offset, payload) in &batch {
            match serde_json::from_str::<SensorReading>(payload) {
                Ok(r) => {
                    let dup = readings
                        .iter()
                        .rev()
                        .take_while(|x| x.date == r.date)
                        .any(|x| x.sensor_id == r.sensor_id);
                    if !dup {
                        readings.push(r);
                    }
                }
                Err(e) => warn!("dropping malformed message at offset {offset}: {e}"),
            }
        }
        let records = readings
            .chunk_by(|a, b| a.date == b.date)
            .filter_map(|w| aggregate_ait(w).ok())
            .collect();
        self.sub.commit(last);
        bus.trim(self.sub.topic(), self.sub.committed());
        (readings, records)
    }
}
