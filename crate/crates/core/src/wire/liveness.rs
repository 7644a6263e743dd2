//! Heartbeat-count liveness: a stream is connected while enough heartbeats
//! fall inside a sliding window ending at `now`.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Liveness {
    Connected,
    Disconnected,
}

/// CONNECTED iff at least `min_count` of `timestamps` lie in `(now - window_s, now]`.
pub fn track_liveness(timestamps: &[f64], now: f64, window_s: f64, min_count: usize) -> Liveness {
    debug_assert!(window_s > 0.0 && min_count >= 1);
    let lo = timestamps.partition_point(|&t| t <= now - window_s);
    let hi = timestamps.partition_point(|&t| t <= now);
    if hi - lo >= min_count {
        Liveness::Connected
    } else {
        Liveness::Disconnected
    }
}

/// Per-stream heartbeat history, pruned to the window.
#[derive(Debug, Clone)]
pub struct LivenessTracker {
    pub window_s: f64,
    pub min_count: usize,
    streams: BTreeMap<u8, VecDeque<f64>>,
}

impl LivenessTracker {
    pub fn new(window_s: f64, min_count: usize) -> Self {
        Self { window_s, min_count, streams: BTreeMap::new() }
    }

    pub fn record(&mut self, stream: u8, at: f64) {
        let q = self.streams.entry(stream).or_default();
        if q.back().is_some_and(|&last| at < last) {
            log::warn!("heartbeat from {stream} out of order ({at} < {:?})", q.back());
            return;
        }
        q.push_back(at);
    }

    pub fn status(&mut self, stream: u8, now: f64) -> Liveness {
        let Some(q) = self.streams.get_mut(&stream) else {
            return Liveness::Disconnected;
        };
        while q.front().is_some_and(|&t| t <= now - self.window_s) {
            q.pop_front();
        }
        track_liveness(q.make_contiguous(), now, self.window_s, self.min_count)
    }

    pub fn known_streams(&self) -> impl Iterator<Item = u8> + '_ {
        self.streams.keys().copied()
    }
}
