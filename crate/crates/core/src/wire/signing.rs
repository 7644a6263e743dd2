//! Frame signing: a 6-byte truncated SHA-256 over the shared secret and the
//! signed frame contents, plus per-stream timestamp bookkeeping.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

/// 2015-01-01T00:00:00Z as seconds since the Unix epoch.
pub const DEFAULT_EPOCH_UNIX_S: u64 = 1_420_070_400;

/// Signature timestamps are 48-bit counts of 10 µs ticks.
pub const TIMESTAMP_MAX: u64 = (1 << 48) - 1;

/// Ticks per second of signature time.
pub const TICKS_PER_SECOND: u64 = 100_000;

/// A new stream may start at most this far behind the newest timestamp seen.
pub const REPLAY_WINDOW_TICKS: u64 = 6 * TICKS_PER_SECOND;

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub const fn new(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub link_id: u8,
    pub timestamp: u64,
    pub sig: [u8; 6],
}

impl Signature {
    pub const LEN: usize = 13;

    pub fn to_bytes(&self) -> [u8; 13] {
        let mut out = [0u8; 13];
        out[0] = self.link_id;
        out[1..7].copy_from_slice(&self.timestamp.to_le_bytes()[..6]);
        out[7..13].copy_from_slice(&self.sig);
        out
    }

    pub fn from_bytes(b: &[u8; 13]) -> Self {
        let mut ts = [0u8; 8];
        ts[..6].copy_from_slice(&b[1..7]);
        let mut sig = [0u8; 6];
        sig.copy_from_slice(&b[7..13]);
        Self { link_id: b[0], timestamp: u64::from_le_bytes(ts), sig }
    }
}

/// `signed` is header ‖ payload ‖ checksum.
pub fn compute_signature(secret: &SecretKey, signed: &[u8], link_id: u8, timestamp: u64) -> [u8; 6] {
    let mut hasher = Sha256::new();
    hasher.update(secret.as_bytes());
    hasher.update(signed);
    hasher.update([link_id]);
    hasher.update(&timestamp.to_le_bytes()[..6]);
    let digest = hasher.finalize();
    let mut sig = [0u8; 6];
    sig.copy_from_slice(&digest[..6]);
    sig
}

/// Supplies "now" in 10 µs ticks since the signing epoch.
pub trait TimestampSource: Send {
    fn now_ticks(&mut self) -> u64;
}

/// Wall clock relative to a configurable epoch.
#[derive(Debug, Clone)]
pub struct SystemClock {
    epoch: SystemTime,
}

impl SystemClock {
    pub fn new(epoch_unix_s: u64) -> Self {
        Self { epoch: UNIX_EPOCH + Duration::from_secs(epoch_unix_s) }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new(DEFAULT_EPOCH_UNIX_S)
    }
}

impl TimestampSource for SystemClock {
    fn now_ticks(&mut self) -> u64 {
        let elapsed = SystemTime::now().duration_since(self.epoch).unwrap_or_default();
        (elapsed.as_micros() / 10) as u64 & TIMESTAMP_MAX
    }
}

/// Externally driven clock, used by the simulator and tests. Clones share
/// the same reading.
#[derive(Debug, Clone, Default)]
pub struct ManualClock {
    ticks: Arc<AtomicU64>,
}

impl ManualClock {
    pub fn at_ticks(ticks: u64) -> Self {
        let c = Self::default();
        c.set_ticks(ticks);
        c
    }

    pub fn set_ticks(&self, ticks: u64) {
        self.ticks.store(ticks, Ordering::Relaxed);
    }

    pub fn set_seconds(&self, s: f64) {
        self.set_ticks((s * TICKS_PER_SECOND as f64) as u64);
    }
}

impl TimestampSource for ManualClock {
    fn now_ticks(&mut self) -> u64 {
        self.ticks.load(Ordering::Relaxed)
    }
}

/// Sender-side signing state. Timestamps are strictly increasing per
/// `(sys_id, comp_id)` stream even when the clock stalls.
pub struct SigningContext {
    pub link_id: u8,
    secret: SecretKey,
    clock: Box<dyn TimestampSource>,
    last: HashMap<(u8, u8), u64>,
}

impl std::fmt::Debug for SigningContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningContext").field("link_id", &self.link_id).finish_non_exhaustive()
    }
}

impl SigningContext {
    pub fn new(link_id: u8, secret: SecretKey, clock: impl TimestampSource + 'static) -> Self {
        Self { link_id, secret, clock: Box::new(clock), last: HashMap::new() }
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }

    pub fn next_timestamp(&mut self, sys_id: u8, comp_id: u8) -> u64 {
        let now = self.clock.now_ticks();
        let ts = match self.last.get(&(sys_id, comp_id)) {
            Some(&last) => now.max(last + 1),
            None => now,
        }
        .min(TIMESTAMP_MAX);
        self.last.insert((sys_id, comp_id), ts);
        ts
    }
}

/// Receiver-side secrets and replay state.
#[derive(Debug, Clone, Default)]
pub struct Keystore {
    keys: HashMap<u8, SecretKey>,
    /// Reject unsigned frames with `SignatureMissing`.
    pub require_signed: bool,
    streams: HashMap<(u8, u8, u8), u64>,
    newest: u64,
}

impl Keystore {
    pub fn new(require_signed: bool) -> Self {
        Self { require_signed, ..Self::default() }
    }

    pub fn with_key(mut self, link_id: u8, key: SecretKey) -> Self {
        self.keys.insert(link_id, key);
        self
    }

    pub fn insert_key(&mut self, link_id: u8, key: SecretKey) {
        self.keys.insert(link_id, key);
    }

    pub fn key(&self, link_id: u8) -> Option<&SecretKey> {
        self.keys.get(&link_id)
    }

    /// Whether `timestamp` is fresh for the given stream.
    pub fn is_fresh(&self, stream: (u8, u8, u8), timestamp: u64) -> bool {
        match self.streams.get(&stream) {
            Some(&last) => timestamp > last,
            None => timestamp + REPLAY_WINDOW_TICKS >= self.newest,
        }
    }

    pub fn accept(&mut self, stream: (u8, u8, u8), timestamp: u64) {
        self.streams.insert(stream, timestamp);
        self.newest = self.newest.max(timestamp);
    }
}
