//! Line-per-event trace output.
//!
//! A trace file is one JSON header line followed by one JSON object per
//! record, e.g.
//!
//! ```text
//! {"trace_header":{"format":"autoserve-trace/1",...}}
//! {"t":12,"actor":"AP6","kind":"MSG_SENT","detail":{"id":40,"to":"LP1","message":{...}}}
//! ```

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SimConfig;
use crate::wire::{Message, NodeState};

pub const TRACE_FORMAT: &str = "autoserve-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Actor {
    Ap(u8),
    Lp(u8),
}

impl Actor {
    pub fn sys_id(self) -> u8 {
        match self {
            Actor::Ap(id) | Actor::Lp(id) => id,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Ap(id) => write!(f, "AP{id}"),
            Actor::Lp(id) => write!(f, "LP{id}"),
        }
    }
}

impl FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |rest: &str| rest.parse::<u8>().map_err(|e| format!("bad actor {s:?}: {e}"));
        if let Some(rest) = s.strip_prefix("AP") {
            Ok(Actor::Ap(parse(rest)?))
        } else if let Some(rest) = s.strip_prefix("LP") {
            Ok(Actor::Lp(parse(rest)?))
        } else {
            Err(format!("bad actor {s:?}"))
        }
    }
}

impl Serialize for Actor {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Actor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceEvent {
    /// LP status at the end of its tick.
    Tick { state: NodeState, queue_len: usize },
    MsgSent { id: u64, to: Actor, message: Message },
    MsgRecv { id: u64, from: Actor, message: Message },
    StateChange { from: NodeState, to: NodeState },
    /// Telemetry handed to the AP for this tick.
    Battery { battery_pct: f64, x: f64, y: f64 },
    /// Battery dropped below the failure threshold.
    Failure { battery_pct: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub actor: Actor,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub generator: String,
    pub config: SimConfig,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    trace_header: TraceHeader,
}

pub trait TraceSink {
    fn header(&mut self, _header: &TraceHeader) {}
    fn record(&mut self, record: TraceRecord);
    /// False when records would be discarded; lets the simulator skip building them.
    fn enabled(&self) -> bool {
        true
    }
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _record: TraceRecord) {}
    fn enabled(&self) -> bool {
        false
    }
}

#[derive(Debug, Default)]
pub struct VecSink {
    pub header: Option<TraceHeader>,
    pub records: Vec<TraceRecord>,
}

impl TraceSink for VecSink {
    fn header(&mut self, header: &TraceHeader) {
        self.header = Some(header.clone());
    }
    fn record(&mut self, record: TraceRecord) {
        self.records.push(record);
    }
}

/// Streams JSON lines to a writer. The first I/O error is kept and
/// returned by [`JsonLinesSink::finish`].
pub struct JsonLinesSink<W: Write> {
    out: W,
    error: Option<io::Error>,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out, error: None }
    }

    fn write_line<T: Serialize>(&mut self, value: &T) {
        if self.error.is_some() {
            return;
        }
        let res = serde_json::to_writer(&mut self.out, value)
            .map_err(io::Error::from)
            .and_then(|_| self.out.write_all(b"\n"));
        if let Err(e) = res {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for JsonLinesSink<W> {
    fn header(&mut self, header: &TraceHeader) {
        self.write_line(&HeaderLine { trace_header: header.clone() });
    }
    fn record(&mut self, record: TraceRecord) {
        self.write_line(&record);
    }
}

/// Parses a JSON-lines trace back into its header and records.
pub fn parse_trace(text: &str) -> Result<(TraceHeader, Vec<TraceRecord>), serde_json::Error> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: HeaderLine = serde_json::from_str(lines.next().unwrap_or(""))?;
    let records = lines.map(serde_json::from_str).collect::<Result<Vec<_>, _>>()?;
    Ok((header.trace_header, records))
}
