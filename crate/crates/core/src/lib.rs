//! Protocol engine and deterministic fleet simulator for an autonomous UAV
//! service network.
//!
//! Aerial platforms (APs) reserve service slots at landing platforms (LPs)
//! over signed MAVLink-v2-style frames. Each LP keeps a priority-ordered
//! service queue and runs a landing/alignment/service/release cycle; each AP
//! decides whether a confirmed queue position meets its battery margin and
//! otherwise retries elsewhere.
//!
//! - [`wire`]: frame codec, checksums, signing, heartbeat liveness
//! - [`reservation`]: the LP service queue
//! - [`lp_node`], [`ap_node`]: the two protocol state machines
//! - [`routing`]: range-bounded LP-to-LP route planning
//! - [`sim`]: the seeded 1 Hz fleet simulation and its trace output

pub mod ap_node;
pub mod geometry;
pub mod lp_node;
pub mod reservation;
pub mod routing;
pub mod sim;
pub mod wire;

pub use geometry::{LpInfo, Position};

/// Where an outbound message goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Address {
    Broadcast,
    System(u8),
}

/// A message a node wants sent, with its destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outbound {
    pub to: Address,
    pub message: wire::Message,
}

impl Outbound {
    pub fn to(sys_id: u8, message: impl Into<wire::Message>) -> Self {
        Self { to: Address::System(sys_id), message: message.into() }
    }

    pub fn broadcast(message: impl Into<wire::Message>) -> Self {
        Self { to: Address::Broadcast, message: message.into() }
    }
}

/// A state change recorded by a node, drained by the host for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<S> {
    pub at: f64,
    pub from: S,
    pub to: S,
}

/// Battery-derived urgency: `round(100 - battery_pct)` clamped to 0–100.
pub fn priority_for_battery(battery_pct: f64) -> u8 {
    (100.0 - battery_pct).round().clamp(0.0, 100.0) as u8
}
