//! Landing-platform control loop.
//!
//! Request intake runs independently of the landing/service cycle: requests
//! are queued and confirmed in every state, while the pad itself moves
//! through `Idle -> AwaitingBoarding -> Aligning -> Servicing -> Releasing
//! -> Idle`. Whenever the pad is idle and the queue is non-empty the head is
//! popped and called in with a position-0 confirmation.
//!
//! Confirmation positions count everyone ahead of the AP, including the AP
//! currently occupying the pad, so position 0 always means "come now".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{nearest_lp, LpInfo, Position};
use crate::reservation::{QueueError, Reservation, ServiceQueue};
use crate::wire::{
    ApReservationDecision, CentiPercent, Decision, ExtendedHeartbeat, FlightStack, Liveness,
    LivenessTracker, LpReservationConfirmation, Message, NodeState, ServiceReservationRequest,
    SystemStateUpdate, VehicleType,
};
use crate::{Outbound, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LpState {
    Idle,
    AwaitingBoarding,
    Aligning,
    Servicing,
    Releasing,
}

impl LpState {
    /// Legal edges of the pad cycle. `AwaitingBoarding -> Idle` covers a
    /// cancelled or expired boarding slot; `Releasing -> Idle` is also the
    /// exit when the departing AP goes silent.
    pub fn can_transition_to(self, to: LpState) -> bool {
        use LpState::*;
        matches!(
            (self, to),
            (Idle, AwaitingBoarding)
                | (AwaitingBoarding, Aligning)
                | (AwaitingBoarding, Idle)
                | (Aligning, Servicing)
                | (Servicing, Releasing)
                | (Releasing, Idle)
        )
    }

    pub fn code(self) -> NodeState {
        match self {
            LpState::Idle => NodeState::Idle,
            LpState::AwaitingBoarding => NodeState::AwaitingBoarding,
            LpState::Aligning => NodeState::Aligning,
            LpState::Servicing => NodeState::Servicing,
            LpState::Releasing => NodeState::Releasing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    pub service_duration_s: f64,
    pub alignment_duration_s: f64,
    pub boarding_timeout_s: f64,
    /// Battery level below which the nearest LP reserves itself for an AP.
    pub critical_threshold_pct: f64,
    pub heartbeat_interval_s: f64,
    pub liveness_window_s: f64,
    pub liveness_min_count: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            service_duration_s: 120.0,
            alignment_duration_s: 10.0,
            boarding_timeout_s: 180.0,
            critical_threshold_pct: 15.0,
            heartbeat_interval_s: 1.0,
            liveness_window_s: 5.0,
            liveness_min_count: 3,
        }
    }
}

/// Latest health report from an AP heartbeat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApHealth {
    pub battery_pct: f64,
    pub position: Position,
    pub state: NodeState,
    pub reported_at: f64,
}

#[derive(Debug, Clone)]
pub struct LpNode {
    pub sys_id: u8,
    pub position: Position,
    pub config: LpConfig,
    /// Every LP in the network, this one included.
    pub roster: Vec<LpInfo>,
    queue: ServiceQueue,
    state: LpState,
    current_ap: Option<u8>,
    phase_started_at: f64,
    last_heartbeat_at: Option<f64>,
    liveness: LivenessTracker,
    connectivity: BTreeMap<u8, Liveness>,
    health: BTreeMap<u8, ApHealth>,
    transitions: Vec<Transition<LpState>>,
}

impl LpNode {
    pub fn new(sys_id: u8, position: Position, config: LpConfig, roster: Vec<LpInfo>) -> Self {
        let mut roster = roster;
        if !roster.iter().any(|lp| lp.sys_id == sys_id) {
            roster.push(LpInfo { sys_id, position });
        }
        Self {
            sys_id,
            position,
            liveness: LivenessTracker::new(config.liveness_window_s, config.liveness_min_count),
            config,
            roster,
            queue: ServiceQueue::new(),
            state: LpState::Idle,
            current_ap: None,
            phase_started_at: 0.0,
            last_heartbeat_at: None,
            connectivity: BTreeMap::new(),
            health: BTreeMap::new(),
            transitions: Vec::new(),
        }
    }

    pub fn state(&self) -> LpState {
        self.state
    }

    pub fn current_ap(&self) -> Option<u8> {
        self.current_ap
    }

    pub fn queue(&self) -> &ServiceQueue {
        &self.queue
    }

    pub fn health(&self, ap: u8) -> Option<&ApHealth> {
        self.health.get(&ap)
    }

    pub fn connectivity(&self, ap: u8) -> Liveness {
        self.connectivity.get(&ap).copied().unwrap_or(Liveness::Disconnected)
    }

    pub fn info(&self) -> LpInfo {
        LpInfo { sys_id: self.sys_id, position: self.position }
    }

    pub fn drain_transitions(&mut self) -> Vec<Transition<LpState>> {
        std::mem::take(&mut self.transitions)
    }

    /// Position an AP would be told: queue index plus one if the pad is occupied.
    pub fn reported_position(&self, ap: u8) -> Option<u16> {
        if self.current_ap == Some(ap) {
            return Some(0);
        }
        let busy = usize::from(self.state != LpState::Idle);
        self.queue.position_of(ap).map(|i| (i + busy) as u16)
    }

    fn set_state(&mut self, to: LpState, now: f64) {
        debug_assert!(self.state.can_transition_to(to), "illegal LP transition {:?} -> {to:?}", self.state);
        log::debug!("LP {} {:?} -> {:?} at {now}", self.sys_id, self.state, to);
        self.transitions.push(Transition { at: now, from: self.state, to });
        self.state = to;
        self.phase_started_at = now;
    }

    /// Pops the head into the pad and calls it in, if the pad is free.
    fn promote_next(&mut self, now: f64, out: &mut Vec<Outbound>) {
        if self.state != LpState::Idle {
            return;
        }
        if let Ok(next) = self.queue.pop_next() {
            self.current_ap = Some(next.ap_sys_id);
            self.set_state(LpState::AwaitingBoarding, now);
            out.push(Outbound::to(
                next.ap_sys_id,
                LpReservationConfirmation { target_ap_sys_id: next.ap_sys_id, queue_position: 0 },
            ));
        }
    }

    fn release_pad(&mut self, now: f64, out: &mut Vec<Outbound>) {
        self.current_ap = None;
        self.set_state(LpState::Idle, now);
        self.promote_next(now, out);
    }

    pub fn handle_message(&mut self, msg: &Message, from: u8, now: f64) -> Vec<Outbound> {
        let mut out = Vec::new();
        match *msg {
            Message::ExtendedHeartbeat(hb) => {
                self.liveness.record(from, now);
                let status = self.liveness.status(from, now);
                self.connectivity.insert(from, status);
                self.health.insert(
                    from,
                    ApHealth {
                        battery_pct: hb.battery.pct(),
                        position: Position::new(hb.pos_x as f64, hb.pos_y as f64),
                        state: hb.system_state,
                        reported_at: now,
                    },
                );
                if self.auto_reserve(from, &hb, now).is_some() {
                    self.promote_next(now, &mut out);
                }
            }
            Message::ServiceReservationRequest(req) => self.handle_request(req, from, now, &mut out),
            Message::ApReservationDecision(dec) => self.handle_decision(dec, from, now, &mut out),
            Message::SystemStateUpdate(upd) => self.handle_state_update(upd, from, now, &mut out),
            Message::LpReservationConfirmation(_) => {
                log::debug!("LP {} ignoring confirmation from {from}", self.sys_id);
            }
        }
        out
    }

    fn handle_request(&mut self, req: ServiceReservationRequest, from: u8, now: f64, out: &mut Vec<Outbound>) {
        if req.target_lp_sys_id != self.sys_id {
            log::debug!("LP {} ignoring request addressed to {}", self.sys_id, req.target_lp_sys_id);
            return;
        }
        let reply_position = if self.current_ap == Some(from) {
            0
        } else {
            match self.queue.enqueue(Reservation::new(from, req.priority, now)) {
                Ok(_) | Err(QueueError::DuplicateReservation(_)) => {}
                Err(e) => unreachable!("enqueue only fails with duplicates: {e}"),
            }
            if self.state == LpState::Idle {
                // Idle implies the queue held nothing before this request
                // (or an auto-reservation for the same AP), so the
                // requester is the head and the reply doubles as the call-in.
                let head = self.queue.pop_next().expect("just enqueued");
                debug_assert_eq!(head.ap_sys_id, from);
                self.current_ap = Some(head.ap_sys_id);
                self.set_state(LpState::AwaitingBoarding, now);
                0
            } else {
                self.reported_position(from).expect("queued")
            }
        };
        out.push(Outbound::to(
            from,
            LpReservationConfirmation { target_ap_sys_id: from, queue_position: reply_position },
        ));
    }

    fn handle_decision(&mut self, dec: ApReservationDecision, from: u8, now: f64, out: &mut Vec<Outbound>) {
        if dec.target_lp_sys_id != self.sys_id || dec.decision == Decision::Keep {
            return;
        }
        if self.current_ap == Some(from) {
            if self.state == LpState::AwaitingBoarding {
                self.release_pad(now, out);
            } else {
                log::warn!("LP {}: AP {from} cancelled while {:?}; ignored", self.sys_id, self.state);
            }
        } else {
            self.queue.cancel(from);
        }
    }

    fn handle_state_update(&mut self, upd: SystemStateUpdate, from: u8, now: f64, out: &mut Vec<Outbound>) {
        let from_current = self.current_ap == Some(from);
        match (upd.state, self.state) {
            (NodeState::Landed, LpState::AwaitingBoarding) if from_current => {
                self.set_state(LpState::Aligning, now);
            }
            (NodeState::Departed, LpState::Releasing) if from_current => {
                self.release_pad(now, out);
            }
            (s, lp) => log::warn!("LP {}: state update {s:?} from {from} while {lp:?}; dropped", self.sys_id),
        }
    }

    /// Reserves this LP for an AP reporting critical battery, when this is
    /// the nearest LP and the AP holds nothing here yet.
    pub fn auto_reserve(&mut self, ap: u8, hb: &ExtendedHeartbeat, now: f64) -> Option<Reservation> {
        if hb.battery.pct() >= self.config.critical_threshold_pct {
            return None;
        }
        if self.current_ap == Some(ap) || self.queue.contains(ap) {
            return None;
        }
        let at = Position::new(hb.pos_x as f64, hb.pos_y as f64);
        if nearest_lp(&self.roster, &at).map(|lp| lp.sys_id) != Some(self.sys_id) {
            return None;
        }
        let r = Reservation::new(ap, 100, now);
        self.queue.enqueue(r).ok()?;
        log::info!("LP {} auto-reserved for AP {ap} at {:.2}%", self.sys_id, hb.battery.pct());
        Some(r)
    }

    pub fn tick(&mut self, now: f64) -> Vec<Outbound> {
        let mut out = Vec::new();
        let elapsed = now - self.phase_started_at;
        match self.state {
            LpState::Aligning if elapsed >= self.config.alignment_duration_s => {
                self.set_state(LpState::Servicing, now);
                let ap = self.current_ap.expect("pad occupied");
                out.push(Outbound::to(ap, SystemStateUpdate { state: NodeState::Servicing }));
            }
            LpState::Servicing if elapsed >= self.config.service_duration_s => {
                self.set_state(LpState::Releasing, now);
                let ap = self.current_ap.expect("pad occupied");
                out.push(Outbound::to(ap, SystemStateUpdate { state: NodeState::ServiceComplete }));
            }
            LpState::AwaitingBoarding if elapsed >= self.config.boarding_timeout_s => {
                let ap = self.current_ap.expect("pad occupied");
                log::warn!("LP {}: AP {ap} missed boarding window; slot dropped", self.sys_id);
                out.push(Outbound::to(ap, SystemStateUpdate { state: NodeState::Idle }));
                self.release_pad(now, &mut out);
            }
            _ => {}
        }

        let known: Vec<u8> = self.liveness.known_streams().collect();
        for ap in known {
            let status = self.liveness.status(ap, now);
            let prev = self.connectivity.insert(ap, status);
            if prev == Some(Liveness::Connected) && status == Liveness::Disconnected {
                log::warn!("LP {}: AP {ap} disconnected", self.sys_id);
            }
        }
        if self.state == LpState::Releasing {
            if let Some(ap) = self.current_ap {
                if self.connectivity(ap) == Liveness::Disconnected && self.health.contains_key(&ap) {
                    log::warn!("LP {}: releasing AP {ap} went silent; pad freed", self.sys_id);
                    self.release_pad(now, &mut out);
                }
            }
        }

        if self.last_heartbeat_at.is_none_or(|t| now - t >= self.config.heartbeat_interval_s) {
            self.last_heartbeat_at = Some(now);
            out.push(Outbound::broadcast(self.heartbeat()));
        }
        out
    }

    pub fn heartbeat(&self) -> ExtendedHeartbeat {
        ExtendedHeartbeat {
            vehicle_type: VehicleType::GroundStation,
            flight_stack: FlightStack::Generic,
            system_state: self.state.code(),
            battery: CentiPercent::MAX,
            pos_x: self.position.x as f32,
            pos_y: self.position.y as f32,
            component_type: 0,
            flight_mode: 0,
        }
    }
}
