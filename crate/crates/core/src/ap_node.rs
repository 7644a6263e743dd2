//! Aerial-platform side of the reservation protocol.
//!
//! The AP asks the nearest LP for a slot once its battery drops below the
//! request threshold, then judges each confirmed queue position against its
//! remaining flight margin. A position it cannot afford is cancelled and the
//! request moves on to the nearest LP not yet tried.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{nearest_lp, LpInfo, Position};
use crate::wire::{
    ApReservationDecision, CentiPercent, Decision, ExtendedHeartbeat, FlightStack,
    LpReservationConfirmation, Message, NodeState, ServiceReservationRequest, SystemStateUpdate,
    VehicleType,
};
use crate::{priority_for_battery, Outbound, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApState {
    Operating,
    RequestPending,
    ReservedWaiting,
    Boarding,
    Landed,
    BeingServiced,
    Departing,
}

impl ApState {
    /// `RequestPending -> RequestPending` is a retry at another LP. The two
    /// edges back to `RequestPending` from a held reservation are taken when
    /// the LP revokes the slot (missed boarding window).
    pub fn can_transition_to(self, to: ApState) -> bool {
        use ApState::*;
        matches!(
            (self, to),
            (Operating, RequestPending)
                | (RequestPending, ReservedWaiting)
                | (RequestPending, RequestPending)
                | (ReservedWaiting, Boarding)
                | (ReservedWaiting, RequestPending)
                | (Boarding, RequestPending)
                | (Boarding, Landed)
                | (Landed, BeingServiced)
                | (BeingServiced, Departing)
                | (Departing, Operating)
        )
    }

    pub fn code(self) -> NodeState {
        match self {
            ApState::Operating => NodeState::Operating,
            ApState::RequestPending => NodeState::RequestPending,
            ApState::ReservedWaiting => NodeState::ReservedWaiting,
            ApState::Boarding => NodeState::Boarding,
            ApState::Landed => NodeState::Landed,
            ApState::BeingServiced => NodeState::BeingServiced,
            ApState::Departing => NodeState::Departing,
        }
    }

    /// States in which the AP sits on a pad and draws no battery.
    pub fn is_docked(self) -> bool {
        matches!(self, ApState::Landed | ApState::BeingServiced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub request_threshold_pct: f64,
    /// Battery level the AP must not be expected to cross while waiting.
    pub reserve_floor_pct: f64,
    /// Seconds of LP time assumed per queue position.
    pub service_estimate_s: f64,
    pub cruise_speed_m_s: f64,
    /// Worst-case drain used in the margin estimate.
    pub max_consumption_pct_per_s: f64,
    pub heartbeat_interval_s: f64,
    /// A request with no confirmation after this long is retried elsewhere.
    pub request_timeout_s: f64,
    pub arrival_tolerance_m: f64,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            request_threshold_pct: 50.0,
            reserve_floor_pct: 15.0,
            service_estimate_s: 120.0,
            cruise_speed_m_s: 0.3,
            max_consumption_pct_per_s: 0.20,
            heartbeat_interval_s: 1.0,
            request_timeout_s: 5.0,
            arrival_tolerance_m: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldReservation {
    pub lp_sys_id: u8,
    pub last_known_position: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    CancelAndRetry(u8),
    /// Confirmation from an LP this AP did not ask; the slot is cancelled.
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ApError {
    #[error("confirmation addressed to AP {addressed}, not {me}")]
    ConfirmationForWrongAp { addressed: u8, me: u8 },
}

/// Host-supplied sensor readings for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Telemetry {
    pub battery_pct: f64,
    pub position: Position,
}

/// What the host should do with the airframe this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Carry on with the mission (random walk in simulation).
    Wander,
    Hold,
    Toward(Position),
}

#[derive(Debug, Clone, Copy)]
struct PendingRequest {
    lp_sys_id: u8,
    sent_at: f64,
}

#[derive(Debug, Clone)]
pub struct ApNode {
    pub sys_id: u8,
    pub config: ApConfig,
    pub known_lps: Vec<LpInfo>,
    position: Position,
    battery_pct: f64,
    state: ApState,
    reservation: Option<HeldReservation>,
    pending: Option<PendingRequest>,
    tried: BTreeSet<u8>,
    /// Estimated time-to-service of each offer in the current request round.
    offers: BTreeMap<u8, f64>,
    final_attempt: bool,
    departing_from: Option<u8>,
    last_heartbeat_at: Option<f64>,
    transitions: Vec<Transition<ApState>>,
}

impl ApNode {
    pub fn new(sys_id: u8, config: ApConfig, known_lps: Vec<LpInfo>, position: Position, battery_pct: f64) -> Self {
        Self {
            sys_id,
            config,
            known_lps,
            position,
            battery_pct,
            state: ApState::Operating,
            reservation: None,
            pending: None,
            tried: BTreeSet::new(),
            offers: BTreeMap::new(),
            final_attempt: false,
            departing_from: None,
            last_heartbeat_at: None,
            transitions: Vec::new(),
        }
    }

    pub fn state(&self) -> ApState {
        self.state
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn battery_pct(&self) -> f64 {
        self.battery_pct
    }

    pub fn reservation(&self) -> Option<HeldReservation> {
        self.reservation
    }

    /// LP the AP is currently waiting on for a confirmation, if any.
    pub fn pending_lp(&self) -> Option<u8> {
        self.pending.map(|p| p.lp_sys_id)
    }

    pub fn drain_transitions(&mut self) -> Vec<Transition<ApState>> {
        std::mem::take(&mut self.transitions)
    }

    fn lp_position(&self, lp: u8) -> Option<Position> {
        self.known_lps.iter().find(|l| l.sys_id == lp).map(|l| l.position)
    }

    fn set_state(&mut self, to: ApState, now: f64) {
        debug_assert!(self.state.can_transition_to(to), "illegal AP transition {:?} -> {to:?}", self.state);
        log::debug!("AP {} {:?} -> {:?} at {now}", self.sys_id, self.state, to);
        self.transitions.push(Transition { at: now, from: self.state, to });
        self.state = to;
    }

    pub fn motion(&self) -> Motion {
        match self.state {
            ApState::Operating => Motion::Wander,
            ApState::Boarding => self
                .reservation
                .and_then(|r| self.lp_position(r.lp_sys_id))
                .map_or(Motion::Hold, Motion::Toward),
            ApState::RequestPending
            | ApState::ReservedWaiting
            | ApState::Landed
            | ApState::BeingServiced
            | ApState::Departing => {
                Motion::Hold
            }
        }
    }

    /// Seconds until service at `lp` given a queue position: queued service
    /// time plus travel at cruise speed.
    pub fn estimated_time_to_service(&self, lp: u8, queue_position: u16) -> f64 {
        let travel = self
            .lp_position(lp)
            .map_or(0.0, |p| self.position.distance(&p) / self.config.cruise_speed_m_s);
        queue_position as f64 * self.config.service_estimate_s + travel
    }

    /// Seconds the AP can wait before worst-case drain reaches the reserve floor.
    pub fn flight_margin_s(&self) -> f64 {
        (self.battery_pct - self.config.reserve_floor_pct) / self.config.max_consumption_pct_per_s
    }

    /// Keep/cancel judgement for an offer, without side effects.
    pub fn assess(&self, lp: u8, queue_position: u16) -> Verdict {
        let estimate = self.estimated_time_to_service(lp, queue_position);
        if self.final_attempt || estimate <= self.flight_margin_s() {
            return Verdict::Keep;
        }
        let untried: Vec<LpInfo> =
            self.known_lps.iter().filter(|l| !self.tried.contains(&l.sys_id) && l.sys_id != lp).copied().collect();
        if let Some(next) = nearest_lp(&untried, &self.position) {
            return Verdict::CancelAndRetry(next.sys_id);
        }
        // Every LP has been asked: settle for the quickest offer seen.
        let best = self
            .offers
            .iter()
            .filter(|(&id, _)| id != lp)
            .map(|(&id, &est)| (id, est))
            .chain(std::iter::once((lp, estimate)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("current offer present");
        if best.0 == lp {
            Verdict::Keep
        } else {
            Verdict::CancelAndRetry(best.0)
        }
    }

    fn send_request(&mut self, lp: u8, now: f64, out: &mut Vec<Outbound>) {
        if self.tried.contains(&lp) {
            self.final_attempt = true;
        }
        self.tried.insert(lp);
        self.pending = Some(PendingRequest { lp_sys_id: lp, sent_at: now });
        out.push(Outbound::to(
            lp,
            ServiceReservationRequest {
                priority: priority_for_battery(self.battery_pct),
                target_lp_sys_id: lp,
            },
        ));
    }

    fn send_cancel(lp: u8, out: &mut Vec<Outbound>) {
        out.push(Outbound::to(
            lp,
            ApReservationDecision { target_lp_sys_id: lp, decision: Decision::Cancel },
        ));
    }

    fn start_request_round(&mut self, lp: u8, now: f64, out: &mut Vec<Outbound>) {
        self.tried.clear();
        self.offers.clear();
        self.final_attempt = false;
        self.send_request(lp, now, out);
    }

    pub fn tick(&mut self, now: f64, telemetry: Telemetry) -> Vec<Outbound> {
        let mut out = Vec::new();
        self.battery_pct = telemetry.battery_pct;
        self.position = telemetry.position;

        match self.state {
            ApState::Operating if self.battery_pct < self.config.request_threshold_pct => {
                if let Some(lp) = nearest_lp(&self.known_lps, &self.position) {
                    self.set_state(ApState::RequestPending, now);
                    self.start_request_round(lp.sys_id, now, &mut out);
                }
            }
            ApState::RequestPending => {
                let pending = self.pending.expect("pending request in RequestPending");
                if now - pending.sent_at >= self.config.request_timeout_s {
                    log::warn!("AP {}: no reply from LP {}; retrying", self.sys_id, pending.lp_sys_id);
                    Self::send_cancel(pending.lp_sys_id, &mut out);
                    let untried: Vec<LpInfo> =
                        self.known_lps.iter().filter(|l| !self.tried.contains(&l.sys_id)).copied().collect();
                    let next = nearest_lp(&untried, &self.position).map_or(pending.lp_sys_id, |l| l.sys_id);
                    self.set_state(ApState::RequestPending, now);
                    self.send_request(next, now, &mut out);
                }
            }
            ApState::Boarding => {
                let res = self.reservation.expect("reservation while boarding");
                if let Some(target) = self.lp_position(res.lp_sys_id) {
                    if self.position.distance(&target) <= self.config.arrival_tolerance_m {
                        self.set_state(ApState::Landed, now);
                        out.push(Outbound::to(res.lp_sys_id, SystemStateUpdate { state: NodeState::Landed }));
                    }
                }
            }
            ApState::Departing => {
                if let Some(lp) = self.departing_from.take() {
                    out.push(Outbound::to(lp, SystemStateUpdate { state: NodeState::Departed }));
                }
                self.set_state(ApState::Operating, now);
            }
            _ => {}
        }

        if self.last_heartbeat_at.is_none_or(|t| now - t >= self.config.heartbeat_interval_s) {
            self.last_heartbeat_at = Some(now);
            out.push(Outbound::broadcast(self.heartbeat()));
        }
        out
    }

    pub fn heartbeat(&self) -> ExtendedHeartbeat {
        ExtendedHeartbeat {
            vehicle_type: VehicleType::Quadrotor,
            flight_stack: FlightStack::Px4,
            system_state: self.state.code(),
            battery: CentiPercent::from_pct(self.battery_pct),
            pos_x: self.position.x as f32,
            pos_y: self.position.y as f32,
            component_type: 1,
            flight_mode: 0,
        }
    }

    pub fn handle_message(&mut self, msg: &Message, from: u8, now: f64) -> Vec<Outbound> {
        match *msg {
            Message::LpReservationConfirmation(conf) => match self.evaluate_confirmation(from, conf, now) {
                Ok((_, out)) => out,
                Err(e) => {
                    log::warn!("AP {}: {e}", self.sys_id);
                    Vec::new()
                }
            },
            Message::SystemStateUpdate(upd) => self.handle_state_update(upd, from, now),
            _ => Vec::new(),
        }
    }

    /// Applies the keep/cancel decision for a confirmation from `from`.
    pub fn evaluate_confirmation(
        &mut self,
        from: u8,
        conf: LpReservationConfirmation,
        now: f64,
    ) -> Result<(Verdict, Vec<Outbound>), ApError> {
        if conf.target_ap_sys_id != self.sys_id {
            return Err(ApError::ConfirmationForWrongAp { addressed: conf.target_ap_sys_id, me: self.sys_id });
        }
        let mut out = Vec::new();
        let position = conf.queue_position;

        match self.state {
            ApState::RequestPending if self.pending_lp() == Some(from) => {
                let estimate = self.estimated_time_to_service(from, position);
                let verdict = self.assess(from, position);
                self.offers.insert(from, estimate);
                match verdict {
                    Verdict::Keep => {
                        self.pending = None;
                        self.reservation = Some(HeldReservation { lp_sys_id: from, last_known_position: position });
                        self.set_state(ApState::ReservedWaiting, now);
                        if position == 0 {
                            self.set_state(ApState::Boarding, now);
                        }
                    }
                    Verdict::CancelAndRetry(next) => {
                        Self::send_cancel(from, &mut out);
                        self.set_state(ApState::RequestPending, now);
                        self.send_request(next, now, &mut out);
                    }
                    Verdict::Declined => unreachable!("assess never declines"),
                }
                Ok((verdict, out))
            }
            ApState::ReservedWaiting if self.reservation.is_some_and(|r| r.lp_sys_id == from) => {
                let res = self.reservation.as_mut().expect("checked");
                res.last_known_position = position;
                if position == 0 {
                    self.set_state(ApState::Boarding, now);
                }
                Ok((Verdict::Keep, out))
            }
            _ if self.reservation.is_some_and(|r| r.lp_sys_id == from) => Ok((Verdict::Keep, out)),
            _ => {
                log::info!("AP {}: unsolicited confirmation from LP {from}; cancelling", self.sys_id);
                Self::send_cancel(from, &mut out);
                Ok((Verdict::Declined, out))
            }
        }
    }

    pub fn handle_state_update(&mut self, upd: SystemStateUpdate, from: u8, now: f64) -> Vec<Outbound> {
        let mut out = Vec::new();
        let from_reserved = self.reservation.is_some_and(|r| r.lp_sys_id == from);
        match (upd.state, self.state) {
            (NodeState::Servicing, ApState::Landed) if from_reserved => {
                self.set_state(ApState::BeingServiced, now);
            }
            (NodeState::ServiceComplete, ApState::BeingServiced) if from_reserved => {
                self.reservation = None;
                self.departing_from = Some(from);
                self.set_state(ApState::Departing, now);
            }
            (NodeState::Idle, ApState::ReservedWaiting | ApState::Boarding) if from_reserved => {
                log::warn!("AP {}: LP {from} revoked the reservation; asking again", self.sys_id);
                self.reservation = None;
                self.set_state(ApState::RequestPending, now);
                self.start_request_round(from, now, &mut out);
            }
            (s, ap) => log::debug!("AP {}: state update {s:?} from {from} while {ap:?}; ignored", self.sys_id),
        }
        out
    }
}
