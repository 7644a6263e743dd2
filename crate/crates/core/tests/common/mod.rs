//! Shared oracles and generators for the integration suites. Nothing here
//! calls into the library's own implementations of the thing being checked.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use autoserve_core::ap_node::{ApConfig, ApNode, ApState, Motion, Telemetry};
use autoserve_core::geometry::{LpInfo, Position};
use autoserve_core::lp_node::{LpConfig, LpNode, LpState};
use autoserve_core::wire::*;
use autoserve_core::Address;
use proptest::prelude::*;
use rand::Rng;

// ---- CRC oracles ----

/// Bit-at-a-time CRC-16/X.25 straight from the textbook definition.
pub fn crc_x25_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= byte as u16;
        for _ in 0..8 {
            let lsb = crc & 1;
            crc >>= 1;
            if lsb == 1 {
                crc ^= 0x8408;
            }
        }
    }
    !crc
}

/// Table-driven CRC-16/X.25 with the table built at runtime from the
/// normal-form polynomial 0x1021 by bit reversal.
pub struct TableCrc {
    table: Vec<u16>,
}

impl TableCrc {
    pub fn new() -> Self {
        let reflected = (0x1021u16).reverse_bits();
        let table = (0u16..256)
            .map(|i| (0..8).fold(i, |c, _| if c & 1 == 1 { (c >> 1) ^ reflected } else { c >> 1 }))
            .collect();
        Self { table }
    }

    pub fn checksum(&self, data: &[u8]) -> u16 {
        let reg = data
            .iter()
            .fold(0xFFFFu16, |crc, &b| (crc >> 8) ^ self.table[((crc ^ b as u16) & 0xFF) as usize]);
        reg ^ 0xFFFF
    }
}

/// Expected frame checksum: CRC over bytes 1.. of header+payload, then crc_extra.
pub fn oracle_frame_checksum(crc: &TableCrc, frame: &[u8]) -> u16 {
    let len = frame[1] as usize;
    let msg_id = frame[7] as u32 | (frame[8] as u32) << 8 | (frame[9] as u32) << 16;
    let extra = spec_for_id(msg_id).expect("known id").crc_extra;
    let mut data = frame[1..10 + len].to_vec();
    data.push(extra);
    crc.checksum(&data)
}

// ---- message generators ----

pub fn random_node_state(rng: &mut impl Rng) -> NodeState {
    NodeState::ALL[rng.random_range(0..NodeState::ALL.len())]
}

fn nonzero_u8(rng: &mut impl Rng) -> u8 {
    rng.random_range(1..=255)
}

fn finite_f32(rng: &mut impl Rng) -> f32 {
    loop {
        let v = f32::from_bits(rng.next_u32());
        if v.is_finite() {
            return v;
        }
    }
}

/// A random valid message; `kind` picks the variant (0..5).
pub fn random_message_of(rng: &mut impl Rng, kind: usize) -> Message {
    match kind % 5 {
        0 => Message::ExtendedHeartbeat(ExtendedHeartbeat {
            vehicle_type: VehicleType::ALL[rng.random_range(0..VehicleType::ALL.len())],
            flight_stack: FlightStack::ALL[rng.random_range(0..FlightStack::ALL.len())],
            system_state: random_node_state(rng),
            battery: CentiPercent::new(rng.random_range(0..=10_000)).unwrap(),
            pos_x: if rng.random_bool(0.2) { 0.0 } else { finite_f32(rng) },
            pos_y: if rng.random_bool(0.2) { 0.0 } else { finite_f32(rng) },
            component_type: if rng.random_bool(0.3) { 0 } else { rng.random() },
            flight_mode: if rng.random_bool(0.3) { 0 } else { rng.random() },
        }),
        1 => Message::ServiceReservationRequest(ServiceReservationRequest {
            priority: rng.random_range(0..=100),
            target_lp_sys_id: nonzero_u8(rng),
        }),
        2 => Message::LpReservationConfirmation(LpReservationConfirmation {
            target_ap_sys_id: nonzero_u8(rng),
            queue_position: if rng.random_bool(0.3) { 0 } else { rng.random() },
        }),
        3 => Message::ApReservationDecision(ApReservationDecision {
            target_lp_sys_id: nonzero_u8(rng),
            decision: if rng.random() { Decision::Keep } else { Decision::Cancel },
        }),
        _ => Message::SystemStateUpdate(SystemStateUpdate { state: random_node_state(rng) }),
    }
}

pub fn random_message(rng: &mut impl Rng) -> Message {
    let kind = rng.random_range(0..5);
    random_message_of(rng, kind)
}

fn arb_node_state() -> impl Strategy<Value = NodeState> {
    prop::sample::select(NodeState::ALL.to_vec())
}

pub fn arb_message() -> impl Strategy<Value = Message> {
    let finite = prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL;
    prop_oneof![
        (
            prop::sample::select(VehicleType::ALL.to_vec()),
            prop::sample::select(FlightStack::ALL.to_vec()),
            arb_node_state(),
            0u16..=10_000,
            finite,
            finite,
            any::<u8>(),
            any::<u8>(),
        )
            .prop_map(|(vt, fs, st, b, x, y, ct, fm)| {
                Message::ExtendedHeartbeat(ExtendedHeartbeat {
                    vehicle_type: vt,
                    flight_stack: fs,
                    system_state: st,
                    battery: CentiPercent::new(b).unwrap(),
                    pos_x: x,
                    pos_y: y,
                    component_type: ct,
                    flight_mode: fm,
                })
            }),
        (0u8..=100, 1u8..=255).prop_map(|(p, lp)| Message::ServiceReservationRequest(ServiceReservationRequest {
            priority: p,
            target_lp_sys_id: lp
        })),
        (1u8..=255, any::<u16>()).prop_map(|(ap, q)| Message::LpReservationConfirmation(
            LpReservationConfirmation { target_ap_sys_id: ap, queue_position: q }
        )),
        (1u8..=255, any::<bool>()).prop_map(|(lp, c)| Message::ApReservationDecision(ApReservationDecision {
            target_lp_sys_id: lp,
            decision: if c { Decision::Cancel } else { Decision::Keep },
        })),
        arb_node_state().prop_map(|state| Message::SystemStateUpdate(SystemStateUpdate { state })),
    ]
}

pub fn key_from(rng: &mut impl Rng) -> SecretKey {
    let mut k = [0u8; 32];
    rng.fill(&mut k);
    SecretKey::new(k)
}

// ---- queue oracle ----

/// Reference queue: an unsorted list, fully re-sorted on every query.
#[derive(Debug, Default, Clone)]
pub struct QueueOracle {
    entries: Vec<(u8, u8, f64)>,
}

impl QueueOracle {
    fn sorted(&self) -> Vec<(u8, u8, f64)> {
        let mut v = self.entries.clone();
        // Higher priority first, then earlier request, then lower AP id.
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.partial_cmp(&b.2).unwrap()).then(a.0.cmp(&b.0)));
        v
    }

    pub fn enqueue(&mut self, ap: u8, priority: u8, at: f64) -> Option<usize> {
        if self.entries.iter().any(|e| e.0 == ap) {
            return None;
        }
        self.entries.push((ap, priority, at));
        self.position_of(ap)
    }

    pub fn cancel(&mut self, ap: u8) -> bool {
        let before = self.entries.len();
        self.entries.retain(|e| e.0 != ap);
        before != self.entries.len()
    }

    pub fn pop(&mut self) -> Option<u8> {
        let head = self.sorted().first()?.0;
        self.cancel(head);
        Some(head)
    }

    pub fn position_of(&self, ap: u8) -> Option<usize> {
        self.sorted().iter().position(|e| e.0 == ap)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn order(&self) -> Vec<u8> {
        self.sorted().iter().map(|e| e.0).collect()
    }
}

// ---- graph oracle ----

/// Plain BFS hop count over an explicit adjacency predicate.
pub fn bfs_hops(n: usize, adjacent: impl Fn(usize, usize) -> bool, src: usize, dst: usize) -> Option<usize> {
    let mut dist = vec![usize::MAX; n];
    let mut q = VecDeque::from([src]);
    dist[src] = 0;
    while let Some(u) = q.pop_front() {
        if u == dst {
            return Some(dist[u]);
        }
        for v in 0..n {
            if v != u && dist[v] == usize::MAX && adjacent(u, v) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    None
}

pub fn random_lps(rng: &mut impl Rng, n: usize, side: f64) -> Vec<LpInfo> {
    (0..n)
        .map(|i| LpInfo {
            sys_id: i as u8 + 1,
            position: Position::new(rng.random_range(0.0..side), rng.random_range(0.0..side)),
        })
        .collect()
}

// ---- FSM harness ----

/// Legal edges, written out independently of the node implementations.
pub const LP_EDGES: &[(LpState, LpState)] = &[
    (LpState::Idle, LpState::AwaitingBoarding),
    (LpState::AwaitingBoarding, LpState::Aligning),
    (LpState::AwaitingBoarding, LpState::Idle),
    (LpState::Aligning, LpState::Servicing),
    (LpState::Servicing, LpState::Releasing),
    (LpState::Releasing, LpState::Idle),
];

pub const AP_EDGES: &[(ApState, ApState)] = &[
    (ApState::Operating, ApState::RequestPending),
    (ApState::RequestPending, ApState::RequestPending),
    (ApState::RequestPending, ApState::ReservedWaiting),
    (ApState::ReservedWaiting, ApState::Boarding),
    (ApState::ReservedWaiting, ApState::RequestPending),
    (ApState::Boarding, ApState::RequestPending),
    (ApState::Boarding, ApState::Landed),
    (ApState::Landed, ApState::BeingServiced),
    (ApState::BeingServiced, ApState::Departing),
    (ApState::Departing, ApState::Operating),
];

#[derive(Debug, Default)]
pub struct SafetyReport {
    pub steps: usize,
    pub lp_transitions: usize,
    pub ap_transitions: usize,
    pub illegal: Vec<String>,
    pub double_holds: Vec<String>,
    pub services: usize,
}

/// Several APs and LPs exchanging messages over per-link FIFO channels, with
/// a random scheduler choosing which link delivers or which node ticks next.
pub struct Harness {
    pub lps: Vec<LpNode>,
    pub aps: Vec<ApNode>,
    battery: Vec<f64>,
    position: Vec<Position>,
    links: BTreeMap<(u8, u8), VecDeque<Message>>,
    now: f64,
    lp_state: Vec<LpState>,
    ap_state: Vec<ApState>,
    pub report: SafetyReport,
}

impl Harness {
    pub fn new(n_aps: usize, n_lps: usize, rng: &mut impl Rng) -> Self {
        let roster: Vec<LpInfo> = (0..n_lps)
            .map(|i| LpInfo { sys_id: i as u8 + 1, position: Position::new(20.0 * i as f64, 0.0) })
            .collect();
        // Short timers so the randomized schedule covers whole service cycles.
        let lp_cfg = LpConfig {
            service_duration_s: 4.0,
            alignment_duration_s: 1.0,
            boarding_timeout_s: 12.0,
            ..LpConfig::default()
        };
        let ap_cfg = ApConfig { service_estimate_s: 4.0, ..ApConfig::default() };
        let lps = roster.iter().map(|l| LpNode::new(l.sys_id, l.position, lp_cfg, roster.clone())).collect();
        let mut aps = Vec::new();
        let mut battery = Vec::new();
        let mut position = Vec::new();
        for i in 0..n_aps {
            let b = rng.random_range(20.0..100.0);
            let p = Position::new(rng.random_range(-5.0..25.0), rng.random_range(-5.0..5.0));
            aps.push(ApNode::new((n_lps + i + 1) as u8, ap_cfg, roster.clone(), p, b));
            battery.push(b);
            position.push(p);
        }
        Self {
            lp_state: vec![LpState::Idle; n_lps],
            ap_state: vec![ApState::Operating; n_aps],
            lps,
            aps,
            battery,
            position,
            links: BTreeMap::new(),
            now: 0.0,
            report: SafetyReport::default(),
        }
    }

    fn is_lp(&self, id: u8) -> bool {
        (id as usize) <= self.lps.len()
    }

    fn post(&mut self, from: u8, out: Vec<autoserve_core::Outbound>) {
        for o in out {
            let targets: Vec<u8> = match o.to {
                Address::System(id) => vec![id],
                Address::Broadcast if self.is_lp(from) => self.aps.iter().map(|a| a.sys_id).collect(),
                Address::Broadcast => self.lps.iter().map(|l| l.sys_id).collect(),
            };
            for to in targets {
                self.links.entry((from, to)).or_default().push_back(o.message);
            }
        }
    }

    fn check_transitions(&mut self) {
        for (i, lp) in self.lps.iter_mut().enumerate() {
            for tr in lp.drain_transitions() {
                self.report.lp_transitions += 1;
                if tr.from != self.lp_state[i] || !LP_EDGES.contains(&(tr.from, tr.to)) {
                    self.report.illegal.push(format!("LP{} {:?}->{:?} (was {:?})", lp.sys_id, tr.from, tr.to, self.lp_state[i]));
                }
                if tr.to == LpState::Releasing {
                    self.report.services += 1;
                }
                self.lp_state[i] = tr.to;
            }
        }
        for (i, ap) in self.aps.iter_mut().enumerate() {
            for tr in ap.drain_transitions() {
                self.report.ap_transitions += 1;
                if tr.from != self.ap_state[i] || !AP_EDGES.contains(&(tr.from, tr.to)) {
                    self.report.illegal.push(format!("AP{} {:?}->{:?} (was {:?})", ap.sys_id, tr.from, tr.to, self.ap_state[i]));
                }
                if tr.to == ApState::Departing {
                    self.battery[i] = 100.0;
                }
                self.ap_state[i] = tr.to;
            }
        }
    }

    /// No AP may occupy two pads, and an AP that holds a reservation holds
    /// exactly one (the type makes more impossible; the pad view is checked).
    fn check_holdings(&mut self) {
        for ap in &self.aps {
            let on_pads: Vec<u8> = self
                .lps
                .iter()
                .filter(|l| l.current_ap() == Some(ap.sys_id) && matches!(l.state(), LpState::Aligning | LpState::Servicing))
                .map(|l| l.sys_id)
                .collect();
            if on_pads.len() > 1 {
                self.report.double_holds.push(format!("AP{} docked at {:?} at t={}", ap.sys_id, on_pads, self.now));
            }
            if ap.reservation().is_some() && ap.pending_lp().is_some() {
                self.report.double_holds.push(format!("AP{} holds and requests at once", ap.sys_id));
            }
        }
    }

    pub fn step(&mut self, rng: &mut impl Rng) {
        self.report.steps += 1;
        let busy: Vec<(u8, u8)> = self.links.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| *k).collect();
        let roll = rng.random_range(0..10);
        if roll < 6 && !busy.is_empty() {
            let (from, to) = busy[rng.random_range(0..busy.len())];
            let msg = self.links.get_mut(&(from, to)).unwrap().pop_front().unwrap();
            let out = if self.is_lp(to) {
                self.lps[to as usize - 1].handle_message(&msg, from, self.now)
            } else {
                let idx = to as usize - self.lps.len() - 1;
                self.aps[idx].handle_message(&msg, from, self.now)
            };
            self.post(to, out);
        } else if roll < 7 {
            self.now += 1.0;
        } else if roll < 9 {
            let i = rng.random_range(0..self.aps.len());
            let ap = &self.aps[i];
            if !ap.state().is_docked() {
                self.battery[i] = (self.battery[i] - rng.random_range(0.0..2.0)).max(0.0);
            }
            self.position[i] = match ap.motion() {
                Motion::Toward(t) if rng.random_bool(0.5) => t,
                Motion::Toward(t) => self.position[i].step_toward(&t, 3.0),
                Motion::Wander => Position::new(
                    self.position[i].x + rng.random_range(-1.0..1.0),
                    self.position[i].y + rng.random_range(-1.0..1.0),
                ),
                Motion::Hold => self.position[i],
            };
            let t = Telemetry { battery_pct: self.battery[i], position: self.position[i] };
            let out = self.aps[i].tick(self.now, t);
            let id = self.aps[i].sys_id;
            self.post(id, out);
        } else {
            let i = rng.random_range(0..self.lps.len());
            let out = self.lps[i].tick(self.now);
            let id = self.lps[i].sys_id;
            self.post(id, out);
        }
        self.check_transitions();
        self.check_holdings();
    }

    pub fn in_flight(&self) -> usize {
        self.links.values().map(VecDeque::len).sum()
    }
}

pub fn run_harness(rng: &mut impl Rng, n_aps: usize, n_lps: usize, steps: usize) -> SafetyReport {
    let mut h = Harness::new(n_aps, n_lps, rng);
    for _ in 0..steps {
        h.step(rng);
    }
    h.report
}

pub fn distinct<T: Ord + Clone>(items: &[T]) -> usize {
    items.iter().cloned().collect::<BTreeSet<_>>().len()
}

// ---- priority scenario ----

#[derive(Debug)]
pub struct PriorityOutcome {
    pub confirmation_a: u16,
    pub confirmation_b: u16,
    pub position_after_both: (u16, u16),
    /// APs in the order the pad finished servicing them.
    pub service_order: Vec<u8>,
}

/// AP-A (40 %) then AP-B (25 %) request one LP whose pad is already taken
/// by a third AP; the pad is then run to completion three times.
pub fn priority_scenario() -> PriorityOutcome {
    const OCCUPANT: u8 = 9;
    const A: u8 = 2;
    const B: u8 = 3;
    let mut lp = LpNode::new(1, Position::new(0.0, 0.0), LpConfig::default(), vec![]);
    let request = |battery: f64| {
        Message::ServiceReservationRequest(ServiceReservationRequest {
            priority: autoserve_core::priority_for_battery(battery),
            target_lp_sys_id: 1,
        })
    };
    let confirmation_to = |out: &[autoserve_core::Outbound], ap: u8| {
        out.iter().find_map(|o| match o.message {
            Message::LpReservationConfirmation(c) if c.target_ap_sys_id == ap => Some(c.queue_position),
            _ => None,
        })
    };
    let state = |s: NodeState| Message::SystemStateUpdate(SystemStateUpdate { state: s });

    lp.handle_message(&request(80.0), OCCUPANT, 0.0);
    let confirmation_a = confirmation_to(&lp.handle_message(&request(40.0), A, 1.0), A).unwrap();
    let confirmation_b = confirmation_to(&lp.handle_message(&request(25.0), B, 2.0), B).unwrap();
    let position_after_both = (lp.reported_position(A).unwrap(), lp.reported_position(B).unwrap());

    let mut service_order = Vec::new();
    let mut now = 3.0;
    for _ in 0..3 {
        let ap = lp.current_ap().expect("pad assigned");
        lp.handle_message(&state(NodeState::Landed), ap, now);
        while lp.state() != LpState::Releasing {
            now += 1.0;
            lp.tick(now);
        }
        service_order.push(ap);
        now += 1.0;
        lp.handle_message(&state(NodeState::Departed), ap, now);
    }
    service_order.retain(|&ap| ap != OCCUPANT);
    PriorityOutcome { confirmation_a, confirmation_b, position_after_both, service_order }
}

/// Every simple path from `src` to `dst` with exactly `hops` edges.
pub fn all_paths_with_hops(
    n: usize,
    adjacent: &impl Fn(usize, usize) -> bool,
    src: usize,
    dst: usize,
    hops: usize,
) -> Vec<Vec<usize>> {
    fn walk(
        n: usize,
        adjacent: &impl Fn(usize, usize) -> bool,
        path: &mut Vec<usize>,
        dst: usize,
        left: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        let u = *path.last().unwrap();
        if left == 0 {
            if u == dst {
                out.push(path.clone());
            }
            return;
        }
        for v in 0..n {
            if !path.contains(&v) && adjacent(u, v) {
                path.push(v);
                walk(n, adjacent, path, dst, left - 1, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(n, adjacent, &mut vec![src], dst, hops, &mut out);
    out
}
