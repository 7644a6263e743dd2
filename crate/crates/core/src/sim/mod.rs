//! Seeded 1 Hz simulation of APs and LPs exchanging signed frames over an
//! in-memory bus with one tick of latency.
//!
//! Each tick runs in a fixed order:
//!
//! 1. deliver every frame sent during the previous tick, in send order;
//! 2. for each UAV in index order: drain battery (unless docked), move,
//!    then run the AP tick with the new telemetry;
//! 3. run every LP tick.
//!
//! A UAV's battery is restored to 100 % the moment it acknowledges
//! `SERVICE_COMPLETE`.

mod config;
pub mod rng;
pub mod trace;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ap_node::{ApConfig, ApNode, ApState, Motion, Telemetry};
use crate::geometry::{nearest_lp, LpInfo, Position};
use crate::lp_node::{LpConfig, LpNode, LpState};
use crate::wire::{
    decode_frame, encode_frame, Keystore, ManualClock, SecretKey, SigningContext, WireError,
};
use crate::{Address, Outbound};

pub use config::{LpPlacement, PlacementKeyword, SimConfig};
pub use rng::{sample_consumption, sample_displacement, GENERATOR_ID};
pub use trace::{Actor, JsonLinesSink, NullSink, TraceEvent, TraceHeader, TraceRecord, TraceSink, VecSink};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("wire error: {0}")]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Pass,
    Fail,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub uav: u8,
    pub t: u64,
    pub battery_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSummary {
    pub sys_id: u8,
    pub initial_battery_pct: f64,
    pub min_battery_pct: f64,
    pub services: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub generator: String,
    pub config: SimConfig,
    pub outcome: Outcome,
    pub uavs: Vec<UavSummary>,
    pub failures: Vec<FailureEvent>,
    pub services_per_lp: BTreeMap<u8, u64>,
    /// Seconds from an AP's first request to its boarding call, per service.
    pub mean_queue_wait_s: f64,
    pub max_queue_wait_s: f64,
    pub messages_sent: u64,
}

impl SimReport {
    pub fn min_battery_pct(&self) -> f64 {
        self.uavs.iter().map(|u| u.min_battery_pct).fold(f64::INFINITY, f64::min)
    }

    pub fn total_services(&self) -> u64 {
        self.services_per_lp.values().sum()
    }
}

const COMP_ID: u8 = 1;
const LINK_ID: u8 = 0;

struct Endpoint {
    signer: SigningContext,
    keystore: Keystore,
    seq: u8,
}

impl Endpoint {
    fn new(key: &SecretKey, clock: &ManualClock) -> Self {
        Self {
            signer: SigningContext::new(LINK_ID, key.clone(), clock.clone()),
            keystore: Keystore::new(true).with_key(LINK_ID, key.clone()),
            seq: 0,
        }
    }
}

struct UavSlot {
    node: ApNode,
    endpoint: Endpoint,
    rng: ChaCha8Rng,
    battery: f64,
    position: Position,
    summary: UavSummary,
    below_fail: bool,
    request_started: Option<u64>,
}

struct LpSlot {
    node: LpNode,
    endpoint: Endpoint,
}

struct InFlight {
    id: u64,
    from: Actor,
    to: Actor,
    frame: Vec<u8>,
}

struct World<'a> {
    cfg: &'a SimConfig,
    uavs: Vec<UavSlot>,
    lps: Vec<LpSlot>,
    in_flight: Vec<InFlight>,
    next_msg_id: u64,
    failures: Vec<FailureEvent>,
    services_per_lp: BTreeMap<u8, u64>,
    waits: Vec<f64>,
    sink: &'a mut dyn TraceSink,
    tracing: bool,
}

/// LP-side parameters implied by a run config.
pub fn lp_config(cfg: &SimConfig) -> LpConfig {
    LpConfig {
        service_duration_s: cfg.service_duration_s,
        alignment_duration_s: cfg.alignment_duration_s,
        boarding_timeout_s: cfg.boarding_timeout_s,
        critical_threshold_pct: cfg.fail_threshold_pct,
        ..LpConfig::default()
    }
}

/// AP-side parameters implied by a run config.
pub fn ap_config(cfg: &SimConfig) -> ApConfig {
    ApConfig {
        request_threshold_pct: cfg.request_threshold_pct,
        reserve_floor_pct: cfg.fail_threshold_pct,
        service_estimate_s: cfg.service_duration_s,
        cruise_speed_m_s: cfg.max_step_m_per_s,
        max_consumption_pct_per_s: cfg.consumption_pct_per_s[1],
        ..ApConfig::default()
    }
}

/// Builds the LP nodes for a run.
pub fn build_lps(cfg: &SimConfig) -> Vec<LpNode> {
    let roster = cfg.lp_roster();
    roster.iter().map(|lp| LpNode::new(lp.sys_id, lp.position, lp_config(cfg), roster.clone())).collect()
}

/// Builds the AP node for UAV `index` at the given starting state.
pub fn build_ap(cfg: &SimConfig, index: usize, position: Position, battery_pct: f64) -> ApNode {
    ApNode::new(cfg.uav_sys_id(index), ap_config(cfg), cfg.lp_roster(), position, battery_pct)
}

/// Initial battery and a spawn point uniform in the disk around the UAV's
/// home LP (LP `index mod n_lps`). Consumes three draws from the UAV stream.
fn spawn(cfg: &SimConfig, roster: &[LpInfo], index: usize, rng: &mut ChaCha8Rng) -> (f64, Position) {
    let [bmin, bmax] = cfg.initial_battery_pct;
    let battery = bmin + (bmax - bmin) * rng.random::<f64>();
    let home = roster[index % roster.len()].position;
    let r = cfg.spawn_radius_m * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    let pos = Position::new(home.x + r * theta.cos(), home.y + r * theta.sin())
        .clamp_to(cfg.area_m[0], cfg.area_m[1]);
    (battery, pos)
}

fn network_key(seed: u64) -> SecretKey {
    let mut rng = rng::network_stream(seed);
    let mut key = [0u8; 32];
    rng.fill(&mut key);
    SecretKey::new(key)
}

impl World<'_> {
    fn emit(&mut self, t: u64, actor: Actor, event: TraceEvent) {
        if self.tracing {
            self.sink.record(TraceRecord { t, actor, event });
        }
    }

    fn endpoint_mut(&mut self, actor: Actor) -> Option<&mut Endpoint> {
        let n_lps = self.cfg.n_lps;
        match actor {
            Actor::Lp(id) => self.lps.get_mut(id as usize - 1).map(|s| &mut s.endpoint),
            Actor::Ap(id) => self.uavs.get_mut(id as usize - n_lps - 1).map(|s| &mut s.endpoint),
        }
    }

    fn resolve(&self, from: Actor, to: Address) -> Vec<Actor> {
        match (to, from) {
            (Address::Broadcast, Actor::Ap(_)) => self.lps.iter().map(|l| Actor::Lp(l.node.sys_id)).collect(),
            (Address::Broadcast, Actor::Lp(_)) => self.uavs.iter().map(|u| Actor::Ap(u.node.sys_id)).collect(),
            (Address::System(id), _) => {
                let id = id as usize;
                if (1..=self.cfg.n_lps).contains(&id) {
                    vec![Actor::Lp(id as u8)]
                } else if id > self.cfg.n_lps && id <= self.cfg.n_lps + self.cfg.n_uavs {
                    vec![Actor::Ap(id as u8)]
                } else {
                    log::warn!("{from} addressed unknown system {id}");
                    Vec::new()
                }
            }
        }
    }

    fn send(&mut self, t: u64, from: Actor, outbound: Vec<Outbound>) -> Result<(), SimError> {
        for out in outbound {
            for to in self.resolve(from, out.to) {
                let ep = self.endpoint_mut(from).expect("sender exists");
                let frame = encode_frame(&out.message, ep.seq, from.sys_id(), COMP_ID, Some(&mut ep.signer))?;
                ep.seq = ep.seq.wrapping_add(1);
                let id = self.next_msg_id;
                self.next_msg_id += 1;
                self.emit(t, from, TraceEvent::MsgSent { id, to, message: out.message });
                self.in_flight.push(InFlight { id, from, to, frame });
            }
        }
        Ok(())
    }

    fn deliver(&mut self, t: u64) -> Result<(), SimError> {
        let now = t as f64;
        for msg in std::mem::take(&mut self.in_flight) {
            let ep = self.endpoint_mut(msg.to).expect("recipient exists");
            let frame = match decode_frame(&msg.frame, Some(&mut ep.keystore)) {
                Ok(f) => f,
                Err(e) => {
                    log::error!("{} dropped frame {} from {}: {e}", msg.to, msg.id, msg.from);
                    continue;
                }
            };
            self.emit(t, msg.to, TraceEvent::MsgRecv { id: msg.id, from: msg.from, message: frame.message });
            let sender = frame.header.sys_id;
            let out = match msg.to {
                Actor::Lp(id) => self.lps[id as usize - 1].node.handle_message(&frame.message, sender, now),
                Actor::Ap(id) => {
                    self.uavs[id as usize - self.cfg.n_lps - 1].node.handle_message(&frame.message, sender, now)
                }
            };
            self.send(t, msg.to, out)?;
        }
        Ok(())
    }

    fn flush_transitions(&mut self, t: u64) {
        for i in 0..self.uavs.len() {
            let transitions = self.uavs[i].node.drain_transitions();
            let actor = Actor::Ap(self.uavs[i].node.sys_id);
            for tr in transitions {
                let slot = &mut self.uavs[i];
                match (tr.from, tr.to) {
                    (ApState::Operating, ApState::RequestPending) => slot.request_started = Some(t),
                    (_, ApState::Boarding) => {
                        if let Some(start) = slot.request_started.take() {
                            self.waits.push((t - start) as f64);
                        }
                    }
                    (ApState::BeingServiced, ApState::Departing) => {
                        slot.battery = 100.0;
                        slot.below_fail = false;
                        slot.summary.services += 1;
                    }
                    _ => {}
                }
                self.emit(t, actor, TraceEvent::StateChange { from: tr.from.code(), to: tr.to.code() });
            }
        }
        for i in 0..self.lps.len() {
            let transitions = self.lps[i].node.drain_transitions();
            let id = self.lps[i].node.sys_id;
            for tr in transitions {
                if tr.to == LpState::Releasing {
                    *self.services_per_lp.entry(id).or_default() += 1;
                }
                self.emit(t, Actor::Lp(id), TraceEvent::StateChange { from: tr.from.code(), to: tr.to.code() });
            }
        }
    }

    fn step_uavs(&mut self, t: u64) -> Result<(), SimError> {
        let now = t as f64;
        let [cmin, cmax] = self.cfg.consumption_pct_per_s;
        let [w, h] = self.cfg.area_m;
        let max_step = self.cfg.max_step_m_per_s;
        let fail = self.cfg.fail_threshold_pct;
        for i in 0..self.uavs.len() {
            let slot = &mut self.uavs[i];
            if !slot.node.state().is_docked() {
                let c = sample_consumption(&mut slot.rng, cmin, cmax);
                slot.battery = (slot.battery - c).max(0.0);
            }
            slot.position = match slot.node.motion() {
                Motion::Wander => {
                    let (dx, dy) = sample_displacement(&mut slot.rng, max_step);
                    Position::new(slot.position.x + dx, slot.position.y + dy).clamp_to(w, h)
                }
                Motion::Toward(target) => slot.position.step_toward(&target, max_step).clamp_to(w, h),
                Motion::Hold => slot.position,
            };
            slot.summary.min_battery_pct = slot.summary.min_battery_pct.min(slot.battery);
            let (battery, position, sys_id) = (slot.battery, slot.position, slot.node.sys_id);
            let newly_failed = battery < fail && !slot.below_fail;
            slot.below_fail = battery < fail;

            let actor = Actor::Ap(sys_id);
            self.emit(t, actor, TraceEvent::Battery { battery_pct: battery, x: position.x, y: position.y });
            if newly_failed {
                self.failures.push(FailureEvent { uav: sys_id, t, battery_pct: battery });
                self.emit(t, actor, TraceEvent::Failure { battery_pct: battery });
            }
            let out = self.uavs[i].node.tick(now, Telemetry { battery_pct: battery, position });
            self.send(t, actor, out)?;
        }
        Ok(())
    }

    fn step_lps(&mut self, t: u64) -> Result<(), SimError> {
        for i in 0..self.lps.len() {
            let out = self.lps[i].node.tick(t as f64);
            let node = &self.lps[i].node;
            let actor = Actor::Lp(node.sys_id);
            let event = TraceEvent::Tick { state: node.state().code(), queue_len: node.queue().len() };
            self.emit(t, actor, event);
            self.send(t, actor, out)?;
        }
        Ok(())
    }
}

/// Runs a simulation, streaming trace records into `sink`.
pub fn run_sim_with_sink(cfg: &SimConfig, sink: &mut dyn TraceSink) -> Result<SimReport, SimError> {
    cfg.validate()?;
    let roster = cfg.lp_roster();
    let clock = ManualClock::default();
    let key = network_key(cfg.seed);

    let lps = build_lps(cfg)
        .into_iter()
        .map(|node| LpSlot { node, endpoint: Endpoint::new(&key, &clock) })
        .collect();
    let uavs = (0..cfg.n_uavs)
        .map(|i| {
            let mut rng = rng::uav_stream(cfg.seed, i);
            let (battery, position) = spawn(cfg, &roster, i, &mut rng);
            let node = build_ap(cfg, i, position, battery);
            UavSlot {
                summary: UavSummary {
                    sys_id: node.sys_id,
                    initial_battery_pct: battery,
                    min_battery_pct: battery,
                    services: 0,
                },
                node,
                endpoint: Endpoint::new(&key, &clock),
                rng,
                battery,
                position,
                below_fail: battery < cfg.fail_threshold_pct,
                request_started: None,
            }
        })
        .collect();

    let tracing = sink.enabled();
    if tracing {
        sink.header(&TraceHeader {
            format: trace::TRACE_FORMAT.to_string(),
            generator: GENERATOR_ID.to_string(),
            config: cfg.clone(),
        });
    }
    let mut world = World {
        cfg,
        uavs,
        lps,
        in_flight: Vec::new(),
        next_msg_id: 0,
        failures: Vec::new(),
        services_per_lp: roster.iter().map(|lp| (lp.sys_id, 0)).collect(),
        waits: Vec::new(),
        sink,
        tracing,
    };

    for t in 1..=cfg.duration_s {
        clock.set_seconds(t as f64);
        world.deliver(t)?;
        world.flush_transitions(t);
        world.step_uavs(t)?;
        world.flush_transitions(t);
        world.step_lps(t)?;
        world.flush_transitions(t);
    }

    let waits = &world.waits;
    let mean_wait = if waits.is_empty() { 0.0 } else { waits.iter().sum::<f64>() / waits.len() as f64 };
    let max_wait = waits.iter().copied().fold(0.0, f64::max);
    let outcome = if world.uavs.iter().any(|u| u.summary.min_battery_pct < cfg.fail_threshold_pct) {
        Outcome::Fail
    } else {
        Outcome::Pass
    };
    Ok(SimReport {
        generator: GENERATOR_ID.to_string(),
        config: cfg.clone(),
        outcome,
        uavs: world.uavs.iter().map(|u| u.summary.clone()).collect(),
        failures: world.failures,
        services_per_lp: world.services_per_lp,
        mean_queue_wait_s: mean_wait,
        max_queue_wait_s: max_wait,
        messages_sent: world.next_msg_id,
    })
}

/// Runs a simulation and collects its trace in memory.
pub fn run_sim(cfg: &SimConfig) -> Result<(SimReport, Vec<TraceRecord>), SimError> {
    let mut sink = VecSink::default();
    let report = run_sim_with_sink(cfg, &mut sink)?;
    Ok((report, sink.records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub outcome: Outcome,
    pub min_battery_pct: f64,
    pub services: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SimConfig,
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    pub fn passes(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome == Outcome::Pass).count()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.runs.is_empty() {
            0.0
        } else {
            self.passes() as f64 / self.runs.len() as f64
        }
    }

    /// Per-run minimum battery, sorted ascending.
    pub fn min_battery_distribution(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.runs.iter().map(|r| r.min_battery_pct).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Runs `seeds` consecutive seeds starting at `cfg.seed`, without tracing.
pub fn sweep(cfg: &SimConfig, seeds: u64) -> Result<SweepReport, SimError> {
    let runs = (0..seeds)
        .map(|k| {
            let run_cfg = SimConfig { seed: cfg.seed.wrapping_add(k), ..cfg.clone() };
            let report = run_sim_with_sink(&run_cfg, &mut NullSink)?;
            Ok(SweepRun {
                seed: run_cfg.seed,
                outcome: report.outcome,
                min_battery_pct: report.min_battery_pct(),
                services: report.total_services(),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepReport { config: cfg.clone(), runs })
}

/// Home LP of a UAV: the one it spawns around.
pub fn home_lp(cfg: &SimConfig, index: usize) -> LpInfo {
    let roster = cfg.lp_roster();
    roster[index % roster.len()]
}

/// LP nearest to a point under the run's roster.
pub fn nearest_lp_in(cfg: &SimConfig, at: &Position) -> Option<LpInfo> {
    nearest_lp(&cfg.lp_roster(), at)
}
