//! The five AutoServe payloads and their fixed little-endian layouts.
//!
//! Fields are laid out largest-type-first, as MAVLink generators do, and
//! each message's `crc_extra` is derived from that layout.

use serde::{Deserialize, Serialize};

use super::crc::crc_extra;
use super::WireError;

/// Mission-state codes shared by both node kinds and carried in heartbeats
/// and state updates. LP states, AP states and the hand-off events
/// (`ServiceComplete`, `Departed`) share one code space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum NodeState {
    Idle = 0,
    AwaitingBoarding = 1,
    Aligning = 2,
    Servicing = 3,
    Releasing = 4,
    Operating = 10,
    RequestPending = 11,
    ReservedWaiting = 12,
    Boarding = 13,
    Landed = 14,
    BeingServiced = 15,
    Departing = 16,
    ServiceComplete = 20,
    Departed = 21,
}

impl NodeState {
    pub const ALL: [NodeState; 14] = [
        NodeState::Idle,
        NodeState::AwaitingBoarding,
        NodeState::Aligning,
        NodeState::Servicing,
        NodeState::Releasing,
        NodeState::Operating,
        NodeState::RequestPending,
        NodeState::ReservedWaiting,
        NodeState::Boarding,
        NodeState::Landed,
        NodeState::BeingServiced,
        NodeState::Departing,
        NodeState::ServiceComplete,
        NodeState::Departed,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        Self::ALL
            .into_iter()
            .find(|s| s.code() == code)
            .ok_or(WireError::InvalidField { field: "state", value: code as u32 })
    }
}

/// Airframe kind, using MAV_TYPE numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum VehicleType {
    Generic = 0,
    FixedWing = 1,
    Quadrotor = 2,
    GroundStation = 6,
    Hexarotor = 13,
    Octorotor = 14,
}

impl VehicleType {
    pub const ALL: [VehicleType; 6] = [
        VehicleType::Generic,
        VehicleType::FixedWing,
        VehicleType::Quadrotor,
        VehicleType::GroundStation,
        VehicleType::Hexarotor,
        VehicleType::Octorotor,
    ];

    fn from_code(code: u8) -> Result<Self, WireError> {
        Self::ALL
            .into_iter()
            .find(|v| *v as u8 == code)
            .ok_or(WireError::InvalidField { field: "vehicle_type", value: code as u32 })
    }
}

/// Flight software stack, using MAV_AUTOPILOT numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum FlightStack {
    Generic = 0,
    ArduPilot = 3,
    Invalid = 8,
    Px4 = 12,
}

impl FlightStack {
    pub const ALL: [FlightStack; 4] =
        [FlightStack::Generic, FlightStack::ArduPilot, FlightStack::Invalid, FlightStack::Px4];

    fn from_code(code: u8) -> Result<Self, WireError> {
        Self::ALL
            .into_iter()
            .find(|v| *v as u8 == code)
            .ok_or(WireError::InvalidField { field: "flight_stack", value: code as u32 })
    }
}

/// Battery charge in hundredths of a percent (0..=10000).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CentiPercent(u16);

impl CentiPercent {
    pub const MAX: CentiPercent = CentiPercent(10_000);

    pub fn new(raw: u16) -> Result<Self, WireError> {
        if raw > 10_000 {
            return Err(WireError::InvalidField { field: "battery", value: raw as u32 });
        }
        Ok(Self(raw))
    }

    /// Rounds to the nearest centi-percent, clamping into 0–100 %.
    pub fn from_pct(pct: f64) -> Self {
        Self((pct.clamp(0.0, 100.0) * 100.0).round() as u16)
    }

    pub fn raw(self) -> u16 {
        self.0
    }

    pub fn pct(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedHeartbeat {
    pub vehicle_type: VehicleType,
    pub flight_stack: FlightStack,
    pub system_state: NodeState,
    pub battery: CentiPercent,
    pub pos_x: f32,
    pub pos_y: f32,
    /// Carried for MAVLink heartbeat parity; never interpreted.
    pub component_type: u8,
    /// Carried for MAVLink heartbeat parity; never interpreted.
    pub flight_mode: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceReservationRequest {
    pub priority: u8,
    pub target_lp_sys_id: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpReservationConfirmation {
    pub target_ap_sys_id: u8,
    pub queue_position: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum Decision {
    Keep = 0,
    Cancel = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApReservationDecision {
    pub target_lp_sys_id: u8,
    pub decision: Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemStateUpdate {
    pub state: NodeState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    ExtendedHeartbeat(ExtendedHeartbeat),
    ServiceReservationRequest(ServiceReservationRequest),
    LpReservationConfirmation(LpReservationConfirmation),
    ApReservationDecision(ApReservationDecision),
    SystemStateUpdate(SystemStateUpdate),
}

/// Static layout facts for one message kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageSpec {
    pub msg_id: u32,
    pub name: &'static str,
    pub crc_extra: u8,
    /// Untruncated payload length.
    pub wire_len: usize,
}

macro_rules! message_spec {
    ($id:expr, $name:literal, [$(($ty:literal, $field:literal)),* $(,)?], $len:expr) => {
        MessageSpec {
            msg_id: $id,
            name: $name,
            crc_extra: crc_extra($name, &[$(($ty, $field)),*]),
            wire_len: $len,
        }
    };
}

pub const HEARTBEAT_SPEC: MessageSpec = message_spec!(
    42000,
    "AUTOSERVE_HEARTBEAT",
    [
        ("float", "pos_x"),
        ("float", "pos_y"),
        ("uint16_t", "battery_centi_pct"),
        ("uint8_t", "type"),
        ("uint8_t", "autopilot"),
        ("uint8_t", "system_state"),
        ("uint8_t", "component_type"),
        ("uint8_t", "flight_mode"),
    ],
    15
);

pub const REQUEST_SPEC: MessageSpec = message_spec!(
    42001,
    "SERVICE_RESERVATION_REQUEST",
    [("uint8_t", "priority"), ("uint8_t", "target_lp_system")],
    2
);

pub const CONFIRMATION_SPEC: MessageSpec = message_spec!(
    42002,
    "LP_RESERVATION_CONFIRMATION",
    [("uint16_t", "queue_position"), ("uint8_t", "target_ap_system")],
    3
);

pub const DECISION_SPEC: MessageSpec = message_spec!(
    42003,
    "AP_RESERVATION_DECISION",
    [("uint8_t", "target_lp_system"), ("uint8_t", "decision")],
    2
);

pub const STATE_UPDATE_SPEC: MessageSpec =
    message_spec!(42004, "SYSTEM_STATE_UPDATE", [("uint8_t", "state")], 1);

pub const ALL_SPECS: [MessageSpec; 5] =
    [HEARTBEAT_SPEC, REQUEST_SPEC, CONFIRMATION_SPEC, DECISION_SPEC, STATE_UPDATE_SPEC];

pub fn spec_for_id(msg_id: u32) -> Option<&'static MessageSpec> {
    ALL_SPECS.iter().find(|s| s.msg_id == msg_id)
}

fn check_sys_id(field: &'static str, v: u8) -> Result<u8, WireError> {
    if v == 0 {
        Err(WireError::InvalidField { field, value: 0 })
    } else {
        Ok(v)
    }
}

impl Message {
    pub fn spec(&self) -> &'static MessageSpec {
        match self {
            Message::ExtendedHeartbeat(_) => &ALL_SPECS[0],
            Message::ServiceReservationRequest(_) => &ALL_SPECS[1],
            Message::LpReservationConfirmation(_) => &ALL_SPECS[2],
            Message::ApReservationDecision(_) => &ALL_SPECS[3],
            Message::SystemStateUpdate(_) => &ALL_SPECS[4],
        }
    }

    pub fn msg_id(&self) -> u32 {
        self.spec().msg_id
    }

    /// Full, untruncated payload bytes.
    pub fn serialize_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.spec().wire_len);
        match self {
            Message::ExtendedHeartbeat(hb) => {
                out.extend_from_slice(&hb.pos_x.to_le_bytes());
                out.extend_from_slice(&hb.pos_y.to_le_bytes());
                out.extend_from_slice(&hb.battery.raw().to_le_bytes());
                out.push(hb.vehicle_type as u8);
                out.push(hb.flight_stack as u8);
                out.push(hb.system_state.code());
                out.push(hb.component_type);
                out.push(hb.flight_mode);
            }
            Message::ServiceReservationRequest(r) => {
                out.push(r.priority);
                out.push(r.target_lp_sys_id);
            }
            Message::LpReservationConfirmation(c) => {
                out.extend_from_slice(&c.queue_position.to_le_bytes());
                out.push(c.target_ap_sys_id);
            }
            Message::ApReservationDecision(d) => {
                out.push(d.target_lp_sys_id);
                out.push(d.decision as u8);
            }
            Message::SystemStateUpdate(u) => out.push(u.state.code()),
        }
        debug_assert_eq!(out.len(), self.spec().wire_len);
        out
    }

    /// Parses a (possibly truncated) payload; missing trailing bytes read as zero.
    pub fn deserialize_payload(msg_id: u32, payload: &[u8]) -> Result<Message, WireError> {
        let spec = spec_for_id(msg_id).ok_or(WireError::UnknownMsgId(msg_id))?;
        if payload.len() > spec.wire_len {
            return Err(WireError::PayloadLength { msg_id, len: payload.len() });
        }
        let mut buf = [0u8; 255];
        buf[..payload.len()].copy_from_slice(payload);
        let b = &buf[..spec.wire_len];
        let msg = match msg_id {
            42000 => Message::ExtendedHeartbeat(ExtendedHeartbeat {
                pos_x: f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                pos_y: f32::from_le_bytes([b[4], b[5], b[6], b[7]]),
                battery: CentiPercent::new(u16::from_le_bytes([b[8], b[9]]))?,
                vehicle_type: VehicleType::from_code(b[10])?,
                flight_stack: FlightStack::from_code(b[11])?,
                system_state: NodeState::from_code(b[12])?,
                component_type: b[13],
                flight_mode: b[14],
            }),
            42001 => {
                if b[0] > 100 {
                    return Err(WireError::InvalidField { field: "priority", value: b[0] as u32 });
                }
                Message::ServiceReservationRequest(ServiceReservationRequest {
                    priority: b[0],
                    target_lp_sys_id: check_sys_id("target_lp_sys_id", b[1])?,
                })
            }
            42002 => Message::LpReservationConfirmation(LpReservationConfirmation {
                queue_position: u16::from_le_bytes([b[0], b[1]]),
                target_ap_sys_id: check_sys_id("target_ap_sys_id", b[2])?,
            }),
            42003 => Message::ApReservationDecision(ApReservationDecision {
                target_lp_sys_id: check_sys_id("target_lp_sys_id", b[0])?,
                decision: match b[1] {
                    0 => Decision::Keep,
                    1 => Decision::Cancel,
                    v => return Err(WireError::InvalidField { field: "decision", value: v as u32 }),
                },
            }),
            42004 => Message::SystemStateUpdate(SystemStateUpdate { state: NodeState::from_code(b[0])? }),
            _ => unreachable!("spec_for_id covers every id"),
        };
        Ok(msg)
    }

    /// Field list in `name=value` form, used by the frame dump tool.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        match self {
            Message::ExtendedHeartbeat(hb) => vec![
                ("vehicle_type", format!("{:?}", hb.vehicle_type)),
                ("flight_stack", format!("{:?}", hb.flight_stack)),
                ("system_state", format!("{:?}", hb.system_state)),
                ("battery_pct", format!("{:.2}", hb.battery.pct())),
                ("pos_x", hb.pos_x.to_string()),
                ("pos_y", hb.pos_y.to_string()),
                ("component_type", hb.component_type.to_string()),
                ("flight_mode", hb.flight_mode.to_string()),
            ],
            Message::ServiceReservationRequest(r) => vec![
                ("priority", r.priority.to_string()),
                ("target_lp_sys_id", r.target_lp_sys_id.to_string()),
            ],
            Message::LpReservationConfirmation(c) => vec![
                ("target_ap_sys_id", c.target_ap_sys_id.to_string()),
                ("queue_position", c.queue_position.to_string()),
            ],
            Message::ApReservationDecision(d) => vec![
                ("target_lp_sys_id", d.target_lp_sys_id.to_string()),
                ("decision", format!("{:?}", d.decision).to_uppercase()),
            ],
            Message::SystemStateUpdate(u) => vec![("state", format!("{:?}", u.state))],
        }
    }
}

impl From<ExtendedHeartbeat> for Message {
    fn from(m: ExtendedHeartbeat) -> Self {
        Message::ExtendedHeartbeat(m)
    }
}
impl From<ServiceReservationRequest> for Message {
    fn from(m: ServiceReservationRequest) -> Self {
        Message::ServiceReservationRequest(m)
    }
}
impl From<LpReservationConfirmation> for Message {
    fn from(m: LpReservationConfirmation) -> Self {
        Message::LpReservationConfirmation(m)
    }
}
impl From<ApReservationDecision> for Message {
    fn from(m: ApReservationDecision) -> Self {
        Message::ApReservationDecision(m)
    }
}
impl From<SystemStateUpdate> for Message {
    fn from(m: SystemStateUpdate) -> Self {
        Message::SystemStateUpdate(m)
    }
}
