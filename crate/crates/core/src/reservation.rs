//! The LP's service queue.
//!
//! Reservations are kept sorted by priority (descending), then request time
//! (ascending), then AP system id (ascending). Index 0 is served next.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub ap_sys_id: u8,
    /// 0–100, higher is more urgent.
    pub priority: u8,
    pub requested_at: f64,
}

impl Reservation {
    pub fn new(ap_sys_id: u8, priority: u8, requested_at: f64) -> Self {
        Self { ap_sys_id, priority, requested_at }
    }

    /// Service order: `Less` means `self` is served first.
    pub fn service_order(&self, other: &Reservation) -> Ordering {
        other
            .priority
            .cmp(&self.priority)
            .then(self.requested_at.total_cmp(&other.requested_at))
            .then(self.ap_sys_id.cmp(&other.ap_sys_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("AP {0} already holds a reservation")]
    DuplicateReservation(u8),
    #[error("service queue is empty")]
    EmptyQueue,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceQueue {
    entries: Vec<Reservation>,
}

impl ServiceQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Reservation> {
        self.entries.iter()
    }

    pub fn head(&self) -> Option<&Reservation> {
        self.entries.first()
    }

    pub fn contains(&self, ap_sys_id: u8) -> bool {
        self.position_of(ap_sys_id).is_some()
    }

    /// Inserts at the ordered position and returns it.
    pub fn enqueue(&mut self, r: Reservation) -> Result<usize, QueueError> {
        if self.contains(r.ap_sys_id) {
            return Err(QueueError::DuplicateReservation(r.ap_sys_id));
        }
        let pos = self.entries.partition_point(|e| e.service_order(&r) == Ordering::Less);
        self.entries.insert(pos, r);
        Ok(pos)
    }

    /// Removes the AP's reservation; everything behind it moves up one.
    pub fn cancel(&mut self, ap_sys_id: u8) -> bool {
        match self.position_of(ap_sys_id) {
            Some(i) => {
                self.entries.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn pop_next(&mut self) -> Result<Reservation, QueueError> {
        if self.entries.is_empty() {
            return Err(QueueError::EmptyQueue);
        }
        Ok(self.entries.remove(0))
    }

    pub fn position_of(&self, ap_sys_id: u8) -> Option<usize> {
        self.entries.iter().position(|e| e.ap_sys_id == ap_sys_id)
    }
}
