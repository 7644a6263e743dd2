use serde::{Deserialize, Serialize};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves at most `max_step` meters straight toward `target`.
    pub fn step_toward(&self, target: &Position, max_step: f64) -> Position {
        let d = self.distance(target);
        if d <= max_step || d == 0.0 {
            *target
        } else {
            let k = max_step / d;
            Position::new(self.x + (target.x - self.x) * k, self.y + (target.y - self.y) * k)
        }
    }

    pub fn clamp_to(&self, width: f64, height: f64) -> Position {
        Position::new(self.x.clamp(0.0, width), self.y.clamp(0.0, height))
    }
}

/// A landing platform as known to its peers: system id plus fixed position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpInfo {
    pub sys_id: u8,
    pub position: Position,
}

/// Nearest LP to `from` by Euclidean distance, ties by lower `sys_id`.
pub fn nearest_lp<'a, I>(roster: I, from: &Position) -> Option<LpInfo>
where
    I: IntoIterator<Item = &'a LpInfo>,
{
    roster.into_iter().copied().min_by(|a, b| {
        a.position
            .distance(from)
            .total_cmp(&b.position.distance(from))
            .then(a.sys_id.cmp(&b.sys_id))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_toward_stops_at_target() {
        let p = Position::new(0.0, 0.0);
        let t = Position::new(3.0, 4.0);
        let s = p.step_toward(&t, 1.0);
        assert!((s.distance(&p) - 1.0).abs() < 1e-12);
        assert_eq!(p.step_toward(&t, 10.0), t);
    }

    #[test]
    fn nearest_breaks_ties_by_id() {
        let roster = [
            LpInfo { sys_id: 4, position: Position::new(10.0, 0.0) },
            LpInfo { sys_id: 2, position: Position::new(-10.0, 0.0) },
        ];
        assert_eq!(nearest_lp(&roster, &Position::default()).unwrap().sys_id, 2);
        assert!(nearest_lp(&[], &Position::default()).is_none());
    }
}
