use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{LpInfo, Position};
use crate::routing::LpGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKeyword {
    Auto,
}

/// LP layout: `"auto"` or an explicit list of `[x, y]` positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LpPlacement {
    Keyword(PlacementKeyword),
    Explicit(Vec<[f64; 2]>),
}

impl Default for LpPlacement {
    fn default() -> Self {
        LpPlacement::Keyword(PlacementKeyword::Auto)
    }
}

/// Every tunable of a simulation run. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub area_m: [f64; 2],
    pub n_uavs: usize,
    pub n_lps: usize,
    pub lp_positions: LpPlacement,
    pub spawn_radius_m: f64,
    pub duration_s: u64,
    /// `[min, max]` battery drain per second of flight, in percent.
    pub consumption_pct_per_s: [f64; 2],
    /// `[min, max]` of the uniform initial battery draw, in percent.
    pub initial_battery_pct: [f64; 2],
    pub request_threshold_pct: f64,
    pub fail_threshold_pct: f64,
    pub service_duration_s: f64,
    pub alignment_duration_s: f64,
    pub boarding_timeout_s: f64,
    pub max_step_m_per_s: f64,
    pub safe_range_m: f64,
    /// LP pairs whose direct hop is blocked.
    pub obstructions: Vec<[u8; 2]>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area_m: [1000.0, 1000.0],
            n_uavs: 5,
            n_lps: 1,
            lp_positions: LpPlacement::default(),
            spawn_radius_m: 40.0,
            duration_s: 7200,
            consumption_pct_per_s: [0.15, 0.20],
            initial_battery_pct: [60.0, 100.0],
            request_threshold_pct: 50.0,
            fail_threshold_pct: 15.0,
            service_duration_s: 120.0,
            alignment_duration_s: 10.0,
            boarding_timeout_s: 180.0,
            max_step_m_per_s: 0.3,
            safe_range_m: 60.0,
            obstructions: Vec::new(),
            seed: 1,
        }
    }
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(s).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let [w, h] = self.area_m;
        if !(w > 0.0 && h > 0.0) {
            return Err(invalid("area_m must be positive"));
        }
        if self.n_lps == 0 {
            return Err(invalid("n_lps must be at least 1"));
        }
        if self.n_lps + self.n_uavs > 255 {
            return Err(invalid("n_lps + n_uavs must fit in 255 system ids"));
        }
        let [cmin, cmax] = self.consumption_pct_per_s;
        if !(cmin > 0.0 && cmin <= cmax) {
            return Err(invalid("consumption_pct_per_s needs 0 < min <= max"));
        }
        let [bmin, bmax] = self.initial_battery_pct;
        if !(0.0 <= bmin && bmin <= bmax && bmax <= 100.0) {
            return Err(invalid("initial_battery_pct needs 0 <= min <= max <= 100"));
        }
        if !(self.fail_threshold_pct < self.request_threshold_pct && self.request_threshold_pct <= 100.0) {
            return Err(invalid("need fail_threshold_pct < request_threshold_pct <= 100"));
        }
        for (name, v) in [
            ("spawn_radius_m", self.spawn_radius_m),
            ("service_duration_s", self.service_duration_s),
            ("alignment_duration_s", self.alignment_duration_s),
            ("boarding_timeout_s", self.boarding_timeout_s),
            ("max_step_m_per_s", self.max_step_m_per_s),
            ("safe_range_m", self.safe_range_m),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be a finite non-negative number")));
            }
        }
        if let LpPlacement::Explicit(list) = &self.lp_positions {
            if list.len() != self.n_lps {
                return Err(invalid(format!("lp_positions lists {} LPs but n_lps is {}", list.len(), self.n_lps)));
            }
            if list.iter().any(|&[x, y]| !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y)) {
                return Err(invalid("lp_positions must lie inside area_m"));
            }
        }
        for &[a, b] in &self.obstructions {
            let known = 1..=self.n_lps as u8;
            if !known.contains(&a) || !known.contains(&b) {
                return Err(invalid(format!("obstruction [{a}, {b}] names an unknown LP")));
            }
        }
        Ok(())
    }

    pub fn lp_sys_id(&self, index: usize) -> u8 {
        (index + 1) as u8
    }

    pub fn uav_sys_id(&self, index: usize) -> u8 {
        (self.n_lps + index + 1) as u8
    }

    /// LP roster. `auto` spreads LPs over the centers of a near-square grid.
    pub fn lp_roster(&self) -> Vec<LpInfo> {
        let positions: Vec<Position> = match &self.lp_positions {
            LpPlacement::Explicit(list) => list.iter().map(|&[x, y]| Position::new(x, y)).collect(),
            LpPlacement::Keyword(PlacementKeyword::Auto) => {
                let n = self.n_lps;
                let cols = (n as f64).sqrt().ceil() as usize;
                let rows = n.div_ceil(cols);
                let (cw, ch) = (self.area_m[0] / cols as f64, self.area_m[1] / rows as f64);
                (0..n)
                    .map(|i| Position::new(cw * ((i % cols) as f64 + 0.5), ch * ((i / cols) as f64 + 0.5)))
                    .collect()
            }
        };
        positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| LpInfo { sys_id: self.lp_sys_id(i), position })
            .collect()
    }

    pub fn lp_graph(&self) -> LpGraph {
        let mut g = LpGraph::new(self.lp_roster());
        for &[a, b] in &self.obstructions {
            g.obstruct(a, b);
        }
        g
    }
}
