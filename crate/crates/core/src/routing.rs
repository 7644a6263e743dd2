//! Multi-hop routes across the LP network.
//!
//! Two LPs are adjacent when they are within the safe range of each other
//! and the pair is not listed as obstructed. Routes use the fewest hops;
//! among those, the one whose shortest hop is longest wins, so each leg
//! reaches as far as the range allows. Remaining ties go to the
//! lexicographically smallest id sequence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::geometry::{LpInfo, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("unknown LP {0}")]
    UnknownNode(u8),
    #[error("no route from LP {from} to LP {to} within range")]
    Unreachable { from: u8, to: u8 },
}

#[derive(Debug, Clone, Default)]
pub struct LpGraph {
    nodes: BTreeMap<u8, Position>,
    obstructed: BTreeSet<(u8, u8)>,
}

fn edge_key(a: u8, b: u8) -> (u8, u8) {
    (a.min(b), a.max(b))
}

impl LpGraph {
    pub fn new(lps: impl IntoIterator<Item = LpInfo>) -> Self {
        Self { nodes: lps.into_iter().map(|lp| (lp.sys_id, lp.position)).collect(), obstructed: BTreeSet::new() }
    }

    /// Removes the (undirected) edge between `a` and `b`.
    pub fn obstruct(&mut self, a: u8, b: u8) {
        self.obstructed.insert(edge_key(a, b));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: u8) -> Option<Position> {
        self.nodes.get(&id).copied()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.nodes.keys().copied()
    }

    pub fn distance(&self, a: u8, b: u8) -> Option<f64> {
        Some(self.position(a)?.distance(&self.position(b)?))
    }

    pub fn has_edge(&self, a: u8, b: u8, safe_range_m: f64) -> bool {
        a != b
            && !self.obstructed.contains(&edge_key(a, b))
            && self.distance(a, b).is_some_and(|d| d <= safe_range_m)
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, id: u8, safe_range_m: f64) -> impl Iterator<Item = u8> + '_ {
        self.nodes.keys().copied().filter(move |&v| self.has_edge(id, v, safe_range_m))
    }

    /// Hop distance from every reachable node to `dst`.
    fn hops_to(&self, dst: u8, safe_range_m: f64) -> BTreeMap<u8, usize> {
        let mut hops = BTreeMap::from([(dst, 0usize)]);
        let mut frontier = VecDeque::from([dst]);
        while let Some(u) = frontier.pop_front() {
            let d = hops[&u];
            for v in self.neighbors(u, safe_range_m) {
                hops.entry(v).or_insert_with(|| {
                    frontier.push_back(v);
                    d + 1
                });
            }
        }
        hops
    }

    pub fn plan_route(&self, src: u8, dst: u8, safe_range_m: f64) -> Result<Vec<u8>, RouteError> {
        for id in [src, dst] {
            if !self.nodes.contains_key(&id) {
                return Err(RouteError::UnknownNode(id));
            }
        }
        if src == dst {
            return Ok(vec![src]);
        }
        let hops = self.hops_to(dst, safe_range_m);
        let Some(&total) = hops.get(&src) else {
            return Err(RouteError::Unreachable { from: src, to: dst });
        };

        // Best achievable shortest-hop length from each node to dst along a
        // minimum-hop path. Fill in order of increasing hop distance.
        let mut by_layer: Vec<Vec<u8>> = vec![Vec::new(); total + 1];
        for (&id, &h) in &hops {
            if h <= total {
                by_layer[h].push(id);
            }
        }
        let mut bottleneck: BTreeMap<u8, f64> = BTreeMap::from([(dst, f64::INFINITY)]);
        for (layer, nodes) in by_layer.iter().enumerate().skip(1) {
            for &u in nodes {
                let best = self
                    .neighbors(u, safe_range_m)
                    .filter(|v| hops.get(v) == Some(&(layer - 1)))
                    .map(|v| self.distance(u, v).expect("known").min(bottleneck[&v]))
                    .fold(f64::NEG_INFINITY, f64::max);
                bottleneck.insert(u, best);
            }
        }

        // Walk forward taking the smallest id that still achieves the optimum.
        let target = bottleneck[&src];
        let mut route = vec![src];
        let mut u = src;
        while u != dst {
            let layer = hops[&u];
            u = self
                .neighbors(u, safe_range_m)
                .find(|&v| {
                    hops.get(&v) == Some(&(layer - 1))
                        && self.distance(u, v).expect("known") >= target
                        && bottleneck[&v] >= target
                })
                .expect("an optimal successor exists");
            route.push(u);
        }
        Ok(route)
    }

    /// LPs within `safe_range_m` of `from`, nearest first (ties by id).
    pub fn reachable_lps(&self, from: &Position, safe_range_m: f64) -> Vec<u8> {
        let mut within: Vec<(f64, u8)> = self
            .nodes
            .iter()
            .map(|(&id, p)| (p.distance(from), id))
            .filter(|&(d, _)| d <= safe_range_m)
            .collect();
        within.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        within.into_iter().map(|(_, id)| id).collect()
    }
}
