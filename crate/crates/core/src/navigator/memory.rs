//! Trackback memory: visited landmarks joined by directed edges labeled with
//! the instruction fragment that led from one to the other.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("self-loop on {0:?} rejected")]
    SelfLoop(String),
    #[error("edge cost must be positive and finite, got {0}")]
    BadCost(f64),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no path from {from:?} to {to:?}")]
    NoPath { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryEdge {
    pub from: String,
    pub to: String,
    pub fragment: String,
    /// Path length flown along the edge (m).
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryGraph {
    /// Node name to last known position (if any).
    #[serde(default)]
    pub nodes: BTreeMap<String, Option<Vector3<f64>>>,
    #[serde(default)]
    pub edges: Vec<MemoryEdge>,
    #[serde(default)]
    pub current: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    hops: usize,
    path: Vec<String>,
    edges: Vec<usize>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.hops.cmp(&other.hops))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MemoryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<Vector3<f64>> {
        self.nodes.get(name).copied().flatten()
    }

    /// Adds the node if missing; a known position overwrites an older one.
    pub fn upsert_node(&mut self, name: &str, position: Option<Vector3<f64>>) {
        let slot = self.nodes.entry(name.to_string()).or_insert(None);
        if position.is_some() {
            *slot = position;
        }
    }

    /// Records a traversal. Returns `Ok(false)` if the identical
    /// `(from, to, fragment)` edge already exists.
    pub fn record(&mut self, from: &str, to: &str, fragment: &str, cost: f64) -> Result<bool, MemoryError> {
        if from == to {
            return Err(MemoryError::SelfLoop(from.to_string()));
        }
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(MemoryError::BadCost(cost));
        }
        if self
            .edges
            .iter()
            .any(|e| e.from == from && e.to == to && e.fragment == fragment)
        {
            return Ok(false);
        }
        self.upsert_node(from, None);
        self.upsert_node(to, None);
        self.edges.push(MemoryEdge {
            from: from.to_string(),
            to: to.to_string(),
            fragment: fragment.to_string(),
            cost,
        });
        Ok(true)
    }

    /// Cheapest route from `current` to `target`. Ties go to fewer edges,
    /// then to the lexicographically smaller node sequence.
    pub fn backtrack(&self, current: &str, target: &str) -> Result<Vec<&MemoryEdge>, MemoryError> {
        for n in [current, target] {
            if !self.contains(n) {
                return Err(MemoryError::UnknownNode(n.to_string()));
            }
        }
        let mut best: BTreeMap<&str, Label> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(std::cmp::Reverse(Label {
            cost: 0.0,
            hops: 0,
            path: vec![current.to_string()],
            edges: vec![],
        }));
        while let Some(std::cmp::Reverse(label)) = heap.pop() {
            let node = label.path.last().expect("labels are never empty").clone();
            if best.contains_key(node.as_str()) {
                continue;
            }
            if node == target {
                return Ok(label.edges.iter().map(|&i| &self.edges[i]).collect());
            }
            for (i, e) in self.edges.iter().enumerate().filter(|(_, e)| e.from == node) {
                if best.contains_key(e.to.as_str()) {
                    continue;
                }
                let mut next = label.clone();
                next.cost += e.cost;
                next.hops += 1;
                next.path.push(e.to.clone());
                next.edges.push(i);
                heap.push(std::cmp::Reverse(next));
            }
            let key = self.nodes.get_key_value(node.as_str()).expect("edge endpoints exist").0;
            best.insert(key.as_str(), label);
        }
        Err(MemoryError::NoPath {
            from: current.to_string(),
            to: target.to_string(),
        })
    }
}
