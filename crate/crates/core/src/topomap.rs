//! Topological map over detected objects: nodes hold a position, the
//! first-seen appearance patch, and an explored flag; undirected edges
//! hold the cheapest realized traversal cost in elementary steps.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::grid::Cell;
use crate::scalar::Real;
use crate::simenv::{AgentPose, AppearancePatch, Detection, FormatError};

/// Dense, stable node identifier: creation order, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("traversal from node {0} to itself")]
    SelfEdge(NodeId),
    #[error("empty map")]
    EmptyMap,
}

/// One mapped object.
#[derive(Debug, Clone, PartialEq)]
pub struct MapNode<T: Real> {
    pub id: NodeId,
    pub cell: Cell,
    pub appearance: AppearancePatch<T>,
    pub explored: bool,
}

/// Distance thresholds, in cells (Chebyshev).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapConfig {
    /// A detection closer than this to an existing node merges into it.
    pub merge_radius: u32,
    /// Standing within this distance of a node marks it explored.
    pub explored_radius: u32,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            merge_radius: 1,
            explored_radius: 1,
        }
    }
}

/// Object-node graph built during an episode. Single-writer: one episode
/// runner owns and mutates it.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoMap<T: Real> {
    nodes: Vec<MapNode<T>>,
    /// Keyed by (min, max): one entry per unordered pair.
    edges: BTreeMap<(NodeId, NodeId), u32>,
    cfg: MapConfig,
}

fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl<T: Real> TopoMap<T> {
    pub fn new(cfg: MapConfig) -> Self {
        Self {
            nodes: Vec::new(),
            edges: BTreeMap::new(),
            cfg,
        }
    }

    pub fn config(&self) -> MapConfig {
        self.cfg
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> &[MapNode<T>] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&MapNode<T>> {
        self.nodes.get(id.0 as usize)
    }

    /// Edges as (a, b, cost) with a < b, in key order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, u32)> + '_ {
        self.edges.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    pub fn edge_cost(&self, a: NodeId, b: NodeId) -> Option<u32> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    /// Neighbors of `id` with edge costs, ascending by neighbor id.
    pub fn neighbors(&self, id: NodeId) -> Vec<(NodeId, u32)> {
        let mut out: Vec<(NodeId, u32)> = self
            .edges
            .iter()
            .filter_map(|(&(a, b), &c)| {
                if a == id {
                    Some((b, c))
                } else if b == id {
                    Some((a, c))
                } else {
                    None
                }
            })
            .collect();
        out.sort_by_key(|&(n, _)| n);
        out
    }

    /// Fold a batch of detections into the map. A detection strictly
    /// closer than `merge_radius` to an existing node (smallest id on
    /// ties) resolves to that node; otherwise it becomes a new unexplored
    /// node holding the detection's position and appearance. Returns one
    /// id per detection, in order.
    pub fn integrate_observation(&mut self, detections: &[Detection<T>]) -> Vec<NodeId> {
        detections
            .iter()
            .map(|det| {
                let existing = self
                    .nodes
                    .iter()
                    .find(|n| n.cell.chebyshev(det.position) < self.cfg.merge_radius)
                    .map(|n| n.id);
                existing.unwrap_or_else(|| {
                    let id = NodeId(self.nodes.len() as u32);
                    self.nodes.push(MapNode {
                        id,
                        cell: det.position,
                        appearance: det.appearance.clone(),
                        explored: false,
                    });
                    id
                })
            })
            .collect()
    }

    /// Flag every node within `explored_radius` of the agent as explored.
    /// Returns the ids that flipped on this call; the flag never clears.
    pub fn mark_explored(&mut self, pose: AgentPose) -> Vec<NodeId> {
        self.nodes
            .iter_mut()
            .filter(|n| !n.explored && n.cell.chebyshev(pose.cell) <= self.cfg.explored_radius)
            .map(|n| {
                n.explored = true;
                n.id
            })
            .collect()
    }

    /// Record a realized traversal of `steps` elementary actions between
    /// two distinct nodes. The undirected edge keeps the minimum cost seen;
    /// returns whether the adjacency changed.
    pub fn record_traversal(
        &mut self,
        from: NodeId,
        to: NodeId,
        steps: u32,
    ) -> Result<bool, MapError> {
        assert!(steps >= 1, "traversal cost must be positive");
        if from == to {
            return Err(MapError::SelfEdge(from));
        }
        for id in [from, to] {
            if self.node(id).is_none() {
                return Err(MapError::UnknownNode(id));
            }
        }
        let entry = self.edges.entry(edge_key(from, to)).or_insert(u32::MAX);
        if steps < *entry {
            *entry = steps;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Node minimizing Chebyshev distance to `cell`; ties go to the
    /// smallest id.
    pub fn nearest_node(&self, cell: Cell) -> Result<NodeId, MapError> {
        self.nodes
            .iter()
            .min_by_key(|n| (n.cell.chebyshev(cell), n.id))
            .map(|n| n.id)
            .ok_or(MapError::EmptyMap)
    }

    /// Ids of unexplored nodes, ascending.
    pub fn unexplored_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| !n.explored)
            .map(|n| n.id)
            .collect()
    }
}

pub fn map_to_string<T: Real>(map: &TopoMap<T>) -> String {
    let mut out = format!(
        "topomap v1 {} {} {} {}\n",
        map.len(),
        map.n_edges(),
        map.cfg.merge_radius,
        map.cfg.explored_radius
    );
    for n in map.nodes() {
        out.push_str(&format!(
            "node {} {} {} {} {}\n",
            n.id,
            n.cell.x,
            n.cell.y,
            u8::from(n.explored),
            n.appearance.to_hex()
        ));
    }
    for (a, b, cost) in map.edges() {
        out.push_str(&format!("edge {a} {b} {cost}\n"));
    }
    out
}

pub fn map_from_str<T: Real>(text: &str) -> Result<TopoMap<T>, FormatError> {
    let parse_err = |line: usize, msg: String| FormatError::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hno, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty input".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 6 || head[0] != "topomap" || head[1] != "v1" {
        return Err(parse_err(
            hno,
            "expected `topomap v1 <n_nodes> <n_edges> <merge_radius> <explored_radius>`".into(),
        ));
    }
    let num = |s: &str| -> Result<u32, FormatError> {
        s.parse()
            .map_err(|_| parse_err(hno, format!("bad number `{s}`")))
    };
    let (n_nodes, n_edges) = (num(head[2])?, num(head[3])?);
    let cfg = MapConfig {
        merge_radius: num(head[4])?,
        explored_radius: num(head[5])?,
    };

    let mut map = TopoMap::new(cfg);
    for (no, line) in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "node" => {
                if tok.len() != 6 {
                    return Err(parse_err(no, "expected `node <id> <x> <y> <0|1> <hex>`".into()));
                }
                let id: u32 = tok[1]
                    .parse()
                    .map_err(|_| parse_err(no, format!("bad id `{}`", tok[1])))?;
                if id as usize != map.nodes.len() {
                    return Err(parse_err(no, format!("node id {id} out of order")));
                }
                let coord = |s: &str| -> Result<i32, FormatError> {
                    s.parse()
                        .map_err(|_| parse_err(no, format!("bad coordinate `{s}`")))
                };
                let explored = match tok[4] {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(no, format!("bad explored flag `{other}`"))),
                };
                let appearance = AppearancePatch::from_hex(tok[5])
                    .ok_or_else(|| parse_err(no, "bad patch hex".into()))?;
                map.nodes.push(MapNode {
                    id: NodeId(id),
                    cell: Cell::new(coord(tok[2])?, coord(tok[3])?),
                    appearance,
                    explored,
                });
            }
            "edge" => {
                if tok.len() != 4 {
                    return Err(parse_err(no, "expected `edge <a> <b> <cost>`".into()));
                }
                let id = |s: &str| -> Result<NodeId, FormatError> {
                    s.parse()
                        .map(NodeId)
                        .map_err(|_| parse_err(no, format!("bad id `{s}`")))
                };
                let cost: u32 = tok[3]
                    .parse()
                    .ok()
                    .filter(|&c| c >= 1)
                    .ok_or_else(|| parse_err(no, format!("bad cost `{}`", tok[3])))?;
                let (a, b) = (id(tok[1])?, id(tok[2])?);
                map.record_traversal(a, b, cost)
                    .map_err(|e| parse_err(no, e.to_string()))?;
            }
            other => return Err(parse_err(no, format!("unknown record `{other}`"))),
        }
    }

    if map.len() != n_nodes as usize {
        return Err(parse_err(
            0,
            format!("header declares {n_nodes} nodes, found {}", map.len()),
        ));
    }
    if map.n_edges() != n_edges as usize {
        return Err(parse_err(
            0,
            format!("header declares {n_edges} edges, found {}", map.n_edges()),
        ));
    }
    Ok(map)
}

pub fn save_map<T: Real>(map: &TopoMap<T>, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, map_to_string(map))?;
    Ok(())
}

pub fn load_map<T: Real>(path: &Path) -> Result<TopoMap<T>, FormatError> {
    map_from_str(&std::fs::read_to_string(path)?)
}
