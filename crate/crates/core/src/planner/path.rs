//! Shortest paths over map edges with a deterministic lexicographic
//! tie-break.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::scalar::Real;
use crate::topomap::{MapError, NodeId, TopoMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no path from node {0} to node {1}")]
    Unreachable(NodeId, NodeId),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Minimum-total-cost node sequence from `from` to `to` over map edges.
/// Among equal-cost paths the lexicographically smallest id sequence wins;
/// `from == to` yields the single-element path.
pub fn shortest_path<T: Real>(
    map: &TopoMap<T>,
    from: NodeId,
    to: NodeId,
) -> Result<Vec<NodeId>, PlanError> {
    for id in [from, to] {
        if map.node(id).is_none() {
            return Err(MapError::UnknownNode(id).into());
        }
    }
    if from == to {
        return Ok(vec![from]);
    }

    // Distance-to-target field (edges are undirected, so one Dijkstra
    // rooted at `to` serves every source).
    let mut dist: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(to, 0);
    heap.push(Reverse((0u64, to)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist.get(&u).is_some_and(|&best| d > best) {
            continue;
        }
        for (v, w) in map.neighbors(u) {
            let nd = d + w as u64;
            if dist.get(&v).is_none_or(|&best| nd < best) {
                dist.insert(v, nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }

    let total = *dist.get(&from).ok_or(PlanError::Unreachable(from, to))?;
    // Greedy reconstruction: from each node take the smallest-id neighbor
    // that stays on an optimal path. All continuations through that
    // neighbor are optimal, so the first difference decides lexicographic
    // order. Costs are >= 1, so the remaining distance strictly drops.
    let mut path = vec![from];
    let mut u = from;
    let mut remaining = total;
    while u != to {
        let (v, w) = map
            .neighbors(u)
            .into_iter()
            .find(|&(v, w)| {
                dist.get(&v)
                    .is_some_and(|&dv| w as u64 + dv == remaining)
            })
            .expect("an optimal continuation exists while remaining > 0");
        path.push(v);
        remaining -= w as u64;
        u = v;
    }
    Ok(path)
}
