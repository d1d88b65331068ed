//! Local steering beneath graph hops: breadth-first planning over the
//! cells the agent has actually seen this episode, one-cell frontier
//! included, with replanning when an assumed-passable cell turns out to
//! be a wall.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::grid::{Cell, ElementaryAction, Heading};
use crate::scalar::Real;
use crate::simenv::{step_elementary, AgentPose, GridScene};

/// What the agent knows about traversability this episode: cells it has
/// occupied and cells where a forward bump revealed a wall.
#[derive(Debug, Clone, Default)]
pub struct NavMemory {
    visited: BTreeSet<Cell>,
    blocked: BTreeSet<Cell>,
}

impl NavMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn visited(&self) -> &BTreeSet<Cell> {
        &self.visited
    }

    pub fn note_visited(&mut self, cell: Cell) {
        self.visited.insert(cell);
    }

    pub fn note_blocked(&mut self, cell: Cell) {
        self.blocked.insert(cell);
    }

    /// Traversable as far as the agent knows: a visited cell, or an
    /// unbumped neighbor of one (the frontier, assumed passable).
    fn known_traversable(&self, cell: Cell) -> bool {
        if self.blocked.contains(&cell) {
            return false;
        }
        self.visited.contains(&cell)
            || cell.neighbors4().iter().any(|n| self.visited.contains(n))
    }
}

/// Signal a per-step hook returns to the steering loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepSignal {
    Continue,
    /// End the macro now (subgoal reached or episode done).
    Stop,
}

/// Breadth-first plan over known-traversable cells. Aims for a known cell
/// within `radius` of `target` when one is reachable; otherwise falls
/// back to frontier exploration: the unvisited reachable cell closest to
/// the target by Manhattan distance (which, unlike Chebyshev, improves on
/// every axis-aligned step). Ties prefer smaller depth, then row-major
/// cell order. Returns the cell path excluding `from`; `None` when
/// nothing is left to try.
fn plan_path(memory: &NavMemory, from: Cell, target: Cell, radius: u32) -> Option<Vec<Cell>> {
    let mut parent: BTreeMap<Cell, Cell> = BTreeMap::new();
    let mut depth: BTreeMap<Cell, u32> = BTreeMap::new();
    let mut queue = VecDeque::new();
    depth.insert(from, 0);
    queue.push_back(from);
    while let Some(c) = queue.pop_front() {
        let d = depth[&c];
        for n in c.neighbors4() {
            if depth.contains_key(&n) || !memory.known_traversable(n) {
                continue;
            }
            depth.insert(n, d + 1);
            parent.insert(n, c);
            queue.push_back(n);
        }
    }

    let ring = depth
        .keys()
        .filter(|&&c| c != from && c.chebyshev(target) <= radius)
        .min_by_key(|&&c| (depth[&c], c.y, c.x));
    let goal = match ring {
        Some(&g) => g,
        // Visiting the chosen frontier cell (or bumping into it) always
        // shrinks the candidate set, so replanning cannot cycle.
        None => *depth
            .keys()
            .filter(|&&c| c != from && !memory.visited.contains(&c))
            .min_by_key(|&&c| (c.manhattan(target), depth[&c], c.y, c.x))?,
    };

    let mut path = vec![goal];
    let mut c = goal;
    while let Some(&p) = parent.get(&c) {
        if p == from {
            break;
        }
        path.push(p);
        c = p;
    }
    path.reverse();
    Some(path)
}

/// One turn toward `desired`, or forward when already aligned. Two-step
/// reversals turn right first.
fn align_or_advance(current: Heading, desired: Heading) -> ElementaryAction {
    let diff = (desired.index() + 4 - current.index()) % 4;
    match diff {
        0 => ElementaryAction::Forward,
        3 => ElementaryAction::TurnLeft,
        _ => ElementaryAction::TurnRight,
    }
}

/// Core steering loop. Executes elementary actions toward `target` until
/// within `radius` of it, the budget runs out, no known cell improves on
/// the current one, or the hook says stop. The hook runs after every
/// executed action and sees the action, the new pose, and the running
/// step count.
pub(crate) fn steer_with<T, F>(
    scene: &GridScene<T>,
    memory: &mut NavMemory,
    pose: &mut AgentPose,
    target: Cell,
    radius: u32,
    budget: u32,
    hook: &mut F,
) -> (u32, bool)
where
    T: Real,
    F: FnMut(ElementaryAction, AgentPose, u32) -> StepSignal,
{
    memory.note_visited(pose.cell);
    let mut steps = 0u32;
    let mut plan: Vec<Cell> = Vec::new();
    loop {
        if pose.cell.chebyshev(target) <= radius {
            return (steps, true);
        }
        if steps >= budget {
            return (steps, false);
        }
        if plan.is_empty() {
            match plan_path(memory, pose.cell, target, radius) {
                Some(p) => plan = p,
                None => return (steps, false),
            }
        }
        let next = plan[0];
        debug_assert_eq!(pose.cell.chebyshev(next), 1);
        let desired = Heading::towards(pose.cell, next).expect("plan steps are 4-adjacent");
        let action = align_or_advance(pose.heading, desired);
        let before = pose.cell;
        *pose = step_elementary(scene, *pose, action);
        steps += 1;
        if action == ElementaryAction::Forward {
            if pose.cell == before {
                // Bumped a wall the frontier assumed passable: remember and
                // replan around it.
                memory.note_blocked(next);
                plan.clear();
            } else {
                memory.note_visited(pose.cell);
                plan.remove(0);
            }
        }
        if hook(action, *pose, steps) == StepSignal::Stop {
            return (steps, false);
        }
    }
}

/// Steer toward `target` over known cells. Returns the final pose, the
/// elementary steps taken, and whether the agent got within `radius` of
/// the target. `reached == false` is the failure signal; nothing panics.
pub fn steer_local<T: Real>(
    scene: &GridScene<T>,
    memory: &mut NavMemory,
    pose: AgentPose,
    target: Cell,
    radius: u32,
    budget: u32,
) -> (AgentPose, u32, bool) {
    assert!(budget > 0, "steering budget must be positive");
    let mut pose = pose;
    let (steps, reached) = steer_with(
        scene,
        memory,
        &mut pose,
        target,
        radius,
        budget,
        &mut |_, _, _| StepSignal::Continue,
    );
    (pose, steps, reached)
}
