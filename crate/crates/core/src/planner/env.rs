//! Episode-scoped macro executor. Owns the map, pose, progress, and
//! steering memory for one episode; translates navigate-to-node macro
//! actions into elementary steps and feeds detections, explored flags,
//! and traversal edges back into the map after every step.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::path::{shortest_path, PlanError};
use super::steer::{steer_with, NavMemory, StepSignal};
use crate::grid::{Cell, ElementaryAction};
use crate::scalar::Real;
use crate::simenv::{
    apply_position_noise, goal_update, observe, step_elementary, AgentPose, GridScene,
    RewardScheme, SensorConfig, TaskProgress,
};
use crate::topomap::{MapConfig, NodeId, TopoMap};

/// A selected macro action: navigate to this map node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroAction {
    pub target: NodeId,
}

/// Everything one finished macro reports back to the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroOutcome<T: Real> {
    pub end_pose: AgentPose,
    pub elementary_steps: u32,
    pub reached: bool,
    pub reward: T,
    pub progress: TaskProgress,
    pub done: bool,
    pub new_node_ids: Vec<NodeId>,
}

/// Result of one cold-start round (scan plus, if needed, random walk).
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome<T: Real> {
    pub elementary_steps: u32,
    pub reward: T,
    pub done: bool,
    pub new_node_ids: Vec<NodeId>,
}

/// Elementary-step budgets bounding a macro: each graph hop gets
/// `steer_budget` steps, as does a whole frontier-mode macro.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroCaps {
    pub steer_budget: u32,
}

impl MacroCaps {
    /// Default budget scaled to the scene: 4 * (width + height).
    pub fn for_scene<T: Real>(scene: &GridScene<T>) -> Self {
        Self {
            steer_budget: 4 * (scene.width() + scene.height()),
        }
    }
}

/// One trace record: episode step counter, pose after the event, label.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub step: u32,
    pub pose: AgentPose,
    pub label: String,
}

/// Per-episode executor state.
pub struct MacroEnv<'a, T: Real> {
    scene: &'a GridScene<T>,
    map: TopoMap<T>,
    pose: AgentPose,
    progress: TaskProgress,
    done: bool,
    memory: NavMemory,
    rng: ChaCha8Rng,
    sensor: SensorConfig,
    scheme: RewardScheme,
    goal_radius: u32,
    caps: MacroCaps,
    total_steps: u32,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a, T: Real> MacroEnv<'a, T> {
    /// Start an episode at the scene's start pose with an empty map. The
    /// agent perceives once from its starting pose before acting.
    pub fn new(
        scene: &'a GridScene<T>,
        map_cfg: MapConfig,
        sensor: SensorConfig,
        scheme: RewardScheme,
        goal_radius: u32,
        caps: MacroCaps,
        rng: ChaCha8Rng,
        record_trace: bool,
    ) -> Self {
        let pose = scene.start_pose();
        let mut env = Self {
            scene,
            map: TopoMap::new(map_cfg),
            pose,
            progress: TaskProgress::default(),
            done: false,
            memory: NavMemory::new(),
            rng,
            sensor,
            scheme,
            goal_radius,
            caps,
            total_steps: 0,
            trace: if record_trace { Some(Vec::new()) } else { None },
        };
        env.memory.note_visited(pose.cell);
        push_trace(&mut env.trace, 0, pose, "start".to_string());
        let mut fresh = BTreeSet::new();
        perceive(
            scene,
            &mut env.map,
            pose,
            &env.sensor,
            &mut env.rng,
            &mut fresh,
            &mut env.trace,
            0,
        );
        env
    }

    pub fn map(&self) -> &TopoMap<T> {
        &self.map
    }

    /// Consume the episode and keep its map (for dump tooling).
    pub fn into_map(self) -> TopoMap<T> {
        self.map
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }

    pub fn progress(&self) -> TaskProgress {
        self.progress
    }

    pub fn done(&self) -> bool {
        self.done
    }

    /// Elementary steps taken so far this episode.
    pub fn total_steps(&self) -> u32 {
        self.total_steps
    }

    /// Take the recorded trace, leaving recording active.
    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        match self.trace.as_mut() {
            Some(t) => std::mem::take(t),
            None => Vec::new(),
        }
    }

    /// Map (re)acquisition round: one 360-degree scan (four left turns,
    /// each with full perception), then, while the map still offers no
    /// unexplored node, a seeded random walk of at most
    /// 2 * (width + height) steps. Covers both the cold start on an empty
    /// map and the mid-episode case where every known node has been
    /// visited without finishing the task.
    pub fn bootstrap(&mut self) -> BootstrapOutcome<T> {
        assert!(!self.done, "bootstrap on a finished episode");
        let start_steps = self.total_steps;
        let mut reward = T::zero();
        let mut new_nodes = BTreeSet::new();
        let mut last_visit = self.current_visit();
        push_trace(
            &mut self.trace,
            self.total_steps,
            self.pose,
            "bootstrap".to_string(),
        );

        for _ in 0..4 {
            if self.done {
                break;
            }
            self.raw_step(
                ElementaryAction::TurnLeft,
                &mut reward,
                &mut new_nodes,
                &mut last_visit,
            );
        }

        let walk_cap = 2 * (self.scene.width() + self.scene.height());
        for _ in 0..walk_cap {
            if self.done || !self.map.unexplored_ids().is_empty() {
                break;
            }
            let action = match self.rng.random_range(0..10u8) {
                0..=5 => ElementaryAction::Forward,
                6..=7 => ElementaryAction::TurnLeft,
                _ => ElementaryAction::TurnRight,
            };
            self.raw_step(action, &mut reward, &mut new_nodes, &mut last_visit);
        }

        BootstrapOutcome {
            elementary_steps: self.total_steps - start_steps,
            reward,
            done: self.done,
            new_node_ids: new_nodes.into_iter().collect(),
        }
    }

    /// Execute one macro action: anchor at the nearest node, follow the
    /// cheapest edge path toward the target hop by hop, or steer straight
    /// at the target's stored position when no edge path exists. Every
    /// elementary step perceives, updates explored flags and traversal
    /// edges, and checks the goal; the macro ends on target proximity,
    /// progress change, episode completion, or budget exhaustion. Never
    /// fails: an aborted macro reports `reached == false`.
    pub fn execute_macro(&mut self, action: MacroAction) -> MacroOutcome<T> {
        assert!(!self.done, "macro on a finished episode");
        let target_cell = self
            .map
            .node(action.target)
            .expect("macro target exists at selection time")
            .cell;
        let start_steps = self.total_steps;
        let mut reward = T::zero();
        let mut new_nodes = BTreeSet::new();
        let mut last_visit = self.current_visit();
        push_trace(
            &mut self.trace,
            self.total_steps,
            self.pose,
            format!("macro {}", action.target),
        );

        let anchor = self
            .map
            .nearest_node(self.pose.cell)
            .expect("map is non-empty when a macro target exists");
        let hop_cells: Vec<Cell> = match shortest_path(&self.map, anchor, action.target) {
            Ok(path) => path
                .into_iter()
                .map(|id| self.map.node(id).expect("path nodes exist").cell)
                .collect(),
            // Frontier mode: no edge path yet, steer at the stored
            // position directly.
            Err(PlanError::Unreachable(..)) => vec![target_cell],
            Err(PlanError::Map(e)) => unreachable!("ids were checked: {e}"),
        };

        let Self {
            scene,
            map,
            pose,
            progress,
            done,
            memory,
            rng,
            sensor,
            scheme,
            goal_radius,
            caps,
            total_steps,
            trace,
        } = self;
        let explored_radius = map.config().explored_radius;

        for hop in hop_cells {
            let mut hook = |action: ElementaryAction, pose_now: AgentPose, _steps: u32| {
                *total_steps += 1;
                push_trace(trace, *total_steps, pose_now, action_label(action).to_string());
                perceive(
                    scene,
                    map,
                    pose_now,
                    sensor,
                    rng,
                    &mut new_nodes,
                    trace,
                    *total_steps,
                );
                record_arrival(map, pose_now, *total_steps, &mut last_visit);
                let (r, changed) = goal_sweep(
                    scene,
                    pose_now,
                    progress,
                    done,
                    *scheme,
                    *goal_radius,
                    trace,
                    *total_steps,
                );
                reward += r;
                if *done || changed {
                    StepSignal::Stop
                } else {
                    StepSignal::Continue
                }
            };
            let (_, hop_reached) = steer_with(
                scene,
                memory,
                pose,
                hop,
                explored_radius,
                caps.steer_budget,
                &mut hook,
            );
            if !hop_reached {
                // Stopped by the hook, a budget cap, or no known route.
                break;
            }
        }

        let end_pose = self.pose;
        MacroOutcome {
            end_pose,
            elementary_steps: self.total_steps - start_steps,
            reached: end_pose.cell.chebyshev(target_cell) <= explored_radius,
            reward,
            progress: self.progress,
            done: self.done,
            new_node_ids: new_nodes.into_iter().collect(),
        }
    }

    /// Node the agent currently stands near, stamped with the step count;
    /// seeds the traversal accounting for a macro.
    fn current_visit(&self) -> Option<(NodeId, u32)> {
        node_near(&self.map, self.pose.cell).map(|id| (id, self.total_steps))
    }

    /// One elementary action outside the steering loop (bootstrap), with
    /// the same per-step bookkeeping the steering hook performs.
    fn raw_step(
        &mut self,
        action: ElementaryAction,
        reward: &mut T,
        new_nodes: &mut BTreeSet<NodeId>,
        last_visit: &mut Option<(NodeId, u32)>,
    ) {
        let before = self.pose.cell;
        self.pose = step_elementary(self.scene, self.pose, action);
        self.total_steps += 1;
        if action == ElementaryAction::Forward {
            if self.pose.cell == before {
                let (dx, dy) = self.pose.heading.delta();
                self.memory.note_blocked(before.offset(dx, dy));
            } else {
                self.memory.note_visited(self.pose.cell);
            }
        }
        push_trace(
            &mut self.trace,
            self.total_steps,
            self.pose,
            action_label(action).to_string(),
        );
        perceive(
            self.scene,
            &mut self.map,
            self.pose,
            &self.sensor,
            &mut self.rng,
            new_nodes,
            &mut self.trace,
            self.total_steps,
        );
        record_arrival(&mut self.map, self.pose, self.total_steps, last_visit);
        let (r, _) = goal_sweep(
            self.scene,
            self.pose,
            &mut self.progress,
            &mut self.done,
            self.scheme,
            self.goal_radius,
            &mut self.trace,
            self.total_steps,
        );
        *reward += r;
    }
}

fn action_label(action: ElementaryAction) -> &'static str {
    match action {
        ElementaryAction::Forward => "forward",
        ElementaryAction::TurnLeft => "turn_left",
        ElementaryAction::TurnRight => "turn_right",
    }
}

fn push_trace(trace: &mut Option<Vec<TraceEvent>>, step: u32, pose: AgentPose, label: String) {
    if let Some(t) = trace.as_mut() {
        t.push(TraceEvent { step, pose, label });
    }
}

/// Observe, optionally jitter positions, fold into the map, flag nearby
/// nodes explored. New node ids land in `new_nodes` and the trace.
#[allow(clippy::too_many_arguments)]
fn perceive<T: Real>(
    scene: &GridScene<T>,
    map: &mut TopoMap<T>,
    pose: AgentPose,
    sensor: &SensorConfig,
    rng: &mut ChaCha8Rng,
    new_nodes: &mut BTreeSet<NodeId>,
    trace: &mut Option<Vec<TraceEvent>>,
    step: u32,
) {
    let mut detections = observe(scene, pose, sensor);
    if sensor.noise_sigma > 0.0 {
        apply_position_noise(scene, &mut detections, sensor.noise_sigma, rng);
    }
    let before = map.len() as u32;
    for id in map.integrate_observation(&detections) {
        if id.0 >= before && new_nodes.insert(id) {
            let cell = map.node(id).expect("just integrated").cell;
            push_trace(trace, step, pose, format!("node {} {} {}", id, cell.x, cell.y));
        }
    }
    map.mark_explored(pose);
}

/// Node whose position the agent is within explored_radius of, if any;
/// nearest wins, ties to the smaller id.
fn node_near<T: Real>(map: &TopoMap<T>, cell: Cell) -> Option<NodeId> {
    let id = map.nearest_node(cell).ok()?;
    let node = map.node(id).expect("nearest id exists");
    (node.cell.chebyshev(cell) <= map.config().explored_radius).then_some(id)
}

/// Consecutive-visit traversal accounting: arriving near a node other
/// than the last one visited records an edge costed by the elementary
/// steps between the two arrivals. Lingering refreshes the stamp so idle
/// time never inflates the next edge.
fn record_arrival<T: Real>(
    map: &mut TopoMap<T>,
    pose: AgentPose,
    total_steps: u32,
    last_visit: &mut Option<(NodeId, u32)>,
) {
    let Some(here) = node_near(map, pose.cell) else {
        return;
    };
    match last_visit {
        Some((prev, at)) if *prev != here => {
            let delta = total_steps - *at;
            if delta >= 1 {
                map.record_traversal(*prev, here, delta)
                    .expect("both arrival nodes exist and differ");
            }
            *last_visit = Some((here, total_steps));
        }
        _ => *last_visit = Some((here, total_steps)),
    }
}

/// Apply the goal check until progress stops advancing (stacked subgoals
/// within the radius all fire). Returns accumulated reward and whether
/// progress changed.
#[allow(clippy::too_many_arguments)]
fn goal_sweep<T: Real>(
    scene: &GridScene<T>,
    pose: AgentPose,
    progress: &mut TaskProgress,
    done: &mut bool,
    scheme: RewardScheme,
    goal_radius: u32,
    trace: &mut Option<Vec<TraceEvent>>,
    step: u32,
) -> (T, bool) {
    let mut reward = T::zero();
    let mut changed = false;
    while !*done {
        let g = goal_update(scene, pose, *progress, scheme, goal_radius);
        reward += g.reward;
        let advanced = g.progress != *progress;
        *progress = g.progress;
        *done = g.done;
        if advanced {
            changed = true;
            push_trace(trace, step, pose, format!("goal {}", g.progress.achieved));
        } else {
            break;
        }
    }
    (reward, changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Heading;
    use crate::rng::{salt, stream};
    use crate::simenv::{generate_scene, AppearancePatch, SceneConfig, SceneObject};
    use std::collections::BTreeMap;

    fn room_with(objects: Vec<SceneObject<f64>>, n_targets: u32, start: Cell) -> GridScene<f64> {
        let (w, h) = (16u32, 16u32);
        let mut walls = vec![false; (w * h) as usize];
        for x in 0..w {
            walls[x as usize] = true;
            walls[((h - 1) * w + x) as usize] = true;
        }
        for y in 0..h {
            walls[(y * w) as usize] = true;
            walls[(y * w + w - 1) as usize] = true;
        }
        GridScene::from_parts(
            w,
            h,
            walls,
            objects,
            AgentPose {
                cell: start,
                heading: Heading::East,
            },
            n_targets,
        )
        .unwrap()
    }

    fn obj(x: i32, y: i32, rank: Option<u32>, rgb: [f64; 3]) -> SceneObject<f64> {
        SceneObject {
            cell: Cell::new(x, y),
            appearance: AppearancePatch::solid(2, rgb),
            target_rank: rank,
        }
    }

    fn env_for(scene: &GridScene<f64>, seed: u64, record_trace: bool) -> MacroEnv<'_, f64> {
        MacroEnv::new(
            scene,
            MapConfig::default(),
            SensorConfig::default(),
            RewardScheme::Intermediate,
            1,
            MacroCaps::for_scene(scene),
            stream(seed, salt::EPISODE),
            record_trace,
        )
    }

    #[test]
    fn visible_target_macro_reaches_and_pays() {
        let scene = room_with(vec![obj(6, 5, Some(1), [1.0, 0.0, 0.0])], 1, Cell::new(2, 5));
        let mut env = env_for(&scene, 0, false);
        assert_eq!(env.map().len(), 1);
        let out = env.execute_macro(MacroAction { target: NodeId(0) });
        assert!(out.reached);
        assert!(out.done);
        assert_eq!(out.reward, 1.0);
        assert_eq!(out.progress.achieved, 1);
        assert!(out.end_pose.cell.chebyshev(Cell::new(6, 5)) <= 1);
        assert!(env.map().node(NodeId(0)).unwrap().explored);
    }

    #[test]
    fn stacked_subgoals_fire_in_one_step() {
        let scene = room_with(
            vec![
                obj(5, 5, Some(1), [1.0, 0.0, 0.0]),
                obj(5, 6, Some(2), [0.0, 1.0, 0.0]),
            ],
            2,
            Cell::new(2, 5),
        );
        let mut env = env_for(&scene, 0, false);
        let out = env.execute_macro(MacroAction { target: NodeId(0) });
        assert!(out.done);
        assert_eq!(out.progress.achieved, 2);
        assert_eq!(out.reward, 2.0);
    }

    #[test]
    fn macro_ends_on_progress_change_before_its_target() {
        // Rank-1 target sits on the straight route to the macro target.
        let scene = room_with(
            vec![
                obj(6, 5, Some(1), [1.0, 0.0, 0.0]),
                obj(9, 5, None, [0.6, 0.6, 0.2]),
            ],
            1,
            Cell::new(2, 5),
        );
        let mut env = env_for(&scene, 0, false);
        assert_eq!(env.map().len(), 2);
        let far = env.map().nearest_node(Cell::new(9, 5)).unwrap();
        let out = env.execute_macro(MacroAction { target: far });
        assert!(out.done);
        assert!(!out.reached, "macro stops at the subgoal, short of its target");
        assert!(out.end_pose.cell.chebyshev(Cell::new(9, 5)) > 1);
    }

    #[test]
    fn exhausted_budget_reports_not_reached() {
        let scene = room_with(vec![obj(10, 10, Some(1), [1.0, 0.0, 0.0])], 1, Cell::new(2, 2));
        let mut env = MacroEnv::new(
            &scene,
            MapConfig::default(),
            SensorConfig::default(),
            RewardScheme::Intermediate,
            1,
            MacroCaps { steer_budget: 2 },
            stream(0, salt::EPISODE),
            false,
        );
        assert_eq!(env.map().len(), 1);
        let out = env.execute_macro(MacroAction { target: NodeId(0) });
        assert!(!out.reached);
        assert!(!out.done);
        assert_eq!(out.elementary_steps, 2);
    }

    #[test]
    fn bootstrap_scan_picks_up_objects_behind_the_agent() {
        // Object due west; agent faces east, so only the scan reveals it.
        let scene = room_with(vec![obj(2, 8, Some(1), [1.0, 0.0, 0.0])], 1, Cell::new(10, 8));
        let mut env = env_for(&scene, 0, false);
        assert!(env.map().is_empty());
        let out = env.bootstrap();
        assert_eq!(env.map().len(), 1);
        assert_eq!(out.elementary_steps, 4);
        assert_eq!(out.new_node_ids, vec![NodeId(0)]);
    }

    #[test]
    fn bootstrap_walks_until_first_detection_on_generated_scenes() {
        let cfg = SceneConfig::default();
        for seed in 0..6u64 {
            let scene = generate_scene::<f64>(seed, &cfg).unwrap();
            let mut env = env_for(&scene, seed, false);
            let mut rounds = 0;
            while env.map().is_empty() && !env.done() && rounds < 50 {
                env.bootstrap();
                rounds += 1;
            }
            assert!(!env.map().is_empty(), "seed {seed}: nothing found in {rounds} rounds");
        }
    }

    #[test]
    fn step_totals_are_conserved_across_macros() {
        let scene = generate_scene::<f64>(11, &SceneConfig::default()).unwrap();
        let mut env = env_for(&scene, 11, true);
        let mut rng = stream(99, salt::EPISODE);
        let mut sum = 0u32;
        while env.map().is_empty() && !env.done() {
            sum += env.bootstrap().elementary_steps;
        }
        for _ in 0..30 {
            if env.done() {
                break;
            }
            let target = NodeId(rng.random_range(0..env.map().len() as u32));
            sum += env.execute_macro(MacroAction { target }).elementary_steps;
        }
        assert_eq!(sum, env.total_steps());
        let actions = ["forward", "turn_left", "turn_right"];
        let trace = env.take_trace();
        let action_events = trace
            .iter()
            .filter(|e| actions.contains(&e.label.as_str()))
            .count();
        assert_eq!(action_events as u32, env.total_steps());
    }

    #[test]
    fn recorded_edges_match_trace_replay() {
        // Independent replay of the consecutive-visit accounting from the
        // trace alone: node creations, macro boundaries, and per-step
        // poses reproduce the edge set and its minimum costs.
        for seed in 0..8u64 {
            let scene = generate_scene::<f64>(seed, &SceneConfig::default()).unwrap();
            let mut env = env_for(&scene, seed, true);
            let mut rng = stream(1000 + seed, salt::EPISODE);
            while env.map().is_empty() && !env.done() {
                env.bootstrap();
            }
            for _ in 0..25 {
                if env.done() {
                    break;
                }
                let target = NodeId(rng.random_range(0..env.map().len() as u32));
                env.execute_macro(MacroAction { target });
            }
            let trace = env.take_trace();

            let radius = env.map().config().explored_radius;
            let mut nodes: Vec<Cell> = Vec::new();
            let mut expect: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            let mut last: Option<(u32, u32)> = None;
            let mut pending: Option<(AgentPose, u32)> = None;
            let near = |nodes: &[Cell], cell: Cell| -> Option<u32> {
                nodes
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.chebyshev(cell), i as u32))
                    .min()
                    .filter(|&(d, _)| d <= radius)
                    .map(|(_, i)| i)
            };
            let flush =
                |pending: &mut Option<(AgentPose, u32)>,
                 last: &mut Option<(u32, u32)>,
                 nodes: &[Cell],
                 expect: &mut BTreeMap<(u32, u32), u32>| {
                    let Some((pose, step)) = pending.take() else {
                        return;
                    };
                    let Some(here) = near(nodes, pose.cell) else {
                        return;
                    };
                    match *last {
                        Some((prev, at)) if prev != here => {
                            let delta = step - at;
                            if delta >= 1 {
                                let key = (prev.min(here), prev.max(here));
                                let e = expect.entry(key).or_insert(u32::MAX);
                                *e = (*e).min(delta);
                            }
                            *last = Some((here, step));
                        }
                        _ => *last = Some((here, step)),
                    }
                };
            for ev in &trace {
                let tok: Vec<&str> = ev.label.split_whitespace().collect();
                match tok[0] {
                    "node" => {
                        nodes.push(Cell::new(tok[2].parse().unwrap(), tok[3].parse().unwrap()));
                    }
                    "forward" | "turn_left" | "turn_right" => {
                        flush(&mut pending, &mut last, &nodes, &mut expect);
                        pending = Some((ev.pose, ev.step));
                    }
                    "macro" | "bootstrap" => {
                        flush(&mut pending, &mut last, &nodes, &mut expect);
                        last = near(&nodes, ev.pose.cell).map(|id| (id, ev.step));
                    }
                    _ => {}
                }
            }
            flush(&mut pending, &mut last, &nodes, &mut expect);

            let got: BTreeMap<(u32, u32), u32> = env
                .map()
                .edges()
                .map(|(a, b, c)| ((a.0, b.0), c))
                .collect();
            assert_eq!(got, expect, "seed {seed}");
        }
    }

    #[test]
    fn identical_seeds_replay_identically() {
        let scene = generate_scene::<f64>(4, &SceneConfig::default()).unwrap();
        let run = || {
            let mut env = env_for(&scene, 4, true);
            let mut rng = stream(5, salt::EPISODE);
            while env.map().is_empty() && !env.done() {
                env.bootstrap();
            }
            let mut outcomes = Vec::new();
            for _ in 0..15 {
                if env.done() {
                    break;
                }
                let target = NodeId(rng.random_range(0..env.map().len() as u32));
                outcomes.push(env.execute_macro(MacroAction { target }));
            }
            let trace: Vec<(u32, AgentPose, String)> = env
                .take_trace()
                .into_iter()
                .map(|e| (e.step, e.pose, e.label))
                .collect();
            (outcomes, trace)
        };
        assert_eq!(run(), run());
    }
}
