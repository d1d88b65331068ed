//! Deterministic 2-D grid navigation environment: procedural scenes,
//! ray-cast object detections with ground-truth positions, and
//! sequential-goal reward logic.

mod format;
mod gen;
mod sensor;

pub use format::{load_scene, save_scene, scene_from_str, scene_to_string, FormatError};
pub use gen::{generate_scene, generate_scene_with_placement, GenerationFailed};
pub use sensor::{apply_position_noise, observe, supercover_line};

use crate::grid::{Cell, ElementaryAction, Heading};
use crate::scalar::Real;

/// Square appearance patch of `P*P*3` channel values in `[0,1]`.
///
/// Immutable after creation; the flattened values double as the Q-network's
/// action feature.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearancePatch<T: Real> {
    size: usize,
    values: Vec<T>,
}

impl<T: Real> AppearancePatch<T> {
    /// Build from flattened values; `values.len()` must equal `size*size*3`
    /// and every value must lie in `[0,1]`.
    pub fn new(size: usize, values: Vec<T>) -> Option<Self> {
        if size == 0 || values.len() != size * size * 3 {
            return None;
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < T::zero() || *v > T::one())
        {
            return None;
        }
        Some(Self { size, values })
    }

    /// Uniform-color patch (used by tests and the generator's base case).
    pub fn solid(size: usize, rgb: [f64; 3]) -> Self {
        let mut values = Vec::with_capacity(size * size * 3);
        for _ in 0..size * size {
            for c in rgb {
                values.push(T::from_f64_lossy(c.clamp(0.0, 1.0)));
            }
        }
        Self { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Flattened pixel values; length `size*size*3`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Hex encoding of the values as little-endian 64-bit reals.
    pub fn to_hex(&self) -> String {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        hex::encode(bytes)
    }

    /// Inverse of [`to_hex`](Self::to_hex); infers the patch size from the
    /// value count.
    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        if bytes.len() % 24 != 0 {
            return None;
        }
        let n_px = bytes.len() / 24;
        let size = (n_px as f64).sqrt().round() as usize;
        if size * size != n_px {
            return None;
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Self::new(size, values)
    }
}

/// An object placed in a scene: position, appearance, and an optional
/// 1-based rank in the goal sequence (`None` for distractors).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject<T: Real> {
    pub cell: Cell,
    pub appearance: AppearancePatch<T>,
    pub target_rank: Option<u32>,
}

/// Agent position and viewing direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading: Heading,
}

/// Count of subgoals reached so far; monotone within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaskProgress {
    pub achieved: u32,
}

/// Which of the two reward schemes an episode runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardScheme {
    /// +1 on each subgoal reached in order.
    Intermediate,
    /// +1 only on the subgoal that completes the sequence.
    Terminal,
}

impl RewardScheme {
    pub fn code(self) -> &'static str {
        match self {
            RewardScheme::Intermediate => "intermediate",
            RewardScheme::Terminal => "terminal",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "intermediate" => Some(RewardScheme::Intermediate),
            "terminal" => Some(RewardScheme::Terminal),
            _ => None,
        }
    }
}

/// Static world: walls, objects, start pose, goal count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScene<T: Real> {
    width: u32,
    height: u32,
    walls: Vec<bool>,
    objects: Vec<SceneObject<T>>,
    start_pose: AgentPose,
    n_targets: u32,
}

impl<T: Real> GridScene<T> {
    /// Assemble a scene from parts, validating every structural invariant
    /// (bounds, walls under nobody, exactly one object per rank `1..=n`).
    /// Reachability is the generator's contract, not checked here.
    pub fn from_parts(
        width: u32,
        height: u32,
        walls: Vec<bool>,
        objects: Vec<SceneObject<T>>,
        start_pose: AgentPose,
        n_targets: u32,
    ) -> Result<Self, String> {
        if width == 0 || height == 0 || walls.len() != (width * height) as usize {
            return Err("wall grid does not match dimensions".into());
        }
        let scene = Self {
            width,
            height,
            walls,
            objects,
            start_pose,
            n_targets,
        };
        if !scene.in_bounds(start_pose.cell) || scene.is_wall(start_pose.cell) {
            return Err("start pose on a wall or out of bounds".into());
        }
        let mut rank_seen = vec![false; n_targets as usize];
        for obj in &scene.objects {
            if !scene.in_bounds(obj.cell) || scene.is_wall(obj.cell) {
                return Err(format!("object at {} on a wall or out of bounds", obj.cell));
            }
            if let Some(r) = obj.target_rank {
                if r == 0 || r > n_targets {
                    return Err(format!("object rank {r} outside 1..={n_targets}"));
                }
                if std::mem::replace(&mut rank_seen[(r - 1) as usize], true) {
                    return Err(format!("duplicate target rank {r}"));
                }
            }
        }
        if !rank_seen.iter().all(|&s| s) {
            return Err("missing target rank".into());
        }
        Ok(scene)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n_targets(&self) -> u32 {
        self.n_targets
    }

    pub fn objects(&self) -> &[SceneObject<T>] {
        &self.objects
    }

    pub fn start_pose(&self) -> AgentPose {
        self.start_pose
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as u32) < self.width && (cell.y as u32) < self.height
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        debug_assert!(self.in_bounds(cell));
        self.walls[(cell.y as u32 * self.width + cell.x as u32) as usize]
    }

    /// A cell the agent cannot occupy: out of bounds or a wall.
    pub fn is_blocked(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.is_wall(cell)
    }

    /// Wall cells in row-major order (serialization order).
    pub fn wall_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32).flat_map(move |y| {
            (0..self.width as i32)
                .map(move |x| Cell::new(x, y))
                .filter(move |&c| self.is_wall(c))
        })
    }

    /// The object holding goal rank `rank` (1-based).
    pub fn target(&self, rank: u32) -> Option<&SceneObject<T>> {
        self.objects.iter().find(|o| o.target_rank == Some(rank))
    }
}

/// Apply one elementary action. Forward into a wall or the boundary is a
/// no-op; turns always succeed.
pub fn step_elementary<T: Real>(
    scene: &GridScene<T>,
    pose: AgentPose,
    action: ElementaryAction,
) -> AgentPose {
    match action {
        ElementaryAction::TurnLeft => AgentPose {
            heading: pose.heading.turned_left(),
            ..pose
        },
        ElementaryAction::TurnRight => AgentPose {
            heading: pose.heading.turned_right(),
            ..pose
        },
        ElementaryAction::Forward => {
            let (dx, dy) = pose.heading.delta();
            let ahead = pose.cell.offset(dx, dy);
            if scene.is_blocked(ahead) {
                pose
            } else {
                AgentPose {
                    cell: ahead,
                    ..pose
                }
            }
        }
    }
}

/// Outcome of one goal check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalStep<T: Real> {
    pub reward: T,
    pub progress: TaskProgress,
    pub done: bool,
}

/// Check whether the agent currently identifies the next subgoal.
///
/// Identification means standing within `goal_radius` (Chebyshev) of the
/// object ranked `progress.achieved + 1`; later-ranked targets yield
/// nothing until their turn. One call advances progress by at most one.
pub fn goal_update<T: Real>(
    scene: &GridScene<T>,
    pose: AgentPose,
    progress: TaskProgress,
    scheme: RewardScheme,
    goal_radius: u32,
) -> GoalStep<T> {
    let n = scene.n_targets;
    debug_assert!(progress.achieved < n, "goal_update called after done");
    if progress.achieved >= n {
        return GoalStep {
            reward: T::zero(),
            progress,
            done: true,
        };
    }
    let next = scene
        .target(progress.achieved + 1)
        .expect("scene invariant: every rank 1..=n_targets present");
    if pose.cell.chebyshev(next.cell) > goal_radius {
        return GoalStep {
            reward: T::zero(),
            progress,
            done: false,
        };
    }
    let achieved = progress.achieved + 1;
    let done = achieved == n;
    let reward = match scheme {
        RewardScheme::Intermediate => T::one(),
        RewardScheme::Terminal => {
            if done {
                T::one()
            } else {
                T::zero()
            }
        }
    };
    GoalStep {
        reward,
        progress: TaskProgress { achieved },
        done,
    }
}

/// Scene generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub n_objects: u32,
    pub n_targets: u32,
    pub patch_size: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            n_objects: 8,
            n_targets: 1,
            patch_size: 4,
        }
    }
}

/// Sensor parameters. Geometry runs in `f64` regardless of the scene's
/// value scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    /// Half-width of the heading-centered field of view, degrees.
    pub fov_halfwidth_deg: f64,
    /// Maximum detection distance, cells (Chebyshev).
    pub range: u32,
    /// Std-dev of the position-noise hook, cells. Zero disables it.
    pub noise_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov_halfwidth_deg: 45.0,
            range: 8,
            noise_sigma: 0.0,
        }
    }
}

/// Ground-truth detection of a scene object.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T: Real> {
    pub position: Cell,
    pub appearance: AppearancePatch<T>,
    pub distance: u32,
}
