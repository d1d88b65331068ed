//! Episode runner and training loop: replay buffer, scene scheduling,
//! metrics, evaluation, and the uniform-random control policy.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::planner::{MacroAction, MacroCaps, MacroEnv};
use crate::qnet::{
    q_all_nodes, save_params, select_action, sync_target, td_train_step, ProgressVector, QParams,
    Transition,
};
use crate::rng::{derive_seed, salt, stream};
use crate::scalar::Real;
use crate::simenv::{
    generate_scene, generate_scene_with_placement, FormatError, GenerationFailed, GridScene,
    RewardScheme, SceneConfig, SensorConfig,
};
use crate::topomap::{MapConfig, TopoMap};

/// Most candidate features kept per stored transition.
pub const CANDIDATE_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Generation(#[from] GenerationFailed),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Fixed-capacity ring buffer of replayed experience.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T: Real> {
    capacity: usize,
    items: Vec<Transition<T>>,
    next: usize,
}

impl<T: Real> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Transition<T>] {
        &self.items
    }

    /// At capacity the oldest entry is overwritten.
    pub fn push(&mut self, tr: Transition<T>) {
        if self.items.len() < self.capacity {
            self.items.push(tr);
        } else {
            self.items[self.next] = tr;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Transition<T>> {
        assert!(!self.items.is_empty());
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

/// Everything the training loop persists across episodes: the online
/// network, its slow target copy, replayed experience, and the update
/// counter that schedules target syncs.
#[derive(Debug, Clone)]
pub struct LearnState<T: Real> {
    pub params: QParams<T>,
    target: QParams<T>,
    pub buffer: ReplayBuffer<T>,
    train_steps: u64,
}

impl<T: Real> LearnState<T> {
    /// Fresh networks from the config's init stream.
    pub fn new(cfg: &TrainConfig<T>) -> Self {
        let mut rng = stream(cfg.seed, salt::INIT);
        let params = QParams::init(cfg.d_a(), cfg.n_targets as usize, cfg.hidden, &mut rng);
        Self::from_params(params, cfg.buffer_capacity)
    }

    /// Wrap existing parameters (evaluation, checkpoint reload).
    pub fn from_params(params: QParams<T>, buffer_capacity: usize) -> Self {
        let target = sync_target(&params);
        Self {
            params,
            target,
            buffer: ReplayBuffer::new(buffer_capacity),
            train_steps: 0,
        }
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }
}

/// Full training run description. `scene.n_targets` is overridden by
/// `n_targets` so the task length has a single source of truth.
#[derive(Debug, Clone)]
pub struct TrainConfig<T: Real> {
    pub n_scenes: usize,
    pub n_targets: u32,
    pub scheme: RewardScheme,
    pub macro_cap: u32,
    pub gamma: T,
    pub lr: T,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub bonus: T,
    pub epsilon: f64,
    pub episodes: usize,
    pub seed: u64,
    pub scene: SceneConfig,
    pub sensor: SensorConfig,
    pub map: MapConfig,
    pub goal_radius: u32,
    pub hidden: usize,
    /// Checkpoint every this many episodes when a directory is given;
    /// zero disables cadence checkpoints.
    pub checkpoint_every: usize,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            n_scenes: 100,
            n_targets: 1,
            scheme: RewardScheme::Intermediate,
            macro_cap: 250,
            gamma: T::from_f64_lossy(0.95),
            lr: T::from_f64_lossy(1e-3),
            buffer_capacity: 50_000,
            batch_size: 32,
            target_sync_every: 500,
            bonus: T::one(),
            epsilon: 0.05,
            episodes: 300,
            seed: 0,
            scene: SceneConfig::default(),
            sensor: SensorConfig::default(),
            map: MapConfig::default(),
            goal_radius: 1,
            hidden: 64,
            checkpoint_every: 100,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    /// Scene description with the task length patched in.
    pub fn effective_scene(&self) -> SceneConfig {
        SceneConfig {
            n_targets: self.n_targets,
            ..self.scene
        }
    }

    /// Appearance-feature length: patch pixels times three channels.
    pub fn d_a(&self) -> usize {
        self.scene.patch_size * self.scene.patch_size * 3
    }
}

/// One finished episode. `wall_time` is observational only and never
/// serialized.
#[derive(Debug, Clone)]
pub struct EpisodeResult<T: Real> {
    pub scene_seed: u64,
    pub macro_steps: u32,
    pub elementary_steps: u32,
    pub total_reward: T,
    pub success: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct MetricsRow<T: Real> {
    pub episode: usize,
    pub scene_seed: u64,
    pub macro_steps: u32,
    pub elementary_steps: u32,
    pub total_reward: T,
    pub success: bool,
    pub mean_loss: Option<T>,
    pub epsilon: f64,
    pub bonus: T,
}

pub const METRICS_HEADER: &str =
    "episode,scene_seed,macro_steps,elementary_steps,total_reward,success,mean_loss,epsilon,bonus";

/// Per-episode training metrics, serialized as CSV with LF endings.
#[derive(Debug, Clone)]
pub struct MetricsLog<T: Real> {
    rows: Vec<MetricsRow<T>>,
}

impl<T: Real> Default for MetricsLog<T> {
    fn default() -> Self {
        Self { rows: Vec::new() }
    }
}

impl<T: Real> MetricsLog<T> {
    pub fn rows(&self) -> &[MetricsRow<T>] {
        &self.rows
    }

    pub fn push(&mut self, row: MetricsRow<T>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let loss = match r.mean_loss {
                Some(l) => format!("{l}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.episode,
                r.scene_seed,
                r.macro_steps,
                r.elementary_steps,
                r.total_reward,
                u8::from(r.success),
                loss,
                r.epsilon,
                r.bonus,
            ));
        }
        out
    }
}

/// How macro targets are picked each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SelectionMode {
    Learned,
    Uniform,
}

/// Layout seed of training scene `i`.
fn train_scene_seed(cfg_seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(cfg_seed, salt::LAYOUT), i as u64)
}

/// Layout seed of held-out evaluation scene `i`; a separate derivation
/// root keeps these disjoint from the training set.
fn eval_scene_seed(cfg_seed: u64, i: usize) -> u64 {
    derive_seed(derive_seed(cfg_seed, salt::EVAL), i as u64)
}

/// Simulator and selection random sources for one episode.
fn episode_rngs(ep_base: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (
        stream(ep_base, salt::EPISODE),
        stream(derive_seed(ep_base, 1), salt::EPISODE),
    )
}

/// Up to [`CANDIDATE_CAP`] appearance features from the map, uniformly
/// subsampled (node order kept) when the map is larger.
fn candidate_features<T: Real>(
    map: &crate::topomap::TopoMap<T>,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<T>> {
    let nodes = map.nodes();
    if nodes.len() <= CANDIDATE_CAP {
        return nodes
            .iter()
            .map(|n| n.appearance.values().to_vec())
            .collect();
    }
    let mut idx: Vec<usize> = (0..nodes.len()).collect();
    idx.shuffle(rng);
    idx.truncate(CANDIDATE_CAP);
    idx.sort_unstable();
    idx.iter()
        .map(|&i| nodes[i].appearance.values().to_vec())
        .collect()
}

/// Play one episode: cold-start scan rounds until the map is seeded, then
/// macro selection until done or the macro cap. A macro that advances
/// nothing while every known node is already explored leaves the policy
/// with no informative choice, so the next round is a scan-walk
/// reacquisition instead of a selection (it still spends one macro).
/// With `learn` set, every macro pushes a transition and (once the buffer
/// can fill a batch) takes one TD step; the target network re-syncs on
/// the configured cadence. Returns the result and the mean TD loss over
/// the episode's updates.
fn run_episode_inner<T: Real>(
    scene: &GridScene<T>,
    scene_seed: u64,
    ep_base: u64,
    mode: SelectionMode,
    learn: bool,
    state: &mut LearnState<T>,
    cfg: &TrainConfig<T>,
) -> (EpisodeResult<T>, Option<T>, TopoMap<T>) {
    let start = Instant::now();
    let (env_rng, mut select_rng) = episode_rngs(ep_base);
    let caps = MacroCaps::for_scene(scene);
    let mut env = MacroEnv::new(
        scene,
        cfg.map,
        cfg.sensor.clone(),
        cfg.scheme,
        cfg.goal_radius,
        caps,
        env_rng,
        false,
    );
    let d_p = cfg.n_targets as usize;
    let mut macro_steps = 0u32;
    let mut total_reward = T::zero();
    let mut losses: Vec<T> = Vec::new();

    // Cold start: scan (and walk if needed) until something is mapped.
    // Every round spends one macro from the episode budget.
    loop {
        let out = env.bootstrap();
        macro_steps += 1;
        total_reward += out.reward;
        if env.done() || !env.map().is_empty() || macro_steps >= cfg.macro_cap {
            break;
        }
    }

    let mut walk_next = false;
    while !env.done() && macro_steps < cfg.macro_cap {
        if walk_next || env.map().is_empty() {
            let out = env.bootstrap();
            macro_steps += 1;
            total_reward += out.reward;
            walk_next = false;
            continue;
        }
        let pre_achieved = env.progress().achieved;
        let progress = ProgressVector::one_hot(pre_achieved as usize, d_p)
            .expect("active episodes have unfinished progress");
        let target = match mode {
            SelectionMode::Learned => {
                let qvals = q_all_nodes(&state.params, env.map(), &progress)
                    .expect("map is non-empty after bootstrap");
                select_action(
                    &qvals,
                    &env.map().unexplored_ids(),
                    cfg.bonus,
                    cfg.epsilon,
                    &mut select_rng,
                )
            }
            SelectionMode::Uniform => {
                let nodes = env.map().nodes();
                nodes[select_rng.random_range(0..nodes.len())].id
            }
        };
        let action_feature = env
            .map()
            .node(target)
            .expect("selected node exists")
            .appearance
            .values()
            .to_vec();
        let outcome = env.execute_macro(MacroAction { target });
        macro_steps += 1;
        total_reward += outcome.reward;
        walk_next = !outcome.done
            && outcome.progress.achieved == pre_achieved
            && env.map().unexplored_ids().is_empty();

        if learn {
            let (next_progress, next_candidates) = if outcome.done {
                (None, Vec::new())
            } else {
                (
                    ProgressVector::one_hot(outcome.progress.achieved as usize, d_p),
                    candidate_features(env.map(), &mut select_rng),
                )
            };
            state.buffer.push(Transition {
                action_feature,
                progress,
                reward: outcome.reward,
                next_progress,
                next_candidates,
                done: outcome.done,
            });
            if state.buffer.len() >= cfg.batch_size {
                let batch = state.buffer.sample(cfg.batch_size, &mut select_rng);
                let loss =
                    td_train_step(&mut state.params, &state.target, &batch, cfg.gamma, cfg.lr)
                        .expect("stored transitions satisfy the candidate invariant");
                losses.push(loss);
                state.train_steps += 1;
                if state.train_steps % cfg.target_sync_every == 0 {
                    state.target = sync_target(&state.params);
                }
            }
        }
    }

    let mean_loss = if losses.is_empty() {
        None
    } else {
        let n = T::from_f64_lossy(losses.len() as f64);
        Some(losses.iter().copied().sum::<T>() / n)
    };
    (
        EpisodeResult {
            scene_seed,
            macro_steps,
            elementary_steps: env.total_steps(),
            total_reward,
            success: env.done(),
            wall_time: start.elapsed(),
        },
        mean_loss,
        env.into_map(),
    )
}

/// Learned-policy episode (see [`run_episode_inner`]); `cfg.epsilon`
/// governs exploration, so evaluation passes a zero-epsilon config.
pub fn run_episode<T: Real>(
    scene: &GridScene<T>,
    scene_seed: u64,
    ep_base: u64,
    state: &mut LearnState<T>,
    cfg: &TrainConfig<T>,
    learn: bool,
) -> (EpisodeResult<T>, Option<T>) {
    let (result, mean_loss, _) = run_episode_inner(
        scene,
        scene_seed,
        ep_base,
        SelectionMode::Learned,
        learn,
        state,
        cfg,
    );
    (result, mean_loss)
}

/// Training output: the per-episode log and the final network.
#[derive(Debug, Clone)]
pub struct TrainOutput<T: Real> {
    pub log: MetricsLog<T>,
    pub params: QParams<T>,
}

/// Shared episode scheduler: scene layouts come from `cfg.n_scenes`
/// seeds, the visiting order reshuffles every epoch, and object
/// placement re-rolls every episode while the layout and target order
/// stay fixed.
fn scheduled_run<T: Real>(
    cfg: &TrainConfig<T>,
    mode: SelectionMode,
    learn: bool,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutput<T>, TrainError> {
    assert!(cfg.n_scenes > 0);
    let mut state = LearnState::new(cfg);
    let mut log = MetricsLog::default();
    let mut shuffle_rng = stream(cfg.seed, salt::SHUFFLE);
    let mut order: Vec<usize> = (0..cfg.n_scenes).collect();
    let scene_cfg = cfg.effective_scene();

    for episode in 0..cfg.episodes {
        if episode % cfg.n_scenes == 0 {
            order.shuffle(&mut shuffle_rng);
        }
        let scene_seed = train_scene_seed(cfg.seed, order[episode % cfg.n_scenes]);
        let placement_seed = derive_seed(scene_seed, episode as u64);
        let scene = generate_scene_with_placement(scene_seed, placement_seed, &scene_cfg)?;
        let ep_base = derive_seed(derive_seed(cfg.seed, salt::EPISODE), episode as u64);
        let (result, mean_loss, _) =
            run_episode_inner(&scene, scene_seed, ep_base, mode, learn, &mut state, cfg);
        log.push(MetricsRow {
            episode,
            scene_seed: result.scene_seed,
            macro_steps: result.macro_steps,
            elementary_steps: result.elementary_steps,
            total_reward: result.total_reward,
            success: result.success,
            mean_loss,
            epsilon: cfg.epsilon,
            bonus: cfg.bonus,
        });
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && (episode + 1) % cfg.checkpoint_every == 0 {
                let path = dir.join(format!("checkpoint_{:05}.qnet", episode + 1));
                save_params(&state.params, &path)?;
            }
        }
    }
    Ok(TrainOutput {
        log,
        params: state.params,
    })
}

/// Full training run over the shared schedule. With a directory given,
/// parameters checkpoint every `cfg.checkpoint_every` episodes as
/// `checkpoint_<episode>.qnet`.
pub fn train<T: Real>(
    cfg: &TrainConfig<T>,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutput<T>, TrainError> {
    scheduled_run(cfg, SelectionMode::Learned, true, checkpoint_dir)
}

/// Uniform-random policy rolled out over the exact training schedule
/// (same scenes, placements, and episode seeds as [`train`]); the
/// no-learning control for training curves.
pub fn random_rollout<T: Real>(cfg: &TrainConfig<T>) -> Result<MetricsLog<T>, TrainError> {
    Ok(scheduled_run(cfg, SelectionMode::Uniform, false, None)?.log)
}

/// The scene a run with this config uses for scene slot `index`, with
/// the slot's layout seed. Object placement matches episode `index` of
/// the schedule, so repeated calls are reproducible.
pub fn train_scene<T: Real>(
    cfg: &TrainConfig<T>,
    index: usize,
) -> Result<(u64, GridScene<T>), TrainError> {
    let scene_seed = train_scene_seed(cfg.seed, index);
    let placement_seed = derive_seed(scene_seed, index as u64);
    let scene = generate_scene_with_placement(scene_seed, placement_seed, &cfg.effective_scene())?;
    Ok((scene_seed, scene))
}

/// Replay one uniform-policy episode on [`train_scene`]'s scene for
/// `index` and return the topological map it built, with the layout
/// seed. Fully deterministic in `cfg` and `index`.
pub fn rollout_map<T: Real>(
    cfg: &TrainConfig<T>,
    index: usize,
) -> Result<(u64, TopoMap<T>), TrainError> {
    let (scene_seed, scene) = train_scene(cfg, index)?;
    let ep_base = derive_seed(derive_seed(cfg.seed, salt::EPISODE), index as u64);
    let mut state = LearnState::new(cfg);
    let (_, _, map) = run_episode_inner(
        &scene,
        scene_seed,
        ep_base,
        SelectionMode::Uniform,
        false,
        &mut state,
        cfg,
    );
    Ok((scene_seed, map))
}

/// Frozen-policy evaluation summary over held-out scenes.
#[derive(Debug, Clone)]
pub struct EvalSummary<T: Real> {
    pub episodes: Vec<EpisodeResult<T>>,
}

fn median_of(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl<T: Real> EvalSummary<T> {
    pub fn mean_macro_steps(&self) -> f64 {
        self.episodes.iter().map(|e| e.macro_steps as f64).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn median_macro_steps(&self) -> f64 {
        median_of(self.episodes.iter().map(|e| e.macro_steps as f64).collect())
    }

    pub fn mean_elementary_steps(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.elementary_steps as f64)
            .sum::<f64>()
            / self.episodes.len() as f64
    }

    pub fn median_elementary_steps(&self) -> f64 {
        median_of(
            self.episodes
                .iter()
                .map(|e| e.elementary_steps as f64)
                .collect(),
        )
    }

    pub fn success_rate(&self) -> f64 {
        self.episodes.iter().filter(|e| e.success).count() as f64 / self.episodes.len() as f64
    }

    pub fn mean_reward(&self) -> f64 {
        self.episodes
            .iter()
            .map(|e| e.total_reward.to_f64_lossy())
            .sum::<f64>()
            / self.episodes.len() as f64
    }

    /// Per-episode rows: `episode,scene_seed,macro_steps,elementary_steps,total_reward,success`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("episode,scene_seed,macro_steps,elementary_steps,total_reward,success\n");
        for (i, e) in self.episodes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i,
                e.scene_seed,
                e.macro_steps,
                e.elementary_steps,
                e.total_reward,
                u8::from(e.success),
            ));
        }
        out
    }

    /// Human-readable aggregate block.
    pub fn summary_text(&self) -> String {
        format!(
            "episodes: {}\nmacro_steps mean: {:.3} median: {:.3}\nelementary_steps mean: {:.3} median: {:.3}\nsuccess_rate: {:.3}\nmean_reward: {:.3}\n",
            self.episodes.len(),
            self.mean_macro_steps(),
            self.median_macro_steps(),
            self.mean_elementary_steps(),
            self.median_elementary_steps(),
            self.success_rate(),
            self.mean_reward(),
        )
    }
}

fn eval_run<T: Real>(
    params: Option<&QParams<T>>,
    cfg: &TrainConfig<T>,
    n_eval: usize,
) -> Result<EvalSummary<T>, TrainError> {
    assert!(n_eval >= 1);
    let mut ecfg = cfg.clone();
    ecfg.epsilon = 0.0;
    let (mode, base_params) = match params {
        Some(p) => (SelectionMode::Learned, p.clone()),
        None => (
            SelectionMode::Uniform,
            QParams::zeros(cfg.d_a(), cfg.n_targets as usize, cfg.hidden),
        ),
    };
    let mut state = LearnState::from_params(base_params, cfg.buffer_capacity);
    let scene_cfg = cfg.effective_scene();
    let mut episodes = Vec::with_capacity(n_eval);
    for i in 0..n_eval {
        let seed = eval_scene_seed(cfg.seed, i);
        let scene = generate_scene(seed, &scene_cfg)?;
        let ep_base = derive_seed(seed, salt::EPISODE);
        let (result, _, _) =
            run_episode_inner(&scene, seed, ep_base, mode, false, &mut state, &ecfg);
        episodes.push(result);
    }
    Ok(EvalSummary { episodes })
}

/// Frozen-policy evaluation: `n_eval` episodes on held-out scene seeds
/// with epsilon forced to zero (the unexplored bonus stays as
/// configured).
pub fn evaluate<T: Real>(
    params: &QParams<T>,
    cfg: &TrainConfig<T>,
    n_eval: usize,
) -> Result<EvalSummary<T>, TrainError> {
    eval_run(Some(params), cfg, n_eval)
}

/// Control policy: identical protocol and scenes as [`evaluate`], but
/// macro targets drawn uniformly from the current map.
pub fn random_baseline<T: Real>(
    cfg: &TrainConfig<T>,
    n_eval: usize,
) -> Result<EvalSummary<T>, TrainError> {
    eval_run(None, cfg, n_eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cell, Heading};
    use crate::simenv::{AgentPose, AppearancePatch, SceneObject};

    fn tiny_cfg() -> TrainConfig<f64> {
        TrainConfig {
            n_scenes: 4,
            episodes: 8,
            macro_cap: 40,
            scene: SceneConfig {
                width: 14,
                height: 14,
                n_objects: 4,
                n_targets: 1,
                patch_size: 2,
            },
            batch_size: 8,
            hidden: 8,
            checkpoint_every: 0,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    /// Open room with one rank-1 target; `far` pushes it out of sensor
    /// range of the start.
    fn open_scene(far: bool) -> GridScene<f64> {
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
        let cell = if far { Cell::new(13, 13) } else { Cell::new(2, 1) };
        let objects = vec![SceneObject {
            cell,
            appearance: AppearancePatch::solid(2, [1.0, 0.0, 0.0]),
            target_rank: Some(1),
        }];
        let start = AgentPose {
            cell: Cell::new(2, 2),
            heading: Heading::North,
        };
        GridScene::from_parts(w, h, walls, objects, start, 1).unwrap()
    }

    #[test]
    fn ring_buffer_overwrites_oldest() {
        let mut buf: ReplayBuffer<f64> = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(Transition {
                action_feature: vec![0.0],
                progress: ProgressVector::one_hot(0, 1).unwrap(),
                reward: i as f64,
                next_progress: None,
                next_candidates: Vec::new(),
                done: true,
            });
        }
        assert_eq!(buf.len(), 3);
        let mut rewards: Vec<f64> = buf.items().iter().map(|t| t.reward).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn candidate_subsample_caps_and_preserves_membership() {
        use crate::simenv::Detection;
        use crate::topomap::TopoMap;
        let mut map: TopoMap<f64> = TopoMap::new(MapConfig {
            merge_radius: 1,
            explored_radius: 1,
        });
        let dets: Vec<Detection<f64>> = (0..100)
            .map(|i| Detection {
                position: Cell::new(i * 2, 0),
                appearance: AppearancePatch::solid(1, [i as f64 / 100.0, 0.0, 0.0]),
                distance: 1,
            })
            .collect();
        map.integrate_observation(&dets);
        let mut rng = stream(3, salt::EPISODE);
        let cands = candidate_features(&map, &mut rng);
        assert_eq!(cands.len(), CANDIDATE_CAP);
        let source: std::collections::BTreeSet<String> = map
            .nodes()
            .iter()
            .map(|n| format!("{:?}", n.appearance.values()))
            .collect();
        let mut seen = std::collections::BTreeSet::new();
        for c in &cands {
            assert!(source.contains(&format!("{:?}", c.as_slice())));
            assert!(seen.insert(format!("{:?}", c.as_slice())), "duplicate pick");
        }
        // A small map passes through untouched.
        let mut small: TopoMap<f64> = TopoMap::new(MapConfig::default());
        small.integrate_observation(&dets[..5]);
        assert_eq!(candidate_features(&small, &mut rng).len(), 5);
    }

    #[test]
    fn adjacent_visible_target_succeeds_in_one_bootstrap_macro() {
        let scene = open_scene(false);
        let cfg = TrainConfig {
            scene: SceneConfig {
                width: 16,
                height: 16,
                n_objects: 1,
                n_targets: 1,
                patch_size: 2,
            },
            hidden: 4,
            ..tiny_cfg()
        };
        let mut state = LearnState::new(&cfg);
        let (res, _) = run_episode(&scene, 0, 7, &mut state, &cfg, false);
        assert!(res.success);
        assert_eq!(res.macro_steps, 1, "the scan round already completes");
        assert_eq!(res.total_reward, 1.0);
    }

    #[test]
    fn macro_cap_one_with_far_target_fails() {
        let scene = open_scene(true);
        let cfg = TrainConfig {
            macro_cap: 1,
            scene: SceneConfig {
                width: 16,
                height: 16,
                n_objects: 1,
                n_targets: 1,
                patch_size: 2,
            },
            hidden: 4,
            ..tiny_cfg()
        };
        let mut state = LearnState::new(&cfg);
        let (res, _) = run_episode(&scene, 0, 7, &mut state, &cfg, false);
        assert!(!res.success);
        assert_eq!(res.macro_steps, 1);
        assert_eq!(res.total_reward, 0.0);
    }

    #[test]
    fn stored_transitions_satisfy_the_candidate_invariant() {
        let cfg = tiny_cfg();
        let mut state = LearnState::new(&cfg);
        let scene_cfg = cfg.effective_scene();
        for e in 0..cfg.episodes {
            let seed = train_scene_seed(cfg.seed, e % cfg.n_scenes);
            let scene =
                generate_scene_with_placement(seed, derive_seed(seed, e as u64), &scene_cfg)
                    .unwrap();
            run_episode(&scene, seed, derive_seed(cfg.seed, e as u64), &mut state, &cfg, true);
        }
        assert!(!state.buffer.is_empty());
        for tr in state.buffer.items() {
            assert_eq!(tr.progress.len(), cfg.n_targets as usize);
            if tr.done {
                assert!(tr.next_progress.is_none());
            } else {
                assert!(tr.next_progress.is_some());
                assert!(!tr.next_candidates.is_empty());
                assert!(tr.next_candidates.len() <= CANDIDATE_CAP);
                for f in &tr.next_candidates {
                    assert_eq!(f.len(), cfg.d_a());
                }
            }
        }
    }

    #[test]
    fn reward_tracks_success_under_both_schemes() {
        for scheme in [RewardScheme::Intermediate, RewardScheme::Terminal] {
            let cfg = TrainConfig {
                scheme,
                n_targets: 1,
                ..tiny_cfg()
            };
            let out = train(&cfg, None).unwrap();
            assert_eq!(out.log.rows().len(), cfg.episodes);
            for row in out.log.rows() {
                assert!(row.macro_steps <= cfg.macro_cap);
                if row.success {
                    assert_eq!(row.total_reward, 1.0);
                } else {
                    assert_eq!(row.total_reward, 0.0);
                }
            }
        }
    }

    #[test]
    fn training_twice_is_byte_identical() {
        let cfg = tiny_cfg();
        let a = train(&cfg, None).unwrap();
        let b = train(&cfg, None).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.params, b.params);
        let empty = TrainConfig {
            episodes: 0,
            ..tiny_cfg()
        };
        let log = train(&empty, None).unwrap().log;
        assert_eq!(log.to_csv(), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn evaluation_seeds_are_held_out() {
        let cfg = tiny_cfg();
        let train_seeds: std::collections::BTreeSet<u64> = (0..cfg.n_scenes)
            .map(|i| train_scene_seed(cfg.seed, i))
            .collect();
        let eval_seeds: std::collections::BTreeSet<u64> =
            (0..50).map(|i| eval_scene_seed(cfg.seed, i)).collect();
        assert!(train_seeds.is_disjoint(&eval_seeds));
        assert_eq!(eval_seeds.len(), 50);
    }

    #[test]
    fn baseline_is_paired_with_evaluation_and_deterministic() {
        let cfg = tiny_cfg();
        let trained = train(&cfg, None).unwrap();
        let eval_a = evaluate(&trained.params, &cfg, 6).unwrap();
        let eval_b = evaluate(&trained.params, &cfg, 6).unwrap();
        let base_a = random_baseline(&cfg, 6).unwrap();
        let base_b = random_baseline(&cfg, 6).unwrap();
        assert_eq!(eval_a.to_csv(), eval_b.to_csv());
        assert_eq!(base_a.to_csv(), base_b.to_csv());
        let eval_seeds: Vec<u64> = eval_a.episodes.iter().map(|e| e.scene_seed).collect();
        let base_seeds: Vec<u64> = base_a.episodes.iter().map(|e| e.scene_seed).collect();
        assert_eq!(eval_seeds, base_seeds, "paired scene seeds");
        assert_eq!(eval_a.episodes.len(), 6);
        let text = eval_a.summary_text();
        assert!(text.contains("success_rate"));
    }

    #[test]
    fn checkpoint_reload_reproduces_evaluation() {
        let cfg = tiny_cfg();
        let trained = train(&cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.qnet");
        save_params(&trained.params, &path).unwrap();
        let reloaded: QParams<f64> = crate::qnet::load_params(&path).unwrap();
        let a = evaluate(&trained.params, &cfg, 4).unwrap();
        let b = evaluate(&reloaded, &cfg, 4).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn cadence_checkpoints_are_written() {
        let cfg = TrainConfig {
            checkpoint_every: 3,
            episodes: 7,
            ..tiny_cfg()
        };
        let dir = tempfile::tempdir().unwrap();
        train(&cfg, Some(dir.path())).unwrap();
        assert!(dir.path().join("checkpoint_00003.qnet").exists());
        assert!(dir.path().join("checkpoint_00006.qnet").exists());
        assert!(!dir.path().join("checkpoint_00007.qnet").exists());
    }
}
