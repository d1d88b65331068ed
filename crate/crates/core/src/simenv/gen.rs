//! Procedural scene generation: a bordered open floor partitioned by
//! doored divider walls, a random start pose, and seeded object placement
//! with reserved target colors. Layout and placement draw from separate
//! streams so objects can be re-placed per episode on a fixed layout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::{supercover_line, AgentPose, AppearancePatch, GridScene, SceneConfig, SceneObject};
use crate::grid::{Cell, Heading};
use crate::rng::{salt, stream};
use crate::scalar::Real;

/// Scene generation gave up: the config is invalid or the constraints
/// could not be satisfied within the retry budget.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("scene generation failed: {0}")]
pub struct GenerationFailed(pub String);

/// Base colors reserved for ranked targets; distractor colors keep their
/// distance from all of them regardless of how many ranks a scene uses.
const RESERVED_COLORS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Euclidean RGB distance a distractor base color must keep from every
/// reserved color. Tight enough that single observations of a distractor
/// can resemble a target through jitter; separation holds in expectation.
const DISTRACTOR_CLEARANCE: f64 = 0.25;

/// Per-pixel, per-channel Gaussian jitter applied to base colors.
const JITTER_SIGMA: f64 = 0.05;

/// Peak-to-peak range of the random rim texture around mid-gray.
const TEXTURE_AMPLITUDE: f64 = 0.5;

/// Minimum pairwise Chebyshev separation between objects, and minimum
/// distance from any object to the start cell.
const OBJECT_SEPARATION: u32 = 2;

/// Preferred Chebyshev radius around the start for object placement,
/// kept within sensor reach so an early sweep can seed the map densely.
/// Nodes still start unexplored: seeing an object is not visiting it.
const PLACEMENT_RADIUS: u32 = 7;

const PLACEMENT_ATTEMPTS: usize = 64;

/// Generate a scene where both layout and placement derive from `seed`.
pub fn generate_scene<T: Real>(
    seed: u64,
    cfg: &SceneConfig,
) -> Result<GridScene<T>, GenerationFailed> {
    generate_scene_with_placement(seed, seed, cfg)
}

/// Generate a scene whose layout (walls, start pose) derives from `seed`
/// while object positions, ranks, and appearances derive from
/// `placement_seed`. Same `seed` therefore means same layout.
pub fn generate_scene_with_placement<T: Real>(
    seed: u64,
    placement_seed: u64,
    cfg: &SceneConfig,
) -> Result<GridScene<T>, GenerationFailed> {
    validate(cfg)?;
    let mut layout_rng = stream(seed, salt::LAYOUT);
    let (walls, start_pose) = carve_layout(cfg, &mut layout_rng);
    let floor = floor_cells(cfg.width, &walls);

    let mut placement_rng = stream(placement_seed, salt::PLACEMENT);
    for _ in 0..PLACEMENT_ATTEMPTS {
        if let Some(objects) = try_place(cfg, &floor, &walls, start_pose, &mut placement_rng) {
            let scene = GridScene::from_parts(
                cfg.width,
                cfg.height,
                walls.clone(),
                objects,
                start_pose,
                cfg.n_targets,
            )
            .map_err(GenerationFailed)?;
            return Ok(scene);
        }
    }
    Err(GenerationFailed(format!(
        "no valid placement of {} objects after {PLACEMENT_ATTEMPTS} attempts",
        cfg.n_objects
    )))
}

fn validate(cfg: &SceneConfig) -> Result<(), GenerationFailed> {
    if cfg.width < 8 || cfg.height < 8 {
        return Err(GenerationFailed(format!(
            "grid {}x{} too small, need at least 8x8",
            cfg.width, cfg.height
        )));
    }
    if cfg.n_targets == 0 {
        return Err(GenerationFailed("need at least one target".into()));
    }
    if cfg.n_objects < cfg.n_targets {
        return Err(GenerationFailed(format!(
            "{} objects cannot hold {} target ranks",
            cfg.n_objects, cfg.n_targets
        )));
    }
    if cfg.patch_size == 0 {
        return Err(GenerationFailed("patch size must be positive".into()));
    }
    Ok(())
}

/// Doorway width cut into every divider segment.
const DOOR_WIDTH: i32 = 2;

/// Carve the layout: a walled border around open floor, partitioned by a
/// few straight divider walls in alternating orientations. Each divider
/// is split into segments by the perpendicular dividers it crosses, and
/// every segment gets a doorway, so the floor stays one connected region.
fn carve_layout(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> (Vec<bool>, AgentPose) {
    let (w, h) = (cfg.width as i32, cfg.height as i32);
    let mut walls = vec![false; (cfg.width * cfg.height) as usize];
    let set = |walls: &mut Vec<bool>, x: i32, y: i32, v: bool| {
        walls[(y * w + x) as usize] = v;
    };
    for x in 0..w {
        set(&mut walls, x, 0, true);
        set(&mut walls, x, h - 1, true);
    }
    for y in 0..h {
        set(&mut walls, 0, y, true);
        set(&mut walls, w - 1, y, true);
    }

    // Divider lines keep clearance from the border and from parallel
    // lines so every segment between crossings fits a doorway.
    let n_dividers = ((cfg.width * cfg.height) / 260).clamp(1, 5);
    let mut v_lines: Vec<i32> = Vec::new();
    let mut h_lines: Vec<i32> = Vec::new();
    let mut vertical = rng.random::<bool>();
    for _ in 0..n_dividers {
        let span = if vertical { w } else { h };
        let mut line = None;
        for _ in 0..40 {
            let c = rng.random_range(3..=span - 4);
            let parallel = if vertical { &v_lines } else { &h_lines };
            if parallel.iter().all(|&u| (u - c).abs() >= 4) {
                line = Some(c);
                break;
            }
        }
        let Some(line) = line else {
            vertical = !vertical;
            continue;
        };
        let (cuts, extent) = if vertical {
            (h_lines.clone(), h)
        } else {
            (v_lines.clone(), w)
        };
        for t in 1..extent - 1 {
            if vertical {
                set(&mut walls, line, t, true);
            } else {
                set(&mut walls, t, line, true);
            }
        }
        // Door every segment between crossings (and the border ends).
        let mut bounds = vec![0, extent - 1];
        bounds.extend(&cuts);
        bounds.sort_unstable();
        for pair in bounds.windows(2) {
            let (lo, hi) = (pair[0] + 1, pair[1] - 1);
            if hi - lo + 1 < DOOR_WIDTH {
                continue;
            }
            let door = rng.random_range(lo..=hi - DOOR_WIDTH + 1);
            for t in door..door + DOOR_WIDTH {
                if vertical {
                    set(&mut walls, line, t, false);
                } else {
                    set(&mut walls, t, line, false);
                }
            }
        }
        if vertical {
            v_lines.push(line);
        } else {
            h_lines.push(line);
        }
        vertical = !vertical;
    }

    let floor = floor_cells(cfg.width, &walls);
    let start_cell = floor[rng.random_range(0..floor.len())];
    let heading = Heading::ALL[rng.random_range(0..4)];
    (
        walls,
        AgentPose {
            cell: start_cell,
            heading,
        },
    )
}

/// Floor cells in row-major scan order (the canonical enumeration every
/// seeded choice indexes into).
fn floor_cells(width: u32, walls: &[bool]) -> Vec<Cell> {
    walls
        .iter()
        .enumerate()
        .filter(|(_, &w)| !w)
        .map(|(i, _)| Cell::new((i as u32 % width) as i32, (i as u32 / width) as i32))
        .collect()
}

/// One placement attempt: positions, ranks, and appearances. `None` when
/// the separation constraints or reachability cannot be met this round.
fn try_place<T: Real>(
    cfg: &SceneConfig,
    floor: &[Cell],
    walls: &[bool],
    start: AgentPose,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<SceneObject<T>>> {
    let eligible: Vec<Cell> = floor
        .iter()
        .copied()
        .filter(|c| c.chebyshev(start.cell) > OBJECT_SEPARATION)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    // Keep objects clustered in open view of the start so an initial sweep
    // meets most of them; fall back to the whole floor when the visible
    // neighborhood cannot hold the requested count at the separation spacing.
    let wall_at = |c: Cell| walls[(c.y as u32 * cfg.width + c.x as u32) as usize];
    let near: Vec<Cell> = eligible
        .iter()
        .copied()
        .filter(|&c| {
            c.chebyshev(start.cell) <= PLACEMENT_RADIUS
                && supercover_line(start.cell, c)
                    .into_iter()
                    .filter(|&s| s != start.cell && s != c)
                    .all(|s| !wall_at(s))
        })
        .collect();
    let eligible = if near.len() as u32 >= cfg.n_objects * OBJECT_SEPARATION * OBJECT_SEPARATION * 4
    {
        near
    } else {
        eligible
    };

    let mut cells: Vec<Cell> = Vec::with_capacity(cfg.n_objects as usize);
    for _ in 0..cfg.n_objects {
        let mut placed = false;
        for _ in 0..200 {
            let c = eligible[rng.random_range(0..eligible.len())];
            if cells.iter().all(|&p| p.chebyshev(c) >= OBJECT_SEPARATION) {
                cells.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }

    let mut order: Vec<usize> = (0..cfg.n_objects as usize).collect();
    order.shuffle(rng);
    let mut ranks: Vec<Option<u32>> = vec![None; cfg.n_objects as usize];
    for (r, &i) in order.iter().take(cfg.n_targets as usize).enumerate() {
        ranks[i] = Some(r as u32 + 1);
    }

    // Every target must be reachable from the start over floor cells.
    let reach = bfs_reachable(cfg.width, cfg.height, walls, start.cell);
    for (i, c) in cells.iter().enumerate() {
        if ranks[i].is_some() && !reach[(c.y as u32 * cfg.width + c.x as u32) as usize] {
            return None;
        }
    }

    let jitter = Normal::new(0.0, JITTER_SIGMA).expect("constant sigma is valid");
    let objects = cells
        .iter()
        .zip(&ranks)
        .map(|(&cell, &rank)| {
            let base = match rank {
                Some(r) => RESERVED_COLORS[(r - 1) as usize],
                None => distractor_color(rng)?,
            };
            // Identity color fills the patch core; the rim carries a random
            // per-object texture, so class evidence is a subset of the pixels.
            let p = cfg.patch_size as i64;
            let core = |v: i64| v >= p / 4 && v < p - p / 4;
            let values = (0..p * p)
                .flat_map(|i| {
                    let colored = core(i % p) && core(i / p);
                    (0..3).map(move |ch| (colored, ch))
                })
                .map(|(colored, ch)| {
                    let v = if colored {
                        (base[ch] + jitter.sample(rng)).clamp(0.0, 1.0)
                    } else {
                        0.5 + (rng.random::<f64>() - 0.5) * TEXTURE_AMPLITUDE
                    };
                    T::from_f64_lossy(v)
                })
                .collect();
            let appearance =
                AppearancePatch::new(cfg.patch_size, values).expect("clamped values are in range");
            Some(SceneObject {
                cell,
                appearance,
                target_rank: rank,
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(objects)
}

/// Uniform RGB draw rejected until it clears every reserved target color.
fn distractor_color(rng: &mut ChaCha8Rng) -> Option<[f64; 3]> {
    for _ in 0..256 {
        let rgb = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let clear = RESERVED_COLORS.iter().all(|r| {
            let d2: f64 = (0..3).map(|i| (rgb[i] - r[i]).powi(2)).sum();
            d2.sqrt() >= DISTRACTOR_CLEARANCE
        });
        if clear {
            return Some(rgb);
        }
    }
    None
}

fn bfs_reachable(width: u32, height: u32, walls: &[bool], start: Cell) -> Vec<bool> {
    let idx = |c: Cell| (c.y as u32 * width + c.x as u32) as usize;
    let mut seen = vec![false; (width * height) as usize];
    let mut queue = std::collections::VecDeque::new();
    seen[idx(start)] = true;
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors4() {
            if n.x < 0 || n.y < 0 || n.x as u32 >= width || n.y as u32 >= height {
                continue;
            }
            if walls[idx(n)] || seen[idx(n)] {
                continue;
            }
            seen[idx(n)] = true;
            queue.push_back(n);
        }
    }
    seen
}
