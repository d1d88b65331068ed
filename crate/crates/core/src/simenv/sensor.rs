//! Ray-cast detection: field-of-view test, wall occlusion via a supercover
//! line walk, and an optional position-noise hook.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AgentPose, Detection, GridScene, SensorConfig};
use crate::grid::Cell;
use crate::scalar::Real;

/// Every cell whose closed unit square the segment between the two cell
/// centers intersects, in walk order from `a` to `b`. Exact integer
/// arithmetic; a pass through a lattice corner contributes both side cells.
pub fn supercover_line(a: Cell, b: Cell) -> Vec<Cell> {
    let (nx, ny) = ((b.x - a.x).abs() as i64, (b.y - a.y).abs() as i64);
    let sx = (b.x - a.x).signum();
    let sy = (b.y - a.y).signum();
    let mut cells = Vec::with_capacity((nx + ny + 1) as usize);
    let (mut ix, mut iy) = (0i64, 0i64);
    cells.push(a);
    while ix < nx || iy < ny {
        // Compare the next vertical and horizontal half-grid crossings:
        // (ix + 1/2) / nx versus (iy + 1/2) / ny, cross-multiplied.
        let decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx;
        if decision == 0 {
            // Through a corner: both neighbors touch the segment.
            cells.push(Cell::new(a.x + (ix as i32 + 1) * sx, a.y + iy as i32 * sy));
            cells.push(Cell::new(a.x + ix as i32 * sx, a.y + (iy as i32 + 1) * sy));
            ix += 1;
            iy += 1;
        } else if decision < 0 {
            ix += 1;
        } else {
            iy += 1;
        }
        cells.push(Cell::new(a.x + ix as i32 * sx, a.y + iy as i32 * sy));
    }
    cells
}

/// True when no wall cell lies strictly between `a` and `b` along the
/// segment. Endpoints never occlude.
pub fn los_clear<T: Real>(scene: &GridScene<T>, a: Cell, b: Cell) -> bool {
    supercover_line(a, b)
        .into_iter()
        .filter(|&c| c != a && c != b)
        .all(|c| !scene.in_bounds(c) || !scene.is_wall(c))
}

fn in_fov(pose: AgentPose, target: Cell, halfwidth_deg: f64) -> bool {
    let (dx, dy) = (target.x - pose.cell.x, target.y - pose.cell.y);
    if dx == 0 && dy == 0 {
        return true;
    }
    let (hx, hy) = pose.heading.delta();
    let dot = (hx * dx + hy * dy) as f64;
    let len = ((dx * dx + dy * dy) as f64).sqrt();
    // Boundary-inclusive: an object exactly on the cone edge counts.
    dot >= len * halfwidth_deg.to_radians().cos() - 1e-9
}

/// Detect every object within range, inside the field of view, and not
/// occluded by a wall. Positions are ground truth; order follows the
/// scene's object list.
pub fn observe<T: Real>(
    scene: &GridScene<T>,
    pose: AgentPose,
    cfg: &SensorConfig,
) -> Vec<Detection<T>> {
    scene
        .objects()
        .iter()
        .filter_map(|obj| {
            let distance = pose.cell.chebyshev(obj.cell);
            if distance > cfg.range {
                return None;
            }
            if !in_fov(pose, obj.cell, cfg.fov_halfwidth_deg) {
                return None;
            }
            if !los_clear(scene, pose.cell, obj.cell) {
                return None;
            }
            Some(Detection {
                position: obj.cell,
                appearance: obj.appearance.clone(),
                distance,
            })
        })
        .collect()
}

/// Position-noise hook: jitter each detection by rounded Gaussian offsets,
/// clamped to passable cells (a draw landing in a wall keeps the true
/// position). `sigma <= 0` returns the input untouched.
pub fn apply_position_noise<T: Real>(
    scene: &GridScene<T>,
    detections: &mut [Detection<T>],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for det in detections {
        let dx = normal.sample(rng).round() as i32;
        let dy = normal.sample(rng).round() as i32;
        let jittered = det.position.offset(dx, dy);
        if !scene.is_blocked(jittered) {
            det.position = jittered;
        }
    }
}
