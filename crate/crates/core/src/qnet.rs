//! Action-value network and its training math. One hidden dense layer
//! scores `flatten(feature ⊗ progress)` inputs; gradients are derived by
//! hand so training is exact, dependency-free arithmetic.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Real;
use crate::simenv::FormatError;
use crate::topomap::{NodeId, TopoMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QnetError {
    #[error("input length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty map")]
    EmptyMap,
    #[error("non-terminal transition with no next candidates")]
    EmptyCandidates,
}

/// One-hot task-progress vector of length `n_targets`; the hot index is
/// the number of subgoals achieved. Terminal progress is never encoded:
/// episodes end when the count reaches the vector length.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressVector<T: Real> {
    values: Vec<T>,
}

impl<T: Real> ProgressVector<T> {
    /// `None` when `hot >= d_p` (terminal progress has no encoding).
    pub fn one_hot(hot: usize, d_p: usize) -> Option<Self> {
        if hot >= d_p {
            return None;
        }
        let mut values = vec![T::zero(); d_p];
        values[hot] = T::one();
        Some(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn hot_index(&self) -> usize {
        self.values
            .iter()
            .position(|v| *v == T::one())
            .expect("one entry is hot by construction")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One experience the learner replays. Features are stored concretely
/// (never node indices) so targets stay well-defined as the map grows;
/// `next_progress` is `None` exactly for terminal transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T: Real> {
    pub action_feature: Vec<T>,
    pub progress: ProgressVector<T>,
    pub reward: T,
    pub next_progress: Option<ProgressVector<T>>,
    pub next_candidates: Vec<Vec<T>>,
    pub done: bool,
}

/// Network parameters: `q = W2 * relu(W1 * x + b1) + b2` over inputs of
/// length `d_a * d_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct QParams<T: Real> {
    d_a: usize,
    d_p: usize,
    h: usize,
    /// `h` rows by `d_a * d_p` columns, row-major.
    w1: Vec<T>,
    b1: Vec<T>,
    w2: Vec<T>,
    b2: T,
}

impl<T: Real> QParams<T> {
    /// Glorot-uniform weights (`±sqrt(6 / (fan_in + fan_out))`), zero
    /// biases.
    pub fn init(d_a: usize, d_p: usize, h: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(d_a > 0 && d_p > 0 && h > 0);
        let d_in = d_a * d_p;
        let mut uniform = |limit: f64, n: usize| -> Vec<T> {
            (0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random::<f64>(rng);
                    T::from_f64_lossy((2.0 * u - 1.0) * limit)
                })
                .collect()
        };
        let lim1 = (6.0 / (d_in + h) as f64).sqrt();
        let w1 = uniform(lim1, h * d_in);
        let lim2 = (6.0 / (h + 1) as f64).sqrt();
        let w2 = uniform(lim2, h);
        Self {
            d_a,
            d_p,
            h,
            w1,
            b1: vec![T::zero(); h],
            w2,
            b2: T::zero(),
        }
    }

    /// All-zero parameters (tests and fixed-point checks).
    pub fn zeros(d_a: usize, d_p: usize, h: usize) -> Self {
        Self {
            d_a,
            d_p,
            h,
            w1: vec![T::zero(); h * d_a * d_p],
            b1: vec![T::zero(); h],
            w2: vec![T::zero(); h],
            b2: T::zero(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d_a, self.d_p, self.h)
    }

    pub fn input_len(&self) -> usize {
        self.d_a * self.d_p
    }

    /// Flat view over every parameter, W1, b1, W2, b2 order (testing and
    /// serialization).
    pub fn flat(&self) -> Vec<T> {
        let mut out = self.w1.clone();
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    /// Rebuild from the `flat` layout.
    pub fn from_flat(d_a: usize, d_p: usize, h: usize, flat: &[T]) -> Option<Self> {
        let d_in = d_a * d_p;
        if flat.len() != h * d_in + h + h + 1 {
            return None;
        }
        let (w1, rest) = flat.split_at(h * d_in);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        Some(Self {
            d_a,
            d_p,
            h,
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        })
    }

    /// Zero every W1 column outside the progress block `hot` (testing the
    /// outer-product block structure).
    pub fn with_only_block(&self, hot: usize) -> Self {
        let mut out = self.clone();
        for row in 0..self.h {
            for i in 0..self.d_a {
                for j in 0..self.d_p {
                    if j != hot {
                        out.w1[row * self.input_len() + i * self.d_p + j] = T::zero();
                    }
                }
            }
        }
        out
    }
}

/// `flatten(f ⊗ p)`, feature index major: `out[i * d_p + j] = f[i] * p[j]`.
/// With one-hot `p` the block at the hot index holds `f`, all else zero.
pub fn outer_input<T: Real>(f: &[T], p: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len() * p.len());
    for &fi in f {
        for &pj in p {
            out.push(fi * pj);
        }
    }
    out
}

/// Pre-activations saved by [`forward`] for [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache<T: Real> {
    x: Vec<T>,
    z1: Vec<T>,
}

/// Evaluate `q = W2 * relu(W1 * x + b1) + b2`.
pub fn forward<T: Real>(params: &QParams<T>, x: &[T]) -> Result<(T, ForwardCache<T>), QnetError> {
    let d_in = params.input_len();
    if x.len() != d_in {
        return Err(QnetError::ShapeMismatch {
            expected: d_in,
            got: x.len(),
        });
    }
    let mut z1 = Vec::with_capacity(params.h);
    for row in 0..params.h {
        let w = &params.w1[row * d_in..(row + 1) * d_in];
        let z = w.iter().zip(x).map(|(&wi, &xi)| wi * xi).sum::<T>() + params.b1[row];
        z1.push(z);
    }
    let q = z1
        .iter()
        .zip(&params.w2)
        .map(|(&z, &w)| w * z.max(T::zero()))
        .sum::<T>()
        + params.b2;
    Ok((
        q,
        ForwardCache { x: x.to_vec(), z1 },
    ))
}

/// Gradients over every parameter, shaped like [`QParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct QGrads<T: Real> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

impl<T: Real> QGrads<T> {
    pub fn zeros_like(params: &QParams<T>) -> Self {
        Self {
            w1: vec![T::zero(); params.w1.len()],
            b1: vec![T::zero(); params.h],
            w2: vec![T::zero(); params.h],
            b2: T::zero(),
        }
    }

    fn add_scaled(&mut self, other: &QGrads<T>, scale: T) {
        for (a, &b) in self.w1.iter_mut().zip(&other.w1) {
            *a += scale * b;
        }
        for (a, &b) in self.b1.iter_mut().zip(&other.b1) {
            *a += scale * b;
        }
        for (a, &b) in self.w2.iter_mut().zip(&other.w2) {
            *a += scale * b;
        }
        self.b2 += scale * other.b2;
    }
}

/// Exact gradients of `dq * q` with respect to every parameter. The ReLU
/// subgradient at zero is zero (strict `z > 0` gate).
pub fn backward<T: Real>(params: &QParams<T>, cache: &ForwardCache<T>, dq: T) -> QGrads<T> {
    let d_in = params.input_len();
    let mut grads = QGrads::zeros_like(params);
    grads.b2 = dq;
    for row in 0..params.h {
        let z = cache.z1[row];
        grads.w2[row] = dq * z.max(T::zero());
        if z > T::zero() {
            let dz = dq * params.w2[row];
            grads.b1[row] = dz;
            let gw = &mut grads.w1[row * d_in..(row + 1) * d_in];
            for (g, &xi) in gw.iter_mut().zip(&cache.x) {
                *g = dz * xi;
            }
        }
    }
    grads
}

/// Q-value of every map node for one progress vector, ascending by node
/// id, from each node's stored appearance.
pub fn q_all_nodes<T: Real>(
    params: &QParams<T>,
    map: &TopoMap<T>,
    p: &ProgressVector<T>,
) -> Result<Vec<(NodeId, T)>, QnetError> {
    if map.is_empty() {
        return Err(QnetError::EmptyMap);
    }
    map.nodes()
        .iter()
        .map(|n| {
            let x = outer_input(n.appearance.values(), p.values());
            forward(params, &x).map(|(q, _)| (n.id, q))
        })
        .collect()
}

/// Pick a macro target: with probability `epsilon` a uniform random node,
/// otherwise the argmax of `Q + bonus * [node unexplored]`, ties to the
/// smallest id. The bonus shapes selection only; stored values and TD
/// targets never see it.
pub fn select_action<T: Real>(
    qvals: &[(NodeId, T)],
    unexplored: &[NodeId],
    bonus: T,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> NodeId {
    assert!(!qvals.is_empty(), "selection needs at least one candidate");
    assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rand::Rng::random::<f64>(rng) < epsilon {
        let i = rand::Rng::random_range(rng, 0..qvals.len());
        return qvals[i].0;
    }
    let mut best = None;
    for &(id, q) in qvals {
        let effective = if unexplored.contains(&id) { q + bonus } else { q };
        match best {
            Some((_, bq)) if effective <= bq => {}
            _ => best = Some((id, effective)),
        }
    }
    best.expect("non-empty candidates").0
}

/// One TD(0) gradient step on `params` from a replay batch.
///
/// Targets come from `target_params` over each transition's stored
/// next-candidate features: `y = r` when done, else `r + gamma * max_f'
/// Q_target(f', p')`. Loss is mean squared error; the summed gradient is
/// clipped per parameter to `[-1, 1]` before one SGD step. Returns the
/// pre-step loss.
pub fn td_train_step<T: Real>(
    params: &mut QParams<T>,
    target_params: &QParams<T>,
    batch: &[Transition<T>],
    gamma: T,
    lr: T,
) -> Result<T, QnetError> {
    assert!(!batch.is_empty(), "training batch must be non-empty");
    let b = T::from_f64_lossy(batch.len() as f64);
    let mut grads = QGrads::zeros_like(params);
    let mut loss = T::zero();
    let two = T::from_f64_lossy(2.0);
    for tr in batch {
        let y = if tr.done {
            tr.reward
        } else {
            let p_next = tr
                .next_progress
                .as_ref()
                .expect("non-terminal transitions carry next progress");
            let mut best: Option<T> = None;
            for f_next in &tr.next_candidates {
                let x = outer_input(f_next, p_next.values());
                let (q, _) = forward(target_params, &x)?;
                best = Some(match best {
                    Some(b) if b >= q => b,
                    _ => q,
                });
            }
            tr.reward + gamma * best.ok_or(QnetError::EmptyCandidates)?
        };
        let x = outer_input(&tr.action_feature, tr.progress.values());
        let (q, cache) = forward(params, &x)?;
        let err = q - y;
        loss += err * err;
        // d(mean loss)/dq = 2 * (q - y) / batch.
        let sample = backward(params, &cache, two * err / b);
        grads.add_scaled(&sample, T::one());
    }

    let clip = |g: T| g.min(T::one()).max(-T::one());
    let d_in = params.input_len();
    for i in 0..params.h * d_in {
        params.w1[i] -= lr * clip(grads.w1[i]);
    }
    for i in 0..params.h {
        params.b1[i] -= lr * clip(grads.b1[i]);
        params.w2[i] -= lr * clip(grads.w2[i]);
    }
    params.b2 -= lr * clip(grads.b2);
    Ok(loss / b)
}

/// Deep copy for the slow-moving target network.
pub fn sync_target<T: Real>(params: &QParams<T>) -> QParams<T> {
    params.clone()
}

/// Write `qnet v1 <d_a> <d_p> <h>` then all parameters as little-endian
/// 64-bit reals, W1, b1, W2, b2 row-major.
pub fn save_params<T: Real>(params: &QParams<T>, path: &Path) -> Result<(), FormatError> {
    let mut bytes = format!("qnet v1 {} {} {}\n", params.d_a, params.d_p, params.h).into_bytes();
    for v in params.flat() {
        bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_params<T: Real>(path: &Path) -> Result<QParams<T>, FormatError> {
    let bytes = std::fs::read(path)?;
    let parse = |msg: &str| FormatError::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| parse("header is not UTF-8"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 5 || tok[0] != "qnet" || tok[1] != "v1" {
        return Err(parse("expected `qnet v1 <d_a> <d_p> <h>`"));
    }
    let dim = |s: &str| -> Result<usize, FormatError> {
        s.parse()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| parse(&format!("bad dimension `{s}`")))
    };
    let (d_a, d_p, h) = (dim(tok[2])?, dim(tok[3])?, dim(tok[4])?);
    let body = &bytes[nl + 1..];
    let expected = h * d_a * d_p + h + h + 1;
    if body.len() != expected * 8 {
        return Err(parse(&format!(
            "parameter payload holds {} bytes, expected {}",
            body.len(),
            expected * 8
        )));
    }
    let flat: Vec<T> = body
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    QParams::from_flat(d_a, d_p, h, &flat).ok_or_else(|| parse("inconsistent parameter count"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::rng::{salt, stream};
    use crate::simenv::{AppearancePatch, Detection};
    use crate::topomap::{MapConfig, TopoMap};
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        stream(seed, salt::INIT)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn outer_input_places_the_hot_block() {
        let f = [0.5, 0.25];
        assert_eq!(outer_input(&f, &[1.0, 0.0]), vec![0.5, 0.0, 0.25, 0.0]);
        assert_eq!(outer_input(&f, &[0.0, 1.0]), vec![0.0, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn outer_input_matches_nested_loop_oracle() {
        let mut r = rng(1);
        for _ in 0..50 {
            let (da, dp) = (r.random_range(1..8), r.random_range(1..5));
            let f = random_vec(&mut r, da);
            let p = random_vec(&mut r, dp);
            let got = outer_input(&f, &p);
            assert_eq!(got.len(), da * dp);
            for i in 0..da {
                for j in 0..dp {
                    assert_eq!(got[i * dp + j], f[i] * p[j]);
                }
            }
        }
    }

    #[test]
    fn forward_zero_params_is_zero_and_bias_passes_through() {
        let zero = QParams::<f64>::zeros(3, 2, 4);
        let x = vec![0.3; 6];
        assert_eq!(forward(&zero, &x).unwrap().0, 0.0);
        let mut biased = zero.clone();
        biased.b2 = 2.5;
        assert_eq!(forward(&biased, &x).unwrap().0, 2.5);
        assert_eq!(
            forward(&zero, &[0.0; 5]),
            Err(QnetError::ShapeMismatch { expected: 6, got: 5 })
        );
    }

    #[test]
    fn forward_matches_reference_arithmetic() {
        let mut r = rng(2);
        for _ in 0..20 {
            let (da, dp, h) = (r.random_range(1..6), r.random_range(1..4), r.random_range(1..8));
            let params = QParams::<f64>::init(da, dp, h, &mut r);
            let x = random_vec(&mut r, da * dp);
            let (q, _) = forward(&params, &x).unwrap();
            // Naive re-evaluation straight from the flat layout.
            let flat = params.flat();
            let d_in = da * dp;
            let mut expect = flat[h * d_in + h + h]; // b2
            for row in 0..h {
                let mut z = flat[h * d_in + row]; // b1[row]
                for i in 0..d_in {
                    z += flat[row * d_in + i] * x[i];
                }
                if z > 0.0 {
                    expect += flat[h * d_in + h + row] * z; // w2[row]
                }
            }
            assert!((q - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_zero_dq_and_output_bias_identities() {
        let mut r = rng(3);
        let params = QParams::<f64>::init(4, 2, 5, &mut r);
        let x = random_vec(&mut r, 8);
        let (_, cache) = forward(&params, &x).unwrap();
        let zeros = backward(&params, &cache, 0.0);
        assert_eq!(zeros, QGrads::zeros_like(&params));
        let g = backward(&params, &cache, 1.7);
        assert_eq!(g.b2, 1.7);
    }

    /// Central-difference gradient of q with respect to one flat slot.
    fn numeric_grad(params: &QParams<f64>, x: &[f64], slot: usize) -> f64 {
        let eps = 1e-5;
        let (da, dp, h) = params.dims();
        let mut flat = params.flat();
        flat[slot] += eps;
        let plus = forward(&QParams::from_flat(da, dp, h, &flat).unwrap(), x)
            .unwrap()
            .0;
        flat[slot] -= 2.0 * eps;
        let minus = forward(&QParams::from_flat(da, dp, h, &flat).unwrap(), x)
            .unwrap()
            .0;
        (plus - minus) / (2.0 * eps)
    }

    fn grads_flat(g: &QGrads<f64>) -> Vec<f64> {
        let mut out = g.w1.clone();
        out.extend_from_slice(&g.b1);
        out.extend_from_slice(&g.w2);
        out.push(g.b2);
        out
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut r = rng(4);
        let mut checked = 0;
        while checked < 30 {
            let (da, dp, h) = (r.random_range(1..5), r.random_range(1..4), r.random_range(2..7));
            let params = QParams::<f64>::init(da, dp, h, &mut r);
            let x = random_vec(&mut r, da * dp);
            let (_, cache) = forward(&params, &x).unwrap();
            // Pre-activations near the ReLU kink make finite differences
            // straddle the non-smooth point; redraw those samples.
            if cache.z1.iter().any(|z| z.abs() < 1e-3) {
                continue;
            }
            let analytic = grads_flat(&backward(&params, &cache, 1.0));
            for (slot, &a) in analytic.iter().enumerate() {
                let n = numeric_grad(&params, &x, slot);
                let denom = a.abs() + n.abs();
                assert!(
                    (a - n).abs() <= 1e-8 || (a - n).abs() / denom < 1e-4,
                    "slot {slot}: analytic {a}, numeric {n}"
                );
            }
            checked += 1;
        }
    }

    fn map_with_patches(patches: &[[f64; 3]]) -> TopoMap<f64> {
        let mut map = TopoMap::new(MapConfig::default());
        let dets: Vec<Detection<f64>> = patches
            .iter()
            .enumerate()
            .map(|(i, &rgb)| Detection {
                position: Cell::new(i as i32 * 3, 0),
                appearance: AppearancePatch::solid(2, rgb),
                distance: 0,
            })
            .collect();
        map.integrate_observation(&dets);
        map
    }

    #[test]
    fn q_all_nodes_matches_per_node_forward() {
        let mut r = rng(5);
        let map = map_with_patches(&[[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.9, 0.1, 0.1]]);
        let params = QParams::<f64>::init(12, 2, 6, &mut r);
        let p = ProgressVector::one_hot(1, 2).unwrap();
        let qs = q_all_nodes(&params, &map, &p).unwrap();
        assert_eq!(qs.len(), 3);
        for (id, q) in &qs {
            let node = map.node(*id).unwrap();
            let x = outer_input(node.appearance.values(), p.values());
            assert_eq!(*q, forward(&params, &x).unwrap().0);
        }
        // Identical appearances score identically.
        assert_eq!(qs[0].1, qs[2].1);
        let empty: TopoMap<f64> = TopoMap::new(MapConfig::default());
        assert_eq!(q_all_nodes(&params, &empty, &p), Err(QnetError::EmptyMap));
    }

    #[test]
    fn selection_is_greedy_with_bonus_and_id_tie_break() {
        let mut r = rng(6);
        let qvals = vec![(NodeId(0), 1.0), (NodeId(1), 0.5)];
        assert_eq!(select_action(&qvals, &[], 1.0, 0.0, &mut r), NodeId(0));
        assert_eq!(
            select_action(&qvals, &[NodeId(1)], 1.0, 0.0, &mut r),
            NodeId(1),
            "0.5 + 1.0 beats 1.0"
        );
        let tied = vec![(NodeId(2), 0.7), (NodeId(5), 0.7)];
        assert_eq!(select_action(&tied, &[], 0.5, 0.0, &mut r), NodeId(2));
        // bonus=0 makes the unexplored set irrelevant.
        assert_eq!(
            select_action(&qvals, &[NodeId(1)], 0.0, 0.0, &mut r),
            NodeId(0)
        );
    }

    #[test]
    fn epsilon_one_explores_uniformly() {
        let mut r = rng(7);
        let qvals = vec![(NodeId(0), 9.0), (NodeId(1), 0.0), (NodeId(2), 0.0)];
        let mut counts = [0u32; 3];
        for _ in 0..3000 {
            counts[select_action(&qvals, &[], 0.0, 1.0, &mut r).0 as usize] += 1;
        }
        for c in counts {
            assert!((700..1300).contains(&c), "counts {counts:?}");
        }
    }

    fn transition(
        f: Vec<f64>,
        hot: usize,
        d_p: usize,
        reward: f64,
        next: Option<(usize, Vec<Vec<f64>>)>,
    ) -> Transition<f64> {
        let done = next.is_none();
        let (next_progress, next_candidates) = match next {
            Some((nh, cands)) => (Some(ProgressVector::one_hot(nh, d_p).unwrap()), cands),
            None => (None, Vec::new()),
        };
        Transition {
            action_feature: f,
            progress: ProgressVector::one_hot(hot, d_p).unwrap(),
            reward,
            next_progress,
            next_candidates,
            done,
        }
    }

    #[test]
    fn exact_fixed_point_leaves_params_unchanged() {
        // b2 = 1 and zero weights: Q = 1 everywhere; a done transition
        // with r = 1 has zero error, so the update is a no-op.
        let mut params = QParams::<f64>::zeros(3, 1, 4);
        params.b2 = 1.0;
        let target = sync_target(&params);
        let before = params.clone();
        let batch = vec![transition(vec![0.2, 0.4, 0.6], 0, 1, 1.0, None)];
        let loss = td_train_step(&mut params, &target, &batch, 0.95, 1e-3).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn zero_gamma_reduces_targets_to_rewards() {
        let mut r = rng(8);
        let mut params = QParams::<f64>::init(3, 2, 5, &mut r);
        let target = sync_target(&params);
        let f = vec![0.1, 0.5, 0.9];
        let cands = vec![vec![0.9, 0.9, 0.9]];
        let batch = vec![transition(f.clone(), 0, 2, 0.25, Some((1, cands)))];
        let x = outer_input(&f, batch[0].progress.values());
        let q0 = forward(&params, &x).unwrap().0;
        let loss = td_train_step(&mut params, &target, &batch, 0.0, 1e-3).unwrap();
        assert!((loss - (q0 - 0.25).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn training_descends_on_a_fixed_batch() {
        let mut r = rng(9);
        let mut params = QParams::<f64>::init(4, 2, 8, &mut r);
        let target = sync_target(&params);
        let batch: Vec<Transition<f64>> = (0..6)
            .map(|i| {
                let f = random_vec(&mut r, 4);
                if i % 2 == 0 {
                    transition(f, 0, 2, 1.0, None)
                } else {
                    let cands = vec![random_vec(&mut r, 4), random_vec(&mut r, 4)];
                    transition(f, 0, 2, 0.0, Some((1, cands)))
                }
            })
            .collect();
        let before = td_train_step(&mut params, &target, &batch, 0.95, 1e-3).unwrap();
        let after = td_train_step(&mut params, &target, &batch, 0.95, 1e-3).unwrap();
        assert!(after < before, "loss rose: {before} -> {after}");
    }

    #[test]
    fn missing_candidates_is_an_error() {
        let mut r = rng(10);
        let mut params = QParams::<f64>::init(2, 1, 3, &mut r);
        let target = sync_target(&params);
        let batch = vec![Transition {
            action_feature: vec![0.5, 0.5],
            progress: ProgressVector::one_hot(0, 1).unwrap(),
            reward: 0.0,
            next_progress: ProgressVector::one_hot(0, 1),
            next_candidates: Vec::new(),
            done: false,
        }];
        assert_eq!(
            td_train_step(&mut params, &target, &batch, 0.9, 1e-3),
            Err(QnetError::EmptyCandidates)
        );
    }

    #[test]
    fn target_network_is_isolated_from_updates() {
        let mut r = rng(11);
        let mut params = QParams::<f64>::init(3, 1, 6, &mut r);
        let target = sync_target(&params);
        let x = random_vec(&mut r, 3);
        let before_q = forward(&target, &x).unwrap().0;
        assert_eq!(forward(&params, &x).unwrap().0, before_q);
        for _ in 0..20 {
            let batch = vec![transition(random_vec(&mut r, 3), 0, 1, 1.0, None)];
            td_train_step(&mut params, &target, &batch, 0.95, 1e-2).unwrap();
        }
        assert_eq!(forward(&target, &x).unwrap().0, before_q);
        assert_ne!(forward(&params, &x).unwrap().0, before_q);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut r = rng(12);
        let params = QParams::<f64>::init(6, 3, 10, &mut r);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.qnet");
        save_params(&params, &path).unwrap();
        let back: QParams<f64> = load_params(&path).unwrap();
        assert_eq!(params, back);
        assert!(load_params::<f64>(&dir.path().join("missing.qnet")).is_err());
        std::fs::write(dir.path().join("bad.qnet"), b"qnet v1 2 2\n").unwrap();
        assert!(load_params::<f64>(&dir.path().join("bad.qnet")).is_err());
        std::fs::write(dir.path().join("short.qnet"), b"qnet v1 2 1 3\nxx").unwrap();
        assert!(load_params::<f64>(&dir.path().join("short.qnet")).is_err());
    }

    #[test]
    fn single_precision_instantiation_trains_and_checks() {
        let mut r = rng(13);
        let mut params = QParams::<f32>::init(3, 2, 4, &mut r);
        let x: Vec<f32> = (0..6).map(|_| r.random::<f32>()).collect();
        let (_, cache) = forward(&params, &x).unwrap();
        let g = backward(&params, &cache, 1.0);
        // Loose single-precision finite-difference spot check on b2.
        let eps = 1e-2f32;
        let mut plus = params.clone();
        plus.b2 += eps;
        let mut minus = params.clone();
        minus.b2 -= eps;
        let numeric =
            (forward(&plus, &x).unwrap().0 - forward(&minus, &x).unwrap().0) / (2.0 * eps);
        assert!((g.b2 - numeric).abs() < 1e-2);
        let target = sync_target(&params);
        let batch = vec![Transition {
            action_feature: vec![0.2, 0.5, 0.8],
            progress: ProgressVector::one_hot(0, 2).unwrap(),
            reward: 1.0,
            next_progress: None,
            next_candidates: Vec::new(),
            done: true,
        }];
        td_train_step(&mut params, &target, &batch, 0.95f32, 1e-3).unwrap();
    }
}
