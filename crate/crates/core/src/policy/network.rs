use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureGrid;
use crate::geometry::{ActionGrid, FixationPoint};
use crate::{par, Error, Result};

const LN_EPS: f64 = 1e-5;
const STD_EPS: f64 = 1e-12;

/// Widths of the pointwise stack for `c` input channels: c → c/4 → c/16 → 1,
/// with hidden layers at least two wide.
pub fn default_widths(c: usize) -> Vec<usize> {
    vec![c, (c / 4).max(2), (c / 16).max(2), 1]
}

#[derive(Clone, Copy, Debug)]
struct LayerOffsets {
    inp: usize,
    out: usize,
    w: usize,
    b: usize,
    /// Gain and shift of the layer norm; absent on the output layer.
    norm: Option<(usize, usize)>,
}

fn layout(widths: &[usize]) -> (Vec<LayerOffsets>, usize) {
    let mut layers = Vec::new();
    let mut at = 0;
    let last = widths.len() - 1;
    for l in 0..last {
        let (inp, out) = (widths[l], widths[l + 1]);
        let w = at;
        at += inp * out;
        let b = at;
        at += out;
        let norm = if l + 1 < last {
            let g = at;
            at += out;
            let s = at;
            at += out;
            Some((g, s))
        } else {
            None
        };
        layers.push(LayerOffsets { inp, out, w, b, norm });
    }
    (layers, at)
}

/// One per-cell scoring network: input standardization, then pointwise
/// linear → layer norm → ReLU blocks and a final linear map to one score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNetwork {
    pub widths: Vec<usize>,
    /// Flat parameters: per layer W (out×in, row-major), b, then γ and β on
    /// hidden layers.
    pub params: Vec<f64>,
    /// Which fixation (1-based) this network chooses.
    pub fixation_index: usize,
}

/// Intermediate values kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Per layer, per cell activations entering the layer.
    inputs: Vec<Vec<f64>>,
    /// Per hidden layer: normalized pre-activations and inverse std.
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    /// Per hidden layer post-affine values (before ReLU).
    pre_relu: Vec<Vec<f64>>,
    cells: usize,
}

impl PolicyNetwork {
    /// Glorot-uniform weights, zero biases, unit gains.
    pub fn new<R: Rng + ?Sized>(widths: Vec<usize>, fixation_index: usize, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) || *widths.last().unwrap() != 1 {
            return Err(Error::domain(format!("invalid layer widths {widths:?}")));
        }
        let (layers, n) = layout(&widths);
        let mut params = vec![0.0; n];
        for l in &layers {
            let a = (6.0 / (l.inp + l.out) as f64).sqrt();
            for p in &mut params[l.w..l.w + l.inp * l.out] {
                *p = rng.random_range(-a..=a);
            }
            if let Some((g, _)) = l.norm {
                params[g..g + l.out].fill(1.0);
            }
        }
        Ok(PolicyNetwork {
            widths,
            params,
            fixation_index,
        })
    }

    pub fn zeros(widths: Vec<usize>, fixation_index: usize) -> Self {
        let (_, n) = layout(&widths);
        PolicyNetwork {
            widths,
            params: vec![0.0; n],
            fixation_index,
        }
    }

    pub fn input_channels(&self) -> usize {
        self.widths[0]
    }

    pub fn forward(&self, feats: &FeatureGrid) -> Result<Vec<f64>> {
        self.forward_cached(feats).map(|(m, _)| m)
    }

    pub fn forward_cached(&self, feats: &FeatureGrid) -> Result<(Vec<f64>, ForwardCache)> {
        if feats.channels != self.input_channels() {
            return Err(Error::shape(format!(
                "network expects {} channels, features have {}",
                self.input_channels(),
                feats.channels
            )));
        }
        feats.check_finite()?;
        let (layers, n) = layout(&self.widths);
        if n != self.params.len() {
            return Err(Error::shape("parameter vector does not match the layer widths"));
        }
        let cells = feats.cells();
        let p = &self.params;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(layers.len()),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre_relu: Vec::new(),
            cells,
        };
        let mut h = standardize(feats);
        for l in &layers {
            let mut z = vec![0.0; cells * l.out];
            for c in 0..cells {
                let x = &h[c * l.inp..(c + 1) * l.inp];
                for o in 0..l.out {
                    let row = &p[l.w + o * l.inp..l.w + (o + 1) * l.inp];
                    z[c * l.out + o] = p[l.b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            cache.inputs.push(h);
            h = match l.norm {
                None => z,
                Some((g, s)) => {
                    let mut xhat = vec![0.0; cells * l.out];
                    let mut inv = vec![0.0; cells];
                    let mut pre = vec![0.0; cells * l.out];
                    let mut out = vec![0.0; cells * l.out];
                    for c in 0..cells {
                        let zc = &z[c * l.out..(c + 1) * l.out];
                        let mean = zc.iter().sum::<f64>() / l.out as f64;
                        let var = zc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / l.out as f64;
                        let is = 1.0 / (var + LN_EPS).sqrt();
                        inv[c] = is;
                        for o in 0..l.out {
                            let xh = (zc[o] - mean) * is;
                            let a = p[g + o] * xh + p[s + o];
                            xhat[c * l.out + o] = xh;
                            pre[c * l.out + o] = a;
                            out[c * l.out + o] = a.max(0.0);
                        }
                    }
                    cache.xhat.push(xhat);
                    cache.inv_std.push(inv);
                    cache.pre_relu.push(pre);
                    out
                }
            };
        }
        Ok((h, cache))
    }

    /// Gradient of Σ_c dscores[c] · M[c] with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache, dscores: &[f64]) -> Vec<f64> {
        let (layers, n) = layout(&self.widths);
        let p = &self.params;
        let cells = cache.cells;
        let mut grad = vec![0.0; n];
        let mut dh = dscores.to_vec();
        let mut hidden = cache.xhat.len();
        for (li, l) in layers.iter().enumerate().rev() {
            // dh is the gradient at this layer's output (after ReLU, if any).
            let dz = match l.norm {
                None => dh,
                Some((g, s)) => {
                    hidden -= 1;
                    let xhat = &cache.xhat[hidden];
                    let pre = &cache.pre_relu[hidden];
                    let inv = &cache.inv_std[hidden];
                    let mut dz = vec![0.0; cells * l.out];
                    let mut dxhat = vec![0.0; l.out];
                    for c in 0..cells {
                        let (mut m1, mut m2) = (0.0, 0.0);
                        for o in 0..l.out {
                            let k = c * l.out + o;
                            let da = if pre[k] > 0.0 { dh[k] } else { 0.0 };
                            grad[g + o] += da * xhat[k];
                            grad[s + o] += da;
                            dxhat[o] = da * p[g + o];
                            m1 += dxhat[o];
                            m2 += dxhat[o] * xhat[k];
                        }
                        m1 /= l.out as f64;
                        m2 /= l.out as f64;
                        for o in 0..l.out {
                            let k = c * l.out + o;
                            dz[k] = inv[c] * (dxhat[o] - m1 - xhat[k] * m2);
                        }
                    }
                    dz
                }
            };
            let x = &cache.inputs[li];
            let mut dx = vec![0.0; cells * l.inp];
            for c in 0..cells {
                let xc = &x[c * l.inp..(c + 1) * l.inp];
                let dxc = &mut dx[c * l.inp..(c + 1) * l.inp];
                for o in 0..l.out {
                    let d = dz[c * l.out + o];
                    if d == 0.0 {
                        continue;
                    }
                    grad[l.b + o] += d;
                    let w0 = l.w + o * l.inp;
                    for i in 0..l.inp {
                        grad[w0 + i] += d * xc[i];
                        dxc[i] += d * p[w0 + i];
                    }
                }
            }
            dh = dx;
        }
        grad
    }
}

/// Per-channel standardization over the grid cells; constant channels
/// become zero.
fn standardize(feats: &FeatureGrid) -> Vec<f64> {
    let (n, c) = (feats.cells(), feats.channels);
    let mut out = feats.data.clone();
    for ch in 0..c {
        let mean = (0..n).map(|i| feats.get(i, ch)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (feats.get(i, ch) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            out[i * c + ch] = if sd > STD_EPS { (feats.get(i, ch) - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Temperature softmax over the action grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub rows: usize,
    pub cols: usize,
    pub probs: Vec<f64>,
    pub temperature: f64,
}

pub fn action_distribution(scores: &[f64], rows: usize, cols: usize, temperature: f64) -> Result<ActionDistribution> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {temperature}")));
    }
    if scores.len() != rows * cols || scores.is_empty() {
        return Err(Error::shape(format!("{} scores for a {rows}×{cols} grid", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("non-finite action scores"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(ActionDistribution {
        rows,
        cols,
        probs: e.into_iter().map(|v| v / z).collect(),
        temperature,
    })
}

fn log_softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = scores.iter().map(|s| ((s - max) / temperature).exp()).sum::<f64>().ln();
    scores.iter().map(|s| (s - max) / temperature - lse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    Sample,
    Greedy,
}

/// Row-major cell index; greedy ties go to the lowest index.
pub fn select_index<R: Rng + ?Sized>(dist: &ActionDistribution, mode: SelectMode, rng: &mut R) -> usize {
    match mode {
        SelectMode::Greedy => argmax(&dist.probs),
        SelectMode::Sample => match WeightedIndex::new(&dist.probs) {
            Ok(w) => w.sample(rng),
            Err(_) => argmax(&dist.probs),
        },
    }
}

/// The chosen cell's center as fixation number `ordinal`.
pub fn select_action<R: Rng + ?Sized>(
    dist: &ActionDistribution,
    mode: SelectMode,
    grid: &ActionGrid,
    ordinal: usize,
    rng: &mut R,
) -> FixationPoint {
    grid.fixation(select_index(dist, mode, rng), ordinal)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Unnormalized Gaussian spread of an update from cell `a` to cell `k`, in
/// cell units, cut off beyond 3σ. σ = 0 gives the indicator of `a == k`.
pub fn smoothing_weight(grid: &ActionGrid, a: usize, k: usize, sigma: f64) -> f64 {
    if a == k {
        return 1.0;
    }
    if sigma <= 0.0 {
        return 0.0;
    }
    let dx = (a % grid.cols) as f64 - (k % grid.cols) as f64;
    let dy = (a / grid.cols) as f64 - (k / grid.cols) as f64;
    let d2 = dx * dx + dy * dy;
    if d2 > 9.0 * sigma * sigma {
        return 0.0;
    }
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// One batch element for the policy gradient.
#[derive(Clone, Debug)]
pub struct GradientSample {
    pub features: FeatureGrid,
    pub action: usize,
    pub reward: f64,
}

fn check_batch(batch: &[GradientSample], grid: &ActionGrid) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    if batch.iter().any(|s| !s.reward.is_finite()) {
        return Err(Error::domain("non-finite reward in batch"));
    }
    if batch.iter().any(|s| s.action >= grid.len() || s.features.cells() != grid.len()) {
        return Err(Error::shape("batch sample does not match the action grid"));
    }
    Ok(batch.iter().map(|s| s.reward).sum::<f64>() / batch.len() as f64)
}

/// The smoothed objective whose gradient [`smoothed_policy_gradient`]
/// returns: (1/B) Σ_i A_i Σ_k w(a_i, k) log π(k | s_i).
pub fn smoothed_objective(
    net: &PolicyNetwork,
    batch: &[GradientSample],
    grid: &ActionGrid,
    sigma: f64,
    temperature: f64,
) -> Result<f64> {
    let mean = check_batch(batch, grid)?;
    let mut total = 0.0;
    for s in batch {
        let adv = s.reward - mean;
        let lp = log_softmax(&net.forward(&s.features)?, temperature);
        for (k, l) in lp.iter().enumerate() {
            total += adv * smoothing_weight(grid, s.action, k, sigma) * l;
        }
    }
    Ok(total / batch.len() as f64)
}

/// Batch-baselined REINFORCE gradient with the update of each sampled cell
/// spread to its neighbours.
pub fn smoothed_policy_gradient(
    net: &PolicyNetwork,
    batch: &[GradientSample],
    grid: &ActionGrid,
    sigma: f64,
    temperature: f64,
) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    let mean = check_batch(batch, grid)?;
    let b = batch.len() as f64;
    let parts = par::map_slice(batch, |s| -> Result<Vec<f64>> {
        let adv = s.reward - mean;
        if adv == 0.0 {
            return Ok(vec![0.0; net.params.len()]);
        }
        let (scores, cache) = net.forward_cached(&s.features)?;
        let dist = action_distribution(&scores, grid.rows, grid.cols, temperature)?;
        // d/dM_m Σ_k w_k log p_k = (w_m − p_m Σ_k w_k) / τ
        let w: Vec<f64> = (0..grid.len())
            .map(|k| smoothing_weight(grid, s.action, k, sigma))
            .collect();
        let wsum: f64 = w.iter().sum();
        let dm: Vec<f64> = w
            .iter()
            .zip(&dist.probs)
            .map(|(wk, pk)| adv * (wk - pk * wsum) / (temperature * b))
            .collect();
        Ok(net.backward(&cache, &dm))
    });
    let mut grad = vec![0.0; net.params.len()];
    for part in parts {
        for (g, v) in grad.iter_mut().zip(part?) {
            *g += v;
        }
    }
    Ok(grad)
}

/// AdamW used for gradient ascent with decoupled weight decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamW {
    pub fn new(n: usize, learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// φ ← φ + η m̂ / (√v̂ + ε) − η λ φ
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite gradient"));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            let phi = params[i];
            params[i] = phi + self.learning_rate * mh / (vh.sqrt() + self.eps) - self.learning_rate * self.weight_decay * phi;
        }
        Ok(())
    }
}
