//! Scene-understanding oracle and the semantic and entropy rewards.
//!
//! [`SyntheticOracle`] stands in for a vision-language model. A region's
//! concept enters a description to the degree the region is resolvable, and
//! a region that is not clearly resolved leaves a maximally uncertain token.
//! With orthonormal concepts both rewards are monotone in the fixation set:
//! more fixations never lower similarity to the reference and never raise
//! entropy.

mod mask;
mod scene;

pub use mask::{Mask, RasterMask, Span};
pub use scene::{Category, Scene, SemanticRegion, SU_R_THRESHOLD};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::foveation::{GazeResolution, ResolutionField, Unfoveated};
use crate::geometry::FixationPoint;
use crate::{Error, Result};

/// Stability constant in the semantic-reward denominator.
pub const REWARD_EPS: f64 = 1e-6;

/// Mean resolution over the region's pixels.
pub fn visibility(region: &SemanticRegion, rmap: &dyn ResolutionField) -> Result<f64> {
    let raster = region.raster();
    if raster.is_empty() {
        return Err(Error::domain(format!("region {} has an empty mask", region.id)));
    }
    let mut sum = 0.0;
    for s in &raster.spans {
        for x in s.x0..s.x1 {
            sum += rmap.r_at(x as usize, s.y as usize);
        }
    }
    Ok(sum / raster.area as f64)
}

/// Cubic smoothstep on [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    h(p) + h(1.0 - p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Visibility at which a concept starts to emerge.
    pub v_lo: f64,
    /// Visibility at which a concept is fully resolved.
    pub v_hi: f64,
    /// Half-width of the per-sample shift of the gate.
    pub jitter: f64,
    /// Descriptions per query.
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            v_lo: 0.35,
            v_hi: 0.75,
            jitter: 0.1,
            samples: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptionSample {
    pub embedding: Vec<f64>,
    /// Per-token entropy in nats.
    pub token_entropies: Vec<f64>,
}

impl DescriptionSample {
    pub fn len(&self) -> usize {
        self.token_entropies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_entropies.is_empty()
    }
}

/// Anything that can describe a scene seen through a resolution field.
pub trait SceneOracle: Sync {
    /// `rmap = None` means an unfoveated view.
    fn describe(&self, scene: &Scene, rmap: Option<&dyn ResolutionField>, m: usize) -> Result<Vec<DescriptionSample>>;
}

#[derive(Clone, Debug, Default)]
pub struct SyntheticOracle {
    pub config: OracleConfig,
}

impl SyntheticOracle {
    pub fn new(config: OracleConfig) -> Self {
        SyntheticOracle { config }
    }

    /// The unjittered gate.
    pub fn gate(&self, v: f64) -> f64 {
        self.gate_shifted(v, 0.0)
    }

    fn gate_shifted(&self, v: f64, shift: f64) -> f64 {
        let c = &self.config;
        smoothstep((v - c.v_lo - shift) / (c.v_hi - c.v_lo))
    }

    /// Gate shifts for samples `0..m`; sample 0 is unshifted. Depends only
    /// on the seed and scene id, never on the view.
    pub fn shifts(&self, scene_id: &str, m: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ fnv1a(scene_id.as_bytes()));
        let j = self.config.jitter;
        (0..m)
            .map(|k| if k == 0 || j == 0.0 { 0.0 } else { rng.random_range(-j..=j) })
            .collect()
    }

    pub fn visibilities(&self, scene: &Scene, rmap: &dyn ResolutionField) -> Result<Vec<f64>> {
        scene
            .regions
            .iter()
            .map(|r| visibility(r, rmap))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_scene(&scene.id))
    }

    /// Descriptions given precomputed region visibilities.
    pub fn describe_visible(&self, scene: &Scene, vis: &[f64], m: usize) -> Result<Vec<DescriptionSample>> {
        if m == 0 {
            return Err(Error::domain("at least one description is required"));
        }
        if vis.len() != scene.regions.len() {
            return Err(Error::shape("one visibility per region is required"));
        }
        let d = scene.dim();
        let shifts = self.shifts(&scene.id, m);
        let mut out = Vec::with_capacity(m);
        for &shift in &shifts {
            let gates: Vec<f64> = vis.iter().map(|&v| self.gate_shifted(v, shift)).collect();
            // Missing concepts hand their norm to the gist so every view has
            // the same norm as the unfoveated one before normalization.
            let missing: f64 = scene
                .regions
                .iter()
                .zip(&gates)
                .map(|(r, g)| (1.0 - g * g) * r.weight * r.weight)
                .sum();
            let beta = (1.0 + missing).sqrt();
            let mut e: Vec<f64> = scene.base_concept.iter().map(|b| beta * b).collect();
            for (r, g) in scene.regions.iter().zip(&gates) {
                let s = g * r.weight;
                for (ei, ci) in e.iter_mut().zip(&r.concept) {
                    *ei += s * ci;
                }
            }
            normalize(&mut e).map_err(|err| err.in_scene(&scene.id))?;
            debug_assert_eq!(e.len(), d);
            let mut tokens = Vec::with_capacity(gates.len() + 1);
            tokens.push(0.0);
            tokens.extend(gates.iter().map(|&g| binary_entropy(g.clamp(0.5, 1.0))));
            out.push(DescriptionSample {
                embedding: e,
                token_entropies: tokens,
            });
        }
        Ok(out)
    }
}

impl SceneOracle for SyntheticOracle {
    fn describe(&self, scene: &Scene, rmap: Option<&dyn ResolutionField>, m: usize) -> Result<Vec<DescriptionSample>> {
        let vis = self.visibilities(scene, rmap.unwrap_or(&Unfoveated))?;
        self.describe_visible(scene, &vis, m)
    }
}

/// Convenience wrapper over [`SceneOracle::describe`].
pub fn describe(
    oracle: &dyn SceneOracle,
    scene: &Scene,
    rmap: Option<&dyn ResolutionField>,
    m: usize,
) -> Result<Vec<DescriptionSample>> {
    oracle.describe(scene, rmap, m)
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain("cannot normalize a zero vector"));
    }
    for x in v {
        *x /= n;
    }
    Ok(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("embeddings differ in dimension"));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine similarity of a zero vector"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Mean cosine similarity of index-paired embeddings.
pub fn semantic_accuracy(fov: &[DescriptionSample], reference: &[DescriptionSample]) -> Result<f64> {
    if fov.len() != reference.len() || fov.is_empty() {
        return Err(Error::shape(format!(
            "{} foveated vs {} reference descriptions",
            fov.len(),
            reference.len()
        )));
    }
    let mut sum = 0.0;
    for (a, b) in fov.iter().zip(reference) {
        sum += cosine(&a.embedding, &b.embedding)?;
    }
    Ok(sum / fov.len() as f64)
}

/// Per-token entropy averaged within each sample, then across samples.
pub fn mean_entropy(samples: &[DescriptionSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("no descriptions"));
    }
    let mut total = 0.0;
    for s in samples {
        if s.is_empty() {
            return Err(Error::domain("description with no tokens"));
        }
        total += s.token_entropies.iter().sum::<f64>() / s.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Per-fixation quantities of one trajectory and the rewards derived from
/// them. Index 0 is the initial fixation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTrace {
    pub cs: Vec<f64>,
    pub upper_limit: f64,
    pub r: Vec<f64>,
    pub r_norm: Vec<f64>,
    pub h_bar: Vec<f64>,
    pub r_e: Vec<f64>,
    /// The initial similarity reached the upper limit, so the normalizing
    /// denominator is not positive; semantic rewards are zero.
    pub flagged: bool,
}

impl RewardTrace {
    pub fn new(cs: Vec<f64>, upper_limit: f64, h_bar: Vec<f64>) -> Self {
        let mut t = RewardTrace {
            r: Vec::with_capacity(cs.len()),
            r_norm: Vec::with_capacity(cs.len()),
            r_e: Vec::with_capacity(h_bar.len()),
            cs,
            upper_limit,
            h_bar,
            flagged: false,
        };
        if let Some(&cs0) = t.cs.first() {
            t.flagged = upper_limit - cs0 + REWARD_EPS <= 0.0;
        }
        for j in 0..t.cs.len() {
            t.r.push(raw_semantic(&t.cs, j));
            t.r_norm.push(semantic_reward(&t, j));
        }
        for j in 0..t.h_bar.len() {
            t.r_e.push(entropy_reward(&t, j));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.cs.len().max(self.h_bar.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn raw_semantic(cs: &[f64], j: usize) -> f64 {
    if j == 0 {
        return cs[0];
    }
    let best = cs[..j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    cs[j] - best
}

/// Normalized improvement of similarity at fixation `j` over the best
/// before it, clipped to [0, 1]. Zero at `j = 0`.
pub fn semantic_reward(trace: &RewardTrace, j: usize) -> f64 {
    if j == 0 || j >= trace.cs.len() {
        return 0.0;
    }
    let r0 = trace.cs[0];
    let denom = trace.upper_limit - r0 + REWARD_EPS;
    if denom <= 0.0 {
        return 0.0;
    }
    (raw_semantic(&trace.cs, j) / denom).clamp(0.0, 1.0)
}

/// Drop in mean entropy at fixation `j` below the lowest before it.
pub fn entropy_reward(trace: &RewardTrace, j: usize) -> f64 {
    if j == 0 || j >= trace.h_bar.len() {
        return 0.0;
    }
    let best = trace.h_bar[..j].iter().copied().fold(f64::INFINITY, f64::min);
    (best - trace.h_bar[j]).max(0.0)
}

/// Unfoveated descriptions of a scene and the similarity ceiling they set.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub descriptions: Vec<DescriptionSample>,
    pub upper_limit: f64,
}

impl Reference {
    pub fn new(oracle: &dyn SceneOracle, scene: &Scene, m: usize) -> Result<Self> {
        let descriptions = oracle.describe(scene, None, m)?;
        let upper_limit = semantic_accuracy(&descriptions, &descriptions)?;
        Ok(Reference {
            descriptions,
            upper_limit,
        })
    }

    /// Similarity and mean entropy of the view through `fixations`.
    pub fn score_view(
        &self,
        oracle: &dyn SceneOracle,
        scene: &Scene,
        fixations: &[FixationPoint],
        alpha: f64,
        ppd: u32,
    ) -> Result<(f64, f64)> {
        let gaze = GazeResolution::new(fixations.to_vec(), alpha, ppd)?;
        let view = oracle.describe(scene, Some(&gaze), self.descriptions.len())?;
        Ok((
            semantic_accuracy(&view, &self.descriptions)?,
            mean_entropy(&view)?,
        ))
    }

    /// Rewards for a fixation sequence: view `j` sees fixations `0..=j`.
    pub fn trace(
        &self,
        oracle: &dyn SceneOracle,
        scene: &Scene,
        fixations: &[FixationPoint],
        alpha: f64,
        ppd: u32,
    ) -> Result<RewardTrace> {
        if fixations.is_empty() {
            return Err(Error::domain("empty fixation sequence"));
        }
        let mut cs = Vec::with_capacity(fixations.len());
        let mut h = Vec::with_capacity(fixations.len());
        for j in 0..fixations.len() {
            let (c, e) = self.score_view(oracle, scene, &fixations[..=j], alpha, ppd)?;
            cs.push(c);
            h.push(e);
        }
        Ok(RewardTrace::new(cs, self.upper_limit, h))
    }
}

/// Rewards for a fixation sequence against the unfoveated reference, which
/// also fixes the upper limit of the similarity.
pub fn trace_for_fixations(
    oracle: &dyn SceneOracle,
    scene: &Scene,
    fixations: &[FixationPoint],
    alpha: f64,
    ppd: u32,
    m: usize,
) -> Result<RewardTrace> {
    Reference::new(oracle, scene, m)?.trace(oracle, scene, fixations, alpha, ppd)
}

/// Stable 64-bit FNV-1a, used to derive per-scene seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
