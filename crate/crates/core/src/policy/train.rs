use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::Featurizer;
use super::network::{
    action_distribution, argmax, default_widths, select_index, smoothed_policy_gradient, ActionDistribution, AdamW,
    GradientSample, PolicyNetwork, SelectMode,
};
use crate::foveation::{GazeResolution, DEFAULT_ALPHA};
use crate::geometry::{ActionGrid, FieldGeometry, FixationPoint, Placement};
use crate::oracle::{Reference, RewardTrace, Scene, SceneOracle};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// Normalized gain in similarity to the unfoveated description.
    Semantic,
    /// Drop in mean token entropy.
    Entropy,
}

impl RewardKind {
    pub fn of(self, trace: &RewardTrace, j: usize) -> f64 {
        match self {
            RewardKind::Semantic => trace.r_norm[j],
            RewardKind::Entropy => trace.r_e[j],
        }
    }
}

/// Where a trajectory starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Center,
    /// Below the field center by `fraction` of the field height.
    BelowCenter { fraction: f64 },
    Point { x: f64, y: f64 },
}

impl InitialPreset {
    /// 300 px below center on a 1280-px field.
    pub const TRAINING_BELOW_CENTER: InitialPreset = InitialPreset::BelowCenter { fraction: 300.0 / 1280.0 };
    /// 480 px (10.1 DVA at 44 px/deg) below center on a 1280-px field.
    pub const TESTING_BELOW_CENTER: InitialPreset = InitialPreset::BelowCenter { fraction: 480.0 / 1280.0 };

    /// The four image corners and the training below-center point.
    pub fn training_set() -> Vec<InitialPreset> {
        vec![
            InitialPreset::TopLeft,
            InitialPreset::TopRight,
            InitialPreset::BottomLeft,
            InitialPreset::BottomRight,
            Self::TRAINING_BELOW_CENTER,
        ]
    }

    /// Corner presets use the outermost image pixels.
    pub fn point(&self, field: &FieldGeometry, placement: &Placement) -> Result<FixationPoint> {
        let (x0, y0) = (placement.offset_x as f64, placement.offset_y as f64);
        let (x1, y1) = (
            (placement.offset_x + placement.image_width) as f64 - 1.0,
            (placement.offset_y + placement.image_height) as f64 - 1.0,
        );
        let (cx, cy) = field.center();
        let (x, y) = match *self {
            InitialPreset::TopLeft => (x0, y0),
            InitialPreset::TopRight => (x1, y0),
            InitialPreset::BottomLeft => (x0, y1),
            InitialPreset::BottomRight => (x1, y1),
            InitialPreset::Center => (cx, cy),
            InitialPreset::BelowCenter { fraction } => (cx, cy + fraction * field.height as f64),
            InitialPreset::Point { x, y } => (x, y),
        };
        let p = FixationPoint::new(x, y, 0);
        p.check_in(field)?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub n_fixations: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Std of the gradient-spreading Gaussian, in action cells.
    pub smooth_sigma: f64,
    /// Consecutive batches given to one step before moving to the next.
    pub block_batches: usize,
    /// Resolution falloff in DVA.
    pub alpha: f64,
    /// Descriptions sampled per oracle query.
    pub descriptions: usize,
    pub initial_presets: Vec<InitialPreset>,
    pub features: Featurizer,
    /// Layer widths; derived from the feature channels when absent.
    pub widths: Option<Vec<usize>>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_fixations: 4,
            epochs: 5,
            batch_size: 60,
            temperature: 3.0,
            learning_rate: 2e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            smooth_sigma: 1.5,
            block_batches: 5,
            alpha: DEFAULT_ALPHA,
            descriptions: 10,
            initial_presets: InitialPreset::training_set(),
            features: Featurizer::default(),
            widths: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{what} must be positive, got {v}")))
            }
        };
        pos(self.temperature, "temperature")?;
        pos(self.learning_rate, "learning rate")?;
        pos(self.alpha, "alpha")?;
        if !(self.weight_decay >= 0.0) || !(self.smooth_sigma >= 0.0) {
            return Err(Error::domain("weight decay and smoothing sigma must be non-negative"));
        }
        if self.n_fixations == 0
            || self.epochs == 0
            || self.batch_size == 0
            || self.block_batches == 0
            || self.descriptions == 0
        {
            return Err(Error::domain("counts in the training config must be positive"));
        }
        if self.initial_presets.is_empty() {
            return Err(Error::domain("at least one initial preset is required"));
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        self.widths
            .clone()
            .unwrap_or_else(|| default_widths(self.features.channels))
    }
}

/// One network per generated fixation plus everything needed to resume or
/// replay training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyChain {
    pub version: u32,
    pub field: FieldGeometry,
    pub config: TrainingConfig,
    pub reward: RewardKind,
    pub seed: u64,
    pub nets: Vec<PolicyNetwork>,
    pub optimizers: Vec<AdamW>,
}

impl PolicyChain {
    pub const FORMAT_VERSION: u32 = 1;

    /// Freshly initialized networks, seeded by `seed`.
    pub fn new(field: FieldGeometry, config: TrainingConfig, reward: RewardKind, seed: u64) -> Result<Self> {
        config.validate()?;
        field.action_grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = config.widths();
        if widths.first() != Some(&config.features.channels) {
            return Err(Error::shape("first layer width must equal the feature channels"));
        }
        let mut nets = Vec::with_capacity(config.n_fixations);
        let mut optimizers = Vec::with_capacity(config.n_fixations);
        for j in 1..=config.n_fixations {
            let net = PolicyNetwork::new(widths.clone(), j, &mut rng)?;
            let mut opt = AdamW::new(net.params.len(), config.learning_rate, config.weight_decay);
            opt.beta1 = config.beta1;
            opt.beta2 = config.beta2;
            opt.eps = config.eps;
            optimizers.push(opt);
            nets.push(net);
        }
        Ok(PolicyChain {
            version: Self::FORMAT_VERSION,
            field,
            config,
            reward,
            seed,
            nets,
            optimizers,
        })
    }

    pub fn grid(&self) -> ActionGrid {
        self.field.action_grid().expect("validated at construction")
    }

    pub fn n_fixations(&self) -> usize {
        self.nets.len()
    }

    /// Action distribution of network `j` (1-based) after `fixations`.
    pub fn step_distribution(&self, j: usize, scene: &Scene, fixations: &[FixationPoint]) -> Result<ActionDistribution> {
        let (_, dist) = self.step(j, scene, fixations)?;
        Ok(dist)
    }

    fn step(
        &self,
        j: usize,
        scene: &Scene,
        fixations: &[FixationPoint],
    ) -> Result<(super::features::FeatureGrid, ActionDistribution)> {
        if j == 0 || j > self.nets.len() {
            return Err(Error::domain(format!("no network for fixation {j}")));
        }
        let grid = self.grid();
        let gaze = GazeResolution::new(fixations.to_vec(), self.config.alpha, self.field.ppd)?;
        let featurizer = Featurizer {
            alpha: self.config.alpha,
            ..self.config.features.clone()
        };
        let feats = featurizer.featurize(scene, &gaze, &self.field, &grid)?;
        let scores = self.nets[j - 1].forward(&feats)?;
        let dist = action_distribution(&scores, grid.rows, grid.cols, self.config.temperature)?;
        Ok((feats, dist))
    }

    /// Greedy fixations 1..=N after `initial`, with each step's distribution.
    pub fn greedy_scanpath(
        &self,
        scene: &Scene,
        initial: FixationPoint,
    ) -> Result<(Vec<FixationPoint>, Vec<ActionDistribution>)> {
        self.greedy_prefix(scene, initial, self.nets.len())
    }

    fn greedy_prefix(
        &self,
        scene: &Scene,
        initial: FixationPoint,
        steps: usize,
    ) -> Result<(Vec<FixationPoint>, Vec<ActionDistribution>)> {
        initial.check_in(&self.field)?;
        let grid = self.grid();
        let mut fix = vec![FixationPoint { index: 0, ..initial }];
        let mut dists = Vec::with_capacity(steps);
        for j in 1..=steps {
            let (_, dist) = self.step(j, scene, &fix).map_err(|e| e.in_scene(&scene.id))?;
            let a = argmax(&dist.probs);
            fix.push(grid.fixation(a, j));
            dists.push(dist);
        }
        Ok((fix, dists))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let chain: PolicyChain = serde_json::from_str(s)?;
        if chain.version > Self::FORMAT_VERSION {
            return Err(Error::Data(format!(
                "checkpoint version {} is newer than supported {}",
                chain.version,
                Self::FORMAT_VERSION
            )));
        }
        if chain.nets.len() != chain.config.n_fixations || chain.optimizers.len() != chain.nets.len() {
            return Err(Error::Data("checkpoint network count does not match its config".into()));
        }
        Ok(chain)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    /// 1-based fixation step that was trained.
    pub step: usize,
    pub preset: usize,
    pub mean_reward: f64,
    /// Traces whose initial view already reached the similarity ceiling.
    pub flagged: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub batches: Vec<BatchRecord>,
}

impl TrainingLog {
    /// Mean batch reward of `step` over `k` consecutive, equally sized
    /// chunks of its batches.
    pub fn checkpoints(&self, step: usize, k: usize) -> Vec<f64> {
        let r: Vec<f64> = self
            .batches
            .iter()
            .filter(|b| b.step == step)
            .map(|b| b.mean_reward)
            .collect();
        if k == 0 || r.len() < k {
            return Vec::new();
        }
        let size = r.len() / k;
        (0..k)
            .map(|c| r[c * size..(c + 1) * size].iter().sum::<f64>() / size as f64)
            .collect()
    }

    pub fn flagged(&self) -> usize {
        self.batches.iter().map(|b| b.flagged).sum()
    }
}

/// Train fixation networks 1..=N in round-robin blocks of
/// `block_batches` batches. While step `j` trains, earlier steps act
/// greedily with their current weights and step `j` samples its action.
pub fn train_policy_chain(
    corpus: &[Scene],
    field: &FieldGeometry,
    config: &TrainingConfig,
    reward: RewardKind,
    oracle: &dyn SceneOracle,
    seed: u64,
) -> Result<(PolicyChain, TrainingLog)> {
    let mut chain = PolicyChain::new(*field, config.clone(), reward, seed)?;
    let log = continue_training(&mut chain, corpus, oracle)?;
    Ok((chain, log))
}

/// Run the chain's configured schedule from its current weights.
pub fn continue_training(chain: &mut PolicyChain, corpus: &[Scene], oracle: &dyn SceneOracle) -> Result<TrainingLog> {
    if corpus.is_empty() {
        return Err(Error::domain("training corpus is empty"));
    }
    let field = chain.field;
    for s in corpus {
        s.validate(&field)?;
    }
    let cfg = chain.config.clone();
    let grid = chain.grid();
    let references = par::map_slice(corpus, |s| {
        Reference::new(oracle, s, cfg.descriptions).map_err(|e| e.in_scene(&s.id))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Training draws continue from the initialization stream.
    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    rng.set_stream(1);
    let n = corpus.len();
    let per_epoch = n.div_ceil(cfg.batch_size);
    let mut log = TrainingLog::default();
    let mut global = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for b in 0..per_epoch {
            let step = (global / cfg.block_batches) % cfg.n_fixations + 1;
            let preset_idx = rng.random_range(0..cfg.initial_presets.len());
            let preset = cfg.initial_presets[preset_idx];
            let batch_seed: u64 = rng.random();
            let members: Vec<usize> = (0..cfg.batch_size)
                .map(|i| order[(b * cfg.batch_size + i) % n])
                .collect();
            let frozen = &*chain;
            let results = par::map_range(members.len(), |i| {
                let s = &corpus[members[i]];
                let mut r = ChaCha8Rng::seed_from_u64(batch_seed);
                r.set_stream(i as u64);
                rollout(frozen, oracle, s, &references[members[i]], preset, step, &mut r)
                    .map_err(|e| e.in_scene(&s.id))
            });
            let mut samples = Vec::with_capacity(results.len());
            let mut flagged = 0;
            for r in results {
                let (sample, f) = r?;
                flagged += f as usize;
                samples.push(sample);
            }
            let mean_reward = samples.iter().map(|s| s.reward).sum::<f64>() / samples.len() as f64;
            let grad = smoothed_policy_gradient(
                &chain.nets[step - 1],
                &samples,
                &grid,
                cfg.smooth_sigma,
                cfg.temperature,
            )?;
            let net = &mut chain.nets[step - 1];
            chain.optimizers[step - 1].step(&mut net.params, &grad)?;
            log.batches.push(BatchRecord {
                epoch,
                batch: global,
                step,
                preset: preset_idx,
                mean_reward,
                flagged,
            });
            global += 1;
        }
        log::info!(
            "epoch {epoch}: {} batches, last mean reward {:.4}",
            per_epoch,
            log.batches.last().map_or(0.0, |b| b.mean_reward)
        );
    }
    Ok(log)
}

fn rollout(
    chain: &PolicyChain,
    oracle: &dyn SceneOracle,
    scene: &Scene,
    reference: &Reference,
    preset: InitialPreset,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(GradientSample, bool)> {
    let initial = preset.point(&chain.field, &scene.placement)?;
    let (mut fix, _) = chain.greedy_prefix(scene, initial, step - 1)?;
    let (features, dist) = chain.step(step, scene, &fix)?;
    let action = select_index(&dist, SelectMode::Sample, rng);
    fix.push(chain.grid().fixation(action, step));
    let trace = reference.trace(oracle, scene, &fix, chain.config.alpha, chain.field.ppd)?;
    Ok((
        GradientSample {
            features,
            action,
            reward: chain.reward.of(&trace, step),
        },
        trace.flagged,
    ))
}
