use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::foveation::{resolution_value, ResolutionField};
use crate::geometry::{ActionGrid, FieldGeometry};
use crate::oracle::{smoothstep, visibility, Category, OracleConfig, Scene};
use crate::{Error, Result};

/// Mean resolution over the cell.
pub const CH_VISIBILITY: usize = 0;
/// Six coverage fractions, one per [`Category`] in `Category::ALL` order.
pub const CH_COVERAGE: usize = 1;
/// Coverage-weighted importance not yet resolved: Σ cover · w · (1 − g(v)).
pub const CH_MISSING: usize = 7;
/// Coverage by regions someone in the scene looks at or holds.
pub const CH_GAZE_GRASP: usize = 8;
/// Gate opening a fixation at the cell centre would add: Σ w · (g(v⁺) − g(v)).
pub const CH_GAIN: usize = 9;
/// Leading concept coordinates of the unresolved content.
pub const CH_CONCEPT: usize = 10;

pub const DEFAULT_CHANNELS: usize = 64;

/// H×W×C features over the action grid, cell-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        FeatureGrid {
            rows,
            cols,
            channels,
            data: vec![0.0; rows * cols * channels],
        }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn get(&self, cell: usize, channel: usize) -> f64 {
        self.data[cell * self.channels + channel]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::numeric("feature grid has non-finite values"))
        }
    }
}

/// Builds the synthetic stand-in for pooled decoder features.
///
/// Layout: visibility, six category coverages, missing information,
/// gaze/grasp coverage, prospective gain, `concept_channels` concept coordinates, then seeded
/// sinusoidal position codes for the remaining channels. Narrower grids keep
/// the leading channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Featurizer {
    pub channels: usize,
    pub concept_channels: usize,
    /// Gate of the oracle whose understanding the features track.
    pub v_lo: f64,
    pub v_hi: f64,
    /// Resolution is averaged over a `cell / stride` square lattice per cell.
    pub stride: usize,
    pub position_seed: u64,
    /// Foveation constant used for the prospective-gain channel.
    pub alpha: f64,
    /// Region pixels are subsampled on this lattice for the gain channel.
    pub gain_stride: usize,
}

impl Default for Featurizer {
    fn default() -> Self {
        let o = OracleConfig::default();
        Featurizer {
            channels: DEFAULT_CHANNELS,
            concept_channels: 16,
            v_lo: o.v_lo,
            v_hi: o.v_hi,
            stride: 4,
            position_seed: 0x5eed,
            alpha: crate::foveation::DEFAULT_ALPHA,
            gain_stride: 2,
        }
    }
}

impl Featurizer {
    pub fn with_channels(channels: usize) -> Self {
        Featurizer {
            channels,
            ..Featurizer::default()
        }
    }

    pub fn for_oracle(config: &OracleConfig) -> Self {
        Featurizer {
            v_lo: config.v_lo,
            v_hi: config.v_hi,
            ..Featurizer::default()
        }
    }

    fn gate(&self, v: f64) -> f64 {
        smoothstep((v - self.v_lo) / (self.v_hi - self.v_lo))
    }

    /// Position code frequencies and phases, `(fx, fy, phase)`.
    fn position_codes(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.position_seed);
        (0..n)
            .map(|_| {
                let fx: f64 = rng.sample(StandardNormal);
                let fy: f64 = rng.sample(StandardNormal);
                let ph = rng.random_range(0.0..std::f64::consts::TAU);
                (fx * std::f64::consts::PI, fy * std::f64::consts::PI, ph)
            })
            .collect()
    }

    pub fn featurize(
        &self,
        scene: &Scene,
        rmap: &dyn ResolutionField,
        field: &FieldGeometry,
        grid: &ActionGrid,
    ) -> Result<FeatureGrid> {
        if self.channels == 0 {
            return Err(Error::domain("feature grid needs at least one channel"));
        }
        if grid.cols * grid.cell != field.width || grid.rows * grid.cell != field.height {
            return Err(Error::domain(format!(
                "{}×{} grid of {}-px cells does not tile the {}×{} field",
                grid.cols, grid.rows, grid.cell, field.width, field.height
            )));
        }
        let full = CH_CONCEPT + self.concept_channels;
        let width = self.channels.max(full);
        let n = grid.len();
        let cell_area = (grid.cell * grid.cell) as f64;
        let mut buf = vec![0.0; n * width];

        // Resolution on a regular lattice inside each cell.
        let k = (grid.cell / self.stride.max(1)).max(1);
        let step = grid.cell as f64 / k as f64;
        for c in 0..n {
            let (col, row) = (c % grid.cols, c / grid.cols);
            let mut sum = 0.0;
            for a in 0..k {
                let y = row * grid.cell + ((a as f64 + 0.5) * step) as usize;
                for b in 0..k {
                    let x = col * grid.cell + ((b as f64 + 0.5) * step) as usize;
                    sum += rmap.r_at(x, y);
                }
            }
            buf[c * width + CH_VISIBILITY] = sum / (k * k) as f64;
        }

        let centres: Vec<(f64, f64)> = (0..n).map(|c| grid.cell_center(c)).collect();
        let ppd = field.ppd as f64;
        let gs = self.gain_stride.max(1) as u32;

        for region in &scene.regions {
            let v = visibility(region, rmap).map_err(|e| e.in_scene(&scene.id))?;
            let g0 = self.gate(v);
            let missing = region.weight * (1.0 - g0);
            if self.channels > CH_GAIN && missing > 0.0 {
                let pts: Vec<(f64, f64, f64)> = region
                    .raster()
                    .spans
                    .iter()
                    .filter(|s| s.y % gs == 0)
                    .flat_map(|s| (s.x0..s.x1).step_by(gs as usize).map(move |x| (x, s.y)))
                    .map(|(x, y)| (x as f64, y as f64, rmap.r_at(x as usize, y as usize)))
                    .collect();
                if !pts.is_empty() {
                    for (c, &(cx, cy)) in centres.iter().enumerate() {
                        let mut sum = 0.0;
                        for &(x, y, r) in &pts {
                            let theta = (x - cx).hypot(y - cy) / ppd;
                            sum += r.max(resolution_value(self.alpha, theta));
                        }
                        let v1 = sum / pts.len() as f64;
                        buf[c * width + CH_GAIN] += region.weight * region.weight * (self.gate(v1) - g0).max(0.0);
                    }
                }
            }
            let cov = coverage(region.raster(), grid, field);
            for (c, &count) in cov.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let f = count as f64 / cell_area;
                let cell = &mut buf[c * width..(c + 1) * width];
                cell[CH_COVERAGE + region.category.index()] += f;
                cell[CH_MISSING] += f * missing;
                if region.gaze_grasp {
                    cell[CH_GAZE_GRASP] += f;
                }
                for (dst, ci) in cell[CH_CONCEPT..full].iter_mut().zip(&region.concept) {
                    *dst += f * missing * ci;
                }
            }
        }

        if self.channels > full {
            let codes = self.position_codes(self.channels - full);
            for c in 0..n {
                let (u, v) = (
                    (c % grid.cols) as f64 / grid.cols as f64,
                    (c / grid.cols) as f64 / grid.rows as f64,
                );
                for (p, &(fx, fy, ph)) in codes.iter().enumerate() {
                    buf[c * width + full + p] = (fx * u + fy * v + ph).sin();
                }
            }
        }

        let mut out = FeatureGrid::zeros(grid.rows, grid.cols, self.channels);
        for c in 0..n {
            out.cell_mut(c)
                .copy_from_slice(&buf[c * width..c * width + self.channels]);
        }
        debug_assert_eq!(Category::ALL.len(), CH_MISSING - CH_COVERAGE);
        Ok(out)
    }
}

/// Pixels of `raster` falling in each action cell.
fn coverage(raster: &crate::oracle::RasterMask, grid: &ActionGrid, field: &FieldGeometry) -> Vec<u32> {
    let mut out = vec![0u32; grid.len()];
    for s in &raster.spans {
        if s.y as usize >= field.height {
            continue;
        }
        let row = s.y as usize / grid.cell;
        let (mut x, end) = (s.x0 as usize, (s.x1 as usize).min(field.width));
        while x < end {
            let col = x / grid.cell;
            let stop = ((col + 1) * grid.cell).min(end);
            out[row * grid.cols + col] += (stop - x) as u32;
            x = stop;
        }
    }
    out
}
