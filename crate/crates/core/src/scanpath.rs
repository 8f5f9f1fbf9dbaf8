//! Fixation sequences from trained policies, from static priority maps with
//! inhibition of return, and from the uniform random baseline.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ActionGrid, FieldGeometry, FixationPoint, Placement};
use crate::image::{Image, Plane};
use crate::oracle::Scene;
use crate::policy::{ActionDistribution, PolicyChain};
use crate::{Error, Result};

/// IOR diameters (DVA) used for the static-map models.
pub const IOR_DEEPGAZE: f64 = 2.6;
pub const IOR_GBVS: f64 = 2.8;
pub const IOR_ITTI_KOCH: f64 = 2.0;
pub const IOR_RANDOM: f64 = 2.0;
/// Diameter (DVA) of the circular mean filter applied to static maps.
pub const MAP_SMOOTHING: f64 = 2.0;
/// Rejection attempts per random fixation.
pub const MAX_TRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationSequence {
    pub scene_id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub fixations: Vec<FixationPoint>,
    /// Some fixations were placed by a fallback rather than the model.
    #[serde(default)]
    pub flagged: bool,
}

impl FixationSequence {
    pub fn new(scene_id: impl Into<String>, source: impl Into<String>, fixations: Vec<FixationPoint>) -> Self {
        FixationSequence {
            scene_id: scene_id.into(),
            source: source.into(),
            subject_id: None,
            fixations,
            flagged: false,
        }
    }

    /// Fixations with index ≥ 1, at most `n` of them.
    pub fn post_initial(&self, n: usize) -> impl Iterator<Item = &FixationPoint> {
        self.fixations.iter().filter(|f| f.index >= 1).take(n)
    }

    /// Mean distance between consecutive fixations, in pixels.
    pub fn mean_step(&self) -> Option<f64> {
        if self.fixations.len() < 2 {
            return None;
        }
        let total: f64 = self.fixations.windows(2).map(|w| w[0].distance(&w[1])).sum();
        Some(total / (self.fixations.len() - 1) as f64)
    }
}

/// A field-sized grid of non-negative priorities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub source: String,
}

impl PriorityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if values.len() != width * height || values.is_empty() {
            return Err(Error::shape(format!("{} values for a {width}×{height} map", values.len())));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("priority values must be finite and non-negative"));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::domain("priority map is all zero"));
        }
        Ok(PriorityMap {
            width,
            height,
            values,
            source: source.into(),
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn from_plane(p: &Plane, source: impl Into<String>) -> Result<Self> {
        Self::new(p.width, p.height, p.data.iter().map(|&v| v as f64).collect(), source)
    }

    /// Scaled so the maximum is 1.
    pub fn normalized(mut self) -> Self {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        for v in &mut self.values {
            *v /= max;
        }
        self
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Grayscale image (PNG/PGM) or a CSV grid of numbers, normalized to a
    /// maximum of 1.
    pub fn load(path: &Path, source: impl Into<String>) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let map = if ext == "csv" || ext == "txt" {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(path)?;
            let mut values = Vec::new();
            let mut width = None;
            for (line, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row: Vec<f64> = rec
                    .iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|e| Error::Parse {
                            path: path.to_path_buf(),
                            line: line + 1,
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<_>>()?;
                match width {
                    None => width = Some(row.len()),
                    Some(w) if w != row.len() => {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: line + 1,
                            message: format!("expected {w} columns, found {}", row.len()),
                        })
                    }
                    _ => {}
                }
                values.extend(row);
            }
            let w = width.unwrap_or(0);
            let h = if w == 0 { 0 } else { values.len() / w };
            Self::new(w, h, values, source)?
        } else {
            let img = Image::load(path)?;
            Self::from_plane(&img.luminance(), source)?
        };
        Ok(map.normalized())
    }

    pub fn to_plane(&self) -> Plane {
        let max = self.values.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        Plane {
            width: self.width,
            height: self.height,
            data: self.values.iter().map(|v| (v / max) as f32).collect(),
        }
    }
}

/// Greedy fixations from a trained chain, starting at `initial`.
pub fn policy_scanpath(chain: &PolicyChain, scene: &Scene, initial: FixationPoint) -> Result<FixationSequence> {
    let (fix, _) = chain.greedy_scanpath(scene, initial)?;
    Ok(FixationSequence::new(scene.id.clone(), "policy", fix))
}

/// Mean over a disc of `diameter` pixels centred on each pixel, with
/// edge-replicated borders.
pub fn circular_mean_filter(values: &[f64], width: usize, height: usize, diameter: f64) -> Vec<f64> {
    let r = diameter / 2.0;
    if r < 0.5 {
        return values.to_vec();
    }
    let ri = r.floor() as isize;
    let half: Vec<isize> = (-ri..=ri)
        .map(|dy| ((r * r - (dy * dy) as f64).max(0.0)).sqrt().floor() as isize)
        .collect();
    let count: f64 = half.iter().map(|h| (2 * h + 1) as f64).sum();
    let (w, h) = (width as isize, height as isize);
    let mut prefix = vec![0.0; height * (width + 1)];
    for y in 0..height {
        let p = &mut prefix[y * (width + 1)..(y + 1) * (width + 1)];
        for x in 0..width {
            p[x + 1] = p[x] + values[y * width + x];
        }
    }
    // Sum of row `y` over columns a..=b with clamped indices.
    let row_sum = |y: usize, a: isize, b: isize| -> f64 {
        let p = &prefix[y * (width + 1)..(y + 1) * (width + 1)];
        let row = &values[y * width..(y + 1) * width];
        let mut s = 0.0;
        if a < 0 {
            s += (-a).min(b + 1).max(0) as f64 * row[0];
        }
        if b >= w {
            s += (b - w + 1).min(b - a + 1).max(0) as f64 * row[width - 1];
        }
        let (lo, hi) = (a.max(0), b.min(w - 1));
        if hi >= lo {
            s += p[hi as usize + 1] - p[lo as usize];
        }
        s
    };
    let rows: Vec<Vec<f64>> = crate::par::map_range(height, |y| {
        (0..w)
            .map(|x| {
                let mut s = 0.0;
                for (k, &hw) in half.iter().enumerate() {
                    let yy = (y as isize + k as isize - ri).clamp(0, h - 1) as usize;
                    s += row_sum(yy, x - hw, x + hw);
                }
                s / count
            })
            .collect()
    });
    rows.concat()
}

fn argmax_row_major(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Smooth the map, then repeatedly take the global maximum and zero a disc
/// of `ior_diameter` around it. Fixations get indices 1..=n, after
/// `initial` when one is given. When the map runs out, the remaining
/// fixations are drawn uniformly outside all IOR discs and the sequence is
/// flagged.
pub fn map_scanpath<R: Rng + ?Sized>(
    map: &PriorityMap,
    n: usize,
    ior_diameter: f64,
    smooth: f64,
    field: &FieldGeometry,
    initial: Option<FixationPoint>,
    rng: &mut R,
) -> Result<FixationSequence> {
    if n == 0 {
        return Err(Error::domain("at least one fixation is required"));
    }
    if map.width != field.width || map.height != field.height {
        return Err(Error::shape(format!(
            "{}×{} map for a {}×{} field",
            map.width, map.height, field.width, field.height
        )));
    }
    if !(ior_diameter >= 0.0) || !(smooth >= 0.0) {
        return Err(Error::domain("IOR and smoothing diameters must be non-negative"));
    }
    let (w, h) = (map.width, map.height);
    let mut v = circular_mean_filter(&map.values, w, h, field.dva_to_px(smooth));
    let radius = field.dva_to_px(ior_diameter) / 2.0;
    let mut fix: Vec<FixationPoint> = initial.into_iter().map(|f| FixationPoint { index: 0, ..f }).collect();
    let mut seq = FixationSequence::new("", map.source.clone(), Vec::new());
    for k in 1..=n {
        let i = argmax_row_major(&v);
        let (x, y) = if v[i] > 0.0 {
            ((i % w) as f64, (i / w) as f64)
        } else {
            seq.flagged = true;
            let taken: Vec<FixationPoint> = fix.iter().filter(|f| f.index >= 1).copied().collect();
            let mut found = None;
            for _ in 0..MAX_TRIES {
                let (x, y) = (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64);
                if taken.iter().all(|f| (f.x - x).hypot(f.y - y) >= radius) {
                    found = Some((x, y));
                    break;
                }
            }
            found.ok_or_else(|| Error::domain("no unvisited location left for the fallback fixation"))?
        };
        fix.push(FixationPoint::new(x, y, k));
        zero_disc(&mut v, w, h, x, y, radius);
    }
    seq.fixations = fix;
    Ok(seq)
}

/// Zero every pixel whose centre lies strictly inside the disc.
fn zero_disc(v: &mut [f64], w: usize, h: usize, cx: f64, cy: f64, r: f64) {
    let r2 = r * r;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let y1 = ((cy + r).ceil() as usize).min(h - 1);
    let x0 = (cx - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as usize).min(w - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy < r2 {
                v[y * w + x] = 0.0;
            }
        }
    }
}

/// `n` fixations drawn uniformly over the image pixels, each at least
/// `ior_diameter` DVA from every earlier fixation (the initial included).
pub fn random_scanpath<R: Rng + ?Sized>(
    field: &FieldGeometry,
    placement: &Placement,
    n: usize,
    ior_diameter: f64,
    initial: Option<FixationPoint>,
    rng: &mut R,
) -> Result<FixationSequence> {
    if !placement.fits(field) || placement.area() == 0 {
        return Err(Error::domain("image region must be a non-empty part of the field"));
    }
    let min_d = field.dva_to_px(ior_diameter);
    let mut fix: Vec<FixationPoint> = initial.into_iter().map(|f| FixationPoint { index: 0, ..f }).collect();
    for k in 1..=n {
        let mut placed = false;
        for _ in 0..MAX_TRIES {
            let x = (placement.offset_x + rng.random_range(0..placement.image_width)) as f64;
            let y = (placement.offset_y + rng.random_range(0..placement.image_height)) as f64;
            if fix.iter().all(|f| (f.x - x).hypot(f.y - y) >= min_d) {
                fix.push(FixationPoint::new(x, y, k));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::domain(format!(
                "could not place random fixation {k} after {MAX_TRIES} tries; the image is too small for the IOR"
            )));
        }
    }
    Ok(FixationSequence::new("", "random", fix))
}

/// Element-wise maximum of per-step action maps, spread over each cell's
/// field pixels.
pub fn prediction_heatmap(maps: &[ActionDistribution], grid: &ActionGrid) -> Result<PriorityMap> {
    let first = maps.first().ok_or_else(|| Error::domain("no action maps"))?;
    if maps
        .iter()
        .any(|m| m.rows != first.rows || m.cols != first.cols || m.probs.len() != first.probs.len())
    {
        return Err(Error::shape("action maps differ in shape"));
    }
    if first.rows != grid.rows || first.cols != grid.cols {
        return Err(Error::shape("action maps do not match the grid"));
    }
    let mut cellmax = first.probs.clone();
    for m in &maps[1..] {
        for (a, b) in cellmax.iter_mut().zip(&m.probs) {
            *a = a.max(*b);
        }
    }
    let (w, h) = (grid.cols * grid.cell, grid.rows * grid.cell);
    let values = (0..w * h)
        .map(|i| cellmax[(i / w / grid.cell) * grid.cols + (i % w) / grid.cell])
        .collect();
    PriorityMap::new(w, h, values, "policy")
}
