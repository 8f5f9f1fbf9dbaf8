//! Comparing scanpaths with human fixations.
//!
//! Fixations are assigned to scene categories with a distance tolerance,
//! turned into per-image frequencies, and scored against the human
//! distribution with Gaussian negative log likelihoods. Heatmap metrics
//! (AUC-Judd and CC) complement the frequency scores.
//!
//! Both NLL variants use the positive orientation: lower is better, and a
//! model sitting at the human means scores ½ ln|2πΣ|.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{FieldGeometry, FixationPoint, Placement};
use crate::oracle::{Category, Mask, RasterMask, Scene, Span};
use crate::scanpath::{FixationSequence, PriorityMap};
use crate::{par, Error, Result};

/// Distance from a segment edge within which a fixation still counts.
pub const TOLERANCE_DVA: f64 = 0.7;
pub const CENTER_BIAS_DIAMETER_DVA: f64 = 5.0;
pub const HEATMAP_SIGMA_DVA: f64 = 0.25;
/// Post-initial fixations scored per sequence.
pub const SCORED_FIXATIONS: usize = 4;
/// Kernel support of heatmap bumps, in σ.
pub const HEATMAP_TRUNCATE: f64 = 5.0;
pub const FREQUENCY_RESAMPLES: usize = 10_000;
pub const MAP_RESAMPLES: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalCategory {
    People,
    CenterBias,
    SuRGazeGrasp,
    SuRNoGazeGrasp,
    SuI,
    Text,
    Salient,
}

impl EvalCategory {
    pub const ALL: [EvalCategory; 7] = [
        EvalCategory::People,
        EvalCategory::CenterBias,
        EvalCategory::SuRGazeGrasp,
        EvalCategory::SuRNoGazeGrasp,
        EvalCategory::SuI,
        EvalCategory::Text,
        EvalCategory::Salient,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EvalCategory::People => "people",
            EvalCategory::CenterBias => "center_bias",
            EvalCategory::SuRGazeGrasp => "su_r_gaze_grasp",
            EvalCategory::SuRNoGazeGrasp => "su_r_no_gaze_grasp",
            EvalCategory::SuI => "su_i",
            EvalCategory::Text => "text",
            EvalCategory::Salient => "salient",
        }
    }
}

/// Objects of one category in one image.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryMask {
    pub objects: Vec<RasterMask>,
    /// Hits are divided by the object count (su_i); otherwise a fixation
    /// counts once however many objects it touches.
    pub per_object: bool,
}

impl CategoryMask {
    /// Hits credited to one fixation.
    pub fn hits(&self, x: f64, y: f64, tolerance_px: f64) -> f64 {
        let near = self.objects.iter().filter(|m| m.distance(x, y) <= tolerance_px).count();
        if self.per_object {
            near as f64 / self.objects.len() as f64
        } else if near > 0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Category masks of one image; `None` marks a category that does not
/// apply to the image.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryMaskSet {
    pub scene_id: String,
    pub ppd: u32,
    pub placement: Placement,
    pub masks: [Option<CategoryMask>; 7],
}

fn disc(cx: f64, cy: f64, radius: f64, field: &FieldGeometry) -> Result<RasterMask> {
    Mask::Ellipse {
        cx,
        cy,
        rx: radius,
        ry: radius,
    }
    .rasterize(field.width, field.height)
}

impl CategoryMaskSet {
    /// Masks from scene regions.
    ///
    /// su_r regions split by gaze/grasp: images with a gaze or grasp cue
    /// form one set, images without people the other; images with people
    /// but no cue use neither. su_i applies wherever su_i objects exist.
    /// Salient masks come from salient regions when present.
    pub fn from_scene(scene: &Scene, field: &FieldGeometry, center_diameter_dva: f64) -> Result<Self> {
        if !(center_diameter_dva > 0.0) {
            return Err(Error::domain("center-bias diameter must be positive"));
        }
        let of = |c: Category| -> Vec<RasterMask> {
            scene
                .regions
                .iter()
                .filter(|r| r.category == c)
                .map(|r| r.raster().clone())
                .collect()
        };
        let plain = |objects: Vec<RasterMask>| {
            (!objects.is_empty()).then_some(CategoryMask {
                objects,
                per_object: false,
            })
        };
        let people = of(Category::Person);
        let has_people = !people.is_empty();
        let su_r: Vec<_> = scene.regions.iter().filter(|r| r.category == Category::SuR).collect();
        let cued: Vec<RasterMask> = su_r.iter().filter(|r| r.gaze_grasp).map(|r| r.raster().clone()).collect();
        let uncued: Vec<RasterMask> = if has_people {
            Vec::new()
        } else {
            su_r.iter().map(|r| r.raster().clone()).collect()
        };
        let su_i = of(Category::SuI);
        let (cx, cy) = scene.placement.center();
        let radius = center_diameter_dva * field.ppd as f64 / 2.0;
        let center = disc(cx, cy, radius, field)?;
        let mut masks: [Option<CategoryMask>; 7] = Default::default();
        masks[EvalCategory::People.index()] = plain(people);
        masks[EvalCategory::CenterBias.index()] = plain(vec![center]);
        masks[EvalCategory::SuRGazeGrasp.index()] = if has_people { plain(cued) } else { None };
        masks[EvalCategory::SuRNoGazeGrasp.index()] = plain(uncued);
        masks[EvalCategory::SuI.index()] = (!su_i.is_empty()).then_some(CategoryMask {
            objects: su_i,
            per_object: true,
        });
        masks[EvalCategory::Text.index()] = plain(of(Category::Text));
        masks[EvalCategory::Salient.index()] = plain(of(Category::Salient));
        Ok(CategoryMaskSet {
            scene_id: scene.id.clone(),
            ppd: field.ppd,
            placement: scene.placement,
            masks,
        })
    }

    /// Replace the salient mask with a disc of `area` pixels at the map's
    /// global maximum.
    pub fn set_salient_from_map(&mut self, map: &PriorityMap, area: f64, field: &FieldGeometry) -> Result<()> {
        if !(area > 0.0) {
            return Err(Error::domain("salient patch area must be positive"));
        }
        let best = map
            .values
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > map.values[b] { i } else { b });
        let (x, y) = ((best % map.width) as f64, (best / map.width) as f64);
        self.masks[EvalCategory::Salient.index()] = Some(CategoryMask {
            objects: vec![disc(x, y, (area / std::f64::consts::PI).sqrt(), field)?],
            per_object: false,
        });
        Ok(())
    }

    pub fn applies(&self, c: EvalCategory) -> bool {
        self.masks[c.index()].is_some()
    }

    pub fn get(&self, c: EvalCategory) -> Option<&CategoryMask> {
        self.masks[c.index()].as_ref()
    }

    /// Expected hits per uniformly placed fixation in the image: the
    /// tolerance-dilated area fraction, averaged over objects for
    /// per-object categories.
    pub fn dilated_fraction(&self, c: EvalCategory, tolerance_dva: f64) -> Option<f64> {
        let m = self.get(c)?;
        let p = self.placement;
        let (w, h) = (p.offset_x + p.image_width, p.offset_y + p.image_height);
        let tol = tolerance_dva * self.ppd as f64;
        let image = RasterMask::from_spans(
            (p.offset_y..h)
                .map(|y| Span {
                    y: y as u32,
                    x0: p.offset_x as u32,
                    x1: w as u32,
                })
                .collect(),
        );
        let area = image.area as f64;
        let frac = |r: &RasterMask| dilate(r, tol, w, h).overlap(&image) as f64 / area;
        Some(if m.per_object {
            m.objects.iter().map(frac).sum::<f64>() / m.objects.len() as f64
        } else {
            let all: Vec<Span> = m.objects.iter().flat_map(|o| dilate(o, tol, w, h).spans).collect();
            union(all).overlap(&image) as f64 / area
        })
    }
}

/// Pixels within `radius` of a mask pixel centre, clipped to `width × height`.
pub fn dilate(mask: &RasterMask, radius: f64, width: usize, height: usize) -> RasterMask {
    let r = radius.max(0.0);
    let reach = r.floor() as i64;
    let mut spans = Vec::new();
    for s in &mask.spans {
        for dy in -reach..=reach {
            let y = s.y as i64 + dy;
            if y < 0 || y >= height as i64 {
                continue;
            }
            let half = (r * r - (dy * dy) as f64).max(0.0).sqrt().floor() as i64;
            let x0 = (s.x0 as i64 - half).max(0);
            let x1 = (s.x1 as i64 + half).min(width as i64);
            if x1 > x0 {
                spans.push(Span {
                    y: y as u32,
                    x0: x0 as u32,
                    x1: x1 as u32,
                });
            }
        }
    }
    union(spans)
}

fn union(mut spans: Vec<Span>) -> RasterMask {
    spans.sort_by_key(|s| (s.y, s.x0));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(l) if l.y == s.y && s.x0 <= l.x1 => l.x1 = l.x1.max(s.x1),
            _ => out.push(s),
        }
    }
    RasterMask::from_spans(out)
}

/// Per-category hits of the first `n` post-initial fixations; `None` for
/// categories that do not apply. A fixation may count toward several
/// categories.
pub fn assign_fixations(
    seq: &FixationSequence,
    masks: &CategoryMaskSet,
    tolerance_dva: f64,
    n: usize,
) -> [Option<f64>; 7] {
    let tol = tolerance_dva * masks.ppd as f64;
    let mut out = [None; 7];
    for c in EvalCategory::ALL {
        if let Some(m) = masks.get(c) {
            out[c.index()] = Some(seq.post_initial(n).map(|f| m.hits(f.x, f.y, tol)).sum());
        }
    }
    out
}

/// Frequency of one category: mean hits per image across units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub category: EvalCategory,
    pub mean: f64,
    /// Standard error across units; zero with a single unit.
    pub se: f64,
    /// Images where the category applies.
    pub images: usize,
    /// Units that saw at least one such image.
    pub units: usize,
}

/// Frequencies of one source. A unit is a subject, or a model run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub source: String,
    pub stats: Vec<CategoryStat>,
    /// Per-unit mean hits per image, indexed like [`EvalCategory::ALL`].
    pub unit_means: BTreeMap<String, Vec<Option<f64>>>,
}

impl FrequencyTable {
    pub fn means(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mean).collect()
    }

    pub fn ses(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.se).collect()
    }

    pub fn stat(&self, c: EvalCategory) -> Option<&CategoryStat> {
        self.stats.iter().find(|s| s.category == c)
    }

    /// Categories where every unit has a value, in `ALL` order.
    pub fn complete_categories(&self) -> Vec<EvalCategory> {
        EvalCategory::ALL
            .into_iter()
            .filter(|c| {
                self.stat(*c).is_some() && self.unit_means.values().all(|v| v[c.index()].is_some())
            })
            .collect()
    }

    /// Covariance of the category means across units (sample covariance
    /// divided by the unit count), so its diagonal holds SE².
    pub fn mean_covariance(&self, cats: &[EvalCategory]) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = self
            .unit_means
            .values()
            .map(|v| cats.iter().map(|c| v[c.index()]).collect::<Option<Vec<f64>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::domain("covariance needs every unit to cover every category"))?;
        let u = rows.len();
        if u < 2 {
            return Err(Error::domain("covariance needs at least two units"));
        }
        let k = cats.len();
        let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / u as f64).collect();
        let mut cov = DMatrix::zeros(k, k);
        for r in &rows {
            for a in 0..k {
                for b in 0..k {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        Ok(cov / ((u - 1) as f64 * u as f64))
    }
}

fn unit_of(seq: &FixationSequence) -> String {
    seq.subject_id.clone().unwrap_or_else(|| seq.source.clone())
}

/// Frequency table of `sequences` against per-scene masks. Sequences of
/// one unit on one image are averaged first; scenes without masks are
/// skipped.
pub fn frequency_table(
    source: &str,
    sequences: &[FixationSequence],
    masks: &BTreeMap<String, CategoryMaskSet>,
    tolerance_dva: f64,
    n: usize,
) -> Result<FrequencyTable> {
    // unit → scene → (sum of hits, count)
    let mut per: BTreeMap<String, BTreeMap<String, ([f64; 7], usize)>> = BTreeMap::new();
    let hits = par::map_slice(sequences, |s| {
        masks
            .get(&s.scene_id)
            .map(|m| assign_fixations(s, m, tolerance_dva, n))
    });
    for (s, h) in sequences.iter().zip(hits) {
        let Some(h) = h else { continue };
        let e = per
            .entry(unit_of(s))
            .or_default()
            .entry(s.scene_id.clone())
            .or_insert(([0.0; 7], 0));
        for (acc, v) in e.0.iter_mut().zip(h) {
            *acc += v.unwrap_or(0.0);
        }
        e.1 += 1;
    }
    if per.is_empty() {
        return Err(Error::domain(format!("no {source} sequence matches a masked scene")));
    }
    let mut unit_means = BTreeMap::new();
    let mut images: [BTreeSet<&str>; 7] = Default::default();
    for (unit, scenes) in &per {
        let mut v = vec![None; 7];
        for c in EvalCategory::ALL {
            let vals: Vec<f64> = scenes
                .iter()
                .filter(|(id, _)| masks[id.as_str()].applies(c))
                .map(|(id, (sum, k))| {
                    images[c.index()].insert(id.as_str());
                    sum[c.index()] / *k as f64
                })
                .collect();
            if !vals.is_empty() {
                v[c.index()] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        unit_means.insert(unit.clone(), v);
    }
    let stats = EvalCategory::ALL
        .into_iter()
        .filter_map(|c| {
            let vals: Vec<f64> = unit_means.values().filter_map(|v: &Vec<Option<f64>>| v[c.index()]).collect();
            if vals.is_empty() {
                return None;
            }
            let (mean, se) = mean_se(&vals);
            Some(CategoryStat {
                category: c,
                mean,
                se,
                images: images[c.index()].len(),
                units: vals.len(),
            })
        })
        .collect();
    Ok(FrequencyTable {
        source: source.to_string(),
        stats,
        unit_means,
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Σ_i (x_i − μ_i)²/(2 SE_i²) + ½ ln(2π SE_i²).
pub fn nll_independent(x: &[f64], mu: &[f64], se: &[f64]) -> Result<f64> {
    if x.len() != mu.len() || x.len() != se.len() || x.is_empty() {
        return Err(Error::shape("NLL inputs differ in length or are empty"));
    }
    if se.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::domain("every standard error must be positive"));
    }
    Ok(x.iter()
        .zip(mu)
        .zip(se)
        .map(|((x, m), s)| {
            let v = s * s;
            (x - m).powi(2) / (2.0 * v) + 0.5 * (2.0 * std::f64::consts::PI * v).ln()
        })
        .sum())
}

/// ½ (x−μ)ᵀ Σ⁻¹ (x−μ) + ½ ln|Σ| + (k/2) ln 2π. A ridge of
/// 1e-8 · tr Σ / k is added only when Σ is not positive definite.
pub fn nll_mvn(x: &[f64], mu: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let k = x.len();
    if mu.len() != k || cov.nrows() != k || cov.ncols() != k || k == 0 {
        return Err(Error::shape("NLL inputs differ in size or are empty"));
    }
    if cov.iter().any(|v| !v.is_finite()) || (cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(Error::domain("covariance must be finite and symmetric"));
    }
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-8 * cov.trace() / k as f64;
            let reg = cov + DMatrix::identity(k, k) * ridge;
            reg.cholesky()
                .ok_or_else(|| Error::numeric("covariance is singular even after ridge regularization"))?
        }
    };
    let d = DVector::from_iterator(k, x.iter().zip(mu).map(|(a, b)| a - b));
    let sol = chol.solve(&d);
    let quad = d.dot(&sol);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * quad + 0.5 * logdet + 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Model NLL over the baseline's.
pub fn nnll(model: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) || !baseline.is_finite() {
        return Err(Error::domain(format!(
            "baseline NLL {baseline} is not positive; normalization is undefined, report raw NLLs instead"
        )));
    }
    Ok(model / baseline)
}

/// Unit-peak Gaussian bumps of σ = `sigma_dva` at each fixation's pixel,
/// truncated at [`HEATMAP_TRUNCATE`] σ.
pub fn fixation_heatmap(fixations: &[FixationPoint], field: &FieldGeometry, sigma_dva: f64) -> Result<PriorityMap> {
    if !(sigma_dva > 0.0) {
        return Err(Error::domain("heatmap sigma must be positive"));
    }
    let (w, h) = (field.width, field.height);
    let sigma = sigma_dva * field.ppd as f64;
    let reach = (HEATMAP_TRUNCATE * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut values = vec![0.0; w * h];
    for f in fixations {
        f.check_in(field)?;
        let (px, py) = (f.x.round() as i64, f.y.round() as i64);
        for dy in -reach..=reach {
            let y = py + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            let ky = kernel[(dy + reach) as usize];
            let row = &mut values[y as usize * w..(y as usize + 1) * w];
            let x0 = (px - reach).max(0);
            let x1 = (px + reach).min(w as i64 - 1);
            for x in x0..=x1 {
                row[x as usize] += ky * kernel[(x - px + reach) as usize];
            }
        }
    }
    // an all-zero map is legal here, unlike priority maps
    Ok(PriorityMap {
        width: w,
        height: h,
        values,
        source: "fixations".into(),
    })
}

/// First `n` post-initial fixations of every sequence.
pub fn scored_points(seqs: &[&FixationSequence], n: usize) -> Vec<FixationPoint> {
    seqs.iter().flat_map(|s| s.post_initial(n).copied()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucScore {
    pub value: f64,
    /// The map was constant and the score is the chance convention.
    pub flagged: bool,
}

/// Map values sorted for repeated threshold counts.
pub struct RankedMap<'a> {
    map: &'a PriorityMap,
    sorted: Vec<f64>,
    constant: bool,
}

impl<'a> RankedMap<'a> {
    pub fn new(map: &'a PriorityMap) -> Self {
        let mut sorted = map.values.clone();
        sorted.sort_by(f64::total_cmp);
        let constant = sorted.first() == sorted.last();
        RankedMap { map, sorted, constant }
    }

    fn above(&self, t: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|v| *v < t)
    }

    /// AUC-Judd of `fixations` on this map.
    pub fn auc(&self, fixations: &[FixationPoint]) -> Result<AucScore> {
        if fixations.is_empty() {
            return Err(Error::domain("AUC needs at least one fixation"));
        }
        if self.constant {
            return Ok(AucScore {
                value: 0.5,
                flagged: true,
            });
        }
        let (w, h) = (self.map.width, self.map.height);
        let mut vals = Vec::with_capacity(fixations.len());
        for f in fixations {
            let (x, y) = (f.x.round(), f.y.round());
            if !(x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h) {
                return Err(Error::domain(format!("fixation ({}, {}) outside the map", f.x, f.y)));
            }
            vals.push(self.map.get(x as usize, y as usize));
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        let nf = vals.len() as f64;
        let negatives = (self.sorted.len() as f64 - nf).max(1.0);
        let (mut tp, mut fp) = (vec![0.0], vec![0.0]);
        let mut i = 0;
        while i < vals.len() {
            let t = vals[i];
            while i < vals.len() && vals[i] == t {
                i += 1;
            }
            tp.push(i as f64 / nf);
            fp.push(((self.above(t) as f64 - i as f64) / negatives).clamp(0.0, 1.0));
        }
        tp.push(1.0);
        fp.push(1.0);
        let value = (1..tp.len())
            .map(|i| (fp[i] - fp[i - 1]) * (tp[i] + tp[i - 1]) / 2.0)
            .sum();
        Ok(AucScore { value, flagged: false })
    }
}

/// AUC-Judd: thresholds at the distinct map values of the fixations, with
/// every non-fixated pixel a negative. A constant map scores 0.5, flagged.
pub fn auc(map: &PriorityMap, fixations: &[FixationPoint]) -> Result<AucScore> {
    RankedMap::new(map).auc(fixations)
}

/// Pearson correlation over pixels.
pub fn cc(a: &PriorityMap, b: &PriorityMap) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::shape(format!(
            "{}×{} and {}×{} maps",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.values.len() as f64;
    let ma = a.values.iter().sum::<f64>() / n;
    let mb = b.values.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::domain("correlation is undefined for a constant map"));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Percentile interval of `stat` over resamples of `0..n` with replacement.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    n: usize,
    resamples: usize,
    level: f64,
    rng: &mut R,
    stat: impl Fn(&[usize]) -> f64,
) -> Result<(f64, f64)> {
    bootstrap_ci_2d(n, 1, resamples, level, rng, |a, _| stat(a))
}

/// Percentile interval of `stat` over joint resamples of `0..n_a` and
/// `0..n_b`. Non-finite statistics are dropped.
pub fn bootstrap_ci_2d<R: Rng + ?Sized>(
    n_a: usize,
    n_b: usize,
    resamples: usize,
    level: f64,
    rng: &mut R,
    stat: impl Fn(&[usize], &[usize]) -> f64,
) -> Result<(f64, f64)> {
    if n_a == 0 || n_b == 0 || resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("bootstrap needs data, resamples and a level in (0, 1)"));
    }
    let mut out = Vec::with_capacity(resamples);
    let (mut a, mut b) = (vec![0; n_a], vec![0; n_b]);
    for _ in 0..resamples {
        a.iter_mut().for_each(|v| *v = rng.random_range(0..n_a));
        b.iter_mut().for_each(|v| *v = rng.random_range(0..n_b));
        let s = stat(&a, &b);
        if s.is_finite() {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(Error::numeric("every bootstrap statistic was non-finite"));
    }
    out.sort_by(f64::total_cmp);
    let q = |p: f64| out[((p * (out.len() - 1) as f64).round() as usize).min(out.len() - 1)];
    let tail = (1.0 - level) / 2.0;
    Ok((q(tail), q(1.0 - tail)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub tolerance_dva: f64,
    pub center_bias_dva: f64,
    pub heatmap_sigma_dva: f64,
    pub n_fixations: usize,
    /// Source whose NLL normalizes the others.
    pub baseline: Option<String>,
    pub frequency_resamples: usize,
    pub map_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tolerance_dva: TOLERANCE_DVA,
            center_bias_dva: CENTER_BIAS_DIAMETER_DVA,
            heatmap_sigma_dva: HEATMAP_SIGMA_DVA,
            n_fixations: SCORED_FIXATIONS,
            baseline: None,
            frequency_resamples: FREQUENCY_RESAMPLES,
            map_resamples: MAP_RESAMPLES,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub source: String,
    /// Categories scored, shared by both NLLs: those every subject covers,
    /// with a nonzero human SE.
    pub categories: Vec<EvalCategory>,
    pub nll_indep: f64,
    pub nll_mvn: Option<f64>,
    pub nnll_indep: Option<f64>,
    pub nnll_mvn: Option<f64>,
    pub auc: f64,
    pub auc_ci: (f64, f64),
    pub cc: f64,
    pub cc_ci: (f64, f64),
    /// Scenes where the model map was constant or a sequence was flagged.
    pub flagged_scenes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub config: EvalConfig,
    pub human: FrequencyTable,
    /// Percentile intervals of the human category means.
    pub human_ci: BTreeMap<EvalCategory, (f64, f64)>,
    pub models: Vec<FrequencyTable>,
    pub scores: Vec<ModelScores>,
    #[serde(default)]
    pub heatmaps: Vec<String>,
}

impl EvaluationReport {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `source,category,mean,se,images,units` for humans and every model.
    pub fn write_frequency_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "source,category,mean,se,images,units")?;
        for t in std::iter::once(&self.human).chain(&self.models) {
            for s in &t.stats {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t.source,
                    s.category.name(),
                    s.mean,
                    s.se,
                    s.images,
                    s.units
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Score model scanpaths against human ones over `scenes`.
///
/// Model frequencies are compared with the human means on the categories
/// both cover. Model heatmaps are built from model fixations; AUC pools
/// human fixations per scene, CC compares with the human heatmap. AUC
/// intervals resample subjects and scenes, CC intervals resample scenes.
pub fn evaluate<R: Rng + ?Sized>(
    scenes: &[Scene],
    field: &FieldGeometry,
    human: &[FixationSequence],
    models: &BTreeMap<String, Vec<FixationSequence>>,
    config: &EvalConfig,
    rng: &mut R,
) -> Result<EvaluationReport> {
    let n = config.n_fixations;
    let masks: BTreeMap<String, CategoryMaskSet> = scenes
        .iter()
        .map(|s| Ok((s.id.clone(), CategoryMaskSet::from_scene(s, field, config.center_bias_dva)?)))
        .collect::<Result<_>>()?;
    let human_table = frequency_table("human", human, &masks, config.tolerance_dva, n)?;

    let units: Vec<&String> = human_table.unit_means.keys().collect();
    let mut human_ci = BTreeMap::new();
    for s in &human_table.stats {
        let c = s.category;
        let vals: Vec<f64> = units.iter().filter_map(|u| human_table.unit_means[*u][c.index()]).collect();
        let ci = bootstrap_ci(vals.len(), config.frequency_resamples, config.level, rng, |idx| {
            idx.iter().map(|&i| vals[i]).sum::<f64>() / idx.len() as f64
        })?;
        human_ci.insert(c, ci);
    }

    // human fixations per scene per subject
    let scene_ids: Vec<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    let unit_index: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let mut by_scene: Vec<Vec<Vec<FixationPoint>>> = vec![vec![Vec::new(); units.len()]; scenes.len()];
    for seq in human {
        if let Some(si) = scene_ids.iter().position(|id| *id == seq.scene_id) {
            let u = unit_index[unit_of(seq).as_str()];
            by_scene[si][u].extend(seq.post_initial(n).copied());
        }
    }
    let human_maps: Vec<Option<PriorityMap>> = par::map_range(scenes.len(), |si| {
        let pts: Vec<FixationPoint> = by_scene[si].iter().flatten().copied().collect();
        if pts.is_empty() {
            return Ok(None);
        }
        fixation_heatmap(&pts, field, config.heatmap_sigma_dva).map(Some)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut tables = Vec::new();
    let mut scores = Vec::new();
    for (source, seqs) in models {
        let table = frequency_table(source, seqs, &masks, config.tolerance_dva, n)?;
        let cats: Vec<EvalCategory> = human_table
            .complete_categories()
            .into_iter()
            .filter(|c| table.stat(*c).is_some())
            .filter(|c| human_table.stat(*c).is_some_and(|s| s.se > 0.0))
            .collect();
        if cats.is_empty() {
            return Err(Error::domain(format!("{source} shares no category with the human data")));
        }
        let pick = |t: &FrequencyTable, f: fn(&CategoryStat) -> f64| -> Vec<f64> {
            cats.iter().map(|c| f(t.stat(*c).expect("filtered"))).collect()
        };
        let x = pick(&table, |s| s.mean);
        let mu = pick(&human_table, |s| s.mean);
        let se = pick(&human_table, |s| s.se);
        let nll_indep = nll_independent(&x, &mu, &se)?;
        let nll_mvn = human_table
            .mean_covariance(&cats)
            .and_then(|cov| nll_mvn(&x, &mu, &cov))
            .ok();

        // heatmap metrics per scene
        let per_scene = par::map_range(scenes.len(), |si| -> Result<Option<(f64, f64, bool)>> {
            let Some(hm) = &human_maps[si] else { return Ok(None) };
            let own: Vec<&FixationSequence> = seqs.iter().filter(|s| s.scene_id == scene_ids[si]).collect();
            if own.is_empty() {
                return Ok(None);
            }
            let pts = scored_points(&own, n);
            let map = fixation_heatmap(&pts, field, config.heatmap_sigma_dva)?;
            let human_pts: Vec<FixationPoint> = by_scene[si].iter().flatten().copied().collect();
            let a = auc(&map, &human_pts)?;
            let c = cc(&map, hm).unwrap_or(f64::NAN);
            Ok(Some((a.value, c, a.flagged || own.iter().any(|s| s.flagged))))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let scored: Vec<usize> = (0..scenes.len()).filter(|&i| per_scene[i].is_some()).collect();
        if scored.is_empty() {
            return Err(Error::domain(format!("{source} has no scene with human fixations")));
        }
        let value = |i: usize| per_scene[i].expect("scored");
        let auc_mean = scored.iter().map(|&i| value(i).0).sum::<f64>() / scored.len() as f64;
        let ccs: Vec<f64> = scored.iter().map(|&i| value(i).1).filter(|v| v.is_finite()).collect();
        let cc_mean = if ccs.is_empty() {
            f64::NAN
        } else {
            ccs.iter().sum::<f64>() / ccs.len() as f64
        };
        let flagged_scenes = scored
            .iter()
            .filter(|&&i| value(i).2)
            .map(|&i| scene_ids[i].to_string())
            .collect();

        // AUC interval: resample subjects and scenes together
        let model_maps: Vec<PriorityMap> = scored
            .iter()
            .map(|&si| {
                let own: Vec<&FixationSequence> = seqs.iter().filter(|s| s.scene_id == scene_ids[si]).collect();
                fixation_heatmap(&scored_points(&own, n), field, config.heatmap_sigma_dva)
            })
            .collect::<Result<_>>()?;
        let ranked: Vec<RankedMap> = model_maps.iter().map(RankedMap::new).collect();
        let auc_ci = bootstrap_ci_2d(units.len(), scored.len(), config.map_resamples, config.level, rng, |us, ss| {
            let mut total = 0.0;
            let mut k = 0;
            for &s in ss {
                let pts: Vec<FixationPoint> = us.iter().flat_map(|&u| by_scene[scored[s]][u].iter().copied()).collect();
                if let Ok(a) = ranked[s].auc(&pts) {
                    total += a.value;
                    k += 1;
                }
            }
            total / k as f64
        })?;
        let cc_vals: Vec<f64> = scored.iter().map(|&i| value(i).1).collect();
        let cc_ci = bootstrap_ci(cc_vals.len(), config.map_resamples, config.level, rng, |idx| {
            let v: Vec<f64> = idx.iter().map(|&i| cc_vals[i]).filter(|v| v.is_finite()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .unwrap_or((f64::NAN, f64::NAN));

        scores.push(ModelScores {
            source: source.clone(),
            categories: cats,
            nll_indep,
            nll_mvn,
            nnll_indep: None,
            nnll_mvn: None,
            auc: auc_mean,
            auc_ci,
            cc: cc_mean,
            cc_ci,
            flagged_scenes,
        });
        tables.push(table);
    }

    if let Some(b) = &config.baseline {
        let base = scores
            .iter()
            .find(|s| &s.source == b)
            .cloned()
            .ok_or_else(|| Error::domain(format!("baseline {b} is not among the models")))?;
        for s in scores.iter_mut() {
            if s.categories != base.categories {
                continue;
            }
            s.nnll_indep = nnll(s.nll_indep, base.nll_indep).ok();
            s.nnll_mvn = match (s.nll_mvn, base.nll_mvn) {
                (Some(m), Some(bm)) => nnll(m, bm).ok(),
                _ => None,
            };
        }
    }

    Ok(EvaluationReport {
        version: EvaluationReport::FORMAT_VERSION,
        config: config.clone(),
        human: human_table,
        human_ci,
        models: tables,
        scores,
        heatmaps: Vec::new(),
    })
}

#[cfg(test)]
mod tests;
