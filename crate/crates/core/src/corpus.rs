//! Synthetic scene corpora, scene files, fixation CSVs and external masks.
//!
//! Scene corpus JSON:
//!
//! ```json
//! { "version": 1,
//!   "field": { "observer_distance": 75.0, "pixel_pitch": 0.0293, "ppd": 44, "width": 1280, "height": 1280 },
//!   "scenes": [ { "version": 1, "id": "scene-0000",
//!                 "placement": { "offset_x": 0, "offset_y": 0, "image_width": 1280, "image_height": 1280 },
//!                 "base_concept": [ ... ],
//!                 "regions": [ { "id": "r0", "mask": { "shape": "rect", "x": 10, "y": 20, "width": 64, "height": 48 },
//!                                "weight": 1.0, "concept": [ ... ], "category": "su_r_object",
//!                                "gaze_grasp": false, "importance": 9.1 } ] } ] }
//! ```
//!
//! Mask shapes are `rect`, `ellipse` (`cx, cy, rx, ry`), `polygon`
//! (`points`) and `rle` (`x0, y0, width, height, counts`, alternating
//! off/on runs in row-major order starting with off). Unknown fields are
//! kept and written back.
//!
//! Fixation CSV columns: `scene_id,source,subject_id,index,x_px,y_px`, one
//! row per fixation; `subject_id` may be empty.
//!
//! External mask images are named `<scene_id>__<category>.png`; any
//! non-zero pixel belongs to the mask.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::geometry::{FieldGeometry, FixationPoint, Placement};
use crate::image::Image;
use crate::oracle::{Category, Mask, RasterMask, Scene, SemanticRegion, Span};
use crate::scanpath::FixationSequence;
use crate::{par, Error, Result};

/// Region arrangement within the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Regions placed anywhere without overlap.
    Free,
    /// Exactly four regions, one per image quadrant.
    Quadrants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_scenes: usize,
    pub field: FieldGeometry,
    /// Image rectangle inside the field; the whole field when absent.
    pub placement: Option<Placement>,
    pub min_regions: usize,
    pub max_regions: usize,
    pub layout: Layout,
    /// Category of the one region with weight 1; `None` draws every region
    /// from the mix.
    pub primary: Option<Category>,
    /// Proportions of the remaining regions' categories.
    pub category_mix: Vec<(Category, f64)>,
    /// Weight range of non-primary regions.
    pub weight_range: (f64, f64),
    /// Upper weight bound for su_i regions.
    pub su_i_max_weight: f64,
    /// Region side range in DVA.
    pub size_range: (f64, f64),
    /// Minimum gap in DVA between the primary region and every salient
    /// region, when set.
    pub salient_gap: Option<f64>,
    pub concept_dim: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_scenes: 100,
            field: FieldGeometry::testing(),
            placement: None,
            min_regions: 2,
            max_regions: 5,
            layout: Layout::Free,
            primary: Some(Category::SuR),
            category_mix: vec![
                (Category::Person, 0.2),
                (Category::Text, 0.2),
                (Category::SuI, 0.4),
                (Category::Salient, 0.2),
            ],
            weight_range: (0.1, 0.9),
            su_i_max_weight: 0.3,
            size_range: (1.0, 3.0),
            salient_gap: None,
            concept_dim: 16,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::domain("a corpus needs at least one scene"));
        }
        let total: f64 = self.category_mix.iter().map(|(_, p)| p).sum();
        if self.category_mix.iter().any(|(_, p)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("category proportions sum to {total}, expected 1")));
        }
        if self.min_regions == 0 || self.min_regions > self.max_regions {
            return Err(Error::domain("region count range is empty"));
        }
        if self.layout == Layout::Quadrants && (self.min_regions > 4 || self.max_regions < 4) {
            return Err(Error::domain("the quadrant layout has exactly four regions"));
        }
        if self.concept_dim < self.max_regions + 1 {
            return Err(Error::domain("concept dimension must exceed the region count"));
        }
        let (lo, hi) = self.weight_range;
        if !(lo > 0.0 && lo <= hi && hi < 0.95) {
            return Err(Error::domain("non-primary weights must lie in (0, 0.95)"));
        }
        let (a, b) = self.size_range;
        if !(a > 0.0 && a <= b) {
            return Err(Error::domain("invalid region size range"));
        }
        if !self.placement().fits(&self.field) {
            return Err(Error::domain("placement exceeds the field"));
        }
        Ok(())
    }

    pub fn placement(&self) -> Placement {
        self.placement.unwrap_or_else(|| Placement::full(&self.field))
    }
}

/// `k` orthonormal vectors in `d` dimensions.
pub fn orthonormal_concepts<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let m = DMatrix::<f64>::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    let q = m.qr().q();
    (0..k).map(|j| q.column(j).iter().copied().collect()).collect()
}

const PACKING_TRIES: usize = 2_000;

/// Seeded scenes; scene `i` depends only on the spec and `i`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<Scene>> {
    spec.validate()?;
    par::map_range(spec.n_scenes, |i| generate_scene(spec, i))
        .into_iter()
        .collect()
}

fn draw_category<R: Rng + ?Sized>(mix: &[(Category, f64)], rng: &mut R) -> Category {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(c, p) in mix {
        acc += p;
        if u < acc {
            return c;
        }
    }
    mix.last().map(|m| m.0).unwrap_or(Category::Other)
}

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn gap(&self, o: &Rect) -> f64 {
        let dx = (o.x0 - self.x1).max(self.x0 - o.x1).max(0.0);
        let dy = (o.y0 - self.y1).max(self.y0 - o.y1).max(0.0);
        dx.hypot(dy)
    }
}

fn generate_scene(spec: &CorpusSpec, index: usize) -> Result<Scene> {
    let id = format!("scene-{index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let p = spec.placement();
    let field = &spec.field;
    let n = match spec.layout {
        Layout::Quadrants => 4,
        Layout::Free => rng.random_range(spec.min_regions..=spec.max_regions),
    };
    let mut cats: Vec<Category> = (0..n).map(|_| draw_category(&spec.category_mix, &mut rng)).collect();
    if let Some(primary) = spec.primary {
        cats[0] = primary;
    }
    let concepts = orthonormal_concepts(n + 1, spec.concept_dim, &mut rng);
    let has_person = cats.contains(&Category::Person);

    let margin = 2.0;
    let mut boxes: Vec<Rect> = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    for (k, &cat) in cats.iter().enumerate() {
        // Allowed area for this region's box.
        let (ax0, ay0, ax1, ay1) = match spec.layout {
            Layout::Free => (
                p.offset_x as f64,
                p.offset_y as f64,
                (p.offset_x + p.image_width) as f64,
                (p.offset_y + p.image_height) as f64,
            ),
            Layout::Quadrants => {
                let (hw, hh) = (p.image_width as f64 / 2.0, p.image_height as f64 / 2.0);
                let (qx, qy) = ((k % 2) as f64, (k / 2) as f64);
                let x0 = p.offset_x as f64 + qx * hw;
                let y0 = p.offset_y as f64 + qy * hh;
                (x0, y0, x0 + hw, y0 + hh)
            }
        };
        let mut placed = None;
        for _ in 0..PACKING_TRIES {
            let w = field.dva_to_px(rng.random_range(spec.size_range.0..=spec.size_range.1)).round();
            let h = field.dva_to_px(rng.random_range(spec.size_range.0..=spec.size_range.1)).round();
            if w + 2.0 * margin > ax1 - ax0 || h + 2.0 * margin > ay1 - ay0 {
                continue;
            }
            let x = rng.random_range(ax0 + margin..=ax1 - margin - w).floor();
            let y = rng.random_range(ay0 + margin..=ay1 - margin - h).floor();
            let r = Rect {
                x0: x,
                y0: y,
                x1: x + w,
                y1: y + h,
            };
            if boxes.iter().any(|b| b.gap(&r) < margin) {
                continue;
            }
            if let (Some(gap), Some(first)) = (spec.salient_gap, boxes.first()) {
                let g = field.dva_to_px(gap);
                if cat == Category::Salient && first.gap(&r) < g {
                    continue;
                }
            }
            placed = Some(r);
            break;
        }
        let r = placed.ok_or_else(|| {
            Error::Data(format!("scene {id}: could not pack region {k} after {PACKING_TRIES} tries"))
        })?;
        boxes.push(r);
        let mask = if rng.random_bool(0.5) {
            Mask::Rect {
                x: r.x0,
                y: r.y0,
                width: r.x1 - r.x0,
                height: r.y1 - r.y0,
            }
        } else {
            Mask::Ellipse {
                cx: (r.x0 + r.x1) / 2.0 - 0.5,
                cy: (r.y0 + r.y1) / 2.0 - 0.5,
                rx: (r.x1 - r.x0) / 2.0,
                ry: (r.y1 - r.y0) / 2.0,
            }
        };
        let weight = if k == 0 && spec.primary.is_some() {
            1.0
        } else if cat == Category::SuI {
            rng.random_range(spec.weight_range.0..=spec.weight_range.1.min(spec.su_i_max_weight).max(spec.weight_range.0))
        } else {
            rng.random_range(spec.weight_range.0..=spec.weight_range.1)
        };
        let mut region = SemanticRegion::new(format!("r{k}"), mask, weight, concepts[k + 1].clone(), cat);
        region.gaze_grasp = has_person && cat == Category::SuR;
        regions.push(region);
    }
    if spec.primary.is_none() {
        // Rescale so the most important region has weight 1.
        let max = regions.iter().map(|r| r.weight).fold(0.0, f64::max);
        for r in &mut regions {
            r.weight /= max;
        }
    }
    let scene = Scene::new(id, p, regions, concepts[0].clone());
    scene.validate(field)?;
    Ok(scene)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    #[serde(default = "one")]
    pub version: u32,
    pub field: FieldGeometry,
    pub scenes: Vec<Scene>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

fn one() -> u32 {
    1
}

impl CorpusFile {
    pub fn new(field: FieldGeometry, scenes: Vec<Scene>) -> Self {
        CorpusFile {
            version: 1,
            field,
            scenes,
            extra: Map::new(),
        }
    }
}

pub fn save_corpus(path: &Path, corpus: &CorpusFile) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(corpus)?)?;
    Ok(())
}

/// Load and validate every scene against the file's field.
pub fn load_corpus(path: &Path) -> Result<CorpusFile> {
    let text = std::fs::read_to_string(path)?;
    let corpus: CorpusFile = serde_json::from_str(&text)?;
    if corpus.version > 1 {
        return Err(Error::Data(format!("corpus version {} is not supported", corpus.version)));
    }
    for s in &corpus.scenes {
        s.validate(&corpus.field)?;
    }
    Ok(corpus)
}

#[derive(Debug, Serialize, Deserialize)]
struct FixationRow {
    scene_id: String,
    source: String,
    subject_id: Option<String>,
    index: usize,
    x_px: f64,
    y_px: f64,
}

pub fn write_fixations(path: &Path, sequences: &[FixationSequence]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in sequences {
        for f in &s.fixations {
            w.serialize(FixationRow {
                scene_id: s.scene_id.clone(),
                source: s.source.clone(),
                subject_id: s.subject_id.clone(),
                index: f.index,
                x_px: f.x,
                y_px: f.y,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// What to do with a fixation outside the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutOfBounds {
    Clamp,
    Drop,
}

/// Fixations grouped by (source, subject, scene) in order of first
/// appearance, each group sorted by index.
pub fn load_fixations(path: &Path, field: Option<&FieldGeometry>, oob: OutOfBounds) -> Result<Vec<FixationSequence>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut groups: BTreeMap<usize, FixationSequence> = BTreeMap::new();
    let mut keys: BTreeMap<(String, Option<String>, String), usize> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<FixationRow>().enumerate() {
        let line = i + 2;
        let mut row = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if !row.x_px.is_finite() || !row.y_px.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "non-finite coordinate".into(),
            });
        }
        let subject = row.subject_id.take().filter(|s| !s.is_empty());
        if let Some(f) = field {
            if !f.contains(row.x_px, row.y_px) {
                log::warn!("{}:{line}: fixation ({}, {}) outside the field", path.display(), row.x_px, row.y_px);
                match oob {
                    OutOfBounds::Drop => continue,
                    OutOfBounds::Clamp => {
                        row.x_px = row.x_px.clamp(0.0, f.width as f64 - 1.0);
                        row.y_px = row.y_px.clamp(0.0, f.height as f64 - 1.0);
                    }
                }
            }
        }
        let key = (row.source.clone(), subject.clone(), row.scene_id.clone());
        let next = keys.len();
        let g = *keys.entry(key).or_insert(next);
        let seq = groups.entry(g).or_insert_with(|| {
            let mut s = FixationSequence::new(row.scene_id.clone(), row.source.clone(), Vec::new());
            s.subject_id = subject;
            s
        });
        seq.fixations.push(FixationPoint::new(row.x_px, row.y_px, row.index));
    }
    Ok(groups
        .into_values()
        .map(|mut s| {
            s.fixations.sort_by_key(|f| f.index);
            s
        })
        .collect())
}

/// A binary mask from an image: every non-zero pixel is inside.
pub fn load_mask_image(path: &Path) -> Result<RasterMask> {
    let img = Image::load(path)?;
    let (w, h) = (img.width(), img.height());
    let mut spans = Vec::new();
    for y in 0..h {
        let mut x = 0;
        while x < w {
            let on = |x: usize| img.channels.iter().any(|c| c.get(x, y) > 0.0);
            if on(x) {
                let x0 = x;
                while x < w && on(x) {
                    x += 1;
                }
                spans.push(Span {
                    y: y as u32,
                    x0: x0 as u32,
                    x1: x as u32,
                });
            } else {
                x += 1;
            }
        }
    }
    Ok(RasterMask::from_spans(spans))
}

/// All `<scene_id>__<name>.png` masks in `dir`, keyed by `name`.
pub fn load_external_masks(dir: &Path, scene_id: &str) -> Result<BTreeMap<String, RasterMask>> {
    let prefix = format!("{scene_id}__");
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(rest) = name.strip_prefix(&prefix) {
            if let Some(cat) = rest.strip_suffix(".png") {
                out.insert(cat.to_string(), load_mask_image(&path)?);
            }
        }
    }
    Ok(out)
}
