use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::mask::{Mask, RasterMask};
use crate::geometry::{FieldGeometry, Placement};
use crate::{Error, Result};

/// Normalized importance at or above which an object is scene-understanding
/// relevant.
pub const SU_R_THRESHOLD: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Person,
    Text,
    #[serde(rename = "su_r_object")]
    SuR,
    #[serde(rename = "su_i_object")]
    SuI,
    Salient,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Person,
        Category::Text,
        Category::SuR,
        Category::SuI,
        Category::Salient,
        Category::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Person => "person",
            Category::Text => "text",
            Category::SuR => "su_r_object",
            Category::SuI => "su_i_object",
            Category::Salient => "salient",
            Category::Other => "other",
        }
    }

    pub fn is_object(self) -> bool {
        matches!(self, Category::SuR | Category::SuI | Category::Other)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemanticRegion {
    #[serde(default)]
    pub id: String,
    pub mask: Mask,
    /// Importance in (0, 1]; the most important region of a scene has 1.
    pub weight: f64,
    pub concept: Vec<f64>,
    pub category: Category,
    /// Someone in the scene looks at or holds this object.
    #[serde(default)]
    pub gaze_grasp: bool,
    /// Raw external importance score, before normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
    #[serde(skip)]
    raster: OnceLock<RasterMask>,
}

impl PartialEq for SemanticRegion {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.mask == other.mask
            && self.weight == other.weight
            && self.concept == other.concept
            && self.category == other.category
            && self.gaze_grasp == other.gaze_grasp
            && self.importance == other.importance
            && self.extra == other.extra
    }
}

impl SemanticRegion {
    pub fn new(id: impl Into<String>, mask: Mask, weight: f64, concept: Vec<f64>, category: Category) -> Self {
        SemanticRegion {
            id: id.into(),
            mask,
            weight,
            concept,
            category,
            gaze_grasp: false,
            importance: None,
            extra: Map::new(),
            raster: OnceLock::new(),
        }
    }

    /// Pixels of the region in field coordinates. The raster is cached, so
    /// edit `mask` only on a fresh region.
    pub fn raster(&self) -> &RasterMask {
        self.raster.get_or_init(|| {
            // Scene validation guarantees the mask lies in the field; clip
            // generously for unvalidated use.
            self.mask
                .rasterize(1 << 16, 1 << 16)
                .unwrap_or_default()
        })
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.raster().centroid().unwrap_or((f64::NAN, f64::NAN))
    }
}

fn default_version() -> u32 {
    Scene::FORMAT_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_version")]
    pub version: u32,
    pub id: String,
    pub placement: Placement,
    pub regions: Vec<SemanticRegion>,
    /// Gist that is always visible.
    pub base_concept: Vec<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Scene {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn new(id: impl Into<String>, placement: Placement, regions: Vec<SemanticRegion>, base_concept: Vec<f64>) -> Self {
        Scene {
            version: Self::FORMAT_VERSION,
            id: id.into(),
            placement,
            regions,
            base_concept,
            extra: Map::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.base_concept.len()
    }

    /// Check the scene invariants against a field.
    pub fn validate(&self, field: &FieldGeometry) -> Result<()> {
        self.validate_inner(field).map_err(|e| e.in_scene(&self.id))
    }

    fn validate_inner(&self, field: &FieldGeometry) -> Result<()> {
        if self.version > Self::FORMAT_VERSION {
            return Err(Error::Data(format!(
                "scene format version {} is newer than supported {}",
                self.version,
                Self::FORMAT_VERSION
            )));
        }
        if !self.placement.fits(field) {
            return Err(Error::domain("placement exceeds the field"));
        }
        if self.regions.is_empty() {
            return Err(Error::domain("scene has no regions"));
        }
        let d = self.dim();
        check_unit(&self.base_concept, "base concept")?;
        let mut max_w: f64 = 0.0;
        let p = self.placement;
        for r in &self.regions {
            if r.concept.len() != d {
                return Err(Error::shape(format!(
                    "region {} concept has dimension {}, scene uses {d}",
                    r.id,
                    r.concept.len()
                )));
            }
            check_unit(&r.concept, &format!("region {} concept", r.id))?;
            if !(r.weight > 0.0 && r.weight <= 1.0) {
                return Err(Error::domain(format!("region {} weight {} outside (0, 1]", r.id, r.weight)));
            }
            max_w = max_w.max(r.weight);
            let raster = r.raster();
            if raster.is_empty() {
                return Err(Error::domain(format!("region {} has an empty mask", r.id)));
            }
            let (x0, y0, x1, y1) = raster.bounds().expect("non-empty");
            if x0 < p.offset_x
                || y0 < p.offset_y
                || x1 > p.offset_x + p.image_width
                || y1 > p.offset_y + p.image_height
            {
                return Err(Error::domain(format!("region {} extends outside the image", r.id)));
            }
        }
        if (max_w - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("largest region weight is {max_w}, expected 1")));
        }
        Ok(())
    }

    /// Normalize external importance scores by their maximum, use them as
    /// weights, and relabel objects as su_r (≥ 0.95) or su_i.
    pub fn apply_importance_scores(&mut self) -> Result<()> {
        let max = self
            .regions
            .iter()
            .filter_map(|r| r.importance)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(());
        }
        if !(max > 0.0) {
            return Err(Error::Data(format!("scene {}: importance scores must be positive", self.id)));
        }
        for r in &mut self.regions {
            if let Some(s) = r.importance {
                let n = (s / max).max(0.0);
                r.weight = n.max(1e-6);
                if r.category.is_object() {
                    r.category = if n >= SU_R_THRESHOLD {
                        Category::SuR
                    } else {
                        Category::SuI
                    };
                }
            }
        }
        Ok(())
    }

    pub fn has_category(&self, c: Category) -> bool {
        self.regions.iter().any(|r| r.category == c)
    }
}

fn check_unit(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!("{what} has non-finite entries")));
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!("{what} has norm {n}, expected 1")));
    }
    Ok(())
}
