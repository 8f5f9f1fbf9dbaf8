//! Visual-angle arithmetic and field-of-view embedding.
//!
//! Coordinates are in field pixels with the origin at the top-left pixel.
//! Pixel `(i, j)` is centred on the point `(i, j)`, so a fixation at integer
//! coordinates sits exactly on a pixel centre.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side of one action cell in field pixels (32× tokenization, 2× pooling).
pub const ACTION_CELL_PX: usize = 64;

/// Integer pixels per degree of visual angle for an observer at
/// `observer_distance` looking at pixels of size `pixel_pitch` (same unit).
pub fn pixels_per_degree(observer_distance: f64, pixel_pitch: f64) -> Result<u32> {
    if !(observer_distance > 0.0) || !(pixel_pitch > 0.0) {
        return Err(Error::domain(format!(
            "observer distance ({observer_distance}) and pixel pitch ({pixel_pitch}) must be positive"
        )));
    }
    let ppd = (observer_distance * 1f64.to_radians().tan() / pixel_pitch).floor();
    if ppd < 1.0 {
        return Err(Error::domain(format!(
            "fewer than one pixel per degree at distance {observer_distance}, pitch {pixel_pitch}"
        )));
    }
    Ok(ppd as u32)
}

/// The model's square field of view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    /// Eye-to-screen distance in cm.
    pub observer_distance: f64,
    /// Physical pixel size in cm.
    pub pixel_pitch: f64,
    /// Pixels per degree of visual angle.
    pub ppd: u32,
    pub width: usize,
    pub height: usize,
}

impl FieldGeometry {
    pub fn new(
        observer_distance: f64,
        pixel_pitch: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("field dimensions must be positive"));
        }
        let ppd = pixels_per_degree(observer_distance, pixel_pitch)?;
        Ok(FieldGeometry {
            observer_distance,
            pixel_pitch,
            ppd,
            width,
            height,
        })
    }

    /// 1280×1280 field at 75 cm with 0.0293 cm pixels (44 px/deg).
    pub fn testing() -> Self {
        Self::new(75.0, 0.0293, 1280, 1280).expect("valid preset")
    }

    /// Same display, observer moved to 39.3 cm (23 px/deg).
    pub fn training() -> Self {
        Self::new(39.3, 0.0293, 1280, 1280).expect("valid preset")
    }

    /// A field with the 0.0293 cm pixel pitch and the observer distance
    /// that yields exactly `ppd` pixels per degree.
    pub fn with_ppd(ppd: u32, width: usize, height: usize) -> Result<Self> {
        if ppd == 0 {
            return Err(Error::domain("ppd must be at least 1"));
        }
        let pitch = 0.0293;
        let distance = (ppd as f64 + 0.5) * pitch / 1f64.to_radians().tan();
        let field = Self::new(distance, pitch, width, height)?;
        debug_assert_eq!(field.ppd, ppd);
        Ok(field)
    }

    /// Convert degrees of visual angle to pixels.
    pub fn dva_to_px(&self, dva: f64) -> f64 {
        dva * self.ppd as f64
    }

    pub fn px_to_dva(&self, px: f64) -> f64 {
        px / self.ppd as f64
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    /// The default action grid: one cell per 64×64 field pixels.
    pub fn action_grid(&self) -> Result<ActionGrid> {
        ActionGrid::for_field(self, ACTION_CELL_PX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixationPoint {
    pub x: f64,
    pub y: f64,
    /// 0 is the initial fixation.
    pub index: usize,
}

impl FixationPoint {
    pub fn new(x: f64, y: f64, index: usize) -> Self {
        FixationPoint { x, y, index }
    }

    pub fn distance(&self, other: &FixationPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn check_in(&self, field: &FieldGeometry) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() || !field.contains(self.x, self.y) {
            return Err(Error::domain(format!(
                "fixation ({}, {}) lies outside the {}×{} field",
                self.x, self.y, field.width, field.height
            )));
        }
        Ok(())
    }
}

/// Eccentricity in degrees of visual angle for every field pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct EccentricityMap {
    pub width: usize,
    pub height: usize,
    pub theta: Vec<f64>,
}

impl EccentricityMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.theta[y * self.width + x]
    }
}

pub fn eccentricity_map(field: &FieldGeometry, fixation: &FixationPoint) -> Result<EccentricityMap> {
    fixation.check_in(field)?;
    let ppd = field.ppd as f64;
    let mut theta = Vec::with_capacity(field.width * field.height);
    for y in 0..field.height {
        let dy = y as f64 - fixation.y;
        for x in 0..field.width {
            let dx = x as f64 - fixation.x;
            theta.push(dx.hypot(dy) / ppd);
        }
    }
    Ok(EccentricityMap {
        width: field.width,
        height: field.height,
        theta,
    })
}

/// Where an image sits inside the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub offset_x: usize,
    pub offset_y: usize,
    pub image_width: usize,
    pub image_height: usize,
}

impl Placement {
    /// An image that exactly fills `field`.
    pub fn full(field: &FieldGeometry) -> Self {
        Placement {
            offset_x: 0,
            offset_y: 0,
            image_width: field.width,
            image_height: field.height,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.offset_x as f64
            && y >= self.offset_y as f64
            && x < (self.offset_x + self.image_width) as f64
            && y < (self.offset_y + self.image_height) as f64
    }

    pub fn fits(&self, field: &FieldGeometry) -> bool {
        self.offset_x + self.image_width <= field.width
            && self.offset_y + self.image_height <= field.height
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.offset_x as f64 + self.image_width as f64 / 2.0,
            self.offset_y as f64 + self.image_height as f64 / 2.0,
        )
    }

    pub fn area(&self) -> usize {
        self.image_width * self.image_height
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Scale uniformly to the field width, preserving aspect ratio.
    #[default]
    FitWidth,
    /// Keep the native resolution.
    AsIs,
}

/// Centre an image of the given size in the field.
pub fn embed_in_field(
    image_w: usize,
    image_h: usize,
    field: &FieldGeometry,
    mode: ScaleMode,
) -> Result<Placement> {
    if image_w == 0 || image_h == 0 {
        return Err(Error::domain("image has zero area"));
    }
    let (w, h) = match mode {
        ScaleMode::FitWidth => {
            let h = (image_h as f64 * field.width as f64 / image_w as f64).round() as usize;
            (field.width, h.max(1))
        }
        ScaleMode::AsIs => (image_w, image_h),
    };
    if w > field.width || h > field.height {
        return Err(Error::domain(format!(
            "{w}×{h} image does not fit in the {}×{} field",
            field.width, field.height
        )));
    }
    Ok(Placement {
        offset_x: (field.width - w) / 2,
        offset_y: (field.height - h) / 2,
        image_width: w,
        image_height: h,
    })
}

/// The discrete action space: a grid of square cells over the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub cols: usize,
    pub rows: usize,
    /// Cell side in field pixels.
    pub cell: usize,
}

impl ActionGrid {
    pub fn for_field(field: &FieldGeometry, cell: usize) -> Result<Self> {
        if cell == 0 || field.width % cell != 0 || field.height % cell != 0 {
            return Err(Error::domain(format!(
                "{}×{} field is not divisible into {cell}-px cells",
                field.width, field.height
            )));
        }
        Ok(ActionGrid {
            cols: field.width / cell,
            rows: field.height / cell,
            cell,
        })
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Field coordinates of the centre of cell `index` (row-major).
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (col, row) = (index % self.cols, index / self.cols);
        let half = self.cell as f64 / 2.0;
        (
            (col * self.cell) as f64 + half,
            (row * self.cell) as f64 + half,
        )
    }

    /// Row-major index of the cell containing a field point.
    pub fn cell_of(&self, x: f64, y: f64) -> usize {
        let col = ((x / self.cell as f64).floor().max(0.0) as usize).min(self.cols - 1);
        let row = ((y / self.cell as f64).floor().max(0.0) as usize).min(self.rows - 1);
        row * self.cols + col
    }

    pub fn fixation(&self, index: usize, ordinal: usize) -> FixationPoint {
        let (x, y) = self.cell_center(index);
        FixationPoint::new(x, y, ordinal)
    }
}
