//! Gaze-contingent multiresolution foveation.
//!
//! Resolution values are relative: `r = 1` is the bandwidth of the original
//! image (pyramid level 0) and level `i` carries half-max bandwidth `2^-i`.
//! The transfer functions are evaluated on the absolute frequency axis, where
//! the level-0 bandwidth is `8·√ln2·σ`.

mod pyramid;
mod reference;

pub use pyramid::{reduce, GaussianPyramid};
pub use reference::{reference_blur, reference_sigma};

use serde::{Deserialize, Serialize};

use crate::geometry::{EccentricityMap, FieldGeometry, FixationPoint, Placement};
use crate::image::{Image, Plane};
use crate::{par, Error, Result};

/// Frequency-domain standard deviation of level 0, cycles per pixel.
pub const SIGMA: f64 = 0.248;
pub const DEFAULT_DEPTH: usize = 10;
/// Resolution falloff matched to human foveation at 44 px/deg.
pub const DEFAULT_ALPHA: f64 = 0.63;

/// Absolute half-max bandwidth of level 0.
pub fn level0_bandwidth() -> f64 {
    8.0 * std::f64::consts::LN_2.sqrt() * SIGMA
}

/// `r = α / (α + θ)`.
#[inline]
pub fn resolution_value(alpha: f64, theta: f64) -> f64 {
    alpha / (alpha + theta)
}

/// Anything that yields a relative resolution at field pixel `(x, y)`.
pub trait ResolutionField {
    fn r_at(&self, x: usize, y: usize) -> f64;
}

/// Dense resolution map over a field.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionMap {
    pub width: usize,
    pub height: usize,
    pub alpha: f64,
    pub r: Vec<f64>,
}

impl ResolutionField for ResolutionMap {
    #[inline]
    fn r_at(&self, x: usize, y: usize) -> f64 {
        self.r[y * self.width + x]
    }
}

/// No foveation: `r ≡ 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unfoveated;

impl ResolutionField for Unfoveated {
    fn r_at(&self, _: usize, _: usize) -> f64 {
        1.0
    }
}

/// Resolution computed on demand from a fixation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeResolution {
    pub fixations: Vec<FixationPoint>,
    pub alpha: f64,
    pub ppd: f64,
}

impl GazeResolution {
    pub fn new(fixations: Vec<FixationPoint>, alpha: f64, ppd: u32) -> Result<Self> {
        if fixations.is_empty() {
            return Err(Error::domain("at least one fixation is required"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(GazeResolution {
            fixations,
            alpha,
            ppd: ppd as f64,
        })
    }

    /// Squared pixel distance to the nearest fixation.
    #[inline]
    pub fn nearest_d2(&self, x: f64, y: f64) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.fixations {
            let (dx, dy) = (x - f.x, y - f.y);
            best = best.min(dx * dx + dy * dy);
        }
        best
    }

    #[inline]
    pub fn r_at_point(&self, x: f64, y: f64) -> f64 {
        resolution_value(self.alpha, self.nearest_d2(x, y).sqrt() / self.ppd)
    }

    pub fn dense(&self, width: usize, height: usize) -> ResolutionMap {
        let r = (0..width * height)
            .map(|i| self.r_at((i % width) as usize, i / width))
            .collect();
        ResolutionMap {
            width,
            height,
            alpha: self.alpha,
            r,
        }
    }

    pub fn with_fixation(&self, f: FixationPoint) -> Self {
        let mut next = self.clone();
        next.fixations.push(f);
        next
    }
}

impl ResolutionField for GazeResolution {
    #[inline]
    fn r_at(&self, x: usize, y: usize) -> f64 {
        self.r_at_point(x as f64, y as f64)
    }
}

/// Combine eccentricity maps by their element-wise minimum and map to `r`.
pub fn resolution_map(maps: &[EccentricityMap], alpha: f64) -> Result<ResolutionMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::domain("at least one eccentricity map is required"))?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if maps
        .iter()
        .any(|m| m.width != first.width || m.height != first.height)
    {
        return Err(Error::shape("eccentricity maps differ in size"));
    }
    let mut theta = first.theta.clone();
    for m in &maps[1..] {
        for (t, &o) in theta.iter_mut().zip(&m.theta) {
            *t = t.min(o);
        }
    }
    Ok(ResolutionMap {
        width: first.width,
        height: first.height,
        alpha,
        r: theta.into_iter().map(|t| resolution_value(alpha, t)).collect(),
    })
}

/// Transfer function of pyramid level `level` at absolute frequency `f`;
/// zero for the sentinel level past the default depth.
pub fn transfer_value(level: usize, f: f64) -> f64 {
    transfer_at_depth(level, f, DEFAULT_DEPTH)
}

fn transfer_at_depth(level: usize, f: f64, depth: usize) -> f64 {
    if level > depth {
        return 0.0;
    }
    let s = SIGMA / (1u64 << level) as f64;
    let z = (f / 4.0) / s;
    (-z * z).exp()
}

/// Relative half-max bandwidth of level `level`.
pub fn half_max_bandwidth(level: usize) -> f64 {
    0.5f64.powi(level as i32)
}

/// Weight given to level `level - 1` when blending with level `level`.
pub fn blend_weight(r: f64, level: usize) -> f64 {
    assert!(level >= 1, "blend level must be at least 1");
    let lo = half_max_bandwidth(level);
    let hi = half_max_bandwidth(level - 1);
    if r <= lo {
        return 0.0;
    }
    if r >= hi {
        return 1.0;
    }
    let f = r * level0_bandwidth() / 2.0;
    let t_fine = transfer_at_depth(level - 1, f, usize::MAX);
    let t_coarse = transfer_at_depth(level, f, usize::MAX);
    ((0.5 - t_coarse) / (t_fine - t_coarse)).clamp(0.0, 1.0)
}

/// `(fine level, coarse level, weight on fine)` for resolution `r`.
#[inline]
pub fn level_blend(r: f64, depth: usize) -> (usize, usize, f32) {
    if r >= 1.0 {
        return (0, 0, 1.0);
    }
    let i = (-r.log2()).floor() as usize + 1;
    if i > depth {
        return (depth, depth, 1.0);
    }
    (i - 1, i, blend_weight(r, i) as f32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoveationConfig {
    /// Degrees of visual angle.
    pub alpha: f64,
    pub depth: usize,
    /// Filter the whole field (image pasted on `background`) instead of
    /// confining the pyramid to the image rectangle.
    pub blur_into_field: bool,
    pub background: f32,
}

impl Default for FoveationConfig {
    fn default() -> Self {
        FoveationConfig {
            alpha: DEFAULT_ALPHA,
            depth: DEFAULT_DEPTH,
            blur_into_field: false,
            background: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoveatedImage {
    pub image: Image,
    pub resolution: GazeResolution,
    pub placement: Placement,
}

impl FoveatedImage {
    /// Dense resolution map over the image rectangle.
    pub fn resolution_map(&self) -> ResolutionMap {
        let p = self.placement;
        let mut map = ResolutionMap {
            width: p.image_width,
            height: p.image_height,
            alpha: self.resolution.alpha,
            r: Vec::with_capacity(p.area()),
        };
        for y in 0..p.image_height {
            for x in 0..p.image_width {
                map.r.push(self.resolution.r_at(x + p.offset_x, y + p.offset_y));
            }
        }
        map
    }
}

pub fn foveate(
    image: &Image,
    placement: &Placement,
    fixations: &[FixationPoint],
    alpha: f64,
    field: &FieldGeometry,
) -> Result<FoveatedImage> {
    let cfg = FoveationConfig {
        alpha,
        ..FoveationConfig::default()
    };
    foveate_with(image, placement, fixations, field, &cfg)
}

pub fn foveate_with(
    image: &Image,
    placement: &Placement,
    fixations: &[FixationPoint],
    field: &FieldGeometry,
    cfg: &FoveationConfig,
) -> Result<FoveatedImage> {
    if image.width() != placement.image_width || image.height() != placement.image_height {
        return Err(Error::shape(format!(
            "image is {}×{} but placement expects {}×{}",
            image.width(),
            image.height(),
            placement.image_width,
            placement.image_height
        )));
    }
    if !placement.fits(field) {
        return Err(Error::domain("placement exceeds the field"));
    }
    if cfg.depth == 0 {
        return Err(Error::domain("pyramid depth must be at least 1"));
    }
    for f in fixations {
        f.check_in(field)?;
    }
    let gaze = GazeResolution::new(fixations.to_vec(), cfg.alpha, field.ppd)?;

    let channels = if cfg.blur_into_field {
        let canvases = image
            .channels
            .iter()
            .map(|p| {
                p.embed(
                    field.width,
                    field.height,
                    placement.offset_x,
                    placement.offset_y,
                    cfg.background,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Plane> = canvases.iter().collect();
        foveate_planes(&refs, (0, 0), &gaze, cfg.depth)?
            .into_iter()
            .map(|p| {
                p.crop(
                    placement.offset_x,
                    placement.offset_y,
                    placement.image_width,
                    placement.image_height,
                )
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let refs: Vec<&Plane> = image.channels.iter().collect();
        foveate_planes(&refs, (placement.offset_x, placement.offset_y), &gaze, cfg.depth)?
    };
    Ok(FoveatedImage {
        image: Image {
            channels,
            alpha: image.alpha.clone(),
            bit_depth: image.bit_depth,
        },
        resolution: gaze,
        placement: *placement,
    })
}

/// Level selection from pixel distance. With `q = 1 + θ/α = 1/r`, the
/// level coordinate is `log2 q`: its integer part (the float exponent of `q`)
/// is the finer level and the weight depends only on the mantissa.
struct LevelTable {
    inv_scale: f32,
    /// Weight on the finer level at mantissa `1 + k/2^MANTISSA_BITS`.
    weight: Vec<f32>,
}

const MANTISSA_BITS: u32 = 11;

impl LevelTable {
    fn new(alpha: f64, ppd: f64) -> Self {
        let n = 1usize << MANTISSA_BITS;
        let weight = (0..=n)
            .map(|k| {
                let m = 1.0 + k as f64 / n as f64;
                // Bracket between levels 1 and 2 stands in for all of them.
                blend_weight(0.5 / m, 2) as f32
            })
            .collect();
        LevelTable {
            inv_scale: (1.0 / (alpha * ppd)) as f32,
            weight,
        }
    }

    /// `(fine level, coarse level, weight on fine)` at pixel distance `d > 0`.
    #[inline]
    fn lookup(&self, d: f32, depth: usize) -> (usize, usize, f32) {
        let q = 1.0 + d * self.inv_scale;
        let bits = q.to_bits();
        let fine = ((bits >> 23) as usize).wrapping_sub(127);
        if fine >= depth {
            return (depth, depth, 1.0);
        }
        let low = 23 - MANTISSA_BITS;
        let j = ((bits >> low) & ((1 << MANTISSA_BITS) - 1)) as usize;
        let t = (bits & ((1 << low) - 1)) as f32 * (1.0 / (1u32 << low) as f32);
        let w0 = self.weight[j];
        let b = w0 + (self.weight[j + 1] - w0) * t;
        (fine, fine + 1, b)
    }
}

/// Foveate same-sized planes sharing one resolution field. `origin` is the
/// planes' offset in field coordinates.
pub fn foveate_planes(
    planes: &[&Plane],
    origin: (usize, usize),
    gaze: &GazeResolution,
    depth: usize,
) -> Result<Vec<Plane>> {
    let first = planes
        .first()
        .ok_or_else(|| Error::domain("no channels to foveate"))?;
    let (w, h) = (first.width, first.height);
    if planes.iter().any(|p| p.width != w || p.height != h) {
        return Err(Error::shape("channels differ in size"));
    }
    let pyramids = planes
        .iter()
        .map(|p| GaussianPyramid::build(p, depth))
        .collect::<Result<Vec<_>>>()?;
    let table = LevelTable::new(gaze.alpha, gaze.ppd);
    let nc = planes.len();
    let stride = w * nc;
    let mut out = vec![0f32; stride * h];
    par::for_each_row(&mut out, stride, |y, row| {
        // Reduced levels interpolated vertically to this row.
        let rows: Vec<Vec<Vec<f32>>> = pyramids.iter().map(|p| p.rows_at(y)).collect();
        let fy = (y + origin.1) as f64;
        for x in 0..w {
            let d2 = gaze.nearest_d2((x + origin.0) as f64, fy);
            if d2 == 0.0 {
                for (c, pyr) in pyramids.iter().enumerate() {
                    row[c * w + x] = pyr.levels[0].get(x, y);
                }
                continue;
            }
            let (fine, coarse, b) = table.lookup(d2.sqrt() as f32, depth);
            for (c, pyr) in pyramids.iter().enumerate() {
                let at = |level: usize| {
                    if level == 0 {
                        pyr.levels[0].get(x, y)
                    } else {
                        let t = pyr.xtaps[level][x];
                        let r = &rows[c][level];
                        r[t.i0 as usize] + (r[t.i1 as usize] - r[t.i0 as usize]) * t.w1
                    }
                };
                row[c * w + x] = if b >= 1.0 {
                    at(fine)
                } else if b <= 0.0 {
                    at(coarse)
                } else {
                    let a = at(fine);
                    b * a + (1.0 - b) * at(coarse)
                };
            }
        }
    });
    if nc == 1 {
        return Ok(vec![Plane {
            width: w,
            height: h,
            data: out,
        }]);
    }
    Ok((0..nc)
        .map(|c| Plane {
            width: w,
            height: h,
            data: out
                .chunks_exact(stride)
                .flat_map(|row| row[c * w..(c + 1) * w].iter().copied())
                .collect(),
        })
        .collect())
}

/// Foveate an interleaved 8-bit buffer (`channels` = 1, 3 or 4) with
/// fixations given in its own pixel coordinates. The image is its own
/// field; the result equals what the command-line tool writes for the
/// same inputs.
pub fn foveate_u8(
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    fixations: &[(f64, f64)],
    alpha: f64,
    ppd: u32,
) -> Result<Vec<u8>> {
    if !(1..=4).contains(&channels) || data.len() != width * height * channels {
        return Err(Error::shape(format!(
            "buffer of {} bytes is not {width}×{height}×{channels}",
            data.len()
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::domain("image has zero area"));
    }
    let mut planes: Vec<Plane> = (0..channels)
        .map(|c| Plane {
            width,
            height,
            data: data.iter().skip(c).step_by(channels).map(|&v| v as f32).collect(),
        })
        .collect();
    let alpha_plane = if channels == 2 || channels == 4 {
        planes.pop()
    } else {
        None
    };
    let image = Image {
        channels: planes,
        alpha: alpha_plane,
        bit_depth: 8,
    };
    let out = foveate_image(&image, fixations, alpha, ppd)?;
    let dynamic = out.to_dynamic()?;
    Ok(dynamic.into_bytes())
}

/// Foveate an image that is its own field, fixations in image pixels.
pub fn foveate_image(image: &Image, fixations: &[(f64, f64)], alpha: f64, ppd: u32) -> Result<Image> {
    let field = FieldGeometry::with_ppd(ppd, image.width(), image.height())?;
    let points: Vec<FixationPoint> = fixations
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| FixationPoint::new(x, y, i))
        .collect();
    let placement = Placement::full(&field);
    Ok(foveate(image, &placement, &points, alpha, &field)?.image)
}
