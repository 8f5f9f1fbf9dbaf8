//! Planar floating-point images and PNG / PNM I/O.
//!
//! Samples are kept on their native integer scale (0..=255 or 0..=65535) so
//! a load → save round trip without processing is lossless.

use std::path::Path;

use ::image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::{Error, Result};

/// One channel, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape("plane must be non-empty"));
        }
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{} samples for a {width}×{height} plane",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Copy out the rectangle at `(x0, y0)` of size `w × h`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Plane> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(Error::shape(format!(
                "crop {w}×{h}+{x0}+{y0} outside {}×{} plane",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Ok(Plane {
            width: w,
            height: h,
            data,
        })
    }

    /// Paste `self` into a `width × height` canvas filled with `background`.
    pub fn embed(&self, width: usize, height: usize, x0: usize, y0: usize, background: f32) -> Result<Plane> {
        if x0 + self.width > width || y0 + self.height > height {
            return Err(Error::shape("embedded plane exceeds canvas"));
        }
        let mut out = Plane::filled(width, height, background);
        for y in 0..self.height {
            let dst = (y0 + y) * width + x0;
            out.data[dst..dst + self.width].copy_from_slice(self.row(y));
        }
        Ok(out)
    }

    pub fn mean_abs_diff(&self, other: &Plane) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape("planes differ in size"));
        }
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        Ok(sum / self.data.len() as f64)
    }
}

/// A grayscale or RGB image with optional untouched alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub channels: Vec<Plane>,
    pub alpha: Option<Plane>,
    /// 8 or 16.
    pub bit_depth: u8,
}

impl Image {
    pub fn gray(plane: Plane) -> Self {
        Image {
            channels: vec![plane],
            alpha: None,
            bit_depth: 8,
        }
    }

    pub fn rgb(r: Plane, g: Plane, b: Plane) -> Result<Self> {
        if r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height {
            return Err(Error::shape("RGB planes differ in size"));
        }
        Ok(Image {
            channels: vec![r, g, b],
            alpha: None,
            bit_depth: 8,
        })
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    pub fn max_value(&self) -> f32 {
        if self.bit_depth == 16 {
            65535.0
        } else {
            255.0
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = ::image::open(path.as_ref())?;
        Ok(Self::from_dynamic(img))
    }

    pub fn from_dynamic(img: DynamicImage) -> Self {
        use DynamicImage::*;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let planes = |raw: Vec<f32>, n: usize| -> Vec<Plane> {
            (0..n)
                .map(|c| Plane {
                    width: w,
                    height: h,
                    data: raw.iter().skip(c).step_by(n).copied().collect(),
                })
                .collect()
        };
        let (raw, n, has_alpha, depth): (Vec<f32>, usize, bool, u8) = match img {
            ImageLuma8(b) => (b.into_raw().into_iter().map(f32::from).collect(), 1, false, 8),
            ImageLumaA8(b) => (b.into_raw().into_iter().map(f32::from).collect(), 2, true, 8),
            ImageRgb8(b) => (b.into_raw().into_iter().map(f32::from).collect(), 3, false, 8),
            ImageRgba8(b) => (b.into_raw().into_iter().map(f32::from).collect(), 4, true, 8),
            ImageLuma16(b) => (b.into_raw().into_iter().map(f32::from).collect(), 1, false, 16),
            ImageLumaA16(b) => (b.into_raw().into_iter().map(f32::from).collect(), 2, true, 16),
            ImageRgb16(b) => (b.into_raw().into_iter().map(f32::from).collect(), 3, false, 16),
            ImageRgba16(b) => (b.into_raw().into_iter().map(f32::from).collect(), 4, true, 16),
            other => {
                let b = other.into_rgb16();
                (b.into_raw().into_iter().map(f32::from).collect(), 3, false, 16)
            }
        };
        let mut channels = planes(raw, n);
        let alpha = if has_alpha { channels.pop() } else { None };
        Image {
            channels,
            alpha,
            bit_depth: depth,
        }
    }

    /// Quantize back to the stored bit depth.
    pub fn to_dynamic(&self) -> Result<DynamicImage> {
        let (w, h) = (self.width() as u32, self.height() as u32);
        let mut planes: Vec<&Plane> = self.channels.iter().collect();
        if let Some(a) = &self.alpha {
            planes.push(a);
        }
        let n = planes.len();
        let max = self.max_value();
        let mut interleaved = Vec::with_capacity(planes[0].len() * n);
        for i in 0..planes[0].len() {
            for p in &planes {
                interleaved.push(p.data[i].round().clamp(0.0, max));
            }
        }
        let bad = || Error::shape("image buffer size mismatch");
        let img = match (self.bit_depth, n) {
            (16, _) => {
                let raw: Vec<u16> = interleaved.iter().map(|&v| v as u16).collect();
                match n {
                    1 => DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?),
                    2 => DynamicImage::ImageLumaA16(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    3 => DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).ok_or_else(bad)?),
                    4 => DynamicImage::ImageRgba16(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    _ => return Err(Error::shape(format!("{n} channels"))),
                }
            }
            _ => {
                let raw: Vec<u8> = interleaved.iter().map(|&v| v as u8).collect();
                match n {
                    1 => DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    2 => DynamicImage::ImageLumaA8(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    3 => DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    4 => DynamicImage::ImageRgba8(ImageBuffer::from_raw(w, h, raw).ok_or_else(bad)?),
                    _ => return Err(Error::shape(format!("{n} channels"))),
                }
            }
        };
        Ok(img)
    }

    /// Format follows the extension: `.png`, `.pgm`, `.ppm`, `.pnm`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let format = match ext.as_str() {
            "png" => ImageFormat::Png,
            "pgm" | "ppm" | "pnm" | "pbm" => ImageFormat::Pnm,
            _ => {
                return Err(Error::Data(format!(
                    "unsupported output extension {:?}; use .png, .pgm or .ppm",
                    path.display()
                )))
            }
        };
        let mut img = self.to_dynamic()?;
        if format == ImageFormat::Pnm && self.alpha.is_some() {
            // PNM has no alpha channel.
            img = if self.channels.len() == 1 {
                if self.bit_depth == 16 {
                    DynamicImage::ImageLuma16(img.into_luma16())
                } else {
                    DynamicImage::ImageLuma8(img.into_luma8())
                }
            } else if self.bit_depth == 16 {
                DynamicImage::ImageRgb16(img.into_rgb16())
            } else {
                DynamicImage::ImageRgb8(img.into_rgb8())
            };
        }
        img.save_with_format(path, format)?;
        Ok(())
    }

    /// Grayscale plane of a priority map or mask image, scaled to [0, 1].
    pub fn luminance(&self) -> Plane {
        let max = self.max_value();
        if self.channels.len() == 1 {
            let p = &self.channels[0];
            return Plane {
                width: p.width,
                height: p.height,
                data: p.data.iter().map(|v| v / max).collect(),
            };
        }
        let (r, g, b) = (&self.channels[0], &self.channels[1], &self.channels[2]);
        Plane {
            width: r.width,
            height: r.height,
            data: (0..r.len())
                .map(|i| (0.299 * r.data[i] + 0.587 * g.data[i] + 0.114 * b.data[i]) / max)
                .collect(),
        }
    }
}

/// Deterministic synthetic test imagery on the 0..=255 scale.
pub mod synth {
    use super::Plane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Natural-image stand-in: random-phase sinusoids with log-uniform
    /// frequencies and equal amplitudes, giving a 1/f² power spectrum.
    pub fn pink_noise(w: usize, h: usize, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fmin = 1.0 / (2.0 * w.max(h) as f64);
        let fmax = 0.5;
        let waves: Vec<(f64, f64, f64)> = (0..256)
            .map(|_| {
                let f = fmin * (fmax / fmin).powf(rng.random::<f64>());
                let theta = rng.random::<f64>() * PI;
                let phase = rng.random::<f64>() * 2.0 * PI;
                (2.0 * PI * f * theta.cos(), 2.0 * PI * f * theta.sin(), phase)
            })
            .collect();
        let raw = Plane::from_fn(w, h, |x, y| {
            waves
                .iter()
                .map(|(kx, ky, p)| (kx * x as f64 + ky * y as f64 + p).sin())
                .sum::<f64>() as f32
        });
        stretch(raw)
    }

    pub fn checkerboard(w: usize, h: usize, square: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| if (x / square + y / square) % 2 == 0 { 255.0 } else { 0.0 })
    }

    /// Sinusoidal grating along x, `freq` in cycles per pixel.
    pub fn grating(w: usize, h: usize, freq: f64) -> Plane {
        Plane::from_fn(w, h, |x, _| (127.5 + 127.5 * (2.0 * PI * freq * x as f64).sin()) as f32)
    }

    /// Bright discs of assorted radii on a dark background.
    pub fn discs(w: usize, h: usize, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let discs: Vec<(f64, f64, f64)> = (0..12)
            .map(|_| {
                (
                    rng.random_range(0.0..w as f64),
                    rng.random_range(0.0..h as f64),
                    rng.random_range(2.0..w.min(h) as f64 / 6.0),
                )
            })
            .collect();
        Plane::from_fn(w, h, |x, y| {
            let inside = discs
                .iter()
                .any(|(cx, cy, r)| (x as f64 - cx).hypot(y as f64 - cy) <= *r);
            if inside { 230.0 } else { 20.0 }
        })
    }

    /// Isolated bright pixels on a regular lattice.
    pub fn impulses(w: usize, h: usize, spacing: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            if x % spacing == spacing / 2 && y % spacing == spacing / 2 { 255.0 } else { 0.0 }
        })
    }

    /// Linearly map the plane onto 0..=255.
    pub fn stretch(mut p: Plane) -> Plane {
        let (lo, hi) = p.min_max();
        let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
        for v in &mut p.data {
            *v = (*v - lo) * scale;
        }
        p
    }
}
