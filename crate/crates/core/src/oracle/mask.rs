//! Region shapes and their pixel rasters.
//!
//! A pixel belongs to a shape when its centre does.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Mask {
    /// Pixels with `x ≤ i < x + width`, `y ≤ j < y + height`.
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    /// Closed polygon, even-odd rule.
    Polygon { points: Vec<[f64; 2]> },
    /// Run lengths over the `width × height` box at `(x0, y0)`, row-major,
    /// alternating off/on and starting with off.
    Rle {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
        counts: Vec<u32>,
    },
}

/// One row run `[x0, x1)` on row `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

/// A rasterized mask as sorted row spans.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RasterMask {
    pub spans: Vec<Span>,
    pub area: usize,
}

impl RasterMask {
    pub fn from_spans(mut spans: Vec<Span>) -> Self {
        spans.retain(|s| s.x1 > s.x0);
        spans.sort_by_key(|s| (s.y, s.x0));
        let area = spans.iter().map(|s| (s.x1 - s.x0) as usize).sum();
        RasterMask { spans, area }
    }

    pub fn is_empty(&self) -> bool {
        self.area == 0
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.spans
            .iter()
            .flat_map(|s| (s.x0..s.x1).map(move |x| (x as usize, s.y as usize)))
    }

    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        let (x, y) = (x as u32, y as u32);
        let start = self.spans.partition_point(|s| s.y < y);
        self.spans[start..]
            .iter()
            .take_while(|s| s.y == y)
            .any(|s| x >= s.x0 && x < s.x1)
    }

    /// Euclidean distance from a point to the nearest mask pixel centre.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.spans {
            let dy = y - s.y as f64;
            if dy.abs() >= best {
                continue;
            }
            let cx = x.round().clamp(s.x0 as f64, (s.x1 - 1) as f64);
            best = best.min((x - cx).hypot(dy));
        }
        best
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        if self.area == 0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for s in &self.spans {
            let n = (s.x1 - s.x0) as f64;
            sx += (s.x0 + s.x1 - 1) as f64 * 0.5 * n;
            sy += s.y as f64 * n;
        }
        Some((sx / self.area as f64, sy / self.area as f64))
    }

    /// Pixels shared with another mask.
    pub fn overlap(&self, other: &RasterMask) -> usize {
        let mut total = 0;
        let mut j = 0;
        for a in &self.spans {
            while j < other.spans.len() && other.spans[j].y < a.y {
                j += 1;
            }
            let mut k = j;
            while k < other.spans.len() && other.spans[k].y == a.y {
                let b = other.spans[k];
                let lo = a.x0.max(b.x0);
                let hi = a.x1.min(b.x1);
                if hi > lo {
                    total += (hi - lo) as usize;
                }
                k += 1;
            }
        }
        total
    }

    /// Bounding box `(x0, y0, x1, y1)`, exclusive upper corner.
    pub fn bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let first = self.spans.first()?;
        let last = self.spans.last()?;
        let x0 = self.spans.iter().map(|s| s.x0).min()?;
        let x1 = self.spans.iter().map(|s| s.x1).max()?;
        Some((x0 as usize, first.y as usize, x1 as usize, last.y as usize + 1))
    }
}

impl Mask {
    /// Rasterize, clipped to `[0, width) × [0, height)`.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<RasterMask> {
        let clip_x = |a: f64| a.clamp(0.0, width as f64) as u32;
        let mut spans = Vec::new();
        match self {
            Mask::Rect {
                x,
                y,
                width: w,
                height: h,
            } => {
                if !(*w >= 0.0 && *h >= 0.0) {
                    return Err(Error::domain("rectangle with negative size"));
                }
                // Pixel centre i satisfies x ≤ i < x + w.
                let (x0, x1) = (clip_x(x.ceil()), clip_x((x + w).ceil()));
                let (y0, y1) = (y.ceil().max(0.0) as usize, ((y + h).ceil().max(0.0) as usize).min(height));
                for row in y0..y1 {
                    spans.push(Span {
                        y: row as u32,
                        x0,
                        x1,
                    });
                }
            }
            Mask::Ellipse { cx, cy, rx, ry } => {
                if !(*rx > 0.0 && *ry > 0.0) {
                    return Err(Error::domain("ellipse radii must be positive"));
                }
                let y0 = (cy - ry).ceil().max(0.0) as usize;
                let y1 = ((cy + ry).floor() + 1.0).clamp(0.0, height as f64) as usize;
                for row in y0..y1 {
                    let t = (row as f64 - cy) / ry;
                    let q = 1.0 - t * t;
                    if q < 0.0 {
                        continue;
                    }
                    let half = rx * q.sqrt();
                    let a = clip_x((cx - half).ceil());
                    let b = clip_x((cx + half).floor() + 1.0);
                    spans.push(Span { y: row as u32, x0: a, x1: b });
                }
            }
            Mask::Polygon { points } => {
                if points.len() < 3 {
                    return Err(Error::domain("polygon needs at least three points"));
                }
                let ymin = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                let ymax = points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
                let y0 = ymin.ceil().max(0.0) as usize;
                let y1 = (ymax.floor() + 1.0).clamp(0.0, height as f64) as usize;
                for row in y0..y1 {
                    let yc = row as f64;
                    let mut xs = Vec::new();
                    for i in 0..points.len() {
                        let a = points[i];
                        let b = points[(i + 1) % points.len()];
                        if (a[1] <= yc) != (b[1] <= yc) {
                            xs.push(a[0] + (yc - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
                        }
                    }
                    xs.sort_by(f64::total_cmp);
                    for pair in xs.chunks_exact(2) {
                        let a = clip_x(pair[0].ceil());
                        let b = clip_x(pair[1].ceil());
                        spans.push(Span { y: row as u32, x0: a, x1: b });
                    }
                }
            }
            Mask::Rle {
                x0,
                y0,
                width: bw,
                height: bh,
                counts,
            } => {
                let total: u64 = counts.iter().map(|&c| c as u64).sum();
                if total != (*bw * *bh) as u64 {
                    return Err(Error::Data(format!(
                        "run lengths sum to {total}, box has {} pixels",
                        bw * bh
                    )));
                }
                let mut pos = 0usize;
                for (i, &c) in counts.iter().enumerate() {
                    let c = c as usize;
                    if i % 2 == 1 {
                        let mut p = pos;
                        while p < pos + c {
                            let row = p / bw;
                            let col = p % bw;
                            let end = (pos + c).min((row + 1) * bw);
                            let (ya, xa, xb) = (y0 + row, x0 + col, x0 + col + (end - p));
                            if ya < height {
                                spans.push(Span {
                                    y: ya as u32,
                                    x0: xa.min(width) as u32,
                                    x1: xb.min(width) as u32,
                                });
                            }
                            p = end;
                        }
                    }
                    pos += c;
                }
            }
        }
        Ok(RasterMask::from_spans(merge_rows(spans)))
    }

    /// Run-length encode a raster within its bounding box.
    pub fn rle_from_raster(raster: &RasterMask) -> Option<Mask> {
        let (x0, y0, x1, y1) = raster.bounds()?;
        let (w, h) = (x1 - x0, y1 - y0);
        let mut bits = vec![false; w * h];
        for (x, y) in raster.pixels() {
            bits[(y - y0) * w + (x - x0)] = true;
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for b in bits {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        Some(Mask::Rle {
            x0,
            y0,
            width: w,
            height: h,
            counts,
        })
    }
}

/// Merge touching spans on the same row.
fn merge_rows(mut spans: Vec<Span>) -> Vec<Span> {
    spans.retain(|s| s.x1 > s.x0);
    spans.sort_by_key(|s| (s.y, s.x0));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if last.y == s.y && s.x0 <= last.x1 => last.x1 = last.x1.max(s.x1),
            _ => out.push(s),
        }
    }
    out
}
