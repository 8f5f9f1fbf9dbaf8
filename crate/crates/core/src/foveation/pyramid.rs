use crate::image::Plane;
use crate::{Error, Result};

const BINOMIAL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Blur with the 5-tap binomial kernel and keep every second sample
/// (ceil on odd sizes). Edges replicate.
pub fn reduce(src: &Plane) -> Plane {
    let (w, h) = (src.width, src.height);
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    // Horizontal pass at the decimated columns only.
    let mut tmp = vec![0f32; ow * h];
    for y in 0..h {
        let row = src.row(y);
        let out = &mut tmp[y * ow..(y + 1) * ow];
        for (j, o) in out.iter_mut().enumerate() {
            let c = 2 * j as isize;
            let mut acc = 0.0;
            for (t, k) in BINOMIAL.iter().enumerate() {
                acc += k * row[clamp(c + t as isize - 2, w)];
            }
            *o = acc;
        }
    }
    // Vertical pass at the decimated rows.
    let mut data = vec![0f32; ow * oh];
    for j in 0..oh {
        let c = 2 * j as isize;
        let out = &mut data[j * ow..(j + 1) * ow];
        for (t, k) in BINOMIAL.iter().enumerate() {
            let y = clamp(c + t as isize - 2, h);
            let row = &tmp[y * ow..(y + 1) * ow];
            for (o, v) in out.iter_mut().zip(row) {
                *o += k * v;
            }
        }
    }
    Plane {
        width: ow,
        height: oh,
        data,
    }
}

/// Bilinear tap into a reduced level: reduced sample `j` sits at full
/// coordinate `j · 2^level`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Tap {
    pub i0: u32,
    pub i1: u32,
    pub w1: f32,
}

fn taps(full: usize, reduced: usize, level: usize) -> Vec<Tap> {
    let scale = (1u64 << level) as f64;
    (0..full)
        .map(|x| {
            let u = x as f64 / scale;
            let i0 = (u.floor() as usize).min(reduced - 1);
            let i1 = (i0 + 1).min(reduced - 1);
            Tap {
                i0: i0 as u32,
                i1: i1 as u32,
                w1: if i1 == i0 { 0.0 } else { (u - i0 as f64) as f32 },
            }
        })
        .collect()
}

/// Levels 1..=depth are stored at reduced size and expanded on demand.
#[derive(Clone, Debug)]
pub struct GaussianPyramid {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    /// `levels[0]` is the source; `levels[i]` is `i` reductions deep.
    pub(crate) levels: Vec<Plane>,
    pub(crate) xtaps: Vec<Vec<Tap>>,
    pub(crate) ytaps: Vec<Vec<Tap>>,
}

impl GaussianPyramid {
    pub fn build(image: &Plane, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::domain("pyramid depth must be at least 1"));
        }
        if image.is_empty() {
            return Err(Error::domain("cannot build a pyramid of an empty image"));
        }
        let mut levels = Vec::with_capacity(depth + 1);
        levels.push(image.clone());
        for i in 0..depth {
            let next = reduce(&levels[i]);
            levels.push(next);
        }
        let xtaps = levels
            .iter()
            .enumerate()
            .map(|(k, l)| taps(image.width, l.width, k))
            .collect();
        let ytaps = levels
            .iter()
            .enumerate()
            .map(|(k, l)| taps(image.height, l.height, k))
            .collect();
        Ok(GaussianPyramid {
            width: image.width,
            height: image.height,
            depth,
            levels,
            xtaps,
            ytaps,
        })
    }

    /// Number of levels including the original (`depth + 1`).
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// The stored, reduced-size level.
    pub fn reduced(&self, level: usize) -> &Plane {
        &self.levels[level]
    }

    /// Level value at full-resolution pixel `(x, y)`.
    #[inline]
    pub fn sample(&self, level: usize, x: usize, y: usize) -> f32 {
        if level == 0 {
            return self.levels[0].get(x, y);
        }
        let ty = self.ytaps[level][y];
        let tx = self.xtaps[level][x];
        let l = &self.levels[level];
        let r0 = ty.i0 as usize * l.width;
        let r1 = ty.i1 as usize * l.width;
        let top = lerp(l.data[r0 + tx.i0 as usize], l.data[r0 + tx.i1 as usize], tx.w1);
        let bottom = lerp(l.data[r1 + tx.i0 as usize], l.data[r1 + tx.i1 as usize], tx.w1);
        lerp(top, bottom, ty.w1)
    }

    /// Every level's reduced samples interpolated vertically to full-res
    /// row `y`; entry 0 is empty.
    pub(crate) fn rows_at(&self, y: usize) -> Vec<Vec<f32>> {
        let mut rows = Vec::with_capacity(self.levels.len());
        rows.push(Vec::new());
        for (k, l) in self.levels.iter().enumerate().skip(1) {
            let t = self.ytaps[k][y];
            let a = &l.data[t.i0 as usize * l.width..(t.i0 as usize + 1) * l.width];
            let b = &l.data[t.i1 as usize * l.width..(t.i1 as usize + 1) * l.width];
            rows.push(a.iter().zip(b).map(|(&p, &q)| lerp(p, q, t.w1)).collect());
        }
        rows
    }

    /// Level `level` expanded to full resolution.
    pub fn upsampled(&self, level: usize) -> Plane {
        if level == 0 {
            return self.levels[0].clone();
        }
        Plane::from_fn(self.width, self.height, |x, y| self.sample(level, x, y))
    }
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_sizes_round_up() {
        let p = Plane::filled(5, 3, 1.0);
        let r = reduce(&p);
        assert_eq!((r.width, r.height), (3, 2));
        let r = reduce(&Plane::filled(1, 1, 2.0));
        assert_eq!((r.width, r.height, r.data[0]), (1, 1, 2.0));
    }

    #[test]
    fn constant_image_is_fixed_at_every_level() {
        let p = Plane::filled(37, 21, 0.75);
        let pyr = GaussianPyramid::build(&p, 10).unwrap();
        assert_eq!(pyr.len(), 11);
        for i in 0..pyr.len() {
            let up = pyr.upsampled(i);
            assert_eq!((up.width, up.height), (37, 21));
            for v in up.data {
                assert!((v - 0.75).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn upsample_interpolates_between_reduced_samples() {
        // Linear ramp stays linear under binomial blur away from edges.
        let p = Plane::from_fn(64, 4, |x, _| x as f32);
        let pyr = GaussianPyramid::build(&p, 1).unwrap();
        let up = pyr.upsampled(1);
        for x in 4..56 {
            assert!((up.get(x, 2) - x as f32).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn rejects_zero_depth() {
        assert!(GaussianPyramid::build(&Plane::filled(4, 4, 0.0), 0).is_err());
    }
}
