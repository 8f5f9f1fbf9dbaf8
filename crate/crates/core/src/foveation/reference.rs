use super::{ResolutionField, SIGMA};
use crate::image::Plane;
use crate::par;

/// Spatial standard deviation (px) of the extra Gaussian blur that brings
/// the source down to relative resolution `r`. Level `i` of the pyramid is a
/// Gaussian with frequency-domain standard deviation `σ·2^-i`, so resolution
/// `r` means frequency standard deviation `σ·r`, of which the source already
/// carries `σ`.
pub fn reference_sigma(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let r = r.max(1e-6);
    ((1.0 / (r * r) - 1.0) / (4.0 * std::f64::consts::PI.powi(2) * SIGMA * SIGMA)).sqrt()
}

/// Brute-force space-variant Gaussian blur: every pixel is convolved with
/// the Gaussian for its own resolution value, truncated at 3σ, edges
/// replicated. `origin` is the plane's offset in the resolution field.
pub fn reference_blur(image: &Plane, rmap: &(impl ResolutionField + Sync), origin: (usize, usize)) -> Plane {
    let (w, h) = (image.width, image.height);
    let mut out = vec![0f32; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let r = rmap.r_at(x + origin.0, y + origin.1);
            let s = reference_sigma(r);
            if s < 1e-3 {
                *o = image.get(x, y);
                continue;
            }
            let rad = (3.0 * s).ceil() as isize;
            let g: Vec<f64> = (-rad..=rad)
                .map(|d| (-(d * d) as f64 / (2.0 * s * s)).exp())
                .collect();
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (dy, gy) in (-rad..=rad).zip(&g) {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let src = image.row(yy);
                let mut line = 0.0;
                for (dx, gx) in (-rad..=rad).zip(&g) {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    line += gx * src[xx] as f64;
                }
                acc += gy * line;
                norm += gy;
            }
            let gsum: f64 = g.iter().sum();
            *o = (acc / (norm * gsum)) as f32;
        }
    });
    Plane {
        width: w,
        height: h,
        data: out,
    }
}
