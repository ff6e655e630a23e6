//! Finite inverse Hilbert transform along the per-STCT filtering direction.
//!
//! Each DBP image is a (scaled) finite Hilbert transform of the object along
//! lines parallel to the source translation. The bounded Tricomi inversion
//!
//! ```text
//! f(x) = -(1/pi) * sqrt(L^2 - x^2) * PV int_{-L}^{L} b(s) / (sqrt(L^2 - s^2) * (x - s)) ds
//! ```
//!
//! is used because the partial images have unknown line integrals, so the
//! usual DC-correction constant is unavailable; validity requires the object
//! support on the line to lie strictly inside [-L, L].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::dbp::DbpImage;
use crate::phantom::ImageGrid;

/// Uniform samples of a function along a filtering line.
///
/// `values[k]` sits at `-half + k * spacing()`; the Hilbert support
/// half-length `support` must lie strictly inside the sampled interval.
#[derive(Debug, Clone)]
pub struct LineSamples {
    pub half: f64,
    pub support: f64,
    pub values: Vec<f64>,
}

impl LineSamples {
    pub fn new(half: f64, support: f64, values: Vec<f64>) -> Result<Self> {
        if !(half > 0.0) || !(support > 0.0) {
            return Err(Error::Argument(format!(
                "line interval and support must be positive, got {half} and {support}"
            )));
        }
        if support >= half {
            return Err(Error::Argument(format!(
                "Hilbert support {support} must lie strictly inside the sampled interval {half}"
            )));
        }
        if values.len() < 32 {
            return Err(Error::Argument(format!(
                "need at least 32 samples along a filtering line, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite line sample".into()));
        }
        Ok(LineSamples { half, support, values })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half / (self.values.len() - 1) as f64
    }

    pub fn position(&self, k: usize) -> f64 {
        -self.half + k as f64 * self.spacing()
    }

    /// Linear interpolation at `x`; clamped to the end samples.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.values.len();
        let f = ((x + self.half) / self.spacing()).clamp(0.0, (n - 1) as f64);
        let k0 = (f.floor() as usize).min(n - 2);
        let w = f - k0 as f64;
        (1.0 - w) * self.values[k0] + w * self.values[k0 + 1]
    }

    fn slope_at(&self, k: usize) -> f64 {
        let n = self.values.len();
        let d = self.spacing();
        if k == 0 {
            (self.values[1] - self.values[0]) / d
        } else if k == n - 1 {
            (self.values[n - 1] - self.values[n - 2]) / d
        } else {
            (self.values[k + 1] - self.values[k - 1]) / (2.0 * d)
        }
    }
}

/// Bounded Tricomi inversion of the finite Hilbert transform.
///
/// The principal value is computed after the substitution `s = L sin(psi)`,
/// which absorbs the inverse square-root weight; midpoint nodes in `psi` plus
/// the subtraction of `b(x)` (whose PV integral vanishes identically for
/// `|x| < L`) leave a smooth integrand. Output samples share the input grid;
/// points outside the support are zero.
pub fn finite_hilbert_inverse(b: &LineSamples) -> Result<LineSamples> {
    let n = b.values.len();
    if n < 32 {
        return Err(Error::Argument(format!("need at least 32 samples, got {n}")));
    }
    let big_l = b.support;
    let m = 2 * n;
    let dpsi = std::f64::consts::PI / m as f64;
    let nodes: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let psi = -std::f64::consts::FRAC_PI_2 + (k as f64 + 0.5) * dpsi;
            let s = big_l * psi.sin();
            (s, b.interp(s))
        })
        .collect();
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let x = b.position(j);
        if x.abs() >= big_l {
            continue;
        }
        let bx = b.values[j];
        let mut sum = 0.0;
        for &(s, bs) in &nodes {
            let d = x - s;
            if d.abs() < 1e-12 * big_l {
                sum -= b.slope_at(j);
            } else {
                sum += (bs - bx) / d;
            }
        }
        *o = -(big_l * big_l - x * x).sqrt() / std::f64::consts::PI * sum * dpsi;
    }
    LineSamples::new(b.half, b.support, out)
}

/// Finite Hilbert transform `(1/pi) PV int_{-L}^{L} f(s)/(x-s) ds` on the
/// sample grid, with the singularity handled by subtracting `f(x)` (its PV
/// integral has the closed form `ln((L+x)/(L-x))`).
pub fn finite_hilbert_forward(f: &LineSamples) -> Result<LineSamples> {
    let n = f.values.len();
    let big_l = f.support;
    let d = f.spacing();
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let x = f.position(j);
        let mut sum = 0.0;
        if x.abs() < big_l {
            let fx = f.values[j];
            for k in 0..n {
                let s = f.position(k);
                if s.abs() > big_l {
                    continue;
                }
                let dd = x - s;
                if dd.abs() < 1e-12 * big_l {
                    sum -= f.slope_at(j) * d;
                } else {
                    sum += (f.values[k] - fx) / dd * d;
                }
            }
            sum += fx * ((big_l + x) / (big_l - x)).ln();
        } else {
            for k in 0..n {
                let s = f.position(k);
                if s.abs() <= big_l {
                    sum += f.values[k] / (x - s) * d;
                }
            }
        }
        *o = sum / std::f64::consts::PI;
    }
    LineSamples::new(f.half, f.support, out)
}

/// Inverts a DBP image along its filtering direction, producing the partial
/// image f_{theta_n} on the same grid.
///
/// Lines run at angle `eta` from the positive y-axis, spaced one pixel apart;
/// the per-line support is the FOV chord plus a 10%-of-radius margin. The DBP
/// is sampled onto each line bilinearly and the result gathered back
/// bilinearly (across lines and along them).
pub fn invert_dbp(dbp: &DbpImage, fov_radius: f64) -> Result<ImageGrid> {
    invert_dbp_with_margin(dbp, fov_radius, 0.1 * fov_radius)
}

pub fn invert_dbp_with_margin(dbp: &DbpImage, fov_radius: f64, margin: f64) -> Result<ImageGrid> {
    if !(fov_radius > 0.0) || !(margin > 0.0) {
        return Err(Error::Argument(format!(
            "FOV radius and margin must be positive, got {fov_radius} and {margin}"
        )));
    }
    let grid = &dbp.grid;
    let step = grid.pixel_size;
    let (dir_x, dir_y) = (dbp.eta.sin(), dbp.eta.cos());
    let (nrm_x, nrm_y) = (dbp.eta.cos(), -dbp.eta.sin());
    // Perpendicular offsets covering every pixel center.
    let half_w = (grid.width as f64 - 1.0) / 2.0 * step;
    let half_h = (grid.height as f64 - 1.0) / 2.0 * step;
    let p_extent = (half_w * half_w + half_h * half_h).sqrt();
    let n_lines = (2.0 * p_extent / step).floor() as usize + 1;
    let p0 = -((n_lines - 1) as f64) * step / 2.0;

    let lines: Vec<LineSamples> = (0..n_lines)
        .into_par_iter()
        .map(|i| {
            let p = p0 + i as f64 * step;
            let chord = (fov_radius * fov_radius - p * p).max(0.0).sqrt();
            // Valid data ends where the line leaves the sampled grid; keep the
            // endpoint-weighted quadrature on real samples by clipping the
            // support to the intersection of the line with the grid rectangle.
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for (origin, d, half_extent) in [
                (p * nrm_x, dir_x, half_w),
                (p * nrm_y, dir_y, half_h),
            ] {
                if d.abs() < 1e-12 {
                    continue;
                }
                let t1 = (half_extent - origin) / d;
                let t2 = (-half_extent - origin) / d;
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
            let t_max = hi.min(-lo).max(step);
            let support = (chord + margin).min(t_max - 0.5 * step).max(2.0 * step);
            // Sampled interval strictly containing the support.
            let n = ((2.0 * support / step).ceil() as usize + 3).max(33);
            let half = (n - 1) as f64 * step / 2.0;
            let values: Vec<f64> = (0..n)
                .map(|k| {
                    let t = -half + k as f64 * step;
                    dbp.grid.sample_zero(p * nrm_x + t * dir_x, p * nrm_y + t * dir_y)
                })
                .collect();
            finite_hilbert_inverse(&LineSamples { half, support, values })
        })
        .collect::<Result<_>>()?;

    let mut out = ImageGrid::zeros(grid.width, grid.height, step)?;
    for row in 0..grid.height {
        for col in 0..grid.width {
            let [x, y] = grid.pixel_center(row, col);
            let p = x * nrm_x + y * nrm_y;
            let t = x * dir_x + y * dir_y;
            let fi = ((p - p0) / step).clamp(0.0, (n_lines - 1) as f64);
            let i0 = (fi.floor() as usize).min(n_lines - 2);
            let w = fi - i0 as f64;
            let at = |line: &LineSamples| {
                if t.abs() >= line.support {
                    0.0
                } else {
                    line.interp(t)
                }
            };
            out.set(row, col, (1.0 - w) * at(&lines[i0]) + w * at(&lines[i0 + 1]));
        }
    }
    Ok(out)
}

/// Pixelwise sum of partial images (fixed order, deterministic).
pub fn accumulate(partials: &[ImageGrid]) -> Result<ImageGrid> {
    let first = partials
        .first()
        .ok_or_else(|| Error::Argument("no partial images to accumulate".into()))?;
    let mut out = ImageGrid::zeros(first.width, first.height, first.pixel_size)?;
    for p in partials {
        if p.width != first.width || p.height != first.height {
            return Err(Error::Argument(format!(
                "partial image grids disagree: {}x{} vs {}x{}",
                p.width, p.height, first.width, first.height
            )));
        }
        for (o, v) in out.data.iter_mut().zip(&p.data) {
            *o += v;
        }
    }
    Ok(out)
}

/// Circular field-of-view mask over pixel centers.
pub fn fov_mask(grid: &ImageGrid, radius: f64) -> Vec<bool> {
    let mut mask = vec![false; grid.width * grid.height];
    for row in 0..grid.height {
        for col in 0..grid.width {
            let [x, y] = grid.pixel_center(row, col);
            mask[row * grid.width + col] = x * x + y * y <= radius * radius;
        }
    }
    mask
}
