//! Per-STCT truncated projections of a phantom.
//!
//! The analytic path integrates ellipse chords exactly; the grid path
//! samples a rasterized image along each ray and serves as the discrete
//! oracle and as support for non-analytic images.

use crate::error::{Error, Result};
use crate::geometry::ScanConfig;
use crate::phantom::{ImageGrid, PhantomSpec};
use rayon::prelude::*;

/// Stack of per-STCT projections `p_{theta_n}(lambda_i, u_j)`.
///
/// Layout: segment-major, then source index, then detector index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub cfg: ScanConfig,
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(cfg: &ScanConfig) -> Sinogram {
        let len = cfg.segments * cfg.n_source * cfg.j_detectors;
        Sinogram { cfg: cfg.clone(), data: vec![0.0; len] }
    }

    #[inline]
    pub fn idx(&self, segment: usize, source: usize, det: usize) -> usize {
        (segment * self.cfg.n_source + source) * self.cfg.j_detectors + det
    }

    #[inline]
    pub fn get(&self, segment: usize, source: usize, det: usize) -> f64 {
        self.data[self.idx(segment, source, det)]
    }

    #[inline]
    pub fn set(&mut self, segment: usize, source: usize, det: usize, v: f64) {
        let i = self.idx(segment, source, det);
        self.data[i] = v;
    }

    /// One detector row (all `u_j`) of a segment/source pair.
    pub fn row(&self, segment: usize, source: usize) -> &[f64] {
        let start = (segment * self.cfg.n_source + source) * self.cfg.j_detectors;
        &self.data[start..start + self.cfg.j_detectors]
    }

    /// Linear interpolation of a detector row at physical coordinate `u`,
    /// clamped to the edge values outside the element centers.
    pub fn sample_row_clamped(&self, segment: usize, source: usize, u: f64) -> f64 {
        let row = self.row(segment, source);
        sample_uniform_clamped(row, -self.cfg.u_m + 0.5 * self.cfg.pixel_pitch, self.cfg.pixel_pitch, u)
    }

    /// Linear interpolation across source positions at fixed detector index,
    /// zero outside `[-lambda_m, lambda_m]` (the translation is finite).
    pub fn sample_source_zero(&self, segment: usize, det: usize, lambda: f64) -> f64 {
        let step = self.cfg.lambda_step();
        let f = (lambda + self.cfg.lambda_m) / step;
        if f < 0.0 || f > (self.cfg.n_source - 1) as f64 {
            return 0.0;
        }
        let i0 = (f.floor() as usize).min(self.cfg.n_source - 2);
        let w = f - i0 as f64;
        (1.0 - w) * self.get(segment, i0, det) + w * self.get(segment, i0 + 1, det)
    }
}

/// Linear interpolation on a uniform grid starting at `x0` with spacing
/// `step`, clamped to the first/last values outside.
#[inline]
pub fn sample_uniform_clamped(values: &[f64], x0: f64, step: f64, x: f64) -> f64 {
    let f = (x - x0) / step;
    if f <= 0.0 {
        return values[0];
    }
    let last = values.len() - 1;
    if f >= last as f64 {
        return values[last];
    }
    let i0 = f.floor() as usize;
    let w = f - i0 as f64;
    (1.0 - w) * values[i0] + w * values[i0 + 1]
}

/// Analytic forward projection of an ellipse phantom.
///
/// Returns the sinogram and a flag telling whether the phantom extends
/// beyond the FOV radius (data completeness then only holds inside R).
pub fn forward_project(spec: &PhantomSpec, cfg: &ScanConfig) -> (Sinogram, bool) {
    let exceeds_fov = spec.half_size > cfg.fov_radius() * (1.0 + 1e-9);
    let lambdas = cfg.lambda_samples();
    let us = cfg.u_samples();
    let mut sino = Sinogram::zeros(cfg);
    let j = cfg.j_detectors;
    let frames: Vec<_> = cfg.frames().collect();
    sino.data
        .par_chunks_mut(j)
        .enumerate()
        .for_each(|(chunk, row)| {
            let segment = chunk / cfg.n_source;
            let source = chunk % cfg.n_source;
            let frame = frames[segment];
            let src = cfg.source_position(frame, lambdas[source]).expect("lambda in range");
            for (jj, &u) in us.iter().enumerate() {
                let det = cfg.detector_position(frame, u);
                row[jj] = spec.line_integral(src, det);
            }
        });
    (sino, exceeds_fov)
}

/// Ray-driven projection of a rasterized image: trapezoidal sampling of the
/// bilinearly interpolated image along each source-to-detector ray.
pub fn forward_project_grid(img: &ImageGrid, cfg: &ScanConfig, step: f64) -> Result<Sinogram> {
    if step <= 0.0 {
        return Err(Error::Argument(format!("sampling step must be positive, got {step}")));
    }
    if step > img.pixel_size / 2.0 + 1e-12 {
        return Err(Error::Argument(format!(
            "sampling step {step} exceeds half the pixel size {}",
            img.pixel_size / 2.0
        )));
    }
    let lambdas = cfg.lambda_samples();
    let us = cfg.u_samples();
    let mut sino = Sinogram::zeros(cfg);
    let j = cfg.j_detectors;
    let frames: Vec<_> = cfg.frames().collect();
    // The image is fully inside this radius around the origin.
    let bound = img.half_size() * std::f64::consts::SQRT_2;
    sino.data
        .par_chunks_mut(j)
        .enumerate()
        .for_each(|(chunk, row)| {
            let segment = chunk / cfg.n_source;
            let source = chunk % cfg.n_source;
            let frame = frames[segment];
            let src = cfg.source_position(frame, lambdas[source]).expect("lambda in range");
            for (jj, &u) in us.iter().enumerate() {
                let det = cfg.detector_position(frame, u);
                row[jj] = integrate_ray(img, src, det, step, bound);
            }
        });
    Ok(sino)
}

/// Trapezoidal line integral of the image between the two points, restricted
/// to the chord of the circle of radius `bound` around the origin.
fn integrate_ray(img: &ImageGrid, p0: [f64; 2], p1: [f64; 2], step: f64, bound: f64) -> f64 {
    let dx = p1[0] - p0[0];
    let dy = p1[1] - p0[1];
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let dir = [dx / len, dy / len];
    // Clip to |p0 + tau*dir| <= bound.
    let b = p0[0] * dir[0] + p0[1] * dir[1];
    let c = p0[0] * p0[0] + p0[1] * p0[1] - bound * bound;
    let disc = b * b - c;
    if disc <= 0.0 {
        return 0.0;
    }
    let t0 = (-b - disc.sqrt()).max(0.0);
    let t1 = (-b + disc.sqrt()).min(len);
    if t1 <= t0 {
        return 0.0;
    }
    let n = (((t1 - t0) / step).ceil() as usize).max(1);
    let dt = (t1 - t0) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let tau = t0 + dt * k as f64;
        let v = img.sample_zero(p0[0] + tau * dir[0], p0[1] + tau * dir[1]);
        acc += if k == 0 || k == n { 0.5 * v } else { v };
    }
    acc * dt
}
