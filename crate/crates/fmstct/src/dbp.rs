//! Differentiated-backprojection engines.
//!
//! D-DBP differentiates the preweighted projections along the detector and
//! backprojects with a `1/L^2` distance weight; S-DBP differentiates along
//! the source translation and weights by `1/H^2`. Both discretize the same
//! continuous DBP of the object along the per-segment filtering direction
//! `eta` (parallel to the source translation).

use crate::error::{Error, Result};
use crate::geometry::{frame_from_world, ScanConfig, StctFrame};
use crate::phantom::ImageGrid;
use crate::projector::Sinogram;
use crate::redundancy::WeightMap;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Per-segment DBP values on an image grid.
#[derive(Debug, Clone)]
pub struct DbpImage {
    pub frame: StctFrame,
    pub grid: ImageGrid,
    /// Angle of the Hilbert filtering lines from the positive y-axis
    /// (`pi/2 - theta_n`, lines parallel to the source translation, whose
    /// world direction is `(cos theta_n, sin theta_n)`).
    pub eta: f64,
}

/// Applies the redundancy weight and the cosine-like obliquity factor
/// `(l+h)^2 / sqrt((l+h)^2 + (lambda-u)^2)` to every sample.
pub fn preweight(sino: &Sinogram, weights: &WeightMap) -> Result<Sinogram> {
    if sino.cfg != weights.cfg {
        return Err(Error::Dimension(
            "sinogram and weight map were built for different scan configurations".into(),
        ));
    }
    let cfg = &sino.cfg;
    let lh = cfg.l + cfg.h;
    let lambdas = cfg.lambda_samples();
    let us = cfg.u_samples();
    let mut out = sino.clone();
    for n in 0..cfg.segments {
        for i in 0..cfg.n_source {
            for j in 0..cfg.j_detectors {
                let d = lambdas[i] - us[j];
                let factor = lh * lh / (lh * lh + d * d).sqrt();
                let idx = out.idx(n, i, j);
                out.data[idx] = sino.data[idx] * weights.get(n, i, j) * factor;
            }
        }
    }
    Ok(out)
}

/// Second-order finite difference of one uniformly sampled row.
fn diff_row(row: &[f64], out: &mut [f64], step: f64) {
    let m = row.len();
    out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * step);
    for k in 1..m - 1 {
        out[k] = (row[k + 1] - row[k - 1]) / (2.0 * step);
    }
    out[m - 1] = (3.0 * row[m - 1] - 4.0 * row[m - 2] + row[m - 3]) / (2.0 * step);
}

/// `d/du` of every detector row (central differences, one-sided second-order
/// stencils at the edges).
pub fn diff_along_detector(weighted: &Sinogram) -> Result<Sinogram> {
    let cfg = &weighted.cfg;
    if cfg.j_detectors < 3 {
        return Err(Error::Argument("detector derivative needs at least 3 elements".into()));
    }
    let mut out = Sinogram::zeros(cfg);
    let j = cfg.j_detectors;
    out.data
        .chunks_mut(j)
        .zip(weighted.data.chunks(j))
        .for_each(|(o, r)| diff_row(r, o, cfg.pixel_pitch));
    Ok(out)
}

/// `d/dlambda` at every detector index.
pub fn diff_along_source(weighted: &Sinogram) -> Result<Sinogram> {
    let cfg = &weighted.cfg;
    if cfg.n_source < 3 {
        return Err(Error::Argument("source derivative needs at least 3 positions".into()));
    }
    let mut out = Sinogram::zeros(cfg);
    let step = cfg.lambda_step();
    let mut col = vec![0.0; cfg.n_source];
    let mut dcol = vec![0.0; cfg.n_source];
    for n in 0..cfg.segments {
        for j in 0..cfg.j_detectors {
            for i in 0..cfg.n_source {
                col[i] = weighted.get(n, i, j);
            }
            diff_row(&col, &mut dcol, step);
            for i in 0..cfg.n_source {
                out.set(n, i, j, dcol[i]);
            }
        }
    }
    Ok(out)
}

fn backprojection_grid(like: &ImageGrid) -> ImageGrid {
    ImageGrid::zeros(like.width, like.height, like.pixel_size).expect("valid template grid")
}

/// Trapezoid integration of `f` over `[a, b]` on the uniform sample grid
/// `x0 + k*step`, `k < n`, with fractional end strips so clipping the
/// integration window stays second-order accurate.
pub fn clipped_trapezoid(a: f64, b: f64, x0: f64, step: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let i_lo = (((a - x0) / step).ceil().max(0.0)) as usize;
    let i_hi = (((b - x0) / step).floor().min((n - 1) as f64)).max(0.0) as usize;
    if i_hi < i_lo || (b - x0) / step < 0.0 {
        return (b - a) * 0.5 * (f(a) + f(b));
    }
    let x_lo = x0 + i_lo as f64 * step;
    let x_hi = x0 + i_hi as f64 * step;
    let mut acc = 0.0;
    if i_hi > i_lo {
        let mut interior = 0.5 * (f(x_lo) + f(x_hi));
        for k in i_lo + 1..i_hi {
            interior += f(x0 + k as f64 * step);
        }
        acc += interior * step;
    }
    if x_lo > a {
        acc += (x_lo - a) * 0.5 * (f(a) + f(x_lo));
    }
    if b > x_hi {
        acc += (b - x_hi) * 0.5 * (f(x_hi) + f(b));
    }
    acc
}

/// D-DBP of one segment; errors if any pixel lies on or behind the source
/// line (`L <= 0`).
pub fn d_dbp(diffed: &Sinogram, frame: StctFrame, grid: &ImageGrid) -> Result<DbpImage> {
    check_min_distance(diffed, frame, grid, true)?;
    Ok(d_dbp_masked(diffed, frame, grid, 0.0))
}

/// S-DBP of one segment; errors if any pixel lies on or behind the detector
/// line (`H <= 0`).
pub fn s_dbp(diffed: &Sinogram, frame: StctFrame, grid: &ImageGrid) -> Result<DbpImage> {
    check_min_distance(diffed, frame, grid, false)?;
    Ok(s_dbp_masked(diffed, frame, grid, 0.0))
}

/// D-DBP that zeroes pixels with `L <= min_l` instead of failing; used for
/// grids whose corners extend past the source line.
pub fn d_dbp_masked(diffed: &Sinogram, frame: StctFrame, grid: &ImageGrid, min_l: f64) -> DbpImage {
    let cfg = &diffed.cfg;
    let dl = cfg.lambda_step();
    let mut out = backprojection_grid(grid);
    let width = out.width;
    out.data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, v) in line.iter_mut().enumerate() {
                let p = grid.pixel_center(row, col);
                let [xp, yp] = frame_from_world(frame.theta, p);
                let big_l = yp + cfg.l;
                if big_l <= min_l {
                    continue;
                }
                let k = (cfg.l + cfg.h) / big_l;
                // u*(lambda) is decreasing in lambda (k > 1); integrate only
                // over sources whose ray through the pixel hits the detector
                // (this segment's angular wedge).
                let lambda_of = |u: f64| (u - xp * k) / (1.0 - k);
                let lo = (-cfg.lambda_m).max(lambda_of(cfg.u_m));
                let hi = cfg.lambda_m.min(lambda_of(-cfg.u_m));
                let g = |lambda: f64| {
                    let u_star = lambda * (1.0 - k) + xp * k;
                    sample_between_sources(diffed, frame.index, lambda, u_star)
                };
                let integral = clipped_trapezoid(lo, hi, -cfg.lambda_m, dl, cfg.n_source, g);
                *v = 0.5 * integral / (big_l * big_l);
            }
        });
    DbpImage { frame, grid: out, eta: PI / 2.0 - frame.theta }
}

/// Bilinear sinogram sample at continuous `(lambda, u)`: linear between the
/// two neighbouring source rows, clamped interpolation along each row.
fn sample_between_sources(sino: &Sinogram, segment: usize, lambda: f64, u: f64) -> f64 {
    let cfg = &sino.cfg;
    let f = ((lambda + cfg.lambda_m) / cfg.lambda_step()).clamp(0.0, (cfg.n_source - 1) as f64);
    let i0 = (f.floor() as usize).min(cfg.n_source - 2);
    let w = f - i0 as f64;
    (1.0 - w) * sino.sample_row_clamped(segment, i0, u)
        + w * sino.sample_row_clamped(segment, i0 + 1, u)
}

/// Bilinear sinogram sample: linear between detector elements, zero beyond
/// the translation range along the source direction.
fn sample_between_detectors(sino: &Sinogram, segment: usize, lambda: f64, u: f64) -> f64 {
    let cfg = &sino.cfg;
    let u0 = -cfg.u_m + 0.5 * cfg.pixel_pitch;
    let f = ((u - u0) / cfg.pixel_pitch).clamp(0.0, (cfg.j_detectors - 1) as f64);
    let j0 = (f.floor() as usize).min(cfg.j_detectors - 2);
    let w = f - j0 as f64;
    (1.0 - w) * sino.sample_source_zero(segment, j0, lambda)
        + w * sino.sample_source_zero(segment, j0 + 1, lambda)
}

/// S-DBP that zeroes pixels with `H <= min_h` instead of failing.
pub fn s_dbp_masked(diffed: &Sinogram, frame: StctFrame, grid: &ImageGrid, min_h: f64) -> DbpImage {
    let cfg = &diffed.cfg;
    let du = cfg.pixel_pitch;
    let mut out = backprojection_grid(grid);
    let width = out.width;
    out.data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, v) in line.iter_mut().enumerate() {
                let p = grid.pixel_center(row, col);
                let [xp, yp] = frame_from_world(frame.theta, p);
                let big_h = cfg.h - yp;
                if big_h <= min_h {
                    continue;
                }
                let k = (cfg.l + cfg.h) / big_h;
                // lambda*(u) is decreasing in u (k > 1); integrate only over
                // detector elements reached from within the translation.
                let u_of = |lambda: f64| (lambda - xp * k) / (1.0 - k);
                let lo = (-cfg.u_m).max(u_of(cfg.lambda_m));
                let hi = cfg.u_m.min(u_of(-cfg.lambda_m));
                let g = |u: f64| {
                    let lambda_star = u * (1.0 - k) + xp * k;
                    sample_between_detectors(diffed, frame.index, lambda_star, u)
                };
                let u0 = -cfg.u_m + 0.5 * du;
                let integral = clipped_trapezoid(lo, hi, u0, du, cfg.j_detectors, g);
                *v = 0.5 * integral / (big_h * big_h);
            }
        });
    DbpImage { frame, grid: out, eta: PI / 2.0 - frame.theta }
}

fn check_min_distance(sino: &Sinogram, frame: StctFrame, grid: &ImageGrid, source_side: bool) -> Result<()> {
    let cfg = &sino.cfg;
    let mut min = f64::INFINITY;
    // The distance is linear over the grid, so the corner pixels bound it.
    for &row in &[0, grid.height - 1] {
        for &col in &[0, grid.width - 1] {
            let [_, yp] = frame_from_world(frame.theta, grid.pixel_center(row, col));
            let d = if source_side { yp + cfg.l } else { cfg.h - yp };
            min = min.min(d);
        }
    }
    if min <= 0.0 {
        let side = if source_side { "source" } else { "detector" };
        return Err(Error::Geometry(format!(
            "grid extends behind the {side} line of segment {} (min distance {min:.3})",
            frame.index
        )));
    }
    Ok(())
}

/// Weight map of all ones, for pipelines that apply weighting separately.
pub fn uniform_weights(cfg: &ScanConfig) -> WeightMap {
    WeightMap {
        cfg: cfg.clone(),
        phi: 0.0,
        data: vec![1.0; cfg.segments * cfg.n_source * cfg.j_detectors],
    }
}
