//! FW-FBP baseline: redundancy-weighted, ramp-filtered backprojection that
//! treats the F-mSTCT scan as an offset-detector full scan.
//!
//! The construction is deliberately minimal: apply the redundancy weight and
//! the obliquity preweight, ramp-filter each detector row along `u`, and
//! backproject with the fan-beam `(l+h)^2 / L^2` distance weighting. It is a
//! comparison baseline, not a faithful port of any published FBP variant for
//! this geometry.

use rayon::prelude::*;

use crate::dbp::preweight;
use crate::error::Result;
use crate::geometry::frame_from_world;
use crate::phantom::ImageGrid;
use crate::projector::{sample_uniform_clamped, Sinogram};
use crate::redundancy::WeightMap;

/// Band-limited ramp kernel tap at offset `k` for sample spacing `delta`:
/// `1/(4 delta^2)` at the center, zero at even offsets, `-1/(pi k delta)^2`
/// at odd offsets.
pub fn ramp_tap(k: isize, delta: f64) -> f64 {
    if k == 0 {
        1.0 / (4.0 * delta * delta)
    } else if k % 2 == 0 {
        0.0
    } else {
        let d = std::f64::consts::PI * k as f64 * delta;
        -1.0 / (d * d)
    }
}

/// Linear convolution of a detector row with the ramp kernel (implicit zero
/// padding outside the row). The `delta` spacing scale makes the output an
/// approximation of the continuous ramp filtering times 1 (the quadrature
/// `delta` weight is included).
pub fn ramp_filter(row: &[f64], delta: f64) -> Vec<f64> {
    ramp_filter_extended(row, delta, 0)
}

/// Ramp filtering evaluated on a grid extended by `extra` samples on each
/// side of the input row; the filtered signal has long tails past the ends of
/// the (zero-padded) input, and backprojection needs them.
pub fn ramp_filter_extended(row: &[f64], delta: f64, extra: usize) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![0.0; n + 2 * extra];
    for (j, o) in out.iter_mut().enumerate() {
        let pos = j as isize - extra as isize;
        let mut acc = 0.0;
        for (k, &v) in row.iter().enumerate() {
            acc += v * ramp_tap(pos - k as isize, delta);
        }
        *o = acc * delta;
    }
    out
}

/// FW-FBP reconstruction (unscaled: a global calibration constant is applied
/// by the pipeline).
pub fn fw_fbp(sino: &Sinogram, weights: &WeightMap, grid: &ImageGrid) -> Result<ImageGrid> {
    let cfg = &sino.cfg;
    let weighted = preweight(sino, weights)?;
    // Ramp-filter every detector row onto a grid extended well past the
    // physical detector: the filtered signal has long negative tails there,
    // and dropping them leaves a constant positive pedestal in the image.
    let rows = cfg.n_source * cfg.segments;
    let j = cfg.j_detectors;
    let extra = 2 * j;
    let jx = j + 2 * extra;
    let mut filtered = vec![0.0; rows * jx];
    filtered
        .par_chunks_mut(jx)
        .zip(weighted.data.par_chunks(j).take(rows))
        .for_each(|(out_row, row)| {
            out_row.copy_from_slice(&ramp_filter_extended(row, cfg.pixel_pitch, extra));
        });

    let lambdas = cfg.lambda_samples();
    let dl = cfg.lambda_step();
    let u0 = -cfg.u_m + (0.5 - extra as f64) * cfg.pixel_pitch;
    let u_max = cfg.u_m + extra as f64 * cfg.pixel_pitch;
    let lh = cfg.l + cfg.h;
    let mut out = ImageGrid::zeros(grid.width, grid.height, grid.pixel_size)?;
    let width = grid.width;
    out.data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(r, row_out)| {
            for (c, v) in row_out.iter_mut().enumerate() {
                let p = grid.pixel_center(r, c);
                let mut acc = 0.0;
                for frame in cfg.frames() {
                    let [xp, yp] = frame_from_world(frame.theta, p);
                    let big_l = yp + cfg.l;
                    if big_l <= 0.0 {
                        continue;
                    }
                    let k = lh / big_l;
                    let w = lh * lh / (big_l * big_l);
                    for (i, &lambda) in lambdas.iter().enumerate() {
                        let u_star = lambda * (1.0 - k) + xp * k;
                        if u_star.abs() > u_max {
                            continue;
                        }
                        let row_idx = frame.index * cfg.n_source + i;
                        let row = &filtered[row_idx * jx..(row_idx + 1) * jx];
                        acc += w * sample_uniform_clamped(row, u0, cfg.pixel_pitch, u_star);
                    }
                }
                *v = acc * dl;
            }
        });
    Ok(out)
}
