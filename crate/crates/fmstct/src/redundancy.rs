//! Redundancy weighting for full-scan mSTCT.
//!
//! Adjacent segments measure an overlapping band of physical rays. Each
//! sample `(lambda, u)` is mapped to the virtual detector, classified by
//! which adjacent segment also measures the identical ray (R1: positive
//! fan-angle band, partner reached by `map_to_next`; R2: negative band,
//! partner by `map_to_prev`), and weighted so that every ray contributes
//! exactly once:
//!
//! * non-redundant samples keep weight 1,
//! * R2 samples get `f(d_inner / (d_inner + d_outer))` where the distances
//!   are measured along the W-Line direction `phi` to the region boundaries,
//! * R1 samples get one minus the weight of their partner ray in the
//!   previous segment, evaluated continuously.
//!
//! `d_inner` runs toward the boundary where the partner segment stops
//! measuring the ray (the weight must reach 1 there); `d_outer` runs toward
//! this segment's own detector/translation edge where the partner takes over
//! (weight 0). This is the unique assignment that keeps the weight
//! continuous across both boundaries.
//!
//! The full-scan geometry is segment-independent, so one segment's weight
//! map is computed and replicated.

use crate::error::{Error, Result};
use crate::geometry::ScanConfig;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Redundancy class of one projection sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// Measured by this segment only; weight 1.
    NonRedundant,
    /// Positive fan-angle overlap band; partner ray via `map_to_next`.
    R1,
    /// Negative fan-angle overlap band; partner ray via `map_to_prev`.
    R2,
}

/// Per-STCT redundancy weights on the `(lambda_i, u_j)` sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub cfg: ScanConfig,
    /// W-Line direction angle in the t-lambda plane (radians).
    pub phi: f64,
    /// Layout identical to `Sinogram`: segment-major, then source, then
    /// detector index.
    pub data: Vec<f64>,
}

impl WeightMap {
    #[inline]
    pub fn get(&self, segment: usize, source: usize, det: usize) -> f64 {
        self.data[(segment * self.cfg.n_source + source) * self.cfg.j_detectors + det]
    }
}

/// Smoothing window of the weight ramp: 1 below 0, 0 above 1, half-sine
/// transition in between.
pub fn smooth_f(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        (1.0 + ((0.5 - x) * PI).sin()) / 2.0
    }
}

/// Classifies a virtual-detector sample of one segment.
///
/// Labels are identical for every segment of the full scan, so no segment
/// index is needed; indices wrap modulo `T`.
pub fn classify(cfg: &ScanConfig, lambda: f64, t: f64) -> RegionLabel {
    if !cfg.valid_region_contains(lambda, t) {
        return RegionLabel::NonRedundant;
    }
    let r1_partner_in = cfg
        .map_to_next(lambda, t)
        .map(|(lp, tp)| cfg.valid_region_contains(lp, tp))
        .unwrap_or(false);
    let r2_partner_in = cfg
        .map_to_prev(lambda, t)
        .map(|(ln, tn)| cfg.valid_region_contains(ln, tn))
        .unwrap_or(false);
    match (r1_partner_in, r2_partner_in) {
        (true, true) => {
            // Pathological triple overlap; split by the fan-angle sign.
            if lambda - t >= 0.0 {
                RegionLabel::R1
            } else {
                RegionLabel::R2
            }
        }
        (true, false) => RegionLabel::R1,
        (false, true) => RegionLabel::R2,
        (false, false) => RegionLabel::NonRedundant,
    }
}

/// Boundary search controls. Region boundaries are located implicitly by
/// bisection on the classification predicate along the W-Line.
#[derive(Debug, Clone, Copy)]
struct Search {
    march_step: f64,
    tol: f64,
    max_range: f64,
}

impl Search {
    fn for_config(cfg: &ScanConfig) -> Search {
        Search {
            march_step: cfg.lambda_m / 64.0,
            tol: 1e-6 * cfg.lambda_m,
            max_range: 4.0 * (cfg.t_max() + cfg.lambda_m),
        }
    }
}

/// Distance along `dir` from `(t, lambda)` to the first point whose label is
/// not R2, located to `tol` by bisection after a coarse march.
fn exit_distance(cfg: &ScanConfig, t: f64, lambda: f64, dir: [f64; 2], search: Search) -> f64 {
    let at = |s: f64| (lambda + s * dir[1], t + s * dir[0]);
    let mut lo = 0.0;
    let mut hi = search.march_step;
    loop {
        let (la, ta) = at(hi);
        if classify(cfg, la, ta) != RegionLabel::R2 {
            break;
        }
        lo = hi;
        hi += search.march_step;
        if hi > search.max_range {
            return search.max_range;
        }
    }
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        let (lm, tm) = at(mid);
        if classify(cfg, lm, tm) == RegionLabel::R2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// W-Line distances of an R2 sample to the region boundaries:
/// `(d_inner, d_outer)` as described in the module docs.
pub fn boundary_distances(cfg: &ScanConfig, lambda: f64, t: f64, phi: f64) -> Result<(f64, f64)> {
    if classify(cfg, lambda, t) != RegionLabel::R2 {
        return Err(Error::Argument(format!(
            "boundary distances are defined for R2 samples, (lambda={lambda}, t={t}) is {:?}",
            classify(cfg, lambda, t)
        )));
    }
    let search = Search::for_config(cfg);
    let dir = [phi.cos(), phi.sin()];
    let d_pos = exit_distance(cfg, t, lambda, dir, search);
    let d_neg = exit_distance(cfg, t, lambda, [-dir[0], -dir[1]], search);
    // Probe just beyond each exit: still inside this segment's valid domain
    // means the partner stopped measuring there (inner, weight -> 1); outside
    // means our own data edge (outer, weight -> 0).
    let probe = 3.0 * search.tol;
    let in_pos = cfg.valid_region_contains(lambda + (d_pos + probe) * dir[1], t + (d_pos + probe) * dir[0]);
    let in_neg = cfg.valid_region_contains(lambda - (d_neg + probe) * dir[1], t - (d_neg + probe) * dir[0]);
    match (in_pos, in_neg) {
        (true, false) => Ok((d_pos, d_neg)),
        (false, true) => Ok((d_neg, d_pos)),
        _ => {
            // Corner case: both exits on the same kind of boundary. Fall back
            // to orientation: the inner side is toward increasing lambda - t
            // (toward this segment's own angular zone).
            let d_rate = dir[1] - dir[0];
            if d_rate >= 0.0 {
                Ok((d_pos, d_neg))
            } else {
                Ok((d_neg, d_pos))
            }
        }
    }
}

/// Continuous redundancy weight of a `(lambda, t)` sample.
pub fn weight_at(cfg: &ScanConfig, lambda: f64, t: f64, phi: f64) -> f64 {
    match classify(cfg, lambda, t) {
        RegionLabel::NonRedundant => 1.0,
        RegionLabel::R2 => r2_weight(cfg, lambda, t, phi),
        RegionLabel::R1 => {
            // Complement of the partner ray's weight, recomputed from its
            // own R2 distances.
            match cfg.map_to_next(lambda, t) {
                Ok((lp, tp)) if classify(cfg, lp, tp) == RegionLabel::R2 => {
                    1.0 - r2_weight(cfg, lp, tp, phi)
                }
                _ => 1.0,
            }
        }
    }
}

fn r2_weight(cfg: &ScanConfig, lambda: f64, t: f64, phi: f64) -> f64 {
    match boundary_distances(cfg, lambda, t, phi) {
        Ok((d_inner, d_outer)) => {
            let total = d_inner + d_outer;
            if total <= 0.0 {
                0.5
            } else {
                smooth_f(d_inner / total)
            }
        }
        Err(_) => 1.0,
    }
}

/// Builds the full weight map on the `(lambda_i, u_j)` grid.
///
/// `phi` is the W-Line angle; any direction transversal to the region
/// boundaries works, practically `phi` in `(pi/2, pi)`.
pub fn build_weight_map(cfg: &ScanConfig, phi: f64) -> WeightMap {
    let lambdas = cfg.lambda_samples();
    let us = cfg.u_samples();
    let j = cfg.j_detectors;
    let mut segment0 = vec![0.0f64; cfg.n_source * j];
    segment0
        .par_chunks_mut(j)
        .enumerate()
        .for_each(|(i, row)| {
            let lambda = lambdas[i];
            for (jj, &u) in us.iter().enumerate() {
                let t = cfg.u_to_t(lambda, u);
                row[jj] = weight_at(cfg, lambda, t, phi);
            }
        });
    let mut data = Vec::with_capacity(cfg.segments * segment0.len());
    for _ in 0..cfg.segments {
        data.extend_from_slice(&segment0);
    }
    WeightMap { cfg: cfg.clone(), phi, data }
}

/// Default W-Line direction.
pub const DEFAULT_PHI: f64 = 3.0 * PI / 4.0;
