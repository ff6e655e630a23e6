//! F-mSTCT acquisition geometry.
//!
//! One scan consists of `T` source-translation segments (STCTs). In segment
//! `n` the source translates along the line `y' = -l` of a frame rotated by
//! `theta_n`, while a flat detector sits on `y' = h`. World coordinates are
//! obtained by right-multiplying frame coordinates with the rotation matrix,
//! i.e. `world = [x', y'] * R(theta_n)`.
//!
//! Four ray parameterizations coexist:
//! * `(lambda, u)`  source coordinate / physical detector coordinate,
//! * `(lambda, t)`  with `t` on the virtual detector through the origin,
//! * `(alpha, s)`   parallel-beam angle and signed distance from the origin.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Full F-mSTCT acquisition geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Source-to-origin distance (mm).
    pub l: f64,
    /// Detector-to-origin distance (mm).
    pub h: f64,
    /// Half-length of the source translation (mm).
    pub lambda_m: f64,
    /// Half-size of the detector (mm), `= j_detectors * pixel_pitch / 2`.
    pub u_m: f64,
    /// Source samples per STCT.
    pub n_source: usize,
    /// Detector elements.
    pub j_detectors: usize,
    /// Detector element size (mm).
    pub pixel_pitch: f64,
    /// Number of STCT segments tiling the full circle.
    pub segments: usize,
    /// Effective inter-segment angle `2*pi/T` (radians).
    pub delta_theta: f64,
}

/// One STCT segment: index and rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StctFrame {
    /// Zero-based segment index in `0..T`.
    pub index: usize,
    /// Rotation angle of the segment (radians), in `[0, 2*pi)`.
    pub theta: f64,
}

/// Segment tiling of the full circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segmentation {
    /// Raw inter-segment angle `2*atan(u_m/h)` (radians).
    pub delta_theta_raw: f64,
    /// Number of segments `T = ceil(2*pi / delta_theta_raw)`.
    pub segments: usize,
    /// Effective angle `2*pi/T` after even tiling (radians).
    pub delta_theta: f64,
}

/// All coordinates of one ray, filled in as conversions are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCoords {
    pub lambda: f64,
    pub u: f64,
    pub t: f64,
    pub alpha: f64,
    pub s: f64,
}

/// `delta_theta` and `T` from the detector half-angle.
pub fn segmentation(u_m: f64, h: f64) -> Segmentation {
    let delta_theta_raw = 2.0 * (u_m / h).atan();
    let segments = (2.0 * PI / delta_theta_raw).ceil() as usize;
    Segmentation { delta_theta_raw, segments, delta_theta: 2.0 * PI / segments as f64 }
}

impl ScanConfig {
    /// Builds a configuration and derives `u_m`, `T` and `delta_theta`.
    pub fn new(
        l: f64,
        h: f64,
        lambda_m: f64,
        n_source: usize,
        j_detectors: usize,
        pixel_pitch: f64,
    ) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Geometry(format!("l must be positive, got {l}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Geometry(format!("h must be positive, got {h}")));
        }
        if !(lambda_m > 0.0 && lambda_m.is_finite()) {
            return Err(Error::Geometry(format!("lambda_m must be positive, got {lambda_m}")));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return Err(Error::Geometry(format!("pixel_pitch must be positive, got {pixel_pitch}")));
        }
        if n_source < 2 || j_detectors < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 source samples and 2 detector elements, got N={n_source}, J={j_detectors}"
            )));
        }
        let u_m = j_detectors as f64 * pixel_pitch / 2.0;
        if lambda_m * h <= u_m * l {
            return Err(Error::Geometry(format!(
                "lambda_m*h must exceed u_m*l for a positive FOV radius \
                 (lambda_m*h = {}, u_m*l = {})",
                lambda_m * h,
                u_m * l
            )));
        }
        let seg = segmentation(u_m, h);
        Ok(ScanConfig {
            l,
            h,
            lambda_m,
            u_m,
            n_source,
            j_detectors,
            pixel_pitch,
            segments: seg.segments,
            delta_theta: seg.delta_theta,
        })
    }

    /// Segment `index` (zero-based), `theta = delta_theta * index`.
    pub fn frame(&self, index: usize) -> StctFrame {
        StctFrame { index, theta: self.delta_theta * index as f64 }
    }

    pub fn frames(&self) -> impl Iterator<Item = StctFrame> + '_ {
        (0..self.segments).map(|n| self.frame(n))
    }

    /// FOV radius `R = (lambda_m*h - u_m*l) / sqrt((l+h)^2 + (lambda_m+u_m)^2)`.
    pub fn fov_radius(&self) -> f64 {
        (self.lambda_m * self.h - self.u_m * self.l)
            / ((self.l + self.h).powi(2) + (self.lambda_m + self.u_m).powi(2)).sqrt()
    }

    /// Inscribed-circle radius of the static fan, `r = l*u_m / sqrt((l+h)^2 + u_m^2)`.
    /// Used only for FOV-magnification reporting.
    pub fn standard_fov_radius(&self) -> f64 {
        self.l * self.u_m / ((self.l + self.h).powi(2) + self.u_m.powi(2)).sqrt()
    }

    /// Uniform source samples on `[-lambda_m, lambda_m]` including endpoints.
    pub fn lambda_samples(&self) -> Vec<f64> {
        let step = self.lambda_step();
        (0..self.n_source).map(|i| -self.lambda_m + step * i as f64).collect()
    }

    pub fn lambda_step(&self) -> f64 {
        2.0 * self.lambda_m / (self.n_source - 1) as f64
    }

    /// Detector element centers on `(-u_m, u_m)`, spacing `pixel_pitch`.
    pub fn u_samples(&self) -> Vec<f64> {
        (0..self.j_detectors)
            .map(|j| -self.u_m + (j as f64 + 0.5) * self.pixel_pitch)
            .collect()
    }

    /// World position of the source focus at local coordinate `lambda`.
    pub fn source_position(&self, frame: StctFrame, lambda: f64) -> Result<[f64; 2]> {
        if lambda.abs() > self.lambda_m * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "lambda = {lambda} outside translation range +-{}",
                self.lambda_m
            )));
        }
        Ok(world_from_frame(frame.theta, [lambda, -self.l]))
    }

    /// World position of the detector point at local coordinate `u`.
    pub fn detector_position(&self, frame: StctFrame, u: f64) -> [f64; 2] {
        world_from_frame(frame.theta, [u, self.h])
    }

    /// Detector coordinate `u*` hit by the ray from source `lambda` through
    /// world point `point`, plus the backprojection distance
    /// `L = -x*sin(theta) + y*cos(theta) + l`.
    ///
    /// `u*` may fall outside `[-u_m, u_m]`; callers decide truncation handling.
    pub fn point_to_detector(&self, frame: StctFrame, lambda: f64, point: [f64; 2]) -> Result<(f64, f64)> {
        let [xp, yp] = frame_from_world(frame.theta, point);
        let big_l = yp + self.l;
        if big_l <= 0.0 {
            return Err(Error::Geometry(format!(
                "point {point:?} is behind the source line of segment {} (L = {big_l})",
                frame.index
            )));
        }
        let u_star = lambda + (xp - lambda) * (self.l + self.h) / big_l;
        Ok((u_star, big_l))
    }

    /// Source coordinate `lambda*` of the ray through `point` hitting detector
    /// element `u`, plus `H = x*sin(theta) - y*cos(theta) + h`.
    pub fn point_to_source(&self, frame: StctFrame, u: f64, point: [f64; 2]) -> Result<(f64, f64)> {
        let [xp, yp] = frame_from_world(frame.theta, point);
        let big_h = self.h - yp;
        if big_h <= 0.0 {
            return Err(Error::Geometry(format!(
                "point {point:?} is behind the detector line of segment {} (H = {big_h})",
                frame.index
            )));
        }
        let lambda_star = u + (xp - u) * (self.l + self.h) / big_h;
        Ok((lambda_star, big_h))
    }

    /// Virtual-detector map: `u = ((l+h)/l) * t - (h/l) * lambda`.
    pub fn t_to_u(&self, lambda: f64, t: f64) -> f64 {
        (self.l + self.h) / self.l * t - self.h / self.l * lambda
    }

    /// Inverse of [`ScanConfig::t_to_u`]: `t = (l*u + h*lambda) / (l+h)`.
    pub fn u_to_t(&self, lambda: f64, u: f64) -> f64 {
        (self.l * u + self.h * lambda) / (self.l + self.h)
    }

    /// Parallel-beam coordinates of the ray `(lambda, t)` in `frame`:
    /// `alpha = atan((lambda-t)/l) + theta_n`, `s = l*t/sqrt((lambda-t)^2 + l^2)`.
    ///
    /// `alpha` is measured in world coordinates so that rays of different
    /// segments with equal `(alpha, s)` coincide as world lines.
    pub fn to_parallel(&self, frame: StctFrame, lambda: f64, t: f64) -> (f64, f64) {
        let d = lambda - t;
        let alpha = (d / self.l).atan() + frame.theta;
        let s = self.l * t / (d * d + self.l * self.l).sqrt();
        (alpha, s)
    }

    /// Coordinates in the previous segment (`n-1`) of the identical physical
    /// ray `(lambda, t)` of segment `n`, preserving `(alpha, s)`.
    pub fn map_to_prev(&self, lambda: f64, t: f64) -> Result<(f64, f64)> {
        self.map_by_angle(lambda, t, -self.delta_theta)
    }

    /// Coordinates in the next segment (`n+1`) of the identical physical ray.
    pub fn map_to_next(&self, lambda: f64, t: f64) -> Result<(f64, f64)> {
        self.map_by_angle(lambda, t, self.delta_theta)
    }

    /// Ray re-parameterization under a frame-angle offset `dtheta`
    /// (`theta_new - theta_old`): the local fan angle shifts by `-dtheta`
    /// so that the world-referenced `(alpha, s)` are preserved.
    fn map_by_angle(&self, lambda: f64, t: f64, dtheta: f64) -> Result<(f64, f64)> {
        let d = lambda - t;
        let a = (d / self.l).atan() - dtheta;
        if a.abs() >= PI / 2.0 - 1e-12 {
            return Err(Error::Geometry(format!(
                "ray (lambda={lambda}, t={t}) is parallel to the mapped frame's detector"
            )));
        }
        let d_new = self.l * a.tan();
        let t_new = t * ((d_new * d_new + self.l * self.l) / (d * d + self.l * self.l)).sqrt();
        Ok((t_new + d_new, t_new))
    }

    /// True iff `(lambda, t)` lies in the valid projection domain of one
    /// segment: `|lambda| <= lambda_m` and the physical `u` within the detector.
    pub fn valid_region_contains(&self, lambda: f64, t: f64) -> bool {
        // Tiny relative slack keeps boundary samples stable under the
        // round-trip rounding of the overlap maps.
        let eps_l = 1e-9 * (1.0 + self.lambda_m);
        let eps_u = 1e-9 * (1.0 + self.u_m);
        lambda.abs() <= self.lambda_m + eps_l && self.t_to_u(lambda, t).abs() <= self.u_m + eps_u
    }

    /// Largest `|t|` reached by valid rays: intersection of the
    /// `(lambda_m, u_m)` ray with the t-axis.
    pub fn t_max(&self) -> f64 {
        self.u_to_t(self.lambda_m, self.u_m)
    }
}

/// `world = [x', y'] * R(theta)` with the row-vector convention of the
/// source-trajectory formula.
pub fn world_from_frame(theta: f64, frame_point: [f64; 2]) -> [f64; 2] {
    let (sin, cos) = theta.sin_cos();
    let [a, b] = frame_point;
    [a * cos - b * sin, a * sin + b * cos]
}

/// Inverse of [`world_from_frame`].
pub fn frame_from_world(theta: f64, world_point: [f64; 2]) -> [f64; 2] {
    let (sin, cos) = theta.sin_cos();
    let [x, y] = world_point;
    [x * cos + y * sin, -x * sin + y * cos]
}
