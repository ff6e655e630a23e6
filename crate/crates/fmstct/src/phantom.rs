//! Analytic ellipse phantoms, rasterization and exact line integrals.
//!
//! Densities are additive: overlapping ellipses sum, so rings are built from
//! a positive outline plus a negative interior.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One ellipse: center, semi-axes, tilt and additive density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    /// Semi-axis along the tilted x direction (mm), `> 0`.
    pub a: f64,
    /// Semi-axis along the tilted y direction (mm), `> 0`.
    pub b: f64,
    /// Tilt angle (radians, counter-clockwise).
    pub tilt: f64,
    /// Additive attenuation.
    pub density: f64,
}

impl Ellipse {
    /// True iff the world point lies inside (or on) the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (sin, cos) = self.tilt.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let xr = (dx * cos + dy * sin) / self.a;
        let yr = (-dx * sin + dy * cos) / self.b;
        xr * xr + yr * yr <= 1.0
    }

    /// Chord length of the ray `p0 + tau*dir` (with `|dir| = 1`) inside the
    /// ellipse, in world units.
    pub fn chord(&self, p0: [f64; 2], dir: [f64; 2]) -> f64 {
        let (sin, cos) = self.tilt.sin_cos();
        let dx = p0[0] - self.cx;
        let dy = p0[1] - self.cy;
        let ox = (dx * cos + dy * sin) / self.a;
        let oy = (-dx * sin + dy * cos) / self.b;
        let vx = (dir[0] * cos + dir[1] * sin) / self.a;
        let vy = (-dir[0] * sin + dir[1] * cos) / self.b;
        let qa = vx * vx + vy * vy;
        let qb = 2.0 * (ox * vx + oy * vy);
        let qc = ox * ox + oy * oy - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 || qa == 0.0 {
            return 0.0;
        }
        // Roots are in ray-parameter units, which equal world arc length
        // because dir is unit length before the affine transform.
        disc.sqrt() / qa
    }
}

/// A list of ellipses plus the bounding half-size of the phantom square.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub ellipses: Vec<Ellipse>,
    /// Half-size of the bounding square (mm).
    pub half_size: f64,
}

impl PhantomSpec {
    pub fn new(ellipses: Vec<Ellipse>, half_size: f64) -> Result<Self> {
        for (i, e) in ellipses.iter().enumerate() {
            if !(e.a > 0.0 && e.b > 0.0) {
                return Err(Error::Argument(format!("ellipse {i}: semi-axes must be positive")));
            }
            let reach = e.a.max(e.b);
            if (e.cx.abs() + reach) > half_size * (1.0 + 1e-9)
                || (e.cy.abs() + reach) > half_size * (1.0 + 1e-9)
            {
                return Err(Error::Argument(format!(
                    "ellipse {i} does not fit inside the bounding square of half-size {half_size}"
                )));
            }
        }
        Ok(PhantomSpec { ellipses, half_size })
    }

    /// Sum of ellipse densities at a world point.
    pub fn density_at(&self, x: f64, y: f64) -> f64 {
        self.ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.density)
            .sum()
    }

    /// Maximum density over the phantom, sampled on ellipse centers and the
    /// origin. Exact for nested/disjoint layouts used here.
    pub fn max_density(&self) -> f64 {
        let mut m: f64 = self.density_at(0.0, 0.0);
        for e in &self.ellipses {
            m = m.max(self.density_at(e.cx, e.cy));
        }
        m
    }

    /// The same phantom scaled uniformly about the origin.
    pub fn scaled(&self, factor: f64) -> PhantomSpec {
        PhantomSpec {
            ellipses: self
                .ellipses
                .iter()
                .map(|e| Ellipse {
                    cx: e.cx * factor,
                    cy: e.cy * factor,
                    a: e.a * factor,
                    b: e.b * factor,
                    tilt: e.tilt,
                    density: e.density,
                })
                .collect(),
            half_size: self.half_size * factor,
        }
    }

    /// Exact line integral along the ray through `p0` and `p1`
    /// (attenuation times length). A degenerate ray integrates to zero.
    pub fn line_integral(&self, p0: [f64; 2], p1: [f64; 2]) -> f64 {
        let dx = p1[0] - p0[0];
        let dy = p1[1] - p0[1];
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            return 0.0;
        }
        let dir = [dx / len, dy / len];
        self.ellipses.iter().map(|e| e.chord(p0, dir) * e.density).sum()
    }

    /// Parses the plain-text spec format: a `halfsize <mm>` header line, then
    /// one ellipse per line as `cx cy a b tilt_deg density`. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut half_size = None;
        let mut ellipses = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let first = fields.next().unwrap();
            if first.eq_ignore_ascii_case("halfsize") {
                let v = fields
                    .next()
                    .ok_or_else(|| Error::Argument(format!("line {}: halfsize needs a value", lineno + 1)))?;
                half_size = Some(v.parse::<f64>().map_err(|_| {
                    Error::Argument(format!("line {}: bad halfsize value `{v}`", lineno + 1))
                })?);
                continue;
            }
            let mut nums = Vec::with_capacity(6);
            nums.push(first.parse::<f64>().map_err(|_| {
                Error::Argument(format!("line {}: expected number, got `{first}`", lineno + 1))
            })?);
            for v in fields {
                nums.push(v.parse::<f64>().map_err(|_| {
                    Error::Argument(format!("line {}: expected number, got `{v}`", lineno + 1))
                })?);
            }
            if nums.len() != 6 {
                return Err(Error::Argument(format!(
                    "line {}: expected `cx cy a b tilt_deg density`, got {} fields",
                    lineno + 1,
                    nums.len()
                )));
            }
            ellipses.push(Ellipse {
                cx: nums[0],
                cy: nums[1],
                a: nums[2],
                b: nums[3],
                tilt: nums[4].to_radians(),
                density: nums[5],
            });
        }
        let half_size =
            half_size.ok_or_else(|| Error::Argument("missing `halfsize` header line".into()))?;
        PhantomSpec::new(ellipses, half_size)
    }

    pub fn load(path: &Path) -> Result<Self> {
        PhantomSpec::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "halfsize {}", self.half_size);
        let _ = writeln!(out, "# cx cy a b tilt_deg density");
        for e in &self.ellipses {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                e.cx,
                e.cy,
                e.a,
                e.b,
                e.tilt.to_degrees(),
                e.density
            );
        }
        out
    }
}

/// Rasterized image on a square-pixel grid centered on the rotation center.
///
/// Row 0 is the top of the image (largest `y`); values are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    /// Pixel size (mm).
    pub pixel_size: f64,
    pub data: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        if pixel_size <= 0.0 {
            return Err(Error::Argument(format!("pixel size must be positive, got {pixel_size}")));
        }
        Ok(ImageGrid { width, height, pixel_size, data: vec![0.0; width * height] })
    }

    /// Grid of `n x n` pixels covering the square of the given half-size.
    pub fn covering(n: usize, half_size: f64) -> Result<Self> {
        ImageGrid::zeros(n, n, 2.0 * half_size / n as f64)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    /// World coordinates of the pixel center.
    #[inline]
    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            (col as f64 - (self.width as f64 - 1.0) / 2.0) * self.pixel_size,
            ((self.height as f64 - 1.0) / 2.0 - row as f64) * self.pixel_size,
        ]
    }

    /// Half-extent of the grid in world units.
    pub fn half_size(&self) -> f64 {
        self.width.max(self.height) as f64 * self.pixel_size / 2.0
    }

    /// Bilinear sample at a world point; outside the pixel-center hull the
    /// value is clamped to the edge.
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let fc = x / self.pixel_size + (self.width as f64 - 1.0) / 2.0;
        let fr = (self.height as f64 - 1.0) / 2.0 - y / self.pixel_size;
        let fc = fc.clamp(0.0, (self.width - 1) as f64);
        let fr = fr.clamp(0.0, (self.height - 1) as f64);
        let c0 = fc.floor() as usize;
        let r0 = fr.floor() as usize;
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let wc = fc - c0 as f64;
        let wr = fr - r0 as f64;
        (1.0 - wr) * ((1.0 - wc) * self.get(r0, c0) + wc * self.get(r0, c1))
            + wr * ((1.0 - wc) * self.get(r1, c0) + wc * self.get(r1, c1))
    }

    /// Like [`ImageGrid::sample_clamped`] but zero outside the grid.
    pub fn sample_zero(&self, x: f64, y: f64) -> f64 {
        let half_w = self.width as f64 * self.pixel_size / 2.0;
        let half_h = self.height as f64 * self.pixel_size / 2.0;
        if x.abs() > half_w || y.abs() > half_h {
            0.0
        } else {
            self.sample_clamped(x, y)
        }
    }
}

/// Rasterizes the phantom onto the grid descriptor: each pixel takes the sum
/// of densities at its center, or the average over `supersample^2` subsamples
/// when `supersample > 1`.
pub fn rasterize(spec: &PhantomSpec, mut grid: ImageGrid, supersample: u32) -> ImageGrid {
    let ss = supersample.max(1) as usize;
    let px = grid.pixel_size;
    for row in 0..grid.height {
        for col in 0..grid.width {
            let [cx, cy] = grid.pixel_center(row, col);
            let mut acc = 0.0;
            for sy in 0..ss {
                for sx in 0..ss {
                    let x = cx + ((sx as f64 + 0.5) / ss as f64 - 0.5) * px;
                    let y = cy + ((sy as f64 + 0.5) / ss as f64 - 0.5) * px;
                    acc += spec.density_at(x, y);
                }
            }
            grid.set(row, col, acc / (ss * ss) as f64);
        }
    }
    grid
}
