//! Image-quality metrics: PSNR, single-scale SSIM, line profiles and a
//! FOV-boundary annulus error statistic.

use crate::error::{Error, Result};
use crate::phantom::ImageGrid;

fn check_dims(a: &ImageGrid, b: &ImageGrid) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "image dimensions disagree: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB: `10 log10(peak^2 / MSE)` with the peak
/// taken from `truth` over the mask. Identical inputs give `+inf`.
pub fn psnr(recon: &ImageGrid, truth: &ImageGrid, mask: Option<&[bool]>) -> Result<f64> {
    check_dims(recon, truth)?;
    if let Some(m) = mask {
        if m.len() != truth.data.len() {
            return Err(Error::Dimension(format!(
                "mask length {} does not match image size {}",
                m.len(),
                truth.data.len()
            )));
        }
    }
    let mut peak = f64::NEG_INFINITY;
    let mut mse = 0.0;
    let mut count = 0usize;
    for k in 0..truth.data.len() {
        if mask.map_or(true, |m| m[k]) {
            peak = peak.max(truth.data[k]);
            let d = recon.data[k] - truth.data[k];
            mse += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Argument("empty mask".into()));
    }
    mse /= count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Single-scale SSIM with a sliding 8x8 uniform window, stabilizers
/// `C1 = (0.01 range)^2`, `C2 = (0.03 range)^2` with `range` the value range
/// of `truth`; mean over all window positions.
pub fn ssim(recon: &ImageGrid, truth: &ImageGrid) -> Result<f64> {
    check_dims(recon, truth)?;
    const W: usize = 8;
    if recon.width < W || recon.height < W {
        return Err(Error::Argument(format!(
            "SSIM needs at least {W}x{W} images, got {}x{}",
            recon.width, recon.height
        )));
    }
    let range = {
        let max = truth.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = truth.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let r = max - min;
        if r > 0.0 { r } else { 1.0 }
    };
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let np = (W * W) as f64;
    let mut sum = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=recon.height - W {
        for c0 in 0..=recon.width - W {
            let (mut mx, mut my) = (0.0, 0.0);
            for r in r0..r0 + W {
                for c in c0..c0 + W {
                    mx += recon.get(r, c);
                    my += truth.get(r, c);
                }
            }
            mx /= np;
            my /= np;
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for r in r0..r0 + W {
                for c in c0..c0 + W {
                    let dx = recon.get(r, c) - mx;
                    let dy = truth.get(r, c) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cov += dx * dy;
                }
            }
            vx /= np - 1.0;
            vy /= np - 1.0;
            cov /= np - 1.0;
            sum += (2.0 * mx * my + c1) * (2.0 * cov + c2)
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            windows += 1;
        }
    }
    Ok(sum / windows as f64)
}

/// Values of one image row over an inclusive column range, as `(col, value)`.
pub fn profile(img: &ImageGrid, row: usize, cols: std::ops::Range<usize>) -> Result<Vec<(usize, f64)>> {
    if row >= img.height || cols.end > img.width || cols.start >= cols.end {
        return Err(Error::Argument(format!(
            "profile range out of bounds: row {row}, cols {}..{} in {}x{}",
            cols.start, cols.end, img.width, img.height
        )));
    }
    Ok(cols.map(|c| (c, img.get(row, c))).collect())
}

/// RMS error over the annulus of radii `[(1-band) R, R]` around the origin.
pub fn edge_annulus_error(recon: &ImageGrid, truth: &ImageGrid, r: f64, band: f64) -> Result<f64> {
    check_dims(recon, truth)?;
    if !(band > 0.0 && band < 0.5) {
        return Err(Error::Argument(format!("band must be in (0, 0.5), got {band}")));
    }
    let inner = (1.0 - band) * r;
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in 0..truth.height {
        for col in 0..truth.width {
            let [x, y] = truth.pixel_center(row, col);
            let rad = (x * x + y * y).sqrt();
            if rad >= inner && rad <= r {
                let d = recon.get(row, col) - truth.get(row, col);
                sum += d * d;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Argument(format!(
            "annulus [{inner}, {r}] contains no pixel centers"
        )));
    }
    Ok((sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn filled(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> ImageGrid {
        let mut g = ImageGrid::covering(n, 1.0).unwrap();
        for r in 0..n {
            for c in 0..n {
                g.set(r, c, f(r, c));
            }
        }
        g
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = filled(16, |r, c| (r * c) as f64);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_error_closed_form() {
        let truth = filled(16, |r, c| if r == 0 && c == 0 { 1.0 } else { 0.5 });
        let recon = filled(16, |r, c| truth.get(r, c) + 0.1);
        assert_abs_diff_eq!(psnr(&recon, &truth, None).unwrap(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn psnr_matches_direct_reference() {
        let mut rng = StdRng::seed_from_u64(5);
        let truth = filled(12, |_, _| rng.gen_range(0.0..2.0));
        let mut rng = StdRng::seed_from_u64(6);
        let recon = filled(12, |_, _| rng.gen_range(0.0..2.0));
        let peak = truth.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mse: f64 = truth
            .data
            .iter()
            .zip(&recon.data)
            .map(|(t, r)| (t - r) * (t - r))
            .sum::<f64>()
            / truth.data.len() as f64;
        let expect = 10.0 * (peak * peak / mse).log10();
        assert_abs_diff_eq!(psnr(&recon, &truth, None).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn psnr_mask_restricts_domain() {
        let truth = filled(8, |_, _| 1.0);
        let mut recon = truth.clone();
        recon.set(0, 0, 5.0); // outside the mask below
        let mask: Vec<bool> = (0..64).map(|k| k != 0).collect();
        assert_eq!(psnr(&recon, &truth, Some(&mask)).unwrap(), f64::INFINITY);
        assert!(psnr(&recon, &truth, None).unwrap().is_finite());
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = filled(16, |r, c| ((r + 2 * c) % 5) as f64);
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_anticorrelated_is_negative() {
        let truth = filled(16, |r, c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
        let recon = filled(16, |r, c| -truth.get(r, c));
        assert!(ssim(&recon, &truth).unwrap() < 0.0);
    }

    #[test]
    fn ssim_matches_windowed_formula() {
        let mut rng = StdRng::seed_from_u64(9);
        let truth = filled(10, |_, _| rng.gen_range(0.0..1.0));
        let mut rng = StdRng::seed_from_u64(10);
        let recon = filled(10, |_, _| rng.gen_range(0.0..1.0));
        // Independent brute-force evaluation.
        let max = truth.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = truth.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let c1 = (0.01 * (max - min)).powi(2);
        let c2 = (0.03 * (max - min)).powi(2);
        let mut acc = 0.0;
        let mut n_win = 0;
        for r0 in 0..=2usize {
            for c0 in 0..=2usize {
                let xs: Vec<f64> =
                    (0..64).map(|k| recon.get(r0 + k / 8, c0 + k % 8)).collect();
                let ys: Vec<f64> =
                    (0..64).map(|k| truth.get(r0 + k / 8, c0 + k % 8)).collect();
                let mx = xs.iter().sum::<f64>() / 64.0;
                let my = ys.iter().sum::<f64>() / 64.0;
                let vx = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / 63.0;
                let vy = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / 63.0;
                let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / 63.0;
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2)
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                n_win += 1;
            }
        }
        assert_abs_diff_eq!(ssim(&recon, &truth).unwrap(), acc / n_win as f64, epsilon = 1e-12);
    }

    #[test]
    fn psnr_monotone_under_growing_noise() {
        let truth = filled(32, |r, c| ((r as f64 - 16.0).hypot(c as f64 - 16.0) < 10.0) as u8 as f64);
        let mut last = f64::INFINITY;
        for amp_step in 1..=5 {
            let amp = 0.02 * amp_step as f64;
            let mut rng = StdRng::seed_from_u64(40);
            let noisy = filled(32, |r, c| truth.get(r, c) + rng.gen_range(-amp..amp));
            let p = psnr(&noisy, &truth, None).unwrap();
            assert!(p < last, "PSNR not decreasing: {p} vs {last}");
            last = p;
        }
    }

    #[test]
    fn profile_examples() {
        let constant = filled(8, |_, _| 2.5);
        let series = profile(&constant, 3, 1..6).unwrap();
        assert_eq!(series.len(), 5);
        assert!(series.iter().all(|&(_, v)| v == 2.5));
        let ramp = filled(8, |_, c| 3.0 * c as f64);
        let series = profile(&ramp, 0, 0..8).unwrap();
        for (k, &(c, v)) in series.iter().enumerate() {
            assert_eq!(c, k);
            assert_abs_diff_eq!(v, 3.0 * k as f64);
        }
        assert!(profile(&ramp, 8, 0..4).is_err());
        assert!(profile(&ramp, 0, 4..12).is_err());
        assert!(profile(&ramp, 0, 4..4).is_err());
    }

    #[test]
    fn edge_annulus_examples() {
        let truth = filled(64, |_, _| 1.0);
        assert_abs_diff_eq!(edge_annulus_error(&truth, &truth, 0.9, 0.1).unwrap(), 0.0);
        // Ring artifact of amplitude a confined to the annulus.
        let a = 0.3;
        let recon = filled(64, |r, c| {
            let g = ImageGrid::covering(64, 1.0).unwrap();
            let [x, y] = g.pixel_center(r, c);
            let rad = (x * x + y * y).sqrt();
            if rad >= 0.81 && rad <= 0.9 { 1.0 + a } else { 1.0 }
        });
        let rms = edge_annulus_error(&recon, &truth, 0.9, 0.1).unwrap();
        assert_abs_diff_eq!(rms, a, epsilon = 1e-12);
        assert!(edge_annulus_error(&recon, &truth, 0.9, 0.6).is_err());
        assert!(edge_annulus_error(&recon, &truth, 0.001, 0.1).is_err());
    }
}
