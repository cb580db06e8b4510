//! Image-quality scoring against a reference rendering: MSE and PSNR over
//! 8-bit RGB channels, SSIM over luminance with the standard 11x11 Gaussian
//! window, and a per-pixel error heatmap.
//!
//! Alpha is excluded everywhere: comparisons run on displayed images that
//! are already composited onto a background.

use thiserror::Error;

use crate::image::ImageRgba;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("image {w}x{h} too small for the {window}x{window} SSIM window")]
    TooSmall { w: usize, h: usize, window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    /// Decibels; `f64::INFINITY` when the images are identical.
    pub psnr: f64,
    pub ssim: f64,
}

impl std::fmt::Display for QualityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "mse={} psnr={} ssim={}", self.mse, self.psnr, self.ssim)
    }
}

fn check_dims(a: &ImageRgba, b: &ImageRgba) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    Ok(())
}

/// Mean squared error over pixels and RGB channels (8-bit units).
pub fn mse(a: &ImageRgba, b: &ImageRgba) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let mut acc = 0.0f64;
    for (pa, pb) in a.pixels().chunks_exact(4).zip(b.pixels().chunks_exact(4)) {
        for c in 0..3 {
            let d = pa[c] as f64 - pb[c] as f64;
            acc += d * d;
        }
    }
    let n = (a.width() * a.height() * 3) as f64;
    Ok(acc / n)
}

/// Peak signal-to-noise ratio in dB; identical images report infinity.
pub fn psnr(a: &ImageRgba, b: &ImageRgba) -> Result<f64, MetricError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (255.0f64 * 255.0 / m).log10())
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn luminance(img: &ImageRgba) -> Vec<f64> {
    img.pixels()
        .chunks_exact(4)
        .map(|p| LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64)
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur, full image (edges use zero padding; only the
/// valid interior is read afterwards).
fn blur(src: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let half = SSIM_WINDOW / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                let xi = x as isize + k as isize - half as isize;
                if xi >= 0 && (xi as usize) < w {
                    acc += kw * src[y * w + xi as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                let yi = y as isize + k as isize - half as isize;
                if yi >= 0 && (yi as usize) < h {
                    acc += kw * tmp[yi as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean structural similarity over all fully-interior window positions.
pub fn ssim(a: &ImageRgba, b: &ImageRgba) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall {
            w,
            h,
            window: SSIM_WINDOW,
        });
    }
    let la = luminance(a);
    let lb = luminance(b);
    let kernel = gaussian_kernel();

    let mu_a = blur(&la, w, h, &kernel);
    let mu_b = blur(&lb, w, h, &kernel);
    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let e_aa = blur(&aa, w, h, &kernel);
    let e_bb = blur(&bb, w, h, &kernel);
    let e_ab = blur(&ab, w, h, &kernel);

    let half = SSIM_WINDOW / 2;
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in half..h - half {
        for x in half..w - half {
            let i = y * w + x;
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let s = ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            acc += s;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

pub fn quality_report(a: &ImageRgba, b: &ImageRgba) -> Result<QualityReport, MetricError> {
    Ok(QualityReport {
        mse: mse(a, b)?,
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

/// Monotone black -> red -> yellow -> white map over `t` in `[0, 1]`.
fn heat_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s;
    let (r, g, b) = if t < 1.0 / 3.0 {
        (lerp(0.0, 1.0, t * 3.0), 0.0, 0.0)
    } else if t < 2.0 / 3.0 {
        (1.0, lerp(0.0, 1.0, (t - 1.0 / 3.0) * 3.0), 0.0)
    } else {
        (1.0, 1.0, lerp(0.0, 1.0, (t - 2.0 / 3.0) * 3.0))
    };
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Per-pixel RGB Euclidean error mapped through the fixed colormap; the
/// normalization is the maximum possible error `255 * sqrt(3)`.
pub fn error_heatmap(a: &ImageRgba, b: &ImageRgba) -> Result<ImageRgba, MetricError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    let max_err = 255.0 * 3.0f64.sqrt();
    let mut out = ImageRgba::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let pa = a.get(x, y);
            let pb = b.get(x, y);
            let mut e2 = 0.0;
            for c in 0..3 {
                let d = pa[c] as f64 - pb[c] as f64;
                e2 += d * d;
            }
            let [r, g, bch] = heat_color(e2.sqrt() / max_err);
            out.set(x, y, [r, g, bch, 255]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::SplitMix64;

    fn solid(w: usize, h: usize, rgb: [u8; 3]) -> ImageRgba {
        let mut img = ImageRgba::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, [rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        img
    }

    fn noisy(w: usize, h: usize, seed: u64) -> ImageRgba {
        let mut rng = SplitMix64::new(seed);
        let mut img = ImageRgba::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set(
                    x,
                    y,
                    [
                        rng.next_index(256) as u8,
                        rng.next_index(256) as u8,
                        rng.next_index(256) as u8,
                        255,
                    ],
                );
            }
        }
        img
    }

    /// Windowed SSIM computed the slow way: direct weighted sums per window
    /// position, no separable filtering, no precomputed moment images. The
    /// independent reference for the production implementation.
    fn ssim_reference(a: &ImageRgba, b: &ImageRgba) -> f64 {
        let (w, h) = (a.width(), a.height());
        let la = luminance(a);
        let lb = luminance(b);
        let kernel = gaussian_kernel();
        let half = SSIM_WINDOW / 2;
        let mut acc = 0.0;
        let mut count = 0;
        for cy in half..h - half {
            for cx in half..w - half {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let wgt = kernel[ky] * kernel[kx];
                        let i = (cy + ky - half) * w + cx + kx - half;
                        mu_a += wgt * la[i];
                        mu_b += wgt * lb[i];
                    }
                }
                let mut va = 0.0;
                let mut vb = 0.0;
                let mut cov = 0.0;
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let wgt = kernel[ky] * kernel[kx];
                        let i = (cy + ky - half) * w + cx + kx - half;
                        va += wgt * (la[i] - mu_a) * (la[i] - mu_a);
                        vb += wgt * (lb[i] - mu_b) * (lb[i] - mu_b);
                        cov += wgt * (la[i] - mu_a) * (lb[i] - mu_b);
                    }
                }
                acc += ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn identical_images_score_perfectly() {
        let img = noisy(24, 16, 1);
        assert_eq!(mse(&img, &img).unwrap(), 0.0);
        assert!(psnr(&img, &img).unwrap().is_infinite());
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn black_vs_white_anchors() {
        let black = solid(16, 16, [0, 0, 0]);
        let white = solid(16, 16, [255, 255, 255]);
        assert_eq!(mse(&black, &white).unwrap(), 65025.0);
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    }

    #[test]
    fn single_differing_channel_hand_count() {
        let a = solid(10, 10, [0, 0, 0]);
        let mut b = solid(10, 10, [0, 0, 0]);
        b.set(3, 7, [255, 0, 0, 255]);
        // one channel off by 255 among 10*10*3 channel samples
        assert!((mse(&a, &b).unwrap() - 65025.0 / 300.0).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_dimension_mismatch() {
        let a = solid(8, 8, [1, 2, 3]);
        let b = solid(8, 9, [1, 2, 3]);
        assert!(matches!(
            mse(&a, &b),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = solid(10, 10, [0, 0, 0]);
        assert!(matches!(ssim(&a, &a), Err(MetricError::TooSmall { .. })));
    }

    #[test]
    fn ssim_symmetric() {
        let a = noisy(20, 20, 2);
        let b = noisy(20, 20, 3);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_reference_implementation() {
        // five synthetic pairs of varying character
        let pairs = [
            (solid(16, 16, [128, 128, 128]), solid(16, 16, [138, 138, 138])),
            (noisy(16, 16, 4), noisy(16, 16, 5)),
            (noisy(24, 12, 6), noisy(24, 12, 6)),
            (solid(12, 20, [0, 0, 0]), noisy(12, 20, 7)),
            (noisy(32, 32, 8), solid(32, 32, [200, 40, 90])),
        ];
        for (a, b) in &pairs {
            let fast = ssim(a, b).unwrap();
            let slow = ssim_reference(a, b);
            assert!(
                (fast - slow).abs() < 1e-6,
                "fast {fast} vs reference {slow}"
            );
        }
    }

    #[test]
    fn psnr_decreases_as_mse_grows() {
        let base = solid(16, 16, [100, 100, 100]);
        let mut prev_psnr = f64::INFINITY;
        let mut prev_mse = 0.0;
        for offset in [1u8, 5, 20, 80] {
            let other = solid(16, 16, [100 + offset, 100, 100]);
            let m = mse(&base, &other).unwrap();
            let p = psnr(&base, &other).unwrap();
            assert!(m > prev_mse);
            assert!(p < prev_psnr);
            prev_mse = m;
            prev_psnr = p;
        }
    }

    #[test]
    fn metrics_are_deterministic() {
        let a = noisy(20, 20, 10);
        let b = noisy(20, 20, 11);
        let r1 = quality_report(&a, &b).unwrap();
        let r2 = quality_report(&a, &b).unwrap();
        assert_eq!(r1.mse.to_bits(), r2.mse.to_bits());
        assert_eq!(r1.psnr.to_bits(), r2.psnr.to_bits());
        assert_eq!(r1.ssim.to_bits(), r2.ssim.to_bits());
    }

    #[test]
    fn heatmap_zero_and_max_colors() {
        let a = solid(8, 8, [10, 20, 30]);
        let hm = error_heatmap(&a, &a).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(hm.get(x, y), [0, 0, 0, 255]);
            }
        }
        let black = solid(8, 8, [0, 0, 0]);
        let white = solid(8, 8, [255, 255, 255]);
        let hm = error_heatmap(&black, &white).unwrap();
        assert_eq!(hm.get(4, 4), [255, 255, 255, 255]);
    }

    #[test]
    fn heatmap_symmetric_in_arguments() {
        let a = noisy(12, 12, 20);
        let b = noisy(12, 12, 21);
        assert_eq!(error_heatmap(&a, &b).unwrap(), error_heatmap(&b, &a).unwrap());
    }

    #[test]
    fn quality_report_line_format() {
        let a = solid(16, 16, [0, 0, 0]);
        let b = solid(16, 16, [255, 255, 255]);
        let line = quality_report(&a, &b).unwrap().to_string();
        assert!(line.starts_with("mse=65025 psnr=0 ssim="));
    }
}
