//! Image-quality evaluation: PSNR, SSIM, and per-image reports.
//!
//! Conventions (the reference papers leave them open, so they are pinned
//! here): PSNR pools the MSE over all channels jointly; SSIM is computed
//! per channel with a Gaussian window and the per-channel values average;
//! reported means average per-image values, with infinite PSNR entries
//! (identical images) excluded from the mean and counted instead. All
//! arithmetic runs in f64.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

/// SSIM window and stabilization constants. Defaults are the conventional
/// values from the structural-similarity reference implementation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Side of the square Gaussian window; odd, at least 3.
    pub window_px: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Value range of the images (1.0 for unit-range imagery). Also used
    /// as the PSNR peak when evaluating pairs.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window_px: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_px < 3 || self.window_px % 2 == 0 {
            return Err(Error::usage(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window_px
            )));
        }
        if !(self.window_sigma > 0.0) {
            return Err(Error::usage("SSIM window sigma must be > 0"));
        }
        if !(self.k1 > 0.0) || !(self.k2 > 0.0) {
            return Err(Error::usage("SSIM k1 and k2 must be > 0"));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(Error::usage("SSIM dynamic range must be > 0"));
        }
        Ok(())
    }
}

fn require_same_shape(a: &RasterGrid, b: &RasterGrid, what: &str) -> Result<()> {
    if a.height != b.height || a.width != b.width || a.channels != b.channels {
        return Err(Error::usage(format!(
            "{what}: shape mismatch {}x{}x{} vs {}x{}x{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels, MSE pooled over all channels.
/// Identical images return +∞ (`f64::INFINITY`), the defined sentinel.
pub fn psnr(a: &RasterGrid, b: &RasterGrid, max_value: f64) -> Result<f64> {
    require_same_shape(a, b, "psnr")?;
    if !(max_value > 0.0) {
        return Err(Error::usage(format!("PSNR peak must be > 0, got {max_value}")));
    }
    let mut sum_sq = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let d = x as f64 - y as f64;
        sum_sq += d * d;
    }
    let mse = sum_sq / a.values.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / mse).log10())
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product, so
/// it is normalized as well.
fn gaussian_taps(window_px: usize, sigma: f64) -> Vec<f64> {
    let c = (window_px / 2) as f64;
    let mut taps: Vec<f64> = (0..window_px)
        .map(|i| (-((i as f64 - c) * (i as f64 - c)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Valid-mode separable Gaussian filter over an h x w plane.
fn gaussian_filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let win = taps.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    // Rows first: (h, w) -> (h, ow).
    let mut rows = vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * plane[y * w + x + k];
            }
            rows[y * ow + x] = acc;
        }
    }
    // Columns: (h, ow) -> (oh, ow).
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, p: &SsimParams) -> f64 {
    let taps = gaussian_taps(p.window_px, p.window_sigma);
    let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    let c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();

    let mu_a = gaussian_filter_valid(a, h, w, &taps);
    let mu_b = gaussian_filter_valid(b, h, w, &taps);
    let m_aa = gaussian_filter_valid(&aa, h, w, &taps);
    let m_bb = gaussian_filter_valid(&bb, h, w, &taps);
    let m_ab = gaussian_filter_valid(&ab, h, w, &taps);

    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = m_aa[i] - ma * ma;
        let vb = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        sum += num / den;
    }
    sum / mu_a.len() as f64
}

/// Structural similarity, per channel then averaged; symmetric in (a, b)
/// and bounded to [−1, 1].
pub fn ssim(a: &RasterGrid, b: &RasterGrid, params: &SsimParams) -> Result<f64> {
    require_same_shape(a, b, "ssim")?;
    params.validate()?;
    if a.height < params.window_px || a.width < params.window_px {
        return Err(Error::usage(format!(
            "ssim: image {}x{} is smaller than the {} px window",
            a.height, a.width, params.window_px
        )));
    }
    let (h, w, c) = (a.height, a.width, a.channels);
    let mut total = 0.0;
    for ci in 0..c {
        let plane = |g: &RasterGrid| -> Vec<f64> {
            let mut p = vec![0.0f64; h * w];
            for y in 0..h {
                for x in 0..w {
                    p[y * w + x] = g.values[(y * w + x) * c + ci] as f64;
                }
            }
            p
        };
        total += ssim_plane(&plane(a), &plane(b), h, w, params);
    }
    Ok(total / c as f64)
}

mod psnr_serde {
    //! PSNR values serialize as numbers, with the +∞ sentinel spelled
    //! "inf" so records survive JSON (which has no infinity literal).
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad psnr value {s:?}"))),
        }
    }
}

/// Quality of one evaluated image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    /// +∞ means the pair was identical.
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Per-image metrics plus their arithmetic means, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    /// Mean over the finite PSNR entries only.
    pub mean_psnr_db: f64,
    /// How many +∞ PSNR entries the mean excludes.
    pub psnr_excluded: usize,
    pub mean_ssim: f64,
}

impl MetricReport {
    fn from_entries(mut per_image: Vec<ImageMetrics>) -> MetricReport {
        per_image.sort_by(|a, b| a.id.cmp(&b.id));
        let finite: Vec<f64> = per_image
            .iter()
            .map(|m| m.psnr_db)
            .filter(|p| p.is_finite())
            .collect();
        let psnr_excluded = per_image.len() - finite.len();
        let mean_psnr_db = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let mean_ssim =
            per_image.iter().map(|m| m.ssim).sum::<f64>() / per_image.len() as f64;
        MetricReport {
            per_image,
            mean_psnr_db,
            psnr_excluded,
            mean_ssim,
        }
    }

    /// Machine-readable line-delimited records, one image per line.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for m in &self.per_image {
            out.push_str(&serde_json::to_string(m).expect("metrics always serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a report from [`Self::to_records`] output; the means are
    /// recomputed, which by construction reproduces them.
    pub fn from_records(text: &str) -> Result<MetricReport> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let m: ImageMetrics = serde_json::from_str(line).map_err(|e| {
                Error::data(format!("bad metrics record on line {}: {e}", i + 1))
            })?;
            entries.push(m);
        }
        if entries.is_empty() {
            return Err(Error::data("metrics record stream holds no entries"));
        }
        Ok(MetricReport::from_entries(entries))
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<24} {:>10} {:>8}\n", "id", "psnr_db", "ssim"));
        for m in &self.per_image {
            let p = if m.psnr_db.is_finite() {
                format!("{:.3}", m.psnr_db)
            } else {
                "inf".to_string()
            };
            out.push_str(&format!("{:<24} {:>10} {:>8.4}\n", m.id, p, m.ssim));
        }
        out.push_str(&format!(
            "mean: psnr {:.3} dB ({} identical pair(s) excluded), ssim {:.4}\n",
            self.mean_psnr_db, self.psnr_excluded, self.mean_ssim
        ));
        out
    }
}

/// Evaluates (id, sr, hr) triples into a [`MetricReport`]. PSNR uses
/// `params.dynamic_range` as its peak.
pub fn evaluate_pairs(
    pairs: &[(String, &RasterGrid, &RasterGrid)],
    params: &SsimParams,
) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::usage("evaluate_pairs needs at least one image pair"));
    }
    let mut entries = Vec::with_capacity(pairs.len());
    for (id, sr, hr) in pairs {
        entries.push(ImageMetrics {
            id: id.clone(),
            psnr_db: psnr(sr, hr, params.dynamic_range)?,
            ssim: ssim(sr, hr, params)?,
        });
    }
    Ok(MetricReport::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn grid_from(vals: Vec<f32>, h: usize, w: usize, c: usize) -> RasterGrid {
        RasterGrid::new(h, w, c, vals).unwrap()
    }

    fn rand_grid(h: usize, w: usize, c: usize, seed: u64) -> RasterGrid {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f32> = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
        grid_from(vals, h, w, c)
    }

    // -------------------------------------------------------------- psnr

    #[test]
    fn psnr_of_identical_images_is_the_infinity_sentinel() {
        let a = rand_grid(8, 8, 3, 1);
        assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn psnr_uniform_difference_matches_hand_value() {
        // |a - b| = 0.1 on unit range: 20·log10(1/0.1) = 20 dB.
        let a = grid_from(vec![0.0; 64], 8, 8, 1);
        let b = grid_from(vec![0.1; 64], 8, 8, 1);
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 20.0).abs() < 1e-5, "got {p}");

        // MSE 1 at peak 1 is 0 dB.
        let z = grid_from(vec![0.0; 64], 8, 8, 1);
        let o = grid_from(vec![1.0; 64], 8, 8, 1);
        assert_eq!(psnr(&z, &o, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let a = rand_grid(16, 16, 1, 2);
        let mut last = f64::INFINITY;
        for amp in [0.01f32, 0.05, 0.1] {
            let b = grid_from(a.values.iter().map(|v| v + amp).collect(), 16, 16, 1);
            let p = psnr(&a, &b, 1.0).unwrap();
            assert!(p < last, "psnr must fall as amplitude grows");
            last = p;
        }
    }

    #[test]
    fn psnr_rejects_bad_arguments() {
        let a = rand_grid(8, 8, 1, 3);
        let b = rand_grid(8, 9, 1, 3);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    // -------------------------------------------------------------- ssim

    #[test]
    fn ssim_of_identical_images_is_one() {
        let a = rand_grid(16, 16, 3, 4);
        let s = ssim(&a, &a, &SsimParams::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "got {s}");
    }

    #[test]
    fn ssim_constant_images_match_closed_form() {
        // Constant planes: variances and covariance vanish, leaving the
        // luminance term (2·μa·μb + C1)/(μa² + μb² + C1).
        let a = grid_from(vec![0.2; 256], 16, 16, 1);
        let b = grid_from(vec![0.6; 256], 16, 16, 1);
        let p = SsimParams::default();
        let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
        // f32 storage makes the means 0.2f32/0.6f32 exactly.
        let (ma, mb) = (0.2f32 as f64, 0.6f32 as f64);
        let want = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        let got = ssim(&a, &b, &p).unwrap();
        assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
    }

    #[test]
    fn ssim_matches_brute_force_window_oracle() {
        // Independent oracle: explicit 2D Gaussian weights, one double
        // loop per window position, no separable shortcut.
        let p = SsimParams::default();
        let a = rand_grid(16, 16, 1, 5);
        let b = rand_grid(16, 16, 1, 6);

        let win = p.window_px;
        let c = (win / 2) as f64;
        let mut wts = vec![0.0f64; win * win];
        let mut wsum = 0.0;
        for i in 0..win {
            for j in 0..win {
                let d2 = (i as f64 - c) * (i as f64 - c) + (j as f64 - c) * (j as f64 - c);
                let v = (-d2 / (2.0 * p.window_sigma * p.window_sigma)).exp();
                wts[i * win + j] = v;
                wsum += v;
            }
        }
        for v in &mut wts {
            *v /= wsum;
        }
        let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
        let c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
        let (h, w) = (16usize, 16usize);
        let mut sum = 0.0;
        let mut count = 0usize;
        for y0 in 0..=(h - win) {
            for x0 in 0..=(w - win) {
                let (mut ma, mut mb) = (0.0f64, 0.0f64);
                for i in 0..win {
                    for j in 0..win {
                        let wt = wts[i * win + j];
                        ma += wt * a.values[(y0 + i) * w + x0 + j] as f64;
                        mb += wt * b.values[(y0 + i) * w + x0 + j] as f64;
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0f64, 0.0, 0.0);
                for i in 0..win {
                    for j in 0..win {
                        let wt = wts[i * win + j];
                        let da = a.values[(y0 + i) * w + x0 + j] as f64 - ma;
                        let db = b.values[(y0 + i) * w + x0 + j] as f64 - mb;
                        va += wt * da * da;
                        vb += wt * db * db;
                        cov += wt * da * db;
                    }
                }
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        let want = sum / count as f64;
        let got = ssim(&a, &b, &p).unwrap();
        assert!((got - want).abs() < 1e-6, "got {got}, oracle {want}");
    }

    #[test]
    fn ssim_is_exactly_symmetric_and_bounded() {
        for seed in 0..4u64 {
            let a = rand_grid(14, 17, 2, 100 + seed);
            let b = rand_grid(14, 17, 2, 200 + seed);
            let p = SsimParams::default();
            let ab = ssim(&a, &b, &p).unwrap();
            let ba = ssim(&b, &a, &p).unwrap();
            assert_eq!(ab.to_bits(), ba.to_bits(), "symmetry must be exact");
            assert!((-1.0..=1.0).contains(&ab), "ssim {ab} out of bounds");
        }
    }

    #[test]
    fn ssim_rejects_bad_arguments() {
        let a = rand_grid(8, 8, 1, 7);
        let p = SsimParams::default();
        // Smaller than the window.
        assert!(ssim(&a, &a, &p).is_err());
        let mut even = p;
        even.window_px = 10;
        let big = rand_grid(16, 16, 1, 8);
        assert!(ssim(&big, &big, &even).is_err());
    }

    // ------------------------------------------------------------ report

    #[test]
    fn evaluate_pairs_excludes_infinite_psnr_with_count() {
        let a = rand_grid(16, 16, 1, 9);
        let pairs = vec![("only".to_string(), &a, &a)];
        let r = evaluate_pairs(&pairs, &SsimParams::default()).unwrap();
        assert_eq!(r.psnr_excluded, 1);
        assert!(r.mean_psnr_db.is_infinite());
        assert!((r.mean_ssim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_pairs_averages_psnr_and_orders_by_id() {
        // Uniform differences giving 20 dB and 30 dB; the mean is 25.
        let base = grid_from(vec![0.0; 1024], 32, 32, 1);
        let d20 = grid_from(vec![0.1; 1024], 32, 32, 1);
        let amp30 = 10f32.powf(-30.0 / 20.0);
        let d30 = grid_from(vec![amp30; 1024], 32, 32, 1);
        let pairs = vec![
            ("zebra".to_string(), &d20, &base),
            ("aardvark".to_string(), &d30, &base),
        ];
        let r = evaluate_pairs(&pairs, &SsimParams::default()).unwrap();
        assert_eq!(r.per_image[0].id, "aardvark");
        assert_eq!(r.per_image[1].id, "zebra");
        assert!((r.mean_psnr_db - 25.0).abs() < 1e-4, "mean {}", r.mean_psnr_db);
        assert_eq!(r.psnr_excluded, 0);
    }

    #[test]
    fn report_records_round_trip_including_the_sentinel() {
        let a = rand_grid(16, 16, 1, 10);
        let b = grid_from(a.values.iter().map(|v| v + 0.05).collect(), 16, 16, 1);
        let pairs = vec![
            ("noisy".to_string(), &b, &a),
            ("perfect".to_string(), &a, &a),
        ];
        let r = evaluate_pairs(&pairs, &SsimParams::default()).unwrap();
        let text = r.to_records();
        let back = MetricReport::from_records(&text).unwrap();
        assert_eq!(back, r);
        assert!(back.to_table().contains("inf"));
    }

    #[test]
    fn empty_pair_list_is_rejected() {
        assert!(evaluate_pairs(&[], &SsimParams::default()).is_err());
        assert!(MetricReport::from_records("\n\n").is_err());
    }
}
