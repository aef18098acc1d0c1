//! Gaussian-kernel marginal models.

use crate::special::{norm_cdf, norm_ln_pdf};
use crate::{clamp_unit, Error, Result};
use serde::{Deserialize, Serialize};

const MIN_OBS: usize = 10;
const GRID_POINTS: usize = 256;
/// Kernel contributions beyond this many bandwidths are treated as 0 or 1.
const WINDOW: f64 = 8.5;
/// Support extension past the sample range, in bandwidths.
const EXTENSION: f64 = 4.0;

/// Kernel density estimate with Silverman's bandwidth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MarginRepr", into = "MarginRepr")]
pub struct MarginalModel {
    sample: Vec<f64>,
    bandwidth: f64,
    grid: Vec<f64>,
    cdf_grid: Vec<f64>,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct MarginRepr {
    sample: Vec<f64>,
    bandwidth: f64,
}

impl TryFrom<MarginRepr> for MarginalModel {
    type Error = Error;
    fn try_from(s: MarginRepr) -> Result<Self> {
        MarginalModel::with_bandwidth(s.sample, s.bandwidth)
    }
}

impl From<MarginalModel> for MarginRepr {
    fn from(m: MarginalModel) -> Self {
        MarginRepr {
            sample: m.sample,
            bandwidth: m.bandwidth,
        }
    }
}

impl PartialEq for MarginalModel {
    fn eq(&self, other: &Self) -> bool {
        self.sample == other.sample && self.bandwidth == other.bandwidth
    }
}

/// Type-7 sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Silverman's rule `1.06 * min(sd, IQR / 1.34) * n^(-1/5)`; falls back to
/// the standard deviation when the IQR vanishes.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let sd = std_dev(sorted);
    let iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    1.06 * spread * (sorted.len() as f64).powf(-0.2)
}

/// Fits a kernel density estimate to `x`.
pub fn kde_fit(x: &[f64]) -> Result<MarginalModel> {
    if x.len() < MIN_OBS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_OBS} observations for a margin, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in margin sample".into()));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("constant margin sample".into()));
    }
    let bw = silverman_bandwidth(&sorted);
    MarginalModel::from_sorted(sorted, bw)
}

impl MarginalModel {
    /// Builds a model with a given bandwidth; the sample need not be sorted.
    pub fn with_bandwidth(mut sample: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if sample.is_empty() || sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("margin sample must be non-empty and finite".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        sample.sort_by(f64::total_cmp);
        Self::from_sorted(sample, bandwidth)
    }

    fn from_sorted(sample: Vec<f64>, bandwidth: f64) -> Result<Self> {
        let lo = sample[0] - EXTENSION * bandwidth;
        let hi = sample[sample.len() - 1] + EXTENSION * bandwidth;
        let mut m = MarginalModel {
            scale: hi - lo,
            sample,
            bandwidth,
            grid: Vec::new(),
            cdf_grid: Vec::new(),
        };
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        m.grid = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
        m.cdf_grid = m.grid.iter().map(|&g| m.cdf(g)).collect();
        Ok(m)
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn support_grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf_grid(&self) -> &[f64] {
        &self.cdf_grid
    }

    /// Sample indices whose kernels are neither saturated nor negligible at `x`.
    fn window(&self, x: f64) -> (usize, usize) {
        let r = WINDOW * self.bandwidth;
        let a = self.sample.partition_point(|&s| s < x - r);
        let b = self.sample.partition_point(|&s| s <= x + r);
        (a, b)
    }

    /// Unclamped kernel CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let (a, b) = self.window(x);
        let h = self.bandwidth;
        let inner: f64 = self.sample[a..b].iter().map(|&s| norm_cdf((x - s) / h)).sum();
        (a as f64 + inner) / self.sample.len() as f64
    }

    /// Probability integral transform, clamped to the open unit interval.
    pub fn pit(&self, x: f64) -> f64 {
        clamp_unit(self.cdf(x))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (a, b) = self.window(x);
        let h = self.bandwidth;
        let s: f64 = self.sample[a..b]
            .iter()
            .map(|&s| norm_ln_pdf((x - s) / h).exp())
            .sum();
        s / (self.sample.len() as f64 * h)
    }

    /// Log-density; far outside the sample it falls back to the nearest kernel.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = self.pdf(x);
        if d > 0.0 {
            return d.ln();
        }
        let h = self.bandwidth;
        let nearest = if x < self.sample[0] {
            self.sample[0]
        } else {
            self.sample[self.sample.len() - 1]
        };
        norm_ln_pdf((x - nearest) / h) - (self.sample.len() as f64 * h).ln()
    }

    /// Inverse of [`MarginalModel::cdf`].
    pub fn quantile(&self, p: f64) -> f64 {
        let p = clamp_unit(p);
        let tol = 1e-10 * self.scale;
        let k = self.cdf_grid.partition_point(|&c| c < p);
        let (mut lo, mut hi) = if k == 0 {
            let mut lo = self.grid[0] - self.bandwidth;
            while self.cdf(lo) > p {
                lo -= 2.0 * (self.grid[0] - lo);
            }
            (lo, self.grid[0])
        } else if k == self.grid.len() {
            let last = self.grid[self.grid.len() - 1];
            let mut hi = last + self.bandwidth;
            while self.cdf(hi) < p {
                hi += 2.0 * (hi - last);
            }
            (last, hi)
        } else {
            (self.grid[k - 1], self.grid[k])
        };
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= tol {
                break;
            }
            let d = self.pdf(x);
            let next = x - f / d;
            x = if next.is_finite() && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= tol * 1e-2 && (f / d).abs() <= tol {
                break;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ecdf(x: &[f64], t: f64) -> f64 {
        x.iter().filter(|&&v| v <= t).count() as f64 / x.len() as f64
    }

    #[test]
    fn cdf_at_true_median() {
        let x = normals(1000, 1);
        let m = kde_fit(&x).unwrap();
        let c = m.cdf(0.0);
        assert!((0.47..=0.53).contains(&c));
        assert!((c - ecdf(&x, 0.0)).abs() < 0.03);
    }

    #[test]
    fn constant_sample_is_rejected() {
        assert!(matches!(kde_fit(&[3.0; 50]), Err(Error::Degenerate(_))));
        assert!(kde_fit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn roundtrip_on_three_point_sample() {
        let x: Vec<f64> = (0..100).map(|i| [-1.0, 0.0, 1.0][i % 3]).collect();
        let m = kde_fit(&x).unwrap();
        for &v in &[-0.9, -0.3, 0.0, 0.4, 0.95] {
            assert!((m.quantile(m.cdf(v)) - v).abs() < 1e-6);
        }
    }

    #[test]
    fn tails_and_median() {
        let x = normals(500, 4);
        let m = kde_fit(&x).unwrap();
        let min = m.sample()[0];
        let max = *m.sample().last().unwrap();
        assert!(m.pit(min - 10.0 * m.bandwidth()) <= 0.01);
        assert!(m.pit(max + 10.0 * m.bandwidth()) >= 0.99);
        assert_eq!(m.pit(f64::INFINITY), 1.0 - crate::EPS_UNIT);
        assert_eq!(m.pit(f64::NEG_INFINITY), crate::EPS_UNIT);
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let med = 0.5 * (sorted[249] + sorted[250]);
        assert!((m.pit(med) - 0.5).abs() < 0.05);
        assert!((m.quantile(0.5) - med).abs() < 0.1);
    }

    #[test]
    fn grid_invariants() {
        let m = kde_fit(&normals(300, 2)).unwrap();
        let g = m.cdf_grid();
        assert!(g[0] < 0.01 && g[g.len() - 1] > 0.99);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(m.bandwidth() > 0.0);
    }

    #[test]
    fn close_to_normal_cdf() {
        let m = kde_fit(&normals(2000, 3)).unwrap();
        let worst = (1..=41)
            .map(|i| -3.0 + 6.0 * i as f64 / 42.0)
            .map(|x| (m.pit(x) - norm_cdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.03, "{worst}");
    }

    #[test]
    fn silverman_matches_hand_computation() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        // sd = 3.02765, IQR = 4.5 -> min(sd, 3.35821) = sd
        let expected = 1.06 * 3.027_650_354_097_491_7 * 10f64.powf(-0.2);
        assert!((silverman_bandwidth(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn serde_keeps_sample_and_bandwidth() {
        let m = kde_fit(&normals(50, 9)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"bandwidth\"") && !s.contains("grid"));
        let back: MarginalModel = serde_json::from_str(&s).unwrap();
        assert!(back == m);
        assert_eq!(back.cdf(0.3).to_bits(), m.cdf(0.3).to_bits());
    }

    proptest! {
        #[test]
        fn prop_pit_quantile_roundtrip(seed in 0u64..500, p in 0.001f64..0.999) {
            let m = kde_fit(&normals(60, seed)).unwrap();
            let x = m.quantile(p);
            prop_assert!((m.cdf(x) - p).abs() < 1e-8);
            prop_assert!((m.quantile(m.pit(x)) - x).abs() < 1e-6 * m.scale);
        }

        #[test]
        fn prop_quantile_monotone(seed in 0u64..200, p in 0.0f64..1.0, dp in 0.0f64..0.1) {
            let m = kde_fit(&normals(40, seed)).unwrap();
            prop_assert!(m.quantile(p) <= m.quantile((p + dp).min(1.0)));
        }

        #[test]
        fn prop_pit_in_open_interval(seed in 0u64..200, x in -1e6f64..1e6) {
            let m = kde_fit(&normals(30, seed)).unwrap();
            let u = m.pit(x);
            prop_assert!((crate::EPS_UNIT..=1.0 - crate::EPS_UNIT).contains(&u));
        }
    }
}
