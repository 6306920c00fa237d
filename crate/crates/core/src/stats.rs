//! Small descriptive-statistics helpers and the shared histogram format.

use std::io::Write;

use serde::{Deserialize, Serialize};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Moment skewness `m3 / m2^1.5`; zero when the variance vanishes.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

/// Linear-interpolated quantile of already sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median; `NaN` for an empty slice.
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    quantile_sorted(&sorted(x), 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<Bin>,
}

impl Histogram {
    /// Bins of fixed `width` anchored at a multiple of `width` below the minimum.
    /// Identical samples give one zero-width bin.
    pub fn with_width(samples: &[f64], width: f64) -> Histogram {
        let Some((lo, hi)) = range(samples) else {
            return Histogram { bins: Vec::new() };
        };
        if hi == lo || !(width > 0.0) {
            return Histogram::single(samples, lo, hi);
        }
        let start = (lo / width).floor() * width;
        let n = (((hi - start) / width).floor() as usize + 1).max(1);
        let mut bins: Vec<Bin> = (0..n)
            .map(|k| Bin {
                left: start + k as f64 * width,
                right: start + (k + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &x in samples {
            let k = (((x - start) / width).floor() as usize).min(n - 1);
            bins[k].count += 1;
        }
        Histogram { bins }
    }

    /// `ceil(sqrt(n))` equal bins (at most 100) spanning the data.
    pub fn auto(samples: &[f64]) -> Histogram {
        let Some((lo, hi)) = range(samples) else {
            return Histogram { bins: Vec::new() };
        };
        if hi == lo {
            return Histogram::single(samples, lo, hi);
        }
        let n = ((samples.len() as f64).sqrt().ceil() as usize).clamp(1, 100);
        let width = (hi - lo) / n as f64;
        let mut bins: Vec<Bin> = (0..n)
            .map(|k| Bin {
                left: lo + k as f64 * width,
                right: if k + 1 == n { hi } else { lo + (k + 1) as f64 * width },
                count: 0,
            })
            .collect();
        for &x in samples {
            let k = (((x - lo) / width).floor() as usize).min(n - 1);
            bins[k].count += 1;
        }
        Histogram { bins }
    }

    fn single(samples: &[f64], lo: f64, hi: f64) -> Histogram {
        Histogram {
            bins: vec![Bin {
                left: lo,
                right: hi,
                count: samples.len(),
            }],
        }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Centre of the most populated bin.
    pub fn mode(&self) -> Option<f64> {
        self.bins
            .iter()
            .max_by_key(|b| b.count)
            .map(|b| 0.5 * (b.left + b.right))
    }

    /// CSV `bin_left,bin_right,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["bin_left", "bin_right", "count"])?;
        for b in &self.bins {
            wtr.write_record([format!("{:e}", b.left), format!("{:e}", b.right), b.count.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn range(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((sample_std(&x) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(skewness(&x), 0.0);
        assert_eq!(median(&x), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 10.0]) > 0.0);
    }

    #[test]
    fn histogram_counts() {
        let x = [0.05, 0.15, 0.15, 0.95, 1.0];
        let h = Histogram::with_width(&x, 0.1);
        assert_eq!(h.total(), 5);
        assert_eq!(h.bins[0].count, 1);
        assert_eq!(h.bins[1].count, 2);
        assert!((h.mode().unwrap() - 0.15).abs() < 1e-12);
        let a = Histogram::auto(&x);
        assert_eq!(a.total(), 5);
        assert_eq!(a.bins.len(), 3);
    }

    #[test]
    fn degenerate_single_bin() {
        let h = Histogram::auto(&[2e-6; 50]);
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].count, 50);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
