//! Distributional fidelity metrics computed directly on series tensors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeSeriesTensor;

pub const DEFAULT_BINS: usize = 32;

/// Equal-width histogram boundaries per `(timestep, feature)` cell, taken from
/// a designated training tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    n_bins: usize,
    length: usize,
    n_features: usize,
    /// `(low, high)` per cell, index `t * n_features + f`.
    ranges: Vec<(f64, f64)>,
}

impl HistogramSpec {
    /// Uses `[min, max]` of each training cell. A constant cell is widened to
    /// `[v - 0.5, v + 0.5]` so its bins stay strictly increasing.
    pub fn from_training(train: &TimeSeriesTensor, n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid(format!("need at least 2 bins, got {n_bins}")));
        }
        if train.n_samples() == 0 {
            return Err(Error::invalid("training tensor is empty"));
        }
        let (l, f) = (train.length(), train.n_features());
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); l * f];
        for i in 0..train.n_samples() {
            for (cell, &v) in train.sample(i).iter().enumerate() {
                let r = &mut ranges[cell];
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        for r in &mut ranges {
            if r.1 <= r.0 {
                *r = (r.0 - 0.5, r.0 + 0.5);
            }
        }
        Ok(Self { n_bins, length: l, n_features: f, ranges })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn range(&self, t: usize, f: usize) -> (f64, f64) {
        self.ranges[t * self.n_features + f]
    }

    /// Bin of `x` in cell `cell`; values outside the range go to the first or last bin.
    pub fn bin(&self, cell: usize, x: f64) -> usize {
        let (lo, hi) = self.ranges[cell];
        let pos = ((x - lo) / (hi - lo) * self.n_bins as f64).floor();
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(self.n_bins - 1)
        }
    }
}

fn check_pair(real: &TimeSeriesTensor, gen: &TimeSeriesTensor) -> Result<()> {
    if !real.same_series_shape(gen) {
        return Err(Error::shape(format!(
            "real (L={}, F={}) vs generated (L={}, F={})",
            real.length(),
            real.n_features(),
            gen.length(),
            gen.n_features()
        )));
    }
    if real.n_samples() == 0 || gen.n_samples() == 0 {
        return Err(Error::invalid("empty tensor"));
    }
    Ok(())
}

fn cell_histogram(t: &TimeSeriesTensor, spec: &HistogramSpec, cell: usize) -> Vec<f64> {
    let mut h = vec![0.0; spec.n_bins];
    let stride = t.length() * t.n_features();
    for i in 0..t.n_samples() {
        h[spec.bin(cell, t.data()[i * stride + cell])] += 1.0;
    }
    let n = t.n_samples() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Marginal distribution difference: per-cell `(1/B) Σ_b |p_r(b) − p_g(b)|`,
/// averaged over all `(timestep, feature)` cells.
pub fn mdd(real: &TimeSeriesTensor, gen: &TimeSeriesTensor, spec: &HistogramSpec) -> Result<f64> {
    check_pair(real, gen)?;
    if spec.length != real.length() || spec.n_features != real.n_features() {
        return Err(Error::shape("histogram spec does not match the tensor shape"));
    }
    let cells = real.length() * real.n_features();
    let per_cell: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let pr = cell_histogram(real, spec, cell);
            let pg = cell_histogram(gen, spec, cell);
            pr.iter().zip(&pg).map(|(a, b)| (a - b).abs()).sum::<f64>() / spec.n_bins as f64
        })
        .collect();
    Ok(per_cell.iter().sum::<f64>() / cells as f64)
}

/// `ρ_1..ρ_max_lag` of one series; a constant series gives all zeros.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|k| {
            if denom == 0.0 || k >= n {
                return 0.0;
            }
            centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / denom
        })
        .collect()
}

fn mean_profile(t: &TimeSeriesTensor, max_lag: usize) -> Vec<f64> {
    let per_sample: Vec<Vec<f64>> = (0..t.n_samples())
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; max_lag];
            for f in 0..t.n_features() {
                for (a, r) in acc.iter_mut().zip(autocorrelation(&t.channel(i, f), max_lag)) {
                    *a += r;
                }
            }
            acc
        })
        .collect();
    let mut profile = vec![0.0; max_lag];
    for s in &per_sample {
        profile.iter_mut().zip(s).for_each(|(p, v)| *p += v);
    }
    let count = (t.n_samples() * t.n_features()) as f64;
    profile.iter_mut().for_each(|p| *p /= count);
    profile
}

/// Auto-correlation difference: Euclidean distance between the mean
/// autocorrelation profiles (lags `1..=max_lag`, default `L − 1`).
pub fn acd(real: &TimeSeriesTensor, gen: &TimeSeriesTensor, max_lag: Option<usize>) -> Result<f64> {
    check_pair(real, gen)?;
    let l = real.length();
    if l < 2 {
        return Err(Error::invalid("autocorrelation needs length >= 2"));
    }
    let max_lag = max_lag.unwrap_or(l - 1);
    if max_lag == 0 || max_lag >= l {
        return Err(Error::invalid(format!("max_lag must be in [1, {}], got {max_lag}", l - 1)));
    }
    let pr = mean_profile(real, max_lag);
    let pg = mean_profile(gen, max_lag);
    Ok(pr.iter().zip(&pg).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Population skewness and kurtosis of all pooled values.
pub fn pooled_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("no values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::invalid("zero pooled variance"));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

pub fn skewness(values: &[f64]) -> Result<f64> {
    pooled_moments(values).map(|m| m.0)
}

pub fn kurtosis(values: &[f64]) -> Result<f64> {
    pooled_moments(values).map(|m| m.1)
}

/// Skewness difference of the pooled values.
pub fn sd(real: &TimeSeriesTensor, gen: &TimeSeriesTensor) -> Result<f64> {
    Ok((skewness(real.data())? - skewness(gen.data())?).abs())
}

/// Kurtosis difference of the pooled values.
pub fn kd(real: &TimeSeriesTensor, gen: &TimeSeriesTensor) -> Result<f64> {
    Ok((kurtosis(real.data())? - kurtosis(gen.data())?).abs())
}
