//! Reference-anchored adherence metrics: best-of-K DTW and sample-based CRPS.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::TimeSeriesTensor;

/// `K` generated series per reference sample, stored as an `(n·K, L, F)`
/// tensor grouped by sample: row `i·K + k` is the `k`-th draw for sample `i`.
#[derive(Debug, Clone)]
pub struct GenerationBundle {
    samples: TimeSeriesTensor,
    k: usize,
}

impl GenerationBundle {
    pub fn new(samples: TimeSeriesTensor, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be positive"));
        }
        if !samples.n_samples().is_multiple_of(k) {
            return Err(Error::shape(format!("{} rows are not a multiple of K={k}", samples.n_samples())));
        }
        Ok(Self { samples, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_references(&self) -> usize {
        self.samples.n_samples() / self.k
    }

    pub fn tensor(&self) -> &TimeSeriesTensor {
        &self.samples
    }

    /// The `(L, F)` block of the `k`-th draw for reference `i`.
    pub fn draw(&self, i: usize, k: usize) -> &[f64] {
        self.samples.sample(i * self.k + k)
    }

    fn check_against(&self, refs: &TimeSeriesTensor) -> Result<()> {
        if !self.samples.same_series_shape(refs) {
            return Err(Error::shape(format!(
                "bundle series (L={}, F={}) vs references (L={}, F={})",
                self.samples.length(),
                self.samples.n_features(),
                refs.length(),
                refs.n_features()
            )));
        }
        if self.n_references() != refs.n_samples() {
            return Err(Error::shape(format!(
                "bundle holds {} references, expected {}",
                self.n_references(),
                refs.n_samples()
            )));
        }
        if refs.n_samples() == 0 {
            return Err(Error::invalid("no reference samples"));
        }
        Ok(())
    }
}

/// DTW between two row-major sequences of `n_features`-dimensional points,
/// Euclidean local cost, no warping window.
pub fn dtw(x: &[f64], y: &[f64], n_features: usize) -> Result<f64> {
    if n_features == 0 || !x.len().is_multiple_of(n_features) || !y.len().is_multiple_of(n_features) {
        return Err(Error::shape("sequence length is not a multiple of the feature count"));
    }
    let n = x.len() / n_features;
    let m = y.len() / n_features;
    if n == 0 || m == 0 {
        return Err(Error::invalid("DTW needs non-empty sequences"));
    }
    let cost = |i: usize, j: usize| -> f64 {
        let a = &x[i * n_features..(i + 1) * n_features];
        let b = &y[j * n_features..(j + 1) * n_features];
        if n_features == 1 {
            (a[0] - b[0]).abs()
        } else {
            a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
        }
    };
    // Row 0 of the cumulative matrix: D(0,0) = 0, D(0,j) = inf.
    let mut prev = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    let mut cur = vec![f64::INFINITY; m + 1];
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = cost(i - 1, j - 1) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// DTW between two univariate sequences.
pub fn dtw_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    dtw(x, y, 1)
}

/// Mean over references of the minimum DTW across that reference's `K` draws.
pub fn dtw_score(refs: &TimeSeriesTensor, bundle: &GenerationBundle) -> Result<f64> {
    bundle.check_against(refs)?;
    let f = refs.n_features();
    let per_sample: Vec<f64> = (0..refs.n_samples())
        .into_par_iter()
        .map(|i| {
            (0..bundle.k())
                .map(|k| dtw(refs.sample(i), bundle.draw(i, k), f))
                .try_fold(f64::INFINITY, |best, d| d.map(|d| best.min(d)))
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.iter().sum::<f64>() / refs.n_samples() as f64)
}

/// Sample-based CRPS of draws `samples` against observation `y`:
/// `(1/K) Σ|ŷ_i − y| − (1/2K²) Σ_i Σ_j |ŷ_i − ŷ_j|`.
pub fn crps_instance(samples: &[f64], y: f64) -> Result<f64> {
    let k = samples.len();
    if k == 0 {
        return Err(Error::invalid("CRPS needs at least one sample"));
    }
    let kf = k as f64;
    // Mean absolute error accumulated as offsets from the first term so that
    // identical terms give that term back exactly.
    let first = (samples[0] - y).abs();
    let offsets: f64 = samples[1..].iter().map(|s| (s - y).abs() - first).sum();
    let mae = first + offsets / kf;

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_{i<j} (x_(j) − x_(i)) = Σ_g gap_g · g · (K − g) over consecutive gaps.
    let spread: f64 = sorted
        .windows(2)
        .enumerate()
        .map(|(g, w)| (w[1] - w[0]) * ((g + 1) as f64) * ((k - g - 1) as f64))
        .sum();
    // The full double sum counts each unordered pair twice.
    Ok(mae - (2.0 * spread) / (2.0 * kf * kf))
}

/// CRPS averaged over timesteps, then features, then reference samples.
pub fn crps_score(refs: &TimeSeriesTensor, bundle: &GenerationBundle) -> Result<f64> {
    bundle.check_against(refs)?;
    let (l, f, k) = (refs.length(), refs.n_features(), bundle.k());
    let per_sample: Vec<f64> = (0..refs.n_samples())
        .into_par_iter()
        .map(|i| {
            let mut draws = vec![0.0; k];
            let mut feature_total = 0.0;
            for feat in 0..f {
                let mut time_total = 0.0;
                for t in 0..l {
                    for (kk, d) in draws.iter_mut().enumerate() {
                        *d = bundle.draw(i, kk)[t * f + feat];
                    }
                    time_total += crps_instance(&draws, refs.get(i, t, feat))?;
                }
                feature_total += time_total / l as f64;
            }
            Ok(feature_total / f as f64)
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.iter().sum::<f64>() / refs.n_samples() as f64)
}
