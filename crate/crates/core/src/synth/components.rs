use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    render_caption, MvKind, MvTransform, PrimaryAttrs, SecondaryAttrs, Shapelet, TrendDirection,
    TrendType, N_SEGMENTS,
};
use crate::error::{Error, Result};
use crate::rng::KeyedRng;

/// Single-peak span; double peaks span twice this.
pub const PEAK_SPAN: usize = 9;
pub const MIN_PEAK_HEIGHT: f64 = 1.0;
pub const MAX_PEAK_HEIGHT: f64 = 1.2;

pub fn trend_component(trend_type: TrendType, direction: TrendDirection, length: usize) -> Vec<f64> {
    let denom = (length.max(2) - 1) as f64;
    let sign = match direction {
        TrendDirection::Up => 1.0,
        TrendDirection::Down => -1.0,
    };
    (0..length)
        .map(|i| {
            let t = i as f64 / denom;
            let t_wide = -10.0 + 20.0 * t;
            let v = match trend_type {
                TrendType::Linear => t,
                TrendType::Quadratic => t * t,
                TrendType::Exponential => 2f64.powf(t_wide) / 1024.0,
                TrendType::Logistic => 1.0 / (1.0 + (-t_wide).exp()),
            };
            sign * v
        })
        .collect()
}

/// `a·sin(2πt + φ)` on `length` points evenly spaced over `[0, n_cycle]`.
pub fn sinusoid_component(n_cycle: u32, amplitude: f64, phase: f64, length: usize) -> Vec<f64> {
    if n_cycle == 0 {
        return vec![0.0; length];
    }
    let denom = (length.max(2) - 1) as f64;
    (0..length)
        .map(|i| {
            let t = f64::from(n_cycle) * i as f64 / denom;
            amplitude * (2.0 * PI * t + phase).sin()
        })
        .collect()
}

pub fn shapelet_template(kind: Shapelet, peak_height: f64) -> Result<Vec<f64>> {
    let half = (PEAK_SPAN / 2) as f64;
    let single = || -> Vec<f64> {
        (0..PEAK_SPAN)
            .map(|i| peak_height * (1.0 - (i as f64 - half).abs() / half))
            .collect()
    };
    match kind {
        Shapelet::None => Err(Error::invalid("no template for shapelet 'none'")),
        Shapelet::SinglePeak => Ok(single()),
        Shapelet::Sag => Ok(single().into_iter().map(|v| -v).collect()),
        Shapelet::DoublePeaks => {
            let mut t = single();
            t.extend(single());
            Ok(t)
        }
    }
}

/// One shapelet written into the local component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeletPlacement {
    pub segment: usize,
    pub kind: Shapelet,
    pub start: usize,
    pub peak_height: f64,
}

/// Draws one label per segment: none 70%, single peak, sag and double peaks 10% each.
pub fn sample_segment_labels<R: Rng + ?Sized>(rng: &mut R) -> [Shapelet; N_SEGMENTS] {
    let mut labels = [Shapelet::None; N_SEGMENTS];
    for l in &mut labels {
        let u: f64 = rng.random();
        *l = if u < 0.7 {
            Shapelet::None
        } else if u < 0.8 {
            Shapelet::SinglePeak
        } else if u < 0.9 {
            Shapelet::Sag
        } else {
            Shapelet::DoublePeaks
        };
    }
    labels
}

fn check_segments(length: usize) -> Result<usize> {
    if !length.is_multiple_of(N_SEGMENTS) {
        return Err(Error::invalid(format!("length {length} is not divisible by {N_SEGMENTS}")));
    }
    let seg = length / N_SEGMENTS;
    if seg < 2 * PEAK_SPAN {
        return Err(Error::invalid(format!("segment length {seg} is shorter than {}", 2 * PEAK_SPAN)));
    }
    Ok(seg)
}

/// Writes the given labels into an all-zero series, each template fully
/// inside its segment at a uniformly drawn offset.
pub fn place_shapelets<R: Rng + ?Sized>(
    labels: &[Shapelet; N_SEGMENTS],
    rng: &mut R,
    length: usize,
) -> Result<(Vec<f64>, Vec<ShapeletPlacement>)> {
    let seg = check_segments(length)?;
    let mut series = vec![0.0; length];
    let mut placements = Vec::new();
    for (segment, &kind) in labels.iter().enumerate() {
        if kind == Shapelet::None {
            continue;
        }
        let peak_height = rng.random_range(MIN_PEAK_HEIGHT..MAX_PEAK_HEIGHT);
        let template = shapelet_template(kind, peak_height)?;
        let seg_start = segment * seg;
        let start = rng.random_range(seg_start..=seg_start + seg - template.len());
        for (dst, v) in series[start..start + template.len()].iter_mut().zip(&template) {
            *dst += v;
        }
        placements.push(ShapeletPlacement { segment, kind, start, peak_height });
    }
    Ok((series, placements))
}

/// Samples segment labels and injects the matching shapelets.
pub fn inject_shapelets<R: Rng + ?Sized>(rng: &mut R, length: usize) -> Result<(Vec<f64>, [Shapelet; N_SEGMENTS])> {
    check_segments(length)?;
    let labels = sample_segment_labels(rng);
    let (series, _) = place_shapelets(&labels, rng, length)?;
    Ok((series, labels))
}

pub fn noise_with_sigma<R: Rng + ?Sized>(rng: &mut R, sigma: f64, length: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    (0..length).map(|_| normal.sample(rng)).collect()
}

/// Zero-mean Gaussian noise with `σ ~ U(0.04, 0.06)` drawn once.
pub fn noise_component<R: Rng + ?Sized>(rng: &mut R, length: usize) -> (Vec<f64>, f64) {
    let sigma = rng.random_range(0.04..0.06);
    (noise_with_sigma(rng, sigma, length), sigma)
}

/// Applies a multivariable rule to the first variable.
pub fn apply_mv_transform(series: &[f64], transform: &MvTransform) -> Result<Vec<f64>> {
    transform.check()?;
    let mut out = series.to_vec();
    let n = out.len();
    match transform.kind {
        MvKind::XFlip => out.reverse(),
        MvKind::YFlip => out.iter_mut().for_each(|v| *v = -*v),
        MvKind::ShiftForward if n > 0 => out.rotate_right(transform.shift_distance.unwrap_or(0) % n),
        MvKind::ShiftBackward if n > 0 => out.rotate_left(transform.shift_distance.unwrap_or(0) % n),
        _ => {}
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeOptions {
    pub noise: bool,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        Self { noise: true }
    }
}

/// Every random draw behind one composed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub season_amplitude: f64,
    pub season_phase: f64,
    pub hf_amplitude: f64,
    pub hf_phase: f64,
    pub noise_sigma: Option<f64>,
    pub placements: Vec<ShapeletPlacement>,
    pub transform: Option<MvTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub series: Vec<f64>,
    pub labels: [Shapelet; N_SEGMENTS],
    pub caption: String,
    pub trace: SampleTrace,
}

/// Sums trend, season, local shapelets, high-frequency component and noise for
/// sample `index`. Shapelet labels come from `secondary`; their heights and
/// offsets are drawn here.
pub fn compose_univariate(
    primary: &PrimaryAttrs,
    secondary: &SecondaryAttrs,
    rng: &KeyedRng,
    index: u64,
    length: usize,
    opts: ComposeOptions,
) -> Result<Composition> {
    let mut season_rng = rng.stream(index, "season");
    let season_amplitude = season_rng.random_range(0.4..0.6);
    let season_phase = season_rng.random_range(0.0..2.0 * PI);
    let mut hf_rng = rng.stream(index, "hf");
    let hf_amplitude = hf_rng.random_range(0.1..0.3);
    let hf_phase = hf_rng.random_range(0.0..2.0 * PI);
    let (_, placements) = place_shapelets(&secondary.segment_shapelets, &mut rng.stream(index, "shapelet_place"), length)?;

    let mut trace = SampleTrace {
        season_amplitude,
        season_phase,
        hf_amplitude,
        hf_phase,
        noise_sigma: None,
        placements,
        transform: None,
    };
    let mut series = recompose_deterministic(primary, secondary, &trace, length)?;
    if opts.noise {
        let (noise, sigma) = noise_component(&mut rng.stream(index, "noise"), length);
        series.iter_mut().zip(&noise).for_each(|(x, n)| *x += n);
        trace.noise_sigma = Some(sigma);
    }
    let caption = render_caption(primary, secondary, None);
    Ok(Composition { series, labels: secondary.segment_shapelets, caption, trace })
}

/// The noise-free part of a sample rebuilt from its attributes and trace.
pub fn recompose_deterministic(
    primary: &PrimaryAttrs,
    secondary: &SecondaryAttrs,
    trace: &SampleTrace,
    length: usize,
) -> Result<Vec<f64>> {
    check_segments(length)?;
    let trend = trend_component(primary.trend_type, primary.trend_direction, length);
    let season = sinusoid_component(primary.season_cycles, trace.season_amplitude, trace.season_phase, length);
    let hf = sinusoid_component(secondary.hf_cycles, trace.hf_amplitude, trace.hf_phase, length);
    let mut local = vec![0.0; length];
    for p in &trace.placements {
        let template = shapelet_template(p.kind, p.peak_height)?;
        for (dst, v) in local[p.start..p.start + template.len()].iter_mut().zip(&template) {
            *dst += v;
        }
    }
    Ok((0..length).map(|i| trend[i] + season[i] + local[i] + hf[i]).collect())
}
