//! Seeded problem generators for the experiments.
//!
//! All randomness comes from `ChaCha8Rng` keyed by a 64-bit seed, so every
//! generated instance is bit-reproducible across platforms and runs.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::cost::FeatureCost;
use crate::error::{Error, Result};
use crate::experiments::image::GrayscaleImage;
use crate::grid::{UniformGrid1D, UniformGrid2D};
use crate::measure::DiscreteMeasure;

/// Random 1D measure: iid uniform weights on `[0, 1]`, normalized, on the
/// unit-interval grid `x_i = (i-1)/(N-1)` (spacing 1 for a single point).
pub fn gen_random_measure_1d(n: usize, power: u32, seed: u64) -> Result<DiscreteMeasure<f64>> {
    let spacing = if n > 1 { 1.0 / (n as f64 - 1.0) } else { 1.0 };
    let grid = UniformGrid1D::new(n, spacing, power)?;
    DiscreteMeasure::new(random_simplex_weights(n, seed), grid)
}

/// Random 2D measure on the `side x side` grid over the unit square.
pub fn gen_random_measure_2d(side: usize, power: u32, seed: u64) -> Result<DiscreteMeasure<f64>> {
    let spacing = if side > 1 { 1.0 / (side as f64 - 1.0) } else { 1.0 };
    let grid = UniformGrid2D::new(side, spacing, power)?;
    DiscreteMeasure::new(random_simplex_weights(side * side, seed), grid)
}

fn random_simplex_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Index-difference feature costs `c_ip = |i - p|` for the 1D random FGW
/// benchmark.
pub fn index_feature_cost_1d(m: usize, n: usize) -> FeatureCost<f64> {
    FeatureCost::new(Array2::from_shape_fn((m, n), |(i, p)| {
        ((i as f64) - (p as f64)).abs()
    }))
    .expect("nonnegative by construction")
}

/// Manhattan index-difference feature costs between two column-major square
/// grids, the 2D analogue of [`index_feature_cost_1d`].
pub fn manhattan_feature_cost_2d(side: usize) -> FeatureCost<f64> {
    let n = side * side;
    FeatureCost::new(Array2::from_shape_fn((n, n), |(a, b)| {
        let (ia, ja) = ((a % side) as i64, (a / side) as i64);
        let (ib, jb) = ((b % side) as i64, (b / side) as i64);
        ((ia - ib).abs() + (ja - jb).abs()) as f64
    }))
    .expect("nonnegative by construction")
}

/// Waveform parameters of the two-hump series.
#[derive(Debug, Clone)]
pub struct HumpShape {
    /// Full support width of each raised-cosine hump, in [0, 1] units.
    pub width: f64,
    /// Peak heights of the first and second hump.
    pub heights: (f64, f64),
    /// Constant offset keeping the sampled measure strictly positive.
    pub baseline: f64,
}

impl Default for HumpShape {
    fn default() -> Self {
        Self {
            width: 0.15,
            heights: (0.5, 0.8),
            baseline: 0.05,
        }
    }
}

/// A generated pair of two-hump series plus everything the FGW alignment
/// task needs.
#[derive(Debug, Clone)]
pub struct TwoHumpSeries {
    pub source: DiscreteMeasure<f64>,
    pub target: DiscreteMeasure<f64>,
    /// Raw sampled signals (before normalization into measures).
    pub source_signal: Vec<f64>,
    pub target_signal: Vec<f64>,
    /// `c_ip = |source_signal_i - target_signal_p|`.
    pub costs: FeatureCost<f64>,
    /// Inclusive sample-index ranges of the two humps' supports.
    pub source_supports: [(usize, usize); 2],
    pub target_supports: [(usize, usize); 2],
}

/// Sample two series on `n` uniform points of [0, 1]: humps of heights 0.5
/// and 0.8 centered at `source_centers`, and the same humps moved to
/// `target_centers`. An optional seed adds small uniform jitter to the
/// samples.
pub fn gen_two_hump_series(
    n: usize,
    source_centers: (f64, f64),
    target_centers: (f64, f64),
    shape: &HumpShape,
    seed: Option<u64>,
) -> Result<TwoHumpSeries> {
    for centers in [source_centers, target_centers] {
        check_hump_layout(centers, shape)?;
    }
    if n < 2 {
        return Err(Error::SeriesTooShort { n });
    }

    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut sample = |centers: (f64, f64)| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = i as f64 / (n as f64 - 1.0);
                let jitter = rng
                    .as_mut()
                    .map(|r| r.random::<f64>() * 0.02)
                    .unwrap_or(0.0);
                hump_signal(x, centers, shape) + jitter
            })
            .collect()
    };
    let source_signal = sample(source_centers);
    let target_signal = sample(target_centers);

    let source_supports = supports(n, source_centers, shape)?;
    let target_supports = supports(n, target_centers, shape)?;

    let spacing = 1.0 / (n as f64 - 1.0);
    let grid = UniformGrid1D::new(n, spacing, 1)?;
    let source = DiscreteMeasure::new(normalized(&source_signal), grid)?;
    let target = DiscreteMeasure::new(normalized(&target_signal), grid)?;
    let costs = FeatureCost::new(Array2::from_shape_fn((n, n), |(i, p)| {
        (source_signal[i] - target_signal[p]).abs()
    }))?;

    Ok(TwoHumpSeries {
        source,
        target,
        source_signal,
        target_signal,
        costs,
        source_supports,
        target_supports,
    })
}

fn check_hump_layout(centers: (f64, f64), shape: &HumpShape) -> Result<()> {
    let half = shape.width / 2.0;
    let ok = |c: f64| c - half >= 0.0 && c + half <= 1.0;
    if !ok(centers.0) || !ok(centers.1) || (centers.0 - centers.1).abs() < shape.width {
        return Err(Error::OverlappingHumps);
    }
    Ok(())
}

fn supports(n: usize, centers: (f64, f64), shape: &HumpShape) -> Result<[(usize, usize); 2]> {
    let half = shape.width / 2.0;
    let to_range = |c: f64| -> Result<(usize, usize)> {
        let lo = ((c - half) * (n as f64 - 1.0)).ceil() as usize;
        let hi = ((c + half) * (n as f64 - 1.0)).floor() as usize;
        if hi < lo + 1 {
            return Err(Error::SeriesTooShort { n });
        }
        Ok((lo, hi))
    };
    Ok([to_range(centers.0)?, to_range(centers.1)?])
}

fn hump_signal(x: f64, centers: (f64, f64), shape: &HumpShape) -> f64 {
    let half = shape.width / 2.0;
    let bump = |c: f64, h: f64| {
        let t = (x - c) / half;
        if t.abs() <= 1.0 {
            h * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        } else {
            0.0
        }
    };
    shape.baseline + bump(centers.0, shape.heights.0) + bump(centers.1, shape.heights.1)
}

fn normalized(signal: &[f64]) -> Vec<f64> {
    let total: f64 = signal.iter().sum();
    signal.iter().map(|s| s / total).collect()
}

/// Procedural stand-in for a handwritten digit: two stacked arcs open to the
/// left, resembling a "3". Any grayscale pattern works for the invariance
/// experiment; this one just avoids shipping binary fixtures.
pub fn synthetic_digit(side: usize) -> GrayscaleImage {
    let mut pixels = vec![0.0; side * side];
    let arcs = [(0.5, 0.34, 0.18), (0.5, 0.66, 0.18)];
    for r in 0..side {
        for c in 0..side {
            let x = (c as f64 + 0.5) / side as f64;
            let y = (r as f64 + 0.5) / side as f64;
            let mut v: f64 = 0.0;
            for (cx, cy, radius) in arcs {
                let (dx, dy) = (x - cx, y - cy);
                let dist = (dx * dx + dy * dy).sqrt();
                let angle = dy.atan2(dx);
                // leave a gap on the left side of each arc
                if angle.abs() < 2.4 {
                    let ring = (dist - radius).abs() / 0.06;
                    if ring < 1.0 {
                        v = v.max(1.0 - ring * ring);
                    }
                }
            }
            pixels[r * side + c] = v;
        }
    }
    GrayscaleImage::new(side, side, pixels).expect("valid synthetic image")
}

/// Two related blobby silhouettes standing in for consecutive frames of a
/// deforming shape: a body with a head and four legs, and the same shape
/// with the legs swung. Used when no image files are supplied.
pub fn synthetic_deformation_pair(side: usize) -> (GrayscaleImage, GrayscaleImage) {
    let render = |blobs: &[(f64, f64, f64, f64)]| {
        let mut pixels = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let x = (c as f64 + 0.5) / side as f64;
                let y = (r as f64 + 0.5) / side as f64;
                let mut v: f64 = 0.0;
                for (cx, cy, sx, sy) in blobs {
                    let dx = (x - cx) / sx;
                    let dy = (y - cy) / sy;
                    v += (-0.5 * (dx * dx + dy * dy)).exp();
                }
                pixels[r * side + c] = v.min(1.0);
            }
        }
        GrayscaleImage::new(side, side, pixels).expect("valid synthetic image")
    };
    let first = render(&[
        (0.5, 0.45, 0.22, 0.12),  // body
        (0.78, 0.32, 0.08, 0.08), // head
        (0.34, 0.68, 0.035, 0.14),
        (0.46, 0.70, 0.035, 0.13),
        (0.58, 0.70, 0.035, 0.13),
        (0.70, 0.68, 0.035, 0.14),
    ]);
    let second = render(&[
        (0.5, 0.46, 0.22, 0.12),
        (0.79, 0.30, 0.08, 0.08),
        (0.30, 0.66, 0.035, 0.15), // legs swung forward/back
        (0.49, 0.71, 0.035, 0.12),
        (0.55, 0.71, 0.035, 0.12),
        (0.74, 0.66, 0.035, 0.15),
    ]);
    (first, second)
}
