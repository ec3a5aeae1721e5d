//! Shared fixtures for the criterion benches.

use diffext::harness::spiral_point;
use diffext::{fit, ExtenderModel, FitParams, PointCloud, SampleValues};

/// Spiral model with `k` evenly spaced samples labelled by their parameter.
pub fn spiral_model(k: usize) -> ExtenderModel {
    let (points, values) = spiral_samples(k);
    fit(&points, &values, &spiral_params()).unwrap()
}

/// `k` evenly spaced spiral samples labelled by their parameter.
pub fn spiral_samples(k: usize) -> (PointCloud, SampleValues) {
    let ts: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
    let pts: Vec<[f64; 2]> = ts.iter().map(|&t| spiral_point(t)).collect();
    (
        PointCloud::from_rows(&pts).unwrap(),
        SampleValues::scalar(ts),
    )
}

pub fn spiral_params() -> FitParams {
    FitParams {
        half_width: std::f64::consts::E,
        ..FitParams::default()
    }
}

/// `count` points on a regular grid over `[-half, half]²`.
pub fn grid_queries(count: usize, half: f64) -> PointCloud {
    let side = (count as f64).sqrt().ceil() as usize;
    let mut coords = Vec::with_capacity(side * side * 2);
    for r in 0..side {
        for c in 0..side {
            let x = -half + 2.0 * half * (c as f64 + 0.5) / side as f64;
            let y = -half + 2.0 * half * (r as f64 + 0.5) / side as f64;
            coords.extend([x, y]);
        }
    }
    PointCloud::from_flat(2, coords).unwrap()
}
