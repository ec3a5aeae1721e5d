use std::f64::consts::{E, TAU};
use std::time::Instant;

use rand::Rng;

use super::{
    exact_at_samples, prediction_checks, BatchDiagnostics, Experiment, ExperimentConfig, RunOutput,
    Seeds, Session, SpiralSampling,
};
use crate::analysis::{frobenius_error, ErrorReport};
use crate::error::Result;
use crate::extender::{fit, FitParams, SampleValues};
use crate::formats::{write_mxf, write_pgm16};
use crate::matrix::{Matrix, PointCloud};

/// `eᵗ (cos 2πt, sin 2πt)`.
pub fn spiral_point(t: f64) -> [f64; 2] {
    let r = t.exp();
    [r * (TAU * t).cos(), r * (TAU * t).sin()]
}

fn draw_parameter(rng: &mut impl Rng, sampling: SpiralSampling) -> f64 {
    let u: f64 = rng.random();
    match sampling {
        SpiralSampling::Parameter => u,
        // Arc length from 0 is proportional to eᵗ − 1.
        SpiralSampling::Arclength => (1.0 + u * (E - 1.0)).ln(),
    }
}

fn spiral_cloud(ts: &[f64]) -> Result<PointCloud> {
    PointCloud::from_flat(2, ts.iter().flat_map(|&t| spiral_point(t)).collect())
}

/// Fits the spiral's inverse parametrization for each batch size and scores
/// it on fresh on-manifold points; also rasterizes the extension over a grid
/// covering the sampling square.
///
/// Writes `report.csv`, `manifest.txt`, `spiral_grid_k*.{pgm,mxf}` and
/// `spiral_manifold_k*.mxf` (columns `t`, prediction) to the output directory.
pub fn run_spiral(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut session = Session::open(cfg, Experiment::Spiral)?;
    let seeds = session.seeds;

    let mut eval_rng = Seeds::rng(seeds.evaluation);
    let eval_t: Vec<f64> = (0..cfg.eval_count)
        .map(|_| eval_rng.random::<f64>())
        .collect();
    let eval_points = spiral_cloud(&eval_t)?;
    let exact = Matrix::from_vec(eval_t.len(), 1, eval_t.clone())?;

    let side = cfg.grid_side;
    let m = cfg.half_width;
    let h = 2.0 * m / side as f64;
    let mut grid = Vec::with_capacity(2 * side * side);
    for r in 0..side {
        for c in 0..side {
            grid.extend([-m + (c as f64 + 0.5) * h, m - (r as f64 + 0.5) * h]);
        }
    }
    let grid = PointCloud::from_flat(2, grid)?;

    let mut reports = Vec::new();
    let mut diagnostics = Vec::new();
    for &k in &cfg.batch_sizes {
        let start = Instant::now();
        // Reseeded per batch: smaller batches are prefixes of larger ones.
        let mut rng = Seeds::rng(seeds.training);
        let ts: Vec<f64> = (0..k)
            .map(|_| draw_parameter(&mut rng, cfg.spiral_sampling))
            .collect();
        let params = FitParams {
            target_dim: cfg.n_bar,
            reference_count: cfg.m_reference,
            half_width: m,
            delta: cfg.delta,
            seed: seeds.reference,
        };
        let model = fit(&spiral_cloud(&ts)?, &SampleValues::scalar(ts), &params)?;
        let on_manifold = model.extend_batch(&eval_points)?;
        let predicted = Matrix::from_vec(
            eval_t.len(),
            1,
            on_manifold.iter().map(|e| e.value[0]).collect(),
        )?;
        let error = frobenius_error(&predicted, &exact)?;
        let elapsed = start.elapsed().as_secs_f64();

        let on_grid = model.extend_batch(&grid)?;
        let raster = Matrix::from_vec(side, side, on_grid.iter().map(|e| e.value[0]).collect())?;

        let (nm_a, hull_a) = prediction_checks(model.values(), &on_manifold);
        let (nm_b, hull_b) = prediction_checks(model.values(), &on_grid);
        diagnostics.push(BatchDiagnostics {
            batch: k,
            min_nm: nm_a.min(nm_b),
            max_hull_excess: hull_a.max(hull_b),
            exact_at_samples: exact_at_samples(&model)?,
            spline_clamped: 0,
        });
        reports.push(ErrorReport {
            method: "learned".into(),
            batch: k,
            error,
            runtime_s: session.runtime(elapsed),
        });

        write_pgm16(&session.artifact(format!("spiral_grid_k{k}.pgm")), &raster)?;
        write_mxf(&session.artifact(format!("spiral_grid_k{k}.mxf")), &raster)?;
        let pairs = Matrix::from_fn(eval_t.len(), 2, |i, j| {
            if j == 0 {
                eval_t[i]
            } else {
                predicted.get(i, 0)
            }
        });
        write_mxf(
            &session.artifact(format!("spiral_manifold_k{k}.mxf")),
            &pairs,
        )?;
    }
    session.finish(reports, diagnostics)
}
