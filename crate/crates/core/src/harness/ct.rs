use std::time::Instant;

use rand::Rng;

use super::{
    exact_at_samples, prediction_checks, BatchDiagnostics, Experiment, ExperimentConfig, RunOutput,
    Seeds, Session,
};
use crate::analysis::{
    frobenius_error, spline_interpolate_sinogram, training_only_reconstruction, ErrorReport,
};
use crate::error::Result;
use crate::extender::{fit, FitParams, SampleValues};
use crate::formats::{write_mxf, write_pgm16, write_sinogram};
use crate::tomo::{
    add_noise, embed_angles, fbp, radon_forward, shepp_logan, uniform_angles, ImageGrid, Sinogram,
};

/// Draws `count` distinct angles uniformly on `[0, 180)`, ascending.
fn evaluation_angles(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = Seeds::rng(seed);
    let mut angles: Vec<f64> = (0..count)
        .map(|_| rng.random::<f64>() * 180.0)
        .filter(|&a| a < 180.0)
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    angles
}

/// Sparse-view reconstruction study on the noisy Shepp–Logan phantom.
///
/// For each batch size `k` the sinogram at `k` uniform angles is extended to
/// `eval_count` random angles by the learned model and by a cubic spline, and
/// the training-only, learned and spline sinograms are reconstructed by FBP.
/// Errors are reported against the noiseless phantom (`training`, `learned`,
/// `spline`) and against the noisy image (`*_vs_noisy`).
pub fn run_ct(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut session = Session::open(cfg, Experiment::Ct)?;
    let seeds = session.seeds;
    let d = cfg.d;
    let nb = cfg.detectors;

    let phantom = shepp_logan(d)?;
    let noisy = add_noise(&phantom, cfg.noise_level, seeds.noise)?;
    write_image(&mut session, "ct_phantom", &phantom)?;
    write_image(&mut session, "ct_noisy", &noisy)?;

    let eval_angles = evaluation_angles(cfg.eval_count, seeds.evaluation);
    let eval_points = embed_angles(&eval_angles, cfg.embedding)?;

    let mut reports = Vec::new();
    let mut noisy_reports = Vec::new();
    let mut diagnostics = Vec::new();
    for &k in &cfg.batch_sizes {
        let train_angles = uniform_angles(k);
        let train = radon_forward(&noisy, &train_angles, nb)?;
        write_sinogram(&session.artifact(format!("ct_sino_train_k{k}.mxf")), &train)?;
        session
            .artifacts
            .push(format!("ct_sino_train_k{k}.angles.txt").into());

        let start = Instant::now();
        let training = training_only_reconstruction(&train, d)?;
        let t_training = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let columns: Vec<&[f64]> = (0..k).map(|j| train.column(j)).collect();
        let values = SampleValues::from_rows(&columns)?;
        let params = FitParams {
            target_dim: cfg.n_bar,
            reference_count: cfg.m_reference,
            half_width: cfg.half_width,
            delta: cfg.delta,
            seed: seeds.reference,
        };
        let model = fit(
            &embed_angles(&train_angles, cfg.embedding)?,
            &values,
            &params,
        )?;
        let predicted = model.extend_batch(&eval_points)?;
        let data: Vec<f64> = predicted
            .iter()
            .flat_map(|e| e.value.iter().copied())
            .collect();
        let learned_sino = Sinogram::from_column_major(nb, eval_angles.clone(), data)?;
        let learned = fbp(&learned_sino, d)?;
        let t_learned = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let spline = spline_interpolate_sinogram(&train, &eval_angles)?;
        let spline_recon = fbp(&spline.sinogram, d)?;
        let t_spline = start.elapsed().as_secs_f64();

        let (min_nm, max_hull_excess) = prediction_checks(model.values(), &predicted);
        diagnostics.push(BatchDiagnostics {
            batch: k,
            min_nm,
            max_hull_excess,
            exact_at_samples: exact_at_samples(&model)?,
            spline_clamped: spline.clamped,
        });

        for (method, image, seconds) in [
            ("training", &training, t_training),
            ("learned", &learned, t_learned),
            ("spline", &spline_recon, t_spline),
        ] {
            let runtime_s = session.runtime(seconds);
            reports.push(ErrorReport {
                method: method.into(),
                batch: k,
                error: frobenius_error(image.pixels(), phantom.pixels())?,
                runtime_s,
            });
            noisy_reports.push(ErrorReport {
                method: format!("{method}_vs_noisy"),
                batch: k,
                error: frobenius_error(image.pixels(), noisy.pixels())?,
                runtime_s,
            });
            write_image(&mut session, &format!("ct_recon_{method}_k{k}"), image)?;
        }
        write_pgm16(
            &session.artifact(format!("ct_sino_learned_k{k}.pgm")),
            &learned_sino.to_matrix(),
        )?;
        write_pgm16(
            &session.artifact(format!("ct_sino_spline_k{k}.pgm")),
            &spline.sinogram.to_matrix(),
        )?;
    }
    reports.extend(noisy_reports);
    session.finish(reports, diagnostics)
}

fn write_image(session: &mut Session, stem: &str, img: &ImageGrid) -> Result<()> {
    write_pgm16(&session.artifact(format!("{stem}.pgm")), img.pixels())?;
    write_mxf(&session.artifact(format!("{stem}.mxf")), img.pixels())
}
