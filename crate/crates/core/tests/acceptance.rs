//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the summary lines are always printed;
//! the process exits non-zero when any criterion fails.

use std::f64::consts::{E, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use diffext::analysis::frobenius_error;
use diffext::extender::{kernel_average, normalization_floor};
use diffext::harness::{run_ct, run_spiral, spiral_point, Experiment, ExperimentConfig, RunOutput};
use diffext::online::{evaluate_cached, update, EvaluationCache};
use diffext::tomo::{default_detector_count, fbp, radon_forward, shepp_logan, uniform_angles};
use diffext::{
    build_a1, fit, svd_basis, Bandwidth, FitParams, PointCloud, ReferenceSet, SampleValues,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONLINE_REL_TOL: f64 = 1e-10;
const FLOOR_SLACK: f64 = 1e-12;
const ENERGY_REL_TOL: f64 = 1e-8;
const SPIRAL_K150_BOUND: f64 = 2.0;
/// Root-mean-square error of the 720-view noiseless reconstruction at
/// d = 256; measured 0.038057 when first built, frozen with about 1% headroom.
const DENSE_FBP_RMSE_BOUND: f64 = 0.0385;
const HULL_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn spiral_samples(ts: &[f64]) -> (PointCloud, SampleValues) {
    let points =
        PointCloud::from_flat(2, ts.iter().flat_map(|&t| spiral_point(t)).collect()).unwrap();
    (points, SampleValues::scalar(ts.to_vec()))
}

fn spiral_params(seed: u64) -> FitParams {
    FitParams {
        half_width: E,
        seed,
        ..FitParams::default()
    }
}

fn online_batch_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for split in 0..50u64 {
        let k = r.random_range(10..=100);
        let m = r.random_range(1..=60);
        let ts: Vec<f64> = (0..k + m).map(|_| r.random()).collect();
        let (first, first_values) = spiral_samples(&ts[..k]);
        let (second, second_values) = spiral_samples(&ts[k..]);
        let mut model = fit(&first, &first_values, &spiral_params(split)).unwrap();
        let mut cache = EvaluationCache::new();
        let queries: Vec<[f64; 2]> = (0..20)
            .map(|_| [r.random_range(-E..E), r.random_range(-E..E)])
            .collect();
        for (i, q) in queries.iter().enumerate() {
            evaluate_cached(&model, &mut cache, &i.to_string(), q).unwrap();
        }
        update(&mut model, &mut cache, &second, &second_values).unwrap();

        // single pass over all k + m samples with each query's frozen bandwidth
        let coords = model.train_coords();
        let labels = model.values().component(0);
        for (i, q) in queries.iter().enumerate() {
            let frozen = cache.get(&i.to_string()).unwrap().epsilon();
            let got = evaluate_cached(&model, &mut cache, &i.to_string(), q).unwrap()[0];
            let Some(eps) = frozen else { continue };
            let c = model.basis().project(q).unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for (p, &label) in coords.iter().zip(labels) {
                let d2: f64 = p.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
                let w = (-d2 / (eps * eps)).exp();
                num += w * label;
                den += w;
            }
            let want = num / den;
            worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= ONLINE_REL_TOL && within(elapsed, 5.0),
        format!(
            "max relative deviation {worst:.3e} (tol {ONLINE_REL_TOL:e}), {:.2}s (limit 5s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn stability_bound() -> Outcome {
    let start = Instant::now();
    let mut r = rng(202);
    let ts: Vec<f64> = (0..50).map(|_| r.random()).collect();
    let (points, values) = spiral_samples(&ts);
    let model = fit(&points, &values, &spiral_params(3)).unwrap();
    let queries =
        PointCloud::from_flat(2, (0..20_000).map(|_| r.random_range(-E..=E)).collect()).unwrap();
    let floor = normalization_floor(0.1);
    let mut min_nm = f64::INFINITY;
    let mut kernel = 0;
    for e in model.extend_batch(&queries).unwrap() {
        if let Some(nm) = e.nm() {
            min_nm = min_nm.min(nm);
            kernel += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        min_nm >= floor - FLOOR_SLACK && kernel > 0 && within(elapsed, 10.0),
        format!(
            "min Nm {min_nm:.15} over {kernel} queries, floor {floor:.15} - {FLOOR_SLACK:e}, {:.2}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn energy_identity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(303);
    let mut worst = 0.0f64;
    let mut configs = Vec::new();
    for i in 0..20u64 {
        // the last configurations exceed the Gram-route row threshold
        let (k, m) = if i >= 17 {
            (120 + 10 * i as usize, 90)
        } else {
            (r.random_range(2..40), r.random_range(2..40))
        };
        let n = r.random_range(1..7);
        let half = r.random_range(0.5..5.0);
        let x = PointCloud::from_flat(n, (0..k * n).map(|_| r.random_range(-half..half)).collect())
            .unwrap();
        let z = ReferenceSet::sample(m, n, half, i).unwrap();
        let basis = svd_basis(&build_a1(&x, &z).unwrap(), 1).unwrap();
        let lhs: f64 = basis.singular_values().iter().map(|s| s * s).sum();
        let mut rhs = 0.0;
        for a in x.iter() {
            for b in z.points().iter() {
                rhs += a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
            }
        }
        worst = worst.max((lhs - rhs).abs() / rhs);
        configs.push(format!("{k}x{m}x{n}"));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= ENERGY_REL_TOL && within(elapsed, 5.0),
        format!(
            "max relative gap {worst:.3e} (tol {ENERGY_REL_TOL:e}) over 20 configs incl. {}, {:.2}s (limit 5s)",
            configs[19],
            elapsed.as_secs_f64()
        ),
    )
}

fn spiral_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Experiment::Spiral);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn ct_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Experiment::Ct);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn error_of(out: &RunOutput, method: &str, batch: usize) -> f64 {
    out.reports
        .iter()
        .find(|r| r.method == method && r.batch == batch)
        .map(|r| r.error)
        .unwrap()
}

fn spiral_trend(out: &RunOutput, elapsed: Duration) -> Outcome {
    let errs: Vec<f64> = [50, 100, 150]
        .iter()
        .map(|&k| error_of(out, "learned", k))
        .collect();
    let pass = errs.iter().all(|e| e.is_finite())
        && errs.windows(2).all(|w| w[1] < w[0])
        && errs[2] <= SPIRAL_K150_BOUND
        && within(elapsed, 60.0);
    outcome(
        pass,
        format!(
            "errors k=50/100/150: {:.4} / {:.4} / {:.4} (k=150 bound {SPIRAL_K150_BOUND}), {:.2}s (limit 60s)",
            errs[0],
            errs[1],
            errs[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn kernel_convergence() -> Outcome {
    let start = Instant::now();
    let n = 4000;
    let circle: Vec<f64> = (0..n)
        .flat_map(|i| {
            let a = TAU * i as f64 / n as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    let g = |p: &[f64]| 0.7 * p[0] - 0.4 * p[1] + 0.25;
    let points = PointCloud::from_flat(2, circle).unwrap();
    let values = SampleValues::scalar(points.iter().map(g).collect());
    let tests: Vec<[f64; 2]> = (0..64)
        .map(|i| {
            let a = TAU * (i as f64 + 0.37) / 64.0;
            [a.cos(), a.sin()]
        })
        .collect();
    let errs: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&eps| {
            let bw = Bandwidth::new(eps).unwrap();
            tests
                .iter()
                .map(|q| (kernel_average(&points, &values, q, bw).unwrap()[0] - g(q)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let elapsed = start.elapsed();
    outcome(
        errs[1] < errs[0] && errs[2] < errs[1] && within(elapsed, 10.0),
        format!(
            "max error at eps 0.4/0.2/0.1: {:.3e} / {:.3e} / {:.3e}, {:.2}s (limit 10s)",
            errs[0],
            errs[1],
            errs[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn ct_ordering(out: &RunOutput, elapsed: Duration) -> Outcome {
    let sizes = [50, 100, 150];
    let learned: Vec<f64> = sizes.iter().map(|&k| error_of(out, "learned", k)).collect();
    let training: Vec<f64> = sizes
        .iter()
        .map(|&k| error_of(out, "training", k))
        .collect();
    let spline50 = error_of(out, "spline", 50);
    let beats_training = learned.iter().zip(&training).all(|(l, t)| l < t);
    let beats_spline = learned[0] < spline50;
    let monotone = learned.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|e| format!("{e:.4}"))
            .collect::<Vec<_>>()
            .join(" / ")
    };
    outcome(
        beats_training && beats_spline && monotone && within(elapsed, 600.0),
        format!(
            "learned {} vs training {} [{}]; learned(50) {:.4} vs spline(50) {:.4} [{}]; monotone [{}]; {:.1}s (limit 600s)",
            fmt(&learned),
            fmt(&training),
            if beats_training { "ok" } else { "FAIL" },
            learned[0],
            spline50,
            if beats_spline { "ok" } else { "FAIL" },
            if monotone { "ok" } else { "FAIL" },
            elapsed.as_secs_f64()
        ),
    )
}

fn fbp_sanity() -> Outcome {
    let start = Instant::now();
    let d = 256;
    let nb = default_detector_count(d);
    let truth = shepp_logan(d).unwrap();
    let err = |na: usize| {
        let rec = fbp(&radon_forward(&truth, &uniform_angles(na), nb).unwrap(), d).unwrap();
        frobenius_error(rec.pixels(), truth.pixels()).unwrap()
    };
    let (e30, e90, e720) = (err(30), err(90), err(720));
    let rmse = e720 / d as f64;
    let elapsed = start.elapsed();
    outcome(
        rmse < DENSE_FBP_RMSE_BOUND && e720 < e90 && e90 < e30 && within(elapsed, 120.0),
        format!(
            "720-view RMSE {rmse:.6} (bound {DENSE_FBP_RMSE_BOUND}); errors 720/90/30: {e720:.3} / {e90:.3} / {e30:.3}, {:.1}s (limit 120s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn interpolation_and_hull(runs: &[(&str, &RunOutput)]) -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    for (_, out) in runs {
        for d in &out.diagnostics {
            pass &= d.exact_at_samples && d.max_hull_excess <= HULL_TOL;
            worst = worst.max(d.max_hull_excess);
        }
    }
    let batches: usize = runs.iter().map(|(_, o)| o.diagnostics.len()).sum();
    outcome(
        pass,
        format!("{batches} batches exact at every training point; max hull excess {worst:.3e} (tol {HULL_TOL:e})"),
    )
}

fn compare_outputs(a: &Path, b: &Path, out: &RunOutput) -> Result<usize, String> {
    let mut compared = 0;
    for rel in &out.artifacts {
        let name = rel.to_string_lossy();
        if !(name.ends_with(".csv") || name.ends_with(".pgm") || name.ends_with(".mxf")) {
            continue;
        }
        let x = std::fs::read(a.join(rel)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.join(rel)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs"));
        }
        compared += 1;
    }
    Ok(compared)
}

fn determinism(spiral: (&Path, &RunOutput), ct: (&Path, &RunOutput), scratch: &Path) -> Outcome {
    let again = scratch.join("spiral-again");
    let spiral_again = run_spiral(&spiral_config(&again)).unwrap();
    let again_ct = scratch.join("ct-again");
    let ct_again = run_ct(&ct_config(&again_ct)).unwrap();
    let checks = [
        (
            "spiral",
            compare_outputs(spiral.0, &again, spiral.1),
            spiral.1.reports == spiral_again.reports,
        ),
        (
            "ct",
            compare_outputs(ct.0, &again_ct, ct.1),
            ct.1.reports == ct_again.reports,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, files, same_reports) in checks {
        match files {
            Ok(n) => parts.push(format!("{name}: {n} files identical")),
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
        pass &= same_reports;
    }
    outcome(pass, parts.join("; "))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let spiral_dir = scratch.path().join("spiral");
    let ct_dir = scratch.path().join("ct");

    let start = Instant::now();
    let spiral = run_spiral(&spiral_config(&spiral_dir)).expect("spiral run");
    let spiral_time = start.elapsed();
    let start = Instant::now();
    let ct = run_ct(&ct_config(&ct_dir)).expect("ct run");
    let ct_time = start.elapsed();

    let results: Vec<(&str, Outcome)> = vec![
        (
            "online/batch equivalence",
            guarded(online_batch_equivalence),
        ),
        ("normalization lower bound", guarded(stability_bound)),
        ("singular-value energy identity", guarded(energy_identity)),
        (
            "spiral error trend",
            guarded(|| spiral_trend(&spiral, spiral_time)),
        ),
        ("fixed-bandwidth convergence", guarded(kernel_convergence)),
        (
            "CT reconstruction ordering",
            guarded(|| ct_ordering(&ct, ct_time)),
        ),
        ("FBP sanity", guarded(fbp_sanity)),
        (
            "exact interpolation and hull",
            guarded(|| interpolation_and_hull(&[("spiral", &spiral), ("ct", &ct)])),
        ),
        (
            "determinism",
            guarded(|| determinism((&spiral_dir, &spiral), (&ct_dir, &ct), scratch.path())),
        ),
    ];

    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
