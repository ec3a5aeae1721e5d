//! Configuration, seeding, model files and the spiral and CT experiments.

mod config;
mod ct;
mod persist;
mod spiral;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{write_reports_csv, ErrorReport};
use crate::error::{Error, Result};
use crate::extender::{Extension, SampleValues};

pub use config::{Experiment, ExperimentConfig, SpiralSampling};
pub use ct::run_ct;
pub use persist::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use spiral::{run_spiral, spiral_point};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub const TRAINING_STREAM: u64 = 0;
pub const EVALUATION_STREAM: u64 = 1;
pub const REFERENCE_STREAM: u64 = 2;
pub const NOISE_STREAM: u64 = 3;

/// Per-purpose seeds derived from one base seed.
///
/// Training and evaluation draws come from separate streams, so every batch
/// size in a sweep is scored on the same evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub base: u64,
    pub training: u64,
    pub evaluation: u64,
    pub reference: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn derive(base: u64) -> Self {
        let stream = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(s);
            rng.next_u64()
        };
        Seeds {
            base,
            training: stream(TRAINING_STREAM),
            evaluation: stream(EVALUATION_STREAM),
            reference: stream(REFERENCE_STREAM),
            noise: stream(NOISE_STREAM),
        }
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}

/// Checks gathered while running one batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchDiagnostics {
    pub batch: usize,
    /// Smallest normalization over kernel-weighted predictions.
    pub min_nm: f64,
    /// Largest distance of any prediction component outside the sample-value hull.
    pub max_hull_excess: f64,
    /// Whether extending at every training point returned its stored value bitwise.
    pub exact_at_samples: bool,
    /// Spline queries clamped to the boundary knots (CT only).
    pub spline_clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<ErrorReport>,
    pub diagnostics: Vec<BatchDiagnostics>,
    pub seeds: Seeds,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub const FILE_NAME: &'static str = ".diffext.lock";

    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(Self::FILE_NAME);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(OutputLock { path })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Runs whichever experiment the config names.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment {
        Experiment::Spiral => run_spiral(cfg),
        Experiment::Ct => run_ct(cfg),
    }
}

pub(crate) struct Session<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seeds: Seeds,
    pub artifacts: Vec<PathBuf>,
    _lock: OutputLock,
}

impl<'a> Session<'a> {
    pub fn open(cfg: &'a ExperimentConfig, expected: Experiment) -> Result<Self> {
        if cfg.experiment != expected {
            return Err(Error::Config(format!(
                "config names experiment {:?}, expected {:?}",
                cfg.experiment.name(),
                expected.name()
            )));
        }
        cfg.validate()?;
        let lock = OutputLock::acquire(&cfg.output_dir)?;
        Ok(Session {
            cfg,
            seeds: Seeds::derive(cfg.seed),
            artifacts: Vec::new(),
            _lock: lock,
        })
    }

    /// Path for an artifact, recorded for the manifest.
    pub fn artifact(&mut self, name: String) -> PathBuf {
        let path = self.cfg.output_dir.join(&name);
        self.artifacts.push(PathBuf::from(name));
        path
    }

    pub fn runtime(&self, seconds: f64) -> f64 {
        if self.cfg.record_runtime {
            seconds
        } else {
            0.0
        }
    }

    pub fn finish(
        mut self,
        reports: Vec<ErrorReport>,
        diagnostics: Vec<BatchDiagnostics>,
    ) -> Result<RunOutput> {
        let report = self.artifact("report.csv".into());
        write_reports_csv(&report, &reports)?;
        let manifest = self.cfg.output_dir.join("manifest.txt");
        write_manifest(
            &manifest,
            self.cfg,
            &self.seeds,
            &diagnostics,
            &self.artifacts,
        )?;
        self.artifacts.push(PathBuf::from("manifest.txt"));
        Ok(RunOutput {
            reports,
            diagnostics,
            seeds: self.seeds,
            artifacts: std::mem::take(&mut self.artifacts),
        })
    }
}

/// The config lines are plain `key=value`, everything else is a `#` comment,
/// so a manifest can be passed back as `--config` to replay the run.
fn write_manifest(
    path: &Path,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    diagnostics: &[BatchDiagnostics],
    artifacts: &[PathBuf],
) -> Result<()> {
    let mut text = format!("# diffext {VERSION}\n");
    text.push_str(&cfg.to_string());
    text.push_str(&format!(
        "# seeds: base={} training={} (stream {TRAINING_STREAM}) evaluation={} (stream {EVALUATION_STREAM}) \
         reference={} (stream {REFERENCE_STREAM}) noise={} (stream {NOISE_STREAM})\n",
        seeds.base, seeds.training, seeds.evaluation, seeds.reference, seeds.noise
    ));
    for d in diagnostics {
        text.push_str(&format!(
            "# batch {}: min_nm={:e} max_hull_excess={:e} exact_at_samples={} spline_clamped={}\n",
            d.batch, d.min_nm, d.max_hull_excess, d.exact_at_samples, d.spline_clamped
        ));
    }
    for a in artifacts {
        text.push_str(&format!("# artifact: {}\n", a.display()));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Minimum normalization and hull excess over a set of predictions.
pub(crate) fn prediction_checks(values: &SampleValues, predictions: &[Extension]) -> (f64, f64) {
    let hull = values.hull();
    let mut min_nm = f64::INFINITY;
    let mut excess = 0.0f64;
    for e in predictions {
        if let Some(nm) = e.nm() {
            min_nm = min_nm.min(nm);
        }
        for (v, &(lo, hi)) in e.value.iter().zip(&hull) {
            excess = excess.max(lo - v).max(v - hi);
        }
    }
    (min_nm, excess)
}

/// Whether extending at each training point reproduces its value bitwise.
pub(crate) fn exact_at_samples(model: &crate::extender::ExtenderModel) -> Result<bool> {
    for i in 0..model.len() {
        let got = model.extend(model.train_points().point(i))?;
        let want = model.values().value(i);
        if got
            .value
            .iter()
            .zip(&want)
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Ok(false);
        }
    }
    Ok(true)
}
