use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::extender::check_delta;
use crate::tomo::{default_detector_count, AngleEmbedding, MIN_IMAGE_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Spiral,
    Ct,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spiral => "spiral",
            Experiment::Ct => "ct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spiral" => Some(Experiment::Spiral),
            "ct" => Some(Experiment::Ct),
            _ => None,
        }
    }
}

/// How spiral training parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpiralSampling {
    /// `t` uniform on `[0, 1]`.
    #[default]
    Parameter,
    /// Uniform in arc length along the curve.
    Arclength,
}

impl SpiralSampling {
    pub fn name(self) -> &'static str {
        match self {
            SpiralSampling::Parameter => "parameter",
            SpiralSampling::Arclength => "arclength",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub batch_sizes: Vec<usize>,
    pub eval_count: usize,
    pub n_bar: usize,
    pub delta: f64,
    pub m_reference: usize,
    /// Half-width of the sampling cube.
    pub half_width: f64,
    pub noise_level: f64,
    pub d: usize,
    pub detectors: usize,
    pub embedding: AngleEmbedding,
    pub spiral_sampling: SpiralSampling,
    /// Side of the square query grid rasterized by the spiral study.
    pub grid_side: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Record wall-clock runtimes in report.csv instead of zeros.
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        let d = 256;
        ExperimentConfig {
            experiment,
            batch_sizes: vec![50, 100, 150],
            eval_count: 10_000,
            n_bar: 2,
            delta: 0.1,
            m_reference: 50,
            half_width: match experiment {
                Experiment::Spiral => std::f64::consts::E,
                Experiment::Ct => 1.0,
            },
            noise_level: 0.2,
            d,
            detectors: default_detector_count(d),
            embedding: AngleEmbedding::HalfCircle,
            spiral_sampling: SpiralSampling::Parameter,
            grid_side: 100,
            seed: 0,
            output_dir: PathBuf::from(format!("out-{}", experiment.name())),
            record_runtime: false,
        }
    }

    /// Sets one field from its textual form. Keys accept `-` or `_`.
    ///
    /// Setting `d` also resets `detectors` to the default for that side; set
    /// `detectors` afterwards to override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("{key}: expected {what}, got {value:?}"));
        match key.as_str() {
            "experiment" => {
                let e = Experiment::parse(value).ok_or_else(|| bad("spiral or ct"))?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "config is for experiment {:?} but this run is {:?}",
                        value,
                        self.experiment.name()
                    )));
                }
            }
            "batch_sizes" => {
                self.batch_sizes = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("comma-separated integers"))?;
            }
            "eval_count" => self.eval_count = value.parse().map_err(|_| bad("an integer"))?,
            "n_bar" => self.n_bar = value.parse().map_err(|_| bad("an integer"))?,
            "delta" => self.delta = value.parse().map_err(|_| bad("a number"))?,
            "m_reference" => self.m_reference = value.parse().map_err(|_| bad("an integer"))?,
            "half_width" | "m" => self.half_width = value.parse().map_err(|_| bad("a number"))?,
            "noise_level" => self.noise_level = value.parse().map_err(|_| bad("a number"))?,
            "d" => {
                self.d = value.parse().map_err(|_| bad("an integer"))?;
                self.detectors = default_detector_count(self.d);
            }
            "detectors" => self.detectors = value.parse().map_err(|_| bad("an integer"))?,
            "embedding" => {
                self.embedding = AngleEmbedding::parse(value)
                    .ok_or_else(|| bad("half-circle, full-wrap or scalar"))?
            }
            "spiral_sampling" => {
                self.spiral_sampling = match value {
                    "parameter" => SpiralSampling::Parameter,
                    "arclength" => SpiralSampling::Arclength,
                    _ => return Err(bad("parameter or arclength")),
                }
            }
            "grid_side" => self.grid_side = value.parse().map_err(|_| bad("an integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "record_runtime" => {
                self.record_runtime = value.parse().map_err(|_| bad("true or false"))?
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value", path.display(), no + 1))
            })?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), no + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return fail("batch_sizes must be a non-empty list of positive integers".into());
        }
        for (name, v) in [
            ("eval_count", self.eval_count),
            ("n_bar", self.n_bar),
            ("m_reference", self.m_reference),
            ("grid_side", self.grid_side),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        check_delta(self.delta).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return fail(format!(
                "half_width must be positive, got {}",
                self.half_width
            ));
        }
        let ambient = match self.experiment {
            Experiment::Spiral => 2,
            Experiment::Ct => self.embedding.dim(),
        };
        if self.n_bar > ambient {
            return fail(format!(
                "n_bar = {} exceeds the ambient dimension {ambient}",
                self.n_bar
            ));
        }
        if self.experiment == Experiment::Ct {
            if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
                return fail(format!(
                    "noise_level must be non-negative, got {}",
                    self.noise_level
                ));
            }
            if self.d < MIN_IMAGE_SIDE {
                return fail(format!(
                    "d must be at least {MIN_IMAGE_SIDE}, got {}",
                    self.d
                ));
            }
            if self.detectors < 3 || self.detectors % 2 == 0 {
                return fail(format!(
                    "detectors must be odd and at least 3, got {}",
                    self.detectors
                ));
            }
            if let Some(k) = self.batch_sizes.iter().find(|&&k| k < 4) {
                return fail(format!(
                    "ct batch sizes must be at least 4 for the spline baseline, got {k}"
                ));
            }
            if self.half_width < 1.0 {
                return fail(format!(
                    "half_width must be at least 1 to contain embedded angles, got {}",
                    self.half_width
                ));
            }
        }
        Ok(())
    }

    /// Ordered `key=value` pairs; feeding them back through [`set`](Self::set)
    /// reproduces the config.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let sizes: Vec<String> = self.batch_sizes.iter().map(|k| k.to_string()).collect();
        let mut kv = vec![
            ("experiment", self.experiment.name().to_string()),
            ("batch_sizes", sizes.join(",")),
            ("eval_count", self.eval_count.to_string()),
            ("n_bar", self.n_bar.to_string()),
            ("delta", self.delta.to_string()),
            ("m_reference", self.m_reference.to_string()),
            ("half_width", self.half_width.to_string()),
        ];
        match self.experiment {
            Experiment::Spiral => {
                kv.push(("spiral_sampling", self.spiral_sampling.name().to_string()));
                kv.push(("grid_side", self.grid_side.to_string()));
            }
            Experiment::Ct => {
                kv.push(("noise_level", self.noise_level.to_string()));
                kv.push(("d", self.d.to_string()));
                kv.push(("detectors", self.detectors.to_string()));
                kv.push(("embedding", self.embedding.name().to_string()));
            }
        }
        kv.push(("seed", self.seed.to_string()));
        kv.push(("output_dir", self.output_dir.display().to_string()));
        kv.push(("record_runtime", self.record_runtime.to_string()));
        kv
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.key_values() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
