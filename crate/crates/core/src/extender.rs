//! Normalized Gaussian-kernel extension with per-query adaptive bandwidth.
//!
//! For a query `x` with projected coordinates `c`, the estimate is
//!
//! ```text
//! g(x) = Σ w_i g(x_i) / Σ w_i,    w_i = exp(-‖c - c_i‖² / ε(x)²)
//! ε(x) = -min_j ‖c - c_j‖ / ln δ
//! ```
//!
//! The bandwidth rule pins the nearest sample's weight at `exp(-(ln δ)²)`, so
//! the normalization never drops below that value. Queries that coincide
//! with a training point return the stored value.

use std::ops::Range;

use rayon::prelude::*;

use crate::dimred::{build_a1, svd_basis, ProjectionBasis, ReferenceSet};
use crate::error::{Error, Result};
use crate::matrix::{sq_dist, PointCloud};

/// Projected distance at or below which a query counts as a training point.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Stabilizer used throughout the experiments.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Lower bound on the normalization guaranteed by the adaptive bandwidth.
pub fn normalization_floor(delta: f64) -> f64 {
    let l = delta.ln();
    (-(l * l)).exp()
}

/// Function values attached to samples, `p` components each.
///
/// Stored component-major so a single weight vector sweeps each component
/// contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleValues {
    len: usize,
    components: Vec<Vec<f64>>,
}

impl SampleValues {
    pub fn scalar(values: Vec<f64>) -> Self {
        SampleValues {
            len: values.len(),
            components: vec![values],
        }
    }

    /// One row per sample.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let p = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyInput("sample values"))?;
        let mut out = SampleValues::empty(p)?;
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    /// One vector per component, each of the sample count.
    pub fn from_components(components: Vec<Vec<f64>>) -> Result<Self> {
        let len = components
            .first()
            .map(Vec::len)
            .ok_or(Error::EmptyInput("value components"))?;
        if let Some(bad) = components.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                context: "value component length",
                expected: len,
                found: bad.len(),
            });
        }
        Ok(SampleValues { len, components })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "value dimension must be at least 1".into(),
            ));
        }
        Ok(SampleValues {
            len: 0,
            components: vec![Vec::new(); dim],
        })
    }

    pub fn push(&mut self, value: &[f64]) -> Result<()> {
        if value.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "sample value",
                expected: self.dim(),
                found: value.len(),
            });
        }
        for (c, v) in self.components.iter_mut().zip(value) {
            c.push(*v);
        }
        self.len += 1;
        Ok(())
    }

    pub fn append(&mut self, other: &SampleValues) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "sample value dimension",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        for (c, o) in self.components.iter_mut().zip(&other.components) {
            c.extend_from_slice(o);
        }
        self.len += other.len;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn value(&self, i: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[i]).collect()
    }

    pub(crate) fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    /// Componentwise `(min, max)` over all samples.
    pub fn hull(&self) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect()
    }
}

/// Positive, finite kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Bandwidth(epsilon))
        } else {
            Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {epsilon}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `exp(-sq_dist / ε²)`.
#[inline]
pub fn gaussian_kernel(sq_dist: f64, epsilon: Bandwidth) -> f64 {
    (-sq_dist / (epsilon.0 * epsilon.0)).exp()
}

/// Outcome of the bandwidth rule for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    Adaptive {
        epsilon: Bandwidth,
        /// Squared projected distance to the nearest sample.
        nearest_sq: f64,
    },
    /// The query coincides with training sample `index`.
    ExactSample(usize),
}

/// How an extension value was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtensionSource {
    Sample(usize),
    Kernel { epsilon: f64, nm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub value: Vec<f64>,
    pub source: ExtensionSource,
}

impl Extension {
    /// Normalization factor, when kernel weights were used.
    pub fn nm(&self) -> Option<f64> {
        match self.source {
            ExtensionSource::Kernel { nm, .. } => Some(nm),
            ExtensionSource::Sample(_) => None,
        }
    }
}

/// Fit-time parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub target_dim: usize,
    pub reference_count: usize,
    pub half_width: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            target_dim: 2,
            reference_count: 50,
            half_width: 1.0,
            delta: DEFAULT_DELTA,
            seed: 0,
        }
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "stabilizer delta must lie strictly inside (0, 1), got {delta}; \
             the bandwidth rule divides by ln(delta)"
        )))
    }
}

fn check_in_cube(points: &PointCloud, half_width: f64) -> Result<()> {
    if !points.is_finite() {
        return Err(Error::Numerical(
            "sample points contain non-finite coordinates".into(),
        ));
    }
    if let Some(v) = points.as_flat().iter().find(|v| v.abs() > half_width) {
        return Err(Error::OutOfDomain(format!(
            "sample coordinate {v} outside [-{half_width}, {half_width}]"
        )));
    }
    Ok(())
}

/// Everything needed at query time: samples, their projections, values and basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtenderModel {
    train_points: PointCloud,
    train_coords: PointCloud,
    values: SampleValues,
    basis: ProjectionBasis,
    delta: f64,
    half_width: f64,
}

/// Draws the reference set, builds the difference matrix, takes its SVD and
/// projects the samples. No iterative training is involved.
pub fn fit(
    points: &PointCloud,
    values: &SampleValues,
    params: &FitParams,
) -> Result<ExtenderModel> {
    check_delta(params.delta)?;
    if points.is_empty() {
        return Err(Error::EmptyInput("training points"));
    }
    if values.len() != points.len() {
        return Err(Error::DimensionMismatch {
            context: "sample values vs points",
            expected: points.len(),
            found: values.len(),
        });
    }
    if params.target_dim == 0 || params.target_dim > points.dim() {
        return Err(Error::InvalidParameter(format!(
            "target dimension {} must lie in 1..={}",
            params.target_dim,
            points.dim()
        )));
    }
    let reference = ReferenceSet::sample(
        params.reference_count,
        points.dim(),
        params.half_width,
        params.seed,
    )?;
    check_in_cube(points, params.half_width)?;
    if !values.is_finite() {
        return Err(Error::Numerical(
            "sample values contain non-finite entries".into(),
        ));
    }
    let a1 = build_a1(points, &reference)?;
    let basis = svd_basis(&a1, params.target_dim)?;
    let train_coords = basis.project_cloud(points)?;
    Ok(ExtenderModel {
        train_points: points.clone(),
        train_coords,
        values: values.clone(),
        basis,
        delta: params.delta,
        half_width: params.half_width,
    })
}

impl ExtenderModel {
    pub(crate) fn from_parts(
        train_points: PointCloud,
        train_coords: PointCloud,
        values: SampleValues,
        basis: ProjectionBasis,
        delta: f64,
        half_width: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        if train_points.len() != train_coords.len() || train_points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "model sample counts",
                expected: train_points.len(),
                found: train_coords.len().min(values.len()),
            });
        }
        if train_points.dim() != basis.ambient_dim() || train_coords.dim() != basis.target_dim() {
            return Err(Error::DimensionMismatch {
                context: "model dimensions vs basis",
                expected: basis.ambient_dim(),
                found: train_points.dim(),
            });
        }
        Ok(ExtenderModel {
            train_points,
            train_coords,
            values,
            basis,
            delta,
            half_width,
        })
    }

    pub fn len(&self) -> usize {
        self.train_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_points.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }

    pub fn target_dim(&self) -> usize {
        self.basis.target_dim()
    }

    pub fn value_dim(&self) -> usize {
        self.values.dim()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn basis(&self) -> &ProjectionBasis {
        &self.basis
    }

    pub fn train_points(&self) -> &PointCloud {
        &self.train_points
    }

    pub fn train_coords(&self) -> &PointCloud {
        &self.train_coords
    }

    pub fn values(&self) -> &SampleValues {
        &self.values
    }

    /// Projects a query, checking its dimension and finiteness.
    pub fn project_query(&self, query: &[f64]) -> Result<Vec<f64>> {
        let c = self.basis.project(query)?;
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(
                "query projects to non-finite coordinates".into(),
            ));
        }
        Ok(c)
    }

    /// Bandwidth rule evaluated in projected coordinates.
    pub fn adaptive_epsilon(&self, coord: &[f64]) -> Result<BandwidthChoice> {
        if self.is_empty() {
            return Err(Error::EmptyInput("extender model has no samples"));
        }
        if coord.len() != self.target_dim() {
            return Err(Error::DimensionMismatch {
                context: "projected query",
                expected: self.target_dim(),
                found: coord.len(),
            });
        }
        let (nearest, nearest_sq) = nearest_sample(&self.train_coords, coord);
        if !nearest_sq.is_finite() {
            return Err(Error::Numerical(
                "non-finite distance to training samples".into(),
            ));
        }
        let d = nearest_sq.sqrt();
        if d <= COINCIDENCE_TOL {
            return Ok(BandwidthChoice::ExactSample(nearest));
        }
        let epsilon = Bandwidth::new(-d / self.delta.ln())
            .map_err(|_| Error::Numerical(format!("degenerate bandwidth at distance {d}")))?;
        Ok(BandwidthChoice::Adaptive {
            epsilon,
            nearest_sq,
        })
    }

    /// Extends the sampled function to `query` (ambient coordinates).
    pub fn extend(&self, query: &[f64]) -> Result<Extension> {
        let coord = self.project_query(query)?;
        let mut weights = Vec::with_capacity(self.len());
        self.extend_projected(&coord, &mut weights)
    }

    pub(crate) fn extend_projected(
        &self,
        coord: &[f64],
        weights: &mut Vec<f64>,
    ) -> Result<Extension> {
        match self.adaptive_epsilon(coord)? {
            BandwidthChoice::ExactSample(i) => Ok(Extension {
                value: self.values.value(i),
                source: ExtensionSource::Sample(i),
            }),
            BandwidthChoice::Adaptive {
                epsilon,
                nearest_sq,
            } => {
                let eps2 = epsilon.0 * epsilon.0;
                let shift = nearest_sq / eps2;
                let sums = KernelSums::accumulate(self, 0..self.len(), coord, eps2, shift, weights);
                Ok(Extension {
                    value: sums.ratio(),
                    source: ExtensionSource::Kernel {
                        epsilon: epsilon.0,
                        nm: sums.nm(),
                    },
                })
            }
        }
    }

    /// [`extend`](Self::extend) over many queries; one weight vector per query
    /// serves every value component.
    pub fn extend_batch(&self, queries: &PointCloud) -> Result<Vec<Extension>> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        if queries.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "query dimension",
                expected: self.ambient_dim(),
                found: queries.dim(),
            });
        }
        (0..queries.len())
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(self.len()),
                |weights, q| {
                    let coord = self.project_query(queries.point(q))?;
                    self.extend_projected(&coord, weights)
                },
            )
            .collect()
    }

    /// Appends samples, projecting them with the existing basis.
    pub(crate) fn append_samples(
        &mut self,
        points: &PointCloud,
        values: &SampleValues,
    ) -> Result<Range<usize>> {
        if points.dim() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "new sample dimension",
                expected: self.ambient_dim(),
                found: points.dim(),
            });
        }
        if values.len() != points.len() {
            return Err(Error::DimensionMismatch {
                context: "new sample values vs points",
                expected: points.len(),
                found: values.len(),
            });
        }
        if values.dim() != self.value_dim() {
            return Err(Error::DimensionMismatch {
                context: "new sample value dimension",
                expected: self.value_dim(),
                found: values.dim(),
            });
        }
        check_in_cube(points, self.half_width)?;
        if !values.is_finite() {
            return Err(Error::Numerical(
                "sample values contain non-finite entries".into(),
            ));
        }
        let coords = self.basis.project_cloud(points)?;
        let start = self.len();
        self.train_points.append(points)?;
        self.train_coords.append(&coords)?;
        self.values.append(values)?;
        Ok(start..self.len())
    }
}

fn nearest_sample(coords: &PointCloud, c: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, ci) in coords.iter().enumerate() {
        let d = sq_dist(c, ci);
        // NaN propagates so the caller can reject it
        if d < best.1 || d.is_nan() {
            best = (i, d);
            if d.is_nan() {
                break;
            }
        }
    }
    best
}

/// Weighted sums with all exponents offset by `shift`, i.e. every weight is
/// `exp(shift - d²/ε²)`; the true normalization is `exp(-shift) * nm_shifted`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KernelSums {
    pub shift: f64,
    pub nm_shifted: f64,
    pub weighted: Vec<f64>,
}

impl KernelSums {
    pub fn accumulate(
        model: &ExtenderModel,
        samples: Range<usize>,
        coord: &[f64],
        eps2: f64,
        shift: f64,
        weights: &mut Vec<f64>,
    ) -> Self {
        let mut sums = KernelSums {
            shift,
            nm_shifted: 0.0,
            weighted: vec![0.0; model.value_dim()],
        };
        sums.add(model, samples, coord, eps2, weights);
        sums
    }

    pub fn add(
        &mut self,
        model: &ExtenderModel,
        samples: Range<usize>,
        coord: &[f64],
        eps2: f64,
        weights: &mut Vec<f64>,
    ) {
        weights.clear();
        let shift = self.shift;
        weights.extend(
            samples
                .clone()
                .map(|i| (shift - sq_dist(coord, model.train_coords.point(i)) / eps2).exp()),
        );
        self.nm_shifted += weights.iter().sum::<f64>();
        for (acc, comp) in self.weighted.iter_mut().zip(model.values.components()) {
            *acc += weights
                .iter()
                .zip(&comp[samples.clone()])
                .map(|(w, v)| w * v)
                .sum::<f64>();
        }
    }

    pub fn nm(&self) -> f64 {
        (-self.shift).exp() * self.nm_shifted
    }

    pub fn ratio(&self) -> Vec<f64> {
        self.weighted.iter().map(|s| s / self.nm_shifted).collect()
    }
}

/// Fixed-bandwidth kernel average directly in ambient coordinates, without
/// projection or bandwidth adaptation.
pub fn kernel_average(
    points: &PointCloud,
    values: &SampleValues,
    query: &[f64],
    epsilon: Bandwidth,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("kernel average samples"));
    }
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch {
            context: "sample values vs points",
            expected: points.len(),
            found: values.len(),
        });
    }
    if query.len() != points.dim() {
        return Err(Error::DimensionMismatch {
            context: "query dimension",
            expected: points.dim(),
            found: query.len(),
        });
    }
    let eps2 = epsilon.0 * epsilon.0;
    let d2: Vec<f64> = points.iter().map(|x| sq_dist(query, x)).collect();
    let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d2.iter().map(|d| (-(d - min) / eps2).exp()).collect();
    let nm: f64 = w.iter().sum();
    Ok(values
        .components()
        .iter()
        .map(|comp| w.iter().zip(comp).map(|(w, v)| w * v).sum::<f64>() / nm)
        .collect())
}
