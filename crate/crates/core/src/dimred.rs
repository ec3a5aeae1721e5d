//! Low-rank projection learned from the block difference matrix.
//!
//! Every training point is paired with every reference point drawn uniformly
//! from the hypercube `[-M, M]^n`; the stacked differences form a tall matrix
//! whose right singular vectors span the directions carrying most of the
//! squared pairwise distance. The top `n̄` of them define the projection used
//! by the kernel estimator.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix, PointCloud};

/// Row count above which the basis is taken from the `n × n` Gram matrix
/// instead of a direct decomposition of the stacked difference matrix.
pub const GRAM_ROW_THRESHOLD: usize = 10_000;

/// RNG stream reserved for reference-set draws.
pub(crate) const REFERENCE_STREAM: u64 = 2;

/// Points drawn uniformly from the hypercube `[-M, M]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    points: PointCloud,
    half_width: f64,
}

impl ReferenceSet {
    /// Draws `m` points from `[-half_width, half_width]^dim`.
    pub fn sample(m: usize, dim: usize, half_width: f64, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyInput("reference set size must be positive"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hypercube half-width must be positive and finite, got {half_width}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(REFERENCE_STREAM);
        let coords = (0..m * dim)
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        Ok(ReferenceSet {
            points: PointCloud::from_flat(dim, coords)?,
            half_width,
        })
    }

    /// Wraps existing points, checking that they lie inside the hypercube.
    pub fn from_points(points: PointCloud, half_width: f64) -> Result<Self> {
        if let Some(v) = points.as_flat().iter().find(|v| v.abs() > half_width) {
            return Err(Error::OutOfDomain(format!(
                "reference coordinate {v} outside [-{half_width}, {half_width}]"
            )));
        }
        Ok(ReferenceSet { points, half_width })
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

/// Orthonormal basis of the top right singular vectors plus the whole
/// singular spectrum of the difference matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    ambient_dim: usize,
    target_dim: usize,
    // target_dim vectors of length ambient_dim, stored contiguously
    vectors: Vec<f64>,
    singular_values: Vec<f64>,
}

impl ProjectionBasis {
    pub(crate) fn from_parts(
        ambient_dim: usize,
        target_dim: usize,
        vectors: Vec<f64>,
        singular_values: Vec<f64>,
    ) -> Result<Self> {
        if target_dim == 0 || target_dim > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "target dimension {target_dim} must lie in 1..={ambient_dim}"
            )));
        }
        if vectors.len() != ambient_dim * target_dim {
            return Err(Error::DimensionMismatch {
                context: "projection basis storage",
                expected: ambient_dim * target_dim,
                found: vectors.len(),
            });
        }
        Ok(ProjectionBasis {
            ambient_dim,
            target_dim,
            vectors,
            singular_values,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    /// The `l`-th right singular vector (0-based).
    pub fn vector(&self, l: usize) -> &[f64] {
        &self.vectors[l * self.ambient_dim..(l + 1) * self.ambient_dim]
    }

    pub(crate) fn vectors_flat(&self) -> &[f64] {
        &self.vectors
    }

    /// Full spectrum, non-increasing; trailing zeros when the matrix is rank deficient.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Coordinates of `x` in the basis.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: self.ambient_dim,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.target_dim];
        self.project_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (l, o) in out.iter_mut().enumerate() {
            *o = dot(x, self.vector(l));
        }
    }

    /// Projects every point of a cloud; returns an `n̄`-dimensional cloud.
    pub fn project_cloud(&self, cloud: &PointCloud) -> Result<PointCloud> {
        if cloud.dim() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: self.ambient_dim,
                found: cloud.dim(),
            });
        }
        let mut coords = vec![0.0; cloud.len() * self.target_dim];
        for (x, out) in cloud.iter().zip(coords.chunks_exact_mut(self.target_dim)) {
            self.project_into(x, out);
        }
        PointCloud::from_flat(self.target_dim, coords)
    }
}

/// Stacks `x_i - z_j` for every pair; row `i * m + j` (0-based) holds `x_i - z_j`.
pub fn build_a1(samples: &PointCloud, reference: &ReferenceSet) -> Result<Matrix> {
    let z = reference.points();
    if samples.is_empty() {
        return Err(Error::EmptyInput("sample cloud"));
    }
    if z.is_empty() {
        return Err(Error::EmptyInput("reference set"));
    }
    if samples.dim() != z.dim() {
        return Err(Error::DimensionMismatch {
            context: "samples vs reference set",
            expected: samples.dim(),
            found: z.dim(),
        });
    }
    let n = samples.dim();
    let mut data = Vec::with_capacity(samples.len() * z.len() * n);
    for x in samples.iter() {
        for zj in z.iter() {
            data.extend(x.iter().zip(zj).map(|(a, b)| a - b));
        }
    }
    Matrix::from_vec(samples.len() * z.len(), n, data)
}

/// Right singular vectors and singular values of `a1`, keeping the top `target_dim` vectors.
///
/// Ties between equal singular values keep the decomposition's order; each
/// vector is signed so its first nonzero component is positive.
pub fn svd_basis(a1: &Matrix, target_dim: usize) -> Result<ProjectionBasis> {
    let (rows, n) = a1.shape();
    if rows == 0 || n == 0 {
        return Err(Error::EmptyInput("difference matrix"));
    }
    if target_dim == 0 || target_dim > n {
        return Err(Error::InvalidParameter(format!(
            "target dimension {target_dim} must lie in 1..={n}"
        )));
    }
    if !a1.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "difference matrix contains non-finite entries".into(),
        ));
    }

    // (singular value, right vector) pairs, n of them
    let mut pairs: Vec<(f64, Vec<f64>)> = if rows > GRAM_ROW_THRESHOLD || rows < n {
        gram_pairs(a1)
    } else {
        let m = DMatrix::from_row_slice(rows, n, a1.as_slice());
        let svd = SVD::try_new(m, false, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD did not return right vectors".into()))?;
        svd.singular_values
            .iter()
            .enumerate()
            .map(|(l, &s)| (s, v_t.row(l).iter().copied().collect()))
            .collect()
    };

    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, v) in pairs.iter_mut() {
        fix_sign(v);
    }

    let singular_values = pairs.iter().map(|(s, _)| *s).collect();
    let vectors = pairs
        .iter()
        .take(target_dim)
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    ProjectionBasis::from_parts(n, target_dim, vectors, singular_values)
}

fn gram_pairs(a1: &Matrix) -> Vec<(f64, Vec<f64>)> {
    let n = a1.cols();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for r in 0..a1.rows() {
        let row = a1.row(r);
        for i in 0..n {
            for j in i..n {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(gram);
    (0..n)
        .map(|l| {
            let s = eig.eigenvalues[l].max(0.0).sqrt();
            (s, eig.eigenvectors.column(l).iter().copied().collect())
        })
        .collect()
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v
        .iter()
        .find(|x| x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE))
    {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
