//! Parallel-beam tomography on the square `[-1, 1]²`.
//!
//! Pixel `(row, col)` of a `d × d` grid has its center at
//! `x = -1 + (col + ½)·2/d`, `y = 1 - (row + ½)·2/d` (row 0 at the top).
//! A projection at angle `θ` integrates along the direction
//! `(-sin θ, cos θ)` and is sampled at detector offsets `s` along
//! `(cos θ, sin θ)`, uniformly on `[-√2, √2]`.

mod fbp;
mod phantom;
mod radon;

pub use fbp::{fbp, ramp_filter};
pub use phantom::{add_noise, shepp_logan, shepp_logan_value, Ellipse, MODIFIED_SHEPP_LOGAN};
pub use radon::radon_forward;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, PointCloud};

pub const MIN_IMAGE_SIDE: usize = 16;

/// RNG stream reserved for image noise.
pub(crate) const NOISE_STREAM: u64 = 3;

/// Square image covering `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pixels: Matrix,
}

impl ImageGrid {
    pub fn zeros(d: usize) -> Result<Self> {
        check_side(d)?;
        Ok(ImageGrid {
            pixels: Matrix::zeros(d, d),
        })
    }

    pub fn from_matrix(pixels: Matrix) -> Result<Self> {
        if pixels.rows() != pixels.cols() {
            return Err(Error::DimensionMismatch {
                context: "image must be square",
                expected: pixels.rows(),
                found: pixels.cols(),
            });
        }
        check_side(pixels.rows())?;
        if !pixels.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("image contains non-finite pixels".into()));
        }
        Ok(ImageGrid { pixels })
    }

    /// Samples `f(x, y)` at every pixel center.
    pub fn from_fn(d: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_side(d)?;
        let h = pixel_size(d);
        Ok(ImageGrid {
            pixels: Matrix::from_fn(d, d, |r, c| f(pixel_x(c, h), pixel_y(r, h))),
        })
    }

    pub fn side(&self) -> usize {
        self.pixels.rows()
    }

    pub fn pixel_size(&self) -> f64 {
        pixel_size(self.side())
    }

    pub fn pixels(&self) -> &Matrix {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut Matrix {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels.get(row, col)
    }

    /// Center of pixel `(row, col)`.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.pixel_size();
        (pixel_x(col, h), pixel_y(row, h))
    }

    /// `self * a + other * b`.
    pub fn combine(&self, a: f64, other: &ImageGrid, b: f64) -> Result<ImageGrid> {
        if other.side() != self.side() {
            return Err(Error::DimensionMismatch {
                context: "image side",
                expected: self.side(),
                found: other.side(),
            });
        }
        let data = self
            .pixels
            .as_slice()
            .iter()
            .zip(other.pixels.as_slice())
            .map(|(x, y)| a * x + b * y)
            .collect();
        ImageGrid::from_matrix(Matrix::from_vec(self.side(), self.side(), data)?)
    }
}

fn check_side(d: usize) -> Result<()> {
    if d < MIN_IMAGE_SIDE {
        return Err(Error::InvalidParameter(format!(
            "image side {d} is below the minimum of {MIN_IMAGE_SIDE}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn pixel_size(d: usize) -> f64 {
    2.0 / d as f64
}

#[inline]
fn pixel_x(col: usize, h: f64) -> f64 {
    -1.0 + (col as f64 + 0.5) * h
}

#[inline]
fn pixel_y(row: usize, h: f64) -> f64 {
    1.0 - (row as f64 + 0.5) * h
}

/// Default detector count for a `d`-pixel image: the smallest odd count
/// covering the diagonal, plus four guard bins.
pub fn default_detector_count(d: usize) -> usize {
    let mut nb = (d as f64 * std::f64::consts::SQRT_2).ceil() as usize;
    if nb % 2 == 0 {
        nb += 1;
    }
    nb + 4
}

/// Detector-by-angle projection data. Columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    bins: usize,
    angles_deg: Vec<f64>,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(bins: usize, angles_deg: Vec<f64>) -> Result<Self> {
        let data = vec![0.0; bins * angles_deg.len()];
        Sinogram::from_column_major(bins, angles_deg, data)
    }

    /// `data[j * bins + b]` holds bin `b` of angle `j`.
    pub fn from_column_major(bins: usize, angles_deg: Vec<f64>, data: Vec<f64>) -> Result<Self> {
        if bins == 0 || bins % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "detector count must be odd, got {bins}"
            )));
        }
        check_angles(&angles_deg)?;
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "sinogram angles must be strictly increasing".into(),
            ));
        }
        if data.len() != bins * angles_deg.len() {
            return Err(Error::DimensionMismatch {
                context: "sinogram storage",
                expected: bins * angles_deg.len(),
                found: data.len(),
            });
        }
        Ok(Sinogram {
            bins,
            angles_deg,
            data,
        })
    }

    /// Builds from a `bins × angles` row-major matrix.
    pub fn from_matrix(m: &Matrix, angles_deg: Vec<f64>) -> Result<Self> {
        if m.cols() != angles_deg.len() {
            return Err(Error::DimensionMismatch {
                context: "sinogram columns vs angles",
                expected: angles_deg.len(),
                found: m.cols(),
            });
        }
        let mut data = Vec::with_capacity(m.rows() * m.cols());
        for j in 0..m.cols() {
            data.extend((0..m.rows()).map(|b| m.get(b, j)));
        }
        Sinogram::from_column_major(m.rows(), angles_deg, data)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn angle_count(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.bins..(j + 1) * self.bins]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.bins..(j + 1) * self.bins]
    }

    pub fn get(&self, bin: usize, j: usize) -> f64 {
        self.data[j * self.bins + bin]
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn columns_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.bins)
    }

    /// Detector spacing `2√2 / (bins - 1)`.
    pub fn detector_spacing(&self) -> f64 {
        detector_spacing(self.bins)
    }

    /// Offset of detector bin `b`.
    pub fn detector_offset(&self, b: usize) -> f64 {
        (b as f64 - (self.bins - 1) as f64 / 2.0) * self.detector_spacing()
    }

    /// `bins × angles` row-major copy.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.bins, self.angle_count(), |b, j| self.get(b, j))
    }
}

pub(crate) fn detector_spacing(bins: usize) -> f64 {
    if bins > 1 {
        2.0 * std::f64::consts::SQRT_2 / (bins - 1) as f64
    } else {
        2.0 * std::f64::consts::SQRT_2
    }
}

pub(crate) fn check_angles(angles_deg: &[f64]) -> Result<()> {
    if let Some(a) = angles_deg
        .iter()
        .find(|a| !(a.is_finite() && (0.0..180.0).contains(*a)))
    {
        return Err(Error::OutOfDomain(format!(
            "projection angle {a} outside [0, 180)"
        )));
    }
    Ok(())
}

/// `k` evenly spaced angles on `[0, 180)`.
pub fn uniform_angles(k: usize) -> Vec<f64> {
    (0..k).map(|i| 180.0 * i as f64 / k as f64).collect()
}

/// Mapping from projection angle to ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleEmbedding {
    /// `θ ↦ (cos πθ/180, sin πθ/180)`: the upper half of the unit circle.
    #[default]
    HalfCircle,
    /// `θ ↦ (cos 2πθ/180, sin 2πθ/180)`: identifies 0° with 180°.
    FullWrap,
    /// `θ ↦ θ/180`.
    Scalar,
}

impl AngleEmbedding {
    pub fn dim(self) -> usize {
        match self {
            AngleEmbedding::HalfCircle | AngleEmbedding::FullWrap => 2,
            AngleEmbedding::Scalar => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AngleEmbedding::HalfCircle => "half-circle",
            AngleEmbedding::FullWrap => "full-wrap",
            AngleEmbedding::Scalar => "scalar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "half-circle" => Some(AngleEmbedding::HalfCircle),
            "full-wrap" => Some(AngleEmbedding::FullWrap),
            "scalar" => Some(AngleEmbedding::Scalar),
            _ => None,
        }
    }
}

/// Embeds projection angles (degrees) as points.
pub fn embed_angles(angles_deg: &[f64], embedding: AngleEmbedding) -> Result<PointCloud> {
    check_angles(angles_deg)?;
    let mut coords = Vec::with_capacity(angles_deg.len() * embedding.dim());
    for &a in angles_deg {
        match embedding {
            AngleEmbedding::HalfCircle => {
                let r = a.to_radians();
                coords.extend([r.cos(), r.sin()]);
            }
            AngleEmbedding::FullWrap => {
                let r = 2.0 * a.to_radians();
                coords.extend([r.cos(), r.sin()]);
            }
            AngleEmbedding::Scalar => coords.push(a / 180.0),
        }
    }
    PointCloud::from_flat(embedding.dim(), coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_values() {
        let c = embed_angles(&[0.0, 90.0, 45.0], AngleEmbedding::HalfCircle).unwrap();
        assert_eq!(c.point(0), &[1.0, 0.0]);
        assert!(c.point(1)[0].abs() < 1e-15 && (c.point(1)[1] - 1.0).abs() < 1e-15);
        for p in c.iter() {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-15);
        }
        let s = embed_angles(&[0.0, 90.0], AngleEmbedding::Scalar).unwrap();
        assert_eq!(s.as_flat(), &[0.0, 0.5]);
        assert!(embed_angles(&[180.0], AngleEmbedding::HalfCircle).is_err());
        assert!(embed_angles(&[-1.0], AngleEmbedding::Scalar).is_err());
    }

    #[test]
    fn half_circle_is_injective_on_grid() {
        let a = uniform_angles(720);
        let c = embed_angles(&a, AngleEmbedding::HalfCircle).unwrap();
        for i in 1..a.len() {
            let d = crate::matrix::sq_dist(c.point(i), c.point(i - 1));
            assert!(d > 0.0);
        }
    }

    #[test]
    fn default_detector_count_for_256() {
        assert_eq!(default_detector_count(256), 367);
        assert_eq!(default_detector_count(64) % 2, 1);
    }

    #[test]
    fn sinogram_validation() {
        assert!(Sinogram::zeros(4, vec![0.0]).is_err());
        assert!(Sinogram::zeros(5, vec![10.0, 5.0]).is_err());
        assert!(Sinogram::zeros(5, vec![0.0, 180.0]).is_err());
        let s = Sinogram::zeros(5, vec![0.0, 90.0]).unwrap();
        assert_eq!(s.detector_offset(2), 0.0);
        assert!((s.detector_offset(4) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn small_images_rejected() {
        assert!(ImageGrid::zeros(15).is_err());
        assert!(ImageGrid::zeros(16).is_ok());
    }
}
