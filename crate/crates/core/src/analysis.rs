//! Baselines and error metrics for the experiments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tomo::{fbp, ImageGrid, Sinogram};

/// Frobenius norm of `a - b`.
pub fn frobenius_error(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "frobenius error operands",
            expected: a.rows() * a.cols(),
            found: b.rows() * b.cols(),
        });
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub batch: usize,
    /// Frobenius norm of the difference against the reference.
    pub error: f64,
    pub runtime_s: f64,
}

pub const REPORT_HEADER: &str = "method,batch,error,runtime_s";

pub fn reports_to_csv(reports: &[ErrorReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.3}",
            r.method, r.batch, r.error, r.runtime_s
        );
    }
    out
}

pub fn write_reports_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    std::fs::write(path, reports_to_csv(reports)).map_err(|e| Error::io(path, e))
}

/// Natural cubic spline factorization for a fixed, strictly increasing knot set.
///
/// Many value series sharing the same knots reuse one tridiagonal
/// elimination.
#[derive(Debug, Clone)]
pub struct NaturalSplineKnots {
    x: Vec<f64>,
    // Thomas-algorithm coefficients for the interior second derivatives
    upper: Vec<f64>,
    pivot: Vec<f64>,
}

impl NaturalSplineKnots {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a spline needs at least 2 knots, got {}",
                x.len()
            )));
        }
        if x.windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidParameter(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        let interior = n.saturating_sub(2);
        let mut upper = vec![0.0; interior];
        let mut pivot = vec![0.0; interior];
        for k in 0..interior {
            let i = k + 1;
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let diag = 2.0 * (h0 + h1);
            let p = if k == 0 {
                diag
            } else {
                diag - h0 * upper[k - 1]
            };
            pivot[k] = p;
            upper[k] = h1 / p;
        }
        Ok(NaturalSplineKnots { x, upper, pivot })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Second derivatives at the knots for values `y` (zero at both ends).
    pub fn second_derivatives(&self, y: &[f64]) -> Vec<f64> {
        let x = &self.x;
        let n = x.len();
        let mut m = vec![0.0; n];
        let interior = n - 2;
        if interior == 0 {
            return m;
        }
        let mut z = vec![0.0; interior];
        for k in 0..interior {
            let i = k + 1;
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let carried = if k == 0 { rhs } else { rhs - h0 * z[k - 1] };
            z[k] = carried / self.pivot[k];
        }
        m[interior] = z[interior - 1];
        for k in (0..interior - 1).rev() {
            m[k + 1] = z[k] - self.upper[k] * m[k + 2];
        }
        m
    }

    /// Interval index and clamped position for a query.
    fn locate(&self, q: f64) -> (usize, f64, bool) {
        let x = &self.x;
        let n = x.len();
        if q <= x[0] {
            return (0, x[0], q < x[0]);
        }
        if q >= x[n - 1] {
            return (n - 2, x[n - 1], q > x[n - 1]);
        }
        let i = x.partition_point(|&k| k <= q) - 1;
        (i.min(n - 2), q, false)
    }

    #[inline]
    fn eval_at(&self, y: &[f64], m: &[f64], i: usize, q: f64) -> f64 {
        let x = &self.x;
        let h = x[i + 1] - x[i];
        let a = (x[i + 1] - q) / h;
        let b = (q - x[i]) / h;
        a * y[i]
            + b * y[i + 1]
            + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }
}

/// Natural cubic spline through one value series.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    knots: NaturalSplineKnots,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "spline knots vs values",
                expected: x.len(),
                found: y.len(),
            });
        }
        let knots = NaturalSplineKnots::new(x)?;
        let m = knots.second_derivatives(&y);
        Ok(NaturalSpline { knots, y, m })
    }

    /// Value at `q`; queries beyond the end knots take the end knot's value.
    pub fn eval(&self, q: f64) -> f64 {
        let (i, q, _) = self.knots.locate(q);
        self.knots.eval_at(&self.y, &self.m, i, q)
    }
}

/// Spline-interpolated sinogram plus how many queries fell outside the knot range.
#[derive(Debug, Clone)]
pub struct SplineSinogram {
    pub sinogram: Sinogram,
    pub clamped: usize,
}

/// Interpolates every detector row over angle with a natural cubic spline.
///
/// Query angles outside the training range are clamped to the nearest end
/// knot. `query_angles` must be strictly increasing.
pub fn spline_interpolate_sinogram(
    train: &Sinogram,
    query_angles: &[f64],
) -> Result<SplineSinogram> {
    if train.angle_count() < 4 {
        return Err(Error::InvalidParameter(format!(
            "spline interpolation needs at least 4 training angles, got {}",
            train.angle_count()
        )));
    }
    let knots = NaturalSplineKnots::new(train.angles_deg().to_vec())?;
    let nb = train.bins();
    let rows: Vec<Vec<f64>> = (0..nb)
        .map(|b| (0..train.angle_count()).map(|j| train.get(b, j)).collect())
        .collect();
    let second: Vec<Vec<f64>> = rows.iter().map(|y| knots.second_derivatives(y)).collect();

    let mut out = Sinogram::zeros(nb, query_angles.to_vec())?;
    let mut clamped = 0;
    for (j, &q) in query_angles.iter().enumerate() {
        let (i, qc, was_clamped) = knots.locate(q);
        clamped += usize::from(was_clamped);
        for (b, v) in out.column_mut(j).iter_mut().enumerate() {
            *v = knots.eval_at(&rows[b], &second[b], i, qc);
        }
    }
    Ok(SplineSinogram {
        sinogram: out,
        clamped,
    })
}

/// Direct reconstruction from the sparse training projections.
pub fn training_only_reconstruction(train: &Sinogram, d: usize) -> Result<ImageGrid> {
    fbp(train, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frobenius_basics() {
        let a = Matrix::from_vec(2, 2, vec![3.0, 1.0, 4.0, 1.0]).unwrap();
        assert_eq!(frobenius_error(&a, &a).unwrap(), 0.0);
        let b = Matrix::from_vec(2, 2, vec![2.0, 1.0, 4.0, -1.0]).unwrap();
        assert!((frobenius_error(&a, &b).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(frobenius_error(&a, &Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn frobenius_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Matrix::from_fn(10, 10, |_, _| rng.random_range(-3.0..3.0));
        let b = Matrix::from_fn(10, 10, |_, _| rng.random_range(-3.0..3.0));
        let mut s = 0.0;
        for r in 0..10 {
            for c in 0..10 {
                s += (a.get(r, c) - b.get(r, c)).powi(2);
            }
        }
        assert!((frobenius_error(&a, &b).unwrap() - s.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn frobenius_is_a_metric(v in proptest::collection::vec(-100.0f64..100.0, 27)) {
            let m = |k: usize| Matrix::from_vec(3, 3, v[9 * k..9 * k + 9].to_vec()).unwrap();
            let (a, b, c) = (m(0), m(1), m(2));
            let ab = frobenius_error(&a, &b).unwrap();
            prop_assert_eq!(ab, frobenius_error(&b, &a).unwrap());
            prop_assert!(frobenius_error(&a, &a).unwrap() <= 1e-15);
            let ac = frobenius_error(&a, &c).unwrap();
            let cb = frobenius_error(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }
    }

    #[test]
    fn csv_format() {
        let csv = reports_to_csv(&[ErrorReport {
            method: "learned".into(),
            batch: 50,
            error: 1.25,
            runtime_s: 0.5,
        }]);
        assert_eq!(csv, "method,batch,error,runtime_s\nlearned,50,1.25,0.500\n");
    }

    #[test]
    fn spline_interpolates_knots_and_reproduces_lines() {
        let x = vec![0.0, 1.0, 2.5, 3.0, 4.5, 7.0];
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3f64).sin()).collect();
        let s = NaturalSpline::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-12);
        }
        let line =
            NaturalSpline::new(x.clone(), x.iter().map(|v| 2.0 * v - 1.0).collect()).unwrap();
        for q in [0.3, 1.7, 2.9, 6.1] {
            assert!((line.eval(q) - (2.0 * q - 1.0)).abs() < 1e-8);
        }
        // clamped outside
        assert_eq!(s.eval(-1.0), y[0]);
        assert_eq!(s.eval(9.0), y[5]);
    }

    #[test]
    fn spline_has_zero_end_curvature_and_continuous_slope() {
        let x = vec![0.0, 1.0, 2.0, 3.5, 5.0];
        let y = vec![0.0, 2.0, -1.0, 0.5, 3.0];
        let knots = NaturalSplineKnots::new(x.clone()).unwrap();
        let m = knots.second_derivatives(&y);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[4], 0.0);
        let s = NaturalSpline::new(x, y).unwrap();
        let e = 1e-6;
        for k in [1.0, 2.0, 3.5] {
            let left = (s.eval(k) - s.eval(k - e)) / e;
            let right = (s.eval(k + e) - s.eval(k)) / e;
            assert!((left - right).abs() < 1e-4);
        }
    }

    #[test]
    fn sinogram_spline_exact_at_knots() {
        let angles = vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..7 * 6).map(|_| rng.random_range(0.0..2.0)).collect();
        let train = Sinogram::from_column_major(7, angles.clone(), data).unwrap();
        let out = spline_interpolate_sinogram(&train, &[0.0, 45.0, 90.0, 150.0, 170.0]).unwrap();
        assert_eq!(out.clamped, 1);
        for b in 0..7 {
            assert!((out.sinogram.get(b, 0) - train.get(b, 0)).abs() < 1e-12);
            assert!((out.sinogram.get(b, 2) - train.get(b, 3)).abs() < 1e-12);
            assert!((out.sinogram.get(b, 3) - train.get(b, 5)).abs() < 1e-12);
            assert_eq!(out.sinogram.get(b, 4), train.get(b, 5));
        }
    }

    #[test]
    fn sinogram_spline_reproduces_linear_rows() {
        let angles: Vec<f64> = (0..10).map(|i| 15.0 * i as f64 + 2.0).collect();
        let nb = 5;
        let mut data = Vec::new();
        for a in &angles {
            for b in 0..nb {
                data.push(0.01 * b as f64 * a + b as f64);
            }
        }
        let train = Sinogram::from_column_major(nb, angles, data).unwrap();
        let q = [5.5, 47.25, 100.0, 130.9];
        let out = spline_interpolate_sinogram(&train, &q).unwrap();
        for (j, a) in q.iter().enumerate() {
            for b in 0..nb {
                let want = 0.01 * b as f64 * a + b as f64;
                assert!((out.sinogram.get(b, j) - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spline_needs_four_knots() {
        let train = Sinogram::zeros(5, vec![0.0, 60.0, 120.0]).unwrap();
        assert!(spline_interpolate_sinogram(&train, &[10.0]).is_err());
    }

    #[test]
    fn empty_training_sinogram_rejected() {
        let train = Sinogram::zeros(5, vec![]).unwrap();
        assert!(training_only_reconstruction(&train, 16).is_err());
    }
}
