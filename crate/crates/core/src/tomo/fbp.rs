use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{pixel_size, ImageGrid, Sinogram};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ram–Lak filtered copy of every projection.
///
/// The frequency response is the transform of the band-limited discrete
/// ramp kernel (`1/(4Δs²)` at zero lag, `-1/(π²n²Δs²)` at odd lags, zero at
/// even lags), applied to zero-padded columns.
pub fn ramp_filter(sino: &Sinogram) -> Sinogram {
    let nb = sino.bins();
    let ds = sino.detector_spacing();
    let len = (2 * nb).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 1.0 / (4.0 * ds * ds);
    for n in (1..len / 2).step_by(2) {
        let v = -1.0 / (PI * PI * (n * n) as f64 * ds * ds);
        kernel[n].re = v;
        kernel[len - n].re = v;
    }
    forward.process(&mut kernel);
    // real and even kernel: keep the real part, fold in the inverse-FFT scale and Δs
    let response: Vec<f64> = kernel.iter().map(|c| c.re * ds / len as f64).collect();

    let mut out = sino.clone();
    out.columns_mut()
        .collect::<Vec<_>>()
        .into_par_iter()
        .for_each_init(
            || vec![Complex::new(0.0, 0.0); len],
            |buf, column| {
                for (b, slot) in buf.iter_mut().enumerate() {
                    *slot = Complex::new(if b < nb { column[b] } else { 0.0 }, 0.0);
                }
                forward.process(buf);
                for (c, r) in buf.iter_mut().zip(&response) {
                    *c *= *r;
                }
                inverse.process(buf);
                for (v, c) in column.iter_mut().zip(buf.iter()) {
                    *v = c.re;
                }
            },
        );
    out
}

/// Filtered back projection onto a `d × d` grid.
///
/// Ramp-filtered projections are smeared back with linear interpolation over
/// detector offsets and scaled by `π / na`. Pixels outside the unit disk are
/// set to zero.
pub fn fbp(sino: &Sinogram, d: usize) -> Result<ImageGrid> {
    let na = sino.angle_count();
    if na < 2 {
        return Err(Error::InvalidParameter(format!(
            "filtered back projection needs at least 2 angles, got {na}"
        )));
    }
    let mut image = ImageGrid::zeros(d)?;
    let filtered = ramp_filter(sino);
    let nb = sino.bins();
    let ds = sino.detector_spacing();
    let center = (nb - 1) as f64 / 2.0;
    let trig: Vec<(f64, f64)> = sino
        .angles_deg()
        .iter()
        .map(|a| a.to_radians().sin_cos())
        .collect();
    let h = pixel_size(d);
    let scale = PI / na as f64;
    let xs: Vec<f64> = (0..d).map(|c| -1.0 + (c as f64 + 0.5) * h).collect();
    let last = (nb - 1) as f64;

    let mut data = vec![0.0; d * d];
    data.par_chunks_mut(d).enumerate().for_each(|(r, row)| {
        let y = 1.0 - (r as f64 + 0.5) * h;
        // columns whose centers lie in the unit disk form one contiguous span
        let Some(lo) = xs.iter().position(|&x| x * x + y * y <= 1.0) else {
            return;
        };
        let hi = xs.iter().rposition(|&x| x * x + y * y <= 1.0).unwrap_or(lo);
        let span = &mut row[lo..=hi];
        let x0 = xs[lo];
        for (j, &(sin, cos)) in trig.iter().enumerate() {
            let q = filtered.column(j);
            // detector position is affine in the column index
            let base = (x0 * cos + y * sin) / ds + center;
            let step = h * cos / ds;
            for (c, acc) in span.iter_mut().enumerate() {
                let pos = base + c as f64 * step;
                if !(0.0..last).contains(&pos) {
                    continue;
                }
                let i0 = pos as usize;
                let f = pos - i0 as f64;
                *acc += q[i0] + f * (q[i0 + 1] - q[i0]);
            }
        }
        for acc in span.iter_mut() {
            *acc *= scale;
        }
    });
    *image.pixels_mut() = Matrix::from_vec(d, d, data)?;
    Ok(image)
}
