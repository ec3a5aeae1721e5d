use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ImageGrid, NOISE_STREAM};
use crate::error::{Error, Result};

/// Ellipse with constant additive intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Counter-clockwise rotation in degrees.
    pub tilt_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.tilt_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }
}

const fn ellipse(intensity: f64, semi_x: f64, semi_y: f64, cx: f64, cy: f64, tilt: f64) -> Ellipse {
    Ellipse {
        intensity,
        semi_x,
        semi_y,
        center_x: cx,
        center_y: cy,
        tilt_deg: tilt,
    }
}

/// Modified (higher-contrast) Shepp–Logan head phantom.
pub const MODIFIED_SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    ellipse(-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    ellipse(-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    ellipse(0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    ellipse(0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    ellipse(0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Phantom intensity at a point: the clamped sum over containing ellipses.
pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    MODIFIED_SHEPP_LOGAN
        .iter()
        .filter(|e| e.contains(x, y))
        .map(|e| e.intensity)
        .sum::<f64>()
        .max(0.0)
}

/// `d × d` rendering of the modified Shepp–Logan phantom, sampled at pixel centers.
pub fn shepp_logan(d: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(d, shepp_logan_value)
}

/// `img + level · U`, with `U` i.i.d. uniform on `[0, 1)`.
pub fn add_noise(img: &ImageGrid, level: f64, seed: u64) -> Result<ImageGrid> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {level}"
        )));
    }
    let mut out = img.clone();
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    for p in out.pixels_mut().as_mut_slice() {
        *p += level * rng.random::<f64>();
    }
    Ok(out)
}
