//! On-disk formats for matrices, rasters and angle lists.
//!
//! * `.mxf`: `"MXF1"`, rows and cols as `u32` little-endian, four reserved
//!   zero bytes, then `rows × cols` little-endian `f64` in row-major order.
//! * `.pgm`: binary 16-bit PGM (`P5`, maxval 65535, big-endian samples) with
//!   values mapped affinely from `[min, max]`; the mapping is written to a
//!   `<name>.pgm.scale` sidecar.
//! * `.angles.txt`: one angle in decimal degrees per line.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tomo::Sinogram;

pub const MXF_MAGIC: &[u8; 4] = b"MXF1";
pub const MXF_HEADER_LEN: usize = 16;

pub fn encode_mxf(m: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows())
        .map_err(|_| Error::InvalidParameter("matrix too tall for MXF".into()))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::InvalidParameter("matrix too wide for MXF".into()))?;
    let mut out = Vec::with_capacity(MXF_HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MXF_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mxf(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < MXF_HEADER_LEN {
        return Err(Error::Truncated { path: path.into() });
    }
    if &bytes[..4] != MXF_MAGIC {
        return Err(Error::format(path, "missing MXF1 magic"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[MXF_HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(path, "matrix dimensions overflow"))?;
    if body.len() < expected {
        return Err(Error::Truncated { path: path.into() });
    }
    if body.len() > expected {
        return Err(Error::format(path, "trailing bytes after matrix data"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn write_mxf(path: &Path, m: &Matrix) -> Result<()> {
    std::fs::write(path, encode_mxf(m)?).map_err(|e| Error::io(path, e))
}

pub fn read_mxf(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mxf(&bytes, path)
}

/// Affine map from stored 16-bit samples back to values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmScale {
    pub min: f64,
    pub max: f64,
}

impl PgmScale {
    pub fn value(&self, sample: u16) -> f64 {
        self.min + (self.max - self.min) * f64::from(sample) / 65535.0
    }
}

fn scale_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

pub fn encode_pgm16(m: &Matrix) -> (Vec<u8>, PgmScale) {
    let (min, max) = m
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (min, max) = if min.is_finite() {
        (min, max)
    } else {
        (0.0, 0.0)
    };
    let span = max - min;
    let mut out = format!("P5\n{} {}\n65535\n", m.cols(), m.rows()).into_bytes();
    out.reserve(2 * m.as_slice().len());
    for &v in m.as_slice() {
        let s = if span > 0.0 {
            ((v - min) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&s.to_be_bytes());
    }
    (out, PgmScale { min, max })
}

/// Writes the raster and its `.scale` sidecar.
pub fn write_pgm16(path: &Path, m: &Matrix) -> Result<PgmScale> {
    let (bytes, scale) = encode_pgm16(m);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = scale_sidecar(path);
    let text = format!("min={}\nmax={}\n", scale.min, scale.max);
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(scale)
}

/// Reads a raster written by [`write_pgm16`], restoring values from the sidecar.
pub fn read_pgm16(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Truncated { path: path.into() });
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(Error::format(path, "expected a 16-bit binary PGM"));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad PGM dimension {s:?}")))
    };
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = bytes.get(pos..).unwrap_or_default();
    if body.len() < 2 * rows * cols {
        return Err(Error::Truncated { path: path.into() });
    }
    let side = scale_sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut scale = PgmScale { min: 0.0, max: 0.0 };
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(&side, format!("bad line {line:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::format(&side, format!("bad number {v:?}")))?;
        match k.trim() {
            "min" => scale.min = v,
            "max" => scale.max = v,
            other => return Err(Error::format(&side, format!("unknown key {other:?}"))),
        }
    }
    let data = body[..2 * rows * cols]
        .chunks_exact(2)
        .map(|c| scale.value(u16::from_be_bytes([c[0], c[1]])))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// `sino.mxf` → `sino.angles.txt`.
pub fn angles_sidecar(path: &Path) -> PathBuf {
    path.with_extension("angles.txt")
}

pub fn write_angles(path: &Path, angles_deg: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(angles_deg.len() * 20);
    for a in angles_deg {
        text.push_str(&a.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_angles(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad angle {l:?}")))
        })
        .collect()
}

/// Writes `bins × angles` data to `path` and the angle list beside it.
pub fn write_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    write_mxf(path, &sino.to_matrix())?;
    write_angles(&angles_sidecar(path), sino.angles_deg())
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let m = read_mxf(path)?;
    let angles = read_angles(&angles_sidecar(path))?;
    Sinogram::from_matrix(&m, angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mxf_round_trips_bitwise(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let m = Matrix::from_fn(rows, cols, |r, c| f64::from_bits(seed.rotate_left((r * 7 + c) as u32) | 1) );
            let back = decode_mxf(&encode_mxf(&m).unwrap(), Path::new("m")).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn mxf_header_layout() {
        let m = Matrix::from_vec(1, 2, vec![1.0, -2.0]).unwrap();
        let b = encode_mxf(&m).unwrap();
        assert_eq!(&b[..4], b"MXF1");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..16], &[0, 0, 0, 0]);
        assert_eq!(&b[16..24], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 32);
    }

    #[test]
    fn mxf_errors() {
        let p = Path::new("x.mxf");
        assert!(matches!(
            decode_mxf(b"MXF1", p),
            Err(Error::Truncated { .. })
        ));
        let mut b = encode_mxf(&Matrix::zeros(2, 2)).unwrap();
        b[0] = b'N';
        assert!(matches!(decode_mxf(&b, p), Err(Error::Format { .. })));
        let b = encode_mxf(&Matrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            decode_mxf(&b[..30], p),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn pgm_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.pgm");
        let m = Matrix::from_fn(5, 7, |r, c| (r as f64 - 2.0) * 0.3 + c as f64 * 0.01);
        let scale = write_pgm16(&p, &m).unwrap();
        let back = read_pgm16(&p).unwrap();
        let step = (scale.max - scale.min) / 65535.0;
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() <= step);
        }
        let raw = std::fs::read(&p).unwrap();
        assert!(raw.starts_with(b"P5\n7 5\n65535\n"));
    }

    #[test]
    fn sinogram_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mxf");
        let s = Sinogram::from_column_major(
            3,
            vec![0.0, 12.5, 170.25],
            (0..9).map(f64::from).collect(),
        )
        .unwrap();
        write_sinogram(&p, &s).unwrap();
        assert!(dir.path().join("s.angles.txt").exists());
        assert_eq!(read_sinogram(&p).unwrap(), s);
    }
}
