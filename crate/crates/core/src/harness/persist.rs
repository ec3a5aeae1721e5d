//! Model container.
//!
//! ```text
//! "DXMD" | version u32 | payload length u64 | payload | crc32(payload) u32
//! ```
//!
//! All integers and floats are little-endian. The payload holds the model
//! dimensions, stabilizer, cube half-width, basis, training data and any
//! cached evaluations.

use std::path::Path;

use crate::dimred::ProjectionBasis;
use crate::error::{Error, Result};
use crate::extender::{ExtenderModel, KernelSums, SampleValues};
use crate::matrix::PointCloud;
use crate::online::{CacheEntry, EntryState, EvaluationCache};

pub const MODEL_MAGIC: &[u8; 4] = b"DXMD";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format(self.path, "payload ends early"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format(self.path, "count overflows"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::format(self.path, "count overflows"))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn encode_payload(model: &ExtenderModel, cache: Option<&EvaluationCache>) -> Vec<u8> {
    let (n, nb, p, k) = (
        model.ambient_dim(),
        model.target_dim(),
        model.value_dim(),
        model.len(),
    );
    let mut w = Writer(Vec::new());
    w.u32(n);
    w.u32(nb);
    w.u32(p);
    w.u64(k as u64);
    w.f64(model.delta());
    w.f64(model.half_width());
    let basis = model.basis();
    w.u32(basis.singular_values().len());
    w.f64s(basis.singular_values());
    w.f64s(basis.vectors_flat());
    w.f64s(model.train_points().as_flat());
    w.f64s(model.train_coords().as_flat());
    for c in model.values().components() {
        w.f64s(c);
    }
    match cache {
        None => {
            w.u8(0);
        }
        Some(cache) => {
            w.u8(1);
            w.u64(cache.kernel_evals);
            w.u64(cache.len() as u64);
            for (id, e) in cache.iter() {
                w.u32(id.len());
                w.0.extend_from_slice(id.as_bytes());
                w.u64(e.k_seen as u64);
                w.f64s(&e.query_coord);
                match &e.state {
                    EntryState::Exact { index, value } => {
                        w.u8(0);
                        w.u64(*index as u64);
                        w.f64s(value);
                    }
                    EntryState::Kernel { epsilon, sums } => {
                        w.u8(1);
                        w.f64(*epsilon);
                        w.f64(sums.shift);
                        w.f64(sums.nm_shifted);
                        w.f64s(&sums.weighted);
                    }
                }
            }
        }
    }
    w.0
}

fn decode_payload(r: &mut Reader) -> Result<(ExtenderModel, Option<EvaluationCache>)> {
    let path = r.path;
    let n = r.u32()?;
    let nb = r.u32()?;
    let p = r.u32()?;
    let k = r.len()?;
    let delta = r.f64()?;
    let half_width = r.f64()?;
    let sv_len = r.u32()?;
    let singular_values = r.f64s(sv_len)?;
    let vectors = r.f64s(n.saturating_mul(nb))?;
    let points = r.f64s(k.saturating_mul(n))?;
    let coords = r.f64s(k.saturating_mul(nb))?;
    let mut components = Vec::with_capacity(p);
    for _ in 0..p {
        components.push(r.f64s(k)?);
    }
    let invalid = |e: Error| Error::format(path, format!("inconsistent model: {e}"));
    let basis = ProjectionBasis::from_parts(n, nb, vectors, singular_values).map_err(invalid)?;
    let values = if p == 0 {
        return Err(Error::format(path, "value dimension is zero"));
    } else {
        SampleValues::from_components(components).map_err(invalid)?
    };
    let model = ExtenderModel::from_parts(
        PointCloud::from_flat(n, points).map_err(invalid)?,
        PointCloud::from_flat(nb, coords).map_err(invalid)?,
        values,
        basis,
        delta,
        half_width,
    )
    .map_err(invalid)?;

    let cache = match r.u8()? {
        0 => None,
        1 => {
            let mut cache = EvaluationCache::new();
            cache.kernel_evals = r.u64()?;
            let count = r.len()?;
            for _ in 0..count {
                let id_len = r.u32()?;
                let id = std::str::from_utf8(r.take(id_len)?)
                    .map_err(|_| Error::format(path, "cache id is not UTF-8"))?
                    .to_owned();
                let k_seen = r.len()?;
                if k_seen > k {
                    return Err(Error::format(
                        path,
                        format!("cache entry {id:?} is ahead of the model"),
                    ));
                }
                let query_coord = r.f64s(nb)?;
                let state = match r.u8()? {
                    0 => {
                        let index = r.len()?;
                        if index >= k {
                            return Err(Error::format(
                                path,
                                format!("cache entry {id:?} names sample {index}"),
                            ));
                        }
                        EntryState::Exact {
                            index,
                            value: r.f64s(p)?,
                        }
                    }
                    1 => EntryState::Kernel {
                        epsilon: r.f64()?,
                        sums: KernelSums {
                            shift: r.f64()?,
                            nm_shifted: r.f64()?,
                            weighted: r.f64s(p)?,
                        },
                    },
                    t => return Err(Error::format(path, format!("unknown cache entry tag {t}"))),
                };
                cache.insert_raw(
                    id,
                    CacheEntry {
                        query_coord,
                        state,
                        k_seen,
                    },
                );
            }
            Some(cache)
        }
        t => return Err(Error::format(path, format!("unknown cache flag {t}"))),
    };
    if r.pos != r.buf.len() {
        return Err(Error::format(path, "trailing bytes in payload"));
    }
    Ok((model, cache))
}

pub fn encode_model(model: &ExtenderModel, cache: Option<&EvaluationCache>) -> Vec<u8> {
    let payload = encode_payload(model, cache);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<(ExtenderModel, Option<EvaluationCache>)> {
    if bytes.len() >= 4 && &bytes[..4] != MODEL_MAGIC {
        return Err(Error::format(path, "not a model file (bad magic)"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { path: path.into() });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            path: path.into(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let len = usize::try_from(len).map_err(|_| Error::Truncated { path: path.into() })?;
    if body.len() < len.saturating_add(4) {
        return Err(Error::Truncated { path: path.into() });
    }
    if body.len() > len + 4 {
        return Err(Error::format(path, "trailing bytes after checksum"));
    }
    let payload = &body[..len];
    let stored = u32::from_le_bytes(body[len..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.into(),
            stored,
            computed,
        });
    }
    decode_payload(&mut Reader {
        buf: payload,
        pos: 0,
        path,
    })
}

pub fn save_model(
    path: &Path,
    model: &ExtenderModel,
    cache: Option<&EvaluationCache>,
) -> Result<()> {
    std::fs::write(path, encode_model(model, cache)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ExtenderModel, Option<EvaluationCache>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
