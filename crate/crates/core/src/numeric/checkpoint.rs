//! Binary checkpoint format.
//!
//! Layout (little-endian): the magic bytes `SWR1`, a `u64` byte length, a
//! UTF-8 JSON manifest of `{path, dtype, shape, trainable}` records, then the
//! raw parameter arrays concatenated in manifest order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Dtype, ParameterStore, Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"SWR1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    #[serde(default = "default_true")]
    pub trainable: bool,
}

fn default_true() -> bool {
    true
}

pub fn encode<T: Scalar>(store: &ParameterStore<T>) -> Vec<u8> {
    let manifest: Vec<ManifestEntry> = store
        .iter()
        .map(|(p, e)| ManifestEntry {
            path: p.to_string(),
            dtype: T::DTYPE,
            shape: e.tensor.shape().to_vec(),
            trainable: e.trainable,
        })
        .collect();
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(12 + json.len() + store.total_count() * T::DTYPE.byte_width());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, e) in store.iter() {
        for &v in e.tensor.values() {
            v.write_le(&mut out);
        }
    }
    out
}

/// Decodes a checkpoint; arrays stored in the other precision are converted.
pub fn decode<T: Scalar>(bytes: &[u8], rng_seed: u64) -> Result<ParameterStore<T>> {
    let corrupt = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(12..12 + len).ok_or_else(|| corrupt("truncated manifest"))?;
    let manifest: Vec<ManifestEntry> =
        serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    let mut pos = 12 + len;
    let mut store = ParameterStore::new(rng_seed);
    for m in manifest {
        let numel: usize = m.shape.iter().product();
        let width = m.dtype.byte_width();
        let raw = bytes
            .get(pos..pos + numel * width)
            .ok_or_else(|| Error::Checkpoint(format!("truncated data for `{}`", m.path)))?;
        pos += numel * width;
        let values: Vec<T> = match m.dtype {
            Dtype::F32 => raw.chunks_exact(4).map(|c| T::lit(f32::read_le(c) as f64)).collect(),
            Dtype::F64 => raw.chunks_exact(8).map(|c| T::lit(f64::read_le(c))).collect(),
        };
        let mut t = Tensor::new(m.shape, values).map_err(|e| Error::Checkpoint(format!("`{}`: {e}", m.path)))?;
        t.requires_grad = m.trainable;
        store.insert(&m.path, t, m.trainable)?;
    }
    if pos != bytes.len() {
        return Err(corrupt("trailing bytes after parameter data"));
    }
    Ok(store)
}

pub fn save<T: Scalar>(store: &ParameterStore<T>, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(store))?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path, rng_seed: u64) -> Result<ParameterStore<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, rng_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Init;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut s = ParameterStore::<f32>::new(0);
        s.add("a", &[2, 2], Init::ONES).unwrap();
        let bytes = encode(&s);
        assert_eq!(&bytes[..4], b"SWR1");
        let len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let manifest: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        assert_eq!(manifest[0]["dtype"], "f32");
        assert_eq!(bytes.len(), 12 + len + 16);
        assert_eq!(&bytes[12 + len..12 + len + 4], &1f32.to_le_bytes());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let mut s = ParameterStore::<f64>::new(0);
        s.add("a", &[3], Init::ONES).unwrap();
        let bytes = encode(&s);
        assert!(decode::<f64>(&bytes[..bytes.len() - 1], 0).is_err());
        assert!(decode::<f64>(b"NOPE", 0).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode::<f64>(&extra, 0).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(seed in any::<u64>(), dims in prop::collection::vec(1usize..5, 1..4)) {
            let mut s = ParameterStore::<f64>::new(seed);
            for (i, d) in dims.iter().enumerate() {
                s.add(&format!("p{i}"), &[*d, i + 1], Init::Normal { std: 1.0 }).unwrap();
            }
            s.add_buffer("buf", &[2], Init::ONES).unwrap();
            let back = decode::<f64>(&encode(&s), seed).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
