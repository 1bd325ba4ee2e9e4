//! Versioned binary parameter snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8  b"NBCKPT\0\0"
//! version u32
//! fingerprint u64          network architecture fingerprint
//! master_seed u64
//! rng     u32 count, then per stream: name (u32 len + bytes), word pos (2 x u64)
//! meta    u32 count, then per entry: key, value (u32 len + bytes each)
//! arrays  u32 count, then per array:
//!         name (u32 len + bytes), rank (u32), dims (u64 each), data (f64 LE each)
//! ```
//!
//! Parameter values are IEEE-754 doubles written verbatim, so a round-trip
//! is bit-exact. Arrays are grouped into stores by a `group/` name prefix.

use crate::nn::ParameterStore;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"NBCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint was written for a different network (fingerprint {found:#x}, expected {expected:#x})")]
    FingerprintMismatch { expected: u64, found: u64 },
}

/// In-memory checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub fingerprint: u64,
    pub master_seed: u64,
    pub rng_positions: Vec<(String, u128)>,
    pub meta: Vec<(String, String)>,
    groups: BTreeMap<String, ParameterStore>,
}

impl Checkpoint {
    pub fn new(fingerprint: u64, master_seed: u64) -> Self {
        Self {
            version: FORMAT_VERSION,
            fingerprint,
            master_seed,
            rng_positions: Vec::new(),
            meta: Vec::new(),
            groups: BTreeMap::new(),
        }
    }

    pub fn insert_store(&mut self, group: &str, store: ParameterStore) {
        self.groups.insert(group.to_string(), store);
    }

    pub fn store(&self, group: &str) -> Option<&ParameterStore> {
        self.groups.get(group)
    }

    pub fn groups(&self) -> impl Iterator<Item = (&String, &ParameterStore)> {
        self.groups.iter()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: &str) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let file = File::create(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.fingerprint.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;

        w.write_all(&(self.rng_positions.len() as u32).to_le_bytes())?;
        for (name, pos) in &self.rng_positions {
            write_str(w, name)?;
            w.write_all(&((*pos & 0xffff_ffff_ffff_ffff) as u64).to_le_bytes())?;
            w.write_all(&((*pos >> 64) as u64).to_le_bytes())?;
        }

        w.write_all(&(self.meta.len() as u32).to_le_bytes())?;
        for (k, v) in &self.meta {
            write_str(w, k)?;
            write_str(w, v)?;
        }

        let total_arrays: usize = self.groups.values().map(ParameterStore::len).sum();
        w.write_all(&(total_arrays as u32).to_le_bytes())?;
        for (group, store) in &self.groups {
            for (name, shape, data) in store.iter() {
                write_str(w, &format!("{group}/{name}"))?;
                w.write_all(&(shape.len() as u32).to_le_bytes())?;
                for dim in shape {
                    w.write_all(&(*dim as u64).to_le_bytes())?;
                }
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let file = File::open(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r).map_err(|e| match e {
            ReadError::Io(source) => CheckpointError::Io {
                path: path.display().to_string(),
                source,
            },
            ReadError::Checkpoint(e) => e,
        })
    }

    fn read_from(r: &mut impl Read) -> Result<Self, ReadError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic.into());
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version).into());
        }
        let fingerprint = read_u64(r)?;
        let master_seed = read_u64(r)?;

        let rng_count = read_u32(r)? as usize;
        let mut rng_positions = Vec::with_capacity(rng_count);
        for _ in 0..rng_count {
            let name = read_str(r)?;
            let lo = read_u64(r)? as u128;
            let hi = read_u64(r)? as u128;
            rng_positions.push((name, lo | (hi << 64)));
        }

        let meta_count = read_u32(r)? as usize;
        let mut meta = Vec::with_capacity(meta_count);
        for _ in 0..meta_count {
            let k = read_str(r)?;
            let v = read_str(r)?;
            meta.push((k, v));
        }

        let array_count = read_u32(r)? as usize;
        let mut groups: BTreeMap<String, ParameterStore> = BTreeMap::new();
        for _ in 0..array_count {
            let full_name = read_str(r)?;
            let (group, name) = full_name.split_once('/').ok_or_else(|| {
                ReadError::Checkpoint(CheckpointError::Corrupt(format!(
                    "array name `{full_name}` lacks a group prefix"
                )))
            })?;
            let rank = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = vec![0.0f64; len];
            let mut buf = [0u8; 8];
            for v in &mut data {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            groups
                .entry(group.to_string())
                .or_default()
                .register(name, shape, data);
        }

        Ok(Self {
            version,
            fingerprint,
            master_seed,
            rng_positions,
            meta,
            groups,
        })
    }

    /// Error unless the checkpoint was written for the given architecture.
    pub fn expect_fingerprint(&self, expected: u64) -> Result<(), CheckpointError> {
        if self.fingerprint != expected {
            return Err(CheckpointError::FingerprintMismatch {
                expected,
                found: self.fingerprint,
            });
        }
        Ok(())
    }
}

enum ReadError {
    Io(io::Error),
    Checkpoint(CheckpointError),
}

impl From<io::Error> for ReadError {
    fn from(e: io::Error) -> Self {
        ReadError::Io(e)
    }
}

impl From<CheckpointError> for ReadError {
    fn from(e: CheckpointError) -> Self {
        ReadError::Checkpoint(e)
    }
}

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32(r: &mut impl Read) -> Result<u32, ReadError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64, ReadError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String, ReadError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(ReadError::Checkpoint(CheckpointError::Corrupt(format!(
            "string length {len} out of range"
        ))));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf)
        .map_err(|_| ReadError::Checkpoint(CheckpointError::Corrupt("invalid utf-8".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut store = ParameterStore::new();
        // Include awkward values: subnormals, negative zero, extremes.
        let mut data: Vec<f64> = (0..64).map(|_| rng.gen::<f64>() * 1e3 - 500.0).collect();
        data[0] = -0.0;
        data[1] = f64::MIN_POSITIVE / 2.0;
        data[2] = 1e308;
        data[3] = -1e-308;
        store.register("l0.w", vec![8, 8], data.clone());
        store.register("l0.b", vec![8], vec![0.25; 8]);

        let mut ckpt = Checkpoint::new(0xdead_beef, 42);
        ckpt.rng_positions.push(("world".into(), 123456789u128 << 70));
        ckpt.set_meta("step", "12000");
        ckpt.insert_store("policy", store);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();

        assert_eq!(loaded.fingerprint, 0xdead_beef);
        assert_eq!(loaded.master_seed, 42);
        assert_eq!(loaded.rng_positions, ckpt.rng_positions);
        assert_eq!(loaded.meta_value("step"), Some("12000"));
        let restored = loaded.store("policy").unwrap();
        let got = restored.get("l0.w").unwrap();
        for (a, b) in got.iter().zip(&data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(restored.shape("l0.w").unwrap(), &[8, 8]);
    }

    #[test]
    fn rejects_garbage_and_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn fingerprint_guard() {
        let ckpt = Checkpoint::new(1, 0);
        assert!(ckpt.expect_fingerprint(1).is_ok());
        assert!(matches!(
            ckpt.expect_fingerprint(2),
            Err(CheckpointError::FingerprintMismatch { .. })
        ));
    }
}
