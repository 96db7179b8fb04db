//! Content-addressed cache of `H₀` eigendecompositions.
//!
//! Entries are keyed by the SHA-256 of the assembled matrix bytes and the
//! basis parameters, carry their own checksum, and are written through a
//! temporary file and a rename. Any read failure is a miss.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::basis::HermiteBasis;
use crate::error::Result;
use crate::linalg::{eig_symmetric, RMat, SymmetricEigen};

const MAGIC: &[u8; 10] = b"PTSPECEIG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// The entry existed but failed validation and was replaced.
    Corrupt,
}

#[derive(Debug, Clone)]
pub struct EigenCache {
    dir: Option<PathBuf>,
}

pub fn cache_key(h0: &RMat, basis: Option<&HermiteBasis>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(MAGIC);
    hasher.update((h0.nrows() as u64).to_le_bytes());
    hasher.update((h0.ncols() as u64).to_le_bytes());
    for v in h0.iter() {
        hasher.update(v.to_bits().to_le_bytes());
    }
    if let Some(b) = basis {
        hasher.update(serde_json::to_vec(b).unwrap_or_default());
    }
    hex::encode(hasher.finalize())
}

fn encode(eig: &SymmetricEigen) -> Vec<u8> {
    let n = eig.len();
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + 8 * (n * n + 2 * n) + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let values = eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).chain(&eig.residuals);
    for v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn decode(bytes: &[u8], expected: usize) -> Option<SymmetricEigen> {
    let body_len = bytes.len().checked_sub(32)?;
    let (body, digest) = bytes.split_at(body_len);
    if Sha256::digest(body).as_slice() != digest {
        return None;
    }
    let rest = body.strip_prefix(MAGIC.as_slice())?;
    let (n_bytes, data) = rest.split_at_checked(8)?;
    let n = u64::from_le_bytes(n_bytes.try_into().ok()?) as usize;
    if n != expected || data.len() != 8 * (n * n + 2 * n) {
        return None;
    }
    let mut floats = data
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())));
    let eigenvalues: Vec<f64> = floats.by_ref().take(n).collect();
    let vectors: Vec<f64> = floats.by_ref().take(n * n).collect();
    let residuals: Vec<f64> = floats.collect();
    Some(SymmetricEigen {
        eigenvalues,
        eigenvectors: RMat::from_vec(n, n, vectors),
        residuals,
    })
}

impl EigenCache {
    pub fn disabled() -> Self {
        EigenCache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        EigenCache { dir: Some(dir.into()) }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn entry(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.eig")))
    }

    pub fn load(&self, key: &str, n: usize) -> (Option<SymmetricEigen>, CacheStatus) {
        let Some(path) = self.entry(key) else {
            return (None, CacheStatus::Disabled);
        };
        match fs::read(&path) {
            Err(_) => (None, CacheStatus::Miss),
            Ok(bytes) => match decode(&bytes, n) {
                Some(e) => (Some(e), CacheStatus::Hit),
                None => {
                    warn!("discarding corrupt cache entry {}", path.display());
                    (None, CacheStatus::Corrupt)
                }
            },
        }
    }

    /// Best effort: failures are logged and otherwise ignored.
    pub fn store(&self, key: &str, eig: &SymmetricEigen) {
        let Some(path) = self.entry(key) else { return };
        let dir = path.parent().expect("cache entry has a parent");
        let result = (|| -> std::io::Result<()> {
            fs::create_dir_all(dir)?;
            let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode(eig))?;
            f.sync_all()?;
            drop(f);
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = result {
            warn!("could not write cache entry {}: {e}", path.display());
        }
    }

    /// The eigendecomposition of `h0`, from the cache when possible.
    pub fn eigen(&self, h0: &RMat, basis: Option<&HermiteBasis>) -> Result<(SymmetricEigen, CacheStatus)> {
        if self.dir.is_none() {
            return Ok((eig_symmetric(h0)?, CacheStatus::Disabled));
        }
        let key = cache_key(h0, basis);
        let (cached, status) = self.load(&key, h0.nrows());
        if let Some(e) = cached {
            info!("cache hit {key}: H0 eigensolve skipped");
            return Ok((e, status));
        }
        info!("cache miss {key}");
        let e = eig_symmetric(h0)?;
        self.store(&key, &e);
        Ok((e, status))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RMat {
        RMat::from_fn(6, 6, |i, j| if i == j { i as f64 + 0.5 } else { 0.1 / (1.0 + (i + j) as f64) })
    }

    #[test]
    fn encode_decode_is_exact() {
        let e = eig_symmetric(&sample()).unwrap();
        let d = decode(&encode(&e), 6).unwrap();
        assert_eq!(d.eigenvalues, e.eigenvalues);
        assert_eq!(d.eigenvectors, e.eigenvectors);
        assert_eq!(d.residuals, e.residuals);
        assert!(decode(&encode(&e), 5).is_none());
    }

    #[test]
    fn flipped_byte_is_detected() {
        let e = eig_symmetric(&sample()).unwrap();
        let mut bytes = encode(&e);
        bytes[40] ^= 1;
        assert!(decode(&bytes, 6).is_none());
        assert!(decode(&bytes[..20], 6).is_none());
    }

    #[test]
    fn key_depends_on_matrix_and_basis() {
        let a = sample();
        let mut b = a.clone();
        b[(0, 0)] += 1e-15;
        assert_ne!(cache_key(&a, None), cache_key(&b, None));
        let b1 = HermiteBasis::new(1, 6, &[1.0], 0.5).unwrap();
        let b2 = HermiteBasis::new(1, 6, &[1.0], 0.5).unwrap().with_quadrature_order(40).unwrap();
        assert_ne!(cache_key(&a, Some(&b1)), cache_key(&a, Some(&b2)));
        assert_eq!(cache_key(&a, Some(&b1)), cache_key(&a.clone(), Some(&b1)));
    }
}
