//! Trajectory ensembles: N paths on a shared time grid, with seed
//! provenance, CSV export, and a fingerprinted binary cache.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

/// Hex fingerprint (first 16 hex digits of SHA-256) of a description string.
pub fn fingerprint_hex(description: &str) -> String {
    let digest = Sha256::digest(description.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// N simulated trajectories on a shared, strictly increasing time grid.
///
/// Values are stored row-major (one contiguous row per path). Paths that
/// were clipped back into the domain during simulation carry a flag so
/// estimators can exclude them.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    time_grid: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
    x0: f64,
    seed: u64,
    fingerprint: String,
    clipped: Vec<bool>,
}

impl Ensemble {
    pub(crate) fn from_parts(
        time_grid: Vec<f64>,
        values: Vec<f64>,
        n_paths: usize,
        x0: f64,
        seed: u64,
        fingerprint: String,
        clipped: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(values.len(), n_paths * time_grid.len());
        debug_assert_eq!(clipped.len(), n_paths);
        Ensemble {
            time_grid,
            values,
            n_paths,
            x0,
            seed,
            fingerprint,
            clipped,
        }
    }

    /// Build an ensemble from explicit paths. Used for synthetic processes
    /// (deterministic growth, mixtures, transformed copies); invariants are
    /// checked rather than assumed.
    pub fn from_paths(
        time_grid: Vec<f64>,
        paths: Vec<Vec<f64>>,
        seed: u64,
        label: &str,
    ) -> Result<Self> {
        if time_grid.len() < 2 || paths.is_empty() {
            return Err(Error::Precondition(
                "ensemble needs at least 2 times and 1 path".into(),
            ));
        }
        if !(time_grid[0] == 0.0 && time_grid.windows(2).all(|w| w[0] < w[1])) {
            return Err(Error::Precondition(
                "time grid must start at 0 and increase strictly".into(),
            ));
        }
        let x0 = paths[0][0];
        let n_times = time_grid.len();
        let mut values = Vec::with_capacity(paths.len() * n_times);
        for path in &paths {
            if path.len() != n_times {
                return Err(Error::Precondition(
                    "all paths must match the time grid length".into(),
                ));
            }
            if path[0] != x0 {
                return Err(Error::Precondition(
                    "all paths must share the initial value".into(),
                ));
            }
            if path.iter().any(|v| !v.is_finite()) {
                return Err(Error::Precondition("non-finite path value".into()));
            }
            values.extend_from_slice(path);
        }
        let n_paths = paths.len();
        let fingerprint = fingerprint_hex(&format!(
            "synthetic|{label}|n={n_paths}|t={n_times}|seed={seed}"
        ));
        Ok(Ensemble {
            time_grid,
            values,
            n_paths,
            x0,
            seed,
            fingerprint,
            clipped: vec![false; n_paths],
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.time_grid.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn t_max(&self) -> f64 {
        *self.time_grid.last().unwrap()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    #[inline]
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.time_grid.len();
        &self.values[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn value(&self, path: usize, k: usize) -> f64 {
        self.values[path * self.time_grid.len() + k]
    }

    pub fn is_clipped(&self, path: usize) -> bool {
        self.clipped[path]
    }

    pub fn n_clipped(&self) -> usize {
        self.clipped.iter().filter(|&&c| c).count()
    }

    /// Grid index whose time matches `t` to within a relative tolerance.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        // The grid is sorted; binary search then check the neighbors.
        let k = self
            .time_grid
            .partition_point(|&g| g < t)
            .min(self.time_grid.len() - 1);
        [k.saturating_sub(1), k]
            .into_iter()
            .find(|&idx| (self.time_grid[idx] - t).abs() <= tol)
    }

    /// Nearest grid index to `t` (always defined).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = self
            .time_grid
            .partition_point(|&g| g < t)
            .min(self.time_grid.len() - 1);
        let prev = k.saturating_sub(1);
        if (self.time_grid[prev] - t).abs() <= (self.time_grid[k] - t).abs() {
            prev
        } else {
            k
        }
    }

    /// Map every value through `f`, producing a derived ensemble. `label`
    /// distinguishes the derived fingerprint from the source's.
    pub fn map_values(
        &self,
        label: &str,
        mut f: impl FnMut(usize, usize, f64) -> Result<f64>,
    ) -> Result<Ensemble> {
        let w = self.time_grid.len();
        let mut values = Vec::with_capacity(self.values.len());
        for (idx, &v) in self.values.iter().enumerate() {
            values.push(f(idx / w, idx % w, v)?);
        }
        let x0 = values[0];
        Ok(Ensemble {
            time_grid: self.time_grid.clone(),
            values,
            n_paths: self.n_paths,
            x0,
            seed: self.seed,
            fingerprint: fingerprint_hex(&format!("{}|{label}", self.fingerprint)),
            clipped: self.clipped.clone(),
        })
    }

    /// Write `path_id,t,x` rows. The float formatting is shortest-roundtrip,
    /// so identical ensembles serialize byte-identically.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "path_id,t,x")?;
        for i in 0..self.n_paths {
            let row = self.path(i);
            for (k, &t) in self.time_grid.iter().enumerate() {
                writeln!(out, "{i},{t},{}", row[k])?;
            }
        }
        Ok(())
    }

    /// Serialize to the compact binary cache format.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        out.write_all(CACHE_MAGIC)?;
        write_u64(&mut out, CACHE_VERSION)?;
        let fp = self.fingerprint.as_bytes();
        write_u64(&mut out, fp.len() as u64)?;
        out.write_all(fp)?;
        write_u64(&mut out, self.seed)?;
        write_f64(&mut out, self.x0)?;
        write_u64(&mut out, self.n_paths as u64)?;
        write_u64(&mut out, self.time_grid.len() as u64)?;
        for &t in &self.time_grid {
            write_f64(&mut out, t)?;
        }
        for &v in &self.values {
            write_f64(&mut out, v)?;
        }
        for &c in &self.clipped {
            out.write_all(&[c as u8])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Load from the binary cache. When `expected_fingerprint` is given the
    /// stored fingerprint must match, guarding against stale caches.
    pub fn load_cache(path: &Path, expected_fingerprint: Option<&str>) -> Result<Ensemble> {
        let file = std::fs::File::open(path)?;
        let mut input = std::io::BufReader::new(file);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Config(format!(
                "{} is not an ensemble cache (bad magic)",
                path.display()
            )));
        }
        let version = read_u64(&mut input)?;
        if version != CACHE_VERSION {
            return Err(Error::Config(format!(
                "unsupported cache version {version}"
            )));
        }
        let fp_len = read_u64(&mut input)? as usize;
        if fp_len > 1024 {
            return Err(Error::Config("corrupt cache: fingerprint too long".into()));
        }
        let mut fp_bytes = vec![0u8; fp_len];
        input.read_exact(&mut fp_bytes)?;
        let fingerprint = String::from_utf8(fp_bytes)
            .map_err(|_| Error::Config("corrupt cache: fingerprint not UTF-8".into()))?;
        if let Some(expected) = expected_fingerprint {
            if fingerprint != expected {
                return Err(Error::Config(format!(
                    "cache fingerprint {fingerprint} does not match expected {expected}"
                )));
            }
        }
        let seed = read_u64(&mut input)?;
        let x0 = read_f64(&mut input)?;
        let n_paths = read_u64(&mut input)? as usize;
        let n_times = read_u64(&mut input)? as usize;
        if n_paths == 0 || n_times == 0 || n_paths.saturating_mul(n_times) > (1 << 33) {
            return Err(Error::Config("corrupt cache: implausible sizes".into()));
        }
        let mut time_grid = Vec::with_capacity(n_times);
        for _ in 0..n_times {
            time_grid.push(read_f64(&mut input)?);
        }
        let mut values = Vec::with_capacity(n_paths * n_times);
        for _ in 0..n_paths * n_times {
            values.push(read_f64(&mut input)?);
        }
        let mut clipped = Vec::with_capacity(n_paths);
        for _ in 0..n_paths {
            let mut byte = [0u8; 1];
            input.read_exact(&mut byte)?;
            clipped.push(byte[0] != 0);
        }
        Ok(Ensemble {
            time_grid,
            values,
            n_paths,
            x0,
            seed,
            fingerprint,
            clipped,
        })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"ERGOENS\x01";
const CACHE_VERSION: u64 = 1;

fn write_u64<W: Write>(out: &mut W, v: u64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(out: &mut W, v: f64) -> std::io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

fn read_u64<R: Read>(input: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Ensemble {
        Ensemble::from_paths(
            vec![0.0, 1.0, 2.0],
            vec![vec![1.0, 2.0, 4.0], vec![1.0, 0.5, 0.25]],
            9,
            "toy",
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let e = toy();
        assert_eq!(e.n_paths(), 2);
        assert_eq!(e.n_times(), 3);
        assert_eq!(e.x0(), 1.0);
        assert_eq!(e.path(1), &[1.0, 0.5, 0.25]);
        assert_eq!(e.value(0, 2), 4.0);
        assert_eq!(e.t_max(), 2.0);
        assert_eq!(e.n_clipped(), 0);
    }

    #[test]
    fn from_paths_validates() {
        assert!(Ensemble::from_paths(vec![0.0, 1.0], vec![], 0, "x").is_err());
        assert!(
            Ensemble::from_paths(vec![1.0, 2.0], vec![vec![1.0, 1.0]], 0, "x").is_err(),
            "grid must start at zero"
        );
        assert!(
            Ensemble::from_paths(vec![0.0, 0.0], vec![vec![1.0, 1.0]], 0, "x").is_err(),
            "grid must strictly increase"
        );
        assert!(
            Ensemble::from_paths(vec![0.0, 1.0], vec![vec![1.0, 2.0], vec![3.0, 4.0]], 0, "x")
                .is_err(),
            "paths must share x0"
        );
        assert!(
            Ensemble::from_paths(vec![0.0, 1.0], vec![vec![1.0, f64::NAN]], 0, "x").is_err(),
            "values must be finite"
        );
    }

    #[test]
    fn index_lookup() {
        let e = toy();
        assert_eq!(e.index_of_time(1.0), Some(1));
        assert_eq!(e.index_of_time(2.0), Some(2));
        assert_eq!(e.index_of_time(0.5), None);
        assert_eq!(e.index_of_time(1.0 + 1e-12), Some(1));
        assert_eq!(e.nearest_index(0.4), 0);
        assert_eq!(e.nearest_index(0.6), 1);
        assert_eq!(e.nearest_index(99.0), 2);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        toy().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_id,t,x");
        assert_eq!(lines[1], "0,0,1");
        assert_eq!(lines[3], "0,2,4");
        assert_eq!(lines[6], "1,2,0.25");
        assert_eq!(lines.len(), 1 + 2 * 3);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.bin");
        let e = toy();
        e.write_cache(&path).unwrap();
        let back = Ensemble::load_cache(&path, Some(e.fingerprint())).unwrap();
        assert_eq!(e, back);
        // Wrong fingerprint is rejected.
        assert!(Ensemble::load_cache(&path, Some("deadbeef")).is_err());
        // Garbage file is rejected.
        let junk = dir.path().join("junk.bin");
        std::fs::write(&junk, b"not a cache").unwrap();
        assert!(Ensemble::load_cache(&junk, None).is_err());
    }

    #[test]
    fn map_values_changes_fingerprint_and_x0() {
        let e = toy();
        let doubled = e.map_values("double", |_, _, v| Ok(2.0 * v)).unwrap();
        assert_eq!(doubled.x0(), 2.0);
        assert_eq!(doubled.path(0), &[2.0, 4.0, 8.0]);
        assert_ne!(doubled.fingerprint(), e.fingerprint());
        assert_eq!(doubled.times(), e.times());
    }
}
