//! Binary spectrum cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    8 bytes  "SU2TDC1\0"
//! version  u32
//! N        u32
//! two_m    i32
//! J1       f64
//! J2       f64
//! parity   u8       1 when parity resolved
//! count    u32      number of states
//! per state:
//!   energy f64, two_s i32, parity u8 (0 none, 1 even, 2 odd),
//!   len u32 (0 when the vector was not retained), len × f64 amplitudes
//! checksum u64      XXH64 (seed 0) of every byte between magic and checksum
//! ```

use std::path::{Path, PathBuf};

use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::lattice_operators::build_total_spin_squared;
use crate::sector_basis::{enumerate_sector, Parity};
use crate::spectral::{config_space_residual, EigenState, SectorSpectrum};

pub const CACHE_MAGIC: &[u8; 8] = b"SU2TDC1\0";
pub const CACHE_VERSION: u32 = 1;

/// File name for one `(N, two_m, J1, J2, parity)` spectrum.
pub fn cache_file_name(n: usize, two_m: i32, j1: f64, j2: f64, parity_resolved: bool) -> String {
    format!(
        "spectrum_N{n}_M{two_m}_J1_{j1:?}_J2_{j2:?}_{}.bin",
        if parity_resolved { "par" } else { "nopar" }
    )
}

pub fn cache_path(
    dir: &Path,
    n: usize,
    two_m: i32,
    j1: f64,
    j2: f64,
    parity_resolved: bool,
) -> PathBuf {
    dir.join(cache_file_name(n, two_m, j1, j2, parity_resolved))
}

fn parity_code(p: Option<Parity>) -> u8 {
    match p {
        None => 0,
        Some(Parity::Even) => 1,
        Some(Parity::Odd) => 2,
    }
}

pub fn encode(spectrum: &SectorSpectrum) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + spectrum.states.len() * 24);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(spectrum.n_sites as u32).to_le_bytes());
    out.extend_from_slice(&spectrum.two_m.to_le_bytes());
    out.extend_from_slice(&spectrum.j1.to_le_bytes());
    out.extend_from_slice(&spectrum.j2.to_le_bytes());
    out.push(spectrum.parity_resolved as u8);
    out.extend_from_slice(&(spectrum.states.len() as u32).to_le_bytes());
    for s in &spectrum.states {
        out.extend_from_slice(&s.energy.to_le_bytes());
        out.extend_from_slice(&s.two_s.to_le_bytes());
        out.push(parity_code(s.parity));
        let v: &[f64] = s.vector.as_deref().unwrap_or(&[]);
        out.extend_from_slice(&(v.len() as u32).to_le_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let sum = XxHash64::oneshot(0, &out[CACHE_MAGIC.len()..]);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Integrity {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.corrupt(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Parse a cache image; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<SectorSpectrum> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if bytes.len() < CACHE_MAGIC.len() + 8 || &bytes[..CACHE_MAGIC.len()] != CACHE_MAGIC {
        return Err(r.corrupt("bad magic bytes"));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8 bytes"));
    if XxHash64::oneshot(0, &bytes[CACHE_MAGIC.len()..body_end]) != stored {
        return Err(r.corrupt("checksum mismatch"));
    }
    r.bytes = &bytes[..body_end];
    r.pos = CACHE_MAGIC.len();
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(r.corrupt(format!("unsupported version {version}")));
    }
    let n_sites = r.u32()? as usize;
    let two_m = r.i32()?;
    let j1 = r.f64()?;
    let j2 = r.f64()?;
    let parity_resolved = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(r.corrupt(format!("bad parity flag {other}"))),
    };
    let basis = enumerate_sector(n_sites, two_m).map_err(|e| r.corrupt(e.to_string()))?;
    let count = r.u32()? as usize;
    if count != basis.dim() {
        return Err(r.corrupt(format!(
            "{count} states stored for a sector of dimension {}",
            basis.dim()
        )));
    }
    let s2 = build_total_spin_squared(&basis);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let energy = r.f64()?;
        let two_s = r.i32()?;
        let parity = match r.u8()? {
            0 => None,
            1 => Some(Parity::Even),
            2 => Some(Parity::Odd),
            other => return Err(r.corrupt(format!("bad state parity {other}"))),
        };
        if parity.is_some() != parity_resolved {
            return Err(r.corrupt("state parity disagrees with header"));
        }
        let len = r.u32()? as usize;
        if len != 0 && len != basis.dim() {
            return Err(r.corrupt(format!(
                "vector of length {len} in dimension {}",
                basis.dim()
            )));
        }
        let vector = if len == 0 {
            None
        } else {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                v.push(r.f64()?);
            }
            Some(v)
        };
        let s2_residual = vector
            .as_deref()
            .map_or(f64::NAN, |v| config_space_residual(&s2, v, two_s));
        states.push(EigenState {
            energy,
            two_s,
            parity,
            vector,
            s2_residual,
        });
    }
    if r.pos != r.bytes.len() {
        return Err(r.corrupt(format!("{} trailing bytes", r.bytes.len() - r.pos)));
    }
    Ok(SectorSpectrum {
        n_sites,
        two_m,
        j1,
        j2,
        parity_resolved,
        states,
    })
}

pub fn write_cache(path: &Path, spectrum: &SectorSpectrum) -> Result<()> {
    super::atomic_write(path, &encode(spectrum))
}

pub fn read_cache(path: &Path) -> Result<SectorSpectrum> {
    let bytes = std::fs::read(path)?;
    decode(&bytes, path)
}
