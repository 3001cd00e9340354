//! Fixed-magnetization configuration bases of an open spin-1/2 chain.
//!
//! A configuration is a bit string where bit `j` set means site `j` carries
//! spin up. All magnetizations are stored doubled (`two_m = 2M`) so that
//! quantum numbers stay integral.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Largest chain handled by the enumerator.
pub const MAX_SITES: usize = 24;

/// A computational basis state of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinConfig(pub u32);

impl SpinConfig {
    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn up_count(self) -> u32 {
        self.0.count_ones()
    }

    /// Twice the magnetization of this configuration on `n_sites` sites.
    #[inline]
    pub fn two_m(self, n_sites: usize) -> i32 {
        2 * self.up_count() as i32 - n_sites as i32
    }

    #[inline]
    pub fn is_up(self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// Site reversal `j -> n_sites - 1 - j`.
#[inline]
pub fn reflect(config: SpinConfig, n_sites: usize) -> SpinConfig {
    debug_assert!(n_sites <= 32);
    if n_sites == 0 {
        return config;
    }
    SpinConfig(config.0.reverse_bits() >> (32 - n_sites))
}

/// All configurations with fixed magnetization, ordered by bit value.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    n_sites: usize,
    two_m: i32,
    configs: Vec<SpinConfig>,
    index_map: HashMap<SpinConfig, usize>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn two_m(&self) -> i32 {
        self.two_m
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[SpinConfig] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> SpinConfig {
        self.configs[i]
    }

    pub fn index_of(&self, config: SpinConfig) -> Option<usize> {
        self.index_map.get(&config).copied()
    }

    /// Number of up spins shared by every configuration.
    pub fn up_count(&self) -> usize {
        ((self.n_sites as i32 + self.two_m) / 2) as usize
    }
}

/// Check `two_m` against `n_sites` and return the number of up spins.
pub fn validate_sector(n_sites: usize, two_m: i32) -> Result<usize> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::Argument(format!(
            "n_sites must lie in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if two_m.unsigned_abs() as usize > n_sites {
        return Err(Error::Argument(format!(
            "|two_m| = {} exceeds n_sites = {n_sites}",
            two_m.abs()
        )));
    }
    if (two_m - n_sites as i32).rem_euclid(2) != 0 {
        return Err(Error::Argument(format!(
            "two_m = {two_m} must have the parity of n_sites = {n_sites}"
        )));
    }
    Ok(((n_sites as i32 + two_m) / 2) as usize)
}

/// Enumerate the `two_m` sector of an `n_sites` chain.
pub fn enumerate_sector(n_sites: usize, two_m: i32) -> Result<SectorBasis> {
    let n_up = validate_sector(n_sites, two_m)?;
    let configs = fixed_popcount_configs(n_sites, n_up);
    let index_map = configs.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    Ok(SectorBasis {
        n_sites,
        two_m,
        configs,
        index_map,
    })
}

/// Every `n_bits`-bit word with exactly `n_ones` bits set, increasing.
pub(crate) fn fixed_popcount_configs(n_bits: usize, n_ones: usize) -> Vec<SpinConfig> {
    if n_ones > n_bits {
        return Vec::new();
    }
    if n_ones == 0 {
        return vec![SpinConfig(0)];
    }
    let limit: u64 = 1u64 << n_bits;
    let mut out = Vec::with_capacity(binomial(n_bits, n_ones) as usize);
    let mut v: u64 = (1u64 << n_ones) - 1;
    while v < limit {
        out.push(SpinConfig(v as u32));
        // Gosper's hack: next word with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// Reflection parity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One symmetrized column: at most two configurations with weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitColumn {
    pub entries: [(usize, f64); 2],
    pub len: usize,
}

impl OrbitColumn {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[..self.len].iter().copied()
    }
}

/// Reflection-symmetrized columns of a [`SectorBasis`].
#[derive(Debug, Clone)]
pub struct ParityBasis {
    parent: SectorBasis,
    even: Vec<OrbitColumn>,
    odd: Vec<OrbitColumn>,
}

impl ParityBasis {
    pub fn parent(&self) -> &SectorBasis {
        &self.parent
    }

    pub fn columns(&self, parity: Parity) -> &[OrbitColumn] {
        match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }

    pub fn dim(&self, parity: Parity) -> usize {
        self.columns(parity).len()
    }

    /// Map block amplitudes back onto the parent configurations.
    pub fn expand(&self, parity: Parity, coeffs: &[f64]) -> Vec<f64> {
        let cols = self.columns(parity);
        assert_eq!(cols.len(), coeffs.len(), "coefficient length mismatch");
        let mut out = vec![0.0; self.parent.dim()];
        for (col, &c) in cols.iter().zip(coeffs) {
            for (i, w) in col.iter() {
                out[i] += w * c;
            }
        }
        out
    }

    /// Dense `dim(parent) x dim(block)` transformation matrix.
    pub fn dense_columns(&self, parity: Parity) -> nalgebra::DMatrix<f64> {
        let cols = self.columns(parity);
        let mut u = nalgebra::DMatrix::zeros(self.parent.dim(), cols.len());
        for (k, col) in cols.iter().enumerate() {
            for (i, w) in col.iter() {
                u[(i, k)] = w;
            }
        }
        u
    }
}

/// Build even/odd combinations of every reflection orbit.
pub fn build_parity_basis(basis: &SectorBasis) -> ParityBasis {
    let n = basis.n_sites();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (i, &c) in basis.configs().iter().enumerate() {
        let r = reflect(c, n);
        if r < c {
            continue;
        }
        if r == c {
            even.push(OrbitColumn {
                entries: [(i, 1.0), (0, 0.0)],
                len: 1,
            });
        } else {
            let j = basis
                .index_of(r)
                .expect("reflection preserves magnetization");
            even.push(OrbitColumn {
                entries: [(i, inv_sqrt2), (j, inv_sqrt2)],
                len: 2,
            });
            odd.push(OrbitColumn {
                entries: [(i, inv_sqrt2), (j, -inv_sqrt2)],
                len: 2,
            });
        }
    }
    ParityBasis {
        parent: basis.clone(),
        even,
        odd,
    }
}
