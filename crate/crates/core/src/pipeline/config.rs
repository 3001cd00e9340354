use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro_stats::{Grouping, SectorCount, WindowSpec};
use crate::sector_basis::validate_sector;
use crate::spectral::DEFAULT_DIM_LIMIT;
use crate::su2_resolution::MAX_SUBSYSTEM;

/// Largest allowed distance between `x·N` and the nearest integer.
pub const FRACTION_TOLERANCE: f64 = 1e-9;

/// Which total-spin groups are analyzed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "SpinSectorsRepr", into = "SpinSectorsRepr")]
pub enum SpinSectors {
    #[default]
    All,
    /// Explicit `two_s` values; an empty list selects nothing.
    List(Vec<i32>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpinSectorsRepr {
    Word(String),
    List(Vec<i32>),
}

impl TryFrom<SpinSectorsRepr> for SpinSectors {
    type Error = String;

    fn try_from(r: SpinSectorsRepr) -> std::result::Result<Self, String> {
        match r {
            SpinSectorsRepr::Word(w) => w.parse().map_err(|e: Error| e.to_string()),
            SpinSectorsRepr::List(mut v) => {
                v.sort_unstable();
                v.dedup();
                Ok(SpinSectors::List(v))
            }
        }
    }
}

impl From<SpinSectors> for SpinSectorsRepr {
    fn from(s: SpinSectors) -> Self {
        match s {
            SpinSectors::All => SpinSectorsRepr::Word("all".into()),
            SpinSectors::List(v) => SpinSectorsRepr::List(v),
        }
    }
}

impl SpinSectors {
    pub fn contains(&self, two_s: i32) -> bool {
        match self {
            SpinSectors::All => true,
            SpinSectors::List(v) => v.contains(&two_s),
        }
    }
}

impl FromStr for SpinSectors {
    type Err = Error;

    /// `all`, an empty string, or a comma-separated list of `two_s` values.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(SpinSectors::All);
        }
        let mut v = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let two_s: i32 = item
                .parse()
                .map_err(|_| Error::Argument(format!("bad spin sector '{item}'")))?;
            if two_s < 0 {
                return Err(Error::Argument(format!("spin sector {two_s} is negative")));
            }
            v.push(two_s);
        }
        v.sort_unstable();
        v.dedup();
        Ok(SpinSectors::List(v))
    }
}

impl fmt::Display for SpinSectors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpinSectors::All => f.write_str("all"),
            SpinSectors::List(v) => {
                let items: Vec<String> = v.iter().map(i32::to_string).collect();
                f.write_str(&items.join(","))
            }
        }
    }
}

/// Parameters of a run. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sizes: Vec<usize>,
    pub j2_list: Vec<f64>,
    pub j1: f64,
    pub two_m: i32,
    pub parity_resolved: bool,
    /// Subsystem fraction `x = N_A / N`.
    pub fraction: f64,
    pub window: WindowSpec,
    pub spin_sectors: SpinSectors,
    pub grouping: Grouping,
    pub sector_count: SectorCount,
    /// Spectrum caches are skipped when unset.
    pub cache_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub dim_limit: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sizes: vec![8, 10, 12, 14],
            j2_list: vec![0.0, 0.4, 0.8],
            j1: 1.0,
            two_m: 0,
            parity_resolved: true,
            fraction: 0.5,
            window: WindowSpec::default(),
            spin_sectors: SpinSectors::All,
            grouping: Grouping::SpinParity,
            sector_count: SectorCount::Kinematic,
            cache_dir: None,
            out: PathBuf::from("out"),
            dim_limit: DEFAULT_DIM_LIMIT,
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Subsystem size `round(x·N)`, rejected when `x·N` is not integral.
    pub fn subsystem_size(&self, n: usize) -> Result<usize> {
        let xn = self.fraction * n as f64;
        let n_a = xn.round();
        if !xn.is_finite() || (xn - n_a).abs() >= FRACTION_TOLERANCE {
            return Err(Error::Argument(format!(
                "fraction {} gives non-integral subsystem size {xn} for N={n}",
                self.fraction
            )));
        }
        let n_a = n_a as usize;
        if n_a == 0 || n_a > n || n_a > MAX_SUBSYSTEM {
            return Err(Error::Argument(format!(
                "subsystem size {n_a} for N={n} must lie in 1..={}",
                n.min(MAX_SUBSYSTEM)
            )));
        }
        Ok(n_a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Argument("no system sizes given".into()));
        }
        if self.j2_list.is_empty() {
            return Err(Error::Argument("no J2 values given".into()));
        }
        if !self.j1.is_finite() || self.j2_list.iter().any(|j| !j.is_finite()) {
            return Err(Error::Argument("couplings must be finite".into()));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "fraction {} must lie in (0, 1]",
                self.fraction
            )));
        }
        self.window.validate()?;
        if self.dim_limit == 0 {
            return Err(Error::Argument("dim_limit must be positive".into()));
        }
        for &n in &self.sizes {
            validate_sector(n, self.two_m)?;
            self.subsystem_size(n)?;
        }
        Ok(())
    }

    /// Sizes in ascending order without repeats.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut v = self.sizes.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Couplings in ascending order without repeats.
    pub fn sorted_j2(&self) -> Vec<f64> {
        let mut v = self.j2_list.clone();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| a.to_bits() == b.to_bits());
        v
    }
}
