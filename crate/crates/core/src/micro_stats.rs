//! Microcanonical windows and the window-averaged bound on the probability
//! trace distance.
//!
//! The bound is assembled from a chain of three links, each reported
//! separately so that it can be checked on its own:
//!
//! ```text
//! ⟨D_prob⟩      ≤ Σ ⟨|P - P̄|⟩ + endpoint
//! Σ ⟨|P - P̄|⟩   ≤ Σ √Var(P)
//! Σ √Var(P)     ≤ √(N_sec Σ Var(P))
//! ```
//!
//! `endpoint = Σ max|P - P̄| / n_pairs` accounts for the finite window.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::distances::PairDistances;
use crate::error::{Error, Result};
use crate::sector_basis::Parity;
use crate::su2_resolution::{SymmetryResolvedRDM, P_FLOOR};

/// Slack tolerated on window inequalities.
pub const WINDOW_TOLERANCE: f64 = 1e-10;

/// Fractional window `[lo, hi)` over an energy-ordered list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { lo: 0.40, hi: 0.65 }
    }
}

impl WindowSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let spec = Self { lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo && self.lo < self.hi && self.hi <= 1.0) {
            return Err(Error::Argument(format!(
                "window fractions must satisfy 0 ≤ lo < hi ≤ 1, got {}:{}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// How eigenstates are grouped before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// One list per `(two_s, parity)`.
    #[default]
    SpinParity,
    /// One list per `two_s`, parity blocks interleaved by energy.
    Spin,
}

/// How `N_sec` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorCount {
    /// Subsystem spins allowed by the triangle rule.
    #[default]
    Kinematic,
    /// Subsystem spins with nonzero probability in at least one window state.
    ObservedSupport,
}

/// `[floor(lo·L), floor(hi·L))`.
pub fn select_window(len: usize, spec: WindowSpec) -> Result<Range<usize>> {
    spec.validate()?;
    if len < 4 {
        return Err(Error::Window(format!(
            "group of {len} states is too small to window"
        )));
    }
    // The epsilon keeps products such as 0.65 * 20 from landing just below
    // an integer.
    let cut = |f: f64| ((f * len as f64) + 1e-9).floor() as usize;
    let range = cut(spec.lo)..cut(spec.hi).min(len);
    if range.len() < 2 {
        return Err(Error::Window(format!(
            "window {range:?} of a {len}-state group holds fewer than 2 states"
        )));
    }
    Ok(range)
}

/// Number of `two_s_a` values compatible with total spin `two_s`.
pub fn count_sectors(n_a: usize, n_b: usize, two_s: i32) -> usize {
    ((n_a % 2) as i32..=n_a as i32)
        .step_by(2)
        .filter(|&s_a| (two_s - s_a).unsigned_abs() as usize <= n_b)
        .count()
}

/// Identifies the group a window was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupId {
    pub n_sites: usize,
    pub two_m: i32,
    pub two_s: i32,
    pub parity: Option<Parity>,
    pub j2: f64,
    pub n_a: usize,
}

/// Window aggregates for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub id: GroupId,
    pub window: Range<usize>,
    pub n_states: usize,
    pub n_pairs: usize,
    pub mean_p: BTreeMap<i32, f64>,
    pub var_p: BTreeMap<i32, f64>,
    /// `⟨|P - P̄|⟩` per sector.
    pub mean_abs_dev: BTreeMap<i32, f64>,
    /// `max |P - P̄|` per sector.
    pub max_abs_dev: BTreeMap<i32, f64>,
    pub sum_var: f64,
    pub sum_sqrt_var: f64,
    pub sum_mean_abs_dev: f64,
    /// `Σ max|P - P̄| / n_pairs`, the finite-window correction of the first link.
    pub endpoint_correction: f64,
    pub n_sec: usize,
    pub avg_d_prob: f64,
    pub avg_d_conf: f64,
    pub avg_d_conf_reversed: f64,
    pub avg_d_full: f64,
    /// `⟨D - D_conf⟩`.
    pub avg_gap: f64,
    pub avg_leakage: f64,
    pub bound_rhs: f64,
    pub bound_satisfied: bool,
}

impl WindowStats {
    /// Links of the proof chain that fail by more than `tol`.
    pub fn chain_violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let links = [
            (
                "⟨D_prob⟩ ≤ Σ⟨|P-P̄|⟩ + endpoint",
                self.avg_d_prob,
                self.sum_mean_abs_dev + self.endpoint_correction,
            ),
            ("Σ⟨|P-P̄|⟩ ≤ Σ√Var", self.sum_mean_abs_dev, self.sum_sqrt_var),
            ("Σ√Var ≤ √(N_sec ΣVar)", self.sum_sqrt_var, self.bound_rhs),
            ("⟨D_prob⟩ ≤ ⟨D⟩", self.avg_d_prob, self.avg_d_full),
        ];
        for (name, lhs, rhs) in links {
            if lhs > rhs + tol {
                out.push(format!("{name}: {lhs:e} > {rhs:e} in {:?}", self.id));
            }
        }
        if self.var_p.values().any(|&v| v < 0.0) {
            out.push(format!("negative variance in {:?}", self.id));
        }
        out
    }
}

/// Aggregate the resolved window states (energy order) and their consecutive
/// pairs into [`WindowStats`].
pub fn window_statistics(
    id: GroupId,
    window: Range<usize>,
    states: &[SymmetryResolvedRDM],
    pairs: &[PairDistances],
    n_b: usize,
    counting: SectorCount,
) -> Result<WindowStats> {
    let n = states.len();
    if n < 2 {
        return Err(Error::Window(format!("{n} states in window of {id:?}")));
    }
    if pairs.len() != n - 1 {
        return Err(Error::Argument(format!(
            "{} pairs supplied for {n} window states",
            pairs.len()
        )));
    }
    let nf = n as f64;
    let keys: Vec<i32> = states[0].sectors.keys().copied().collect();
    let mut mean_p = BTreeMap::new();
    let mut var_p = BTreeMap::new();
    let mut mean_abs_dev = BTreeMap::new();
    let mut max_abs_dev = BTreeMap::new();
    for &k in &keys {
        let ps: Vec<f64> = states.iter().map(|s| s.probability(k)).collect();
        let mean = ps.iter().sum::<f64>() / nf;
        let devs: Vec<f64> = ps.iter().map(|p| (p - mean).abs()).collect();
        mean_p.insert(k, mean);
        var_p.insert(k, devs.iter().map(|d| d * d).sum::<f64>() / nf);
        mean_abs_dev.insert(k, devs.iter().sum::<f64>() / nf);
        max_abs_dev.insert(k, devs.iter().copied().fold(0.0, f64::max));
    }
    let n_sec = match counting {
        SectorCount::Kinematic => count_sectors(id.n_a, n_b, id.two_s),
        SectorCount::ObservedSupport => keys
            .iter()
            .filter(|&&k| states.iter().any(|s| s.probability(k) > P_FLOOR))
            .count(),
    };
    let sum_var: f64 = var_p.values().sum();
    let sum_sqrt_var: f64 = var_p.values().map(|v| v.sqrt()).sum();
    let sum_mean_abs_dev: f64 = mean_abs_dev.values().sum();
    let n_pairs = pairs.len();
    let np = n_pairs as f64;
    let avg = |f: fn(&PairDistances) -> f64| pairs.iter().map(f).sum::<f64>() / np;
    let avg_d_prob = avg(|p| p.d_prob);
    let avg_d_conf = avg(|p| p.d_conf);
    let avg_d_full = avg(|p| p.d_full);
    let bound_rhs = (n_sec as f64 * sum_var).sqrt();
    Ok(WindowStats {
        id,
        window,
        n_states: n,
        n_pairs,
        sum_var,
        sum_sqrt_var,
        sum_mean_abs_dev,
        endpoint_correction: max_abs_dev.values().sum::<f64>() / np,
        mean_p,
        var_p,
        mean_abs_dev,
        max_abs_dev,
        n_sec,
        avg_d_prob,
        avg_d_conf,
        avg_d_conf_reversed: avg(|p| p.d_conf_reversed),
        avg_d_full,
        avg_gap: avg(|p| p.d_full - p.d_conf),
        avg_leakage: states.iter().map(|s| s.leakage).sum::<f64>() / nf,
        bound_rhs,
        bound_satisfied: avg_d_prob <= bound_rhs + WINDOW_TOLERANCE,
    })
}
