//! Trace norms and the per-pair split of the trace distance into a
//! probability part and a configurational part.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::symmetric_eigenvalues;
use crate::su2_resolution::{BlockedRdm, SectorPiece, SpinSector, SymmetryResolvedRDM};

/// Slack tolerated on every pair inequality.
pub const PAIR_TOLERANCE: f64 = 1e-10;

/// Schatten 1-norm of a symmetric matrix.
pub fn trace_norm_of(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?.iter().map(|x| x.abs()).sum())
}

/// Schatten 1-norm of a block-diagonal symmetric matrix.
pub fn trace_norm(blocks: &[DMatrix<f64>]) -> Result<f64> {
    blocks.iter().map(trace_norm_of).sum()
}

fn check_same_structure(rho: &BlockedRdm, sigma: &BlockedRdm) -> Result<()> {
    let same = rho.n_a == sigma.n_a
        && rho.blocks.len() == sigma.blocks.len()
        && rho
            .blocks
            .iter()
            .zip(&sigma.blocks)
            .all(|(a, b)| a.two_m_a == b.two_m_a && a.matrix.shape() == b.matrix.shape());
    if same {
        Ok(())
    } else {
        Err(Error::Argument(
            "density matrices have different block structure".into(),
        ))
    }
}

/// `½ ‖ρ - σ‖_1` for two blocked density matrices.
pub fn trace_distance(rho: &BlockedRdm, sigma: &BlockedRdm) -> Result<f64> {
    check_same_structure(rho, sigma)?;
    for (name, m) in [("first", rho), ("second", sigma)] {
        let tr = m.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::Argument(format!(
                "{name} density matrix has trace {tr}"
            )));
        }
    }
    let diffs: Vec<DMatrix<f64>> = rho
        .blocks
        .iter()
        .zip(&sigma.blocks)
        .map(|(a, b)| &a.matrix - &b.matrix)
        .collect();
    Ok(0.5 * trace_norm(&diffs)?)
}

/// Distance decomposition for a consecutive pair `(α, α+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    pub alpha_index: usize,
    /// `½ ‖ρ_{α+1} - ρ_α‖_1` on the raw reduced density matrices.
    pub d_full: f64,
    /// Per `two_s_a`: `½ ‖ρ^{(S_A)}_{α+1} - ρ^{(S_A)}_α‖_1` on the pinched blocks.
    pub d_sector: BTreeMap<i32, f64>,
    /// `½ Σ |ΔP|`.
    pub d_prob: f64,
    /// `½ Σ P_{α+1} ‖ρ̃_{α+1} - ρ̃_α‖_1`; canonical form.
    pub d_conf: f64,
    /// Same with weights taken from state `α`.
    pub d_conf_reversed: f64,
    pub leakage_alpha: f64,
    pub leakage_alpha1: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
}

impl PairDistances {
    pub fn sector_sum(&self) -> f64 {
        self.d_sector.values().sum()
    }

    /// `d_full - Σ d_sector`; zero when both states are exactly block diagonal.
    pub fn decomposition_deviation(&self) -> f64 {
        self.d_full - self.sector_sum()
    }

    /// Every pair inequality that fails by more than `tol`.
    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: &str| {
            if !ok {
                out.push(format!("pair {}: {what} ({self:?})", self.alpha_index));
            }
        };
        check(
            self.d_full >= -tol && self.d_full <= 1.0 + tol,
            "d_full outside [0, 1]",
        );
        check(
            self.d_sector.values().all(|&d| d >= -tol),
            "negative sector distance",
        );
        check(self.lower_slack >= -tol, "d_prob exceeds d_full");
        check(
            self.sector_sum() <= self.d_full + tol,
            "sector distances exceed d_full",
        );
        check(
            self.d_prob <= self.sector_sum() + tol,
            "d_prob exceeds summed sector distances",
        );
        check(self.upper_slack >= -tol, "upper bound violated");
        out
    }

    /// `d_prob ≤ d_full ≤ d_prob + d_conf` without the leakage correction.
    pub fn exact_bounds_hold(&self, tol: f64) -> bool {
        self.d_prob <= self.d_full + tol && self.d_full <= self.d_prob + self.d_conf + tol
    }
}

fn piece_difference_norm(a: &[SectorPiece], b: &[SectorPiece]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.two_m_a != y.two_m_a) {
        return Err(Error::Argument("sector blocks do not line up".into()));
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| trace_norm_of(&(&x.matrix - &y.matrix)))
        .sum()
}

/// `½ P_w ‖ρ̃_w - ρ̃_o‖_1` for one sector. A vanishing weight or a missing
/// partner block contributes zero.
fn weighted_conf(weight: &SpinSector, other: &SpinSector) -> Result<f64> {
    match (weight.normalized(), other.normalized()) {
        (Some(w), Some(o)) => Ok(0.5 * weight.probability * piece_difference_norm(&w, &o)?),
        _ => Ok(0.0),
    }
}

/// Decompose the distance between two resolved states, `alpha` first.
pub fn pair_distances(
    alpha_index: usize,
    alpha: &SymmetryResolvedRDM,
    alpha1: &SymmetryResolvedRDM,
) -> Result<PairDistances> {
    check_same_structure(&alpha.raw, &alpha1.raw)?;
    if alpha.sectors.keys().ne(alpha1.sectors.keys()) {
        return Err(Error::Argument(
            "states carry different spin sectors".into(),
        ));
    }
    let d_full = trace_distance(&alpha1.raw, &alpha.raw)?;
    let mut d_sector = BTreeMap::new();
    let mut d_prob = 0.0;
    let mut d_conf = 0.0;
    let mut d_conf_reversed = 0.0;
    for (&two_s_a, s0) in &alpha.sectors {
        let s1 = &alpha1.sectors[&two_s_a];
        d_sector.insert(
            two_s_a,
            0.5 * piece_difference_norm(&s1.pieces, &s0.pieces)?,
        );
        d_prob += 0.5 * (s1.probability - s0.probability).abs();
        d_conf += weighted_conf(s1, s0)?;
        d_conf_reversed += weighted_conf(s0, s1)?;
    }
    let leakage_alpha = alpha.leakage;
    let leakage_alpha1 = alpha1.leakage;
    Ok(PairDistances {
        alpha_index,
        d_full,
        d_sector,
        d_prob,
        d_conf,
        d_conf_reversed,
        leakage_alpha,
        leakage_alpha1,
        lower_slack: d_full - d_prob,
        upper_slack: d_prob + d_conf + leakage_alpha + leakage_alpha1 - d_full,
    })
}

/// Total-variation distance `½ Σ |p - q|` of two distributions over `two_s_a`.
pub fn total_variation(p: &BTreeMap<i32, f64>, q: &BTreeMap<i32, f64>) -> f64 {
    let keys: std::collections::BTreeSet<i32> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}
