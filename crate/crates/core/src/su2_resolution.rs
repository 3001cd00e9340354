//! Subsystem-spin resolution of reduced density matrices.
//!
//! The projector onto subsystem spin `S_A` is realized as the spectral
//! projector of `S_A²` acting on the first `n_a` sites. Each magnetization
//! block of the `2^{n_a}` space is rotated into an eigenbasis of `S_A²`; the
//! columns carry `(two_s_a, copy)` labels, the copy index distinguishing the
//! degenerate multiplets with equal `S_A`.
//!
//! A reduced density matrix in that basis is split into its diagonal
//! `(S_A, S_A)` blocks. Whatever sits outside those blocks is reported as
//! leakage instead of being assumed to vanish.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::distances::trace_norm_of;
use crate::error::{Error, Result};
use crate::lattice_operators::build_subsystem_spin_squared;
use crate::oracle;
use crate::sector_basis::{fixed_popcount_configs, SectorBasis};
use crate::spectral::{
    full_symmetric_eig, solve_sector, Retention, SectorSpectrum, SolveOptions, SpinLabelContext,
};

/// Probability below which a subsystem-spin sector counts as absent.
pub const P_FLOOR: f64 = 1e-14;

/// Largest subsystem handled.
pub const MAX_SUBSYSTEM: usize = 12;

/// Adapted columns for one `two_m_a` block of the subsystem space.
#[derive(Debug, Clone)]
pub struct AdaptedBlock {
    pub two_m_a: i32,
    /// Subsystem configurations of this block, ascending.
    pub configs: Vec<u32>,
    /// Orthogonal `dim x dim` matrix; columns grouped by ascending `two_s_a`.
    pub columns: DMatrix<f64>,
    /// `(two_s_a, copy)` per column.
    pub labels: Vec<(i32, usize)>,
    /// Column range occupied by each `two_s_a`.
    pub sectors: Vec<(i32, Range<usize>)>,
}

impl AdaptedBlock {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn sector_range(&self, two_s_a: i32) -> Option<Range<usize>> {
        self.sectors
            .iter()
            .find(|(s, _)| *s == two_s_a)
            .map(|(_, r)| r.clone())
    }
}

/// Eigenbasis of `S_A²` for the first `n_a` sites, block by block in `m_A`.
#[derive(Debug, Clone)]
pub struct SpinAdaptedBasisA {
    pub n_a: usize,
    /// Indexed by number of up spins, i.e. `two_m_a = 2k - n_a`.
    pub blocks: Vec<AdaptedBlock>,
    /// Eigenvector residual `max ‖S_A² u - s(s+1) u‖` over all columns.
    pub max_residual: f64,
}

impl SpinAdaptedBasisA {
    pub fn block(&self, two_m_a: i32) -> Option<&AdaptedBlock> {
        let k = (two_m_a + self.n_a as i32).checked_div(2)?;
        if (two_m_a + self.n_a as i32) % 2 != 0 || k < 0 {
            return None;
        }
        self.blocks.get(k as usize)
    }

    /// All `two_s_a` values a subsystem of this size can carry.
    pub fn spin_values(&self) -> Vec<i32> {
        ((self.n_a % 2) as i32..=self.n_a as i32)
            .step_by(2)
            .collect()
    }

    /// Total number of columns labeled `two_s_a` across all blocks.
    pub fn column_count(&self, two_s_a: i32) -> usize {
        self.blocks
            .iter()
            .filter_map(|b| b.sector_range(two_s_a))
            .map(|r| r.len())
            .sum()
    }

    /// Dense projector onto spin `two_s_a` on the `2^{n_a}` space.
    pub fn projector(&self, two_s_a: i32) -> DMatrix<f64> {
        let dim = 1usize << self.n_a;
        let mut p = DMatrix::zeros(dim, dim);
        for b in &self.blocks {
            let Some(r) = b.sector_range(two_s_a) else {
                continue;
            };
            let u = b.columns.columns(r.start, r.len());
            let local = &u * u.transpose();
            for (i, &ci) in b.configs.iter().enumerate() {
                for (j, &cj) in b.configs.iter().enumerate() {
                    p[(ci as usize, cj as usize)] = local[(i, j)];
                }
            }
        }
        p
    }
}

/// Diagonalize `S_A²` block by block.
pub fn build_spin_adapted_basis(n_a: usize) -> Result<SpinAdaptedBasisA> {
    if !(1..=MAX_SUBSYSTEM).contains(&n_a) {
        return Err(Error::Argument(format!(
            "subsystem size must lie in 1..={MAX_SUBSYSTEM}, got {n_a}"
        )));
    }
    let s2 = build_subsystem_spin_squared(n_a)?;
    let mut blocks = Vec::with_capacity(n_a + 1);
    let mut max_residual = 0.0f64;
    for k in 0..=n_a {
        let two_m_a = 2 * k as i32 - n_a as i32;
        let configs: Vec<u32> = fixed_popcount_configs(n_a, k).iter().map(|c| c.0).collect();
        let dim = configs.len();
        let pos: HashMap<u32, usize> = configs.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut local = DMatrix::zeros(dim, dim);
        for (i, &c) in configs.iter().enumerate() {
            for (col, v) in s2.row(c as usize) {
                local[(i, pos[&(col as u32)])] = v;
            }
        }
        let eig = full_symmetric_eig(&local)?;
        let ctx = SpinLabelContext {
            n_sites: n_a,
            two_m: two_m_a,
        };
        let mut labels = Vec::with_capacity(dim);
        let mut sectors: Vec<(i32, Range<usize>)> = Vec::new();
        for (c, &lambda) in eig.values.iter().enumerate() {
            let two_s_a = ctx.nearest_two_s(lambda);
            let s = two_s_a as f64 / 2.0;
            let col = eig.vectors.column(c);
            let res = (&local * col - col * (s * (s + 1.0))).amax();
            max_residual = max_residual.max(res);
            match sectors.last_mut() {
                Some((last, r)) if *last == two_s_a => r.end = c + 1,
                _ => sectors.push((two_s_a, c..c + 1)),
            }
            let copy = c - sectors.last().unwrap().1.start;
            labels.push((two_s_a, copy));
        }
        if sectors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Numerical(format!(
                "S_A² eigenvalues for n_a={n_a}, two_m_a={two_m_a} are not grouped by spin"
            )));
        }
        blocks.push(AdaptedBlock {
            two_m_a,
            configs,
            columns: eig.vectors,
            labels,
            sectors,
        });
    }
    Ok(SpinAdaptedBasisA {
        n_a,
        blocks,
        max_residual,
    })
}

/// Process-wide memoized [`build_spin_adapted_basis`].
pub fn spin_adapted_basis(n_a: usize) -> Result<Arc<SpinAdaptedBasisA>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpinAdaptedBasisA>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.lock().unwrap().get(&n_a) {
        return Ok(Arc::clone(b));
    }
    let built = Arc::new(build_spin_adapted_basis(n_a)?);
    Ok(cache.lock().unwrap().entry(n_a).or_insert(built).clone())
}

/// One `two_m_a` block of a reduced density matrix in the configuration basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RdmBlock {
    pub two_m_a: i32,
    pub configs: Vec<u32>,
    pub matrix: DMatrix<f64>,
}

/// Reduced density matrix of the first `n_a` sites, block diagonal in `m_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedRdm {
    pub n_a: usize,
    pub blocks: Vec<RdmBlock>,
}

impl BlockedRdm {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.matrix.trace()).sum()
    }

    pub fn block(&self, two_m_a: i32) -> Option<&RdmBlock> {
        self.blocks.iter().find(|b| b.two_m_a == two_m_a)
    }

    /// Embed into the dense `2^{n_a}` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = 1usize << self.n_a;
        let mut out = DMatrix::zeros(dim, dim);
        for b in &self.blocks {
            for (i, &ci) in b.configs.iter().enumerate() {
                for (j, &cj) in b.configs.iter().enumerate() {
                    out[(ci as usize, cj as usize)] = b.matrix[(i, j)];
                }
            }
        }
        out
    }
}

/// Trace out all sites from `n_a` onward.
///
/// `ρ_A[a, a'] = Σ_b ψ(a ⊕ b) ψ(a' ⊕ b)` where site `j < n_a` is bit `j` of `a`
/// and site `n_a + j` is bit `j` of `b`.
pub fn reduced_density_matrix(basis: &SectorBasis, psi: &[f64], n_a: usize) -> Result<BlockedRdm> {
    let n = basis.n_sites();
    if n_a == 0 || n_a > n.min(MAX_SUBSYSTEM) {
        return Err(Error::Argument(format!(
            "subsystem size {n_a} invalid for a {n}-site chain"
        )));
    }
    if psi.len() != basis.dim() {
        return Err(Error::Argument(format!(
            "state has {} amplitudes, sector has {}",
            psi.len(),
            basis.dim()
        )));
    }
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Argument(format!("state norm {norm} is not 1")));
    }
    let n_b = n - n_a;
    let n_up = basis.up_count();
    let mask = (1u32 << n_a) - 1;

    // Rank of each word among words with the same popcount.
    let rank = |bits: usize| -> Vec<usize> {
        let mut counters = vec![0usize; bits + 1];
        (0..1usize << bits)
            .map(|w| {
                let k = w.count_ones() as usize;
                counters[k] += 1;
                counters[k] - 1
            })
            .collect()
    };
    let rank_a = rank(n_a);
    let rank_b = rank(n_b);

    let mut psi_blocks: Vec<Option<DMatrix<f64>>> = (0..=n_a)
        .map(|k_a| {
            let k_b = n_up as isize - k_a as isize;
            (k_b >= 0 && k_b as usize <= n_b).then(|| {
                let rows = crate::sector_basis::binomial(n_a, k_a) as usize;
                let cols = crate::sector_basis::binomial(n_b, k_b as usize) as usize;
                DMatrix::zeros(rows, cols)
            })
        })
        .collect();
    for (&c, &amp) in basis.configs().iter().zip(psi) {
        let a = c.0 & mask;
        let b = c.0 >> n_a;
        let k_a = a.count_ones() as usize;
        let m = psi_blocks[k_a]
            .as_mut()
            .expect("block exists for occupied config");
        m[(rank_a[a as usize], rank_b[b as usize])] = amp;
    }
    let blocks = psi_blocks
        .into_iter()
        .enumerate()
        .filter_map(|(k_a, m)| {
            let m = m?;
            let mut rho = &m * m.transpose();
            symmetrize(&mut rho);
            Some(RdmBlock {
                two_m_a: 2 * k_a as i32 - n_a as i32,
                configs: fixed_popcount_configs(n_a, k_a)
                    .iter()
                    .map(|c| c.0)
                    .collect(),
                matrix: rho,
            })
        })
        .collect();
    Ok(BlockedRdm { n_a, blocks })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Unnormalized `ρ_A^{(S_A)}` restricted to one `m_A` block, in adapted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPiece {
    pub two_m_a: i32,
    pub matrix: DMatrix<f64>,
}

/// Everything known about one subsystem-spin sector of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSector {
    pub probability: f64,
    pub pieces: Vec<SectorPiece>,
}

impl SpinSector {
    pub fn is_present(&self) -> bool {
        self.probability > P_FLOOR
    }

    /// `ρ_A^{(S_A)} / P_{S_A}`, or `None` for an absent sector.
    pub fn normalized(&self) -> Option<Vec<SectorPiece>> {
        self.is_present().then(|| {
            self.pieces
                .iter()
                .map(|p| SectorPiece {
                    two_m_a: p.two_m_a,
                    matrix: &p.matrix / self.probability,
                })
                .collect()
        })
    }
}

/// Reduced density matrix split by subsystem spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryResolvedRDM {
    pub n_a: usize,
    /// The raw `m_A` blocks, configuration basis.
    pub raw: BlockedRdm,
    /// Keyed by `two_s_a`; every spin the subsystem can carry is present.
    pub sectors: BTreeMap<i32, SpinSector>,
    /// `½ ‖ρ_A - Σ Π ρ_A Π‖_1`.
    pub leakage: f64,
    /// `1 - Σ P_{S_A}`.
    pub trace_deficit: f64,
}

impl SymmetryResolvedRDM {
    pub fn probability(&self, two_s_a: i32) -> f64 {
        self.sectors.get(&two_s_a).map_or(0.0, |s| s.probability)
    }

    pub fn probabilities(&self) -> BTreeMap<i32, f64> {
        self.sectors
            .iter()
            .map(|(&k, s)| (k, s.probability))
            .collect()
    }
}

/// Rotate each `m_A` block into adapted columns and pinch by `S_A`.
pub fn resolve(rho: &BlockedRdm, basis_a: &SpinAdaptedBasisA) -> Result<SymmetryResolvedRDM> {
    if rho.n_a != basis_a.n_a {
        return Err(Error::Argument(format!(
            "RDM on {} sites, adapted basis on {}",
            rho.n_a, basis_a.n_a
        )));
    }
    let mut sectors: BTreeMap<i32, SpinSector> = basis_a
        .spin_values()
        .into_iter()
        .map(|s| {
            (
                s,
                SpinSector {
                    probability: 0.0,
                    pieces: Vec::new(),
                },
            )
        })
        .collect();
    let mut leakage = 0.0;
    for block in &rho.blocks {
        let adapted = basis_a.block(block.two_m_a).ok_or_else(|| {
            Error::Argument(format!("no adapted block for two_m_a={}", block.two_m_a))
        })?;
        if adapted.dim() != block.matrix.nrows() {
            return Err(Error::Argument(format!(
                "block two_m_a={} has dim {}, adapted basis {}",
                block.two_m_a,
                block.matrix.nrows(),
                adapted.dim()
            )));
        }
        let u = &adapted.columns;
        let mut rotated = u.transpose() * &block.matrix * u;
        symmetrize(&mut rotated);
        let mut off = rotated.clone();
        for (two_s_a, r) in &adapted.sectors {
            let piece = rotated
                .view((r.start, r.start), (r.len(), r.len()))
                .into_owned();
            off.view_mut((r.start, r.start), (r.len(), r.len()))
                .fill(0.0);
            let sector = sectors.get_mut(two_s_a).expect("spin value enumerated");
            sector.probability += piece.trace();
            sector.pieces.push(SectorPiece {
                two_m_a: block.two_m_a,
                matrix: piece,
            });
        }
        leakage += 0.5 * trace_norm_of(&off)?;
    }
    let total: f64 = sectors.values().map(|s| s.probability).sum();
    Ok(SymmetryResolvedRDM {
        n_a: rho.n_a,
        raw: rho.clone(),
        sectors,
        leakage,
        trace_deficit: 1.0 - total,
    })
}

/// Reduced density matrix of the first `n_a` sites, resolved by `S_A`.
pub fn resolve_state(basis: &SectorBasis, psi: &[f64], n_a: usize) -> Result<SymmetryResolvedRDM> {
    let basis_a = spin_adapted_basis(n_a)?;
    resolve(&reduced_density_matrix(basis, psi, n_a)?, &basis_a)
}

/// Max over `S_A` and `c ∈ {x, y, z}` of `max |[Π_{S_A} ⊗ 1, S_tot^c]|`.
pub fn projector_invariance_check(n: usize, n_a: usize) -> Result<f64> {
    if n > 8 || n_a == 0 || n_a > n {
        return Err(Error::Argument(format!(
            "projector check needs 1 ≤ n_a ≤ n ≤ 8, got n={n}, n_a={n_a}"
        )));
    }
    let basis_a = spin_adapted_basis(n_a)?;
    let components = oracle::total_spin_components(n);
    let id_b = DMatrix::<f64>::identity(1 << (n - n_a), 1 << (n - n_a));
    let mut worst = 0.0f64;
    for two_s_a in basis_a.spin_values() {
        let pi = oracle::kron_a_b(&basis_a.projector(two_s_a), &id_b, n_a);
        for s in &components {
            worst = worst.max((&pi * s - s * &pi).amax());
        }
    }
    Ok(worst)
}

/// Outcome of comparing `P_{S_A}` across multiplet members in different `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MIndependenceReport {
    pub max_discrepancy: f64,
    pub compared: usize,
    /// Descriptions of energy clusters that could not be matched uniquely.
    pub ambiguous: Vec<String>,
}

/// Energy tolerance for matching multiplet partners across sectors.
pub const MULTIPLET_MATCH_TOLERANCE: f64 = 1e-9;

/// Compare sector probabilities of every multiplet in each `two_m > min`
/// sector against its partner in the lowest `|two_m|` sector.
pub fn m_independence_check(n: usize, j1: f64, j2: f64, n_a: usize) -> Result<MIndependenceReport> {
    if n > 8 || n_a == 0 || n_a > n {
        return Err(Error::Argument(format!(
            "M-independence check needs 1 ≤ n_a ≤ n ≤ 8, got n={n}, n_a={n_a}"
        )));
    }
    let opts = SolveOptions {
        retention: Retention::All,
        ..SolveOptions::default()
    };
    let two_m_ref = (n % 2) as i32;
    let reference = solve_sector(n, two_m_ref, j1, j2, true, &opts)?;
    let ref_basis = crate::sector_basis::enumerate_sector(n, two_m_ref)?;
    let ref_probs = sector_probabilities(&reference, &ref_basis, n_a)?;

    let mut report = MIndependenceReport {
        max_discrepancy: 0.0,
        compared: 0,
        ambiguous: Vec::new(),
    };
    for two_m in (two_m_ref + 2..=n as i32).step_by(2) {
        let other = solve_sector(n, two_m, j1, j2, true, &opts)?;
        let basis = crate::sector_basis::enumerate_sector(n, two_m)?;
        let probs = sector_probabilities(&other, &basis, n_a)?;
        for (state, p) in other.states.iter().zip(&probs) {
            let partners: Vec<usize> = reference
                .states
                .iter()
                .enumerate()
                .filter(|(_, r)| {
                    r.two_s == state.two_s
                        && r.parity == state.parity
                        && (r.energy - state.energy).abs() <= MULTIPLET_MATCH_TOLERANCE
                })
                .map(|(i, _)| i)
                .collect();
            if partners.len() != 1 {
                report.ambiguous.push(format!(
                    "two_m={two_m} two_s={} E={} has {} candidate partners",
                    state.two_s,
                    state.energy,
                    partners.len()
                ));
                continue;
            }
            let q = &ref_probs[partners[0]];
            for (k, v) in p {
                let d = (v - q.get(k).copied().unwrap_or(0.0)).abs();
                report.max_discrepancy = report.max_discrepancy.max(d);
            }
            report.compared += 1;
        }
    }
    Ok(report)
}

fn sector_probabilities(
    spectrum: &SectorSpectrum,
    basis: &SectorBasis,
    n_a: usize,
) -> Result<Vec<BTreeMap<i32, f64>>> {
    spectrum
        .states
        .iter()
        .map(|s| {
            let v = s
                .vector
                .as_ref()
                .ok_or_else(|| Error::Argument("eigenvector not retained".into()))?;
            Ok(resolve_state(basis, v, n_a)?.probabilities())
        })
        .collect()
}

/// Multiplet count of spin `two_s` among `n` spin-1/2 sites.
pub fn multiplet_count(n: usize, two_s: i32) -> u64 {
    if two_s < 0 || two_s as usize > n || (n as i32 - two_s) % 2 != 0 {
        return 0;
    }
    let k = (n - two_s as usize) / 2;
    let hi = crate::sector_basis::binomial(n, k);
    let lo = if k == 0 {
        0
    } else {
        crate::sector_basis::binomial(n, k - 1)
    };
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector_basis::{enumerate_sector, SpinConfig};

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    /// Amplitudes over a sector from `(config, amplitude)` pairs.
    fn state(basis: &SectorBasis, terms: &[(u32, f64)]) -> Vec<f64> {
        let mut v = vec![0.0; basis.dim()];
        for &(c, a) in terms {
            v[basis.index_of(SpinConfig(c)).unwrap()] += a;
        }
        v
    }

    /// Singlets on sites (0,1) and (2,3) with site 0 = bit 0.
    fn singlet_pair(site_order: [usize; 4]) -> (SectorBasis, Vec<f64>) {
        let b = enumerate_sector(4, 0).unwrap();
        let mut terms = Vec::new();
        for (s1, a1) in [(0u32, 1.0), (1, -1.0)] {
            for (s2, a2) in [(0u32, 1.0), (1, -1.0)] {
                // s = 0: up on the first site of the pair
                let mut bits = 0u32;
                let up = |first: bool, pair: usize| site_order[2 * pair + usize::from(!first)];
                bits |= 1 << up(s1 == 0, 0);
                bits |= 1 << up(s2 == 0, 1);
                terms.push((bits, a1 * a2 * 0.5));
            }
        }
        let v = state(&b, &terms);
        (b, v)
    }

    #[test]
    fn two_site_adapted_columns() {
        let ba = build_spin_adapted_basis(2).unwrap();
        let blk = ba.block(0).unwrap();
        assert_eq!(blk.configs, vec![0b01, 0b10]);
        assert_eq!(blk.labels, vec![(0, 0), (2, 0)]);
        let singlet = blk.columns.column(0);
        let triplet = blk.columns.column(1);
        assert!((singlet[0] - R).abs() < 1e-14 && (singlet[1] + R).abs() < 1e-14);
        assert!((triplet[0] - R).abs() < 1e-14 && (triplet[1] - R).abs() < 1e-14);
    }

    #[test]
    fn adapted_copy_counts() {
        let ba = build_spin_adapted_basis(3).unwrap();
        for blk in &ba.blocks {
            let ones = blk.labels.iter().filter(|l| l.0 == 1).count();
            let threes = blk.labels.iter().filter(|l| l.0 == 3).count();
            if blk.two_m_a.abs() == 1 {
                assert_eq!((ones, threes), (2, 1));
            } else {
                assert_eq!((ones, threes), (0, 1));
            }
        }
        for n_a in 1..=8 {
            let ba = build_spin_adapted_basis(n_a).unwrap();
            assert!(ba.max_residual <= 1e-10);
            for s in ba.spin_values() {
                assert_eq!(
                    ba.column_count(s) as u64,
                    (s as u64 + 1) * multiplet_count(n_a, s)
                );
            }
            for blk in &ba.blocks {
                let gram = blk.columns.transpose() * &blk.columns;
                assert!((gram - DMatrix::identity(blk.dim(), blk.dim())).amax() <= 1e-12);
            }
        }
        let four: Vec<u64> = [0, 2, 4].iter().map(|&s| multiplet_count(4, s)).collect();
        assert_eq!(four, vec![2, 3, 1]);
    }

    #[test]
    fn rdm_of_two_site_singlet() {
        let b = enumerate_sector(2, 0).unwrap();
        let v = state(&b, &[(0b01, R), (0b10, -R)]);
        let rho = reduced_density_matrix(&b, &v, 1).unwrap();
        let dense = rho.to_dense();
        assert!((dense - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn rdm_rejects_unnormalized_state() {
        let b = enumerate_sector(2, 0).unwrap();
        let v = vec![1.0, 1.0];
        assert!(matches!(
            reduced_density_matrix(&b, &v, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn singlet_product_resolution() {
        let (b, v) = singlet_pair([0, 1, 2, 3]);
        let rho = reduced_density_matrix(&b, &v, 2).unwrap();
        let mut singlet = DMatrix::zeros(4, 4);
        singlet[(1, 1)] = 0.5;
        singlet[(2, 2)] = 0.5;
        singlet[(1, 2)] = -0.5;
        singlet[(2, 1)] = -0.5;
        assert!((rho.to_dense() - singlet).amax() < 1e-15);
        let srr = resolve(&rho, &build_spin_adapted_basis(2).unwrap()).unwrap();
        assert!((srr.probability(0) - 1.0).abs() < 1e-14);
        assert!(srr.leakage < 1e-14);

        // Singlets on (1,2) and (0,3): the first two sites are each half of a
        // different singlet, so ρ_A = Id/4.
        let (b, v) = singlet_pair([1, 2, 0, 3]);
        let rho = reduced_density_matrix(&b, &v, 2).unwrap();
        assert!((rho.to_dense() - DMatrix::identity(4, 4) * 0.25).amax() < 1e-15);
        let srr = resolve(&rho, &build_spin_adapted_basis(2).unwrap()).unwrap();
        assert!((srr.probability(0) - 0.25).abs() < 1e-14);
        assert!((srr.probability(2) - 0.75).abs() < 1e-14);
        assert!(srr.leakage < 1e-14);
    }

    #[test]
    fn three_site_leakage_closed_form() {
        // |ψ> = a |S_12=0>|↑> + b |(S_12=1) ; 1/2, 1/2>, with
        // |(1);1/2,1/2> = √(2/3)|1,1>|↓> - √(1/3)|1,0>|↑>.
        let b = enumerate_sector(3, 1).unwrap();
        let basis_a = build_spin_adapted_basis(2).unwrap();
        for (a, bb) in [(0.6, 0.8), (R, -R), (0.28, 0.96), (1.0, 0.0)] {
            let s13 = (1.0f64 / 3.0).sqrt();
            let s23 = (2.0f64 / 3.0).sqrt();
            let v = state(
                &b,
                &[
                    // singlet (↑↓ - ↓↑)/√2 ⊗ ↑ ; site 0 = bit 0
                    (0b101, a * R),
                    (0b110, -a * R),
                    // |1,1>|↓>
                    (0b011, bb * s23),
                    // -(1/√3)(↑↓ + ↓↑)/√2 ⊗ ↑
                    (0b101, -bb * s13 * R),
                    (0b110, -bb * s13 * R),
                ],
            );
            let srr = resolve(&reduced_density_matrix(&b, &v, 2).unwrap(), &basis_a).unwrap();
            let want = (a * bb).abs() / 3f64.sqrt();
            assert!((srr.leakage - want).abs() < 1e-14, "a={a} b={bb}");
            assert!((srr.probability(0) - a * a).abs() < 1e-14);
            assert!((srr.probability(2) - bb * bb).abs() < 1e-14);
        }

        // Actual S=1/2 eigenstates of the open 3-site chain mix both branches.
        let opts = SolveOptions {
            retention: Retention::All,
            ..SolveOptions::default()
        };
        let sp = solve_sector(3, 1, 1.0, 0.0, false, &opts).unwrap();
        for s in sp.states.iter().filter(|s| s.two_s == 1) {
            let v = s.vector.as_ref().unwrap();
            let srr = resolve(&reduced_density_matrix(&b, v, 2).unwrap(), &basis_a).unwrap();
            let (pa, pb) = (srr.probability(0), srr.probability(2));
            assert!(pa > 1e-3 && pb > 1e-3);
            assert!((srr.leakage - (pa * pb).sqrt() / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_respect_triangle_rule() {
        let opts = SolveOptions {
            retention: Retention::All,
            ..SolveOptions::default()
        };
        for (n, two_m) in [(6, 0), (7, 1), (8, 2)] {
            let b = enumerate_sector(n, two_m).unwrap();
            let sp = solve_sector(n, two_m, 1.0, 0.5, true, &opts).unwrap();
            for n_a in 1..n {
                for st in &sp.states {
                    let srr = resolve_state(&b, st.vector.as_ref().unwrap(), n_a).unwrap();
                    assert!(srr.trace_deficit.abs() <= 1e-10);
                    for (&s_a, sec) in &srr.sectors {
                        assert!(sec.probability >= -1e-12);
                        if (st.two_s - s_a).abs() > (n - n_a) as i32 {
                            assert!(sec.probability.abs() <= 1e-12);
                        }
                        if let Some(norm) = sec.normalized() {
                            let tr: f64 = norm.iter().map(|p| p.matrix.trace()).sum();
                            assert!((tr - 1.0).abs() <= 1e-10);
                            for p in &norm {
                                let ev = full_symmetric_eig(&p.matrix).unwrap();
                                assert!(ev.values.iter().all(|&x| x >= -1e-10));
                            }
                        }
                    }
                    if st.two_s == 0 {
                        assert!(srr.leakage <= 1e-10, "leakage {}", srr.leakage);
                    }
                }
            }
        }
    }

    #[test]
    fn projector_commutes_with_total_spin() {
        assert_eq!(projector_invariance_check(2, 1).unwrap(), 0.0);
        assert!(projector_invariance_check(4, 2).unwrap() <= 1e-12);
        assert!(projector_invariance_check(6, 3).unwrap() <= 1e-12);
        assert!(projector_invariance_check(9, 3).is_err());
    }

    #[test]
    fn probabilities_do_not_depend_on_m() {
        let r = m_independence_check(4, 1.0, 0.0, 2).unwrap();
        assert!(r.max_discrepancy <= 1e-10);
        assert!(r.compared > 0);
        let r = m_independence_check(6, 1.0, 0.5, 3).unwrap();
        assert!(r.max_discrepancy <= 1e-10, "{r:?}");
        assert!(r.compared > 0);
        // A single fully polarized sector has nothing to compare against.
        let r = m_independence_check(1, 1.0, 0.0, 1).unwrap();
        assert_eq!((r.compared, r.max_discrepancy), (0, 0.0));
    }
}
