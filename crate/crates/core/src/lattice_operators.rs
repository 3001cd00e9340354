//! Sparse real-symmetric operators acting inside a fixed-magnetization sector.
//!
//! Every operator here is a sum of Heisenberg exchanges `J S_i·S_j`. Acting on a
//! configuration, a bond contributes `+J/4` on the diagonal when the two spins
//! agree, `-J/4` when they differ, and `J/2` towards the configuration with the
//! two spins swapped. All matrix elements are dyadic rationals, so construction
//! is bitwise reproducible.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sector_basis::{reflect, OrbitColumn, Parity, ParityBasis, SectorBasis, SpinConfig};

/// Tolerance on `R op R - op` before projecting onto a parity block.
pub const REFLECTION_TOLERANCE: f64 = 1e-12;

/// Row-compressed symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricOperator {
    /// Assemble from the diagonal plus strictly-upper entries; the lower
    /// triangle is the mirror image. Duplicate entries are summed.
    fn from_upper(dim: usize, diag: Vec<f64>, upper: Vec<(usize, usize, f64)>) -> Self {
        debug_assert_eq!(diag.len(), dim);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (r, d) in diag.into_iter().enumerate() {
            if d != 0.0 {
                rows[r].push((r, d));
            }
        }
        for (r, c, v) in upper {
            debug_assert!(c > r);
            rows[r].push((c, v));
            rows[c].push((r, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, x)| x * v[c]).sum())
            .collect()
    }

    /// `<v|op|v>`.
    pub fn expectation(&self, v: &[f64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Largest absolute entry of `[self, other]`, computed densely.
    pub fn commutator_max(&self, other: &Self) -> f64 {
        let a = self.to_dense();
        let b = other.to_dense();
        (&a * &b - &b * &a).amax()
    }
}

/// Exchange bond `coupling * S_i·S_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Open-chain J1-J2 bond list.
pub fn chain_bonds(n_sites: usize, j1: f64, j2: f64) -> Vec<Bond> {
    let mut bonds = Vec::new();
    for i in 0..n_sites.saturating_sub(1) {
        bonds.push(Bond {
            i,
            j: i + 1,
            coupling: j1,
        });
    }
    if j2 != 0.0 {
        for i in 0..n_sites.saturating_sub(2) {
            bonds.push(Bond {
                i,
                j: i + 2,
                coupling: j2,
            });
        }
    }
    bonds
}

/// Every pair `i < j` with coupling 2, as in `S² = 3N/4 + 2 Σ_{i<j} S_i·S_j`.
fn all_pair_bonds(n_sites: usize) -> Vec<Bond> {
    let mut bonds = Vec::with_capacity(n_sites * n_sites.saturating_sub(1) / 2);
    for i in 0..n_sites {
        for j in i + 1..n_sites {
            bonds.push(Bond {
                i,
                j,
                coupling: 2.0,
            });
        }
    }
    bonds
}

fn exchange_operator<F>(
    configs: &[SpinConfig],
    index_of: F,
    bonds: &[Bond],
    shift: f64,
) -> SparseSymmetricOperator
where
    F: Fn(SpinConfig) -> Option<usize>,
{
    let dim = configs.len();
    let mut diag = vec![shift; dim];
    let mut upper = Vec::new();
    for (row, &c) in configs.iter().enumerate() {
        for b in bonds {
            if c.is_up(b.i) == c.is_up(b.j) {
                diag[row] += 0.25 * b.coupling;
            } else {
                diag[row] -= 0.25 * b.coupling;
                let swapped = SpinConfig(c.0 ^ ((1 << b.i) | (1 << b.j)));
                let col = index_of(swapped).expect("exchange preserves magnetization");
                if col > row && b.coupling != 0.0 {
                    upper.push((row, col, 0.5 * b.coupling));
                }
            }
        }
    }
    SparseSymmetricOperator::from_upper(dim, diag, upper)
}

/// `Σ J1 S_j·S_{j+1} + Σ J2 S_j·S_{j+2}` with open boundaries.
pub fn build_hamiltonian(basis: &SectorBasis, j1: f64, j2: f64) -> SparseSymmetricOperator {
    let bonds = chain_bonds(basis.n_sites(), j1, j2);
    exchange_operator(basis.configs(), |c| basis.index_of(c), &bonds, 0.0)
}

/// Total spin squared within the sector.
pub fn build_total_spin_squared(basis: &SectorBasis) -> SparseSymmetricOperator {
    let n = basis.n_sites();
    exchange_operator(
        basis.configs(),
        |c| basis.index_of(c),
        &all_pair_bonds(n),
        0.75 * n as f64,
    )
}

/// `S_A²` on the whole `2^{n_a}` space, rows ordered by bit value.
pub fn build_subsystem_spin_squared(n_a: usize) -> Result<SparseSymmetricOperator> {
    if !(1..=12).contains(&n_a) {
        return Err(Error::Argument(format!(
            "subsystem size must lie in 1..=12, got {n_a}"
        )));
    }
    let configs: Vec<SpinConfig> = (0..1u32 << n_a).map(SpinConfig).collect();
    Ok(exchange_operator(
        &configs,
        |c| Some(c.0 as usize),
        &all_pair_bonds(n_a),
        0.75 * n_a as f64,
    ))
}

/// Site-reversal permutation inside the sector.
pub fn build_reflection(basis: &SectorBasis) -> SparseSymmetricOperator {
    let n = basis.n_sites();
    let dim = basis.dim();
    let mut diag = vec![0.0; dim];
    let mut upper = Vec::new();
    for (row, &c) in basis.configs().iter().enumerate() {
        let col = basis
            .index_of(reflect(c, n))
            .expect("reflection preserves magnetization");
        if col == row {
            diag[row] = 1.0;
        } else if col > row {
            upper.push((row, col, 1.0));
        }
    }
    SparseSymmetricOperator::from_upper(dim, diag, upper)
}

/// Largest `|op(R r, R c) - op(r, c)|` over the sector.
pub fn reflection_defect(op: &SparseSymmetricOperator, basis: &SectorBasis) -> f64 {
    let n = basis.n_sites();
    let mirror: Vec<usize> = basis
        .configs()
        .iter()
        .map(|&c| basis.index_of(reflect(c, n)).unwrap())
        .collect();
    let mut worst = 0.0f64;
    for r in 0..op.dim() {
        for (c, v) in op.row(r) {
            worst = worst.max((op.get(mirror[r], mirror[c]) - v).abs());
        }
    }
    worst
}

/// `U^T op U` over the parity columns of `pb`.
pub fn project_to_parity(
    op: &SparseSymmetricOperator,
    pb: &ParityBasis,
    parity: Parity,
) -> Result<DMatrix<f64>> {
    let basis = pb.parent();
    if op.dim() != basis.dim() {
        return Err(Error::Argument(format!(
            "operator dim {} does not match sector dim {}",
            op.dim(),
            basis.dim()
        )));
    }
    let defect = reflection_defect(op, basis);
    if defect > REFLECTION_TOLERANCE {
        return Err(Error::Symmetry(format!(
            "operator does not commute with reflection (max defect {defect:e})"
        )));
    }
    let cols: &[OrbitColumn] = pb.columns(parity);
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; basis.dim()];
    for (k, col) in cols.iter().enumerate() {
        for (i, w) in col.iter() {
            owner[i] = Some((k, w));
        }
    }
    let d = cols.len();
    let mut out = DMatrix::zeros(d, d);
    for (k, col) in cols.iter().enumerate() {
        for (i, w) in col.iter() {
            for (r, v) in op.row(i) {
                if let Some((kr, wr)) = owner[r] {
                    out[(kr, k)] += wr * v * w;
                }
            }
        }
    }
    // Symmetrize away round-off from the two-term orbits.
    for a in 0..d {
        for b in a + 1..d {
            let m = 0.5 * (out[(a, b)] + out[(b, a)]);
            out[(a, b)] = m;
            out[(b, a)] = m;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct OperatorKey {
    n_sites: usize,
    two_m: i32,
    j1: u64,
    j2: u64,
}

/// Memoized Hamiltonians keyed by `(N, two_m, J1, J2)`.
#[derive(Debug, Default)]
pub struct OperatorCache {
    entries: Mutex<HashMap<OperatorKey, Arc<SparseSymmetricOperator>>>,
}

impl OperatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hamiltonian(
        &self,
        basis: &SectorBasis,
        j1: f64,
        j2: f64,
    ) -> Arc<SparseSymmetricOperator> {
        let key = OperatorKey {
            n_sites: basis.n_sites(),
            two_m: basis.two_m(),
            j1: j1.to_bits(),
            j2: j2.to_bits(),
        };
        if let Some(op) = self.entries.lock().unwrap().get(&key) {
            return Arc::clone(op);
        }
        let op = Arc::new(build_hamiltonian(basis, j1, j2));
        self.entries
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(op)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector_basis::{build_parity_basis, enumerate_sector};

    fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn two_site_hamiltonian() {
        let b = enumerate_sector(2, 0).unwrap();
        let h = build_hamiltonian(&b, 1.0, 0.0).to_dense();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[-0.25, 0.5, 0.5, -0.25]));
        assert_close(&sorted_eigenvalues(h), &[-0.75, 0.25], 1e-14);
    }

    #[test]
    fn three_site_full_spectrum() {
        let mut all = Vec::new();
        for two_m in [-3, -1, 1, 3] {
            let b = enumerate_sector(3, two_m).unwrap();
            all.extend(sorted_eigenvalues(
                build_hamiltonian(&b, 1.0, 0.0).to_dense(),
            ));
        }
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_close(&all, &[-1.0, -1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5], 1e-13);
    }

    #[test]
    fn total_spin_squared_spectra() {
        let s2 = |n, m| {
            sorted_eigenvalues(
                build_total_spin_squared(&enumerate_sector(n, m).unwrap()).to_dense(),
            )
        };
        assert_close(&s2(2, 0), &[0.0, 2.0], 1e-13);
        assert_close(&s2(2, 2), &[2.0], 1e-13);
        let ev = s2(4, 0);
        assert_eq!(ev.iter().filter(|x| x.abs() < 1e-10).count(), 2);
        assert_eq!(ev.iter().filter(|x| (*x - 2.0).abs() < 1e-10).count(), 3);
        assert_eq!(ev.iter().filter(|x| (*x - 6.0).abs() < 1e-10).count(), 1);
    }

    #[test]
    fn subsystem_spin_squared_spectra() {
        let ev = |n| sorted_eigenvalues(build_subsystem_spin_squared(n).unwrap().to_dense());
        assert_close(&ev(1), &[0.75, 0.75], 1e-14);
        assert_close(&ev(2), &[0.0, 2.0, 2.0, 2.0], 1e-13);
        assert_close(
            &ev(3),
            &[0.75, 0.75, 0.75, 0.75, 3.75, 3.75, 3.75, 3.75],
            1e-13,
        );
        assert!(build_subsystem_spin_squared(0).is_err());
        assert!(build_subsystem_spin_squared(13).is_err());
    }

    #[test]
    fn subsystem_spin_squared_is_block_diagonal_in_magnetization() {
        let op = build_subsystem_spin_squared(5).unwrap();
        for r in 0..op.dim() {
            for (c, _) in op.row(r) {
                assert_eq!((r as u32).count_ones(), (c as u32).count_ones());
            }
        }
    }

    #[test]
    fn commutation_relations() {
        for n in 2..=8 {
            for two_m in (-(n as i32)..=n as i32).step_by(2) {
                let b = enumerate_sector(n, two_m).unwrap();
                for j2 in [0.0, 0.37, 1.0] {
                    let h = build_hamiltonian(&b, 1.0, j2);
                    assert!(h.commutator_max(&build_total_spin_squared(&b)) <= 1e-12);
                    assert!(h.commutator_max(&build_reflection(&b)) <= 1e-12);
                    assert_eq!(reflection_defect(&h, &b), 0.0);
                }
            }
        }
    }

    #[test]
    fn trace_identities() {
        for n in 2..=8usize {
            let mut total = 0.0;
            for two_m in (-(n as i32)..=n as i32).step_by(2) {
                let b = enumerate_sector(n, two_m).unwrap();
                let h = build_hamiltonian(&b, 1.0, 0.5);
                let direct: f64 = b
                    .configs()
                    .iter()
                    .map(|c| {
                        chain_bonds(n, 1.0, 0.5)
                            .iter()
                            .map(|bd| if c.is_up(bd.i) == c.is_up(bd.j) { 0.25 } else { -0.25 } * bd.coupling)
                            .sum::<f64>()
                    })
                    .sum();
                assert_eq!(h.trace(), direct);
                total += h.trace();
            }
            assert!(total.abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn parity_projection() {
        let b = enumerate_sector(2, 0).unwrap();
        let pb = build_parity_basis(&b);
        let h = build_hamiltonian(&b, 1.0, 0.0);
        assert!((project_to_parity(&h, &pb, Parity::Even).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((project_to_parity(&h, &pb, Parity::Odd).unwrap()[(0, 0)] + 0.75).abs() < 1e-15);

        let b6 = enumerate_sector(6, 0).unwrap();
        let pb6 = build_parity_basis(&b6);
        let id = SparseSymmetricOperator::from_upper(b6.dim(), vec![1.0; b6.dim()], vec![]);
        for p in [Parity::Even, Parity::Odd] {
            let m = project_to_parity(&id, &pb6, p).unwrap();
            assert!((m.clone() - DMatrix::identity(m.nrows(), m.nrows())).amax() < 1e-15);
        }
    }

    #[test]
    fn parity_blocks_reproduce_sector_spectrum() {
        let b = enumerate_sector(8, 0).unwrap();
        let pb = build_parity_basis(&b);
        let h = build_hamiltonian(&b, 1.0, 0.4);
        let mut joined = sorted_eigenvalues(project_to_parity(&h, &pb, Parity::Even).unwrap());
        joined.extend(sorted_eigenvalues(
            project_to_parity(&h, &pb, Parity::Odd).unwrap(),
        ));
        joined.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_close(&joined, &sorted_eigenvalues(h.to_dense()), 1e-10);
    }

    #[test]
    fn projection_rejects_asymmetric_operator() {
        // A field on site 0 only breaks reflection symmetry.
        let b = enumerate_sector(4, 0).unwrap();
        let diag: Vec<f64> = b
            .configs()
            .iter()
            .map(|c| if c.is_up(0) { 1.0 } else { 0.0 })
            .collect();
        let op = SparseSymmetricOperator::from_upper(b.dim(), diag, vec![]);
        let err = project_to_parity(&op, &build_parity_basis(&b), Parity::Even).unwrap_err();
        assert!(matches!(err, Error::Symmetry(_)));
    }

    #[test]
    fn operator_cache_reuses_entries() {
        let cache = OperatorCache::new();
        let b = enumerate_sector(6, 0).unwrap();
        let a = cache.hamiltonian(&b, 1.0, 0.5);
        let c = cache.hamiltonian(&b, 1.0, 0.5);
        assert!(Arc::ptr_eq(&a, &c));
        cache.hamiltonian(&b, 1.0, 0.0);
        assert_eq!(cache.len(), 2);
    }
}
