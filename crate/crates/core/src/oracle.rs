//! Brute-force reference computations in the full `2^N` Hilbert space.
//!
//! Nothing here uses the sector bases, the bit-level exchange action, or the
//! adapted subsystem basis: spin operators are Kronecker products of 2x2
//! matrices, `Π_{S_A}` is a Lagrange polynomial in `S_A²`, partial traces are
//! explicit index sums, and trace norms come from nalgebra's own symmetric
//! eigensolver. These routines back the `verify` subcommand and the
//! equivalence tests. They are dense and exponential in `N`; keep `N ≤ 8`.
//!
//! Site `j` is bit `j` of the basis index. `S^y` is imaginary, so it is
//! carried as the real antisymmetric matrix `R` with `S^y = i R`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::sector_basis::SectorBasis;

/// `A ⊗ B` with `A` on the low `n_a` bits: `out[a + (b << n_a), ...] = A[a, a'] B[b, b']`.
pub fn kron_a_b(a: &DMatrix<f64>, b: &DMatrix<f64>, n_a: usize) -> DMatrix<f64> {
    assert_eq!(a.nrows(), 1 << n_a);
    let (da, db) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(da * db, da * db);
    for bi in 0..db {
        for bj in 0..db {
            let w = b[(bi, bj)];
            if w == 0.0 {
                continue;
            }
            for ai in 0..da {
                for aj in 0..da {
                    out[(ai + (bi << n_a), aj + (bj << n_a))] = a[(ai, aj)] * w;
                }
            }
        }
    }
    out
}

/// Single-site spin matrices `(S^x, R, S^z)` in the basis `{↓, ↑}`.
fn single_site() -> [DMatrix<f64>; 3] {
    [
        DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
        // In the basis (↓, ↑), S^y = [[0, i/2], [-i/2, 0]] = i·R.
        DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
    ]
}

/// Operator `op` on `site` of an `n`-site chain.
pub fn site_operator(n: usize, site: usize, op: &DMatrix<f64>) -> DMatrix<f64> {
    let left = DMatrix::<f64>::identity(1 << site, 1 << site);
    let right = DMatrix::<f64>::identity(1 << (n - site - 1), 1 << (n - site - 1));
    let inner = kron_a_b(&left, op, site);
    kron_a_b(&inner, &right, site + 1)
}

/// `(S^x, R, S^z)` summed over the sites in `sites`, embedded in `n` sites.
fn spin_sum(n: usize, sites: std::ops::Range<usize>) -> [DMatrix<f64>; 3] {
    let ops = single_site();
    let dim = 1 << n;
    let mut out = [
        DMatrix::zeros(dim, dim),
        DMatrix::zeros(dim, dim),
        DMatrix::zeros(dim, dim),
    ];
    for site in sites {
        for (acc, op) in out.iter_mut().zip(&ops) {
            *acc += site_operator(n, site, op);
        }
    }
    out
}

/// Total spin components `(S^x, R, S^z)` on `n` sites.
pub fn total_spin_components(n: usize) -> [DMatrix<f64>; 3] {
    spin_sum(n, 0..n)
}

/// `S_i · S_j` from the components; `S^y S^y = -R R`.
fn dot(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let ops = single_site();
    let si: Vec<DMatrix<f64>> = ops.iter().map(|o| site_operator(n, i, o)).collect();
    let sj: Vec<DMatrix<f64>> = ops.iter().map(|o| site_operator(n, j, o)).collect();
    &si[0] * &sj[0] - &si[1] * &sj[1] + &si[2] * &sj[2]
}

/// Open-chain J1-J2 Hamiltonian on the full space.
pub fn hamiltonian(n: usize, j1: f64, j2: f64) -> DMatrix<f64> {
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..n.saturating_sub(1) {
        h += dot(n, i, i + 1) * j1;
    }
    for i in 0..n.saturating_sub(2) {
        h += dot(n, i, i + 2) * j2;
    }
    h
}

/// Squared spin of the sites `0..n_sub` on an `n_sub`-site space.
pub fn spin_squared(n_sub: usize) -> DMatrix<f64> {
    let [x, r, z] = spin_sum(n_sub, 0..n_sub);
    &x * &x - &r * &r + &z * &z
}

/// `Π_{S_A}` on the `2^{n_a}` space from Lagrange interpolation in `S_A²`.
pub fn subsystem_projector(n_a: usize, two_s_a: i32) -> DMatrix<f64> {
    let s2 = spin_squared(n_a);
    let dim = 1 << n_a;
    let casimir = |t: i32| {
        let s = t as f64 / 2.0;
        s * (s + 1.0)
    };
    let target = casimir(two_s_a);
    let mut p = DMatrix::<f64>::identity(dim, dim);
    for other in ((n_a % 2) as i32..=n_a as i32).step_by(2) {
        if other == two_s_a {
            continue;
        }
        let c = casimir(other);
        p = (&p * (&s2 - DMatrix::<f64>::identity(dim, dim) * c)) / (target - c);
    }
    p
}

/// Sector amplitudes embedded in the full `2^N` space.
pub fn embed(basis: &SectorBasis, psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << basis.n_sites()];
    for (c, &a) in basis.configs().iter().zip(psi) {
        out[c.0 as usize] = a;
    }
    out
}

/// `Tr_B |ψ⟩⟨ψ|` for a full-space vector, `A` = low `n_a` bits.
pub fn partial_trace(psi: &[f64], n: usize, n_a: usize) -> DMatrix<f64> {
    let da = 1usize << n_a;
    let db = 1usize << (n - n_a);
    let mut rho = DMatrix::zeros(da, da);
    for b in 0..db {
        for a in 0..da {
            let x = psi[a + (b << n_a)];
            if x == 0.0 {
                continue;
            }
            for a2 in 0..da {
                rho[(a, a2)] += x * psi[a2 + (b << n_a)];
            }
        }
    }
    rho
}

pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .sum()
}

/// Full-space counterparts of the resolved reduced density matrix.
#[derive(Debug, Clone)]
pub struct OracleResolved {
    pub rho_a: DMatrix<f64>,
    /// `⟨ψ| Π_{S_A} ⊗ 1 |ψ⟩`.
    pub probabilities: BTreeMap<i32, f64>,
    /// `Tr_B[Π ρ Π] = Π ρ_A Π`.
    pub pinched: BTreeMap<i32, DMatrix<f64>>,
    pub leakage: f64,
}

/// Resolve a full-space state with explicit projectors.
pub fn resolve(psi_full: &[f64], n: usize, n_a: usize) -> OracleResolved {
    let rho_a = partial_trace(psi_full, n, n_a);
    let id_b = DMatrix::<f64>::identity(1 << (n - n_a), 1 << (n - n_a));
    let psi = nalgebra::DVector::from_column_slice(psi_full);
    let mut probabilities = BTreeMap::new();
    let mut pinched = BTreeMap::new();
    let mut kept = DMatrix::zeros(rho_a.nrows(), rho_a.ncols());
    for two_s_a in ((n_a % 2) as i32..=n_a as i32).step_by(2) {
        let pi_a = subsystem_projector(n_a, two_s_a);
        let pi = kron_a_b(&pi_a, &id_b, n_a);
        probabilities.insert(two_s_a, psi.dot(&(&pi * &psi)));
        let block = &pi_a * &rho_a * &pi_a;
        kept += &block;
        pinched.insert(two_s_a, block);
    }
    let leakage = 0.5 * trace_norm(&(&rho_a - kept));
    OracleResolved {
        rho_a,
        probabilities,
        pinched,
        leakage,
    }
}

/// Distances for the ordered pair `(alpha, alpha1)`.
#[derive(Debug, Clone)]
pub struct OraclePair {
    pub d_full: f64,
    pub d_sector: BTreeMap<i32, f64>,
    pub d_prob: f64,
    pub d_conf: f64,
}

pub fn pair(alpha: &OracleResolved, alpha1: &OracleResolved, p_floor: f64) -> OraclePair {
    let d_full = 0.5 * trace_norm(&(&alpha1.rho_a - &alpha.rho_a));
    let mut d_sector = BTreeMap::new();
    let mut d_prob = 0.0;
    let mut d_conf = 0.0;
    for (&k, b0) in &alpha.pinched {
        let b1 = &alpha1.pinched[&k];
        d_sector.insert(k, 0.5 * trace_norm(&(b1 - b0)));
        let (p0, p1) = (alpha.probabilities[&k], alpha1.probabilities[&k]);
        d_prob += 0.5 * (p1 - p0).abs();
        if p0 > p_floor && p1 > p_floor {
            d_conf += 0.5 * p1 * trace_norm(&(b1 / p1 - b0 / p0));
        }
    }
    OraclePair {
        d_full,
        d_sector,
        d_prob,
        d_conf,
    }
}
