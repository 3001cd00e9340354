//! Full dense diagonalization of sector Hamiltonians and total-spin labeling.

use faer::dyn_stack::{GlobalPodBuffer, PodStack};
use faer::linalg::evd::{compute_hermitian_evd, compute_hermitian_evd_req, ComputeVectors};
use faer::Parallelism;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice_operators::{
    build_hamiltonian, build_total_spin_squared, project_to_parity, SparseSymmetricOperator,
};
use crate::micro_stats::{select_window, Grouping, WindowSpec};
use crate::sector_basis::{build_parity_basis, enumerate_sector, OrbitColumn, Parity, ParityBasis};

pub const DEFAULT_DIM_LIMIT: usize = 16_000;
pub const DEFAULT_S2_TOLERANCE: f64 = 1e-6;
/// Degenerate clusters are energy runs with gaps below this fraction of the
/// spectral width.
pub const DEFAULT_CLUSTER_GAP: f64 = 1e-10;
/// Relative energy gap below which states of different spin are separated
/// explicitly; a dense solve mixes them at order `ε‖H‖/δ`.
pub const DEFAULT_MIXING_GAP: f64 = 1e-4;

/// Relative asymmetry accepted by [`full_symmetric_eig`].
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Eigenpairs of a real symmetric matrix; `vectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Largest `|m_ij - m_ji|` relative to `max(1, max|m_ij|)`.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / m.amax().max(1.0)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Argument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite entry in {}x{} symmetric matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = relative_asymmetry(m);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Argument(format!(
            "matrix is not symmetric (relative deviation {asym:e})"
        )));
    }
    Ok(())
}

/// Flip `v` so that its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// All eigenpairs of a symmetric matrix, eigenvalues ascending, with the
/// deterministic sign convention of [`fix_sign`].
pub fn full_symmetric_eig(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let a = faer::mat::from_column_major_slice::<f64>(m.as_slice(), n, n);
    let mut s = faer::Col::<f64>::zeros(n);
    let mut u = faer::Mat::<f64>::zeros(n, n);
    let req = compute_hermitian_evd_req::<f64>(
        n,
        ComputeVectors::Yes,
        Parallelism::None,
        Default::default(),
    )
    .map_err(|_| Error::Numerical(format!("workspace overflow for {n}x{n} eigensolve")))?;
    let mut mem = GlobalPodBuffer::new(req);
    compute_hermitian_evd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        Parallelism::None,
        PodStack::new(&mut mem),
        Default::default(),
    );

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]).then(i.cmp(&j)));
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        if !s[i].is_finite() {
            return Err(Error::Numerical(format!(
                "eigensolver did not converge on {n}x{n} matrix"
            )));
        }
        values.push(s[i]);
        for (r, c) in col.iter_mut().enumerate() {
            *c = u[(r, i)];
        }
        fix_sign(&mut col);
        vectors.column_mut(k).copy_from_slice(&col);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = faer::mat::from_column_major_slice::<f64>(m.as_slice(), n, n);
    let mut s = faer::Col::<f64>::zeros(n);
    let req = compute_hermitian_evd_req::<f64>(
        n,
        ComputeVectors::No,
        Parallelism::None,
        Default::default(),
    )
    .map_err(|_| Error::Numerical(format!("workspace overflow for {n}x{n} eigensolve")))?;
    let mut mem = GlobalPodBuffer::new(req);
    compute_hermitian_evd(
        a,
        s.as_mut(),
        None,
        Parallelism::None,
        PodStack::new(&mut mem),
        Default::default(),
    );
    let mut values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "eigensolver did not converge on {n}x{n} matrix"
        )));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Anything that can apply a real symmetric operator to a vector.
pub trait SymmetricAction: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

impl SymmetricAction for SparseSymmetricOperator {
    fn dim(&self) -> usize {
        SparseSymmetricOperator::dim(self)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        SparseSymmetricOperator::apply(self, v)
    }
}

impl SymmetricAction for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }
}

/// A sector operator seen through the columns of one parity block.
pub struct ParityRestricted<'a> {
    op: &'a SparseSymmetricOperator,
    columns: &'a [OrbitColumn],
    parent_dim: usize,
}

impl<'a> ParityRestricted<'a> {
    pub fn new(op: &'a SparseSymmetricOperator, pb: &'a ParityBasis, parity: Parity) -> Self {
        Self {
            op,
            columns: pb.columns(parity),
            parent_dim: pb.parent().dim(),
        }
    }
}

impl SymmetricAction for ParityRestricted<'_> {
    fn dim(&self) -> usize {
        self.columns.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.parent_dim];
        for (col, &c) in self.columns.iter().zip(v) {
            for (i, w) in col.iter() {
                full[i] += w * c;
            }
        }
        let image = self.op.apply(&full);
        self.columns
            .iter()
            .map(|col| col.iter().map(|(i, w)| w * image[i]).sum())
            .collect()
    }
}

/// Quantum-number constraints for total-spin labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinLabelContext {
    pub n_sites: usize,
    pub two_m: i32,
}

impl SpinLabelContext {
    /// Nearest admissible `2S` for an `S²` expectation value.
    pub fn nearest_two_s(&self, s2: f64) -> i32 {
        let raw = -1.0 + (1.0 + 4.0 * s2.max(0.0)).sqrt();
        let lo = self.two_m.abs();
        let hi = self.n_sites as i32;
        let mut best = lo;
        let mut k = lo;
        while k <= hi {
            if (k as f64 - raw).abs() < (best as f64 - raw).abs() {
                best = k;
            }
            k += 2;
        }
        best
    }
}

/// `s(s+1)` for a doubled spin.
pub fn casimir(two_s: i32) -> f64 {
    let s = two_s as f64 / 2.0;
    s * (s + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelOptions {
    pub s2_tolerance: f64,
    /// Cluster gap as a fraction of the spectral width.
    pub cluster_gap: f64,
    /// Spin-separation gap as a fraction of the spectral width.
    pub mixing_gap: f64,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self {
            s2_tolerance: DEFAULT_S2_TOLERANCE,
            cluster_gap: DEFAULT_CLUSTER_GAP,
            mixing_gap: DEFAULT_MIXING_GAP,
        }
    }
}

fn label_columns(
    vectors: &DMatrix<f64>,
    s2: &dyn SymmetricAction,
    ctx: SpinLabelContext,
    cols: impl Iterator<Item = usize>,
    two_s: &mut [i32],
    residuals: &mut [f64],
) {
    for k in cols {
        let v = vectors.column(k);
        let image = s2.apply(v.as_slice());
        let expect: f64 = image.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let label = ctx.nearest_two_s(expect);
        two_s[k] = label;
        residuals[k] = (expect - casimir(label)).abs();
    }
}

/// Energy runs (indices into ascending `energies`) whose consecutive gaps
/// stay below `gap`.
pub fn degenerate_clusters(energies: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=energies.len() {
        if i == energies.len() || energies[i] - energies[i - 1] >= gap {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Assign `2S` labels to orthonormal eigenvectors (columns of `vectors`).
///
/// States whose `S²` residual exceeds the tolerance are repaired by
/// diagonalizing `S²` inside their near-degenerate energy cluster; the
/// rotated vectors replace the originals in `vectors`. If the default cluster
/// gap is too tight the gap is widened by two decades at a time, up to
/// `1e4` times the configured value.
pub fn assign_spin_labels(
    vectors: &mut DMatrix<f64>,
    energies: &[f64],
    s2: &dyn SymmetricAction,
    ctx: SpinLabelContext,
    opts: LabelOptions,
) -> Result<(Vec<i32>, Vec<f64>)> {
    let n = vectors.ncols();
    assert_eq!(energies.len(), n);
    let mut two_s = vec![0; n];
    let mut residuals = vec![0.0; n];
    label_columns(vectors, s2, ctx, 0..n, &mut two_s, &mut residuals);

    let width = match (energies.first(), energies.last()) {
        (Some(lo), Some(hi)) => (hi - lo).max(f64::MIN_POSITIVE),
        _ => return Ok((two_s, residuals)),
    };
    for widen in [1.0, 1e2, 1e4] {
        if residuals.iter().all(|&r| r <= opts.s2_tolerance) {
            break;
        }
        let gap = opts.cluster_gap * widen * width;
        for range in degenerate_clusters(energies, gap) {
            if range.len() < 2 || range.clone().all(|k| residuals[k] <= opts.s2_tolerance) {
                continue;
            }
            rotate_cluster(vectors, s2, range.clone())?;
            label_columns(vectors, s2, ctx, range, &mut two_s, &mut residuals);
        }
    }
    let bad: Vec<String> = residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > opts.s2_tolerance)
        .map(|(k, r)| format!("#{k} (E={}, residual {r:e})", energies[k]))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Labeling(format!(
            "S² residual above {:e} for states {}",
            opts.s2_tolerance,
            bad.join(", ")
        )));
    }
    Ok((two_s, residuals))
}

/// `Bᵀ A B` for the columns `B` of `block`, symmetrized.
fn project(block: &DMatrix<f64>, op: &dyn SymmetricAction) -> DMatrix<f64> {
    let k = block.ncols();
    let mut image = DMatrix::zeros(block.nrows(), k);
    for c in 0..k {
        image
            .column_mut(c)
            .copy_from_slice(&op.apply(block.column(c).as_slice()));
    }
    let projected = block.transpose() * image;
    (&projected + projected.transpose()) * 0.5
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
        fix_sign(col.as_mut_slice());
    }
}

fn rotate_cluster(
    vectors: &mut DMatrix<f64>,
    s2: &dyn SymmetricAction,
    range: std::ops::Range<usize>,
) -> Result<()> {
    let k = range.len();
    let block = vectors.columns(range.start, k).into_owned();
    let eig = full_symmetric_eig(&project(&block, s2))?;
    let mut rotated = block * eig.vectors;
    normalize_columns(&mut rotated);
    vectors.columns_mut(range.start, k).copy_from(&rotated);
    Ok(())
}

/// Inside every near-degenerate cluster (relative gap `mixing_gap`) that
/// holds more than one spin label, diagonalize `S²` and then `H` within each
/// spin subspace, so every column has a single spin to working precision.
/// Energies are replaced by the Ritz values; `energies` stays ascending.
pub fn separate_spin_mixing(
    vectors: &mut DMatrix<f64>,
    energies: &mut [f64],
    two_s: &mut [i32],
    residuals: &mut [f64],
    h: &dyn SymmetricAction,
    s2: &dyn SymmetricAction,
    ctx: SpinLabelContext,
    mixing_gap: f64,
) -> Result<usize> {
    let width = match (energies.first(), energies.last()) {
        (Some(lo), Some(hi)) => (hi - lo).max(f64::MIN_POSITIVE),
        _ => return Ok(0),
    };
    let mut treated = 0;
    for range in degenerate_clusters(energies, mixing_gap * width) {
        if range.clone().all(|k| two_s[k] == two_s[range.start]) {
            continue;
        }
        let k = range.len();
        let block = vectors.columns(range.start, k).into_owned();
        let spin = full_symmetric_eig(&project(&block, s2))?;
        let spin_basis = &block * &spin.vectors;
        let labels: Vec<i32> = spin.values.iter().map(|&v| ctx.nearest_two_s(v)).collect();
        let mut distinct = labels.clone();
        distinct.dedup();
        let mut out: Vec<(f64, i32, DVector<f64>)> = Vec::with_capacity(k);
        for label in distinct {
            let cols: Vec<usize> = (0..k).filter(|&c| labels[c] == label).collect();
            let sub = spin_basis.select_columns(&cols);
            let eig = full_symmetric_eig(&project(&sub, h))?;
            let mut rotated = sub * eig.vectors;
            normalize_columns(&mut rotated);
            for (j, col) in rotated.column_iter().enumerate() {
                out.push((eig.values[j], label, col.into_owned()));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (j, (e, label, v)) in out.into_iter().enumerate() {
            energies[range.start + j] = e;
            two_s[range.start + j] = label;
            vectors.set_column(range.start + j, &v);
        }
        label_columns(vectors, s2, ctx, range, two_s, residuals);
        treated += 1;
    }
    Ok(treated)
}

/// One labeled eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenState {
    pub energy: f64,
    pub two_s: i32,
    pub parity: Option<Parity>,
    /// Amplitudes over the sector configurations, when retained.
    pub vector: Option<Vec<f64>>,
    pub s2_residual: f64,
}

/// Which eigenvectors survive the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retention {
    All,
    /// Only states inside the window of their group.
    Window(WindowSpec, Grouping),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub dim_limit: usize,
    pub labels: LabelOptions,
    pub retention: Retention,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dim_limit: DEFAULT_DIM_LIMIT,
            labels: LabelOptions::default(),
            retention: Retention::Window(WindowSpec::default(), Grouping::SpinParity),
        }
    }
}

/// A set of states sharing `(two_s, parity)`, in ascending energy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGroup {
    pub two_s: i32,
    pub parity: Option<Parity>,
    pub indices: Vec<usize>,
}

/// Labeled spectrum of one `(N, two_m)` sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpectrum {
    pub n_sites: usize,
    pub two_m: i32,
    pub j1: f64,
    pub j2: f64,
    pub parity_resolved: bool,
    /// Ordered by parity (even first), then `two_s`, then energy.
    pub states: Vec<EigenState>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn max_s2_residual(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.s2_residual)
            .fold(0.0, f64::max)
    }

    /// Groups of states by `(two_s, parity)` or by `two_s` alone. With
    /// [`Grouping::Spin`] the two parity blocks are interleaved by energy.
    pub fn groups(&self, grouping: Grouping) -> Vec<StateGroup> {
        let key = |s: &EigenState| match grouping {
            Grouping::SpinParity => (s.parity, s.two_s),
            Grouping::Spin => (None, s.two_s),
        };
        let mut keys: Vec<(Option<Parity>, i32)> = self.states.iter().map(key).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(parity, two_s)| {
                let mut indices: Vec<usize> = (0..self.states.len())
                    .filter(|&i| key(&self.states[i]) == (parity, two_s))
                    .collect();
                indices.sort_by(|&a, &b| {
                    self.states[a]
                        .energy
                        .total_cmp(&self.states[b].energy)
                        .then(a.cmp(&b))
                });
                StateGroup {
                    two_s,
                    parity,
                    indices,
                }
            })
            .collect()
    }

    /// All energies in one ascending list.
    pub fn energies_sorted(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.states.iter().map(|s| s.energy).collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

struct BlockSolution {
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    two_s: Vec<i32>,
    residuals: Vec<f64>,
}

fn solve_block(
    h: &DMatrix<f64>,
    s2: &dyn SymmetricAction,
    ctx: SpinLabelContext,
    opts: LabelOptions,
) -> Result<BlockSolution> {
    let eig = full_symmetric_eig(h)?;
    let mut vectors = eig.vectors;
    let mut energies = eig.values;
    let (mut two_s, mut residuals) = assign_spin_labels(&mut vectors, &energies, s2, ctx, opts)?;
    separate_spin_mixing(
        &mut vectors,
        &mut energies,
        &mut two_s,
        &mut residuals,
        h,
        s2,
        ctx,
        opts.mixing_gap,
    )?;
    Ok(BlockSolution {
        energies,
        vectors,
        two_s,
        residuals,
    })
}

/// `|⟨v|S²|v⟩ - S(S+1)|` for a normalized vector over the sector configurations.
pub fn config_space_residual(s2: &SparseSymmetricOperator, v: &[f64], two_s: i32) -> f64 {
    (s2.expectation(v) - casimir(two_s)).abs()
}

/// Diagonalize the `(N, two_m)` sector of the open J1-J2 chain.
pub fn solve_sector(
    n_sites: usize,
    two_m: i32,
    j1: f64,
    j2: f64,
    parity_resolved: bool,
    opts: &SolveOptions,
) -> Result<SectorSpectrum> {
    let basis = enumerate_sector(n_sites, two_m)?;
    if basis.dim() > opts.dim_limit {
        return Err(Error::Capacity(format!(
            "sector N={n_sites} two_m={two_m} has dimension {} above the limit {}; \
             raise the limit or reuse a cached spectrum",
            basis.dim(),
            opts.dim_limit
        )));
    }
    let h = build_hamiltonian(&basis, j1, j2);
    let s2 = build_total_spin_squared(&basis);
    let ctx = SpinLabelContext { n_sites, two_m };

    let mut states = Vec::with_capacity(basis.dim());
    if parity_resolved {
        let pb = build_parity_basis(&basis);
        for parity in [Parity::Even, Parity::Odd] {
            if pb.dim(parity) == 0 {
                continue;
            }
            let block = project_to_parity(&h, &pb, parity)?;
            let restricted = ParityRestricted::new(&s2, &pb, parity);
            let sol = solve_block(&block, &restricted, ctx, opts.labels)?;
            push_states(&mut states, sol, Some(parity), |c| pb.expand(parity, c));
        }
    } else {
        let sol = solve_block(&h.to_dense(), &s2, ctx, opts.labels)?;
        push_states(&mut states, sol, None, |c| c.to_vec());
    }
    states.sort_by(|a, b| {
        (a.parity, a.two_s)
            .cmp(&(b.parity, b.two_s))
            .then(a.energy.total_cmp(&b.energy))
    });
    // Residuals are re-measured on the stored amplitudes so that a spectrum
    // reloaded from disk reports identical values.
    for state in &mut states {
        if let Some(v) = &state.vector {
            state.s2_residual = config_space_residual(&s2, v, state.two_s);
        }
    }
    let mut spectrum = SectorSpectrum {
        n_sites,
        two_m,
        j1,
        j2,
        parity_resolved,
        states,
    };
    if let Retention::Window(spec, grouping) = opts.retention {
        let mut keep = vec![false; spectrum.dim()];
        for g in spectrum.groups(grouping) {
            if let Ok(range) = select_window(g.indices.len(), spec) {
                for &i in &g.indices[range] {
                    keep[i] = true;
                }
            }
        }
        for (state, keep) in spectrum.states.iter_mut().zip(keep) {
            if !keep {
                state.vector = None;
            }
        }
    }
    Ok(spectrum)
}

fn push_states(
    states: &mut Vec<EigenState>,
    sol: BlockSolution,
    parity: Option<Parity>,
    expand: impl Fn(&[f64]) -> Vec<f64>,
) {
    for k in 0..sol.energies.len() {
        states.push(EigenState {
            energy: sol.energies[k],
            two_s: sol.two_s[k],
            parity,
            vector: Some(expand(sol.vectors.column(k).as_slice())),
            s2_residual: sol.residuals[k],
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kept() -> SolveOptions {
        SolveOptions {
            retention: Retention::All,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let eig = full_symmetric_eig(&m).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15 && (eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_gives_canonical_axes() {
        let eig = full_symmetric_eig(&DMatrix::identity(5, 5)).unwrap();
        assert!(eig.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let mut cols: Vec<usize> = (0..5)
            .map(|k| {
                let c = eig.vectors.column(k);
                assert!(c.iter().all(|&x| x == 0.0 || x == 1.0));
                c.iter().position(|&x| x == 1.0).unwrap()
            })
            .collect();
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(full_symmetric_eig(&m), Err(Error::Argument(_))));
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(full_symmetric_eig(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn residuals_orthonormality_and_signs() {
        let n = 60;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            ((a * 1.3 + b * 0.7).sin() + if i == j { a * 0.1 } else { 0.0 }) * 2.0
        });
        let eig = full_symmetric_eig(&m).unwrap();
        let norm = m.norm();
        for k in 0..n {
            let v = eig.vectors.column(k);
            assert!((&m * v - v * eig.values[k]).norm() <= 1e-10 * norm);
            let imax = v.iamax();
            assert!(v[imax] > 0.0);
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let gram = eig.vectors.transpose() * &eig.vectors;
        assert!((gram - DMatrix::identity(n, n)).amax() < 1e-10);
    }

    #[test]
    fn near_degenerate_spins_are_separated() {
        let sp = solve_sector(3, 1, 1.0, 0.0, false, &all_kept()).unwrap();
        let basis = enumerate_sector(3, 1).unwrap();
        let s2 = build_total_spin_squared(&basis);
        let exact: Vec<DVector<f64>> = sp
            .states
            .iter()
            .map(|s| DVector::from_vec(s.vector.clone().unwrap()))
            .collect();
        let (low, doublet, quartet) = (&exact[0], &exact[1], &exact[2]);
        assert_eq!((sp.states[1].two_s, sp.states[2].two_s), (1, 3));
        // Doublet and quartet 1e-6 apart, mixed at angle 1e-3.
        let (e_q, e_d) = (0.5, 0.5 + 1e-6);
        let h = low * low.transpose() * -1.0
            + doublet * doublet.transpose() * e_d
            + quartet * quartet.transpose() * e_q;
        let (c, s) = (1e-3f64.cos(), 1e-3f64.sin());
        let mut vectors = DMatrix::zeros(3, 3);
        vectors.set_column(0, low);
        vectors.set_column(1, &(quartet * c + doublet * s));
        vectors.set_column(2, &(doublet * c - quartet * s));
        let mut energies: Vec<f64> = (0..3)
            .map(|k| {
                h.apply(vectors.column(k).as_slice())
                    .iter()
                    .zip(vectors.column(k).iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let mut two_s = vec![1, 3, 1];
        let mut residuals = vec![0.0; 3];
        let ctx = SpinLabelContext {
            n_sites: 3,
            two_m: 1,
        };
        let treated = separate_spin_mixing(
            &mut vectors,
            &mut energies,
            &mut two_s,
            &mut residuals,
            &h,
            &s2,
            ctx,
            1e-4,
        )
        .unwrap();
        assert_eq!(treated, 1);
        assert_eq!(two_s, vec![1, 3, 1]);
        assert!(residuals.iter().all(|&r| r < 1e-14));
        assert!((vectors.column(1).dot(quartet).abs() - 1.0).abs() < 1e-14);
        assert!((vectors.column(2).dot(doublet).abs() - 1.0).abs() < 1e-14);
        assert!((energies[1] - e_q).abs() < 1e-15 && (energies[2] - e_d).abs() < 1e-15);
    }

    #[test]
    fn three_site_sector() {
        let b = enumerate_sector(3, 1).unwrap();
        let eig = full_symmetric_eig(&build_hamiltonian(&b, 1.0, 0.0).to_dense()).unwrap();
        for (g, w) in eig.values.iter().zip([-1.0, 0.0, 0.5]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_two_and_three_sites() {
        let sp = solve_sector(2, 0, 1.0, 0.0, false, &all_kept()).unwrap();
        let got: Vec<(f64, i32)> = sp.states.iter().map(|s| (s.energy, s.two_s)).collect();
        assert_eq!(got.len(), 2);
        assert!((got[0].0 + 0.75).abs() < 1e-12 && got[0].1 == 0);
        assert!((got[1].0 - 0.25).abs() < 1e-12 && got[1].1 == 2);

        let sp = solve_sector(3, 1, 1.0, 0.0, false, &all_kept()).unwrap();
        let mut got: Vec<(f64, i32)> = sp.states.iter().map(|s| (s.energy, s.two_s)).collect();
        got.sort_by(|a, b| a.0.total_cmp(&b.0));
        for ((e, s), (we, ws)) in got.iter().zip([(-1.0, 1), (0.0, 1), (0.5, 3)]) {
            assert!((e - we).abs() < 1e-12);
            assert_eq!(*s, ws);
        }
    }

    #[test]
    fn lieb_mattis_ground_state() {
        for parity in [false, true] {
            let sp = solve_sector(4, 0, 1.0, 0.0, parity, &all_kept()).unwrap();
            let ground = sp
                .states
                .iter()
                .min_by(|a, b| a.energy.total_cmp(&b.energy))
                .unwrap();
            assert_eq!(ground.two_s, 0);
        }
    }

    #[test]
    fn singlet_and_triplet_labels() {
        let ctx = SpinLabelContext {
            n_sites: 2,
            two_m: 0,
        };
        let b = enumerate_sector(2, 0).unwrap();
        let s2 = build_total_spin_squared(&b);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DMatrix::from_row_slice(2, 2, &[r, r, -r, r]);
        let (labels, res) =
            assign_spin_labels(&mut v, &[-0.75, 0.25], &s2, ctx, LabelOptions::default()).unwrap();
        assert_eq!(labels, vec![0, 2]);
        assert!(res.iter().all(|&x| x <= 1e-12));
    }

    #[test]
    fn repairs_mixed_degenerate_states() {
        // In N=3, 2M=1 the two lowest states are S=1/2 and the third is S=3/2.
        // Mix one S=1/2 vector with the S=3/2 vector and pretend they are degenerate.
        let b = enumerate_sector(3, 1).unwrap();
        let eig = full_symmetric_eig(&build_hamiltonian(&b, 1.0, 0.0).to_dense()).unwrap();
        let s2 = build_total_spin_squared(&b);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = DMatrix::zeros(3, 3);
        v.set_column(0, &eig.vectors.column(0));
        v.set_column(1, &((eig.vectors.column(1) + eig.vectors.column(2)) * r));
        v.set_column(2, &((eig.vectors.column(1) - eig.vectors.column(2)) * r));
        let energies = [-1.0, 0.0, 0.0];
        let ctx = SpinLabelContext {
            n_sites: 3,
            two_m: 1,
        };
        let (labels, res) =
            assign_spin_labels(&mut v, &energies, &s2, ctx, LabelOptions::default()).unwrap();
        let mut tail = labels[1..].to_vec();
        tail.sort();
        assert_eq!(labels[0], 1);
        assert_eq!(tail, vec![1, 3]);
        assert!(res.iter().all(|&x| x <= 1e-12));
        let gram = v.transpose() * &v;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);

        // Without a cluster the same input cannot be repaired.
        let mut v2 = DMatrix::zeros(3, 3);
        v2.set_column(0, &eig.vectors.column(0));
        v2.set_column(1, &((eig.vectors.column(1) + eig.vectors.column(2)) * r));
        v2.set_column(2, &((eig.vectors.column(1) - eig.vectors.column(2)) * r));
        let err = assign_spin_labels(
            &mut v2,
            &[-1.0, 0.0, 0.5],
            &s2,
            ctx,
            LabelOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Labeling(_)));
    }

    #[test]
    fn capacity_limit() {
        let opts = SolveOptions {
            dim_limit: 10,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_sector(6, 0, 1.0, 0.5, true, &opts),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn parity_blocks_match_unresolved_spectrum() {
        for n in [6, 8, 10] {
            let a = solve_sector(n, 0, 1.0, 0.4, true, &all_kept()).unwrap();
            let b = solve_sector(n, 0, 1.0, 0.4, false, &all_kept()).unwrap();
            for (x, y) in a.energies_sorted().iter().zip(b.energies_sorted()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn state_invariants() {
        let sp = solve_sector(8, 0, 1.0, 0.0, true, &all_kept()).unwrap();
        for g in sp.groups(Grouping::SpinParity) {
            let e: Vec<f64> = g.indices.iter().map(|&i| sp.states[i].energy).collect();
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
        }
        for s in &sp.states {
            let v = s.vector.as_ref().unwrap();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(s.s2_residual <= 1e-6);
        }
        let k = sp.states.len();
        let mut gram_dev = 0.0f64;
        for a in 0..k {
            for b in a + 1..k {
                let va = sp.states[a].vector.as_ref().unwrap();
                let vb = sp.states[b].vector.as_ref().unwrap();
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                gram_dev = gram_dev.max(dot.abs());
            }
        }
        assert!(gram_dev < 1e-10);
    }

    #[test]
    fn window_retention_drops_outside_vectors() {
        let sp = solve_sector(10, 0, 1.0, 0.5, true, &SolveOptions::default()).unwrap();
        let kept = sp.states.iter().filter(|s| s.vector.is_some()).count();
        assert!(kept > 0 && kept < sp.dim());
        for g in sp.groups(Grouping::SpinParity) {
            if let Ok(range) = select_window(g.indices.len(), WindowSpec::default()) {
                for (pos, &i) in g.indices.iter().enumerate() {
                    assert_eq!(sp.states[i].vector.is_some(), range.contains(&pos));
                }
            }
        }
    }
}
