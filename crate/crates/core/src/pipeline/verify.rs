//! Self-checks against the brute-force oracle and the exact inequalities.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::distances::{pair_distances, PAIR_TOLERANCE};
use crate::error::{Error, Result};
use crate::micro_stats::{
    select_window, window_statistics, GroupId, Grouping, SectorCount, WindowSpec, WINDOW_TOLERANCE,
};
use crate::oracle;
use crate::sector_basis::enumerate_sector;
use crate::spectral::{casimir, solve_sector, Retention, SolveOptions};
use crate::su2_resolution::{
    m_independence_check, projector_invariance_check, resolve_state, spin_adapted_basis,
    SpinAdaptedBasisA, SymmetryResolvedRDM, P_FLOOR,
};

/// Largest chain accepted by [`run_verify`].
pub const MAX_VERIFY_N: usize = 8;
/// Largest chain compared against the full-space oracle.
pub const ORACLE_MAX_N: usize = 6;
/// Couplings exercised by the suites.
pub const VERIFY_J2: [f64; 2] = [0.0, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst deviation found; compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {:.3e} (threshold {:.1e}){}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!(" {}", c.detail)
                }
            )?;
        }
        Ok(())
    }
}

/// Running maximum that remembers where it was attained.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn see(&mut self, value: f64, at: impl FnOnce() -> String) {
        if value > self.value || value.is_nan() {
            self.value = if value.is_nan() { f64::INFINITY } else { value };
            self.at = at();
        }
    }

    fn check(self, name: &str, threshold: f64) -> CheckResult {
        let detail = if self.at.is_empty() {
            String::new()
        } else {
            format!("worst at {}", self.at)
        };
        CheckResult::new(name, self.value, threshold, detail)
    }
}

/// `max |[Π_{S_A} ⊗ 1, S^c_tot]|` over `N ≤ max_n` and every `n_a ≤ N`.
pub fn projector_invariance_suite(max_n: usize) -> Result<CheckResult> {
    let mut worst = Worst::default();
    for n in 1..=max_n {
        for n_a in 1..=n {
            let v = projector_invariance_check(n, n_a)?;
            worst.see(v, || format!("N={n} n_a={n_a}"));
        }
    }
    Ok(worst.check("projector commutes with total spin", 1e-12))
}

/// Resolved quantities agree across every `two_m` sector of each multiplet.
pub fn m_independence_suite(max_n: usize) -> Result<CheckResult> {
    let mut worst = Worst::default();
    let mut compared = 0;
    let mut ambiguous = 0;
    for n in 2..=max_n {
        for j2 in VERIFY_J2 {
            for n_a in 1..n {
                let r = m_independence_check(n, 1.0, j2, n_a)?;
                compared += r.compared;
                ambiguous += r.ambiguous.len();
                worst.see(r.max_discrepancy, || format!("N={n} J2={j2} n_a={n_a}"));
            }
        }
    }
    let mut c = worst.check("results independent of two_m", 1e-10);
    c.detail = format!(
        "{compared} multiplet copies compared, {ambiguous} ambiguous; {}",
        c.detail
    );
    Ok(c)
}

/// Scatter the `two_s_a` pieces back into the `2^{n_a}` configuration space.
fn dense_pinched(
    r: &SymmetryResolvedRDM,
    basis_a: &SpinAdaptedBasisA,
    two_s_a: i32,
) -> DMatrix<f64> {
    let dim = 1usize << r.n_a;
    let mut out = DMatrix::zeros(dim, dim);
    for piece in &r.sectors[&two_s_a].pieces {
        let block = basis_a.block(piece.two_m_a).expect("block exists");
        let range = block.sector_range(two_s_a).expect("sector exists");
        let u = block.columns.columns(range.start, range.len());
        let m = &u * &piece.matrix * u.transpose();
        for (i, &ci) in block.configs.iter().enumerate() {
            for (j, &cj) in block.configs.iter().enumerate() {
                out[(ci as usize, cj as usize)] += m[(i, j)];
            }
        }
    }
    out
}

/// Every sector result for `N ≤ min(max_n, 6)`, all `two_m`, both parity
/// modes and `J2 ∈ {0, 0.5}`, compared with the full-space oracle.
pub fn oracle_suite(max_n: usize) -> Result<Vec<CheckResult>> {
    let mut eig = Worst::default();
    let mut prob = Worst::default();
    let mut rho = Worst::default();
    let mut pinch = Worst::default();
    let mut leak = Worst::default();
    let mut dist = Worst::default();
    let mut states = 0usize;
    let mut pairs = 0usize;
    let all = SolveOptions {
        retention: Retention::All,
        ..SolveOptions::default()
    };
    for n in 2..=max_n.min(ORACLE_MAX_N) {
        let s2_full = oracle::spin_squared(n);
        for j2 in VERIFY_J2 {
            let h_full = oracle::hamiltonian(n, 1.0, j2);
            for two_m in (-(n as i32)..=n as i32).step_by(2) {
                let basis = enumerate_sector(n, two_m)?;
                for parity_resolved in [true, false] {
                    let sp = solve_sector(n, two_m, 1.0, j2, parity_resolved, &all)?;
                    let fulls: Vec<DVector<f64>> = sp
                        .states
                        .iter()
                        .map(|s| {
                            DVector::from_vec(oracle::embed(
                                &basis,
                                s.vector.as_ref().expect("retained"),
                            ))
                        })
                        .collect();
                    for (s, psi) in sp.states.iter().zip(&fulls) {
                        let r = (&h_full * psi - psi * s.energy).amax();
                        let q = (psi.dot(&(&s2_full * psi)) - casimir(s.two_s)).abs();
                        eig.see(r.max(q), || {
                            format!("N={n} J2={j2} two_m={two_m} E={}", s.energy)
                        });
                    }
                    states += sp.states.len();
                    for n_a in 1..n {
                        let basis_a = spin_adapted_basis(n_a)?;
                        let ours: Vec<SymmetryResolvedRDM> = sp
                            .states
                            .iter()
                            .map(|s| {
                                resolve_state(&basis, s.vector.as_ref().expect("retained"), n_a)
                            })
                            .collect::<Result<_>>()?;
                        let theirs: Vec<oracle::OracleResolved> = fulls
                            .iter()
                            .map(|psi| oracle::resolve(psi.as_slice(), n, n_a))
                            .collect();
                        let at = |k: usize| {
                            format!(
                                "N={n} J2={j2} two_m={two_m} parity={parity_resolved} n_a={n_a} E={}",
                                sp.states[k].energy
                            )
                        };
                        for (k, (o, t)) in ours.iter().zip(&theirs).enumerate() {
                            rho.see((o.raw.to_dense() - &t.rho_a).amax(), || at(k));
                            leak.see((o.leakage - t.leakage).abs(), || at(k));
                            for (&s_a, p) in &t.probabilities {
                                prob.see((o.probability(s_a) - p).abs(), || at(k));
                                let d = (dense_pinched(o, &basis_a, s_a) - &t.pinched[&s_a]).amax();
                                pinch.see(d, || at(k));
                            }
                        }
                        for g in sp.groups(Grouping::SpinParity) {
                            for w in g.indices.windows(2) {
                                let (a, b) = (w[0], w[1]);
                                let o = pair_distances(0, &ours[a], &ours[b])?;
                                let t = oracle::pair(&theirs[a], &theirs[b], P_FLOOR);
                                let mut d = (o.d_full - t.d_full)
                                    .abs()
                                    .max((o.d_prob - t.d_prob).abs())
                                    .max((o.d_conf - t.d_conf).abs());
                                for (s_a, v) in &t.d_sector {
                                    d = d.max((o.d_sector[s_a] - v).abs());
                                }
                                dist.see(d, || at(a));
                                pairs += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out = vec![
        eig.check("oracle: eigenpairs and spin labels", PAIR_TOLERANCE),
        prob.check("oracle: sector probabilities", PAIR_TOLERANCE),
        rho.check("oracle: reduced density matrices", PAIR_TOLERANCE),
        pinch.check("oracle: pinched sector blocks", PAIR_TOLERANCE),
        leak.check("oracle: leakage", PAIR_TOLERANCE),
        dist.check("oracle: pair distances", PAIR_TOLERANCE),
    ];
    out[0].detail = format!("{states} states; {}", out[0].detail);
    out[5].detail = format!("{pairs} pairs; {}", out[5].detail);
    Ok(out)
}

/// Pair and window inequalities over every consecutive pair of every group,
/// plus every default window, for `N ≤ max_n` at `two_m = N mod 2`.
pub fn inequality_suite(max_n: usize) -> Result<Vec<CheckResult>> {
    let mut pair_worst = Worst::default();
    let mut singlet = Worst::default();
    let mut sum_rule = Worst::default();
    let mut chain = Worst::default();
    let mut bound = Worst::default();
    let mut windows = 0usize;
    let all = SolveOptions {
        retention: Retention::All,
        ..SolveOptions::default()
    };
    for n in 2..=max_n {
        let two_m = (n % 2) as i32;
        let basis = enumerate_sector(n, two_m)?;
        for j2 in VERIFY_J2 {
            let sp = solve_sector(n, two_m, 1.0, j2, true, &all)?;
            for n_a in 1..n {
                let resolved: Vec<SymmetryResolvedRDM> = sp
                    .states
                    .iter()
                    .map(|s| resolve_state(&basis, s.vector.as_ref().expect("retained"), n_a))
                    .collect::<Result<_>>()?;
                for (s, r) in sp.states.iter().zip(&resolved) {
                    let at = || format!("N={n} J2={j2} n_a={n_a} E={}", s.energy);
                    sum_rule.see(r.trace_deficit.abs(), at);
                    if s.two_s == 0 {
                        singlet.see(r.leakage, at);
                    }
                }
                for g in sp.groups(Grouping::SpinParity) {
                    let mut pairs = Vec::new();
                    for (k, w) in g.indices.windows(2).enumerate() {
                        let p = pair_distances(k, &resolved[w[0]], &resolved[w[1]])?;
                        let at = || format!("N={n} J2={j2} n_a={n_a} two_s={} pair {k}", g.two_s);
                        let worst_slack = [
                            -p.lower_slack,
                            -p.upper_slack,
                            p.sector_sum() - p.d_full,
                            p.d_prob - p.sector_sum(),
                        ]
                        .into_iter()
                        .fold(f64::NEG_INFINITY, f64::max);
                        pair_worst.see(worst_slack, at);
                        if g.two_s == 0 {
                            let exact = (p.d_full - p.d_prob - p.d_conf).max(p.d_prob - p.d_full);
                            singlet.see(exact, at);
                        }
                        pairs.push(p);
                    }
                    let Ok(window) = select_window(g.indices.len(), WindowSpec::default()) else {
                        continue;
                    };
                    let id = GroupId {
                        n_sites: n,
                        two_m,
                        two_s: g.two_s,
                        parity: g.parity,
                        j2,
                        n_a,
                    };
                    let members: Vec<SymmetryResolvedRDM> = g.indices[window.clone()]
                        .iter()
                        .map(|&i| resolved[i].clone())
                        .collect();
                    let wpairs: Vec<_> = window
                        .clone()
                        .take(window.len() - 1)
                        .enumerate()
                        .map(|(k, i)| {
                            let mut p = pairs[i].clone();
                            p.alpha_index = k;
                            p
                        })
                        .collect();
                    let stats = window_statistics(
                        id,
                        window,
                        &members,
                        &wpairs,
                        n - n_a,
                        SectorCount::Kinematic,
                    )?;
                    windows += 1;
                    let at = || format!("N={n} J2={j2} n_a={n_a} two_s={} {:?}", g.two_s, g.parity);
                    let worst_link = chain_excess(&stats);
                    chain.see(worst_link, at);
                    bound.see(stats.avg_d_prob - stats.bound_rhs, at);
                }
            }
        }
    }
    let mut out = vec![
        pair_worst.check("pair bounds with leakage correction", PAIR_TOLERANCE),
        singlet.check("singlet leakage and exact bounds", PAIR_TOLERANCE),
        sum_rule.check("sector probabilities sum to one", PAIR_TOLERANCE),
        chain.check(
            "window proof chain with endpoint correction",
            WINDOW_TOLERANCE,
        ),
        bound.check("window bound ⟨D_prob⟩ ≤ √(N_sec ΣVar)", WINDOW_TOLERANCE),
    ];
    out[3].detail = format!("{windows} windows; {}", out[3].detail);
    Ok(out)
}

/// Largest `lhs - rhs` over the links of the window proof chain.
fn chain_excess(s: &crate::micro_stats::WindowStats) -> f64 {
    [
        s.avg_d_prob - s.sum_mean_abs_dev - s.endpoint_correction,
        s.sum_mean_abs_dev - s.sum_sqrt_var,
        s.sum_sqrt_var - s.bound_rhs,
        s.avg_d_prob - s.avg_d_full,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// All suites for chains of up to `max_n ≤ 8` sites.
pub fn run_verify(max_n: usize) -> Result<VerifyReport> {
    if !(2..=MAX_VERIFY_N).contains(&max_n) {
        return Err(Error::Argument(format!(
            "verify needs 2 ≤ max_n ≤ {MAX_VERIFY_N}, got {max_n}"
        )));
    }
    let mut checks = vec![
        projector_invariance_suite(max_n)?,
        m_independence_suite(max_n)?,
    ];
    checks.extend(oracle_suite(max_n)?);
    checks.extend(inequality_suite(max_n)?);
    Ok(VerifyReport { checks })
}
