use rayon::prelude::*;

use crate::distances::{pair_distances, PairDistances, PAIR_TOLERANCE};
use crate::error::{Error, Result};
use crate::micro_stats::{
    select_window, window_statistics, GroupId, Grouping, SectorCount, WindowSpec, WindowStats,
    WINDOW_TOLERANCE,
};
use crate::sector_basis::{enumerate_sector, Parity};
use crate::spectral::SectorSpectrum;
use crate::su2_resolution::{resolve_state, SymmetryResolvedRDM};

use super::config::SpinSectors;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub n_a: usize,
    pub window: WindowSpec,
    pub grouping: Grouping,
    pub spin_sectors: SpinSectors,
    pub sector_count: SectorCount,
}

/// Everything computed for one windowed group.
#[derive(Debug, Clone)]
pub struct GroupAnalysis {
    pub stats: WindowStats,
    pub pairs: Vec<PairDistances>,
    /// Size of the full `(two_s, parity)` group before windowing.
    pub group_size: usize,
    pub energies: Vec<f64>,
    pub max_s2_residual: f64,
    /// `max |1 - Σ P_{S_A}|` over the window.
    pub max_trace_deficit: f64,
    pub max_leakage: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumAnalysis {
    pub groups: Vec<GroupAnalysis>,
    /// Groups left out because their window was too small, with the reason.
    pub skipped: Vec<(i32, Option<Parity>, String)>,
}

/// Whether every state in every selected window still carries its vector.
pub fn window_vectors_available(spectrum: &SectorSpectrum, opts: &AnalysisOptions) -> bool {
    spectrum.groups(opts.grouping).iter().all(|g| {
        if !opts.spin_sectors.contains(g.two_s) {
            return true;
        }
        match select_window(g.indices.len(), opts.window) {
            Ok(range) => g.indices[range]
                .iter()
                .all(|&i| spectrum.states[i].vector.is_some()),
            Err(_) => true,
        }
    })
}

fn property_violation(id: &GroupId, what: &str, detail: String) -> Error {
    Error::Property(format!(
        "{what} in group N={} two_m={} two_s={} parity={} J2={} n_a={}:\n{detail}",
        id.n_sites,
        id.two_m,
        id.two_s,
        id.parity.map_or("none", Parity::as_str),
        id.j2,
        id.n_a
    ))
}

/// Resolve every selected window, build consecutive pairs, check every
/// pair and chain inequality, and aggregate. Any violated inequality aborts.
pub fn analyze_spectrum(
    spectrum: &SectorSpectrum,
    opts: &AnalysisOptions,
) -> Result<SpectrumAnalysis> {
    let n = spectrum.n_sites;
    if opts.n_a == 0 || opts.n_a > n {
        return Err(Error::Argument(format!(
            "subsystem size {} for N={n}",
            opts.n_a
        )));
    }
    let basis = enumerate_sector(n, spectrum.two_m)?;
    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for g in spectrum.groups(opts.grouping) {
        if !opts.spin_sectors.contains(g.two_s) {
            continue;
        }
        let window = match select_window(g.indices.len(), opts.window) {
            Ok(w) => w,
            Err(Error::Window(msg)) => {
                log::info!(
                    "skipping N={n} J2={} two_s={} parity={}: {msg}",
                    spectrum.j2,
                    g.two_s,
                    g.parity.map_or("none", Parity::as_str)
                );
                skipped.push((g.two_s, g.parity, msg));
                continue;
            }
            Err(e) => return Err(e),
        };
        let id = GroupId {
            n_sites: n,
            two_m: spectrum.two_m,
            two_s: g.two_s,
            parity: g.parity,
            j2: spectrum.j2,
            n_a: opts.n_a,
        };
        let members = &g.indices[window.clone()];
        let states: Vec<SymmetryResolvedRDM> = members
            .par_iter()
            .map(|&i| {
                let v = spectrum.states[i].vector.as_deref().ok_or_else(|| {
                    Error::Argument(format!(
                        "eigenvector {i} of N={n} J2={} not retained",
                        spectrum.j2
                    ))
                })?;
                resolve_state(&basis, v, opts.n_a)
            })
            .collect::<Result<_>>()?;
        let pairs: Vec<PairDistances> = (0..states.len() - 1)
            .into_par_iter()
            .map(|k| pair_distances(k, &states[k], &states[k + 1]))
            .collect::<Result<_>>()?;

        let max_trace_deficit = states
            .iter()
            .map(|s| s.trace_deficit.abs())
            .fold(0.0, f64::max);
        if max_trace_deficit > PAIR_TOLERANCE {
            return Err(property_violation(
                &id,
                "sector probabilities do not sum to one",
                format!("max |1 - Σ P| = {max_trace_deficit:e}"),
            ));
        }
        let max_leakage = states.iter().map(|s| s.leakage).fold(0.0, f64::max);
        if g.two_s == 0 && max_leakage > PAIR_TOLERANCE {
            return Err(property_violation(
                &id,
                "singlet state with off-block weight",
                format!("max leakage = {max_leakage:e}"),
            ));
        }
        for p in &pairs {
            let mut bad = p.violations(PAIR_TOLERANCE);
            if g.two_s == 0 && !p.exact_bounds_hold(PAIR_TOLERANCE) {
                bad.push("exact bounds D_prob ≤ D ≤ D_prob + D_conf fail".into());
            }
            if !bad.is_empty() {
                let e0 = spectrum.states[members[p.alpha_index]].energy;
                let e1 = spectrum.states[members[p.alpha_index + 1]].energy;
                return Err(property_violation(
                    &id,
                    "pair inequality violated",
                    format!("{}\nenergies ({e0:e}, {e1:e})\n{p:#?}", bad.join("\n")),
                ));
            }
        }

        let n_b = n - opts.n_a;
        let stats = window_statistics(id.clone(), window, &states, &pairs, n_b, opts.sector_count)?;
        let chain = stats.chain_violations(WINDOW_TOLERANCE);
        if !chain.is_empty() {
            return Err(property_violation(
                &id,
                "window inequality violated",
                format!("{}\n{stats:#?}", chain.join("\n")),
            ));
        }
        if !stats.bound_satisfied {
            log::warn!(
                "⟨D_prob⟩ = {:e} exceeds √(N_sec ΣVar) = {:e} in {id:?}",
                stats.avg_d_prob,
                stats.bound_rhs
            );
        }
        groups.push(GroupAnalysis {
            stats,
            pairs,
            group_size: g.indices.len(),
            energies: members.iter().map(|&i| spectrum.states[i].energy).collect(),
            max_s2_residual: members
                .iter()
                .map(|&i| spectrum.states[i].s2_residual)
                .fold(0.0, f64::max),
            max_trace_deficit,
            max_leakage,
        });
    }
    Ok(SpectrumAnalysis { groups, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{solve_sector, SolveOptions};

    fn options(n_a: usize) -> AnalysisOptions {
        AnalysisOptions {
            n_a,
            window: WindowSpec::default(),
            grouping: Grouping::SpinParity,
            spin_sectors: SpinSectors::All,
            sector_count: SectorCount::Kinematic,
        }
    }

    #[test]
    fn small_chain_analysis_holds_all_bounds() {
        for j2 in [0.0, 0.5] {
            let sp = solve_sector(8, 0, 1.0, j2, true, &SolveOptions::default()).unwrap();
            let a = analyze_spectrum(&sp, &options(4)).unwrap();
            assert!(!a.groups.is_empty());
            for g in &a.groups {
                assert_eq!(g.pairs.len(), g.stats.n_states - 1);
                assert!(g.max_s2_residual < 1e-8);
                assert!(g.energies.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn spin_selection_and_skips() {
        let sp = solve_sector(8, 0, 1.0, 0.5, true, &SolveOptions::default()).unwrap();
        let mut opts = options(4);
        opts.spin_sectors = SpinSectors::List(vec![]);
        assert!(analyze_spectrum(&sp, &opts).unwrap().groups.is_empty());
        opts.spin_sectors = SpinSectors::List(vec![2]);
        let a = analyze_spectrum(&sp, &opts).unwrap();
        assert!(a.groups.iter().all(|g| g.stats.id.two_s == 2));
        // The single S = 4 multiplet at N = 8 cannot be windowed.
        opts.spin_sectors = SpinSectors::All;
        let a = analyze_spectrum(&sp, &opts).unwrap();
        assert!(a.skipped.iter().any(|(s, _, _)| *s == 8));
    }

    #[test]
    fn missing_vectors_are_reported() {
        let mut sp = solve_sector(8, 0, 1.0, 0.5, true, &SolveOptions::default()).unwrap();
        assert!(window_vectors_available(&sp, &options(4)));
        for s in &mut sp.states {
            s.vector = None;
        }
        assert!(!window_vectors_available(&sp, &options(4)));
        assert!(analyze_spectrum(&sp, &options(4)).is_err());
    }
}
