use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{solve_sector, LabelOptions, Retention, SectorSpectrum, SolveOptions};

use super::analysis::{analyze_spectrum, window_vectors_available, AnalysisOptions, GroupAnalysis};
use super::atomic_write;
use super::cache::{cache_path, read_cache, write_cache};
use super::config::RunConfig;
use super::plot::{render_svg, Figure};
use super::scan::{aggregate, fit_scan};
use super::table::{fits_csv, read_scan, results_csv, scan_csv, FitRow, ResultRow, ScanRow};

pub const RESULTS_FILE: &str = "results.csv";
pub const SCAN_FILE: &str = "scan.csv";
pub const FITS_FILE: &str = "fits.csv";

/// Where a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Computed,
    Cache,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub spectrum: SectorSpectrum,
    pub source: Source,
    pub cache_file: Option<PathBuf>,
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        dim_limit: cfg.dim_limit,
        labels: LabelOptions::default(),
        retention: Retention::Window(cfg.window, cfg.grouping),
    }
}

fn analysis_options(cfg: &RunConfig, n: usize) -> Result<AnalysisOptions> {
    Ok(AnalysisOptions {
        n_a: cfg.subsystem_size(n)?,
        window: cfg.window,
        grouping: cfg.grouping,
        spin_sectors: cfg.spin_sectors.clone(),
        sector_count: cfg.sector_count,
    })
}

/// Load the cached spectrum for `(n, j2)` when it is usable, otherwise
/// solve and (with a cache directory) store it. `force` ignores the cache.
pub fn solve_or_load(cfg: &RunConfig, n: usize, j2: f64, force: bool) -> Result<Solved> {
    let path = cfg
        .cache_dir
        .as_ref()
        .map(|d| cache_path(d, n, cfg.two_m, cfg.j1, j2, cfg.parity_resolved));
    if let (Some(p), false) = (&path, force) {
        if p.exists() {
            let spectrum = read_cache(p)?;
            let needed = AnalysisOptions {
                spin_sectors: super::config::SpinSectors::All,
                ..analysis_options(cfg, n)?
            };
            if window_vectors_available(&spectrum, &needed) {
                log::debug!("loaded {}", p.display());
                return Ok(Solved {
                    spectrum,
                    source: Source::Cache,
                    cache_file: path,
                });
            }
            log::info!(
                "{} lacks window vectors for this config; recomputing",
                p.display()
            );
        }
    }
    let spectrum = solve_sector(
        n,
        cfg.two_m,
        cfg.j1,
        j2,
        cfg.parity_resolved,
        &solve_options(cfg),
    )?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_cache(p, &spectrum)?;
        log::info!("wrote {}", p.display());
    }
    Ok(Solved {
        spectrum,
        source: Source::Computed,
        cache_file: path,
    })
}

/// Every `(N, J2)` task in ascending order.
fn tasks(cfg: &RunConfig) -> Vec<(usize, f64)> {
    let j2s = cfg.sorted_j2();
    cfg.sorted_sizes()
        .into_iter()
        .flat_map(|n| j2s.iter().map(move |&j2| (n, j2)))
        .collect()
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Outcome of one `(N, J2)` solve.
#[derive(Debug)]
pub struct SolveReport {
    pub n_sites: usize,
    pub j2: f64,
    pub outcome: Result<(Source, Option<PathBuf>)>,
}

/// Solve and cache every sector. Failures are reported per task; finished
/// caches are kept.
pub fn cmd_solve(cfg: &RunConfig, force: bool) -> Result<Vec<SolveReport>> {
    cfg.validate()?;
    in_pool(cfg.workers, || {
        tasks(cfg)
            .into_par_iter()
            .map(|(n, j2)| SolveReport {
                n_sites: n,
                j2,
                outcome: solve_or_load(cfg, n, j2, force).map(|s| (s.source, s.cache_file)),
            })
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutput {
    pub rows: Vec<ResultRow>,
    pub groups: Vec<GroupAnalysis>,
    /// How many spectra were computed rather than loaded.
    pub computed: usize,
    pub results_file: PathBuf,
}

fn analyze_all(cfg: &RunConfig, force: bool) -> Result<(Vec<GroupAnalysis>, usize)> {
    cfg.validate()?;
    let per_task: Vec<Result<(Vec<GroupAnalysis>, bool)>> = in_pool(cfg.workers, || {
        tasks(cfg)
            .into_par_iter()
            .map(|(n, j2)| {
                let solved = solve_or_load(cfg, n, j2, force)?;
                let a = analyze_spectrum(&solved.spectrum, &analysis_options(cfg, n)?)?;
                Ok((a.groups, solved.source == Source::Computed))
            })
            .collect()
    })?;
    let mut groups = Vec::new();
    let mut computed = 0;
    for r in per_task {
        let (g, c) = r?;
        groups.extend(g);
        computed += c as usize;
    }
    groups.sort_by(|a, b| {
        let (x, y) = (&a.stats.id, &b.stats.id);
        x.n_sites
            .cmp(&y.n_sites)
            .then(x.j2.total_cmp(&y.j2))
            .then(x.two_s.cmp(&y.two_s))
            .then(x.parity.cmp(&y.parity))
    });
    Ok((groups, computed))
}

/// Analyze every configured `(N, J2)` and write `results.csv` under `out`.
pub fn cmd_analyze(cfg: &RunConfig, force: bool) -> Result<AnalyzeOutput> {
    let (groups, computed) = analyze_all(cfg, force)?;
    let mut rows: Vec<ResultRow> = groups.iter().map(ResultRow::from_group).collect();
    ResultRow::sort(&mut rows);
    std::fs::create_dir_all(&cfg.out)?;
    let results_file = cfg.out.join(RESULTS_FILE);
    atomic_write(&results_file, &results_csv(&rows)?)?;
    Ok(AnalyzeOutput {
        rows,
        groups,
        computed,
        results_file,
    })
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub analysis: AnalyzeOutput,
    pub scan: Vec<ScanRow>,
    pub fits: Vec<FitRow>,
}

/// Analyze, aggregate per `(J2, N)`, fit, and write `results.csv`,
/// `scan.csv` and `fits.csv`.
pub fn cmd_scan(cfg: &RunConfig, force: bool) -> Result<ScanOutput> {
    if cfg.sorted_sizes().len() < 3 {
        return Err(Error::Argument("a scan needs at least 3 sizes".into()));
    }
    let analysis = cmd_analyze(cfg, force)?;
    let scan = aggregate(&analysis.rows);
    atomic_write(&cfg.out.join(SCAN_FILE), &scan_csv(&scan)?)?;
    let fits = fit_scan(&scan)?;
    atomic_write(&cfg.out.join(FITS_FILE), &fits_csv(&fits)?)?;
    Ok(ScanOutput {
        analysis,
        scan,
        fits,
    })
}

/// Refit an existing scan table.
pub fn cmd_fit(scan_file: &Path, fits_file: &Path) -> Result<Vec<FitRow>> {
    let fits = fit_scan(&read_scan(scan_file)?)?;
    atomic_write(fits_file, &fits_csv(&fits)?)?;
    Ok(fits)
}

/// Render one figure from a scan table. Nothing is written on error.
pub fn cmd_plot(scan_file: &Path, figure: Figure, svg_file: &Path) -> Result<()> {
    let svg = render_svg(&read_scan(scan_file)?, figure)?;
    atomic_write(svg_file, svg.as_bytes())
}
