//! `su2td`: solve, analyze, scan, fit, plot and verify from the command line.
//!
//! Exit codes: 0 success, 1 property violation or failed verification,
//! 2 usage or argument error, 3 capacity exceeded, 4 any other runtime or
//! I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use su2td::micro_stats::{Grouping, SectorCount, WindowSpec};
use su2td::pipeline::run::{SCAN_FILE, FITS_FILE};
use su2td::pipeline::{self, Figure, RunConfig, Source, SpinSectors};
use su2td::Error;

#[derive(Parser)]
#[command(name = "su2td", version, about = "Spin-resolved trace-distance diagnostics for J1-J2 chains")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize every configured sector and store the spectrum caches.
    Solve(RunArgs),
    /// Analyze every group and write results.csv.
    Analyze(RunArgs),
    /// Analyze, aggregate per (J2, N), fit, and write results, scan and fit tables.
    Scan(RunArgs),
    /// Refit an existing scan table.
    Fit {
        /// Scan table to read.
        #[arg(long, default_value = "out/scan.csv")]
        scan: PathBuf,
        /// Fit table to write; defaults to fits.csv beside the scan table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a figure from a scan table.
    Plot {
        #[arg(long, default_value = "out/scan.csv")]
        scan: PathBuf,
        /// fig1a, fig1b, fig2 or all.
        #[arg(long, default_value = "all")]
        figure: String,
        /// Output directory; defaults to the directory of the scan table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and inequality suites on chains up to max_n ≤ 8 sites.
    Verify {
        #[arg(long, default_value_t = 6)]
        max_n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    SpinParity,
    Spin,
}

#[derive(Clone, Copy, ValueEnum)]
enum SectorCountArg {
    Kinematic,
    ObservedSupport,
}

/// Run parameters; flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON file with RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated next-nearest-neighbour couplings.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    j2_list: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    j1: Option<f64>,
    /// Twice the magnetization sector.
    #[arg(long, allow_negative_numbers = true)]
    two_m: Option<i32>,
    #[arg(long, value_enum)]
    parity: Option<OnOff>,
    /// Subsystem fraction N_A / N.
    #[arg(long)]
    fraction: Option<f64>,
    /// Energy window as LO:HI fractions.
    #[arg(long, value_parser = parse_window)]
    window: Option<WindowSpec>,
    /// `all` or a comma-separated list of 2S values.
    #[arg(long)]
    spin_sectors: Option<SpinSectors>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    #[arg(long, value_enum)]
    sector_count: Option<SectorCountArg>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Output directory for tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest sector dimension to diagonalize.
    #[arg(long)]
    dim_limit: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Recompute spectra even when a cache exists.
    #[arg(long)]
    force: bool,
}

fn parse_window(s: &str) -> Result<WindowSpec, String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("window '{s}' is not of the form LO:HI"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad window start '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad window end '{hi}'"))?;
    WindowSpec::new(lo, hi).map_err(|e| e.to_string())
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.sizes {
            cfg.sizes = v.clone();
        }
        if let Some(v) = &self.j2_list {
            cfg.j2_list = v.clone();
        }
        if let Some(v) = self.j1 {
            cfg.j1 = v;
        }
        if let Some(v) = self.two_m {
            cfg.two_m = v;
        }
        if let Some(v) = self.parity {
            cfg.parity_resolved = matches!(v, OnOff::On);
        }
        if let Some(v) = self.fraction {
            cfg.fraction = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = &self.spin_sectors {
            cfg.spin_sectors = v.clone();
        }
        if let Some(v) = self.grouping {
            cfg.grouping = match v {
                GroupingArg::SpinParity => Grouping::SpinParity,
                GroupingArg::Spin => Grouping::Spin,
            };
        }
        if let Some(v) = self.sector_count {
            cfg.sector_count = match v {
                SectorCountArg::Kinematic => SectorCount::Kinematic,
                SectorCountArg::ObservedSupport => SectorCount::ObservedSupport,
            };
        }
        if let Some(v) = &self.cache_dir {
            cfg.cache_dir = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.dim_limit {
            cfg.dim_limit = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Property(_) => 1,
        Error::Argument(_) | Error::Json(_) => 2,
        Error::Capacity(_) => 3,
        _ => 4,
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.config()?;
            let mut code = 0;
            for r in pipeline::cmd_solve(&cfg, args.force)? {
                match r.outcome {
                    Ok((source, file)) => {
                        let how = match source {
                            Source::Computed => "computed",
                            Source::Cache => "cached",
                        };
                        let file = file.map_or("(no cache dir)".into(), |f| f.display().to_string());
                        println!("N={} J2={}: {how} {file}", r.n_sites, r.j2);
                    }
                    Err(e) => {
                        eprintln!("N={} J2={}: {e}", r.n_sites, r.j2);
                        code = code.max(exit_code(&e));
                    }
                }
            }
            Ok(code)
        }
        Command::Analyze(args) => {
            let cfg = args.config()?;
            let out = pipeline::cmd_analyze(&cfg, args.force)?;
            let violated = out.rows.iter().filter(|r| !r.bound_satisfied).count();
            println!(
                "{} rows ({} spectra computed) -> {}",
                out.rows.len(),
                out.computed,
                out.results_file.display()
            );
            if violated > 0 {
                println!("{violated} windows exceed √(N_sec ΣVar); see bound_satisfied");
            }
            Ok(0)
        }
        Command::Scan(args) => {
            let cfg = args.config()?;
            let out = pipeline::cmd_scan(&cfg, args.force)?;
            for f in &out.fits {
                println!(
                    "J2={} {:<10} preferred={:<13} exp b={:.4} pow b={:.4} decreasing={}",
                    f.j2,
                    f.quantity,
                    f.comparison.preferred.as_str(),
                    f.comparison.exponential.b,
                    f.comparison.powerlaw.b,
                    f.strictly_decreasing
                );
            }
            println!(
                "wrote {}, {}, {}",
                out.analysis.results_file.display(),
                cfg.out.join(SCAN_FILE).display(),
                cfg.out.join(FITS_FILE).display()
            );
            Ok(0)
        }
        Command::Fit { scan, out } => {
            let out = out.unwrap_or_else(|| sibling(&scan, FITS_FILE));
            let fits = pipeline::cmd_fit(&scan, &out)?;
            println!("{} fits -> {}", fits.len(), out.display());
            Ok(0)
        }
        Command::Plot { scan, figure, out } => {
            let figures: Vec<Figure> = if figure == "all" {
                Figure::ALL.to_vec()
            } else {
                vec![figure.parse()?]
            };
            let dir = out.unwrap_or_else(|| sibling(&scan, ""));
            std::fs::create_dir_all(&dir)?;
            for f in figures {
                let path = dir.join(format!("{}.svg", f.id()));
                pipeline::cmd_plot(&scan, f, &path)?;
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Verify { max_n } => {
            let report = pipeline::run_verify(max_n)?;
            print!("{report}");
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
