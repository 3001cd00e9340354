//! End-to-end runs: configuration, spectrum caches, per-group analysis,
//! finite-size scans, CSV tables, SVG figures and the verification suite.

pub mod analysis;
pub mod cache;
pub mod config;
pub mod plot;
pub mod run;
pub mod scan;
pub mod table;
pub mod verify;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use analysis::{analyze_spectrum, AnalysisOptions, GroupAnalysis, SpectrumAnalysis};
pub use config::{RunConfig, SpinSectors};
pub use plot::Figure;
pub use run::{cmd_analyze, cmd_fit, cmd_plot, cmd_scan, cmd_solve, solve_or_load, Source};
pub use table::{FitRow, ResultRow, ScanRow};
pub use verify::{run_verify, VerifyReport};

/// Write through a sibling temporary file and rename over `path`.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
