use crate::error::{Error, Result};
use crate::scaling_fits::compare_models;

use super::table::{FitRow, ResultRow, ScanRow};

/// Quantities fitted against `N`.
pub const FIT_QUANTITIES: [&str; 3] = ["sum_var", "avg_d_prob", "avg_gap"];

/// Collapse group rows into one row per `(J2, N)`, weighting each group by
/// its size. Output is ordered by `J2`, then `N`.
pub fn aggregate(rows: &[ResultRow]) -> Vec<ScanRow> {
    let mut keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.j2, r.n_sites)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keys.dedup_by(|a, b| a.0.to_bits() == b.0.to_bits() && a.1 == b.1);
    keys.into_iter()
        .map(|(j2, n)| {
            let members: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.j2.to_bits() == j2.to_bits() && r.n_sites == n)
                .collect();
            let weight: usize = members.iter().map(|r| r.group_size).sum();
            let w = weight as f64;
            let mean = |f: fn(&ResultRow) -> f64| {
                members
                    .iter()
                    .map(|r| r.group_size as f64 * f(r))
                    .sum::<f64>()
                    / w
            };
            ScanRow {
                j2,
                n_sites: n,
                n_a: members[0].n_a,
                n_groups: members.len(),
                weight,
                sum_var: mean(|r| r.sum_var),
                avg_d_prob: mean(|r| r.avg_d_prob),
                avg_gap: mean(|r| r.avg_gap),
                avg_d_conf: mean(|r| r.avg_d_conf),
                avg_d_full: mean(|r| r.avg_d_full),
                all_bounds_satisfied: members.iter().all(|r| r.bound_satisfied),
            }
        })
        .collect()
}

/// Both scaling fits for every `(J2, quantity)`. Each `J2` needs at least
/// three sizes.
pub fn fit_scan(scan: &[ScanRow]) -> Result<Vec<FitRow>> {
    if scan.is_empty() {
        return Err(Error::Argument("scan table is empty".into()));
    }
    let mut j2s: Vec<f64> = scan.iter().map(|r| r.j2).collect();
    j2s.sort_by(f64::total_cmp);
    j2s.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let mut out = Vec::new();
    for j2 in j2s {
        let mut series: Vec<&ScanRow> = scan
            .iter()
            .filter(|r| r.j2.to_bits() == j2.to_bits())
            .collect();
        series.sort_by_key(|r| r.n_sites);
        if series.len() < 3 {
            return Err(Error::Argument(format!(
                "J2={j2}: fits need at least 3 sizes, got {}",
                series.len()
            )));
        }
        for quantity in FIT_QUANTITIES {
            let points: Vec<(f64, f64)> = series
                .iter()
                .map(|r| {
                    (
                        r.n_sites as f64,
                        r.quantity(quantity).expect("known quantity"),
                    )
                })
                .collect();
            let strictly_decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
            if !strictly_decreasing {
                log::warn!("J2={j2}: {quantity} is not strictly decreasing in N: {points:?}");
            }
            let comparison = compare_models(&points)
                .map_err(|e| Error::Argument(format!("J2={j2}, {quantity}: {e}")))?;
            out.push(FitRow {
                j2,
                quantity: quantity.to_string(),
                comparison,
                strictly_decreasing,
            });
        }
    }
    Ok(out)
}
