//! Log-scale line plots of scan quantities against `N`, one series per `J2`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::table::{fmt_float, ScanRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Sum of sector-probability variances.
    Fig1a,
    /// Window-averaged probability distance.
    Fig1b,
    /// Window-averaged `D - D_conf`.
    Fig2,
}

impl Figure {
    pub const ALL: [Figure; 3] = [Figure::Fig1a, Figure::Fig1b, Figure::Fig2];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig2 => "fig2",
        }
    }

    pub fn quantity(self) -> &'static str {
        match self {
            Figure::Fig1a => "sum_var",
            Figure::Fig1b => "avg_d_prob",
            Figure::Fig2 => "avg_gap",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Figure::Fig1a => "Sum of variances of the spin-sector probabilities",
            Figure::Fig1b => "Window-averaged probability trace distance",
            Figure::Fig2 => "Window-averaged trace distance beyond the configurational part",
        }
    }

    fn y_label(self) -> &'static str {
        match self {
            Figure::Fig1a => "Σ Var_W(P_SA)",
            Figure::Fig1b => "⟨D_prob⟩_W",
            Figure::Fig2 => "⟨D − D_conf⟩_W",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown figure '{s}', expected fig1a, fig1b or fig2"
                ))
            })
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 540.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 410.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn series_label(j2: f64) -> String {
    if j2 == 0.0 {
        "J2 = 0 (integrable reference)".into()
    } else {
        format!("J2 = {j2}")
    }
}

/// Render one figure. Nonpositive values cannot sit on a log axis and are
/// left out with a warning.
pub fn render_svg(scan: &[ScanRow], figure: Figure) -> Result<String> {
    if scan.is_empty() {
        return Err(Error::Argument("scan table is empty".into()));
    }
    let quantity = figure.quantity();
    let mut j2s: Vec<f64> = scan.iter().map(|r| r.j2).collect();
    j2s.sort_by(f64::total_cmp);
    j2s.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let series: Vec<(f64, Vec<(usize, f64)>)> = j2s
        .iter()
        .map(|&j2| {
            let mut pts: Vec<(usize, f64)> = scan
                .iter()
                .filter(|r| r.j2.to_bits() == j2.to_bits())
                .map(|r| (r.n_sites, r.quantity(quantity).expect("known quantity")))
                .filter(|&(n, y)| {
                    let keep = y > 0.0 && y.is_finite();
                    if !keep {
                        log::warn!(
                            "{}: dropping nonpositive {quantity} = {y} at N={n}, J2={j2}",
                            figure.id()
                        );
                    }
                    keep
                })
                .collect();
            pts.sort_by_key(|p| p.0);
            (j2, pts)
        })
        .collect();
    let all: Vec<(usize, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::Argument(format!(
            "no positive {quantity} values to plot"
        )));
    }

    let n_min = all.iter().map(|p| p.0).min().expect("nonempty") as f64 - 1.0;
    let n_max = all.iter().map(|p| p.0).max().expect("nonempty") as f64 + 1.0;
    let mut d_lo = all
        .iter()
        .map(|p| p.1.log10())
        .fold(f64::INFINITY, f64::min)
        .floor();
    let mut d_hi = all
        .iter()
        .map(|p| p.1.log10())
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil();
    if d_hi <= d_lo {
        d_lo -= 1.0;
        d_hi += 1.0;
    }
    let x_of = |n: f64| LEFT + (n - n_min) / (n_max - n_min) * (RIGHT - LEFT);
    let y_of = |y: f64| BOTTOM - (y.log10() - d_lo) / (d_hi - d_lo) * (BOTTOM - TOP);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(figure.title()));
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        escape(figure.title())
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );

    let mut ns: Vec<usize> = all.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    let _ = writeln!(s, r#"<g class="x-axis">"#);
    for n in ns {
        let x = x_of(n as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{BOTTOM}" x2="{x:.3}" y2="{:.3}" stroke="black"/><text x="{x:.3}" y="{:.3}" text-anchor="middle">{n}</text>"#,
            BOTTOM + 6.0,
            BOTTOM + 22.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="x-label" x="{:.3}" y="{:.3}" text-anchor="middle">N</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 50.0
    );
    let _ = writeln!(s, "</g>");

    let decades = (d_hi - d_lo) as i32;
    let step = (decades + 7) / 8;
    let _ = writeln!(s, r#"<g class="y-axis">"#);
    for k in (0..=decades).step_by(step.max(1) as usize) {
        let e = d_lo as i32 + k;
        let y = y_of(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{:.3}" y1="{y:.3}" x2="{RIGHT}" y2="{y:.3}" stroke="#dddddd"/><text x="{:.3}" y="{:.3}" text-anchor="end">1e{e}</text>"##,
            LEFT - 6.0,
            LEFT - 10.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="y-label" x="24" y="{:.3}" text-anchor="middle" transform="rotate(-90 24 {:.3})">{}</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        escape(figure.y_label())
    );
    let _ = writeln!(s, "</g>");

    for (k, (j2, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(n, y)| format!("{:.3},{:.3}", x_of(n as f64), y_of(y)))
            .collect();
        let _ = writeln!(s, r#"<g class="series" data-j2="{}">"#, fmt_float(*j2));
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for &(n, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="{color}" data-n="{n}" data-y="{}"/>"#,
                x_of(n as f64),
                y_of(y),
                fmt_float(y)
            );
        }
        let ly = TOP + 10.0 + 22.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line class="legend" x1="{:.3}" y1="{ly:.3}" x2="{:.3}" y2="{ly:.3}" stroke="{color}" stroke-width="2"/><text x="{:.3}" y="{:.3}">{}</text>"#,
            RIGHT + 15.0,
            RIGHT + 40.0,
            RIGHT + 46.0,
            ly + 4.0,
            escape(&series_label(*j2))
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
