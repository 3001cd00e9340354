//! Finite-size fits `y = a e^{-bN}` and `y = a N^{-b}` in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values at or below this are dropped before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

/// Residual sums closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Exponential,
    Powerlaw,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Exponential => "exponential",
            Model::Powerlaw => "powerlaw",
        }
    }

    pub fn eval(self, a: f64, b: f64, n: f64) -> f64 {
        match self {
            Model::Exponential => a * (-b * n).exp(),
            Model::Powerlaw => a * n.powf(-b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub model: Model,
    pub a: f64,
    pub b: f64,
    /// Coefficient of determination of the log-space regression.
    pub r_squared: f64,
    /// `ln y - ln ŷ`, ordered by ascending `N`.
    pub residuals: Vec<f64>,
    pub n_points: usize,
}

impl ScalingFit {
    pub fn rss_log(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

fn prepare(points: &[(f64, f64)], need_positive_n: bool) -> Result<Vec<(f64, f64)>> {
    let bad: Vec<String> = points
        .iter()
        .filter(|(n, y)| {
            !y.is_finite() || *y <= 0.0 || !n.is_finite() || (need_positive_n && *n <= 0.0)
        })
        .map(|(n, y)| format!("({n}, {y})"))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Argument(format!(
            "fit needs finite positive values; offending points: {}",
            bad.join(", ")
        )));
    }
    let mut kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(n, y)| {
            let keep = y > LOG_FLOOR;
            if !keep {
                log::warn!("dropping point ({n}, {y}) below the log floor");
            }
            keep
        })
        .collect();
    if kept.len() < 3 {
        return Err(Error::Argument(format!(
            "fit needs at least 3 usable points, got {}",
            kept.len()
        )));
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(kept)
}

/// Ordinary least squares `v = c0 + c1 u`; returns `(c0, c1, residuals, r²)`.
fn linear_fit(u: &[f64], v: &[f64]) -> (f64, f64, Vec<f64>, f64) {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
    let sxy: f64 = u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mv - slope * mu;
    let residuals: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = v.iter().map(|y| (y - mv) * (y - mv)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (intercept, slope, residuals, r2.min(1.0))
}

/// Fit `y = a e^{-bN}` by regressing `ln y` on `N`.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ScalingFit> {
    let pts = prepare(points, false)?;
    let u: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let v: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c0, c1, residuals, r_squared) = linear_fit(&u, &v);
    Ok(ScalingFit {
        model: Model::Exponential,
        a: c0.exp(),
        b: -c1,
        r_squared,
        residuals,
        n_points: pts.len(),
    })
}

/// Fit `y = a N^{-b}` by regressing `ln y` on `ln N`.
pub fn fit_powerlaw(points: &[(f64, f64)]) -> Result<ScalingFit> {
    let pts = prepare(points, true)?;
    let u: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let v: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (c0, c1, residuals, r_squared) = linear_fit(&u, &v);
    Ok(ScalingFit {
        model: Model::Powerlaw,
        a: c0.exp(),
        b: -c1,
        r_squared,
        residuals,
        n_points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Exponential,
    Powerlaw,
    Indeterminate,
}

impl Preference {
    pub fn as_str(self) -> &'static str {
        match self {
            Preference::Exponential => "exponential",
            Preference::Powerlaw => "powerlaw",
            Preference::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub exponential: ScalingFit,
    pub powerlaw: ScalingFit,
    pub preferred: Preference,
    /// `RSS(powerlaw) - RSS(exponential)` in log space; positive favours the
    /// exponential.
    pub delta_rss_log: f64,
}

/// Fit both models and prefer the one with the smaller log-space RSS.
pub fn compare_models(points: &[(f64, f64)]) -> Result<ModelComparison> {
    let exponential = fit_exponential(points)?;
    let powerlaw = fit_powerlaw(points)?;
    let delta_rss_log = powerlaw.rss_log() - exponential.rss_log();
    let preferred = if delta_rss_log.abs() <= TIE_TOLERANCE {
        Preference::Indeterminate
    } else if delta_rss_log > 0.0 {
        Preference::Exponential
    } else {
        Preference::Powerlaw
    };
    Ok(ModelComparison {
        exponential,
        powerlaw,
        preferred,
        delta_rss_log,
    })
}
