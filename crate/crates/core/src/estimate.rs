//! Survival curves and exponential decay-rate estimators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::UnknownStrategy;
use crate::stats::{log_binomial_se, wilson, Interval};

/// Survivor count below which a sample point is too noisy to fit.
pub const MIN_FIT_SURVIVORS: u64 = 50;
/// Burn-in before the default fit window opens.
pub const DEFAULT_FIT_START: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("fit window [{t_lo}, {t_hi}] contains a point with zero survivors at t = {t}")]
    ZeroSurvivors { t: f64, t_lo: f64, t_hi: f64 },
    #[error("fit window needs at least {need} usable points, found {have}")]
    TooFewPoints { need: usize, have: usize },
    #[error("survival curve is malformed: {0}")]
    Malformed(&'static str),
}

/// Estimated `P(origin infected at t)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    /// `None` for an exact (noise-free) curve.
    pub replicates: Option<u64>,
    /// Survivor counts; empty for an exact curve.
    pub survivors: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
}

impl SurvivalCurve {
    /// Curve from survivor counts with Wilson intervals at z-score `z`.
    pub fn from_counts(times: Vec<f64>, replicates: u64, survivors: Vec<u64>, z: f64) -> Result<Self, EstimateError> {
        if times.len() != survivors.len() {
            return Err(EstimateError::Malformed("times and counts differ in length"));
        }
        if replicates == 0 {
            return Err(EstimateError::Malformed("no replicates"));
        }
        if survivors.iter().any(|&k| k > replicates) {
            return Err(EstimateError::Malformed("more survivors than replicates"));
        }
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(EstimateError::Malformed("times are not sorted"));
        }
        if survivors.windows(2).any(|w| w[1] > w[0]) {
            return Err(EstimateError::Malformed("survivor counts increase in time"));
        }
        let n = replicates as f64;
        let p_hat = survivors.iter().map(|&k| k as f64 / n).collect();
        let (ci_lo, ci_hi) = survivors
            .iter()
            .map(|&k| {
                let ci = wilson(k, replicates, z);
                (ci.lo, ci.hi)
            })
            .unzip();
        Ok(SurvivalCurve {
            times,
            replicates: Some(replicates),
            survivors,
            p_hat,
            ci_lo,
            ci_hi,
        })
    }

    /// A noise-free curve, e.g. `exp(-t)` sampled exactly.
    pub fn exact(times: Vec<f64>, probs: Vec<f64>) -> Result<Self, EstimateError> {
        if times.len() != probs.len() {
            return Err(EstimateError::Malformed("times and probabilities differ in length"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(EstimateError::Malformed("probability outside [0, 1]"));
        }
        Ok(SurvivalCurve {
            ci_lo: probs.clone(),
            ci_hi: probs.clone(),
            times,
            replicates: None,
            survivors: Vec::new(),
            p_hat: probs,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn has_mass(&self, i: usize) -> bool {
        match self.replicates {
            Some(_) => self.survivors[i] > 0,
            None => self.p_hat[i] > 0.0,
        }
    }

    /// Delta-method standard error of `log p_hat[i]`; zero for exact curves.
    pub fn log_se(&self, i: usize) -> f64 {
        match self.replicates {
            Some(n) => log_binomial_se(self.survivors[i], n),
            None => 0.0,
        }
    }

    /// Default fit window: from `t = 2` to the last point with at least 50
    /// survivors (the last point for exact curves).
    pub fn default_window(&self) -> FitWindow {
        let t_hi = match self.replicates {
            Some(_) => self
                .times
                .iter()
                .zip(&self.survivors)
                .filter(|(_, &k)| k >= MIN_FIT_SURVIVORS)
                .map(|(&t, _)| t)
                .last(),
            None => self.times.last().copied(),
        }
        .unwrap_or(0.0);
        FitWindow {
            t_lo: DEFAULT_FIT_START,
            t_hi,
        }
    }

    /// Indices of points with `t > 0` inside `window`; fails on an empty
    /// point rather than taking the log of zero.
    fn window_points(&self, window: &FitWindow) -> Result<Vec<usize>, EstimateError> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] > 0.0 && window.contains(self.times[i]))
            .collect();
        if let Some(&i) = idx.iter().find(|&&i| !self.has_mass(i)) {
            return Err(EstimateError::ZeroSurvivors {
                t: self.times[i],
                t_lo: window.t_lo,
                t_hi: window.t_hi,
            });
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl FitWindow {
    pub fn new(t_lo: f64, t_hi: f64) -> Self {
        FitWindow { t_lo, t_hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_lo <= t && t <= self.t_hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMethod {
    FeketeSup,
    TailRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Estimated exponential rate (per unit time, normally negative).
    pub rate: f64,
    pub se: f64,
    pub ci: Interval,
    pub method: DecayMethod,
    pub window: FitWindow,
    pub points: usize,
}

/// `max_i log(p_i) / t_i` over the window. Since `(1/t) log p(t)` never
/// exceeds its supremum, this approaches the decay rate from below as the
/// window extends; the interval comes from the Wilson interval of the
/// maximizing point.
pub fn fekete_lower(curve: &SurvivalCurve, window: &FitWindow) -> Result<DecayEstimate, EstimateError> {
    let idx = curve.window_points(window)?;
    let (best, rate) = idx
        .iter()
        .map(|&i| (i, curve.p_hat[i].ln() / curve.times[i]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(EstimateError::TooFewPoints { need: 1, have: 0 })?;
    let t = curve.times[best];
    Ok(DecayEstimate {
        rate,
        se: curve.log_se(best) / t,
        ci: Interval::new(curve.ci_lo[best].ln() / t, curve.ci_hi[best].ln() / t),
        method: DecayMethod::FeketeSup,
        window: *window,
        points: idx.len(),
    })
}

/// Weighted least-squares slope of `log p_hat` against `t`. Sampled curves
/// use inverse delta-method variances as weights and report the
/// known-variance standard error; exact curves use unit weights and a
/// residual standard error.
pub fn tail_regression(curve: &SurvivalCurve, window: &FitWindow) -> Result<DecayEstimate, EstimateError> {
    let idx = curve.window_points(window)?;
    if idx.len() < 3 {
        return Err(EstimateError::TooFewPoints {
            need: 3,
            have: idx.len(),
        });
    }
    let weight = |i: usize| match curve.replicates {
        Some(n) => {
            let floor = 1.0 / (n as f64 * n as f64);
            1.0 / curve.log_se(i).powi(2).max(floor)
        }
        None => 1.0,
    };
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &i in &idx {
        let w = weight(i);
        sw += w;
        sx += w * curve.times[i];
        sy += w * curve.p_hat[i].ln();
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &i in &idx {
        let w = weight(i);
        let dx = curve.times[i] - mx;
        sxx += w * dx * dx;
        sxy += w * dx * (curve.p_hat[i].ln() - my);
    }
    let slope = sxy / sxx;
    let se = match curve.replicates {
        Some(_) => (1.0 / sxx).sqrt(),
        None => {
            let rss: f64 = idx
                .iter()
                .map(|&i| {
                    let r = curve.p_hat[i].ln() - (my + slope * (curve.times[i] - mx));
                    r * r
                })
                .sum();
            (rss / (idx.len() - 2) as f64 / sxx).sqrt()
        }
    };
    Ok(DecayEstimate {
        rate: slope,
        se,
        ci: Interval::around(slope, crate::stats::Z95 * se),
        method: DecayMethod::TailRegression,
        window: *window,
        points: idx.len(),
    })
}

/// A decay-rate estimator, selected by name.
pub trait DecayEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, curve: &SurvivalCurve, window: &FitWindow) -> Result<DecayEstimate, EstimateError>;
}

struct FeketeSup;
struct TailRegression;

impl DecayEstimator for FeketeSup {
    fn name(&self) -> &'static str {
        "fekete-sup"
    }
    fn estimate(&self, curve: &SurvivalCurve, window: &FitWindow) -> Result<DecayEstimate, EstimateError> {
        fekete_lower(curve, window)
    }
}

impl DecayEstimator for TailRegression {
    fn name(&self) -> &'static str {
        "tail-regression"
    }
    fn estimate(&self, curve: &SurvivalCurve, window: &FitWindow) -> Result<DecayEstimate, EstimateError> {
        tail_regression(curve, window)
    }
}

impl std::fmt::Debug for dyn DecayEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

static ESTIMATORS: [&dyn DecayEstimator; 2] = [&FeketeSup, &TailRegression];

pub fn estimators() -> &'static [&'static dyn DecayEstimator] {
    &ESTIMATORS
}

pub fn estimator(name: &str) -> Result<&'static dyn DecayEstimator, UnknownStrategy> {
    ESTIMATORS
        .iter()
        .copied()
        .find(|e| e.name() == name)
        .ok_or_else(|| UnknownStrategy {
            kind: "estimator",
            name: name.to_string(),
            known: ESTIMATORS.iter().map(|e| e.name()).collect(),
        })
}

/// A grid pair violating `log p(t+s) >= log p(t) + log p(s) - k * se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupermultiplicativityViolation {
    pub t: f64,
    pub s: f64,
    /// `log p(t+s) - log p(t) - log p(s)`, negative when violated.
    pub excess: f64,
    pub combined_se: f64,
}

/// Check supermultiplicativity on every grid pair `t <= s` with `t + s` on
/// the grid and all three points populated. Returns the number of pairs
/// checked and the violations beyond `k` combined standard errors.
pub fn supermultiplicativity(curve: &SurvivalCurve, k: f64) -> (usize, Vec<SupermultiplicativityViolation>) {
    let find = |t: f64| {
        curve
            .times
            .iter()
            .position(|&u| (u - t).abs() <= 1e-9 * (1.0 + t.abs()))
    };
    let mut checked = 0;
    let mut bad = Vec::new();
    for i in 0..curve.len() {
        for j in i..curve.len() {
            let (t, s) = (curve.times[i], curve.times[j]);
            if t <= 0.0 {
                continue;
            }
            let Some(m) = find(t + s) else { continue };
            if [i, j, m].iter().any(|&q| !curve.has_mass(q)) {
                continue;
            }
            checked += 1;
            let excess = curve.p_hat[m].ln() - curve.p_hat[i].ln() - curve.p_hat[j].ln();
            let se = (curve.log_se(i).powi(2) + curve.log_se(j).powi(2) + curve.log_se(m).powi(2)).sqrt();
            if excess < -k * se {
                bad.push(SupermultiplicativityViolation {
                    t,
                    s,
                    excess,
                    combined_se: se,
                });
            }
        }
    }
    (checked, bad)
}
