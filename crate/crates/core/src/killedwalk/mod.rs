//! Hitting probability `R(x, d, p)` of the origin for the simple random
//! walk on `Z^d` that is killed with probability `1 - p` at each step.
//!
//! `R(O) = 1` and `R` is harmonic for the killed walk away from the origin:
//! `R(x) = p/(2d) * sum over neighbors y of R(y)`.

mod montecarlo;
mod solver;

pub use montecarlo::{
    default_max_steps, hitting_mc, hitting_mc_with, HittingEstimate, ReturnTimes, StratifiedHitting, DEFAULT_HORIZON,
    MAX_HORIZON,
};
pub use solver::{hitting_solve, hitting_solve_with, HittingSolution, SolveOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::UnknownStrategy;
use crate::lattice::LatticeError;
use crate::stats::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KilledWalkError {
    #[error("per-step survival probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("site has dimension {actual}, walk has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("box radius must be at least 2, got {0}")]
    BadRadius(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("the unkilled walk in dimension {dim} is recurrent; R is identically 1 and the box bracket cannot close")]
    Recurrent { dim: usize },
    #[error("box bracket did not close: half-gap {gap:.3e} at radius {radius}")]
    NonConvergence { radius: usize, gap: f64 },
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("grid values must lie in [0, 1) and be sorted")]
    BadGrid,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KilledWalkSpec {
    pub dim: usize,
    pub p: f64,
}

impl KilledWalkSpec {
    pub fn new(dim: usize, p: f64) -> Result<Self, KilledWalkError> {
        if dim == 0 {
            return Err(KilledWalkError::ZeroDimension);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(KilledWalkError::BadProbability(p));
        }
        Ok(KilledWalkSpec { dim, p })
    }
}

/// Starting radius for a solve: roughly where `e1` stops feeling the
/// boundary, since escape to distance `M` costs about
/// `exp(-M sqrt(2d(1-p)))`.
pub fn suggested_radius(dim: usize, p: f64, tol: f64) -> usize {
    let rate = (2.0 * dim as f64 * (1.0 - p)).sqrt().max(1e-3);
    let m = ((1.0 / tol).ln() / rate).ceil();
    let cap = match dim {
        1 => 100_000.0,
        2 => 400.0,
        _ => 40.0,
    };
    m.clamp(2.0, cap) as usize
}

/// Evaluates `R(e1, d, p)` as an interval for one dimension.
pub trait HittingEvaluator: Send {
    fn r_e1(&mut self, p: f64) -> Result<Interval, KilledWalkError>;

    /// Tighten future intervals. Returns `false` once no further
    /// tightening is available.
    fn refine(&mut self) -> bool;

    /// Whether the intervals are rigorous (`true`) or statistical.
    fn certified(&self) -> bool;

    /// Short description of the method and its current accuracy.
    fn describe(&self) -> String;
}

/// A way of computing `R(e1, d, p)`, selected by name.
pub trait HittingProvider: Send + Sync {
    fn name(&self) -> &'static str;
    /// `accuracy` is the target half-width of the returned intervals.
    fn evaluator(&self, dim: usize, accuracy: f64, seed: u64) -> Result<Box<dyn HittingEvaluator>, KilledWalkError>;
}

struct Solver;
struct MonteCarlo;
struct Auto;

/// Largest dimension the `auto` provider sends to the box solver.
pub const MAX_SOLVER_DIM: usize = 3;

struct SolverEvaluator {
    dim: usize,
    tol: f64,
}

impl HittingEvaluator for SolverEvaluator {
    fn r_e1(&mut self, p: f64) -> Result<Interval, KilledWalkError> {
        let spec = KilledWalkSpec::new(self.dim, p)?;
        if p == 0.0 {
            return Ok(Interval::point(0.0));
        }
        let radius = suggested_radius(self.dim, p, self.tol);
        Ok(hitting_solve(spec, radius, self.tol)?.e1())
    }

    fn refine(&mut self) -> bool {
        if self.tol < 1e-13 {
            return false;
        }
        self.tol /= 4.0;
        true
    }

    fn certified(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("box solver, tol {:.1e}", self.tol)
    }
}

struct MonteCarloEvaluator {
    sampler: StratifiedHitting,
    refinements: u32,
}

impl HittingEvaluator for MonteCarloEvaluator {
    fn r_e1(&mut self, p: f64) -> Result<Interval, KilledWalkError> {
        KilledWalkSpec::new(self.sampler.dim, p)?;
        Ok(self.sampler.r_e1(p))
    }

    fn refine(&mut self) -> bool {
        if self.refinements >= 3 {
            return false;
        }
        self.refinements += 1;
        self.sampler.refine();
        true
    }

    fn certified(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        format!(
            "path-weighted Monte Carlo, {} walks per stratum, horizon {}, {}-sigma intervals",
            self.sampler.walks(),
            self.sampler.horizon(),
            self.sampler.z
        )
    }
}

impl HittingProvider for Solver {
    fn name(&self) -> &'static str {
        "solver"
    }

    fn evaluator(&self, dim: usize, accuracy: f64, _seed: u64) -> Result<Box<dyn HittingEvaluator>, KilledWalkError> {
        if dim == 0 {
            return Err(KilledWalkError::ZeroDimension);
        }
        if !(accuracy > 0.0) {
            return Err(KilledWalkError::BadTolerance(accuracy));
        }
        Ok(Box::new(SolverEvaluator { dim, tol: accuracy }))
    }
}

impl HittingProvider for MonteCarlo {
    fn name(&self) -> &'static str {
        "monte-carlo"
    }

    fn evaluator(&self, dim: usize, accuracy: f64, seed: u64) -> Result<Box<dyn HittingEvaluator>, KilledWalkError> {
        if dim == 0 {
            return Err(KilledWalkError::ZeroDimension);
        }
        if !(accuracy > 0.0) {
            return Err(KilledWalkError::BadTolerance(accuracy));
        }
        Ok(Box::new(MonteCarloEvaluator {
            sampler: StratifiedHitting::with_target(dim, accuracy, seed),
            refinements: 0,
        }))
    }
}

impl HittingProvider for Auto {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn evaluator(&self, dim: usize, accuracy: f64, seed: u64) -> Result<Box<dyn HittingEvaluator>, KilledWalkError> {
        if dim <= MAX_SOLVER_DIM {
            Solver.evaluator(dim, accuracy, seed)
        } else {
            MonteCarlo.evaluator(dim, accuracy.max(MC_MIN_ACCURACY), seed)
        }
    }
}

/// Finest half-width `auto` asks of Monte Carlo, whatever the request.
pub const MC_MIN_ACCURACY: f64 = 1e-4;

impl std::fmt::Debug for dyn HittingProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

static PROVIDERS: [&dyn HittingProvider; 3] = [&Solver, &MonteCarlo, &Auto];

pub fn providers() -> &'static [&'static dyn HittingProvider] {
    &PROVIDERS
}

pub fn provider(name: &str) -> Result<&'static dyn HittingProvider, UnknownStrategy> {
    PROVIDERS
        .iter()
        .copied()
        .find(|p| p.name() == name)
        .ok_or_else(|| UnknownStrategy {
            kind: "hitting provider",
            name: name.to_string(),
            known: PROVIDERS.iter().map(|p| p.name()).collect(),
        })
}

/// `R(e1, d, p)` on a grid of `p` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub p: f64,
    pub r_e1: Interval,
}

pub fn continuity_scan(dim: usize, grid: &[f64], tol: f64) -> Result<Vec<ContinuityRow>, KilledWalkError> {
    let ok = grid.iter().all(|p| (0.0..1.0).contains(p)) && grid.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(KilledWalkError::BadGrid);
    }
    let mut eval = Solver.evaluator(dim, tol, 0)?;
    grid.iter()
        .map(|&p| Ok(ContinuityRow { p, r_e1: eval.r_e1(p)? }))
        .collect()
}

/// A consecutive pair breaking monotonicity or the increment bound
/// `R(p2) - R(p1) <= (p2 - p1) / (1 - p1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityViolation {
    pub p1: f64,
    pub p2: f64,
    /// Certified lower bound on `R(p2) - R(p1)`.
    pub increment_lo: f64,
    /// Certified upper bound on `R(p2) - R(p1)`.
    pub increment_hi: f64,
    pub bound: f64,
}

/// Check consecutive rows: the increment must be able to be nonnegative
/// and must be able to respect the Lipschitz-type bound, given the
/// interval widths.
pub fn check_continuity(rows: &[ContinuityRow]) -> Vec<ContinuityViolation> {
    rows.windows(2)
        .filter_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let increment_lo = b.r_e1.lo - a.r_e1.hi;
            let increment_hi = b.r_e1.hi - a.r_e1.lo;
            let bound = (b.p - a.p) / (1.0 - a.p);
            (increment_hi < 0.0 || increment_lo > bound).then_some(ContinuityViolation {
                p1: a.p,
                p2: b.p,
                increment_lo,
                increment_hi,
                bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    fn closed_form(p: f64) -> f64 {
        p / (1.0 + (1.0 - p * p).sqrt())
    }

    #[test]
    fn spec_validation() {
        assert!(KilledWalkSpec::new(2, 0.5).is_ok());
        assert_eq!(KilledWalkSpec::new(2, 1.5), Err(KilledWalkError::BadProbability(1.5)));
        assert_eq!(KilledWalkSpec::new(0, 0.5), Err(KilledWalkError::ZeroDimension));
    }

    #[test]
    fn scan_of_zero_is_zero() {
        let rows = continuity_scan(2, &[0.0], 1e-8).unwrap();
        assert_eq!(rows[0].r_e1, Interval::point(0.0));
    }

    #[test]
    fn one_dimensional_scan() {
        let rows = continuity_scan(1, &[0.2, 0.4, 0.6], 1e-9).unwrap();
        for r in &rows {
            assert!((r.r_e1.mid() - closed_form(r.p)).abs() < 1e-8);
        }
        assert!(rows.windows(2).all(|w| w[0].r_e1.mid() < w[1].r_e1.mid()));
        assert!(check_continuity(&rows).is_empty());
        let inc = rows[2].r_e1.mid() - rows[1].r_e1.mid();
        assert!(inc <= 1.0 / 3.0);
    }

    #[test]
    fn continuity_violations_are_detected() {
        let rows = vec![
            ContinuityRow {
                p: 0.1,
                r_e1: Interval::point(0.5),
            },
            ContinuityRow {
                p: 0.2,
                r_e1: Interval::point(0.4),
            },
            ContinuityRow {
                p: 0.3,
                r_e1: Interval::point(0.9),
            },
        ];
        let bad = check_continuity(&rows);
        assert_eq!(bad.len(), 2);
        assert!(continuity_scan(1, &[0.5, 0.4], 1e-6).is_err());
        assert!(continuity_scan(1, &[1.0], 1e-6).is_err());
    }

    #[test]
    fn providers_agree_in_three_dimensions() {
        let mut s = provider("solver").unwrap().evaluator(3, 1e-6, 0).unwrap();
        let mut m = provider("monte-carlo").unwrap().evaluator(3, 2e-3, 1).unwrap();
        for p in [0.3, 0.6, 0.9] {
            let a = s.r_e1(p).unwrap();
            let b = m.r_e1(p).unwrap();
            assert!(a.lo <= b.hi && b.lo <= a.hi, "p={p} solver {a:?} mc {b:?}");
        }
        assert!(s.certified() && !m.certified());
    }

    #[test]
    fn registry() {
        assert_eq!(providers().len(), 3);
        assert!(provider("auto").is_ok());
        let err = provider("exact").unwrap_err();
        assert!(err.to_string().contains("solver"));
    }

    #[test]
    fn one_step_lower_bound_at_p_one() {
        // R(e1, d, 1) >= 1/(2d)
        let spec = KilledWalkSpec::new(4, 1.0).unwrap();
        let est = hitting_mc_with(spec, &Site::unit(4, 0), 20_000, 3, 2_000).unwrap();
        assert!(est.p_hat >= 1.0 / 8.0);
    }
}
