//! Second-moment operators, the fixed-point equation for the lower bound,
//! the decay-rate sandwich and its large-dimension limit.

mod checks;
mod ode;

pub use checks::{
    eigencheck, eigencheck_at, eigenflow, heat_kernel_check, heat_kernel_series, heat_kernel_uniformized, moment_flow,
    EigenReport, EigenflowReport, FlowOptions, FlowTrajectory, HeatKernelReport, SimulatedMean,
};
pub use ode::{integrate, OdeError, OdeStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::killedwalk::{self, HittingEvaluator, HittingProvider, KilledWalkError};
use crate::lattice::{CenteredBox, LatticeError, Site};
use crate::model::{limit_fixed_point, ContactModel, ModelRef};
use crate::stats::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("lower bound needs 0 < lambda < 1/(2d); got lambda = {lambda}, d = {dim}")]
    OutsideSubcritical { lambda: f64, dim: usize },
    #[error("infection rate must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("fixed point not resolved to {tol:.1e}: bracket [{lo}, {hi}] after exhausting refinements ({method})")]
    Unresolved { lo: f64, hi: f64, tol: f64, method: String },
    #[error("could not find p with certainly positive K down to p = {0:e}")]
    NoPositiveStart(f64),
    #[error("box radius must be at least 3, got {0}")]
    BadRadius(usize),
    #[error("vector has {actual} entries, box has {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("heat kernel series did not converge for 2 lambda t = {0}")]
    SeriesNonConvergence(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Hitting(#[from] KilledWalkError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
}

fn check_lambda(lambda: f64, dim: usize) -> Result<(), SpectralError> {
    if dim == 0 {
        return Err(SpectralError::ZeroDimension);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SpectralError::BadLambda(lambda));
    }
    Ok(())
}

/// `true` when `0 < lambda < 1/(2d)`.
pub fn is_subcritical(lambda: f64, dim: usize) -> bool {
    lambda > 0.0 && 2.0 * lambda * (dim as f64) < 1.0
}

/// The second-moment operator `G` of a model, acting on functions on a
/// centered box with zero exterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOperator {
    pub model: ModelRef,
    pub lambda: f64,
    pub dim: usize,
}

impl MomentOperator {
    pub fn new(model: ModelRef, lambda: f64, dim: usize) -> Result<Self, SpectralError> {
        check_lambda(lambda, dim)?;
        Ok(MomentOperator { model, lambda, dim })
    }

    /// `1 + 8 lambda d + 4 lambda d^2`, a bound on the absolute row sums.
    pub fn lipschitz_bound(&self) -> f64 {
        let ld = self.lambda * self.dim as f64;
        1.0 + 8.0 * ld + 4.0 * ld * self.dim as f64
    }

    /// Origin row as `(box index, coefficient)`, dropping entries outside
    /// the box.
    fn origin_row(&self, grid: &CenteredBox) -> Vec<(usize, f64)> {
        self.model
            .origin_row(self.lambda, self.dim)
            .into_iter()
            .filter_map(|(site, c)| grid.index(&site).map(|i| (i, c)))
            .collect()
    }

    /// `out = G f` on the box.
    pub fn apply_into(&self, grid: &CenteredBox, f: &[f64], out: &mut [f64]) {
        let diag = -4.0 * self.lambda * self.dim as f64;
        let off = 2.0 * self.lambda;
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for slot in 0..2 * self.dim {
                if let Some(j) = grid.neighbor(i, slot) {
                    s += f[j];
                }
            }
            *o = diag * f[i] + off * s;
        }
        let o = grid.origin();
        out[o] = self.origin_row(grid).iter().map(|&(j, c)| c * f[j]).sum();
    }

    pub fn apply(&self, grid: &CenteredBox, f: &[f64]) -> Result<Vec<f64>, SpectralError> {
        if f.len() != grid.len() || grid.dim() != self.dim {
            return Err(SpectralError::SizeMismatch {
                expected: grid.len(),
                actual: f.len(),
            });
        }
        let mut out = vec![0.0; f.len()];
        self.apply_into(grid, f, &mut out);
        Ok(out)
    }
}

/// `K(p)` as an interval, from an interval for `R(e1, d, p)`. `K` is
/// decreasing in `R`, so the ends swap.
pub fn k_function(model: &dyn ContactModel, lambda: f64, dim: usize, p: f64, r_e1: Interval) -> Interval {
    let a = model.fixed_point_function(lambda, dim, p, r_e1.hi);
    let b = model.fixed_point_function(lambda, dim, p, r_e1.lo);
    Interval::new(a.min(b), a.max(b))
}

/// `K` at `p` with `R` from an evaluator.
pub fn k_interval(
    model: &dyn ContactModel,
    lambda: f64,
    dim: usize,
    p: f64,
    eval: &mut dyn HittingEvaluator,
) -> Result<Interval, SpectralError> {
    Ok(k_function(model, lambda, dim, p, eval.r_e1(p)?))
}

/// `K(1)` from the one-step bound `R(e1, d, 1) >= 1/(2d)`; an upper bound.
pub fn k_at_one_upper(model: &dyn ContactModel, lambda: f64, dim: usize) -> f64 {
    model.fixed_point_function(lambda, dim, 1.0, 1.0 / (2.0 * dim as f64))
}

/// `4 lambda d (1/p - 1)`.
pub fn mu_of(lambda: f64, dim: usize, p: f64) -> f64 {
    4.0 * lambda * dim as f64 * (1.0 / p - 1.0)
}

#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    /// Target width of the bracket around the root.
    pub tol: f64,
    /// Half-width asked of `R`; defaults to `tol / 10`.
    pub r_accuracy: Option<f64>,
    pub provider: &'static dyn HittingProvider,
    pub seed: u64,
    pub max_refinements: u32,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-6,
            r_accuracy: None,
            provider: killedwalk::provider("auto").expect("registered"),
            seed: 0x5eed,
            max_refinements: 6,
        }
    }
}

/// Root of `K` with its certified bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub model: ModelRef,
    pub lambda: f64,
    pub dim: usize,
    /// Midpoint of `bracket`.
    pub p_star: f64,
    /// `K > 0` at the left end and `K < 0` at the right end.
    pub bracket: Interval,
    pub mu: f64,
    /// `mu` over the bracket.
    pub mu_interval: Interval,
    /// `R(e1, d, p*)`.
    pub r_e1: Interval,
    /// Range of `K` over the bracket: `[K_lo(right end), K_hi(left end)]`.
    pub k_interval: Interval,
    /// Whether the `R` intervals are rigorous rather than statistical.
    pub certified: bool,
    pub method: String,
    pub evaluations: u32,
}

/// Solve `K(p) = 0` on `(0, 1)` by bisection with interval `K`.
///
/// Two bisections run: one on the lower end of the `K` interval, whose last
/// positive point `a` has `K(a) > 0`, and one on the upper end, whose last
/// negative point `b` has `K(b) < 0`. Since `K` is decreasing, the root is
/// in `[a, b]`. If that is wider than `tol`, `R` is refined and both runs
/// repeat.
pub fn solve_fixed_point(
    lambda: f64,
    dim: usize,
    model: ModelRef,
    opts: &FixedPointOptions,
) -> Result<FixedPointResult, SpectralError> {
    check_lambda(lambda, dim)?;
    if !is_subcritical(lambda, dim) {
        return Err(SpectralError::OutsideSubcritical { lambda, dim });
    }
    let m = &*model;
    let mut eval = opts
        .provider
        .evaluator(dim, opts.r_accuracy.unwrap_or(opts.tol / 10.0), opts.seed)?;
    let k1 = k_at_one_upper(m, lambda, dim);
    debug_assert!(k1 < 0.0);
    let mut evaluations = 0u32;
    let mut refinements = 0;
    loop {
        let mut k = |p: f64| -> Result<Interval, SpectralError> {
            evaluations += 1;
            k_interval(m, lambda, dim, p, eval.as_mut())
        };
        let mut start = 0.5;
        while k(start)?.lo <= 0.0 {
            start /= 2.0;
            if start < 1e-12 {
                return Err(SpectralError::NoPositiveStart(start));
            }
        }
        let (mut a, mut b) = (start, 1.0);
        while b - a > opts.tol / 4.0 {
            let mid = 0.5 * (a + b);
            if k(mid)?.lo > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let left = a;
        let (mut a, mut b) = (left, 1.0);
        while b - a > opts.tol / 4.0 {
            let mid = 0.5 * (a + b);
            if k(mid)?.hi < 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        let right = if b == 1.0 { 1.0 } else { b };
        if right - left <= opts.tol {
            let k_left = k(left)?;
            let k_right = if right == 1.0 { Interval::point(k1) } else { k(right)? };
            let p_star = 0.5 * (left + right);
            let r_e1 = eval.r_e1(p_star)?;
            return Ok(FixedPointResult {
                model,
                lambda,
                dim,
                p_star,
                bracket: Interval::new(left, right),
                mu: mu_of(lambda, dim, p_star),
                mu_interval: Interval::new(mu_of(lambda, dim, right), mu_of(lambda, dim, left)),
                r_e1,
                k_interval: Interval::new(k_right.lo, k_left.hi),
                certified: eval.certified(),
                method: eval.describe(),
                evaluations,
            });
        }
        if refinements >= opts.max_refinements || !eval.refine() {
            return Err(SpectralError::Unresolved {
                lo: left,
                hi: right,
                tol: opts.tol,
                method: eval.describe(),
            });
        }
        refinements += 1;
    }
}

/// Decay-rate sandwich `-mu <= I <= 2 lambda d - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub model: ModelRef,
    pub lambda: f64,
    pub dim: usize,
    /// `-mu`; absent outside `0 < lambda < 1/(2d)` (except `lambda = 0`).
    pub lower: Option<f64>,
    /// `-mu` over the fixed-point bracket.
    pub lower_interval: Option<Interval>,
    pub upper: f64,
    pub fixed_point: Option<FixedPointResult>,
    pub warning: Option<String>,
}

pub fn rate_bounds(lambda: f64, dim: usize, model: ModelRef, opts: &FixedPointOptions) -> Result<RateBounds, SpectralError> {
    check_lambda(lambda, dim)?;
    let upper = 2.0 * lambda * dim as f64 - 1.0;
    let mut out = RateBounds {
        model,
        lambda,
        dim,
        lower: None,
        lower_interval: None,
        upper,
        fixed_point: None,
        warning: None,
    };
    if lambda == 0.0 {
        // pure death: the rate is exactly -1
        out.lower = Some(-1.0);
        out.lower_interval = Some(Interval::point(-1.0));
        out.upper = -1.0;
        return Ok(out);
    }
    if !is_subcritical(lambda, dim) {
        out.warning = Some(format!(
            "lambda = {lambda} is not below 1/(2d) = {}; only the upper bound is available",
            0.5 / dim as f64
        ));
        return Ok(out);
    }
    let fp = solve_fixed_point(lambda, dim, model, opts)?;
    out.lower = Some(-fp.mu);
    out.lower_interval = Some(Interval::new(-fp.mu_interval.hi, -fp.mu_interval.lo));
    out.fixed_point = Some(fp);
    Ok(out)
}

/// One dimension of a large-dimension scan at infection rate `lambda / d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub dim: usize,
    pub scaled_lambda: f64,
    pub p_star: f64,
    pub bracket: Interval,
    pub r_e1: Interval,
    pub lower: f64,
    pub upper: f64,
    /// `|p* - 4 lambda/(1 + 2 lambda)|`.
    pub gap_to_limit_p: f64,
    /// `|-mu - (2 lambda - 1)|`.
    pub gap_to_limit_rate: f64,
    pub certified: bool,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitScan {
    pub model: ModelRef,
    pub lambda: f64,
    pub limit_p: f64,
    pub limit_rate: f64,
    pub rows: Vec<LimitRow>,
}

/// Bracket width used for dimensions handled by Monte Carlo.
pub const MC_FIXED_POINT_TOL: f64 = 1e-2;
/// Half-width asked of Monte Carlo `R` in the scan; the full interval
/// stays under `1e-3`.
pub const MC_SCAN_R_ACCURACY: f64 = 4e-4;

pub fn limit_scan(lambda: f64, dims: &[usize], model: ModelRef, opts: &FixedPointOptions) -> Result<LimitScan, SpectralError> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(SpectralError::OutsideSubcritical { lambda, dim: 1 });
    }
    let limit_p = limit_fixed_point(lambda);
    let limit_rate = 2.0 * lambda - 1.0;
    let rows = dims
        .iter()
        .map(|&d| {
            check_lambda(lambda, d)?;
            let scaled = lambda / d as f64;
            let mut o = opts.clone();
            if d > killedwalk::MAX_SOLVER_DIM && opts.provider.name() != "solver" {
                o.tol = o.tol.max(MC_FIXED_POINT_TOL);
                o.r_accuracy = Some(MC_SCAN_R_ACCURACY);
            }
            let fp = solve_fixed_point(scaled, d, model, &o)?;
            // 2 (lambda/d) d - 1, without the rounding of the product
            let upper = limit_rate;
            Ok(LimitRow {
                dim: d,
                scaled_lambda: scaled,
                p_star: fp.p_star,
                bracket: fp.bracket,
                r_e1: fp.r_e1,
                lower: -fp.mu,
                upper,
                gap_to_limit_p: (fp.p_star - limit_p).abs(),
                gap_to_limit_rate: (-fp.mu - limit_rate).abs(),
                certified: fp.certified,
                method: fp.method,
            })
        })
        .collect::<Result<Vec<_>, SpectralError>>()?;
    Ok(LimitScan {
        model,
        lambda,
        limit_p,
        limit_rate,
        rows,
    })
}

/// Sites needed around the origin for the origin row.
fn origin_row_reach(dim: usize) -> Vec<Site> {
    let e1 = Site::unit(dim, 0);
    let mut v = vec![e1.clone()];
    v.extend((0..2 * dim).filter_map(|s| e1.neighbor(s).ok()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Classic, ThresholdOne};
    use proptest::prelude::*;

    fn closed_form(p: f64) -> f64 {
        p / (1.0 + (1.0 - p * p).sqrt())
    }

    fn solver_opts(tol: f64) -> FixedPointOptions {
        FixedPointOptions {
            tol,
            provider: killedwalk::provider("solver").unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn k_matches_closed_form_arithmetic() {
        let r = closed_form(0.5);
        let k = k_function(&ThresholdOne, 0.2, 1, 0.5, Interval::point(r));
        assert!((k.mid() - 0.0641016151377546).abs() < 1e-12);
        // K grows without bound as p -> 0
        let tiny = k_function(&ThresholdOne, 0.2, 1, 1e-6, Interval::point(closed_form(1e-6)));
        assert!(tiny.lo > 1e5);
        for d in 1..=4 {
            let lambda = 0.9 / (2.0 * d as f64);
            assert!(k_at_one_upper(&ThresholdOne, lambda, d) < 0.0);
            assert!(k_at_one_upper(&Classic, lambda, d) < 0.0);
        }
    }

    #[test]
    fn one_dimensional_roots() {
        let fp = solve_fixed_point(0.2, 1, ModelRef::threshold(), &solver_opts(1e-9)).unwrap();
        assert!((fp.p_star - 0.518459097438615509).abs() < 1e-9, "{fp:?}");
        assert!((fp.mu - 0.743033971150864712).abs() < 1e-8);
        assert!(fp.k_interval.lo <= 0.0 && 0.0 <= fp.k_interval.hi);
        assert!(fp.bracket.width() <= 1e-9);
        assert!(fp.certified);
        let fp = solve_fixed_point(0.2, 1, ModelRef::classic(), &solver_opts(1e-9)).unwrap();
        assert!((fp.p_star - 0.496138938356833825).abs() < 1e-9);
        assert!((fp.mu - 0.812451549659709930).abs() < 1e-8);
    }

    #[test]
    fn outside_subcritical_is_rejected() {
        let err = solve_fixed_point(0.3, 2, ModelRef::threshold(), &solver_opts(1e-6)).unwrap_err();
        assert_eq!(err, SpectralError::OutsideSubcritical { lambda: 0.3, dim: 2 });
        assert!(solve_fixed_point(0.0, 2, ModelRef::threshold(), &solver_opts(1e-6)).is_err());
    }

    #[test]
    fn bounds() {
        let b = rate_bounds(0.0, 3, ModelRef::threshold(), &solver_opts(1e-6)).unwrap();
        assert_eq!((b.lower, b.upper), (Some(-1.0), -1.0));
        let b = rate_bounds(0.3, 2, ModelRef::threshold(), &solver_opts(1e-6)).unwrap();
        assert!(b.lower.is_none() && b.warning.is_some());
        assert!((b.upper - 0.2).abs() < 1e-15);
        let b = rate_bounds(0.2, 1, ModelRef::threshold(), &solver_opts(1e-6)).unwrap();
        assert!((b.lower.unwrap() + 0.743).abs() < 1e-3);
        assert!((b.upper + 0.6).abs() < 1e-15);
    }

    #[test]
    fn operator_rows() {
        let grid = CenteredBox::new(2, 3).unwrap();
        let lambda = 0.1;
        for model in [ModelRef::threshold(), ModelRef::classic()] {
            let g = MomentOperator::new(model, lambda, 2).unwrap();
            // column j of G is G applied to the indicator of j
            let x = Site::new([1, -2]);
            let xi = grid.index(&x).unwrap();
            let mut f = vec![0.0; grid.len()];
            f[xi] = 1.0;
            let col = g.apply(&grid, &f).unwrap();
            assert!((col[xi] + 0.8).abs() < 1e-15);
            for y in x.neighbors().unwrap() {
                let yi = grid.index(&y).unwrap();
                if !y.is_origin() {
                    assert!((col[yi] - 0.2).abs() < 1e-15);
                }
            }
            // single-site initial condition at O: (G f)(O) = 1 - 2 lambda d
            let mut f = vec![0.0; grid.len()];
            f[grid.origin()] = 1.0;
            let col = g.apply(&grid, &f).unwrap();
            assert!((col[grid.origin()] - 0.6).abs() < 1e-15);
        }
        // origin rows as displayed
        let ones = vec![1.0; grid.len()];
        let t = MomentOperator::new(ModelRef::threshold(), lambda, 2).unwrap();
        let row = t.apply(&grid, &ones).unwrap()[grid.origin()];
        // 1 - 2 ld + 2 ld + (2d - 1) 2 ld
        assert!((row - (1.0 + 3.0 * 0.4)).abs() < 1e-14);
        let c = MomentOperator::new(ModelRef::classic(), lambda, 2).unwrap();
        let row = c.apply(&grid, &ones).unwrap()[grid.origin()];
        assert!((row - (1.0 + 0.4)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn lipschitz_bound_holds(
            lambda in 0.0f64..0.5,
            dim in 1usize..4,
            seed in any::<u64>(),
            classic in any::<bool>(),
        ) {
            use rand::Rng;
            let model = if classic { ModelRef::classic() } else { ModelRef::threshold() };
            let g = MomentOperator::new(model, lambda, dim).unwrap();
            let grid = CenteredBox::new(dim, 3).unwrap();
            let mut rng = crate::rng::replicate_rng(seed, 0);
            let a: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ga = g.apply(&grid, &a).unwrap();
            let gb = g.apply(&grid, &b).unwrap();
            let lhs = ga.iter().zip(&gb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let rhs = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(lhs <= g.lipschitz_bound() * rhs * (1.0 + 1e-12));
        }

        #[test]
        fn k_is_decreasing(lambda in 0.01f64..0.49, k in 1usize..40) {
            let p1 = k as f64 / 41.0;
            let p2 = (k + 1) as f64 / 41.0;
            for m in [&ThresholdOne as &dyn ContactModel, &Classic] {
                let a = k_function(m, lambda, 1, p1, Interval::point(closed_form(p1)));
                let b = k_function(m, lambda, 1, p2, Interval::point(closed_form(p2)));
                prop_assert!(a.mid() > b.mid());
            }
        }
    }
}
