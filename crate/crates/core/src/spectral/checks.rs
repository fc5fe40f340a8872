//! Numerical checks of the eigenvector identity, the moment ODE and the
//! random-walk heat kernel.

use serde::{Deserialize, Serialize};

use super::ode::{integrate, OdeStats};
use super::{mu_of, origin_row_reach, FixedPointResult, MomentOperator, SpectralError};
use crate::engine::{weighted_mean, SimParams, WeightField};
use crate::killedwalk::{hitting_solve_with, HittingSolution, KilledWalkSpec, SolveOptions};
use crate::lattice::CenteredBox;
use crate::model::ModelRef;
use crate::stats::{agree_within, MeanEstimate};

/// Residuals of `G H = mu H` with `H(x) = R(x, d, p)` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub p: f64,
    pub mu: f64,
    pub radius: usize,
    pub origin_residual: f64,
    /// Largest residual over interior sites other than the origin.
    pub off_origin_residual: f64,
    pub max_residual: f64,
    /// Residual allowed by the errors in `H` and in `p`.
    pub bound: f64,
    pub within_bound: bool,
    pub h_error: f64,
    pub harmonic_residual: f64,
}

fn solve_h(dim: usize, p: f64, radius: usize, h_tol: f64) -> Result<HittingSolution, SpectralError> {
    let spec = KilledWalkSpec::new(dim, p)?;
    let mut opts = SolveOptions::new(dim, radius.max(3), h_tol);
    opts.sites = origin_row_reach(dim);
    Ok(hitting_solve_with(spec, &opts)?)
}

/// Residuals at an arbitrary `p`, with `p_error` the uncertainty in the
/// root that the bound should absorb. `H` is the zero-boundary solution;
/// rows are checked on sites whose neighbors all lie in the box.
pub fn eigencheck_at(
    model: ModelRef,
    lambda: f64,
    dim: usize,
    p: f64,
    p_error: f64,
    radius: usize,
    h_tol: f64,
) -> Result<EigenReport, SpectralError> {
    if radius < 3 {
        return Err(SpectralError::BadRadius(radius));
    }
    let sol = solve_h(dim, p, radius, h_tol)?;
    let grid = sol.grid().clone();
    let h = sol.lower_field();
    let op = MomentOperator::new(model, lambda, dim)?;
    let gh = op.apply(&grid, h)?;
    let mu = mu_of(lambda, dim, p);
    let o = grid.origin();
    let origin_residual = (gh[o] - mu * h[o]).abs();
    let off_origin_residual = (0..grid.len())
        .filter(|&i| i != o && !grid.is_boundary(i))
        .map(|i| (gh[i] - mu * h[i]).abs())
        .fold(0.0, f64::max);
    let ld = lambda * dim as f64;
    let d = dim as f64;
    // H(e1) and its neighbors are within twice the half-gap of R; the root
    // moves K by at most |K'| p_error with R' <= 1/(1-p)
    let eps_r = 2.0 * sol.error_bound;
    let k_slope = 4.0 * ld / (p * p) + (4.0 * ld * d / p + 2.0 * ld) / (1.0 - p).max(1e-12);
    let bound = 2.0 * (4.0 * ld * d * eps_r + k_slope * p_error + 4.0 * ld / p * sol.harmonic_residual * (2.0 * d + 1.0));
    let max_residual = origin_residual.max(off_origin_residual);
    Ok(EigenReport {
        p,
        mu,
        radius: grid.radius(),
        origin_residual,
        off_origin_residual,
        max_residual,
        bound,
        within_bound: max_residual <= bound,
        h_error: sol.error_bound,
        harmonic_residual: sol.harmonic_residual,
    })
}

/// Check the eigen-identity at the fixed point.
pub fn eigencheck(result: &FixedPointResult, radius: usize, h_tol: f64) -> Result<EigenReport, SpectralError> {
    eigencheck_at(
        result.model,
        result.lambda,
        result.dim,
        result.p_star,
        result.bracket.half_width(),
        radius,
        h_tol,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { rtol: 1e-8, atol: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    /// `F_t(O)` at each sample time.
    pub origin: Vec<f64>,
    /// `F_t` on the whole box at the last sample time.
    pub last: Vec<f64>,
    pub stats: OdeStats,
}

/// Integrate `dF/dt = G F` on the box with zero exterior.
pub fn moment_flow(
    op: &MomentOperator,
    grid: &CenteredBox,
    f0: &[f64],
    times: &[f64],
    opts: &FlowOptions,
) -> Result<FlowTrajectory, SpectralError> {
    if f0.len() != grid.len() {
        return Err(SpectralError::SizeMismatch {
            expected: grid.len(),
            actual: f0.len(),
        });
    }
    let o = grid.origin();
    let mut origin = vec![0.0; times.len()];
    let mut last = f0.to_vec();
    let h0 = 0.1 / op.lipschitz_bound();
    let stats = integrate(
        &mut |y, out| op.apply_into(grid, y, out),
        f0,
        times,
        opts.rtol,
        opts.atol,
        h0,
        &mut |i, y| {
            origin[i] = y[o];
            if i + 1 == times.len() {
                last.copy_from_slice(y);
            }
        },
    )?;
    Ok(FlowTrajectory {
        times: times.to_vec(),
        origin,
        last,
        stats,
    })
}

/// `F_t(O) / H(O)` against `exp(mu t)` when the flow starts at `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenflowReport {
    pub mu: f64,
    pub times: Vec<f64>,
    pub ratio: Vec<f64>,
    pub max_relative_error: f64,
}

pub fn eigenflow(result: &FixedPointResult, times: &[f64], h_tol: f64) -> Result<EigenflowReport, SpectralError> {
    let sol = solve_h(result.dim, result.p_star, 3, h_tol)?;
    let op = MomentOperator::new(result.model, result.lambda, result.dim)?;
    let h = sol.lower_field();
    let flow = moment_flow(&op, sol.grid(), h, times, &FlowOptions::default())?;
    let h_o = h[sol.grid().origin()];
    let ratio: Vec<f64> = flow.origin.iter().map(|f| f / h_o).collect();
    let max_relative_error = times
        .iter()
        .zip(&ratio)
        .map(|(&t, r)| {
            let want = (result.mu * t).exp();
            (r - want).abs() / want
        })
        .fold(0.0, f64::max);
    Ok(EigenflowReport {
        mu: result.mu,
        times: times.to_vec(),
        ratio,
        max_relative_error,
    })
}

/// Largest `2 lambda t` the series is evaluated for.
const MAX_SERIES_ARG: f64 = 1e6;

/// `(exp(-x) I_0(x))^d` with `x = 2 lambda t`, summed in log space.
pub fn heat_kernel_series(lambda: f64, dim: usize, t: f64) -> Result<f64, SpectralError> {
    let x = 2.0 * lambda * t;
    if !(x >= 0.0 && x <= MAX_SERIES_ARG) {
        return Err(SpectralError::SeriesNonConvergence(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let half_log = (0.5 * x).ln();
    let mut log_fact = 0.0;
    let mut sum = 0.0;
    let mut k = 0u64;
    loop {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let term = (2.0 * k as f64 * half_log - 2.0 * log_fact - x).exp();
        sum += term;
        if k as f64 > 0.5 * x + 10.0 && term < 1e-18 * sum {
            break;
        }
        k += 1;
        if k > 100_000_000 {
            return Err(SpectralError::SeriesNonConvergence(x));
        }
    }
    Ok(sum.powi(dim as i32))
}

/// Largest box the uniformized evaluation builds before falling back to
/// one coordinate at a time.
const MAX_UNIFORMIZATION_SITES: usize = 1 << 21;

/// `p_t(O, O)` for the walk jumping at rate `lambda` to each neighbor, by
/// uniformization on a box large enough that the walk cannot reach the
/// boundary within the Poisson-relevant number of jumps. Returns the value
/// and the box dimension used (`1` when the coordinates were handled
/// separately).
pub fn heat_kernel_uniformized(lambda: f64, dim: usize, t: f64) -> Result<(f64, usize), SpectralError> {
    if lambda * t == 0.0 {
        return Ok((1.0, dim));
    }
    let full = uniformized_terms(2.0 * lambda * dim as f64 * t);
    let side = 2 * full + 1;
    let fits = (side as f64).powi(dim as i32) <= MAX_UNIFORMIZATION_SITES as f64;
    if fits {
        Ok((uniformize(dim, 2.0 * lambda * dim as f64 * t)?, dim))
    } else {
        Ok((uniformize(1, 2.0 * lambda * t)?.powi(dim as i32), 1))
    }
}

fn uniformized_terms(mean: f64) -> usize {
    (mean + 12.0 * mean.sqrt() + 30.0).ceil() as usize
}

/// Return probability after Poisson(`mean`) jumps of the discrete walk.
fn uniformize(dim: usize, mean: f64) -> Result<f64, SpectralError> {
    let n = uniformized_terms(mean);
    // distance n/2 suffices: a path of at most n steps that returns to O
    // never goes further
    let grid = CenteredBox::new(dim, n / 2 + 1)?;
    let mut v = vec![0.0; grid.len()];
    let mut next = vec![0.0; grid.len()];
    let o = grid.origin();
    v[o] = 1.0;
    let share = 1.0 / (2 * dim) as f64;
    let mut log_w = -mean;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            log_w += mean.ln() - (k as f64).ln();
            for (i, x) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for slot in 0..2 * dim {
                    if let Some(j) = grid.neighbor(i, slot) {
                        s += v[j];
                    }
                }
                *x = share * s;
            }
            std::mem::swap(&mut v, &mut next);
        }
        total += log_w.exp() * v[o];
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedMean {
    pub side: usize,
    pub seed: u64,
    pub estimate: MeanEstimate,
    pub within_3_sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelReport {
    pub lambda: f64,
    pub dim: usize,
    pub t: f64,
    pub series: f64,
    pub uniformized: f64,
    /// Dimension of the uniformization box.
    pub box_dim: usize,
    pub simulated: Option<SimulatedMean>,
}

/// Compare the series and the uniformized value, and optionally the
/// simulated `E zeta_t(O)` from `zeta_0 = 1_O` on a torus of side `side`
/// (`replicates` runs, seed `seed`).
pub fn heat_kernel_check(
    lambda: f64,
    dim: usize,
    t: f64,
    simulate: Option<(ModelRef, usize, u64, u64)>,
) -> Result<HeatKernelReport, SpectralError> {
    let series = heat_kernel_series(lambda, dim, t)?;
    let (uniformized, box_dim) = heat_kernel_uniformized(lambda, dim, t)?;
    let simulated = match simulate {
        None => None,
        Some((model, side, replicates, seed)) => {
            let params = SimParams {
                dim,
                lambda,
                model,
                side,
                t_max: t,
                seed,
            };
            let torus = params.validate()?;
            let init = WeightField::point_mass(torus.len(), torus.origin(), params.drift());
            let est = weighted_mean(&params, &init, &[t], torus.origin(), replicates)?[0];
            Some(SimulatedMean {
                side,
                seed,
                estimate: est,
                within_3_sigma: agree_within(est.mean, est.se, series, 0.0, 3.0),
            })
        }
    };
    Ok(HeatKernelReport {
        lambda,
        dim,
        t,
        series,
        uniformized,
        box_dim,
        simulated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::killedwalk;
    use crate::spectral::{solve_fixed_point, FixedPointOptions};

    fn solver_opts(tol: f64) -> FixedPointOptions {
        FixedPointOptions {
            tol,
            provider: killedwalk::provider("solver").unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn heat_kernel_values() {
        assert_eq!(heat_kernel_series(0.3, 3, 0.0).unwrap(), 1.0);
        let v = heat_kernel_series(0.5, 1, 1.0).unwrap();
        assert!((v - 0.465759607593640437).abs() < 1e-14);
        let (u, _) = heat_kernel_uniformized(0.5, 1, 1.0).unwrap();
        assert!((u - v).abs() < 1e-13);
        for (lambda, dim, t) in [(0.2, 2, 3.0), (0.1, 3, 5.0), (0.5, 2, 20.0)] {
            let s = heat_kernel_series(lambda, dim, t).unwrap();
            let (u, _) = heat_kernel_uniformized(lambda, dim, t).unwrap();
            assert!((s - u).abs() < 1e-12, "{lambda} {dim} {t}: {s} vs {u}");
        }
        assert!(heat_kernel_series(1.0, 1, 1e7).is_err());
    }

    #[test]
    fn heat_kernel_scaling_stays_positive() {
        for dim in 1..=3 {
            let m = (1..=50)
                .map(|t| {
                    let t = f64::from(t);
                    heat_kernel_series(0.3, dim, t).unwrap() * t.powf(dim as f64 / 2.0)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(m > 0.05, "d={dim} min {m}");
        }
    }

    #[test]
    fn eigen_identity_at_root_and_control() {
        let fp = solve_fixed_point(0.2, 1, ModelRef::threshold(), &solver_opts(1e-9)).unwrap();
        let r = eigencheck(&fp, 4, 1e-10).unwrap();
        assert!(r.max_residual < 1e-7, "{r:?}");
        assert!(r.within_bound, "{r:?}");
        assert!(r.off_origin_residual < 1e-9);
        let c = eigencheck_at(fp.model, fp.lambda, 1, fp.p_star + 0.05, fp.bracket.half_width(), 4, 1e-10).unwrap();
        assert!(!c.within_bound && c.origin_residual > 1e-2, "{c:?}");
    }

    #[test]
    fn flow_from_zero_and_origin_derivative() {
        let grid = CenteredBox::new(1, 6).unwrap();
        let op = MomentOperator::new(ModelRef::threshold(), 0.2, 1).unwrap();
        let z = moment_flow(&op, &grid, &vec![0.0; grid.len()], &[1.0, 2.0], &FlowOptions::default()).unwrap();
        assert!(z.origin.iter().all(|&v| v == 0.0));
        let mut f0 = vec![0.0; grid.len()];
        f0[grid.origin()] = 1.0;
        let dt = 1e-6;
        let f = moment_flow(&op, &grid, &f0, &[dt], &FlowOptions { rtol: 1e-12, atol: 1e-16 }).unwrap();
        let slope = (f.origin[0] - 1.0) / dt;
        assert!((slope - 0.6).abs() < 1e-5, "{slope}");
    }

    #[test]
    fn eigenflow_grows_at_mu() {
        let fp = solve_fixed_point(0.2, 1, ModelRef::threshold(), &solver_opts(1e-9)).unwrap();
        let times: Vec<f64> = (1..=5).map(f64::from).collect();
        let r = eigenflow(&fp, &times, 1e-10).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }
}
