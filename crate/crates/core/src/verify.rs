//! Property suites run by `verify`: each checks one identity end to end and
//! reports pass/fail with the numbers behind it.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dual::{run_dual_ensemble, DualParams};
use crate::engine::{forward_ensemble, run_coupled, SimParams, SpinField, WeightField};
use crate::error::{Error, UnknownStrategy};
use crate::estimate::supermultiplicativity;
use crate::killedwalk::{self, check_continuity, continuity_scan, hitting_solve, KilledWalkSpec};
use crate::model::ModelRef;
use crate::spectral::{
    eigencheck, eigencheck_at, heat_kernel_check, heat_kernel_series, solve_fixed_point, FixedPointOptions,
};
use crate::stats::{agree_within, binomial_se, Z95};

/// Shared knobs. Suites read the fields that apply to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub model: ModelRef,
    pub dim: usize,
    pub lambda: f64,
    /// Torus side for the coupling suite.
    pub side: usize,
    pub t_max: f64,
    /// Seeded runs in the coupling suite.
    pub runs: u64,
    /// Replicates for the statistical suites.
    pub replicates: u64,
    pub seed: u64,
    /// Shift applied to the fixed point before the eigencheck; a nonzero
    /// value is a negative control and should fail.
    pub perturb_p: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            model: ModelRef::threshold(),
            dim: 1,
            lambda: 0.2,
            side: 8,
            t_max: 5.0,
            runs: 100,
            replicates: 20_000,
            seed: 1,
            perturb_p: 0.0,
        }
    }
}

impl VerifyConfig {
    /// Cap replicate counts so a run fits in roughly `seconds` of wall time.
    pub fn with_budget(mut self, seconds: f64) -> Self {
        const REPLICATES_PER_SECOND: f64 = 4_000.0;
        let cap = (seconds * REPLICATES_PER_SECOND).max(1_000.0) as u64;
        self.replicates = self.replicates.min(cap);
        self.runs = self.runs.min((seconds * 10.0).max(10.0) as u64);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    /// `(passed, details)`; errors are numerical failures, not violations.
    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error>;
}

impl std::fmt::Debug for dyn Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

struct Coupling;
struct Duality;
struct Eigencheck;
struct Harmonicity;
struct Supermultiplicativity;
struct HeatKernel;

static SUITES: [&dyn Suite; 6] = [&Coupling, &Duality, &Eigencheck, &Harmonicity, &Supermultiplicativity, &HeatKernel];

pub fn suites() -> &'static [&'static dyn Suite] {
    &SUITES
}

pub fn suite(name: &str) -> Result<&'static dyn Suite, UnknownStrategy> {
    SUITES.iter().copied().find(|s| s.name() == name).ok_or_else(|| UnknownStrategy {
        kind: "suite",
        name: name.to_string(),
        known: SUITES.iter().map(|s| s.name()).collect(),
    })
}

/// Run the named suites (all when `names` is empty) in order.
pub fn run_suites(names: &[String], cfg: &VerifyConfig) -> Result<VerifyReport, Error> {
    let chosen: Vec<&dyn Suite> = if names.is_empty() {
        suites().to_vec()
    } else {
        names.iter().map(|n| suite(n)).collect::<Result<_, _>>()?
    };
    let mut out = Vec::with_capacity(chosen.len());
    for s in chosen {
        let start = Instant::now();
        let (passed, details) = s.check(cfg)?;
        out.push(SuiteReport {
            suite: s.name().to_string(),
            passed,
            elapsed_secs: start.elapsed().as_secs_f64(),
            details,
        });
    }
    Ok(VerifyReport {
        passed: out.iter().all(|r| r.passed),
        suites: out,
    })
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl Suite for Coupling {
    fn name(&self) -> &'static str {
        "coupling"
    }

    /// `eta_t(x) = 1` iff `zeta_t(x) > 0`, after every event and at every
    /// sample, from the all-ones start and a positive weight field.
    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        let params = SimParams {
            dim: cfg.dim,
            lambda: cfg.lambda,
            model: cfg.model,
            side: cfg.side,
            t_max: cfg.t_max,
            seed: cfg.seed,
        };
        let torus = params.validate()?;
        let init = WeightField::uniform(torus.len(), 1.0, params.drift());
        let times = grid(0.0, cfg.t_max, cfg.t_max / 20.0);
        let mut sample_mismatches = 0u64;
        let mut event_mismatches = 0u64;
        let mut events = 0u64;
        let mut checked = 0u64;
        for r in 0..cfg.runs {
            let tr = run_coupled(&params, &init, &times, r)?;
            sample_mismatches += tr.sample_mismatches() as u64;
            event_mismatches += tr.event_mismatches;
            events += tr.events;
            checked += (tr.samples.len() * torus.len()) as u64;
        }
        let passed = sample_mismatches == 0 && event_mismatches == 0;
        Ok((
            passed,
            json!({
                "runs": cfg.runs,
                "events": events,
                "sampled_sites": checked,
                "sample_mismatches": sample_mismatches,
                "event_mismatches": event_mismatches,
            }),
        ))
    }
}

impl Suite for Duality {
    fn name(&self) -> &'static str {
        "duality"
    }

    /// Dual survival against the forward all-ones torus on two sizes.
    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        let times = [1.0, 2.0, 4.0];
        let n = cfg.replicates;
        let dual = run_dual_ensemble(&DualParams::new(cfg.model, cfg.dim, cfg.lambda, cfg.seed), &times, n)?;
        let mut forward = Vec::new();
        for side in [64, 128] {
            let params = SimParams {
                dim: cfg.dim,
                lambda: cfg.lambda,
                model: cfg.model,
                side,
                t_max: times[2],
                seed: cfg.seed ^ side as u64,
            };
            let torus = params.validate()?;
            forward.push(forward_ensemble(&params, &SpinField::all_ones(torus.len()), &times, n)?);
        }
        let mut rows = Vec::new();
        let mut passed = true;
        for (i, &t) in times.iter().enumerate() {
            let pd = dual.survivors[i] as f64 / n as f64;
            let sd = binomial_se(dual.survivors[i], n);
            let (k64, k128) = (forward[0].origin_counts[i], forward[1].origin_counts[i]);
            let (p64, p128) = (k64 as f64 / n as f64, k128 as f64 / n as f64);
            let (s64, s128) = (binomial_se(k64, n), binomial_se(k128, n));
            let sizes_agree = agree_within(p64, s64, p128, s128, 3.0);
            let dual_agrees = agree_within(pd, sd, p128, s128, 3.0);
            passed &= sizes_agree && dual_agrees;
            rows.push(json!({
                "t": t, "dual": pd, "dual_se": sd, "forward_64": p64, "forward_128": p128,
                "sizes_agree": sizes_agree, "dual_agrees": dual_agrees,
            }));
        }
        Ok((passed, json!({ "replicates": n, "rows": rows })))
    }
}

impl Suite for Eigencheck {
    fn name(&self) -> &'static str {
        "eigencheck"
    }

    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        const MAX_RESIDUAL: f64 = 1e-5;
        let opts = FixedPointOptions {
            tol: 1e-8,
            provider: killedwalk::provider("solver")?,
            ..Default::default()
        };
        let fp = solve_fixed_point(cfg.lambda, cfg.dim, cfg.model, &opts)?;
        let report = if cfg.perturb_p == 0.0 {
            eigencheck(&fp, 4, 1e-10)?
        } else {
            let p = (fp.p_star + cfg.perturb_p).clamp(1e-6, 1.0 - 1e-6);
            eigencheck_at(fp.model, fp.lambda, fp.dim, p, fp.bracket.half_width(), 4, 1e-10)?
        };
        let straddles = fp.k_interval.lo <= 0.0 && 0.0 <= fp.k_interval.hi;
        let passed = report.within_bound && report.max_residual <= MAX_RESIDUAL && straddles;
        Ok((
            passed,
            json!({ "fixed_point": fp, "report": report, "k_straddles_zero": straddles, "perturb_p": cfg.perturb_p }),
        ))
    }
}

impl Suite for Harmonicity {
    fn name(&self) -> &'static str {
        "harmonicity"
    }

    /// One-dimensional closed form, harmonic residuals and the increment
    /// bound in `p`.
    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        let mut rows = Vec::new();
        let mut passed = true;
        for k in 2..=9 {
            let p = f64::from(k) / 10.0;
            let sol = hitting_solve(KilledWalkSpec::new(1, p)?, 2, 1e-8)?;
            let exact = p / (1.0 + (1.0 - p * p).sqrt());
            let err = (sol.e1().mid() - exact).abs();
            let ok = err <= 1e-6 && sol.harmonic_residual <= 1e-6;
            passed &= ok;
            rows.push(json!({ "p": p, "r_e1": sol.e1(), "exact": exact, "error": err, "harmonic_residual": sol.harmonic_residual }));
        }
        let dim = cfg.dim.min(killedwalk::MAX_SOLVER_DIM);
        let scan = continuity_scan(dim, &grid(0.1, 0.9, 0.1), 1e-7)?;
        let violations = check_continuity(&scan);
        passed &= violations.is_empty();
        Ok((
            passed,
            json!({ "closed_form": rows, "continuity_dim": dim, "continuity_violations": violations }),
        ))
    }
}

impl Suite for Supermultiplicativity {
    fn name(&self) -> &'static str {
        "supermultiplicativity"
    }

    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        let times = grid(0.0, 6.0, 0.5);
        let params = DualParams::new(cfg.model, cfg.dim, cfg.lambda, cfg.seed);
        let curve = run_dual_ensemble(&params, &times, cfg.replicates)?.survival_curve(Z95)?;
        let (pairs, violations) = supermultiplicativity(&curve, 3.0);
        Ok((
            violations.is_empty(),
            json!({ "replicates": cfg.replicates, "pairs_checked": pairs, "violations": violations }),
        ))
    }
}

impl Suite for HeatKernel {
    fn name(&self) -> &'static str {
        "heat-kernel"
    }

    /// Series against uniformization, `t^{d/2} p_t` bounded below, and the
    /// simulated mean of the weight process from a point mass.
    fn check(&self, cfg: &VerifyConfig) -> Result<(bool, Value), Error> {
        let mut rows = Vec::new();
        let mut passed = true;
        for t in [0.5, 1.0, 2.0, 5.0] {
            let r = heat_kernel_check(cfg.lambda, cfg.dim, t, None)?;
            let ok = (r.series - r.uniformized).abs() <= 1e-10;
            passed &= ok;
            rows.push(json!({ "t": t, "series": r.series, "uniformized": r.uniformized, "agree": ok }));
        }
        let shape_min = (1..=50)
            .map(|t| {
                let t = f64::from(t);
                heat_kernel_series(cfg.lambda, cfg.dim, t).map(|v| v * t.powf(cfg.dim as f64 / 2.0))
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        passed &= cfg.lambda == 0.0 || shape_min > 0.0;
        let side = 16;
        let sim = heat_kernel_check(cfg.lambda, cfg.dim, 1.0, Some((cfg.model, side, cfg.replicates, cfg.seed)))?;
        let simulated = sim.simulated.expect("requested");
        passed &= simulated.within_3_sigma;
        Ok((
            passed,
            json!({ "rows": rows, "scaled_min": shape_min, "simulated": simulated, "series_at_1": sim.series }),
        ))
    }
}
