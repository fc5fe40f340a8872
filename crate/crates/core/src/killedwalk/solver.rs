//! Box solver for the hitting probabilities with certified truncation error.
//!
//! On `[-M, M]^d` the harmonic system is closed two ways: boundary values 0
//! (walks that leave the box never return) and boundary values 1 (walks that
//! leave the box always return). Gauss-Seidel started from 0 on the first
//! closure increases monotonically and never exceeds the true `R`; started
//! from 1 on the second it decreases and never falls below `R`. Every pair of
//! iterates is therefore a valid bracket, converged or not.

use super::{KilledWalkError, KilledWalkSpec};
use crate::lattice::{CenteredBox, Site};
use crate::stats::Interval;

/// Controls for [`hitting_solve_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Required half-width of the bracket at every requested site.
    pub tol: f64,
    /// Starting radius; grown by about half each time the bracket stalls.
    pub radius: usize,
    /// Sites whose bracket must meet `tol`.
    pub sites: Vec<Site>,
    pub max_unknowns: usize,
    /// Budget of single-site updates over all radii.
    pub max_updates: u64,
}

impl SolveOptions {
    pub fn new(dim: usize, radius: usize, tol: f64) -> Self {
        SolveOptions {
            tol,
            radius,
            sites: vec![Site::unit(dim, 0)],
            max_unknowns: 1 << 22,
            max_updates: 4_000_000_000,
        }
    }
}

/// Certified box solution: `lower <= R <= upper` pointwise on the box.
#[derive(Debug, Clone)]
pub struct HittingSolution {
    pub spec: KilledWalkSpec,
    pub radius: usize,
    pub tol: f64,
    /// Largest half-gap over the requested sites.
    pub error_bound: f64,
    /// Largest `|R(x) - (p/2d) sum R(y)|` of the lower field over interior
    /// `x != O`.
    pub harmonic_residual: f64,
    pub sweeps: u64,
    grid: CenteredBox,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HittingSolution {
    pub fn grid(&self) -> &CenteredBox {
        &self.grid
    }

    /// Zero-boundary field: the hitting probability of the walk that is also
    /// killed on leaving the box.
    pub fn lower_field(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_field(&self) -> &[f64] {
        &self.upper
    }

    pub fn bounds(&self, site: &Site) -> Option<Interval> {
        self.grid
            .index(site)
            .map(|i| Interval::new(self.lower[i], self.upper[i]))
    }

    /// Midpoint estimate of `R(site)`.
    pub fn value(&self, site: &Site) -> Option<f64> {
        self.bounds(site).map(|b| b.mid())
    }

    pub fn e1(&self) -> Interval {
        self.bounds(&Site::unit(self.spec.dim, 0))
            .expect("radius is at least 2")
    }
}

/// Solve on a box of starting radius `radius`, growing it until the bracket
/// at `e1` has half-width at most `tol`.
pub fn hitting_solve(spec: KilledWalkSpec, radius: usize, tol: f64) -> Result<HittingSolution, KilledWalkError> {
    hitting_solve_with(spec, &SolveOptions::new(spec.dim, radius, tol))
}

struct Closure {
    field: Vec<f64>,
}

impl Closure {
    /// Copy the free values of `old` into a field on `new_box` whose other
    /// entries are `edge`, then pin the origin to 1. Old values stay valid
    /// bounds, so warm starts keep the bracket certified.
    fn embed(old: Option<(&CenteredBox, &[f64])>, new_box: &CenteredBox, fixed: &[bool], edge: f64) -> Self {
        let mut field = vec![edge; new_box.len()];
        if let Some((ob, of)) = old {
            for (i, v) in field.iter_mut().enumerate() {
                if fixed[i] {
                    continue;
                }
                if let Some(j) = ob.index(&new_box.site(i)) {
                    *v = of[j];
                }
            }
        }
        field[new_box.origin()] = 1.0;
        Closure { field }
    }

    /// One in-place Gauss-Seidel sweep; returns the largest change.
    fn sweep(&mut self, fixed: &[bool], strides: &[usize], coef: f64) -> f64 {
        let f = &mut self.field;
        let mut delta = 0.0f64;
        for i in 0..f.len() {
            if fixed[i] {
                continue;
            }
            let mut s = 0.0;
            for &st in strides {
                s += f[i + st] + f[i - st];
            }
            let v = coef * s;
            delta = delta.max((v - f[i]).abs());
            f[i] = v;
        }
        delta
    }
}

fn harmonic_residual(field: &[f64], fixed: &[bool], strides: &[usize], coef: f64) -> f64 {
    (0..field.len())
        .filter(|&i| !fixed[i])
        .map(|i| {
            let s: f64 = strides.iter().map(|&st| field[i + st] + field[i - st]).sum();
            (field[i] - coef * s).abs()
        })
        .fold(0.0, f64::max)
}

pub fn hitting_solve_with(spec: KilledWalkSpec, opts: &SolveOptions) -> Result<HittingSolution, KilledWalkError> {
    let (d, p) = (spec.dim, spec.p);
    if opts.radius < 2 {
        return Err(KilledWalkError::BadRadius(opts.radius));
    }
    if !(opts.tol > 0.0) {
        return Err(KilledWalkError::BadTolerance(opts.tol));
    }
    if p == 1.0 && d <= 2 {
        return Err(KilledWalkError::Recurrent { dim: d });
    }
    if let Some(s) = opts.sites.iter().find(|s| s.dim() != d) {
        return Err(KilledWalkError::DimensionMismatch {
            expected: d,
            actual: s.dim(),
        });
    }
    let coef = p / (2 * d) as f64;
    let sweep_tol = 0.01 * opts.tol;
    let mut updates = 0u64;
    let mut sweeps = 0u64;
    let mut radius = opts.radius.max(opts.sites.iter().map(|s| sup_norm(s) + 1).max().unwrap_or(0));
    let mut prev: Option<(CenteredBox, Vec<f64>, Vec<f64>)> = None;
    let mut last_gap = f64::INFINITY;
    loop {
        let grid = CenteredBox::new(d, radius)?;
        if grid.len() > opts.max_unknowns {
            return Err(KilledWalkError::NonConvergence {
                radius: prev.map_or(radius, |p| p.0.radius()),
                gap: last_gap,
            });
        }
        let mut fixed = grid.boundary_mask();
        fixed[grid.origin()] = true;
        let strides: Vec<usize> = (0..d).map(|k| grid.stride(k)).collect();
        let mut lo = Closure::embed(prev.as_ref().map(|(b, l, _)| (b, l.as_slice())), &grid, &fixed, 0.0);
        let mut hi = Closure::embed(prev.as_ref().map(|(b, _, u)| (b, u.as_slice())), &grid, &fixed, 1.0);
        let targets: Vec<usize> = opts
            .sites
            .iter()
            .map(|s| grid.index(s).expect("radius covers requested sites"))
            .collect();
        let gap = |lo: &Closure, hi: &Closure| {
            targets
                .iter()
                .map(|&i| 0.5 * (hi.field[i] - lo.field[i]))
                .fold(0.0, f64::max)
        };
        loop {
            let dl = lo.sweep(&fixed, &strides, coef);
            let dh = hi.sweep(&fixed, &strides, coef);
            sweeps += 1;
            updates += 2 * grid.len() as u64;
            last_gap = gap(&lo, &hi);
            if last_gap <= opts.tol && dl <= sweep_tol {
                let harmonic_residual = harmonic_residual(&lo.field, &fixed, &strides, coef);
                return Ok(HittingSolution {
                    spec,
                    radius,
                    tol: opts.tol,
                    error_bound: last_gap,
                    harmonic_residual,
                    sweeps,
                    grid,
                    lower: lo.field,
                    upper: hi.field,
                });
            }
            if updates > opts.max_updates {
                return Err(KilledWalkError::NonConvergence { radius, gap: last_gap });
            }
            if dl <= sweep_tol && dh <= sweep_tol {
                break;
            }
        }
        prev = Some((grid, lo.field, hi.field));
        radius += (radius / 2).max(2);
    }
}

fn sup_norm(s: &Site) -> usize {
    s.coords().iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(p: f64) -> f64 {
        if p == 0.0 {
            0.0
        } else {
            p / (1.0 + (1.0 - p * p).sqrt())
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        for p in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            let sol = hitting_solve(KilledWalkSpec::new(1, p).unwrap(), 4, 1e-8).unwrap();
            let b = sol.e1();
            let want = closed_form(p);
            assert!(b.lo - 1e-15 <= want && want <= b.hi + 1e-15, "p={p} {b:?} vs {want}");
            assert!((b.mid() - want).abs() < 1e-8);
            assert!(sol.harmonic_residual < 1e-8);
        }
        let sol = hitting_solve(KilledWalkSpec::new(1, 0.6).unwrap(), 2, 1e-9).unwrap();
        assert!((sol.e1().mid() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_values() {
        for d in 1..=3 {
            let sol = hitting_solve(KilledWalkSpec::new(d, 0.0).unwrap(), 2, 1e-9).unwrap();
            assert_eq!(sol.e1(), Interval::new(0.0, 0.0));
            assert_eq!(sol.value(&Site::origin(d)), Some(1.0));
            let sol = hitting_solve(KilledWalkSpec::new(d, 0.7).unwrap(), 3, 1e-6).unwrap();
            assert_eq!(sol.bounds(&Site::origin(d)), Some(Interval::point(1.0)));
        }
    }

    #[test]
    fn fields_are_ordered_in_the_unit_interval() {
        let sol = hitting_solve(KilledWalkSpec::new(2, 0.9).unwrap(), 3, 1e-5).unwrap();
        for (l, u) in sol.lower_field().iter().zip(sol.upper_field()) {
            assert!(0.0 <= *l && l <= u && *u <= 1.0);
        }
    }

    #[test]
    fn gap_shrinks_with_radius() {
        let spec = KilledWalkSpec::new(2, 0.8).unwrap();
        let widths: Vec<f64> = [3, 6, 12]
            .iter()
            .map(|&m| {
                // a box too small to grow reports its converged gap
                let mut o = SolveOptions::new(2, m, 1e-12);
                o.max_unknowns = (2 * m + 1) * (2 * m + 1);
                match hitting_solve_with(spec, &o) {
                    Err(KilledWalkError::NonConvergence { gap, .. }) => gap,
                    Ok(s) => s.error_bound,
                    Err(e) => panic!("{e}"),
                }
            })
            .collect();
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn transient_walk_at_p_one_does_not_close() {
        let spec = KilledWalkSpec::new(3, 1.0).unwrap();
        let mut o = SolveOptions::new(3, 2, 1e-6);
        o.max_unknowns = 40_000;
        assert!(matches!(
            hitting_solve_with(spec, &o),
            Err(KilledWalkError::NonConvergence { .. })
        ));
        let spec = KilledWalkSpec::new(2, 1.0).unwrap();
        assert_eq!(hitting_solve(spec, 4, 1e-6).unwrap_err(), KilledWalkError::Recurrent { dim: 2 });
    }

    #[test]
    fn bad_arguments() {
        let spec = KilledWalkSpec::new(1, 0.5).unwrap();
        assert_eq!(hitting_solve(spec, 1, 1e-6).unwrap_err(), KilledWalkError::BadRadius(1));
        assert!(matches!(hitting_solve(spec, 3, 0.0), Err(KilledWalkError::BadTolerance(_))));
    }

    #[test]
    fn requested_far_sites_grow_the_box() {
        let spec = KilledWalkSpec::new(1, 0.9).unwrap();
        let mut o = SolveOptions::new(1, 2, 1e-9);
        o.sites.push(Site::new([7]));
        let sol = hitting_solve_with(spec, &o).unwrap();
        // R(k e1) = R(e1)^k in one dimension
        let want = closed_form(0.9).powi(7);
        assert!((sol.value(&Site::new([7])).unwrap() - want).abs() < 1e-9);
    }
}
