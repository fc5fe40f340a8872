//! Monte Carlo estimators of the hitting probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KilledWalkError, KilledWalkSpec};
use crate::lattice::Site;
use crate::rng::{replicate_rng, replicate_seed, SimRng};
use crate::stats::{wilson, Interval, Z95};

const BLOCK: u64 = 1 << 14;

/// Hit frequency of killed walks with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub hits: u64,
    pub replicates: u64,
    /// Walks still alive and away from the origin after `max_steps`; they
    /// count as misses, so the estimate is biased low by at most
    /// `truncated / replicates`.
    pub truncated: u64,
    pub max_steps: u64,
    pub p_hat: f64,
    pub se: f64,
    pub ci: Interval,
}

/// Steps after which an unfinished walk is survival-negligible: `p^n <= 1e-15`.
pub fn default_max_steps(p: f64) -> u64 {
    if p <= 0.0 {
        1
    } else if p >= 1.0 {
        1_000_000
    } else {
        ((1e-15f64).ln() / p.ln()).ceil().clamp(1.0, 1e6) as u64
    }
}

/// Walk position with running counts of nonzero coordinates and of the
/// L1 norm.
struct Walker {
    coords: Vec<i64>,
    nonzero: usize,
    l1: u64,
}

impl Walker {
    fn at(site: &Site) -> Self {
        let coords: Vec<i64> = site.coords().iter().map(|&c| i64::from(c)).collect();
        let nonzero = coords.iter().filter(|&&c| c != 0).count();
        let l1 = coords.iter().map(|c| c.unsigned_abs()).sum();
        Walker { coords, nonzero, l1 }
    }

    #[inline]
    fn step(&mut self, rng: &mut SimRng) {
        let slot = rng.random_range(0..2 * self.coords.len());
        let c = &mut self.coords[slot / 2];
        let was_zero = *c == 0;
        let before = c.unsigned_abs();
        *c += if slot % 2 == 0 { 1 } else { -1 };
        if c.unsigned_abs() > before {
            self.l1 += 1;
        } else {
            self.l1 -= 1;
        }
        if was_zero {
            self.nonzero += 1;
        } else if *c == 0 {
            self.nonzero -= 1;
        }
    }

    fn at_origin(&self) -> bool {
        self.nonzero == 0
    }

    fn l1(&self) -> u64 {
        self.l1
    }
}

/// Simulate `replicates` walks from `start`, each step killed with
/// probability `1 - p`, and count those reaching the origin.
pub fn hitting_mc(spec: KilledWalkSpec, start: &Site, replicates: u64, seed: u64) -> Result<HittingEstimate, KilledWalkError> {
    hitting_mc_with(spec, start, replicates, seed, default_max_steps(spec.p))
}

pub fn hitting_mc_with(
    spec: KilledWalkSpec,
    start: &Site,
    replicates: u64,
    seed: u64,
    max_steps: u64,
) -> Result<HittingEstimate, KilledWalkError> {
    if replicates == 0 {
        return Err(KilledWalkError::NoReplicates);
    }
    if start.dim() != spec.dim {
        return Err(KilledWalkError::DimensionMismatch {
            expected: spec.dim,
            actual: start.dim(),
        });
    }
    let blocks = replicates.div_ceil(BLOCK);
    let (hits, truncated) = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b);
            let n = BLOCK.min(replicates - b * BLOCK);
            let (mut hits, mut truncated) = (0u64, 0u64);
            for _ in 0..n {
                let mut w = Walker::at(start);
                if w.at_origin() {
                    hits += 1;
                    continue;
                }
                let mut done = false;
                for _ in 0..max_steps {
                    if rng.random::<f64>() >= spec.p {
                        done = true;
                        break;
                    }
                    w.step(&mut rng);
                    if w.at_origin() {
                        hits += 1;
                        done = true;
                        break;
                    }
                }
                truncated += u64::from(!done);
            }
            (hits, truncated)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = replicates as f64;
    let p_hat = hits as f64 / n;
    Ok(HittingEstimate {
        hits,
        replicates,
        truncated,
        max_steps,
        p_hat,
        se: (p_hat * (1.0 - p_hat) / n).sqrt(),
        ci: wilson(hits, replicates, Z95),
    })
}

/// First-passage times to the origin of the unkilled walk from a fixed
/// start, truncated at `horizon` steps. Then `E[p^T; T <= horizon]` is a
/// polynomial in `p` with fixed random coefficients, so estimates for
/// different `p` share one sample and are monotone in `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTimes {
    pub walks: u64,
    pub horizon: usize,
    /// `counts[t]` walks first hit the origin at step `t`.
    pub counts: Vec<u64>,
}

impl ReturnTimes {
    pub fn sample(start: &Site, horizon: usize, walks: u64, seed: u64) -> Self {
        let blocks = walks.div_ceil(BLOCK);
        let counts = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = replicate_rng(seed, b);
                let mut counts = vec![0u64; horizon + 1];
                for _ in 0..BLOCK.min(walks - b * BLOCK) {
                    let mut w = Walker::at(start);
                    if w.at_origin() {
                        counts[0] += 1;
                        continue;
                    }
                    for t in 1..=horizon {
                        w.step(&mut rng);
                        if w.at_origin() {
                            counts[t] += 1;
                            break;
                        }
                        // too far out to come back in time
                        if w.l1() > (horizon - t) as u64 {
                            break;
                        }
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; horizon + 1],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        ReturnTimes { walks, horizon, counts }
    }

    pub fn merge(&mut self, other: &ReturnTimes) {
        assert_eq!(self.horizon, other.horizon);
        self.walks += other.walks;
        self.counts.iter_mut().zip(&other.counts).for_each(|(x, y)| *x += y);
    }

    /// Estimate of `E[p^T; T <= horizon]`, its standard error, and the
    /// largest possible contribution of walks not back by the horizon.
    pub fn generating_function(&self, p: f64) -> (f64, f64, f64) {
        let n = self.walks as f64;
        let (mut m1, mut m2, mut returned) = (0.0, 0.0, 0u64);
        let mut pt = 1.0;
        for &c in &self.counts {
            m1 += c as f64 * pt;
            m2 += c as f64 * pt * pt;
            returned += c;
            pt *= p;
        }
        let (m1, m2) = (m1 / n, m2 / n);
        let se = ((m2 - m1 * m1).max(0.0) / n).sqrt();
        let tail = pt * (self.walks - returned) as f64 / n;
        (m1, se, tail)
    }
}

/// `R(e1, d, p)` from the first step out of `e1`:
/// `R = p/2d * [1 + h(2 e1) + 2(d-1) h(e1 + e2)]` with `h(y) = E_y[p^T]`.
/// The direct step to the origin is handled exactly, which removes most of
/// the variance when `R` is close to `p/2d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedHitting {
    pub dim: usize,
    pub z: f64,
    axial: ReturnTimes,
    diagonal: Option<ReturnTimes>,
    seed: u64,
    rounds: u64,
}

pub const DEFAULT_HORIZON: usize = 256;
pub const MAX_HORIZON: usize = 2048;

impl StratifiedHitting {
    pub fn new(dim: usize, walks: u64, horizon: usize, seed: u64, z: f64) -> Self {
        let (axial, diagonal) = Self::draw(dim, walks, horizon, seed, 0);
        StratifiedHitting {
            dim,
            z,
            axial,
            diagonal,
            seed,
            rounds: 0,
        }
    }

    fn draw(dim: usize, walks: u64, horizon: usize, seed: u64, round: u64) -> (ReturnTimes, Option<ReturnTimes>) {
        let two = Site::unit(dim, 0).neighbor(0).expect("small coordinates");
        let axial = ReturnTimes::sample(&two, horizon, walks, replicate_seed(seed, 2 * round));
        let diagonal = (dim >= 2).then(|| {
            let e1e2 = Site::unit(dim, 0).neighbor(2).expect("small coordinates");
            ReturnTimes::sample(&e1e2, horizon, walks, replicate_seed(seed, 2 * round + 1))
        });
        (axial, diagonal)
    }

    /// Choose the walk count for a target half-width of `R` at `p = 1`,
    /// the noisiest case, from a pilot sample.
    pub fn with_target(dim: usize, half_width: f64, seed: u64) -> Self {
        const PILOT: u64 = 20_000;
        let pilot = Self::new(dim, PILOT, DEFAULT_HORIZON, seed, 3.0);
        let (_, se, _) = pilot.parts(1.0);
        let sd = se * (PILOT as f64).sqrt();
        let need = (pilot.z * sd / half_width).powi(2).ceil();
        let walks = (need.max(PILOT as f64)).min(2e7) as u64;
        if walks <= PILOT {
            return pilot;
        }
        Self::new(dim, walks, DEFAULT_HORIZON, seed, 3.0)
    }

    pub fn walks(&self) -> u64 {
        self.axial.walks
    }

    pub fn horizon(&self) -> usize {
        self.axial.horizon
    }

    fn parts(&self, p: f64) -> (f64, f64, f64) {
        let d = self.dim as f64;
        let a = p / (2.0 * d);
        let (h1, s1, t1) = self.axial.generating_function(p);
        let (h2, s2, t2) = self
            .diagonal
            .as_ref()
            .map_or((0.0, 0.0, 0.0), |r| r.generating_function(p));
        let k = 2.0 * (d - 1.0);
        let est = a * (1.0 + h1 + k * h2);
        let se = a * (s1 * s1 + k * k * s2 * s2).sqrt();
        let tail = a * (t1 + k * t2);
        (est, se, tail)
    }

    /// Interval for `R(e1, d, p)`: `z` standard errors either side, plus the
    /// truncation allowance on the upper end, clipped to the exact floor
    /// `p/2d`.
    pub fn r_e1(&self, p: f64) -> Interval {
        let (est, se, tail) = self.parts(p);
        let floor = p / (2.0 * self.dim as f64);
        let lo = (est - self.z * se).max(floor);
        Interval::new(lo, (est + self.z * se + tail).max(lo))
    }

    /// Double the sample; the horizon doubles too until it reaches
    /// [`MAX_HORIZON`].
    pub fn refine(&mut self) {
        self.rounds += 1;
        let (walks, horizon) = (self.walks(), self.horizon());
        if horizon < MAX_HORIZON {
            let (a, d) = Self::draw(self.dim, 2 * walks, 2 * horizon, self.seed, self.rounds);
            self.axial = a;
            self.diagonal = d;
        } else {
            let (a, d) = Self::draw(self.dim, walks, horizon, self.seed, self.rounds);
            self.axial.merge(&a);
            if let (Some(x), Some(y)) = (self.diagonal.as_mut(), d.as_ref()) {
                x.merge(y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(p: f64) -> f64 {
        p / (1.0 + (1.0 - p * p).sqrt())
    }

    #[test]
    fn trivial_frequencies() {
        let spec = KilledWalkSpec::new(3, 0.7).unwrap();
        let at_o = hitting_mc(spec, &Site::origin(3), 1000, 1).unwrap();
        assert_eq!(at_o.hits, 1000);
        let spec = KilledWalkSpec::new(2, 0.0).unwrap();
        let dead = hitting_mc(spec, &Site::unit(2, 0), 1000, 1).unwrap();
        assert_eq!(dead.hits, 0);
        assert_eq!(dead.truncated, 0);
    }

    #[test]
    fn one_dimensional_frequency() {
        let spec = KilledWalkSpec::new(1, 0.6).unwrap();
        let est = hitting_mc(spec, &Site::unit(1, 0), 200_000, 7).unwrap();
        assert!((est.p_hat - 1.0 / 3.0).abs() < 3.0 * est.se + 1e-12, "{est:?}");
        assert_eq!(est.truncated, 0);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = KilledWalkSpec::new(2, 0.8).unwrap();
        let a = hitting_mc(spec, &Site::unit(2, 0), 50_000, 3).unwrap();
        let b = hitting_mc(spec, &Site::unit(2, 0), 50_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stratified_estimator_matches_closed_form() {
        let s = StratifiedHitting::new(1, 200_000, DEFAULT_HORIZON, 5, 3.0);
        for p in [0.3, 0.6, 0.8] {
            let ci = s.r_e1(p);
            assert!(ci.contains(closed_form(p)), "p={p} {ci:?} vs {}", closed_form(p));
            assert!(ci.width() < 0.01);
        }
    }

    #[test]
    fn stratified_estimator_is_monotone_in_p() {
        let s = StratifiedHitting::new(4, 20_000, 64, 9, 3.0);
        let mids: Vec<f64> = (1..20).map(|k| s.r_e1(0.05 * f64::from(k)).mid()).collect();
        assert!(mids.windows(2).all(|w| w[0] <= w[1]), "{mids:?}");
    }

    #[test]
    fn target_width_is_met() {
        let s = StratifiedHitting::with_target(5, 1e-3, 2);
        let ci = s.r_e1(0.9);
        assert!(ci.half_width() < 1.1e-3, "{ci:?}");
    }

    #[test]
    fn refine_tightens() {
        let mut s = StratifiedHitting::new(3, 5_000, 64, 4, 3.0);
        let w0 = s.r_e1(0.95).width();
        s.refine();
        s.refine();
        assert!(s.r_e1(0.95).width() < w0);
    }

    #[test]
    fn return_time_generating_function() {
        // from e1 in one dimension the walk returns at step 1 with prob 1/2
        let r = ReturnTimes::sample(&Site::unit(1, 0), 1, 100_000, 1);
        let (h, se, tail) = r.generating_function(1.0);
        assert!((h - 0.5).abs() < 4.0 * se);
        assert!((tail - (1.0 - h)).abs() < 1e-12);
    }
}
