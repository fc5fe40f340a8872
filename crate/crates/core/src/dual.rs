//! Set-valued dual processes on the unbounded lattice.
//!
//! The origin of the forward process started from all ones is infected at
//! time `t` exactly when the dual front started from `{O}` is nonempty at
//! time `t`, so survival of the front gives the infection probability on
//! the infinite lattice with no truncation.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{EstimateError, SurvivalCurve};
use crate::lattice::{LatticeError, Site};
use crate::model::{Classic, ContactModel, ModelRef, ThresholdOne};
use crate::rng::{replicate_rng, splitmix64, SimRng};
use crate::stats::{IntMoments, MeanEstimate, Z95};

/// Default cap on the front size of a single replicate.
pub const DEFAULT_MAX_FRONT: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("dual step on an empty front")]
    EmptyFront,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("infection rate must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("sample times must be finite, nonnegative and sorted")]
    BadSampleTimes,
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("front exceeded {limit} sites at t = {time}")]
    FrontOverflow { limit: usize, time: f64 },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// A finite set of active sites with the time it was last updated.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFront {
    sites: IndexSet<Site>,
    time: f64,
}

impl DualFront {
    /// `{O}` at time 0.
    pub fn origin(dim: usize) -> Self {
        Self::from_sites([Site::origin(dim)])
    }

    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Self {
        DualFront {
            sites: sites.into_iter().collect(),
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.contains(site)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    /// The site stored at position `idx` (positions are in `0..len`).
    pub fn get(&self, idx: usize) -> Option<&Site> {
        self.sites.get_index(idx)
    }
}

/// What one dual event did to the front.
#[derive(Debug, Clone, PartialEq)]
pub enum DualMove {
    Removed(Site),
    /// `site` fired its infection clock with neighbor slot `slot`.
    Branched { site: Site, slot: usize },
}

/// Apply a removal or a branch at `site`, using the model's rule for which
/// neighbors join the front. Insertions are set unions.
pub fn apply_move(model: &dyn ContactModel, front: &mut DualFront, mv: &DualMove) -> Result<(), DualError> {
    match mv {
        DualMove::Removed(x) => {
            front.sites.swap_remove(x);
        }
        DualMove::Branched { site, slot } => {
            let mut added = Vec::with_capacity(2 * site.dim());
            let mut err = None;
            model.sources(*slot).for_each(2 * site.dim(), |s| match site.neighbor(s) {
                Ok(y) => added.push(y),
                Err(e) => err = Some(e),
            });
            if let Some(e) = err {
                return Err(e.into());
            }
            front.sites.extend(added);
        }
    }
    Ok(())
}

fn total_rate(model: &dyn ContactModel, lambda: f64, front: &DualFront) -> f64 {
    let dim = front.sites[0].dim();
    (1.0 + model.infection_clock_rate(lambda, dim)) * front.len() as f64
}

/// Pick a site uniformly and remove it with probability `1 / (1 + c)`, else
/// branch, where `c` is the model's infection clock rate. Time is untouched.
fn fire(model: &dyn ContactModel, lambda: f64, front: &mut DualFront, rng: &mut SimRng) -> Result<DualMove, DualError> {
    let dim = front.sites[0].dim();
    let c = model.infection_clock_rate(lambda, dim);
    let site = front.sites[rng.random_range(0..front.len())].clone();
    let mv = if rng.random::<f64>() * (1.0 + c) < 1.0 {
        DualMove::Removed(site)
    } else {
        DualMove::Branched {
            site,
            slot: rng.random_range(0..2 * dim),
        }
    };
    apply_move(model, front, &mv)?;
    Ok(mv)
}

/// One Gillespie step: advance time by an exponential variate of rate
/// `(1 + c)|A|`, then remove or branch at a uniformly chosen site.
pub fn step_dual(
    model: &dyn ContactModel,
    lambda: f64,
    front: &mut DualFront,
    rng: &mut SimRng,
) -> Result<DualMove, DualError> {
    if front.is_empty() {
        return Err(DualError::EmptyFront);
    }
    let wait: f64 = rng.sample(Exp1);
    front.time += wait / total_rate(model, lambda, front);
    fire(model, lambda, front, rng)
}

/// Threshold-one dual: a branch adds every neighbor.
pub fn step_dual_threshold(front: &mut DualFront, lambda: f64, rng: &mut SimRng) -> Result<DualMove, DualError> {
    step_dual(&ThresholdOne, lambda, front, rng)
}

/// Classic dual: a birth adds one uniformly chosen neighbor.
pub fn step_dual_classic(front: &mut DualFront, lambda: f64, rng: &mut SimRng) -> Result<DualMove, DualError> {
    step_dual(&Classic, lambda, front, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualParams {
    pub model: ModelRef,
    pub dim: usize,
    pub lambda: f64,
    pub seed: u64,
    pub max_front: usize,
}

impl DualParams {
    pub fn new(model: ModelRef, dim: usize, lambda: f64, seed: u64) -> Self {
        DualParams {
            model,
            dim,
            lambda,
            seed,
            max_front: DEFAULT_MAX_FRONT,
        }
    }

    fn validate(&self, times: &[f64], replicates: u64) -> Result<(), DualError> {
        if self.dim == 0 {
            return Err(DualError::ZeroDimension);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(DualError::BadLambda(self.lambda));
        }
        let ok = times.iter().all(|t| t.is_finite() && *t >= 0.0) && times.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(DualError::BadSampleTimes);
        }
        if replicates == 0 {
            return Err(DualError::NoReplicates);
        }
        Ok(())
    }
}

/// Front sizes of replicate `replicate` at each sample time.
pub fn run_dual(params: &DualParams, times: &[f64], replicate: u64) -> Result<Vec<usize>, DualError> {
    params.validate(times, 1)?;
    let mut rng = replicate_rng(params.seed, replicate);
    let model = &*params.model;
    let mut front = DualFront::origin(params.dim);
    let mut sizes = Vec::with_capacity(times.len());
    for &t in times {
        while !front.is_empty() {
            let wait: f64 = rng.sample(Exp1);
            let next = front.time + wait / total_rate(model, params.lambda, &front);
            if next > t {
                // memoryless: the overshoot is discarded and redrawn from t
                front.time = t;
                break;
            }
            front.time = next;
            fire(model, params.lambda, &mut front, &mut rng)?;
            if front.len() > params.max_front {
                return Err(DualError::FrontOverflow {
                    limit: params.max_front,
                    time: next,
                });
            }
        }
        sizes.push(front.len());
    }
    Ok(sizes)
}

/// Aggregated replicate statistics of the dual from `{O}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEnsemble {
    pub times: Vec<f64>,
    pub replicates: u64,
    /// Replicates with a nonempty front at each time.
    pub survivors: Vec<u64>,
    pub sizes: Vec<IntMoments>,
}

impl DualEnsemble {
    pub fn survival_curve(&self, z: f64) -> Result<SurvivalCurve, EstimateError> {
        SurvivalCurve::from_counts(self.times.clone(), self.replicates, self.survivors.clone(), z)
    }

    pub fn mean_front_size(&self) -> Vec<MeanEstimate> {
        self.sizes.iter().map(IntMoments::estimate).collect()
    }
}

/// Run `replicates` independent duals in parallel. Aggregation is over
/// integers, so the result is identical for any thread count.
pub fn run_dual_ensemble(params: &DualParams, times: &[f64], replicates: u64) -> Result<DualEnsemble, DualError> {
    params.validate(times, replicates)?;
    let m = times.len();
    let zero = || (vec![0u64; m], vec![IntMoments::default(); m]);
    let (survivors, sizes) = (0..replicates)
        .into_par_iter()
        .map(|r| run_dual(params, times, r))
        .try_fold(zero, |(mut surv, mut mom), sizes| {
            let sizes = sizes?;
            for (i, &s) in sizes.iter().enumerate() {
                surv[i] += u64::from(s > 0);
                mom[i].push(s as u64);
            }
            Ok::<_, DualError>((surv, mom))
        })
        .try_reduce(zero, |(mut sa, mut ma), (sb, mb)| {
            for i in 0..m {
                sa[i] += sb[i];
                ma[i].merge(&mb[i]);
            }
            Ok((sa, ma))
        })?;
    Ok(DualEnsemble {
        times: times.to_vec(),
        replicates,
        survivors,
        sizes,
    })
}

/// `P(A_t != {})` at each sample time with 95% Wilson intervals.
pub fn survival_probability(params: &DualParams, times: &[f64], replicates: u64) -> Result<SurvivalCurve, DualError> {
    Ok(run_dual_ensemble(params, times, replicates)?.survival_curve(Z95)?)
}

/// `E|A_t|` at each sample time.
pub fn mean_front_size(params: &DualParams, times: &[f64], replicates: u64) -> Result<Vec<MeanEstimate>, DualError> {
    Ok(run_dual_ensemble(params, times, replicates)?.mean_front_size())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct SiteClock {
    rng: SimRng,
    next: f64,
    queued: bool,
}

/// The dual driven by per-site Poisson clocks whose streams depend only on
/// `(seed, site)`. Two runs with the same seed see the same clocks whatever
/// their initial fronts, which realizes the monotone coupling: `A <= B`
/// initially implies `A_t <= B_t` for all `t`. Slower than [`run_dual`]; meant
/// for coupling checks, not estimation.
pub struct GraphicalDual<'m> {
    model: &'m dyn ContactModel,
    dim: usize,
    clock_rate: f64,
    death_prob: f64,
    seed: u64,
    clocks: HashMap<Site, SiteClock>,
    queue: BinaryHeap<Reverse<(Time, Site)>>,
    front: DualFront,
}

impl<'m> GraphicalDual<'m> {
    pub fn new(model: &'m dyn ContactModel, dim: usize, lambda: f64, seed: u64, init: &[Site]) -> Self {
        let c = model.infection_clock_rate(lambda, dim);
        let mut g = GraphicalDual {
            model,
            dim,
            clock_rate: 1.0 + c,
            death_prob: 1.0 / (1.0 + c),
            seed,
            clocks: HashMap::new(),
            queue: BinaryHeap::new(),
            front: DualFront::from_sites(std::iter::empty()),
        };
        for x in init {
            g.activate(x.clone(), 0.0);
        }
        g
    }

    pub fn front(&self) -> &DualFront {
        &self.front
    }

    fn clock_seed(&self, site: &Site) -> u64 {
        site.coords()
            .iter()
            .fold(splitmix64(self.seed), |acc, &c| splitmix64(acc ^ u64::from(c as u32)))
    }

    fn draw_wait(rng: &mut SimRng, rate: f64) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / rate
    }

    fn activate(&mut self, site: Site, t: f64) {
        let seed = self.clock_seed(&site);
        let rate = self.clock_rate;
        let clock = self.clocks.entry(site.clone()).or_insert_with(|| {
            let mut rng = SimRng::seed_from_u64(seed);
            let next = Self::draw_wait(&mut rng, rate);
            SiteClock {
                rng,
                next,
                queued: false,
            }
        });
        // rings while inactive are skipped; every ring draws kind and slot
        // so the stream stays aligned
        while clock.next <= t {
            let _: f64 = clock.rng.random();
            let _: usize = clock.rng.random_range(0..2 * self.dim);
            clock.next += Self::draw_wait(&mut clock.rng, rate);
        }
        if !clock.queued {
            clock.queued = true;
            self.queue.push(Reverse((Time(clock.next), site.clone())));
        }
        self.front.sites.insert(site);
    }

    /// Process every ring up to time `t` and return the front at `t`.
    pub fn advance(&mut self, t: f64) -> Result<&DualFront, DualError> {
        while let Some(Reverse((Time(s), _))) = self.queue.peek() {
            if *s > t {
                break;
            }
            let Reverse((Time(s), site)) = self.queue.pop().expect("peeked");
            let clock = self.clocks.get_mut(&site).expect("queued sites have clocks");
            clock.queued = false;
            if !self.front.contains(&site) {
                continue;
            }
            let death = clock.rng.random::<f64>() < self.death_prob;
            let slot = clock.rng.random_range(0..2 * self.dim);
            clock.next += Self::draw_wait(&mut clock.rng, self.clock_rate);
            clock.queued = true;
            let next = clock.next;
            self.queue.push(Reverse((Time(next), site.clone())));
            self.front.time = s;
            if death {
                self.front.sites.swap_remove(&site);
            } else {
                let mut added = Vec::new();
                let mut err = None;
                self.model.sources(slot).for_each(2 * self.dim, |k| match site.neighbor(k) {
                    Ok(y) => added.push(y),
                    Err(e) => err = Some(e),
                });
                if let Some(e) = err {
                    return Err(e.into());
                }
                for y in added {
                    if !self.front.contains(&y) {
                        self.activate(y, s);
                    }
                }
            }
        }
        self.front.time = t;
        Ok(&self.front)
    }
}
