//! Forward simulation on the torus.
//!
//! All processes here are driven by one graphical representation: the
//! merged stream of per-site recovery clocks (rate 1) and infection clocks
//! (rate given by the model). Running a spin field and a weight field off
//! the same [`EventStream`] realizes the exact coupling between them.

mod events;
mod spin;
mod weights;

pub use events::{Event, EventKind, EventStream};
pub use spin::SpinField;
pub use weights::WeightField;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::lattice::{LatticeError, Torus};
use crate::model::{ContactModel, ModelRef};
use crate::rng::replicate_rng;
use crate::stats::{mean_se, MeanEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("infection rate must be finite and nonnegative, got {0}")]
    BadLambda(f64),
    #[error("horizon must be finite and nonnegative, got {0}")]
    BadHorizon(f64),
    #[error("sample times must be sorted and lie in [0, {t_max}]")]
    BadSampleTimes { t_max: f64 },
    #[error("initial field has {actual} sites, torus has {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("coupled run needs a strictly positive initial weight field")]
    NonPositiveInit,
    #[error("infection clock rate {clock} is below the model rate {model}")]
    SlowClock { clock: f64, model: f64 },
    #[error("weight at site {site} became invalid ({value})")]
    InvalidWeight { site: usize, value: f64 },
    #[error("replicate count must be at least 1")]
    NoReplicates,
}

/// Parameters of one forward run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dim: usize,
    pub lambda: f64,
    pub model: ModelRef,
    /// Torus side length `L` (even, at least 4).
    pub side: usize,
    pub t_max: f64,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<Torus, EngineError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(EngineError::BadLambda(self.lambda));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(EngineError::BadHorizon(self.t_max));
        }
        Ok(Torus::new(self.dim, self.side)?)
    }

    /// `1 - 2 lambda d`.
    pub fn drift(&self) -> f64 {
        1.0 - 2.0 * self.lambda * self.dim as f64
    }

    pub fn model_clock_rate(&self) -> f64 {
        self.model.infection_clock_rate(self.lambda, self.dim)
    }

    fn check_samples(&self, times: &[f64]) -> Result<(), EngineError> {
        let sorted = times.windows(2).all(|w| w[0] <= w[1]);
        let in_range = times.iter().all(|&t| (0.0..=self.t_max).contains(&t));
        if sorted && in_range {
            Ok(())
        } else {
            Err(EngineError::BadSampleTimes { t_max: self.t_max })
        }
    }
}

#[inline]
fn fires(kind: &EventKind, accept: f64) -> Option<usize> {
    match *kind {
        EventKind::Infect { slot, mark } if mark < accept => Some(slot),
        _ => None,
    }
}

#[inline]
fn source_sites(model: &dyn ContactModel, torus: &Torus, site: usize, slot: usize) -> SmallVec<[usize; 8]> {
    let mut out = SmallVec::new();
    model
        .sources(slot)
        .for_each(torus.degree(), |s| out.push(torus.neighbor(site, s)));
    out
}

/// Apply one event to a spin configuration. Recovery clears the site;
/// an accepted infection sets it iff it is already set or some source
/// neighbor is infected (all neighbors for the threshold-one model, the
/// drawn neighbor for the classic model).
pub fn step_spin(model: &dyn ContactModel, field: &mut SpinField, torus: &Torus, event: &Event, accept: f64) {
    match event.kind {
        EventKind::Death => field.set(event.site, false),
        ref kind => {
            if let Some(slot) = fires(kind, accept) {
                if !field.get(event.site)
                    && source_sites(model, torus, event.site, slot)
                        .iter()
                        .any(|&y| field.get(y))
                {
                    field.set(event.site, true);
                }
            }
        }
    }
}

/// Apply one event to a weight field: recovery zeroes the site, an
/// accepted infection adds the source neighbors' weights to it.
pub fn step_weighted(
    model: &dyn ContactModel,
    field: &mut WeightField,
    torus: &Torus,
    event: &Event,
    accept: f64,
) -> Result<(), EngineError> {
    match event.kind {
        EventKind::Death => field.kill(event.site),
        ref kind => {
            if let Some(slot) = fires(kind, accept) {
                let src = source_sites(model, torus, event.site, slot);
                let out = field.accumulate(event.site, &src);
                if out.is_nan() || out == f64::INFINITY {
                    return Err(EngineError::InvalidWeight {
                        site: event.site,
                        value: out,
                    });
                }
            }
        }
    }
    Ok(())
}

/// State advanced by [`drive`].
trait Driven {
    /// Apply one event; `false` once the state is absorbing.
    fn apply(&mut self, event: &Event) -> Result<bool, EngineError>;
    /// Record sample `i` from the current state.
    fn record(&mut self, i: usize);
}

/// Feed events into `state` until the horizon, recording each sample time
/// with the state as of that time. After absorption the remaining samples
/// are recorded from the absorbed state. Returns the number of events
/// applied.
fn drive(stream: &mut EventStream, t_max: f64, times: &[f64], state: &mut impl Driven) -> Result<u64, EngineError> {
    let mut next = 0;
    let mut count = 0u64;
    loop {
        let ev = stream.next_event();
        while next < times.len() && times[next] < ev.time {
            state.record(next);
            next += 1;
        }
        if ev.time > t_max {
            break;
        }
        count += 1;
        if !state.apply(&ev)? {
            break;
        }
    }
    while next < times.len() {
        state.record(next);
        next += 1;
    }
    Ok(count)
}

/// Per-replicate output of a forward run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub times: Vec<f64>,
    /// `eta_t(O)` at each sample time.
    pub origin: Vec<bool>,
    /// Fraction of infected sites at each sample time.
    pub density: Vec<f64>,
    pub events: u64,
}

fn clock_accept(params: &SimParams, clock_lambda: Option<f64>) -> Result<(f64, f64), EngineError> {
    let model_rate = params.model_clock_rate();
    let clock = match clock_lambda {
        None => model_rate,
        Some(l) => params.model.infection_clock_rate(l, params.dim),
    };
    if clock < model_rate {
        return Err(EngineError::SlowClock {
            clock,
            model: model_rate,
        });
    }
    let accept = if clock > 0.0 { model_rate / clock } else { 1.0 };
    Ok((clock, accept))
}

/// One replicate of the forward spin process from `init`, observed at
/// `times`. Replicate `r` uses the stream seeded by `(params.seed, r)`.
pub fn run_forward(
    params: &SimParams,
    init: &SpinField,
    times: &[f64],
    replicate: u64,
) -> Result<ForwardTrace, EngineError> {
    run_forward_with_clock(params, None, init, times, replicate)
}

/// As [`run_forward`], but the infection clocks tick at the rate belonging
/// to `clock_lambda` and events are thinned down to `params.lambda`. Runs
/// that share a seed and `clock_lambda` are monotonically coupled in lambda.
pub fn run_forward_with_clock(
    params: &SimParams,
    clock_lambda: Option<f64>,
    init: &SpinField,
    times: &[f64],
    replicate: u64,
) -> Result<ForwardTrace, EngineError> {
    let torus = params.validate()?;
    params.check_samples(times)?;
    if init.len() != torus.len() {
        return Err(EngineError::SizeMismatch {
            expected: torus.len(),
            actual: init.len(),
        });
    }
    let (clock, accept) = clock_accept(params, clock_lambda)?;
    let mut stream = EventStream::new(
        replicate_rng(params.seed, replicate),
        torus.len(),
        torus.degree(),
        clock,
    );
    struct Forward<'a> {
        model: &'a dyn ContactModel,
        torus: &'a Torus,
        accept: f64,
        field: SpinField,
        origin: Vec<bool>,
        density: Vec<f64>,
    }
    impl Driven for Forward<'_> {
        fn apply(&mut self, ev: &Event) -> Result<bool, EngineError> {
            step_spin(self.model, &mut self.field, self.torus, ev, self.accept);
            Ok(!self.field.is_all_zero())
        }
        fn record(&mut self, i: usize) {
            self.origin[i] = self.field.get(self.torus.origin());
            self.density[i] = self.field.density();
        }
    }
    let mut state = Forward {
        model: params.model.0,
        torus: &torus,
        accept,
        field: init.clone(),
        origin: vec![false; times.len()],
        density: vec![0.0; times.len()],
    };
    let events = drive(&mut stream, params.t_max, times, &mut state)?;
    Ok(ForwardTrace {
        times: times.to_vec(),
        origin: state.origin,
        density: state.density,
        events,
    })
}

/// Aggregate of independent forward replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardEstimate {
    pub times: Vec<f64>,
    pub replicates: u64,
    /// Number of replicates with `eta_t(O) = 1`.
    pub origin_counts: Vec<u64>,
    /// Replicate mean of the infected density; by translation invariance
    /// this estimates the same probability as `origin_counts / replicates`
    /// with far smaller variance.
    pub density: Vec<MeanEstimate>,
}

/// Replicates `0..replicates` of [`run_forward`], run in parallel and
/// reduced in replicate order.
pub fn forward_ensemble(
    params: &SimParams,
    init: &SpinField,
    times: &[f64],
    replicates: u64,
) -> Result<ForwardEstimate, EngineError> {
    if replicates == 0 {
        return Err(EngineError::NoReplicates);
    }
    let traces: Vec<ForwardTrace> = (0..replicates)
        .into_par_iter()
        .map(|r| run_forward(params, init, times, r))
        .collect::<Result<_, _>>()?;
    let origin_counts = (0..times.len())
        .map(|i| traces.iter().filter(|tr| tr.origin[i]).count() as u64)
        .collect();
    let density = (0..times.len())
        .map(|i| {
            let xs: Vec<f64> = traces.iter().map(|tr| tr.density[i]).collect();
            mean_se(&xs)
        })
        .collect();
    Ok(ForwardEstimate {
        times: times.to_vec(),
        replicates,
        origin_counts,
        density,
    })
}

/// Snapshot of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub time: f64,
    pub spins: SpinField,
    /// `log zeta_t(x)`, `-inf` where the weight is zero.
    pub log_weights: Vec<f64>,
}

impl CoupledSample {
    /// Sites where `eta_t(x) = 1` and `zeta_t(x) > 0` disagree.
    pub fn mismatches(&self) -> usize {
        self.spins
            .bits()
            .iter()
            .zip(&self.log_weights)
            .filter(|(&s, &l)| s != (l > f64::NEG_INFINITY))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct CoupledTrace {
    pub samples: Vec<CoupledSample>,
    pub events: u64,
    /// Events after which the indicator identity failed somewhere.
    pub event_mismatches: u64,
}

impl CoupledTrace {
    pub fn sample_mismatches(&self) -> usize {
        self.samples.iter().map(CoupledSample::mismatches).sum()
    }
}

/// Spin process from `delta_1` and weight process from `init`, both driven
/// by the same event stream. The indicator identity is checked after every
/// event at the touched site; full snapshots are kept at `times`.
pub fn run_coupled(
    params: &SimParams,
    init: &WeightField,
    times: &[f64],
    replicate: u64,
) -> Result<CoupledTrace, EngineError> {
    let torus = params.validate()?;
    params.check_samples(times)?;
    if init.len() != torus.len() {
        return Err(EngineError::SizeMismatch {
            expected: torus.len(),
            actual: init.len(),
        });
    }
    if !(0..init.len()).all(|i| init.is_positive(i)) {
        return Err(EngineError::NonPositiveInit);
    }
    let (clock, accept) = clock_accept(params, None)?;
    let mut stream = EventStream::new(
        replicate_rng(params.seed, replicate),
        torus.len(),
        torus.degree(),
        clock,
    );
    struct Coupled<'a> {
        model: &'a dyn ContactModel,
        torus: &'a Torus,
        accept: f64,
        times: &'a [f64],
        spins: SpinField,
        weights: WeightField,
        event_mismatches: u64,
        samples: Vec<CoupledSample>,
    }
    impl Driven for Coupled<'_> {
        fn apply(&mut self, ev: &Event) -> Result<bool, EngineError> {
            step_spin(self.model, &mut self.spins, self.torus, ev, self.accept);
            step_weighted(self.model, &mut self.weights, self.torus, ev, self.accept)?;
            if self.spins.get(ev.site) != self.weights.is_positive(ev.site) {
                self.event_mismatches += 1;
            }
            Ok(true)
        }
        fn record(&mut self, i: usize) {
            let t = self.times[i];
            self.samples.push(CoupledSample {
                time: t,
                spins: self.spins.clone(),
                log_weights: (0..self.weights.len()).map(|x| self.weights.log_value(x, t)).collect(),
            });
        }
    }
    let mut state = Coupled {
        model: params.model.0,
        torus: &torus,
        accept,
        times,
        spins: SpinField::all_ones(torus.len()),
        weights: init.clone(),
        event_mismatches: 0,
        samples: Vec::with_capacity(times.len()),
    };
    let events = drive(&mut stream, params.t_max, times, &mut state)?;
    Ok(CoupledTrace {
        samples: state.samples,
        events,
        event_mismatches: state.event_mismatches,
    })
}

/// One replicate of the weight process alone, returning `zeta_t(site)` at
/// each sample time.
pub fn run_weighted(
    params: &SimParams,
    init: &WeightField,
    times: &[f64],
    site: usize,
    replicate: u64,
) -> Result<Vec<f64>, EngineError> {
    let torus = params.validate()?;
    params.check_samples(times)?;
    if init.len() != torus.len() {
        return Err(EngineError::SizeMismatch {
            expected: torus.len(),
            actual: init.len(),
        });
    }
    let (clock, accept) = clock_accept(params, None)?;
    let mut stream = EventStream::new(
        replicate_rng(params.seed, replicate),
        torus.len(),
        torus.degree(),
        clock,
    );
    struct Weighted<'a> {
        model: &'a dyn ContactModel,
        torus: &'a Torus,
        accept: f64,
        times: &'a [f64],
        site: usize,
        field: WeightField,
        out: Vec<f64>,
    }
    impl Driven for Weighted<'_> {
        fn apply(&mut self, ev: &Event) -> Result<bool, EngineError> {
            step_weighted(self.model, &mut self.field, self.torus, ev, self.accept)?;
            Ok(!self.field.is_all_zero())
        }
        fn record(&mut self, i: usize) {
            self.out[i] = self.field.value(self.site, self.times[i]);
        }
    }
    let mut state = Weighted {
        model: params.model.0,
        torus: &torus,
        accept,
        times,
        site,
        field: init.clone(),
        out: vec![0.0; times.len()],
    };
    drive(&mut stream, params.t_max, times, &mut state)?;
    Ok(state.out)
}

/// Replicate mean of `zeta_t(site)`.
pub fn weighted_mean(
    params: &SimParams,
    init: &WeightField,
    times: &[f64],
    site: usize,
    replicates: u64,
) -> Result<Vec<MeanEstimate>, EngineError> {
    if replicates == 0 {
        return Err(EngineError::NoReplicates);
    }
    let runs: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| run_weighted(params, init, times, site, r))
        .collect::<Result<_, _>>()?;
    Ok((0..times.len())
        .map(|i| mean_se(&runs.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use crate::model::{Classic, ThresholdOne};
    use crate::rng::replicate_rng;

    fn params(dim: usize, side: usize, lambda: f64, t_max: f64) -> SimParams {
        SimParams {
            dim,
            lambda,
            model: ModelRef::threshold(),
            side,
            t_max,
            seed: 2024,
        }
    }

    fn infect(site: usize, slot: usize) -> Event {
        Event {
            time: 1.0,
            site,
            kind: EventKind::Infect { slot, mark: 0.0 },
        }
    }

    fn death(site: usize) -> Event {
        Event {
            time: 1.0,
            site,
            kind: EventKind::Death,
        }
    }

    #[test]
    fn all_zero_is_absorbing_for_spins() {
        let torus = Torus::new(2, 4).unwrap();
        for model in [&ThresholdOne as &dyn ContactModel, &Classic] {
            let mut f = SpinField::all_zeros(torus.len());
            for site in 0..torus.len() {
                for slot in 0..4 {
                    step_spin(model, &mut f, &torus, &infect(site, slot), 1.0);
                }
                step_spin(model, &mut f, &torus, &death(site), 1.0);
            }
            assert!(f.is_all_zero());
        }
    }

    #[test]
    fn death_clears_one_site_of_delta_one() {
        let torus = Torus::new(2, 4).unwrap();
        let mut f = SpinField::all_ones(torus.len());
        step_spin(&ThresholdOne, &mut f, &torus, &death(5), 1.0);
        assert_eq!(f.infected(), torus.len() - 1);
        assert!(!f.get(5));
    }

    #[test]
    fn threshold_rule_in_one_dimension() {
        let torus = Torus::new(1, 8).unwrap();
        let mut bits = vec![false; 8];
        bits[3] = true;
        let mut f = SpinField::from_bits(bits);
        step_spin(&ThresholdOne, &mut f, &torus, &infect(5, 0), 1.0);
        assert!(!f.get(5), "two steps away stays healthy");
        step_spin(&ThresholdOne, &mut f, &torus, &infect(4, 0), 1.0);
        assert!(f.get(4), "right neighbor of the infected site catches it");
    }

    #[test]
    fn classic_rule_uses_the_drawn_neighbor_only() {
        let torus = Torus::new(2, 4).unwrap();
        let x = torus.index(&Site::new([1, 1])).unwrap();
        let plus_e1 = torus.neighbor(x, 0);
        let mut bits = vec![false; torus.len()];
        bits[plus_e1] = true;
        let base = SpinField::from_bits(bits);
        let hits: Vec<bool> = (0..4)
            .map(|slot| {
                let mut f = base.clone();
                step_spin(&Classic, &mut f, &torus, &infect(x, slot), 1.0);
                f.get(x)
            })
            .collect();
        // one infected neighbor out of 2d = 4: exactly one slot infects
        assert_eq!(hits, vec![true, false, false, false]);

        let mut all = vec![false; torus.len()];
        for &n in torus.neighbors(x) {
            all[n as usize] = true;
        }
        let base = SpinField::from_bits(all);
        for slot in 0..4 {
            let mut f = base.clone();
            step_spin(&Classic, &mut f, &torus, &infect(x, slot), 1.0);
            assert!(f.get(x));
        }
    }

    #[test]
    fn thinned_events_do_nothing() {
        let torus = Torus::new(1, 8).unwrap();
        let mut f = SpinField::from_bits([true, false, false, false, false, false, false, false]);
        let ev = Event {
            time: 0.5,
            site: 1,
            kind: EventKind::Infect { slot: 1, mark: 0.7 },
        };
        step_spin(&ThresholdOne, &mut f, &torus, &ev, 0.5);
        assert!(!f.get(1));
        step_spin(&ThresholdOne, &mut f, &torus, &ev, 0.8);
        assert!(f.get(1));
    }

    #[test]
    fn zero_weights_stay_zero() {
        let torus = Torus::new(2, 4).unwrap();
        let mut w = WeightField::uniform(torus.len(), 0.0, 0.3);
        let mut stream = EventStream::new(replicate_rng(3, 0), torus.len(), 4, 0.4);
        for _ in 0..500 {
            let ev = stream.next_event();
            step_weighted(&ThresholdOne, &mut w, &torus, &ev, 1.0).unwrap();
        }
        assert!(w.is_all_zero());
    }

    #[test]
    fn single_infection_event_follows_the_ode() {
        let torus = Torus::new(1, 8).unwrap();
        let lambda = 0.2;
        let drift = 1.0 - 2.0 * lambda;
        let mut w = WeightField::point_mass(torus.len(), 3, drift);
        let s = 1.7;
        let ev = Event {
            time: s,
            site: 3,
            kind: EventKind::Infect { slot: 0, mark: 0.0 },
        };
        step_weighted(&ThresholdOne, &mut w, &torus, &ev, 1.0).unwrap();
        assert!((w.value(3, s) - (drift * s).exp()).abs() < 1e-12);
    }

    #[test]
    fn pure_death_weights_grow_and_die() {
        // lambda = 0: drift e^t, deaths zero sites permanently
        let p = params(1, 8, 0.0, 3.0);
        let init = WeightField::uniform(8, 1.0, p.drift());
        let times = [0.0, 0.5, 1.0, 2.0, 3.0];
        let tr = run_coupled(&p, &init, &times, 0).unwrap();
        let mut dead = vec![false; 8];
        for s in &tr.samples {
            for x in 0..8 {
                let alive = s.log_weights[x] > f64::NEG_INFINITY;
                assert!(!(dead[x] && alive));
                if alive {
                    assert!((s.log_weights[x] - s.time).abs() < 1e-12);
                } else {
                    dead[x] = true;
                }
            }
        }
    }

    #[test]
    fn coupling_holds_at_time_zero_and_after_each_event() {
        let p = params(2, 8, 0.1, 5.0);
        let init = WeightField::uniform(64, 1.0, p.drift());
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let tr = run_coupled(&p, &init, &times, 7).unwrap();
        assert_eq!(tr.samples[0].mismatches(), 0);
        assert_eq!(tr.sample_mismatches(), 0);
        assert_eq!(tr.event_mismatches, 0);
        assert!(tr.events > 100);
    }

    #[test]
    fn coupled_run_rejects_nonpositive_init() {
        let p = params(1, 8, 0.1, 1.0);
        let init = WeightField::point_mass(8, 0, p.drift());
        assert_eq!(run_coupled(&p, &init, &[0.5], 0).unwrap_err(), EngineError::NonPositiveInit);
    }

    #[test]
    fn forward_runs_are_reproducible() {
        let p = params(2, 8, 0.3, 2.0);
        let init = SpinField::all_ones(64);
        let times = [0.0, 1.0, 2.0];
        let a = run_forward(&p, &init, &times, 11).unwrap();
        let b = run_forward(&p, &init, &times, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.origin[0]);
        assert_eq!(a.density[0], 1.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let p = params(1, 8, 0.1, 1.0);
        let init = SpinField::all_ones(8);
        assert!(matches!(run_forward(&p, &init, &[2.0], 0), Err(EngineError::BadSampleTimes { .. })));
        assert!(matches!(run_forward(&p, &init, &[0.5, 0.2], 0), Err(EngineError::BadSampleTimes { .. })));
        assert!(matches!(
            run_forward(&p, &SpinField::all_ones(4), &[0.5], 0),
            Err(EngineError::SizeMismatch { .. })
        ));
        let mut q = p.clone();
        q.side = 6 + 1;
        assert!(matches!(run_forward(&q, &init, &[0.5], 0), Err(EngineError::Lattice(_))));
        q = p.clone();
        q.lambda = -1.0;
        assert!(matches!(run_forward(&q, &init, &[0.5], 0), Err(EngineError::BadLambda(_))));
        assert!(matches!(
            run_forward_with_clock(&p, Some(0.05), &init, &[0.5], 0),
            Err(EngineError::SlowClock { .. })
        ));
    }

    #[test]
    fn thinned_clock_couples_monotonically_in_lambda() {
        let init = SpinField::all_ones(64);
        let times: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        for r in 0..20 {
            let lo = run_forward_with_clock(&params(1, 64, 0.1, 2.0), Some(0.3), &init, &times, r).unwrap();
            let hi = run_forward_with_clock(&params(1, 64, 0.3, 2.0), Some(0.3), &init, &times, r).unwrap();
            for i in 0..times.len() {
                assert!(lo.density[i] <= hi.density[i]);
                assert!(!lo.origin[i] || hi.origin[i]);
            }
        }
    }
}
