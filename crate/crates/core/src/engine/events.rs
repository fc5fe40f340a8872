use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// A ring of the rate-1 recovery clock `N_x`.
    Death,
    /// A ring of the infection clock `Y_x`. `slot` is a uniformly drawn
    /// neighbor slot and `mark` a uniform variate in `[0, 1)` used for
    /// thinning when the clock runs faster than the model rate.
    Infect { slot: usize, mark: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: usize,
    pub kind: EventKind,
}

/// Merged stream of all per-site clocks on `n` sites: inter-event times are
/// exponential with rate `(1 + infect_rate) n`, the site is uniform and the
/// kind is a death with probability `1 / (1 + infect_rate)`.
///
/// Draw order per event: waiting time, site, kind, then (infection only)
/// slot and mark.
#[derive(Debug, Clone)]
pub struct EventStream {
    rng: SimRng,
    n_sites: usize,
    degree: usize,
    death_prob: f64,
    waiting: Exp<f64>,
    time: f64,
}

impl EventStream {
    pub fn new(rng: SimRng, n_sites: usize, degree: usize, infect_rate: f64) -> Self {
        assert!(n_sites > 0 && degree > 0);
        assert!(infect_rate >= 0.0 && infect_rate.is_finite());
        let per_site = 1.0 + infect_rate;
        EventStream {
            rng,
            n_sites,
            degree,
            death_prob: 1.0 / per_site,
            waiting: Exp::new(per_site * n_sites as f64).expect("positive rate"),
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn total_rate(&self) -> f64 {
        self.n_sites as f64 / self.death_prob
    }

    pub fn next_event(&mut self) -> Event {
        self.time += self.waiting.sample(&mut self.rng);
        let site = self.rng.random_range(0..self.n_sites);
        let kind = if self.rng.random::<f64>() < self.death_prob {
            EventKind::Death
        } else {
            EventKind::Infect {
                slot: self.rng.random_range(0..self.degree),
                mark: self.rng.random(),
            }
        };
        Event {
            time: self.time,
            site,
            kind,
        }
    }
}

impl Iterator for EventStream {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        Some(self.next_event())
    }
}
