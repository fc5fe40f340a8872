//! Contact-model strategies.
//!
//! The threshold-one and classic contact processes differ in exactly one
//! place: which neighbors take part in an infection event. Everything else
//! (forward spin dynamics, weighted auxiliary processes, set-valued duals,
//! second-moment operators and fixed-point equations) is written once
//! against [`ContactModel`] and selected at runtime by name.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::UnknownStrategy;
use crate::lattice::Site;

/// Neighbor slots that participate in one infection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sources {
    /// Every neighbor (threshold-one rule).
    All,
    /// One preselected neighbor slot (classic rule).
    One(usize),
}

impl Sources {
    /// Visit each participating slot out of `degree` neighbors.
    #[inline]
    pub fn for_each(self, degree: usize, mut f: impl FnMut(usize)) {
        match self {
            Sources::All => (0..degree).for_each(&mut f),
            Sources::One(slot) => f(slot),
        }
    }
}

pub trait ContactModel: Send + Sync {
    /// Registry key.
    fn name(&self) -> &'static str;

    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    /// Per-site rate of infection clocks.
    fn infection_clock_rate(&self, lambda: f64, dim: usize) -> f64;

    /// Neighbors consulted by an infection event whose uniformly drawn
    /// neighbor slot is `slot`.
    fn sources(&self, slot: usize) -> Sources;

    /// Nonzero entries `(column, coefficient)` of the origin row of the
    /// second-moment operator.
    fn origin_row(&self, lambda: f64, dim: usize) -> Vec<(Site, f64)>;

    /// The decreasing function of `p` whose root defines the fixed point,
    /// given `r_e1 = R(e1, d, p)`. Decreasing in `r_e1` as well.
    fn fixed_point_function(&self, lambda: f64, dim: usize, p: f64, r_e1: f64) -> f64;
}

impl fmt::Debug for dyn ContactModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Threshold-one contact process: a healthy site with at least one
/// infected neighbor is infected at rate `lambda`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThresholdOne;

impl ContactModel for ThresholdOne {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["threshold-one"]
    }

    fn infection_clock_rate(&self, lambda: f64, _dim: usize) -> f64 {
        lambda
    }

    fn sources(&self, _slot: usize) -> Sources {
        Sources::All
    }

    fn origin_row(&self, lambda: f64, dim: usize) -> Vec<(Site, f64)> {
        let ld = lambda * dim as f64;
        let origin = Site::origin(dim);
        let e1 = Site::unit(dim, 0);
        let mut row = vec![(origin.clone(), 1.0 - 2.0 * ld), (e1.clone(), 2.0 * ld)];
        // z ~ e1 with z != O
        for slot in 0..2 * dim {
            let z = e1.neighbor(slot).expect("unit vector neighbors fit in i32");
            if z != origin {
                row.push((z, 2.0 * ld));
            }
        }
        row
    }

    fn fixed_point_function(&self, lambda: f64, dim: usize, p: f64, r_e1: f64) -> f64 {
        let d = dim as f64;
        let ld = lambda * d;
        4.0 * ld / p * (1.0 - d * r_e1) - 1.0 - 2.0 * ld * r_e1
    }
}

/// Classic contact process: infection at rate `lambda` times the number of
/// infected neighbors, realized as rate-`2 d lambda` clocks that each pick
/// one neighbor uniformly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Classic;

impl ContactModel for Classic {
    fn name(&self) -> &'static str {
        "classic"
    }

    fn infection_clock_rate(&self, lambda: f64, dim: usize) -> f64 {
        2.0 * dim as f64 * lambda
    }

    fn sources(&self, slot: usize) -> Sources {
        Sources::One(slot)
    }

    fn origin_row(&self, lambda: f64, dim: usize) -> Vec<(Site, f64)> {
        let ld = lambda * dim as f64;
        vec![
            (Site::origin(dim), 1.0 - 2.0 * ld),
            (Site::unit(dim, 0), 4.0 * ld),
        ]
    }

    fn fixed_point_function(&self, lambda: f64, dim: usize, p: f64, r_e1: f64) -> f64 {
        let ld = lambda * dim as f64;
        4.0 * ld / p - 2.0 * ld - 1.0 - 4.0 * ld * r_e1
    }
}

static THRESHOLD: ThresholdOne = ThresholdOne;
static CLASSIC: Classic = Classic;
static MODELS: [&dyn ContactModel; 2] = [&THRESHOLD, &CLASSIC];

/// All registered models.
pub fn registry() -> &'static [&'static dyn ContactModel] {
    &MODELS
}

pub fn lookup(name: &str) -> Result<&'static dyn ContactModel, UnknownStrategy> {
    MODELS
        .iter()
        .copied()
        .find(|m| m.name() == name || m.aliases().contains(&name))
        .ok_or_else(|| UnknownStrategy {
            kind: "model",
            name: name.to_string(),
            known: MODELS.iter().map(|m| m.name()).collect(),
        })
}

/// A model handle that serializes as its registry name.
#[derive(Clone, Copy)]
pub struct ModelRef(pub &'static dyn ContactModel);

impl ModelRef {
    pub fn threshold() -> Self {
        ModelRef(&THRESHOLD)
    }

    pub fn classic() -> Self {
        ModelRef(&CLASSIC)
    }

    pub fn by_name(name: &str) -> Result<Self, UnknownStrategy> {
        lookup(name).map(ModelRef)
    }

    pub fn name(&self) -> &'static str {
        self.0.name()
    }
}

impl std::ops::Deref for ModelRef {
    type Target = dyn ContactModel;

    fn deref(&self) -> &Self::Target {
        self.0
    }
}

impl fmt::Debug for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for ModelRef {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Serialize for ModelRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ModelRef::by_name(&name).map_err(serde::de::Error::custom)
    }
}

/// `c(lambda) = 4 lambda / (1 + 2 lambda)`, the large-dimension limit of the
/// scaled fixed point for either model.
pub fn limit_fixed_point(lambda: f64) -> f64 {
    4.0 * lambda / (1.0 + 2.0 * lambda)
}
