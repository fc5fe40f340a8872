use serde::{Deserialize, Serialize};

/// A 0/1 configuration on the sites of a torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinField {
    spins: Vec<bool>,
    infected: usize,
}

impl SpinField {
    /// `delta_1`: every site infected.
    pub fn all_ones(n: usize) -> Self {
        SpinField {
            spins: vec![true; n],
            infected: n,
        }
    }

    /// `delta_0`: every site healthy.
    pub fn all_zeros(n: usize) -> Self {
        SpinField {
            spins: vec![false; n],
            infected: 0,
        }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let spins: Vec<bool> = bits.into_iter().collect();
        let infected = spins.iter().filter(|&&b| b).count();
        SpinField { spins, infected }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.spins[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: bool) {
        let old = std::mem::replace(&mut self.spins[idx], value);
        match (old, value) {
            (false, true) => self.infected += 1,
            (true, false) => self.infected -= 1,
            _ => {}
        }
    }

    pub fn infected(&self) -> usize {
        self.infected
    }

    pub fn density(&self) -> f64 {
        self.infected as f64 / self.spins.len() as f64
    }

    pub fn is_all_zero(&self) -> bool {
        self.infected == 0
    }

    pub fn bits(&self) -> &[bool] {
        &self.spins
    }

    /// Pointwise `self <= other`.
    pub fn dominated_by(&self, other: &SpinField) -> bool {
        self.spins.iter().zip(&other.spins).all(|(&a, &b)| !a || b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_track_updates() {
        let mut f = SpinField::all_zeros(5);
        f.set(2, true);
        f.set(2, true);
        f.set(4, true);
        assert_eq!(f.infected(), 2);
        f.set(2, false);
        assert_eq!(f.infected(), 1);
        assert_eq!(f, SpinField::from_bits([false, false, false, false, true]));
        assert!(f.dominated_by(&SpinField::all_ones(5)));
        assert!(!SpinField::all_ones(5).dominated_by(&f));
    }
}
