/// Nonnegative weights per torus site under the deterministic drift
/// `dw/dt = r w` between events, with `r = 1 - 2 lambda d`.
///
/// Stored as `log w(x, t) - r t`, which is constant between events at `x`,
/// so drift costs nothing and reconstruction is `exp(stored + r t)`. Zero
/// weights are `-inf`, which keeps positivity exact at any horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    log_ref: Vec<f64>,
    drift: f64,
}

impl WeightField {
    /// Weights equal to `values` at time 0.
    pub fn from_values(values: &[f64], drift: f64) -> Self {
        assert!(values.iter().all(|&v| v >= 0.0 && v.is_finite()));
        WeightField {
            log_ref: values.iter().map(|v| v.ln()).collect(),
            drift,
        }
    }

    pub fn uniform(n: usize, value: f64, drift: f64) -> Self {
        Self::from_values(&vec![value; n], drift)
    }

    /// Indicator of a single site at time 0.
    pub fn point_mass(n: usize, site: usize, drift: f64) -> Self {
        let mut v = vec![0.0; n];
        v[site] = 1.0;
        Self::from_values(&v, drift)
    }

    pub fn len(&self) -> usize {
        self.log_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_ref.is_empty()
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    #[inline]
    pub fn is_positive(&self, idx: usize) -> bool {
        self.log_ref[idx] > f64::NEG_INFINITY
    }

    /// `log w(idx, t)`, `-inf` for zero.
    #[inline]
    pub fn log_value(&self, idx: usize, t: f64) -> f64 {
        self.log_ref[idx] + self.drift * t
    }

    #[inline]
    pub fn value(&self, idx: usize, t: f64) -> f64 {
        self.log_value(idx, t).exp()
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, t)).collect()
    }

    pub fn is_all_zero(&self) -> bool {
        self.log_ref.iter().all(|&l| l == f64::NEG_INFINITY)
    }

    #[inline]
    pub(crate) fn kill(&mut self, idx: usize) {
        self.log_ref[idx] = f64::NEG_INFINITY;
    }

    /// `w(idx) <- w(idx) + sum of w(src)`, all read at the same instant.
    /// The common drift factor cancels, so the event time is not needed.
    pub(crate) fn accumulate(&mut self, idx: usize, sources: &[usize]) -> f64 {
        let mut top = self.log_ref[idx];
        for &s in sources {
            top = top.max(self.log_ref[s]);
        }
        if top == f64::NEG_INFINITY {
            return top;
        }
        let mut acc = (self.log_ref[idx] - top).exp();
        for &s in sources {
            acc += (self.log_ref[s] - top).exp();
        }
        let out = top + acc.ln();
        self.log_ref[idx] = out;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_is_exponential() {
        let w = WeightField::from_values(&[2.0, 0.0], 0.4);
        assert!((w.value(0, 1.5) - 2.0 * (0.6f64).exp()).abs() < 1e-12);
        assert_eq!(w.value(1, 3.0), 0.0);
        assert!(w.is_positive(0));
        assert!(!w.is_positive(1));
    }

    #[test]
    fn accumulate_adds_values_at_a_common_time() {
        let mut w = WeightField::from_values(&[1.0, 3.0, 0.0], -0.2);
        w.accumulate(2, &[0, 1]);
        let t = 2.0;
        let want = 4.0 * (-0.2f64 * t).exp();
        assert!((w.value(2, t) - want).abs() < 1e-12);
        let mut z = WeightField::uniform(3, 0.0, 1.0);
        z.accumulate(0, &[1, 2]);
        assert!(z.is_all_zero());
    }

    #[test]
    fn huge_horizons_keep_positivity() {
        let w = WeightField::from_values(&[1e-300], -50.0);
        assert!(w.is_positive(0));
        assert_eq!(w.value(0, 100.0), 0.0);
        assert!(w.log_value(0, 100.0).is_finite());
    }
}
