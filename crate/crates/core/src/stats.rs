//! Small statistics toolkit: closed intervals, Wilson score intervals and
//! exact integer accumulators for replicate aggregation.

use serde::{Deserialize, Serialize};

/// z-score of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn around(mid: f64, half_width: f64) -> Self {
        Interval::new(mid - half_width, mid + half_width)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        Interval::new(self.lo.clamp(lo, hi), self.hi.clamp(lo, hi))
    }
}

/// Wilson score interval for `successes` out of `trials` at z-score `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval::new(0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Interval::new(lo, hi)
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_se(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    (p * (1.0 - p) / n).sqrt()
}

/// Delta-method standard error of `log p_hat`: `sqrt((1-p)/(n p))`.
pub fn log_binomial_se(successes: u64, trials: u64) -> f64 {
    if successes == 0 || trials == 0 {
        return f64::INFINITY;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    ((1.0 - p) / (n * p)).sqrt()
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: u64,
}

/// Running sums over integer-valued samples; merging is exact, so the
/// result does not depend on replicate order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntMoments {
    pub count: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl IntMoments {
    pub fn push(&mut self, x: u64) {
        self.count += 1;
        self.sum += u128::from(x);
        self.sum_sq += u128::from(x) * u128::from(x);
    }

    pub fn merge(&mut self, other: &IntMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> MeanEstimate {
        let n = self.count as f64;
        let mean = self.sum as f64 / n;
        let var = if self.count > 1 {
            ((self.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            se: (var / n).sqrt(),
            samples: self.count,
        }
    }
}

/// Mean and standard error of real samples, summed in the given order.
pub fn mean_se(samples: &[f64]) -> MeanEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        se: (var / n).sqrt(),
        samples: samples.len() as u64,
    }
}

/// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
pub fn agree_within(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * se_a.hypot(se_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // 8/10 at 95%: reference interval [0.4902, 0.9433]
        let ci = wilson(8, 10, Z95);
        assert!((ci.lo - 0.4902).abs() < 1e-4, "{ci:?}");
        assert!((ci.hi - 0.9433).abs() < 1e-4, "{ci:?}");
        let all = wilson(10, 10, Z95);
        assert_eq!(all.hi, 1.0);
        assert!(all.lo > 0.6);
        let none = wilson(0, 10, Z95);
        assert_eq!(none.lo, 0.0);
        assert!(none.hi > 0.2 && none.hi < 0.35);
    }

    #[test]
    fn int_moments_merge_is_order_free() {
        let xs = [3u64, 0, 7, 7, 1, 12];
        let mut a = IntMoments::default();
        xs.iter().for_each(|&x| a.push(x));
        let mut b = IntMoments::default();
        let mut c = IntMoments::default();
        xs[..2].iter().for_each(|&x| c.push(x));
        xs[2..].iter().rev().for_each(|&x| b.push(x));
        b.merge(&c);
        assert_eq!(a, b);
        let e = a.estimate();
        assert!((e.mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn interval_helpers() {
        let i = Interval::around(1.0, 0.25);
        assert_eq!(i.width(), 0.5);
        assert!(i.contains(1.2));
        assert!(!i.contains(1.3));
        assert!(agree_within(1.0, 0.1, 1.2, 0.1, 3.0));
        assert!(!agree_within(1.0, 0.01, 1.2, 0.01, 3.0));
    }
}
