//! Small numeric helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Absolute slack `1e-10 · max(1, |terms|…)` used by the inequality checkers.
pub fn scaled_slack(base: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    base * scale
}

/// `true` when `lhs >= rhs` up to [`scaled_slack`] of the compared terms.
pub fn geq_with_slack(lhs: f64, rhs: f64, base: f64, extra_terms: &[f64]) -> bool {
    let mut terms = vec![lhs, rhs];
    terms.extend_from_slice(extra_terms);
    lhs >= rhs - scaled_slack(base, &terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(csum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn slack_scales_with_magnitude() {
        assert!(geq_with_slack(1e6, 1e6 + 1e-5, 1e-10, &[]));
        assert!(!geq_with_slack(1.0, 1.0 + 1e-9, 1e-10, &[]));
    }
}
