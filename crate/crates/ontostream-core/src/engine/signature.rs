//! Materialised window signatures: the per-window statistics computed when
//! a window is archived, from which later analytics are answered without
//! (or with less) raw measurement access.

use crate::fmath;

/// Count, sum, mean, population variance, min, max, and Euclidean norm of
/// one archived window's measurements.
///
/// Variance is the population variance (division by `n`), which makes the
/// signature-based Pearson computation algebraically identical to the
/// direct one instead of an approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwsSignature {
    pub count: u64,
    pub sum: f64,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub norm: f64,
}

impl MwsSignature {
    pub fn std_dev(&self) -> f64 {
        fmath::sqrt(self.variance)
    }

    /// Sum of squares, recovered from the norm.
    pub fn sum_squares(&self) -> f64 {
        self.norm * self.norm
    }

    /// Signature of the concatenation of two windows. Count, sum, sum of
    /// squares, min, and max merge directly; mean and variance follow.
    pub fn merge(&self, other: &MwsSignature) -> MwsSignature {
        let count = self.count + other.count;
        let sum = self.sum + other.sum;
        let sum_squares = self.sum_squares() + other.sum_squares();
        let n = count as f64;
        let mean = sum / n;
        let variance = (sum_squares / n - mean * mean).max(0.0);
        MwsSignature {
            count,
            sum,
            mean,
            variance,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
            norm: fmath::sqrt(sum_squares),
        }
    }

    /// The internal consistency every stored signature satisfies:
    /// `‖x‖² ≥ n·μ²` up to a relative slack of 1e-9.
    pub fn is_consistent(&self) -> bool {
        let eps = 1e-9 * self.norm * self.norm;
        self.count >= 1
            && self.variance >= 0.0
            && self.norm * self.norm >= self.count as f64 * self.mean * self.mean - eps
    }
}

/// Single-pass signature computation. Empty windows yield `None`; they are
/// never archived.
pub fn compute_mws(values: &[f64]) -> Option<MwsSignature> {
    if values.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    let mut sum_squares = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        sum += v;
        sum_squares += v * v;
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
    }
    let n = values.len() as f64;
    let mean = sum / n;
    let variance = (sum_squares / n - mean * mean).max(0.0);
    Some(MwsSignature {
        count: values.len() as u64,
        sum,
        mean,
        variance,
        min,
        max,
        norm: fmath::sqrt(sum_squares),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_two_three() {
        let sig = compute_mws(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sig.count, 3);
        assert_eq!(sig.sum, 6.0);
        assert_eq!(sig.mean, 2.0);
        assert!((sig.variance - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(sig.min, 1.0);
        assert_eq!(sig.max, 3.0);
        assert!((sig.norm - 14.0f64.sqrt()).abs() < 1e-12);
        assert!(sig.is_consistent());
    }

    #[test]
    fn constant_series_has_zero_variance() {
        let sig = compute_mws(&[5.5; 10]).unwrap();
        assert_eq!(sig.variance, 0.0);
        assert_eq!(sig.min, 5.5);
        assert_eq!(sig.max, 5.5);
        assert_eq!(sig.std_dev(), 0.0);
    }

    #[test]
    fn empty_window_has_no_signature() {
        assert!(compute_mws(&[]).is_none());
    }

    #[test]
    fn merge_equals_signature_of_concatenation() {
        // Deterministic pseudo-random windows.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 100.0 - 50.0
        };
        for _ in 0..50 {
            let a: alloc::vec::Vec<f64> = (0..17).map(|_| next()).collect();
            let b: alloc::vec::Vec<f64> = (0..23).map(|_| next()).collect();
            let mut whole = a.clone();
            whole.extend_from_slice(&b);
            let merged = compute_mws(&a).unwrap().merge(&compute_mws(&b).unwrap());
            let direct = compute_mws(&whole).unwrap();
            assert_eq!(merged.count, direct.count);
            assert!((merged.sum - direct.sum).abs() <= 1e-9 * direct.sum.abs().max(1.0));
            assert!((merged.mean - direct.mean).abs() <= 1e-9);
            assert!((merged.variance - direct.variance).abs() <= 1e-9 * direct.variance.max(1.0));
            assert_eq!(merged.min, direct.min);
            assert_eq!(merged.max, direct.max);
            assert!((merged.norm - direct.norm).abs() <= 1e-9 * direct.norm.max(1.0));
        }
    }
}
