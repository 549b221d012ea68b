use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Cdf;

/// Right-continuous step CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Scalar> EmpiricalCdf<T> {
    /// Sorts the samples. Rejects an empty list and non-finite values.
    pub fn new(mut samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidDistribution(format!("non-finite sample {bad}")));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { sorted: samples })
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_samples(&self) -> &[T] {
        &self.sorted
    }

    pub fn min(&self) -> T {
        self.sorted[0]
    }

    pub fn max(&self) -> T {
        self.sorted[self.sorted.len() - 1]
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: T) -> T {
        let k = self.sorted.partition_point(|s| *s <= x);
        T::of_usize(k) / T::of_usize(self.count())
    }

    /// Fraction of samples `< x`.
    pub fn eval_left(&self, x: T) -> T {
        let k = self.sorted.partition_point(|s| *s < x);
        T::of_usize(k) / T::of_usize(self.count())
    }

    /// Smallest sample `s` with `eval(s) >= p`, for `p` in `(0, 1]`.
    pub fn quantile(&self, p: T) -> T {
        let n = self.count();
        let nf = T::of_usize(n);
        let mut k = (p * nf).ceil().to_usize().unwrap_or(1).clamp(1, n);
        while k > 1 && T::of_usize(k - 1) / nf >= p {
            k -= 1;
        }
        while k < n && T::of_usize(k) / nf < p {
            k += 1;
        }
        self.sorted[k - 1]
    }

    /// Distinct sample values with their relative frequencies.
    pub fn atoms(&self) -> (Vec<T>, Vec<T>) {
        let nf = T::of_usize(self.count());
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut i = 0;
        while i < self.sorted.len() {
            let v = self.sorted[i];
            let mut j = i + 1;
            while j < self.sorted.len() && self.sorted[j] == v {
                j += 1;
            }
            points.push(v);
            masses.push(T::of_usize(j - i) / nf);
            i = j;
        }
        (points, masses)
    }
}

impl<T: Scalar> Cdf<T> for EmpiricalCdf<T> {
    fn cdf(&self, x: T) -> T {
        self.eval(x)
    }

    fn cdf_left(&self, x: T) -> T {
        self.eval_left(x)
    }

    fn breakpoints(&self) -> Vec<T> {
        let mut pts = self.sorted.clone();
        pts.dedup();
        pts
    }
}

/// Builds the empirical CDF of `samples`.
pub fn build_empirical<T: Scalar>(samples: &[T]) -> Result<EmpiricalCdf<T>> {
    EmpiricalCdf::new(samples.to_vec())
}
