use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest agent count a policy supports (argmax sets are bitmasks).
pub const MAX_AGENTS: usize = 32;

/// How an item is split when several agents share the top score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
#[serde(bound = "T: Scalar")]
pub enum TieBreak<T> {
    Uniform,
    LowestIndex,
    /// Member weights per argmax set, keyed by bitmask. Weights are listed
    /// in ascending agent order. Sets missing from the table split uniformly.
    Table { weights: BTreeMap<u32, Vec<T>> },
}

/// Greedy allocation: the item goes to `argmax_j (x_j + λ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GreedyPolicy<T> {
    lambda: Vec<T>,
    tie_break: TieBreak<T>,
}

/// Agents in `mask`, ascending.
pub fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..MAX_AGENTS).filter(move |i| mask & (1 << i) != 0)
}

impl<T: Scalar> GreedyPolicy<T> {
    /// Normalizes so that the last offset is zero; uniform tie-break.
    pub fn new(lambda: Vec<T>) -> Result<Self> {
        let n = lambda.len();
        if n < 2 {
            return Err(Error::TooFewAgents(n));
        }
        if n > MAX_AGENTS {
            return Err(Error::Unsupported(format!("{n} agents (max {MAX_AGENTS})")));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidConfig("non-finite offset".into()));
        }
        let last = lambda[n - 1];
        let lambda = lambda.into_iter().map(|l| l - last).collect();
        Ok(Self { lambda, tie_break: TieBreak::Uniform })
    }

    /// All-zero offsets.
    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![T::zero(); n])
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak<T>) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn tie_break(&self) -> &TieBreak<T> {
        &self.tie_break
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Bitmask of agents whose score is within tolerance of the maximum.
    pub fn argmax_set(&self, values: &[T]) -> u32 {
        let mut best = T::neg_infinity();
        for (x, l) in values.iter().zip(&self.lambda) {
            best = best.max(*x + *l);
        }
        let floor = best - T::tie_tolerance(best);
        let mut mask = 0u32;
        for (j, (x, l)) in values.iter().zip(&self.lambda).enumerate() {
            if *x + *l >= floor {
                mask |= 1 << j;
            }
        }
        mask
    }

    /// Probability that agent `i` receives an item whose argmax set is `mask`.
    pub fn tie_weight(&self, mask: u32, i: usize) -> T {
        if mask & (1 << i) == 0 {
            return T::zero();
        }
        let size = mask.count_ones() as usize;
        if size == 1 {
            return T::one();
        }
        let uniform = T::one() / T::of_usize(size);
        match &self.tie_break {
            TieBreak::Uniform => uniform,
            TieBreak::LowestIndex => {
                if mask.trailing_zeros() as usize == i {
                    T::one()
                } else {
                    T::zero()
                }
            }
            TieBreak::Table { weights } => match weights.get(&mask) {
                Some(w) => {
                    let total: T = w.iter().copied().sum();
                    if total <= T::zero() {
                        return uniform;
                    }
                    let pos = members(mask).position(|j| j == i).expect("member");
                    w[pos] / total
                }
                None => uniform,
            },
        }
    }

    /// Winner for the given values.
    pub fn allocate<R: Rng + ?Sized>(&self, values: &[T], rng: &mut R) -> Result<usize> {
        if values.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: values.len() });
        }
        let mask = self.argmax_set(values);
        if mask.count_ones() == 1 {
            return Ok(mask.trailing_zeros() as usize);
        }
        let set: Vec<usize> = members(mask).collect();
        match &self.tie_break {
            TieBreak::LowestIndex => Ok(set[0]),
            TieBreak::Uniform => Ok(set[rng.gen_range(0..set.len())]),
            TieBreak::Table { .. } => {
                let u = T::of(rng.gen::<f64>());
                let mut acc = T::zero();
                for &j in &set {
                    acc += self.tie_weight(mask, j);
                    if u < acc {
                        return Ok(j);
                    }
                }
                Ok(*set.last().expect("non-empty"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn allocate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GreedyPolicy::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(p.allocate(&[0.7, 0.2], &mut rng).unwrap(), 0);
        let p = GreedyPolicy::new(vec![0.3, 0.0]).unwrap();
        assert_eq!(p.allocate(&[0.2, 0.4], &mut rng).unwrap(), 0);
        let p = GreedyPolicy::new(vec![0.0, 0.0]).unwrap();
        let n = 100_000;
        let first = (0..n).filter(|_| p.allocate(&[0.5, 0.5], &mut rng).unwrap() == 0).count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((first as f64 - 0.5 * n as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn normalized_and_shift_invariant() {
        let p = GreedyPolicy::new(vec![0.5, 0.2, 0.1]).unwrap();
        assert_eq!(p.lambda()[2], 0.0);
        let q = GreedyPolicy::new(vec![0.87, 0.57, 0.47]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in [[0.1, 0.3, 0.6], [0.4, 0.9, 0.1], [0.0, 0.0, 0.9]] {
            assert_eq!(p.allocate(&v, &mut rng).unwrap(), q.allocate(&v, &mut rng).unwrap());
        }
    }

    #[test]
    fn tie_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GreedyPolicy::<f64>::zeros(3).unwrap().with_tie_break(TieBreak::LowestIndex);
        assert_eq!(p.allocate(&[0.1, 0.5, 0.5], &mut rng).unwrap(), 1);
        let mut weights = BTreeMap::new();
        weights.insert(0b110, vec![0.0, 1.0]);
        let p = GreedyPolicy::<f64>::zeros(3)
            .unwrap()
            .with_tie_break(TieBreak::Table { weights });
        for _ in 0..100 {
            assert_eq!(p.allocate(&[0.1, 0.5, 0.5], &mut rng).unwrap(), 2);
        }
        assert_eq!(p.tie_weight(0b011, 0), 0.5);
        assert_eq!(p.tie_weight(0b110, 0), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(GreedyPolicy::new(vec![0.0f64]), Err(Error::TooFewAgents(1)));
        let p = GreedyPolicy::<f64>::zeros(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(p.allocate(&[0.1], &mut rng).is_err());
    }
}
