use std::collections::BTreeMap;

use crate::distributions::{DistKind, ValueDistribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::policy::{members, GreedyPolicy};

/// Largest agent count for exact argmax statistics.
pub const MAX_STATS_AGENTS: usize = 16;

// 10-point Gauss–Legendre rule on [-1, 1]; exact for polynomials of degree <= 19.
const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
    0.295_524_224_714_752_87,
    0.269_266_719_309_996_35,
    0.219_086_362_515_982_04,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// A value law in the form the argmax computations need.
#[derive(Debug, Clone)]
pub enum Law<T> {
    Uniform { lo: T, hi: T },
    Atomic { points: Vec<T>, masses: Vec<T>, prefix: Vec<T>, value_prefix: Vec<T> },
}

impl<T: Scalar> Law<T> {
    pub fn from_dist(dist: &ValueDistribution<T>) -> Result<Self> {
        if let DistKind::Uniform { lo, hi } = dist.kind() {
            return Ok(Law::Uniform { lo: *lo, hi: *hi });
        }
        let atoms = dist
            .atoms()
            .ok_or_else(|| Error::Unsupported("shifted continuous law in transport".into()))?;
        let mut prefix = Vec::with_capacity(atoms.points.len() + 1);
        let mut value_prefix = Vec::with_capacity(atoms.points.len() + 1);
        prefix.push(T::zero());
        value_prefix.push(T::zero());
        let (mut acc, mut vacc) = (T::zero(), T::zero());
        for (x, m) in atoms.points.iter().zip(&atoms.masses) {
            acc += *m;
            vacc += *x * *m;
            prefix.push(acc);
            value_prefix.push(vacc);
        }
        Ok(Law::Atomic { points: atoms.points, masses: atoms.masses, prefix, value_prefix })
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Law::Atomic { .. })
    }

    /// Number of atoms, zero for a continuous law.
    pub fn atom_count(&self) -> usize {
        match self {
            Law::Uniform { .. } => 0,
            Law::Atomic { points, .. } => points.len(),
        }
    }

    fn uniform_cdf(lo: T, hi: T, x: T) -> T {
        ((x - lo) / (hi - lo)).max(T::zero()).min(T::one())
    }

    /// `(P(X < c - tol), P(|X - c| <= tol), E[X; |X - c| <= tol])`.
    fn split(&self, c: T, tol: T) -> (T, T, T) {
        match self {
            Law::Uniform { lo, hi } => (Self::uniform_cdf(*lo, *hi, c), T::zero(), T::zero()),
            Law::Atomic { points, prefix, value_prefix, .. } => {
                let a = points.partition_point(|x| *x < c - tol);
                let b = points.partition_point(|x| *x <= c + tol);
                (prefix[a], prefix[b] - prefix[a], value_prefix[b] - value_prefix[a])
            }
        }
    }
}

/// Mass and value mass of one multi-agent argmax set.
#[derive(Debug, Clone, PartialEq)]
pub struct TieCell<T> {
    pub mass: T,
    /// `E[X_j; argmax set = K]` for members `j` in ascending order.
    pub value_mass: Vec<T>,
}

/// Joint law of the argmax set under i.i.d. values and fixed offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxStats<T> {
    pub n: usize,
    pub lambda: Vec<T>,
    /// `P(argmax set = {i})`.
    pub singleton_mass: Vec<T>,
    /// `E[X_i; argmax set = {i}]`.
    pub singleton_value: Vec<T>,
    pub ties: BTreeMap<u32, TieCell<T>>,
}

impl<T: Scalar> ArgmaxStats<T> {
    pub fn compute(law: &Law<T>, lambda: &[T]) -> Result<Self> {
        let n = lambda.len();
        if n < 2 {
            return Err(Error::TooFewAgents(n));
        }
        if n > MAX_STATS_AGENTS {
            return Err(Error::Unsupported(format!("{n} agents (max {MAX_STATS_AGENTS})")));
        }
        let mut out = Self {
            n,
            lambda: lambda.to_vec(),
            singleton_mass: vec![T::zero(); n],
            singleton_value: vec![T::zero(); n],
            ties: BTreeMap::new(),
        };
        match law {
            Law::Uniform { lo, hi } => out.fill_uniform(*lo, *hi),
            Law::Atomic { points, masses, prefix, value_prefix } => {
                out.fill_atomic(points, masses, prefix, value_prefix)
            }
        }
        Ok(out)
    }

    fn fill_uniform(&mut self, lo: T, hi: T) {
        let n = self.n;
        let width = hi - lo;
        let half = T::of(0.5);
        for i in 0..n {
            let shifts: Vec<T> = (0..n)
                .filter(|&j| j != i)
                .map(|j| self.lambda[i] - self.lambda[j])
                .collect();
            let mut cuts = vec![lo, hi];
            for c in &shifts {
                for b in [lo - *c, hi - *c] {
                    if b > lo && b < hi {
                        cuts.push(b);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            cuts.dedup();
            let (mut mass, mut value) = (T::zero(), T::zero());
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = half * (a + b);
                let rad = half * (b - a);
                if shifts.iter().any(|c| mid + *c <= lo) {
                    continue;
                }
                for (z, wt) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                    let x = mid + rad * T::of(*z);
                    let g: T = shifts
                        .iter()
                        .map(|c| Law::uniform_cdf(lo, hi, x + *c))
                        .fold(T::one(), |acc, f| acc * f);
                    let w = T::of(*wt) * rad * g;
                    mass += w;
                    value += w * x;
                }
            }
            self.singleton_mass[i] = mass / width;
            self.singleton_value[i] = value / width;
        }
    }

    fn fill_atomic(&mut self, points: &[T], masses: &[T], prefix: &[T], value_prefix: &[T]) {
        let n = self.n;
        let mut strict = vec![T::zero(); n];
        let mut equal = vec![T::zero(); n];
        let mut equal_value = vec![T::zero(); n];
        let mut tied: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            // c ± tol grows with the atom, so both cursors only move forward
            let mut below = vec![0usize; n];
            let mut upto = vec![0usize; n];
            for (x, m) in points.iter().zip(masses) {
                let s = *x + self.lambda[i];
                let tol = T::tie_tolerance(s);
                let mut head = *m;
                tied.clear();
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let c = s - self.lambda[j];
                    while below[j] < points.len() && points[below[j]] < c - tol {
                        below[j] += 1;
                    }
                    if upto[j] < below[j] {
                        upto[j] = below[j];
                    }
                    while upto[j] < points.len() && points[upto[j]] <= c + tol {
                        upto[j] += 1;
                    }
                    let (a, b) = (below[j], upto[j]);
                    strict[j] = prefix[a];
                    equal[j] = prefix[b] - prefix[a];
                    equal_value[j] = value_prefix[b] - value_prefix[a];
                    if j < i || b == a {
                        head *= strict[j];
                    } else {
                        tied.push(j);
                    }
                }
                if head <= T::zero() {
                    continue;
                }
                if tied.is_empty() {
                    self.singleton_mass[i] += head;
                    self.singleton_value[i] += head * *x;
                    continue;
                }
                // every subset of the agents that can tie with i (and sit above it)
                for sub in 0u32..(1u32 << tied.len()) {
                    let mut w = head;
                    let mut mask = 1u32 << i;
                    for (b, &j) in tied.iter().enumerate() {
                        if sub & (1 << b) != 0 {
                            w *= equal[j];
                            mask |= 1 << j;
                        } else {
                            w *= strict[j];
                        }
                    }
                    if w <= T::zero() {
                        continue;
                    }
                    if mask.count_ones() == 1 {
                        self.singleton_mass[i] += w;
                        self.singleton_value[i] += w * *x;
                        continue;
                    }
                    let cell = self.ties.entry(mask).or_insert_with(|| TieCell {
                        mass: T::zero(),
                        value_mass: vec![T::zero(); mask.count_ones() as usize],
                    });
                    cell.mass += w;
                    for (pos, j) in members(mask).enumerate() {
                        cell.value_mass[pos] += if j == i {
                            w * *x
                        } else {
                            w * equal_value[j] / equal[j]
                        };
                    }
                }
            }
        }
    }

    /// Win probabilities under the policy's tie rule.
    pub fn allocation_probabilities(&self, policy: &GreedyPolicy<T>) -> Vec<T> {
        let mut p = self.singleton_mass.clone();
        for (mask, cell) in &self.ties {
            for j in members(*mask) {
                p[j] += cell.mass * policy.tie_weight(*mask, j);
            }
        }
        p
    }

    /// `E[X_i; i wins]` under the policy's tie rule.
    pub fn expected_utilities(&self, policy: &GreedyPolicy<T>) -> Vec<T> {
        let mut u = self.singleton_value.clone();
        for (mask, cell) in &self.ties {
            for (pos, j) in members(*mask).enumerate() {
                u[j] += cell.value_mass[pos] * policy.tie_weight(*mask, j);
            }
        }
        u
    }

    /// `E[max_j (X_j + λ_j)]`.
    pub fn expected_max_score(&self) -> T {
        let mut total = T::zero();
        for i in 0..self.n {
            total += self.singleton_value[i] + self.lambda[i] * self.singleton_mass[i];
        }
        for (mask, cell) in &self.ties {
            let r = mask.trailing_zeros() as usize;
            total += cell.value_mass[0] + self.lambda[r] * cell.mass;
        }
        total
    }

    /// `P(argmax set meets S)`.
    pub fn mass_meeting(&self, set: u32) -> T {
        let mut total = T::zero();
        for i in members(set) {
            if i < self.n {
                total += self.singleton_mass[i];
            }
        }
        for (mask, cell) in &self.ties {
            if mask & set != 0 {
                total += cell.mass;
            }
        }
        total
    }

    /// Total probability mass accounted for (1 up to rounding).
    pub fn total_mass(&self) -> T {
        self.singleton_mass.iter().copied().sum::<T>()
            + self.ties.values().map(|c| c.mass).sum::<T>()
    }
}

/// `P(agent wins | its score is x + λ_agent)` when all other agents draw from
/// `law`, under the policy's tie rule.
pub fn win_probability_given_value<T: Scalar>(
    law: &Law<T>,
    policy: &GreedyPolicy<T>,
    agent: usize,
    x: T,
) -> T {
    let lambda = policy.lambda();
    let n = lambda.len();
    let s = x + lambda[agent];
    let tol = T::tie_tolerance(s);
    let mut head = T::one();
    let mut tied = Vec::new();
    for j in 0..n {
        if j == agent {
            continue;
        }
        let (l, e, _) = law.split(s - lambda[j], tol);
        if e > T::zero() {
            tied.push((j, l, e));
        } else {
            head *= l;
        }
    }
    if head <= T::zero() {
        return T::zero();
    }
    let mut total = T::zero();
    for sub in 0u32..(1u32 << tied.len()) {
        let mut w = head;
        let mut mask = 1u32 << agent;
        for (b, (j, l, e)) in tied.iter().enumerate() {
            if sub & (1 << b) != 0 {
                w *= *e;
                mask |= 1 << j;
            } else {
                w *= *l;
            }
        }
        total += w * policy.tie_weight(mask, agent);
    }
    total
}
