use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::ValueDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::flow::FlowNetwork;
use super::policy::{members, GreedyPolicy, TieBreak};
use super::stats::{ArgmaxStats, Law};
use super::Quota;

/// Stopping rule for [`solve_dual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverConfig<T> {
    /// Target for `max_j |p_j - p*_j|`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn analytic() -> Self {
        Self { tol: T::of(1e-6), max_iter: 500 }
    }

    pub fn empirical() -> Self {
        Self { tol: T::of(1e-4), max_iter: 500 }
    }

    /// Default tolerance for the kind of law.
    pub fn for_dist(dist: &ValueDistribution<T>) -> Self {
        match dist.kind() {
            crate::distributions::DistKind::Empirical(_) => Self::empirical(),
            _ => Self::analytic(),
        }
    }
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self::analytic()
    }
}

/// Result of a quota-matching solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverReport<T> {
    /// `λ*` with the tie weights that realize the quotas.
    pub policy: GreedyPolicy<T>,
    pub achieved: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Finds offsets whose greedy policy hands each agent its quota.
pub fn solve_dual<T: Scalar>(
    dist: &ValueDistribution<T>,
    quota: &Quota<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolverReport<T>> {
    solve_dual_from(dist, quota, cfg, &vec![T::zero(); quota.len()])
}

/// [`solve_dual`] started from `start` instead of zero offsets.
pub fn solve_dual_from<T: Scalar>(
    dist: &ValueDistribution<T>,
    quota: &Quota<T>,
    cfg: &SolverConfig<T>,
    start: &[T],
) -> Result<SolverReport<T>> {
    let n = quota.len();
    if start.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: start.len() });
    }
    if !(cfg.tol > T::zero()) {
        return Err(Error::InvalidConfig("solver tolerance must be > 0".into()));
    }
    let law = Law::from_dist(dist)?;
    let problem = Problem { law, last: RefCell::new(None), target: quota.targets(), n, upper: dist.upper_bound() };
    let mut lambda = GreedyPolicy::new(start.to_vec())?.lambda().to_vec();
    let mut iterations = 0;

    if n >= 3 && (!problem.law.is_atomic() || problem.law.atom_count() >= 64) {
        iterations += problem.newton(&mut lambda, cfg)?;
    }
    iterations += problem.subset_descent(&mut lambda, cfg)?;

    let policy = GreedyPolicy::new(lambda)?;
    let stats = problem.stats(policy.lambda())?;
    let policy = problem.tie_table(policy, &stats);
    let achieved = stats.allocation_probabilities(&policy);
    let residual = achieved
        .iter()
        .zip(problem.target)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    if residual > cfg.tol {
        return Err(Error::NonConvergence { residual: residual.to_f64_lossy(), iterations });
    }
    Ok(SolverReport { policy, achieved, residual, iterations })
}

/// Atom count up to which line searches enumerate exact tie points.
const BREAKPOINT_ATOMS: usize = 64;

struct Problem<'a, T> {
    law: Law<T>,
    last: RefCell<Option<ArgmaxStats<T>>>,
    target: &'a [T],
    n: usize,
    upper: T,
}

impl<T: Scalar> Problem<'_, T> {
    fn stats(&self, lambda: &[T]) -> Result<ArgmaxStats<T>> {
        if let Some(hit) = self.last.borrow().as_ref().filter(|s| s.lambda == lambda) {
            return Ok(hit.clone());
        }
        let fresh = ArgmaxStats::compute(&self.law, lambda)?;
        *self.last.borrow_mut() = Some(fresh.clone());
        Ok(fresh)
    }

    /// `p_i - p*_i` for all but the last agent, ties split evenly.
    fn reduced_residual(&self, lambda: &[T]) -> Result<Vec<T>> {
        let policy = GreedyPolicy::new(lambda.to_vec())?;
        let p = self.stats(policy.lambda())?.allocation_probabilities(&policy);
        Ok((0..self.n - 1).map(|i| p[i] - self.target[i]).collect())
    }

    fn newton(&self, lambda: &mut Vec<T>, cfg: &SolverConfig<T>) -> Result<usize> {
        let m = self.n - 1;
        let h = match &self.law {
            Law::Uniform { .. } => T::of(1e-6) * self.upper,
            Law::Atomic { points, .. } => {
                T::of(1e-4).max(T::one() / T::of_usize(points.len())) * self.upper
            }
        };
        let goal = cfg.tol / T::of(4.0);
        let mut r = self.reduced_residual(lambda)?;
        let mut iters = 0;
        while iters < cfg.max_iter {
            let norm = inf_norm(&r);
            if norm <= goal {
                break;
            }
            iters += 1;
            let mut jac = vec![vec![T::zero(); m]; m];
            for k in 0..m {
                let mut up = lambda.clone();
                let mut down = lambda.clone();
                up[k] += h;
                down[k] -= h;
                let ru = self.reduced_residual(&up)?;
                let rd = self.reduced_residual(&down)?;
                for row in 0..m {
                    jac[row][k] = (ru[row] - rd[row]) / (h + h);
                }
            }
            let rhs: Vec<T> = r.iter().map(|v| -*v).collect();
            let step = solve_linear(jac, rhs).unwrap_or_else(|| {
                // gradient direction on the dual
                r.iter().map(|v| -*v * self.upper).collect()
            });
            let mut t = T::one();
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = lambda.clone();
                for k in 0..m {
                    cand[k] += t * step[k];
                }
                let rc = self.reduced_residual(&cand)?;
                if inf_norm(&rc) < norm {
                    *lambda = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                t /= T::of(2.0);
            }
            if !accepted {
                break;
            }
        }
        Ok(iters)
    }

    /// Steepest descent over set directions: raise the offsets of the set `S`
    /// whose winning mass falls furthest short of its quota, up to the point
    /// where it catches up. Stops once every set meets its quota.
    fn subset_descent(&self, lambda: &mut Vec<T>, cfg: &SolverConfig<T>) -> Result<usize> {
        let n = self.n;
        let full = (1u32 << n) - 1;
        let quota_of = |set: u32| -> T { members(set).map(|i| self.target[i]).sum() };
        let slack = T::of(1e3) * T::epsilon();
        let goal = cfg.tol / T::of(4.0);
        let mut iters = 0;
        loop {
            let stats = self.stats(lambda)?;
            let (mut worst, mut worst_gap) = (0u32, T::zero());
            for set in 1..full {
                let gap = stats.mass_meeting(set) - quota_of(set);
                if gap < worst_gap {
                    worst = set;
                    worst_gap = gap;
                }
            }
            if worst_gap >= -goal || iters >= cfg.max_iter {
                return Ok(iters);
            }
            iters += 1;
            let need = quota_of(worst);
            let shifted = |s: T| -> Vec<T> {
                lambda
                    .iter()
                    .enumerate()
                    .map(|(i, l)| if worst & (1 << i) != 0 { *l + s } else { *l })
                    .collect()
            };
            let reached = |s: T| -> Result<bool> {
                Ok(self.stats(&shifted(s))?.mass_meeting(worst) >= need - slack)
            };
            let step = match self.breakpoints(lambda, worst) {
                Some(cands) => {
                    // smallest breakpoint at which the set catches up; the
                    // largest one always does
                    let (mut lo, mut hi) = (0, cands.len() - 1);
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        if reached(cands[mid])? {
                            hi = mid;
                        } else {
                            lo = mid + 1;
                        }
                    }
                    cands[hi]
                }
                None => {
                    let lo_l = lambda.iter().copied().fold(T::infinity(), T::min);
                    let hi_l = lambda.iter().copied().fold(T::neg_infinity(), T::max);
                    let (mut lo, mut hi) = (T::zero(), self.upper + hi_l - lo_l + T::one());
                    let resolution =
                        T::tie_tolerance(self.upper + hi_l.abs() + lo_l.abs()) / T::of(4.0);
                    for _ in 0..200 {
                        if hi - lo <= resolution {
                            break;
                        }
                        let mid = (lo + hi) / T::of(2.0);
                        if reached(mid)? {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                }
            };
            *lambda = GreedyPolicy::new(shifted(step))?.lambda().to_vec();
        }
    }

    /// Positive shifts of the set at which one of its scores meets an outside
    /// score exactly, ascending. `None` unless the law has few atoms.
    fn breakpoints(&self, lambda: &[T], set: u32) -> Option<Vec<T>> {
        let Law::Atomic { points, .. } = &self.law else {
            return None;
        };
        if points.len() > BREAKPOINT_ATOMS {
            return None;
        }
        let mut out = Vec::new();
        for i in members(set) {
            for j in (0..self.n).filter(|j| set & (1 << j) == 0) {
                for xa in points {
                    for xb in points {
                        let s = (*xb - *xa) + lambda[j] - lambda[i];
                        if s > T::zero() {
                            out.push(s);
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        out.dedup();
        (!out.is_empty()).then_some(out)
    }

    /// Splits every tie set among its members so that the quotas are met, via
    /// a max-flow from tie sets to agents.
    fn tie_table(&self, policy: GreedyPolicy<T>, stats: &ArgmaxStats<T>) -> GreedyPolicy<T> {
        if stats.ties.is_empty() {
            return policy;
        }
        let n = self.n;
        let sets: Vec<(&u32, _)> = stats.ties.iter().collect();
        let source = 0;
        let agent_node = |i: usize| 1 + sets.len() + i;
        let sink = 1 + sets.len() + n;
        let mut net = FlowNetwork::new(sink + 1);
        for i in 0..n {
            net.add_edge(source, agent_node(i), stats.singleton_mass[i]);
            net.add_edge(agent_node(i), sink, self.target[i]);
        }
        for (k, (mask, cell)) in sets.iter().enumerate() {
            net.add_edge(source, 1 + k, cell.mass);
            for j in members(**mask) {
                net.add_edge(1 + k, agent_node(j), cell.mass);
            }
        }
        net.max_flow(source, sink, T::epsilon() * T::of(1e-4));
        let mut weights = BTreeMap::new();
        for (k, (mask, cell)) in sets.iter().enumerate() {
            let out: Vec<T> = members(**mask).map(|j| net.flow(1 + k, agent_node(j))).collect();
            let sent: T = out.iter().copied().sum();
            let spare = (cell.mass - sent).max(T::zero()) / T::of_usize(out.len());
            weights.insert(**mask, out.into_iter().map(|w| w + spare).collect());
        }
        policy.with_tie_break(TieBreak::Table { weights })
    }
}

fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).fold(T::zero(), T::max)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let m = b.len();
    let scale = a.iter().flatten().map(|x| x.abs()).fold(T::zero(), T::max);
    if scale <= T::zero() {
        return None;
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= scale * T::of(1e-12) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![T::zero(); m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in row + 1..m {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_solve() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x: Vec<f64> = solve_linear(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
