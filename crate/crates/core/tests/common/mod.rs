//! Exact-enumeration oracles for small discrete instances.
#![allow(dead_code)]

pub mod bounds;

use quotamech::transport::GreedyPolicy;
use quotamech::distributions::ValueDistribution;
use rand::seq::SliceRandom;
use rand::Rng;

/// A finite law with ascending distinct points.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Discrete {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (x, m) in pairs {
            if m <= 0.0 {
                continue;
            }
            if points.last() == Some(&x) {
                *masses.last_mut().unwrap() += m;
            } else {
                points.push(x);
                masses.push(m);
            }
        }
        let total: f64 = masses.iter().sum();
        masses.iter_mut().for_each(|m| *m /= total);
        Self { points, masses }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.points.iter().zip(&self.masses).filter(|(p, _)| **p <= x).map(|(_, m)| m).sum()
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn to_dist(&self) -> ValueDistribution<f64> {
        ValueDistribution::discrete(self.points.clone(), self.masses.clone()).unwrap()
    }

    /// Both step functions are constant between jump points, so the
    /// supremum is attained at one of them.
    pub fn sup_distance(&self, other: &Discrete) -> f64 {
        self.points
            .iter()
            .chain(&other.points)
            .map(|x| (self.cdf(*x) - other.cdf(*x)).abs())
            .fold(0.0, f64::max)
    }
}

fn random_masses<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(0.05..1.0)).collect()
}

/// Up to `max_support` distinct points in `(0, 1]`.
pub fn random_discrete<R: Rng>(rng: &mut R, max_support: usize) -> Discrete {
    let k = rng.gen_range(1..=max_support);
    let masses = random_masses(rng, k);
    let pairs = masses.into_iter().map(|m| (rng.gen_range(0.01..=1.0), m)).collect();
    Discrete::new(pairs)
}

/// Same support as `f`, masses mixed towards a random vector.
pub fn perturb<R: Rng>(rng: &mut R, f: &Discrete) -> Discrete {
    let eps = rng.gen_range(0.0..0.5);
    let other = random_masses(rng, f.points.len());
    let total: f64 = other.iter().sum();
    let pairs = f
        .points
        .iter()
        .zip(&f.masses)
        .zip(&other)
        .map(|((x, m), o)| (*x, (1.0 - eps) * m + eps * o / total))
        .collect();
    Discrete::new(pairs)
}

pub fn random_lambda<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    l[n - 1] = 0.0;
    l
}

pub fn random_quota<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w = random_masses(rng, n);
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Agents whose score is within `64·eps·max(1, |best|)` of the best.
pub fn argmax_mask(values: &[f64], lambda: &[f64]) -> u32 {
    let best = values.iter().zip(lambda).map(|(x, l)| x + l).fold(f64::NEG_INFINITY, f64::max);
    let tol = 64.0 * f64::EPSILON * best.abs().max(1.0);
    values
        .iter()
        .zip(lambda)
        .enumerate()
        .filter(|(_, (x, l))| *x + *l >= best - tol)
        .fold(0, |m, (j, _)| m | (1 << j))
}

/// Calls `f(values, probability)` for every profile of independent laws.
pub fn enumerate(laws: &[&Discrete], mut f: impl FnMut(&[f64], f64)) {
    let n = laws.len();
    let mut idx = vec![0usize; n];
    let mut values = vec![0.0; n];
    loop {
        let mut p = 1.0;
        for j in 0..n {
            values[j] = laws[j].points[idx[j]];
            p *= laws[j].masses[idx[j]];
        }
        f(&values, p);
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] < laws[k].points.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Winning probabilities and expected utilities of each agent.
pub fn outcomes(laws: &[&Discrete], policy: &GreedyPolicy<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = laws.len();
    let mut p = vec![0.0; n];
    let mut u = vec![0.0; n];
    enumerate(laws, |x, prob| {
        let mask = argmax_mask(x, policy.lambda());
        for j in 0..n {
            let w = policy.tie_weight(mask, j);
            p[j] += prob * w;
            u[j] += prob * w * x[j];
        }
    });
    (p, u)
}

/// `P(L_j(a) \ L_j(b))` for strict cells.
pub fn cell_excess(laws: &[&Discrete], a: &[f64], b: &[f64], j: usize) -> f64 {
    let mut total = 0.0;
    enumerate(laws, |x, prob| {
        let strict = |l: &[f64]| argmax_mask(x, l) == 1 << j;
        if strict(a) && !strict(b) {
            total += prob;
        }
    });
    total
}

/// Probability that `agent` wins with report `r` against truthful others.
pub fn win_given_report(
    others: &Discrete,
    n: usize,
    policy: &GreedyPolicy<f64>,
    agent: usize,
    r: f64,
) -> f64 {
    let point = Discrete { points: vec![r], masses: vec![1.0] };
    let laws: Vec<&Discrete> = (0..n).map(|j| if j == agent { &point } else { others }).collect();
    let mut w = 0.0;
    enumerate(&laws, |x, prob| {
        w += prob * policy.tie_weight(argmax_mask(x, policy.lambda()), agent);
    });
    w
}

/// Transport plan as `(source atom, target atom, mass)` cells.
pub type Plan = Vec<(usize, usize, f64)>;

/// Northwest-corner plan in the given atom orders.
pub fn northwest(src: &[f64], dst: &[f64], so: &[usize], to: &[usize]) -> Plan {
    let mut plan = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ls, mut lt) = (src[so[0]], dst[to[0]]);
    while i < so.len() && j < to.len() {
        let m = ls.min(lt);
        if m > 0.0 {
            plan.push((so[i], to[j], m));
        }
        ls -= m;
        lt -= m;
        if ls <= lt {
            i += 1;
            ls = if i < so.len() { src[so[i]] } else { 0.0 };
        } else {
            j += 1;
            lt = if j < to.len() { dst[to[j]] } else { 0.0 };
        }
    }
    plan
}

/// A random plan with the given marginals: a northwest-corner plan in
/// shuffled orders, sometimes mixed with a second one.
pub fn random_plan<R: Rng>(rng: &mut R, src: &[f64], dst: &[f64]) -> Plan {
    let shuffled = |k: usize, rng: &mut R| {
        let mut o: Vec<usize> = (0..k).collect();
        o.shuffle(rng);
        o
    };
    let (a, b) = (shuffled(src.len(), rng), shuffled(dst.len(), rng));
    let first = northwest(src, dst, &a, &b);
    if rng.gen_bool(0.5) {
        return first;
    }
    let (c, d) = (shuffled(src.len(), rng), shuffled(dst.len(), rng));
    let w = rng.gen_range(0.0..1.0);
    let second = northwest(src, dst, &c, &d);
    first
        .into_iter()
        .map(|(i, j, m)| (i, j, w * m))
        .chain(second.into_iter().map(|(i, j, m)| (i, j, (1.0 - w) * m)))
        .collect()
}

/// `E[X · w(X̃)]` under a plan from true atoms to reported atoms.
pub fn plan_utility(truth: &Discrete, win: &[f64], plan: &Plan) -> f64 {
    plan.iter().map(|(i, j, m)| m * truth.points[*i] * win[*j]).sum()
}
