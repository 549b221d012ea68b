//! Random small instances checked against the misreporting bounds.

use quotamech::agents::coupling_utility;
use quotamech::distributions::Coupling;
use quotamech::transport::{allocation_probabilities, solve_dual, GreedyPolicy, Quota, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const SLACK: f64 = 1e-9;

/// Largest observed `lhs - bound` per property, plus cross-checks.
#[derive(Debug, Default)]
pub struct BoundsSummary {
    pub instances: usize,
    /// `Σ_j (p_j(F,λ) - p_j(G,λ))⁺ ≤ nΔ`.
    pub win_shift: f64,
    /// `P(L'_j \ L_j) ≤ Σ_k (p'_k - p_k)⁺` for two offset vectors.
    pub cell_growth: f64,
    /// `|u_i(F) - u_i(G)| ≤ nΔx̄` at the solved offsets.
    pub utility_shift: f64,
    /// Best one-round misreporting gain `≤ x̄Δ`.
    pub one_round_gain: f64,
    /// Largest amount by which an alternative plan beat the monotone one.
    pub dominance: f64,
    /// Largest gap between library and oracle quantities.
    pub library_gap: f64,
    /// Largest `|p_j - p*_j|` of solved policies, by enumeration.
    pub quota_miss: f64,
    pub solver_failures: usize,
}

impl BoundsSummary {
    pub fn all_hold(&self) -> bool {
        self.instances > 0
            && self.solver_failures == 0
            && self.quota_miss <= 1e-6
            && [self.win_shift, self.cell_growth, self.utility_shift, self.one_round_gain, self.dominance, self.library_gap]
                .iter()
                .all(|v| *v <= SLACK)
    }
}

fn worst(slot: &mut f64, excess: f64) {
    *slot = slot.max(excess);
}

/// Checks every property on `instances` random instances (support ≤ 6,
/// n ≤ 4) drawn from `seed`.
pub fn check(instances: usize, alternatives: usize, seed: u64) -> BoundsSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = BoundsSummary { instances, ..Default::default() };
    s.win_shift = f64::NEG_INFINITY;
    s.cell_growth = f64::NEG_INFINITY;
    s.utility_shift = f64::NEG_INFINITY;
    s.one_round_gain = f64::NEG_INFINITY;
    s.dominance = f64::NEG_INFINITY;
    for k in 0..instances {
        let n = rng.gen_range(2..=4);
        let f = random_discrete(&mut rng, 6);
        let g = if k % 2 == 0 { perturb(&mut rng, &f) } else { random_discrete(&mut rng, 6) };
        let delta = f.sup_distance(&g);
        let xbar = f.max().max(g.max());
        let fs: Vec<&Discrete> = vec![&f; n];
        let gs: Vec<&Discrete> = vec![&g; n];

        // Fixed-policy allocation sizes.
        let lambda = if k % 5 == 0 { vec![0.0; n] } else { random_lambda(&mut rng, n) };
        let policy = GreedyPolicy::new(lambda).unwrap();
        let (pf, _) = outcomes(&fs, &policy);
        let (pg, _) = outcomes(&gs, &policy);
        let moved: f64 = pf.iter().zip(&pg).map(|(a, b)| (a - b).max(0.0)).sum();
        worst(&mut s.win_shift, moved - n as f64 * delta);
        let lib = allocation_probabilities(&f.to_dist(), &policy).unwrap();
        worst(&mut s.library_gap, lib.iter().zip(&pf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

        // Two policies on the same law.
        let a = random_lambda(&mut rng, n);
        let b = random_lambda(&mut rng, n);
        let (pa, _) = outcomes(&fs, &GreedyPolicy::new(a.clone()).unwrap());
        let (pb, _) = outcomes(&fs, &GreedyPolicy::new(b.clone()).unwrap());
        let flow: f64 = pb.iter().zip(&pa).map(|(x, y)| (x - y).max(0.0)).sum();
        for j in 0..n {
            worst(&mut s.cell_growth, cell_excess(&fs, &b, &a, j) - flow);
        }

        // Utility loss from solving on the wrong law.
        let quota = Quota::new(random_quota(&mut rng, n)).unwrap();
        let solved = |d: &Discrete| solve_dual(&d.to_dist(), &quota, &SolverConfig::analytic());
        match (solved(&f), solved(&g)) {
            (Ok(sf), Ok(sg)) => {
                let (pstar, uf) = outcomes(&fs, &sf.policy);
                let (_, ug) = outcomes(&fs, &sg.policy);
                for i in 0..n {
                    worst(&mut s.utility_shift, (uf[i] - ug[i]).abs() - n as f64 * delta * xbar);
                }
                let miss = pstar.iter().zip(quota.targets()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                worst(&mut s.quota_miss, miss);
            }
            _ => s.solver_failures += 1,
        }

        // One strategic agent against truthful others.
        let agent = rng.gen_range(0..n);
        let reported = if k % 2 == 0 { perturb(&mut rng, &f) } else { random_discrete(&mut rng, 6) };
        let rdelta = f.sup_distance(&reported);
        let win: Vec<f64> = reported.points.iter().map(|r| win_given_report(&f, n, &policy, agent, *r)).collect();
        let own: Vec<f64> = f.points.iter().map(|x| win_given_report(&f, n, &policy, agent, *x)).collect();
        let truthful: f64 = f.points.iter().zip(&f.masses).zip(&own).map(|((x, m), w)| x * m * w).sum();
        let ident: Vec<usize> = (0..f.points.len()).collect();
        let rident: Vec<usize> = (0..reported.points.len()).collect();
        let mono = northwest(&f.masses, &reported.masses, &ident, &rident);
        let best = plan_utility(&f, &win, &mono);
        worst(&mut s.one_round_gain, best - truthful - f.max() * rdelta);
        let coupling = Coupling {
            source: f.to_dist().atoms().unwrap(),
            target: reported.to_dist().atoms().unwrap(),
            cells: mono.clone(),
        };
        let lib = coupling_utility(&f.to_dist(), &policy, agent, &coupling).unwrap();
        worst(&mut s.library_gap, (lib - best).abs());
        for _ in 0..alternatives {
            let plan = random_plan(&mut rng, &f.masses, &reported.masses);
            let u = plan_utility(&f, &win, &plan);
            worst(&mut s.dominance, u - best);
            worst(&mut s.one_round_gain, u - truthful - f.max() * rdelta);
        }
    }
    s
}
