use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Cdf, EmpiricalCdf};

/// Shape of a value law.
#[derive(Debug, Clone, PartialEq)]
pub enum DistKind<T> {
    Uniform {
        lo: T,
        hi: T,
    },
    /// Finite support in ascending order. `cumulative` ends at exactly 1.
    Discrete {
        support: Vec<T>,
        masses: Vec<T>,
        cumulative: Vec<T>,
    },
    Empirical(Arc<EmpiricalCdf<T>>),
    /// `G(x) = (F(x) - delta)^+` below the upper bound and `G(x̄) = 1`.
    ShiftedDown {
        base: Arc<ValueDistribution<T>>,
        delta: T,
    },
}

/// Atoms of a purely atomic law, ascending with positive masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms<T> {
    pub points: Vec<T>,
    pub masses: Vec<T>,
}

/// One-dimensional value law on `[0, x̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution<T> {
    kind: DistKind<T>,
    upper_bound: T,
}

impl<T: Scalar> ValueDistribution<T> {
    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= T::zero() && lo < hi) {
            return Err(Error::InvalidDistribution(format!(
                "uniform needs 0 <= lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { kind: DistKind::Uniform { lo, hi }, upper_bound: hi })
    }

    pub fn discrete(support: Vec<T>, masses: Vec<T>) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return Err(Error::InvalidDistribution(format!(
                "support ({}) and masses ({}) must be non-empty and of equal length",
                support.len(),
                masses.len()
            )));
        }
        if support.iter().any(|s| !s.is_finite() || *s < T::zero()) {
            return Err(Error::InvalidDistribution("support must be finite and >= 0".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution("support must be strictly ascending".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < T::zero()) {
            return Err(Error::InvalidDistribution("masses must be finite and >= 0".into()));
        }
        let total: T = masses.iter().copied().sum();
        let tol = T::of(1e-12).max(T::of(8.0) * T::epsilon());
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = T::zero();
        for m in &masses {
            acc += *m;
            cumulative.push(acc.min(T::one()));
        }
        *cumulative.last_mut().expect("non-empty") = T::one();
        let upper = *support.last().expect("non-empty");
        if upper <= T::zero() {
            return Err(Error::InvalidDistribution(
                "largest support point must be > 0; widen with with_upper_bound".into(),
            ));
        }
        Ok(Self { kind: DistKind::Discrete { support, masses, cumulative }, upper_bound: upper })
    }

    /// Law of an empirical CDF; `x̄` defaults to the largest sample.
    pub fn empirical(cdf: EmpiricalCdf<T>) -> Result<Self> {
        if cdf.min() < T::zero() {
            return Err(Error::InvalidDistribution("empirical samples must be >= 0".into()));
        }
        let upper = cdf.max();
        if upper <= T::zero() {
            return Err(Error::InvalidDistribution(
                "largest sample must be > 0; widen with with_upper_bound".into(),
            ));
        }
        Ok(Self { kind: DistKind::Empirical(Arc::new(cdf)), upper_bound: upper })
    }

    /// Empirical law with an explicit upper bound.
    pub fn empirical_with_upper_bound(cdf: EmpiricalCdf<T>, upper: T) -> Result<Self> {
        if cdf.min() < T::zero() || cdf.max() > upper || upper <= T::zero() {
            return Err(Error::InvalidDistribution(format!(
                "samples must lie in [0, {upper}] with a positive bound"
            )));
        }
        Ok(Self { kind: DistKind::Empirical(Arc::new(cdf)), upper_bound: upper })
    }

    /// The law `(F - delta)^+` with all removed mass moved to `x̄`.
    pub fn shifted_down(base: ValueDistribution<T>, delta: T) -> Result<Self> {
        if !(delta >= T::zero() && delta <= T::one()) {
            return Err(Error::InvalidDistribution(format!("shift {delta} outside [0, 1]")));
        }
        let upper = base.upper_bound;
        Ok(Self { kind: DistKind::ShiftedDown { base: Arc::new(base), delta }, upper_bound: upper })
    }

    /// Replaces `x̄` with a larger bound.
    pub fn with_upper_bound(mut self, upper: T) -> Result<Self> {
        let floor = match &self.kind {
            DistKind::Uniform { hi, .. } => *hi,
            DistKind::Discrete { support, .. } => *support.last().expect("non-empty"),
            DistKind::Empirical(e) => e.max(),
            DistKind::ShiftedDown { .. } => {
                return Err(Error::Unsupported("rebounding a shifted law".into()));
            }
        };
        if !(upper.is_finite() && upper >= floor && upper > T::zero()) {
            return Err(Error::InvalidDistribution(format!(
                "upper bound {upper} below support maximum {floor}"
            )));
        }
        self.upper_bound = upper;
        Ok(self)
    }

    pub fn kind(&self) -> &DistKind<T> {
        &self.kind
    }

    /// `x̄`.
    pub fn upper_bound(&self) -> T {
        self.upper_bound
    }

    /// Generalized inverse `inf{x in [0, x̄] : F(x) >= p}`.
    pub fn quantile(&self, p: T) -> T {
        if p <= T::zero() {
            return T::zero();
        }
        let p = p.min(T::one());
        match &self.kind {
            DistKind::Uniform { lo, hi } => (*lo + p * (*hi - *lo)).min(*hi),
            DistKind::Discrete { support, cumulative, .. } => {
                let idx = cumulative.partition_point(|c| *c < p);
                support[idx.min(support.len() - 1)]
            }
            DistKind::Empirical(e) => e.quantile(p),
            DistKind::ShiftedDown { base, delta } => {
                let q = p + *delta;
                if q > T::one() {
                    self.upper_bound
                } else {
                    base.quantile(q)
                }
            }
        }
    }

    /// Draws one value by inverse transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match &self.kind {
            DistKind::Empirical(e) => e.sorted_samples()[rng.gen_range(0..e.count())],
            _ => {
                let u = 1.0 - rng.gen::<f64>();
                self.quantile(T::of(u))
            }
        }
    }

    /// Atoms when the law is purely atomic, `None` when it has a density part.
    pub fn atoms(&self) -> Option<Atoms<T>> {
        match &self.kind {
            DistKind::Uniform { .. } => None,
            DistKind::Discrete { support, masses, .. } => {
                let (points, masses) = support
                    .iter()
                    .zip(masses)
                    .filter(|(_, m)| **m > T::zero())
                    .map(|(s, m)| (*s, *m))
                    .unzip();
                Some(Atoms { points, masses })
            }
            DistKind::Empirical(e) => {
                let (points, masses) = e.atoms();
                Some(Atoms { points, masses })
            }
            DistKind::ShiftedDown { base, delta } => {
                let inner = base.atoms()?;
                let mut points = Vec::new();
                let mut masses = Vec::new();
                let mut prev = T::zero();
                let mut acc = T::zero();
                for (x, m) in inner.points.iter().zip(&inner.masses) {
                    if *x >= self.upper_bound {
                        break;
                    }
                    acc += *m;
                    let g = (acc - *delta).max(T::zero()).min(T::one());
                    if g > prev {
                        points.push(*x);
                        masses.push(g - prev);
                        prev = g;
                    }
                }
                if prev < T::one() {
                    points.push(self.upper_bound);
                    masses.push(T::one() - prev);
                }
                Some(Atoms { points, masses })
            }
        }
    }

    /// Mean of the law.
    pub fn mean(&self) -> T {
        match &self.kind {
            DistKind::Uniform { lo, hi } => (*lo + *hi) / T::of(2.0),
            _ => match self.atoms() {
                Some(a) => a.points.iter().zip(&a.masses).map(|(x, m)| *x * *m).sum(),
                None => {
                    // shifted uniform: integrate the quantile function piecewise
                    let DistKind::ShiftedDown { base, delta } = &self.kind else {
                        unreachable!("only shifted laws lack atoms here")
                    };
                    let (lo, hi) = match base.kind() {
                        DistKind::Uniform { lo, hi } => (*lo, *hi),
                        _ => unreachable!("atomic bases are handled above"),
                    };
                    let d = *delta;
                    let two = T::of(2.0);
                    // ∫_0^{1-d} (lo + (p+d)(hi-lo)) dp + d·x̄
                    let w = T::one() - d;
                    w * lo + (hi - lo) * ((T::one() - d * d) / two) + d * self.upper_bound
                }
            },
        }
    }
}

impl<T: Scalar> Cdf<T> for ValueDistribution<T> {
    fn cdf(&self, x: T) -> T {
        if x >= self.upper_bound {
            return T::one();
        }
        match &self.kind {
            DistKind::Uniform { lo, hi } => {
                if x <= *lo {
                    T::zero()
                } else if x >= *hi {
                    T::one()
                } else {
                    (x - *lo) / (*hi - *lo)
                }
            }
            DistKind::Discrete { support, cumulative, .. } => {
                let idx = support.partition_point(|s| *s <= x);
                if idx == 0 {
                    T::zero()
                } else {
                    cumulative[idx - 1]
                }
            }
            DistKind::Empirical(e) => e.eval(x),
            DistKind::ShiftedDown { base, delta } => (base.cdf(x) - *delta).max(T::zero()),
        }
    }

    fn cdf_left(&self, x: T) -> T {
        if x > self.upper_bound {
            return T::one();
        }
        match &self.kind {
            DistKind::Uniform { .. } => self.cdf(x),
            DistKind::Discrete { support, cumulative, .. } => {
                let idx = support.partition_point(|s| *s < x);
                if idx == 0 {
                    T::zero()
                } else {
                    cumulative[idx - 1]
                }
            }
            DistKind::Empirical(e) => e.eval_left(x),
            DistKind::ShiftedDown { base, delta } => (base.cdf_left(x) - *delta).max(T::zero()),
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        let mut pts = match &self.kind {
            DistKind::Uniform { lo, hi } => vec![*lo, *hi],
            DistKind::Discrete { support, .. } => support.clone(),
            DistKind::Empirical(e) => e.breakpoints(),
            DistKind::ShiftedDown { base, delta } => {
                let mut pts = base.breakpoints();
                pts.push(base.quantile(*delta));
                pts
            }
        };
        pts.push(self.upper_bound);
        pts.retain(|p| *p <= self.upper_bound);
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        pts.dedup();
        pts
    }
}
