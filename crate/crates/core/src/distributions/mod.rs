//! Value laws on `[0, x̄]`, empirical CDFs, Kolmogorov distance and the
//! monotone coupling between two laws.

mod empirical;
mod value;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use empirical::{build_empirical, EmpiricalCdf};
pub use value::{Atoms, DistKind, ValueDistribution};

/// A CDF that is affine between consecutive breakpoints.
pub trait Cdf<T: Scalar> {
    /// `P(X <= x)`.
    fn cdf(&self, x: T) -> T;
    /// `P(X < x)`.
    fn cdf_left(&self, x: T) -> T;
    /// Sorted points outside of which the CDF is affine. Below the first it is 0,
    /// above the last it is 1.
    fn breakpoints(&self) -> Vec<T>;
}

impl<T: Scalar, C: Cdf<T> + ?Sized> Cdf<T> for &C {
    fn cdf(&self, x: T) -> T {
        (**self).cdf(x)
    }
    fn cdf_left(&self, x: T) -> T {
        (**self).cdf_left(x)
    }
    fn breakpoints(&self) -> Vec<T> {
        (**self).breakpoints()
    }
}

/// Exact `sup_x |A(x) - B(x)|`.
///
/// Between merged breakpoints the difference is affine, so its supremum is
/// reached at a breakpoint or at a left limit of one.
pub fn sup_distance<T: Scalar, A: Cdf<T> + ?Sized, B: Cdf<T> + ?Sized>(a: &A, b: &B) -> T {
    let mut pts = a.breakpoints();
    pts.extend(b.breakpoints());
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    pts.dedup();
    let mut best = T::zero();
    for x in pts {
        best = best.max((a.cdf(x) - b.cdf(x)).abs());
        best = best.max((a.cdf_left(x) - b.cdf_left(x)).abs());
    }
    best
}

/// Randomized CDF evaluation `F^u(y)`: `F(y)` off the atoms, a uniform draw on
/// `[F(y-), F(y)]` at an atom. Zero below the support.
pub fn smoothed_cdf_value<T: Scalar, R: Rng + ?Sized>(
    dist: &ValueDistribution<T>,
    y: T,
    rng: &mut R,
) -> T {
    let hi = dist.cdf(y);
    let lo = dist.cdf_left(y);
    if hi > lo {
        let u = T::of(1.0 - rng.gen::<f64>());
        (lo + (hi - lo) * u).min(hi)
    } else {
        hi
    }
}

/// `G^{-1}(F^u(y))`: pushes a draw of `source` onto the law `target`,
/// monotonically in `y`.
pub fn monotone_push<T: Scalar, R: Rng + ?Sized>(
    source: &ValueDistribution<T>,
    target: &ValueDistribution<T>,
    y: T,
    rng: &mut R,
) -> T {
    target.quantile(smoothed_cdf_value(source, y, rng))
}

/// A transport plan between two atomic laws.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<T> {
    pub source: Atoms<T>,
    pub target: Atoms<T>,
    /// `(source index, target index, mass)`, zero cells omitted.
    pub cells: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Coupling<T> {
    /// Northwest-corner plan filling source atoms in `source_order` against
    /// target atoms in `target_order`.
    pub fn northwest_corner(
        source: Atoms<T>,
        target: Atoms<T>,
        source_order: &[usize],
        target_order: &[usize],
    ) -> Self {
        let mut cells = Vec::new();
        let (mut i, mut j) = (0, 0);
        let mut left_s = source.masses[source_order[0]];
        let mut left_t = target.masses[target_order[0]];
        loop {
            let m = left_s.min(left_t);
            if m > T::zero() {
                cells.push((source_order[i], target_order[j], m));
            }
            left_s -= m;
            left_t -= m;
            let advance_s = left_s <= left_t;
            if advance_s {
                i += 1;
                if i == source_order.len() {
                    break;
                }
                left_s = source.masses[source_order[i]];
            } else {
                j += 1;
                if j == target_order.len() {
                    break;
                }
                left_t = target.masses[target_order[j]];
            }
        }
        Self { source, target, cells }
    }
}

/// The comonotone coupling of two atomic laws, the joint law of
/// `(Y, G^{-1}(F^u(Y)))`.
pub fn monotone_coupling<T: Scalar>(
    source: &ValueDistribution<T>,
    target: &ValueDistribution<T>,
) -> Result<Coupling<T>> {
    let (Some(s), Some(t)) = (source.atoms(), target.atoms()) else {
        return Err(Error::Unsupported("monotone_coupling needs atomic laws".into()));
    };
    let so: Vec<usize> = (0..s.points.len()).collect();
    let to: Vec<usize> = (0..t.points.len()).collect();
    Ok(Coupling::northwest_corner(s, t, &so, &to))
}
