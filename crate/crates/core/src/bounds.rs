//! Closed intervals, axis-aligned bounding boxes and action sets.
//!
//! These are the carriers of bounding-box inference: every box query in the
//! crate consumes and produces values of these types. Endpoints are closed,
//! so membership uses `<=` on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// A closed interval `[lo, hi]`.
///
/// Endpoints may be infinite (an unbounded interval) but never NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return invalid("interval endpoint is NaN");
        }
        if lo > hi {
            return invalid(format!("interval lower bound {lo} exceeds upper bound {hi}"));
        }
        Ok(Self { lo, hi })
    }

    /// Builds `[min(a, b), max(a, b)]`.
    pub fn spanning(a: T, b: T) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn unbounded() -> Self {
        Self { lo: T::neg_infinity(), hi: T::infinity() }
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Extends the interval to include `x`.
    pub fn include(&self, x: T) -> Self {
        Self { lo: self.lo.min(x), hi: self.hi.max(x) }
    }

    /// Minkowski sum.
    pub fn add(&self, other: &Self) -> Self {
        Self { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }

    pub fn shift(&self, c: T) -> Self {
        Self { lo: self.lo + c, hi: self.hi + c }
    }

    /// Multiplies by a scalar, swapping endpoints when `c < 0`.
    pub fn scale(&self, c: T) -> Self {
        if c >= T::zero() {
            Self { lo: self.lo * c, hi: self.hi * c }
        } else {
            Self { lo: self.hi * c, hi: self.lo * c }
        }
    }

    /// Applies a monotonically nondecreasing function to both endpoints.
    pub fn map_monotone(&self, f: impl Fn(T) -> T) -> Self {
        Self { lo: f(self.lo), hi: f(self.hi) }
    }

    pub fn clamp_to(&self, bounds: &Self) -> Self {
        let lo = self.lo.max(bounds.lo).min(bounds.hi);
        let hi = self.hi.min(bounds.hi).max(bounds.lo);
        Self { lo, hi: hi.max(lo) }
    }

    pub fn cast<U: Real>(&self) -> Interval<U> {
        Interval { lo: U::lit(self.lo.to_f64_lossy()), hi: U::lit(self.hi.to_f64_lossy()) }
    }
}

/// Per-dimension closed intervals over an observation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> BoundingBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return invalid(format!(
                "box bounds have mismatched dimensions {} and {}",
                lower.len(),
                upper.len()
            ));
        }
        for (d, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() {
                return invalid(format!("box dimension {d} has a NaN bound"));
            }
            if l > u {
                return invalid(format!("box dimension {d}: lower {l} exceeds upper {u}"));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The degenerate box containing exactly `point`.
    pub fn from_point(point: &[T]) -> Result<Self> {
        if let Some(d) = point.iter().position(|x| !x.is_finite()) {
            return invalid(format!("point has non-finite value at dimension {d}"));
        }
        Ok(Self { lower: point.to_vec(), upper: point.to_vec() })
    }

    pub fn from_intervals(intervals: &[Interval<T>]) -> Self {
        Self {
            lower: intervals.iter().map(Interval::lo).collect(),
            upper: intervals.iter().map(Interval::hi).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn interval(&self, d: usize) -> Interval<T> {
        Interval { lo: self.lower[d], hi: self.upper[d] }
    }

    pub fn intervals(&self) -> impl Iterator<Item = Interval<T>> + '_ {
        self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| Interval { lo, hi })
    }

    pub fn set_interval(&mut self, d: usize, iv: Interval<T>) {
        self.lower[d] = iv.lo;
        self.upper[d] = iv.hi;
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.intervals()).all(|(&x, iv)| iv.contains(x))
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        other.dim() == self.dim()
            && self.intervals().zip(other.intervals()).all(|(a, b)| a.contains_interval(&b))
    }

    pub fn hull(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return invalid(format!(
                "cannot hull boxes of dimension {} and {}",
                self.dim(),
                other.dim()
            ));
        }
        Ok(Self {
            lower: self.lower.iter().zip(&other.lower).map(|(&a, &b)| a.min(b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(&a, &b)| a.max(b)).collect(),
        })
    }

    pub fn width(&self) -> Vec<T> {
        self.upper.iter().zip(&self.lower).map(|(&u, &l)| u - l).collect()
    }

    /// Minkowski sum with per-dimension delta intervals.
    pub fn translate(&self, delta: &[Interval<T>]) -> Result<Self> {
        if delta.len() != self.dim() {
            return invalid("delta dimension does not match box dimension");
        }
        Ok(Self::from_intervals(
            &self.intervals().zip(delta).map(|(iv, d)| iv.add(d)).collect::<Vec<_>>(),
        ))
    }

    /// Appends the dimensions of `other` after the dimensions of `self`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        Self { lower, upper }
    }

    pub fn prefix(&self, dims: usize) -> Self {
        Self { lower: self.lower[..dims].to_vec(), upper: self.upper[..dims].to_vec() }
    }
}

/// A nonempty set of discrete action identifiers (at most 64).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionSet {
    bits: u64,
}

impl ActionSet {
    pub const MAX_ACTIONS: usize = 64;

    pub fn singleton(a: usize) -> Self {
        assert!(a < Self::MAX_ACTIONS, "action {a} out of range");
        Self { bits: 1 << a }
    }

    /// All of `0..num_actions`.
    pub fn all(num_actions: usize) -> Self {
        assert!((1..=Self::MAX_ACTIONS).contains(&num_actions));
        let bits = if num_actions == 64 { u64::MAX } else { (1u64 << num_actions) - 1 };
        Self { bits }
    }

    pub fn from_actions(actions: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut bits = 0u64;
        for a in actions {
            if a >= Self::MAX_ACTIONS {
                return invalid(format!("action {a} out of range"));
            }
            bits |= 1 << a;
        }
        if bits == 0 {
            return invalid("action set must be nonempty");
        }
        Ok(Self { bits })
    }

    pub fn contains(&self, a: usize) -> bool {
        a < Self::MAX_ACTIONS && self.bits & (1 << a) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> usize {
        self.bits.trailing_zeros() as usize
    }

    pub fn max(&self) -> usize {
        63 - self.bits.leading_zeros() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..Self::MAX_ACTIONS).filter(move |a| bits & (1 << a) != 0)
    }

    pub fn insert(&mut self, a: usize) {
        assert!(a < Self::MAX_ACTIONS, "action {a} out of range");
        self.bits |= 1 << a;
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.bits & !other.bits == 0
    }
}

/// A validated, finite observation vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(d) = values.iter().position(|x| !x.is_finite()) {
            return invalid(format!("observation has non-finite value at dimension {d}"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
