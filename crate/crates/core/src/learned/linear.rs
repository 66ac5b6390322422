//! Linear predictors with output and outcome bound queries.

use serde::{Deserialize, Serialize};

use crate::bounds::Interval;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// How a run of features contributes to the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureGroup {
    Single(usize),
    /// Exactly one of these features is 1, the rest 0.
    OneHot(Vec<usize>),
}

/// Bounds on the contribution of a one-hot group: a single weight is active.
pub fn one_hot_bounds<T: Real>(weights: &[T]) -> Interval<T> {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &w in weights {
        lo = lo.min(w);
        hi = hi.max(w);
    }
    Interval::spanning(lo, hi)
}

/// Extreme residuals `y - f(x)`, globally or per bin of one feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Residuals<T> {
    Global { extrema: Option<(T, T)> },
    Binned { feature: usize, edges: Vec<T>, extrema: Vec<Option<(T, T)>> },
}

impl<T: Real> Residuals<T> {
    pub fn global() -> Self {
        Residuals::Global { extrema: None }
    }

    /// `edges` split the feature axis into `edges.len() + 1` bins.
    pub fn binned(feature: usize, edges: Vec<T>) -> Self {
        let n = edges.len() + 1;
        Residuals::Binned { feature, edges, extrema: vec![None; n] }
    }

    fn bin(edges: &[T], x: T) -> usize {
        edges.iter().take_while(|&&e| x >= e).count()
    }

    fn record(&mut self, features: &[T], z: T) {
        let slot = match self {
            Residuals::Global { extrema } => extrema,
            Residuals::Binned { feature, edges, extrema } => &mut extrema[Self::bin(edges, features[*feature])],
        };
        *slot = Some(match *slot {
            None => (z, z),
            Some((lo, hi)) => (lo.min(z), hi.max(z)),
        });
    }

    fn over(&self, feature_box: &[Interval<T>]) -> Option<Interval<T>> {
        match self {
            Residuals::Global { extrema } => extrema.map(|(lo, hi)| Interval::spanning(lo, hi)),
            Residuals::Binned { feature, edges, extrema } => {
                let iv = feature_box[*feature];
                let first = Self::bin(edges, iv.lo());
                let last = Self::bin(edges, iv.hi());
                extrema[first..=last]
                    .iter()
                    .flatten()
                    .map(|&(lo, hi)| Interval::spanning(lo, hi))
                    .reduce(|a, b| a.hull(&b))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    weights: Vec<T>,
    groups: Vec<FeatureGroup>,
    residuals: Residuals<T>,
}

impl<T: Real> LinearModel<T> {
    /// Every feature in its own group.
    pub fn new(weights: Vec<T>) -> Self {
        let groups = (0..weights.len()).map(FeatureGroup::Single).collect();
        Self { weights, groups, residuals: Residuals::global() }
    }

    pub fn with_groups(weights: Vec<T>, groups: Vec<FeatureGroup>) -> Result<Self> {
        let mut seen = vec![false; weights.len()];
        for g in &groups {
            let idx: &[usize] = match g {
                FeatureGroup::Single(i) => std::slice::from_ref(i),
                FeatureGroup::OneHot(v) if v.is_empty() => return invalid("empty one-hot group"),
                FeatureGroup::OneHot(v) => v,
            };
            for &i in idx {
                if i >= weights.len() || seen[i] {
                    return invalid(format!("feature {i} is out of range or in two groups"));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return invalid("every feature must belong to a group");
        }
        Ok(Self { weights, groups, residuals: Residuals::global() })
    }

    pub fn with_residuals(mut self, residuals: Residuals<T>) -> Self {
        self.residuals = residuals;
        self
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn predict(&self, features: &[T]) -> T {
        self.weights.iter().zip(features).map(|(&w, &f)| w * f).sum()
    }

    /// Interval over the output when each feature lies in its interval.
    /// A one-hot group contributes the extreme weights among its members
    /// that can be active.
    pub fn output_bounds(&self, feature_box: &[Interval<T>]) -> Interval<T> {
        let mut lo = T::zero();
        let mut hi = T::zero();
        for g in &self.groups {
            match g {
                FeatureGroup::Single(i) => {
                    let c = feature_box[*i].scale(self.weights[*i]);
                    lo += c.lo();
                    hi += c.hi();
                }
                FeatureGroup::OneHot(members) => {
                    let active: Vec<T> = members
                        .iter()
                        .filter(|&&i| feature_box[i].hi() > T::zero())
                        .map(|&i| self.weights[i])
                        .collect();
                    let c = if active.is_empty() { Interval::point(T::zero()) } else { one_hot_bounds(&active) };
                    lo += c.lo();
                    hi += c.hi();
                }
            }
        }
        Interval::spanning(lo, hi)
    }

    /// Output bounds widened by the residual extrema seen so far.
    pub fn outcome_bounds(&self, feature_box: &[Interval<T>]) -> Result<Interval<T>> {
        let z = self
            .residuals
            .over(feature_box)
            .ok_or_else(|| Error::NoData("no residuals observed for this region".into()))?;
        Ok(self.output_bounds(feature_box).add(&z))
    }

    /// Records the residual of `y` under the current weights.
    pub fn observe(&mut self, features: &[T], y: T) {
        let z = y - self.predict(features);
        self.residuals.record(features, z);
    }

    /// One least-mean-squares step, then records the new residual.
    pub fn train(&mut self, features: &[T], y: T, stepsize: T) {
        let err = y - self.predict(features);
        for (w, &f) in self.weights.iter_mut().zip(features) {
            *w += stepsize * err * f;
        }
        self.observe(features, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval<f64> {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn output_bounds_follow_weight_signs() {
        let m = LinearModel::new(vec![1.0, -2.0]);
        assert_eq!(m.output_bounds(&[iv(0.0, 1.0), iv(0.0, 1.0)]), iv(-2.0, 1.0));
    }

    #[test]
    fn point_box_gives_prediction() {
        let m = LinearModel::new(vec![0.5f32, -1.5, 2.0]);
        let x = [1.0f32, 2.0, -3.0];
        let b: Vec<_> = x.iter().map(|&v| Interval::point(v)).collect();
        let out = m.output_bounds(&b);
        assert_eq!((out.lo(), out.hi()), (m.predict(&x), m.predict(&x)));
    }

    #[test]
    fn one_hot_group_uses_single_weight() {
        let m = LinearModel::with_groups(vec![3.0, 1.0, 2.0], vec![FeatureGroup::OneHot(vec![0, 1, 2])]).unwrap();
        let b = vec![iv(0.0, 1.0); 3];
        assert_eq!(m.output_bounds(&b), iv(1.0, 3.0));
        assert_eq!(LinearModel::new(vec![3.0, 1.0, 2.0]).output_bounds(&b), iv(0.0, 6.0));
    }

    #[test]
    fn outcome_bounds_add_residual_extrema() {
        let mut m = LinearModel::new(vec![1.0]);
        assert!(matches!(m.outcome_bounds(&[iv(1.0, 2.0)]), Err(Error::NoData(_))));
        m.observe(&[0.0], -0.1);
        m.observe(&[0.0], 0.3);
        let out = m.outcome_bounds(&[iv(1.0, 2.0)]).unwrap();
        assert!((out.lo() - 0.9).abs() < 1e-12 && (out.hi() - 2.3).abs() < 1e-12);
    }

    #[test]
    fn zero_residuals_leave_output_bounds() {
        let mut m = LinearModel::new(vec![2.0]);
        m.observe(&[1.0], 2.0);
        assert_eq!(m.outcome_bounds(&[iv(0.0, 1.0)]).unwrap(), iv(0.0, 2.0));
    }

    #[test]
    fn binned_residuals_only_use_touched_bins() {
        let mut m = LinearModel::new(vec![0.0]).with_residuals(Residuals::binned(0, vec![1.0]));
        m.observe(&[0.5], 1.0);
        m.observe(&[1.5], -5.0);
        assert_eq!(m.outcome_bounds(&[iv(0.0, 0.9)]).unwrap(), iv(1.0, 1.0));
        assert_eq!(m.outcome_bounds(&[iv(0.0, 2.0)]).unwrap(), iv(-5.0, 1.0));
    }

    #[test]
    fn group_validation() {
        assert!(LinearModel::with_groups(vec![1.0, 2.0], vec![FeatureGroup::Single(0)]).is_err());
        assert!(LinearModel::with_groups(vec![1.0], vec![FeatureGroup::OneHot(vec![0, 0])]).is_err());
    }

    proptest! {
        #[test]
        fn observed_point_is_inside_outcome_bounds(
            w in prop::collection::vec(-3.0f64..3.0, 3),
            data in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), -5.0f64..5.0), 1..20),
        ) {
            let mut m = LinearModel::new(w);
            for (x, y) in &data {
                m.train(x, *y, 0.05);
                let b: Vec<_> = x.iter().map(|&v| Interval::point(v)).collect();
                let out = m.outcome_bounds(&b).unwrap();
                prop_assert!(out.lo() - 1e-9 <= *y && *y <= out.hi() + 1e-9);
            }
        }

        #[test]
        fn one_hot_tightening_never_widens(w in prop::collection::vec(-3.0f64..3.0, 2..6), mask in 1u32..64) {
            let n = w.len();
            let b: Vec<_> = (0..n).map(|i| if mask & (1 << i) != 0 { iv(0.0, 1.0) } else { iv(0.0, 0.0) }).collect();
            prop_assume!(b.iter().any(|x| x.hi() > 0.0));
            let naive = LinearModel::new(w.clone()).output_bounds(&b);
            let tight = LinearModel::with_groups(w, vec![FeatureGroup::OneHot((0..n).collect())]).unwrap().output_bounds(&b);
            prop_assert!(naive.contains_interval(&tight));
        }
    }
}
