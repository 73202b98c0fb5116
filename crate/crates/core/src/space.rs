//! Hyperparameter grids.
//!
//! A [`HyperSpace`] is a finite Cartesian grid: named axes, each with a
//! sorted list of distinct values. A [`SettingCoord`] indexes one grid
//! point. Axes are kept sorted by name and values ascending, so the same
//! grid always produces the same coordinates no matter how the input was
//! ordered. That canonical ordering is what makes every downstream
//! tie-break ("lexicographically lowest coordinate") well defined.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid value: a finite number or a label.
///
/// Numbers order before labels; numbers order by value, labels
/// lexicographically. NaN is rejected at construction, which is what lets
/// `Ord` exist at all.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Num(f64),
    Text(String),
}

impl AxisValue {
    fn validate(&self) -> Result<()> {
        if let AxisValue::Num(v) = self {
            if !v.is_finite() {
                return Err(Error::InvalidSpace(format!(
                    "axis value {v} is not finite"
                )));
            }
        }
        Ok(())
    }
}

impl PartialEq for AxisValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AxisValue::Num(a), AxisValue::Num(b)) => a == b,
            (AxisValue::Text(a), AxisValue::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for AxisValue {}

impl Ord for AxisValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            // Values are finite by construction, so partial_cmp is total here.
            (AxisValue::Num(a), AxisValue::Num(b)) => {
                a.partial_cmp(b).unwrap_or(Ordering::Equal)
            }
            (AxisValue::Num(_), AxisValue::Text(_)) => Ordering::Less,
            (AxisValue::Text(_), AxisValue::Num(_)) => Ordering::Greater,
            (AxisValue::Text(a), AxisValue::Text(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for AxisValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Num(v) => write!(f, "{v}"),
            AxisValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// A named axis with its sorted, distinct values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<AxisValue>,
}

/// The full grid. Axes sorted by name; within an axis, values ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperSpace {
    axes: Vec<Axis>,
}

/// Indices into each axis of a [`HyperSpace`], in the space's axis order.
/// Derived `Ord` gives the lexicographic order used for tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SettingCoord(pub Vec<usize>);

impl HyperSpace {
    /// Builds a space from (name, values) pairs, canonicalizing order.
    ///
    /// Rejects empty axis lists, duplicate axis names, empty value lists,
    /// duplicate values within an axis, and non-finite numbers.
    pub fn new(axes: Vec<(String, Vec<AxisValue>)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidSpace("no axes declared".into()));
        }
        let mut canon: Vec<Axis> = Vec::with_capacity(axes.len());
        for (name, mut values) in axes {
            if name.is_empty() {
                return Err(Error::InvalidSpace("axis with empty name".into()));
            }
            if values.is_empty() {
                return Err(Error::InvalidSpace(format!("axis {name} has no values")));
            }
            for v in &values {
                v.validate()?;
            }
            values.sort();
            for pair in values.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::InvalidSpace(format!(
                        "axis {name} lists value {} twice",
                        pair[0]
                    )));
                }
            }
            canon.push(Axis { name, values });
        }
        canon.sort_by(|a, b| a.name.cmp(&b.name));
        for pair in canon.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(Error::InvalidSpace(format!(
                    "axis {} declared twice",
                    pair[0].name
                )));
            }
        }
        Ok(HyperSpace { axes: canon })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Number of axes (the dimensionality upper bound).
    pub fn axis_count(&self) -> usize {
        self.axes.len()
    }

    /// Total number of grid points.
    pub fn total_settings(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    /// Maps named values to a coordinate. Every axis must be present and
    /// every value must sit on the grid.
    pub fn coord_of(&self, values: &BTreeMap<String, AxisValue>) -> Result<SettingCoord> {
        if values.len() != self.axes.len() {
            let have: Vec<&str> = values.keys().map(|s| s.as_str()).collect();
            return Err(Error::InvalidSpace(format!(
                "expected values for axes {:?}, got {:?}",
                self.axes.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(),
                have
            )));
        }
        let mut idx = Vec::with_capacity(self.axes.len());
        for axis in &self.axes {
            let v = values.get(&axis.name).ok_or_else(|| {
                Error::InvalidSpace(format!("missing value for axis {}", axis.name))
            })?;
            let pos = axis.values.iter().position(|w| w == v).ok_or_else(|| {
                Error::OffGridValue {
                    path: String::new(),
                    line: 0,
                    axis: axis.name.clone(),
                    value: v.to_string(),
                }
            })?;
            idx.push(pos);
        }
        Ok(SettingCoord(idx))
    }

    /// The named values at a coordinate, in axis order.
    pub fn values_at(&self, coord: &SettingCoord) -> Vec<(&str, &AxisValue)> {
        debug_assert!(self.contains(coord));
        self.axes
            .iter()
            .zip(&coord.0)
            .map(|(a, &i)| (a.name.as_str(), &a.values[i]))
            .collect()
    }

    pub fn contains(&self, coord: &SettingCoord) -> bool {
        coord.0.len() == self.axes.len()
            && coord
                .0
                .iter()
                .zip(&self.axes)
                .all(|(&i, a)| i < a.values.len())
    }

    /// Row-major flat index (last axis varies fastest). Flat order equals
    /// the lexicographic order of coordinates.
    pub fn flat_index(&self, coord: &SettingCoord) -> usize {
        debug_assert!(self.contains(coord));
        let mut idx = 0;
        for (axis, &i) in self.axes.iter().zip(&coord.0) {
            idx = idx * axis.values.len() + i;
        }
        idx
    }

    /// All coordinates in lexicographic (= flat) order.
    pub fn settings(&self) -> impl Iterator<Item = SettingCoord> + '_ {
        let dims: Vec<usize> = self.axes.iter().map(|a| a.values.len()).collect();
        let total = self.total_settings();
        (0..total).map(move |mut flat| {
            let mut coord = vec![0usize; dims.len()];
            for (slot, &d) in coord.iter_mut().zip(&dims).rev() {
                *slot = flat % d;
                flat /= d;
            }
            SettingCoord(coord)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(v: f64) -> AxisValue {
        AxisValue::Num(v)
    }

    fn two_axis() -> HyperSpace {
        HyperSpace::new(vec![
            ("tau".into(), vec![num(0.01), num(0.001)]),
            ("lambda".into(), vec![num(0.9), num(0.1)]),
        ])
        .unwrap()
    }

    #[test]
    fn axes_and_values_are_canonicalized() {
        let s = two_axis();
        assert_eq!(s.axes()[0].name, "lambda");
        assert_eq!(s.axes()[1].name, "tau");
        assert_eq!(s.axes()[0].values, vec![num(0.1), num(0.9)]);
        assert_eq!(s.axes()[1].values, vec![num(0.001), num(0.01)]);
    }

    #[test]
    fn construction_order_does_not_matter() {
        let a = two_axis();
        let b = HyperSpace::new(vec![
            ("lambda".into(), vec![num(0.1), num(0.9)]),
            ("tau".into(), vec![num(0.001), num(0.01)]),
        ])
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coord_round_trip() {
        let s = two_axis();
        let mut vals = BTreeMap::new();
        vals.insert("lambda".to_string(), num(0.9));
        vals.insert("tau".to_string(), num(0.001));
        let c = s.coord_of(&vals).unwrap();
        assert_eq!(c, SettingCoord(vec![1, 0]));
        let named = s.values_at(&c);
        assert_eq!(named[0], ("lambda", &num(0.9)));
        assert_eq!(named[1], ("tau", &num(0.001)));
    }

    #[test]
    fn off_grid_value_is_rejected() {
        let s = two_axis();
        let mut vals = BTreeMap::new();
        vals.insert("lambda".to_string(), num(0.5));
        vals.insert("tau".to_string(), num(0.001));
        assert!(matches!(
            s.coord_of(&vals),
            Err(Error::OffGridValue { axis, .. }) if axis == "lambda"
        ));
    }

    #[test]
    fn settings_enumerate_in_flat_order() {
        let s = two_axis();
        let all: Vec<SettingCoord> = s.settings().collect();
        assert_eq!(
            all,
            vec![
                SettingCoord(vec![0, 0]),
                SettingCoord(vec![0, 1]),
                SettingCoord(vec![1, 0]),
                SettingCoord(vec![1, 1]),
            ]
        );
        for (i, c) in all.iter().enumerate() {
            assert_eq!(s.flat_index(c), i);
        }
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
    }

    #[test]
    fn numbers_sort_before_text() {
        let s = HyperSpace::new(vec![(
            "opt".into(),
            vec![AxisValue::Text("adam".into()), num(3.0), num(-1.0)],
        )])
        .unwrap();
        assert_eq!(
            s.axes()[0].values,
            vec![num(-1.0), num(3.0), AxisValue::Text("adam".into())]
        );
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        assert!(HyperSpace::new(vec![]).is_err());
        assert!(HyperSpace::new(vec![("a".into(), vec![])]).is_err());
        assert!(HyperSpace::new(vec![("a".into(), vec![num(1.0), num(1.0)])]).is_err());
        assert!(HyperSpace::new(vec![
            ("a".into(), vec![num(1.0)]),
            ("a".into(), vec![num(2.0)]),
        ])
        .is_err());
        assert!(HyperSpace::new(vec![("a".into(), vec![num(f64::NAN)])]).is_err());
    }

    #[test]
    fn total_settings_is_the_grid_size() {
        assert_eq!(two_axis().total_settings(), 4);
        let s = HyperSpace::new(vec![
            ("a".into(), vec![num(1.0), num(2.0), num(3.0)]),
            ("b".into(), vec![num(1.0)]),
        ])
        .unwrap();
        assert_eq!(s.total_settings(), 3);
    }
}
