use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted reference scores for one scorer over a calibration set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    #[serde(with = "crate::serde_float::vec")]
    sorted: Vec<f64>,
}

impl RankTable {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NanScore);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sorted
    }

    pub fn rank(&self, u: f64) -> Result<usize> {
        rank(u, &self.sorted)
    }
}

/// Rank of `u` against a sorted table: entries strictly below `u`, plus one.
///
/// Ties share the minimum rank, and values outside the table range map to
/// `1` or `len + 1`.
pub fn rank(u: f64, sorted: &[f64]) -> Result<usize> {
    if sorted.is_empty() {
        return Err(Error::EmptyRankTable);
    }
    if u.is_nan() {
        return Err(Error::NanScore);
    }
    Ok(sorted.partition_point(|&x| x < u) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let t = [0.1, 0.2, 0.3];
        assert_eq!(rank(0.2, &t).unwrap(), 2);
        assert_eq!(rank(0.05, &t).unwrap(), 1);
        assert_eq!(rank(0.9, &t).unwrap(), 4);
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(matches!(rank(0.0, &[]), Err(Error::EmptyRankTable)));
    }

    #[test]
    fn ties_take_min_rank() {
        let t = [0.1, 0.2, 0.2, 0.2, 0.5];
        assert_eq!(rank(0.2, &t).unwrap(), 2);
        assert_eq!(rank(0.3, &t).unwrap(), 5);
    }

    proptest! {
        #[test]
        fn non_decreasing(mut table in prop::collection::vec(-1e3f64..1e3, 1..40),
                          a in -1e3f64..1e3, b in -1e3f64..1e3) {
            table.sort_by(f64::total_cmp);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (rl, rh) = (rank(lo, &table).unwrap(), rank(hi, &table).unwrap());
            prop_assert!(rl <= rh);
            if table.iter().any(|&x| lo < x && x < hi) || table.iter().any(|&x| x == lo && lo < hi) {
                prop_assert!(rl < rh);
            }
        }

        #[test]
        fn distinct_table_values_rank_to_position(values in prop::collection::btree_set(-10_000i32..10_000, 1..50)) {
            let sorted: Vec<f64> = values.into_iter().map(f64::from).collect();
            for (i, &u) in sorted.iter().enumerate() {
                prop_assert_eq!(rank(u, &sorted).unwrap(), i + 1);
            }
        }
    }
}
