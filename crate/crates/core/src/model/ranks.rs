use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Whether larger or smaller index values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Max,
    Min,
}

/// Ranks values so that rank 1 is best under `orientation`; tied values
/// receive the average of the ranks they span.
pub fn average_ranks(values: &[f64], orientation: Orientation) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0 });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    match orientation {
        Orientation::Max => order.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
        Orientation::Min => order.sort_by(|&a, &b| values[a].total_cmp(&values[b])),
    }
    let mut ranks = vec![0.0; values.len()];
    let mut pos = 0;
    while pos < order.len() {
        let mut end = pos + 1;
        while end < order.len() && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        // Positions pos..end hold equal values; ranks are 1-based.
        let avg = (pos + 1 + end) as f64 / 2.0;
        for &idx in &order[pos..end] {
            ranks[idx] = avg;
        }
        pos = end;
    }
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn max_orientation_ranks_largest_first() {
        assert_eq!(average_ranks(&[0.9, 0.5, 0.7], Orientation::Max).unwrap(), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn min_orientation_flips() {
        assert_eq!(average_ranks(&[0.9, 0.5, 0.7], Orientation::Min).unwrap(), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn ties_get_averaged() {
        assert_eq!(
            average_ranks(&[0.5, 0.5, 0.1], Orientation::Max).unwrap(),
            vec![1.5, 1.5, 3.0]
        );
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(average_ranks(&[], Orientation::Max).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_strictly_increasing_transform(
            v in proptest::collection::vec(-100.0f64..100.0, 1..30)
        ) {
            let f: Vec<f64> = v.iter().map(|x| 3.0 * x + 7.0).collect();
            prop_assert_eq!(
                average_ranks(&v, Orientation::Max).unwrap(),
                average_ranks(&f, Orientation::Max).unwrap()
            );
        }

        #[test]
        fn ranks_sum_to_triangular_number(
            v in proptest::collection::vec(-10.0f64..10.0, 1..30)
        ) {
            let n = v.len() as f64;
            let sum: f64 = average_ranks(&v, Orientation::Min).unwrap().iter().sum();
            prop_assert!((sum - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}
