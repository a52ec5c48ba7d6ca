use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::estimate::InputMode;
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeAssignment {
    pub id: u64,
    pub mode: InputMode,
}

/// Seeded 1:1 split of a batch between single and dual measurement.
///
/// The ids are shuffled; the first `⌈n/2⌉` of the permutation go to single
/// mode, the rest to dual. Output order is the shuffled order.
pub fn data_mixing(batch_ids: &[u64], seed: u64) -> Vec<ModeAssignment> {
    let mut ids = batch_ids.to_vec();
    ids.shuffle(&mut rng_for(seed, &[0x6d6978]));
    let n_single = ids.len().div_ceil(2);
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| ModeAssignment {
            id,
            mode: if i < n_single {
                InputMode::Single
            } else {
                InputMode::Dual
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(a: &[ModeAssignment]) -> (usize, usize) {
        let s = a.iter().filter(|x| x.mode == InputMode::Single).count();
        (s, a.len() - s)
    }

    #[test]
    fn ten_items_split_evenly() {
        let ids: Vec<u64> = (0..10).collect();
        assert_eq!(counts(&data_mixing(&ids, 3)), (5, 5));
        assert!(data_mixing(&[], 3).is_empty());
    }

    #[test]
    fn seeded() {
        let ids: Vec<u64> = (0..10).collect();
        assert_eq!(data_mixing(&ids, 9), data_mixing(&ids, 9));
        let a = data_mixing(&ids, 9);
        let b = data_mixing(&ids, 10);
        assert_ne!(a, b);
        assert_eq!(counts(&a), counts(&b));
    }

    proptest! {
        #[test]
        fn balanced_permutation(n in 0usize..200, seed in any::<u64>()) {
            let ids: Vec<u64> = (0..n as u64).collect();
            let a = data_mixing(&ids, seed);
            let (s, d) = counts(&a);
            prop_assert_eq!(s, n.div_ceil(2));
            prop_assert!(s.abs_diff(d) <= 1);
            let mut seen: Vec<u64> = a.iter().map(|x| x.id).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, ids);
        }
    }
}
