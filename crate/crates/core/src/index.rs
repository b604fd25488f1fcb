//! Countable index sets and their fixed enumerations.
//!
//! Ranks are 1-based. `ℕ×ℕ` is enumerated in Cantor order: ascending `i + j`,
//! then ascending `i`, so rank 1 is `(1,1)`, ranks 2 and 3 are `(1,2)`, `(2,1)`.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSet {
    Naturals,
    NaturalPairs,
    Finite(u64),
}

/// A single index: a natural number or a pair of natural numbers (all ≥ 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Index {
    Single(u64),
    Pair(u64, u64),
}

impl Index {
    /// Primary coordinate (`i`).
    pub fn i(self) -> u64 {
        match self {
            Index::Single(i) | Index::Pair(i, _) => i,
        }
    }

    /// Secondary coordinate (`j`), if any.
    pub fn j(self) -> Option<u64> {
        match self {
            Index::Single(_) => None,
            Index::Pair(_, j) => Some(j),
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Single(i) => write!(f, "{i}"),
            Index::Pair(i, j) => write!(f, "({i},{j})"),
        }
    }
}

impl IndexSet {
    /// Number of indices, `None` when infinite.
    pub fn len(self) -> Option<u64> {
        match self {
            IndexSet::Finite(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, IndexSet::Finite(_))
    }

    pub fn is_pairs(self) -> bool {
        matches!(self, IndexSet::NaturalPairs)
    }

    /// Clamps a requested prefix length to the size of the set.
    pub fn prefix_len(self, depth: usize) -> usize {
        match self {
            IndexSet::Finite(n) => depth.min(n as usize),
            _ => depth,
        }
    }

    /// Index of the given 1-based rank, or `None` when out of range.
    pub fn index_at(self, rank: u64) -> Option<Index> {
        if rank == 0 {
            return None;
        }
        match self {
            IndexSet::Naturals => Some(Index::Single(rank)),
            IndexSet::Finite(n) => (rank <= n).then_some(Index::Single(rank)),
            IndexSet::NaturalPairs => {
                let d = diagonal_of(rank);
                let offset = rank - d * (d - 1) / 2;
                Some(Index::Pair(offset, d + 1 - offset))
            }
        }
    }

    /// Inverse of [`IndexSet::index_at`].
    pub fn rank_of(self, idx: Index) -> Option<u64> {
        match (self, idx) {
            (IndexSet::Naturals, Index::Single(i)) if i >= 1 => Some(i),
            (IndexSet::Finite(n), Index::Single(i)) if i >= 1 && i <= n => Some(i),
            (IndexSet::NaturalPairs, Index::Pair(i, j)) if i >= 1 && j >= 1 => {
                let d = i + j - 1;
                Some(d * (d - 1) / 2 + i)
            }
            _ => None,
        }
    }

    /// The first `depth` indices in enumeration order.
    pub fn prefix(self, depth: usize) -> impl Iterator<Item = Index> {
        let n = self.prefix_len(depth) as u64;
        (1..=n).filter_map(move |r| self.index_at(r))
    }
}

/// Diagonal `d ≥ 1` (holding pairs with `i + j = d + 1`) that contains `rank`.
fn diagonal_of(rank: u64) -> u64 {
    // d(d-1)/2 < rank ≤ d(d+1)/2
    let approx = ((8.0 * rank as f64 + 1.0).sqrt() - 1.0) / 2.0;
    let mut d = (approx.floor() as u64).max(1);
    while d * (d + 1) / 2 < rank {
        d += 1;
    }
    while d > 1 && (d - 1) * d / 2 >= rank {
        d -= 1;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cantor_order_prefix() {
        let got: alloc::vec::Vec<Index> = IndexSet::NaturalPairs.prefix(6).collect();
        assert_eq!(
            got,
            [
                Index::Pair(1, 1),
                Index::Pair(1, 2),
                Index::Pair(2, 1),
                Index::Pair(1, 3),
                Index::Pair(2, 2),
                Index::Pair(3, 1)
            ]
        );
    }

    #[test]
    fn finite_sets_stop() {
        assert_eq!(IndexSet::Finite(3).prefix(10).count(), 3);
        assert_eq!(IndexSet::Finite(3).index_at(4), None);
        assert_eq!(IndexSet::Naturals.index_at(0), None);
    }

    proptest! {
        #[test]
        fn pair_enumeration_is_bijective(rank in 1u64..5_000_000) {
            let idx = IndexSet::NaturalPairs.index_at(rank).unwrap();
            prop_assert_eq!(IndexSet::NaturalPairs.rank_of(idx), Some(rank));
        }

        #[test]
        fn pair_ranks_follow_cantor_order(rank in 1u64..100_000) {
            let (Index::Pair(a, b), Index::Pair(c, d)) = (
                IndexSet::NaturalPairs.index_at(rank).unwrap(),
                IndexSet::NaturalPairs.index_at(rank + 1).unwrap(),
            ) else { unreachable!() };
            prop_assert!(a + b < c + d || (a + b == c + d && a < c));
        }
    }
}
