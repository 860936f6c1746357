//! Adaptive one-dimensional k-medians over the integer values attached to an
//! action, and the split of a projected database along the resulting clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::ProjectedDb;

const MAX_ITERATIONS: usize = 200;

/// A group of values represented by its lower median.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValueCluster {
    pub median: i64,
    pub min: i64,
    pub max: i64,
    /// Sorted multiset of member values.
    pub members: Vec<i64>,
}

impl ValueCluster {
    /// Builds a cluster from its members; `None` when `members` is empty.
    pub fn from_members(mut members: Vec<i64>) -> Option<Self> {
        if members.is_empty() {
            return None;
        }
        members.sort_unstable();
        Some(ValueCluster {
            median: lower_median(&members),
            min: members[0],
            max: *members.last().unwrap(),
            members,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, value: i64) -> bool {
        self.members.binary_search(&value).is_ok()
    }
}

/// Element at index `(n - 1) / 2` of a sorted slice.
pub(crate) fn lower_median(sorted: &[i64]) -> i64 {
    sorted[(sorted.len() - 1) / 2]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterOutcome {
    pub clusters: Vec<ValueCluster>,
    pub triggered: bool,
}

/// k-medians on a line.
///
/// Seeds are the order statistics at `floor((j + 0.5) * n / k)`; each value
/// joins the nearest median (the lower one on ties) until assignments stop
/// changing. Empty clusters are dropped, so fewer than `k` may come back.
pub fn kmedians_1d(values: &[i64], k: usize) -> Result<Vec<ValueCluster>> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut medians: Vec<i64> = (0..k).map(|j| sorted[(2 * j + 1) * n / (2 * k)]).collect();
    let mut groups: Vec<Vec<i64>> = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let next = assign(&sorted, &medians);
        if next == groups {
            break;
        }
        medians = next.iter().map(|g| lower_median(g)).collect();
        groups = next;
    }
    Ok(groups
        .into_iter()
        .filter_map(ValueCluster::from_members)
        .collect())
}

fn assign(sorted: &[i64], medians: &[i64]) -> Vec<Vec<i64>> {
    let mut groups = vec![Vec::new(); medians.len()];
    for &v in sorted {
        let mut best = 0;
        for (i, m) in medians.iter().enumerate().skip(1) {
            let (d, bd) = ((v - m).abs(), (v - medians[best]).abs());
            if d < bd || (d == bd && *m < medians[best]) {
                best = i;
            }
        }
        groups[best].push(v);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Clusters `values` only when the action is frequent enough to be split:
/// `raw_support >= 2 * abs_minsup`. K grows from 2 while the number of
/// clusters holding at least `abs_minsup` values keeps increasing (and never
/// beyond the number of distinct values); the frequent clusters of the best K
/// are returned. Otherwise one cluster holds every value.
pub fn adaptive_cluster(values: &[i64], raw_support: usize, abs_minsup: usize) -> Result<ClusterOutcome> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if raw_support < 2 * abs_minsup {
        return Ok(ClusterOutcome {
            clusters: vec![ValueCluster::from_members(values.to_vec()).expect("non-empty")],
            triggered: false,
        });
    }
    let mut distinct = values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let frequent = |cs: &[ValueCluster]| cs.iter().filter(|c| c.size() >= abs_minsup).count();

    let mut best = kmedians_1d(values, distinct.len().min(2))?;
    let mut best_count = frequent(&best);
    for k in 3..=distinct.len() {
        let next = kmedians_1d(values, k)?;
        let count = frequent(&next);
        if count <= best_count {
            break;
        }
        best = next;
        best_count = count;
    }
    best.retain(|c| c.size() >= abs_minsup);
    Ok(ClusterOutcome {
        clusters: best,
        triggered: true,
    })
}

/// One projected database per kept cluster, holding the suffixes whose
/// matched occurrence of the prefix's last action has a value in that
/// cluster. The last prefix item is annotated with the cluster.
pub fn split_projection<'a>(pdb: &ProjectedDb<'a>, outcome: &ClusterOutcome) -> Vec<ProjectedDb<'a>> {
    outcome
        .clusters
        .iter()
        .map(|c| pdb.restrict_last_item(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn members(cs: &[ValueCluster]) -> Vec<Vec<i64>> {
        cs.iter().map(|c| c.members.clone()).collect()
    }

    /// Minimum total distance-to-lower-median over every assignment of the
    /// values to at most `k` labelled groups.
    fn best_partition(values: &[i64], k: usize) -> (i64, Vec<Vec<i64>>) {
        let n = values.len();
        let mut best: Option<(i64, Vec<Vec<i64>>)> = None;
        for code in 0..k.pow(n as u32) {
            let mut groups = vec![Vec::new(); k];
            let mut c = code;
            for &v in values {
                groups[c % k].push(v);
                c /= k;
            }
            groups.retain(|g| !g.is_empty());
            let cost: i64 = groups
                .iter_mut()
                .map(|g| {
                    g.sort_unstable();
                    let m = lower_median(g);
                    g.iter().map(|v| (v - m).abs()).sum::<i64>()
                })
                .sum();
            groups.sort();
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, groups));
            }
        }
        best.unwrap()
    }

    #[test]
    fn two_clusters_from_2_2_5_6() {
        let cs = kmedians_1d(&[2, 2, 5, 6], 2).unwrap();
        assert_eq!(members(&cs), vec![vec![2, 2], vec![5, 6]]);
        assert_eq!(cs[0].median, 2);
        assert_eq!(cs[1].median, 5);
    }

    #[test]
    fn k_one_is_everything() {
        let cs = kmedians_1d(&[7, -3, 4, 4], 1).unwrap();
        assert_eq!(members(&cs), vec![vec![-3, 4, 4, 7]]);
        assert_eq!(cs[0].median, 4);
    }

    #[test]
    fn three_clusters_match_exhaustive_partition() {
        let values = [1, 2, 10, 11, 20];
        let (_, expected) = best_partition(&values, 3);
        assert_eq!(expected, vec![vec![1, 2], vec![10, 11], vec![20]]);
        let cs = kmedians_1d(&values, 3).unwrap();
        assert_eq!(members(&cs), expected);
    }

    #[test]
    fn empty_values_rejected() {
        assert_eq!(kmedians_1d(&[], 2), Err(Error::EmptyValues));
        assert!(kmedians_1d(&[1], 0).is_err());
    }

    #[test]
    fn adaptive_splits_a_values() {
        let out = adaptive_cluster(&[2, 2, 5, 6], 4, 2).unwrap();
        assert!(out.triggered);
        assert_eq!(members(&out.clusters), vec![vec![2, 2], vec![5, 6]]);
        assert_eq!(out.clusters[0].median, 2);
        assert_eq!(out.clusters[1].median, 5);
    }

    #[test]
    fn adaptive_below_trigger_keeps_one_cluster() {
        let out = adaptive_cluster(&[4, 5, 6], 3, 2).unwrap();
        assert!(!out.triggered);
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].median, 5);

        let out = adaptive_cluster(&[7], 1, 1).unwrap();
        assert!(!out.triggered);
        assert_eq!(out.clusters[0].median, 7);
    }

    #[test]
    fn adaptive_drops_infrequent_cluster() {
        // a fourth, unvalued occurrence lifts raw support to the trigger
        let out = adaptive_cluster(&[1, 1, 9], 4, 2).unwrap();
        assert!(out.triggered);
        assert_eq!(members(&out.clusters), vec![vec![1, 1]]);
    }

    #[test]
    fn adaptive_stops_when_frequent_count_stalls() {
        // K=2 gives {1,1,2},{8,9,9}; K=3 cannot add a third frequent cluster
        let out = adaptive_cluster(&[1, 1, 2, 8, 9, 9], 6, 2).unwrap();
        assert_eq!(members(&out.clusters), vec![vec![1, 1, 2], vec![8, 9, 9]]);
        // three well separated groups: K=3 wins
        let out = adaptive_cluster(&[1, 1, 10, 10, 20, 20], 6, 2).unwrap();
        assert_eq!(out.clusters.len(), 3);
    }

    proptest! {
        #[test]
        fn clusters_partition_values(values in prop::collection::vec(-20i64..20, 1..12), k in 1usize..5) {
            let cs = kmedians_1d(&values, k).unwrap();
            prop_assert!(cs.len() <= k);
            let mut all: Vec<i64> = cs.iter().flat_map(|c| c.members.clone()).collect();
            all.sort_unstable();
            let mut sorted = values.clone();
            sorted.sort_unstable();
            prop_assert_eq!(all, sorted);
            for c in &cs {
                prop_assert!(c.contains(c.median));
                prop_assert!(c.min <= c.median && c.median <= c.max);
            }
            // a value never sits in two clusters
            for (i, a) in cs.iter().enumerate() {
                for b in &cs[i + 1..] {
                    prop_assert!(a.members.iter().all(|v| !b.contains(*v)));
                }
            }
        }

        #[test]
        fn clustering_ignores_input_order(mut values in prop::collection::vec(-9i64..9, 1..10), k in 1usize..4) {
            let a = kmedians_1d(&values, k).unwrap();
            values.reverse();
            prop_assert_eq!(a, kmedians_1d(&values, k).unwrap());
        }

        #[test]
        fn no_split_below_trigger(values in prop::collection::vec(-9i64..9, 1..10), minsup in 1usize..6) {
            let raw = values.len();
            let out = adaptive_cluster(&values, raw, minsup).unwrap();
            if raw < 2 * minsup {
                prop_assert!(!out.triggered);
                prop_assert_eq!(out.clusters.len(), 1);
                prop_assert_eq!(out.clusters[0].size(), raw);
            } else {
                prop_assert!(out.clusters.iter().all(|c| c.size() >= minsup));
            }
        }
    }
}
