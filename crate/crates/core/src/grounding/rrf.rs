//! Reciprocal Rank Fusion.
//!
//! `score(d) = Σ 1 / (k + rank(d))` over the rankings that contain `d`,
//! with 1-based ranks. Only ranks are consumed, so fusing is invariant
//! under any monotone rescaling of the scores that produced each ranking.

use std::collections::BTreeMap;

pub const DEFAULT_RRF_K: f64 = 60.0;

/// Fuses rankings into one list sorted by descending fused score, ties
/// broken by ascending key.
///
/// Each ranking must list distinct keys; a repeated key only counts at its
/// first position. Per-key contributions are summed smallest-first so that
/// keys with the same multiset of ranks get bit-identical scores.
pub fn rrf_fuse<K, R>(rankings: &[R], k: f64) -> Vec<(K, f64)>
where
    K: Ord + Clone,
    R: AsRef<[K]>,
{
    assert!(k > 0.0, "RRF constant must be positive");
    let mut contributions: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for ranking in rankings {
        let mut seen = std::collections::BTreeSet::new();
        for (i, key) in ranking.as_ref().iter().enumerate() {
            if seen.insert(key) {
                contributions
                    .entry(key.clone())
                    .or_default()
                    .push(1.0 / (k + (i + 1) as f64));
            }
        }
    }
    let mut fused: Vec<(K, f64)> = contributions
        .into_iter()
        .map(|(key, mut parts)| {
            parts.sort_by(f64::total_cmp);
            (key, parts.iter().sum())
        })
        .collect();
    fused.sort_by(|(k1, s1), (k2, s2)| s2.total_cmp(s1).then_with(|| k1.cmp(k2)));
    fused
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_in_both_lists() {
        let fused = rrf_fuse(&[vec!["a", "b"], vec!["a", "c"]], 60.0);
        assert_eq!(fused[0].0, "a");
        assert_eq!(fused[0].1, 2.0 / 61.0);
    }

    #[test]
    fn single_list_membership() {
        let fused = rrf_fuse(&[vec!["x", "y", "z"]], 60.0);
        for (r, (_, score)) in fused.iter().enumerate() {
            assert_eq!(*score, 1.0 / (60.0 + (r + 1) as f64));
        }
    }

    #[test]
    fn ties_break_by_key() {
        // b at ranks (1,2), a at ranks (2,1): equal fused scores.
        let fused = rrf_fuse(&[vec!["b", "a"], vec!["a", "b"]], 60.0);
        assert_eq!(fused[0].1, fused[1].1);
        assert_eq!(fused.iter().map(|f| f.0).collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn empty_input() {
        assert!(rrf_fuse::<&str, Vec<&str>>(&[], 60.0).is_empty());
        assert!(rrf_fuse(&[Vec::<&str>::new()], 60.0).is_empty());
    }
}
