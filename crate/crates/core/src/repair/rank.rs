//! Ordering of plausible patches.

use std::cmp::Ordering;

use super::RepairResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedPatch {
    /// Index into `RepairResult::records`.
    pub record: usize,
    /// 1-based; tied patches all get the worst rank of their group.
    pub rank: usize,
}

/// Sort key of one plausible patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankKey {
    pub suspiciousness: f64,
    /// Plausible and validated counts of the patch's mutator.
    pub plausible: u64,
    pub validated: u64,
}

fn ratio_cmp(a: &RankKey, b: &RankKey) -> Ordering {
    // a.p / a.v vs b.p / b.v without division; a zero denominator sorts last
    match (a.validated, b.validated) {
        (0, 0) => Ordering::Equal,
        (0, _) => Ordering::Greater,
        (_, 0) => Ordering::Less,
        _ => (a.plausible as u128 * b.validated as u128).cmp(&(b.plausible as u128 * a.validated as u128)),
    }
}

fn key_cmp(a: &RankKey, b: &RankKey) -> Ordering {
    b.suspiciousness
        .total_cmp(&a.suspiciousness)
        .then_with(|| ratio_cmp(a, b))
}

/// Orders keys by suspiciousness (descending), then mutator ratio
/// (ascending). Returns `(input index, rank)` pairs in rank order.
pub fn rank_keys(keys: &[RankKey]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| key_cmp(&keys[a], &keys[b]));
    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key_cmp(&keys[order[start]], &keys[order[end]]) == Ordering::Equal {
            end += 1;
        }
        out.extend(order[start..end].iter().map(|&i| (i, end)));
        start = end;
    }
    out
}

pub fn rank_patches(result: &RepairResult) -> Vec<RankedPatch> {
    let keys: Vec<RankKey> = result
        .plausible_records()
        .map(|r| {
            let t = result.tally(r.patch.mutator);
            RankKey {
                suspiciousness: r.suspiciousness,
                plausible: t.plausible,
                validated: t.validated,
            }
        })
        .collect();
    rank_keys(&keys)
        .into_iter()
        .map(|(i, rank)| RankedPatch {
            record: result.plausible[i],
            rank,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: f64, p: u64, v: u64) -> RankKey {
        RankKey {
            suspiciousness: s,
            plausible: p,
            validated: v,
        }
    }

    #[test]
    fn ratio_breaks_ties() {
        let r = rank_keys(&[key(1.0, 5, 10), key(1.0, 1, 10)]);
        assert_eq!(r, vec![(1, 1), (0, 2)]);
    }

    #[test]
    fn full_ties_get_worst_rank() {
        let r = rank_keys(&[key(0.5, 1, 2), key(0.5, 2, 4), key(0.5, 3, 6)]);
        assert_eq!(r, vec![(0, 3), (1, 3), (2, 3)]);
    }

    #[test]
    fn suspiciousness_dominates() {
        let r = rank_keys(&[key(0.5, 1, 100), key(1.0, 9, 10)]);
        assert_eq!(r, vec![(1, 1), (0, 2)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn keys() -> impl Strategy<Value = Vec<RankKey>> {
            prop::collection::vec(
                (0u8..4, 1u64..6, 0u64..6).prop_map(|(s, v, p)| key(f64::from(s) / 4.0, p.min(v), v)),
                0..12,
            )
        }

        proptest! {
            #[test]
            fn rank_rules(ks in keys()) {
                let r = rank_keys(&ks);
                let mut seen: Vec<usize> = r.iter().map(|&(i, _)| i).collect();
                seen.sort();
                prop_assert_eq!(seen, (0..ks.len()).collect::<Vec<_>>());
                for w in r.windows(2) {
                    let (a, b) = (&ks[w[0].0], &ks[w[1].0]);
                    prop_assert!(w[0].1 <= w[1].1);
                    prop_assert!(a.suspiciousness >= b.suspiciousness);
                    if a.suspiciousness == b.suspiciousness {
                        // p_a / v_a <= p_b / v_b
                        prop_assert!(a.plausible * b.validated <= b.plausible * a.validated);
                    }
                }
                for (pos, &(i, rank)) in r.iter().enumerate() {
                    // worst rank = number of keys sorting no later than this one
                    let not_after = ks
                        .iter()
                        .filter(|k| {
                            k.suspiciousness > ks[i].suspiciousness
                                || (k.suspiciousness == ks[i].suspiciousness
                                    && k.plausible * ks[i].validated <= ks[i].plausible * k.validated)
                        })
                        .count();
                    prop_assert_eq!(rank, not_after);
                    prop_assert!(rank > pos);
                }
            }
        }
    }
}
