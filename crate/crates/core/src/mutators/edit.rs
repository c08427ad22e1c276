//! Minimum-edit adaptation of an argument vector to a new parameter list.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    /// Reuse old argument `from` for the next new parameter.
    Copy { from: usize },
    /// Supply a fresh value for new parameter `param`.
    Insert { param: usize },
    /// Drop old argument `from`.
    Delete { from: usize },
}

/// Cheapest script turning `old` into `new`. Copying costs 0 and is allowed
/// when `can_copy(old[k], new[j])`; inserting and deleting cost 1. Ties are
/// broken leftmost, preferring copy, then delete, then insert.
pub fn adapt<T>(old: &[T], new: &[T], can_copy: impl Fn(&T, &T) -> bool) -> (usize, Vec<EditOp>) {
    let (n, m) = (old.len(), new.len());
    // cost[k][j]: cheapest way to turn old[k..] into new[j..]
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    for k in (0..=n).rev() {
        for j in (0..=m).rev() {
            cost[k][j] = if k == n {
                m - j
            } else if j == m {
                n - k
            } else {
                let mut best = 1 + cost[k + 1][j].min(cost[k][j + 1]);
                if can_copy(&old[k], &new[j]) {
                    best = best.min(cost[k + 1][j + 1]);
                }
                best
            };
        }
    }
    let mut ops = Vec::new();
    let (mut k, mut j) = (0, 0);
    while k < n || j < m {
        if k < n && j < m && can_copy(&old[k], &new[j]) && cost[k][j] == cost[k + 1][j + 1] {
            ops.push(EditOp::Copy { from: k });
            k += 1;
            j += 1;
        } else if k < n && cost[k][j] == 1 + cost[k + 1][j] {
            ops.push(EditOp::Delete { from: k });
            k += 1;
        } else {
            ops.push(EditOp::Insert { param: j });
            j += 1;
        }
    }
    (cost[0][0], ops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(a: &char, b: &char) -> bool {
        a == b
    }

    #[test]
    fn drops_trailing_argument() {
        let (c, ops) = adapt(&['i', 'i'], &['i'], eq);
        assert_eq!(c, 1);
        assert_eq!(ops, vec![EditOp::Copy { from: 0 }, EditOp::Delete { from: 1 }]);
    }

    #[test]
    fn inserts_missing_parameter() {
        let (c, ops) = adapt(&['i'], &['b', 'i'], eq);
        assert_eq!(c, 1);
        assert_eq!(ops, vec![EditOp::Insert { param: 0 }, EditOp::Copy { from: 0 }]);
    }

    #[test]
    fn replacement_is_delete_then_insert() {
        let (c, ops) = adapt(&['i'], &['b'], eq);
        assert_eq!(c, 2);
        assert_eq!(ops, vec![EditOp::Delete { from: 0 }, EditOp::Insert { param: 0 }]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Exhaustive search over all monotone partial matchings.
        fn brute(old: &[u8], new: &[u8]) -> usize {
            fn go(old: &[u8], new: &[u8]) -> usize {
                match (old.split_first(), new.split_first()) {
                    (None, _) => new.len(),
                    (_, None) => old.len(),
                    (Some((a, ra)), Some((b, rb))) => {
                        let mut best = (1 + go(ra, new)).min(1 + go(old, rb));
                        if a == b {
                            best = best.min(go(ra, rb));
                        }
                        best
                    }
                }
            }
            go(old, new)
        }

        proptest! {
            #[test]
            fn optimal_and_consistent(
                old in prop::collection::vec(0u8..3, 0..6),
                new in prop::collection::vec(0u8..3, 0..6),
            ) {
                let (c, ops) = adapt(&old, &new, |a, b| a == b);
                prop_assert_eq!(c, brute(&old, &new));
                let mut built = Vec::new();
                let mut consumed = 0;
                let mut cost = 0;
                for op in &ops {
                    match *op {
                        EditOp::Copy { from } => {
                            prop_assert_eq!(from, consumed);
                            consumed += 1;
                            built.push(old[from]);
                        }
                        EditOp::Delete { from } => {
                            prop_assert_eq!(from, consumed);
                            consumed += 1;
                            cost += 1;
                        }
                        EditOp::Insert { param } => {
                            prop_assert_eq!(param, built.len());
                            built.push(new[param]);
                            cost += 1;
                        }
                    }
                }
                prop_assert_eq!(consumed, old.len());
                prop_assert_eq!(&built, &new);
                prop_assert_eq!(cost, c);
            }
        }
    }
}
