//! Ochiai spectrum-based fault localization.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ir::Location;
use crate::testing::CoverageMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultLocError {
    #[error("no failing tests")]
    NoFailingTests,
    #[error("ef = {ef} exceeds the number of failing tests {total_failing}")]
    TallyOutOfRange { ef: u64, total_failing: u64 },
}

/// `ef / sqrt(total_failing * (ef + ep))`, and 0 when `ef` is 0.
pub fn ochiai(ef: u64, ep: u64, total_failing: u64) -> Result<f64, FaultLocError> {
    if total_failing == 0 {
        return Err(FaultLocError::NoFailingTests);
    }
    if ef > total_failing {
        return Err(FaultLocError::TallyOutOfRange { ef, total_failing });
    }
    if ef == 0 {
        return Ok(0.0);
    }
    let denom = (total_failing as f64 * (ef + ep) as f64).sqrt();
    Ok((ef as f64 / denom).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suspicious {
    pub location: Location,
    pub score: f64,
    pub ef: u64,
    pub ep: u64,
}

/// Locations covered by at least one failing test, most suspicious first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuspiciousnessRanking {
    pub entries: Vec<Suspicious>,
}

impl SuspiciousnessRanking {
    pub fn score_of(&self, loc: &Location) -> f64 {
        self.entries
            .iter()
            .find(|s| &s.location == loc)
            .map_or(0.0, |s| s.score)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Tie-break order for equally suspicious locations.
pub fn location_order(a: &Location, b: &Location) -> Ordering {
    (&a.class, &a.method, a.line, &a.descriptor).cmp(&(&b.class, &b.method, b.line, &b.descriptor))
}

/// Scores every covered location from its failing/passing tallies.
pub fn rank_locations(
    matrix: &CoverageMatrix,
    failing: &[usize],
) -> Result<SuspiciousnessRanking, FaultLocError> {
    let failing: BTreeSet<usize> = failing.iter().copied().collect();
    let total = failing.len() as u64;
    if total == 0 {
        return Err(FaultLocError::NoFailingTests);
    }
    let mut tallies: BTreeMap<&Location, (u64, u64)> = BTreeMap::new();
    for loc in matrix.locations() {
        let cover = matrix.cover(loc);
        let ef = cover.iter().filter(|t| failing.contains(t)).count() as u64;
        let ep = cover.len() as u64 - ef;
        tallies.insert(loc, (ef, ep));
    }
    let mut entries = Vec::new();
    for (loc, (ef, ep)) in tallies {
        if ef == 0 {
            continue;
        }
        entries.push(Suspicious {
            location: loc.clone(),
            score: ochiai(ef, ep, total)?,
            ef,
            ep,
        });
    }
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| location_order(&a.location, &b.location))
    });
    Ok(SuspiciousnessRanking { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Descriptor, TypeTag};

    fn loc(method: &str, line: u32) -> Location {
        Location {
            class: "Main".into(),
            method: method.into(),
            descriptor: Descriptor::new(vec![], TypeTag::Int),
            line,
        }
    }

    #[test]
    fn formula_examples() {
        assert_eq!(ochiai(1, 0, 1), Ok(1.0));
        assert_eq!(ochiai(0, 5, 1), Ok(0.0));
        assert!((ochiai(1, 1, 1).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(ochiai(1, 0, 0), Err(FaultLocError::NoFailingTests));
        assert!(ochiai(3, 0, 2).is_err());
    }

    #[test]
    fn ranking_order_and_exclusion() {
        // tests: 0 failing, 1 and 2 passing
        let m = CoverageMatrix::from_sets(vec![
            BTreeSet::from([loc("f", 3), loc("f", 2), loc("g", 1)]),
            BTreeSet::from([loc("f", 2), loc("g", 1), loc("h", 9)]),
            BTreeSet::from([loc("g", 1)]),
        ]);
        let r = rank_locations(&m, &[0]).unwrap();
        let order: Vec<_> = r
            .entries
            .iter()
            .map(|s| (s.location.method.as_str(), s.location.line))
            .collect();
        assert_eq!(order, vec![("f", 3), ("f", 2), ("g", 1)]);
        assert_eq!(r.entries[0].score, 1.0);
        assert_eq!(r.score_of(&loc("h", 9)), 0.0);
        assert!(r.entries.iter().all(|s| s.location != loc("h", 9)));
    }

    #[test]
    fn ties_are_lexicographic() {
        let m = CoverageMatrix::from_sets(vec![BTreeSet::from([loc("b", 1), loc("a", 7), loc("a", 5)])]);
        let r = rank_locations(&m, &[0]).unwrap();
        let order: Vec<_> = r
            .entries
            .iter()
            .map(|s| (s.location.method.clone(), s.location.line))
            .collect();
        assert_eq!(
            order,
            vec![("a".to_string(), 5), ("a".to_string(), 7), ("b".to_string(), 1)]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone(tf in 1u64..50, ef in 0u64..50, ep in 0u64..50, d in 1u64..10) {
                let ef = ef.min(tf);
                let s = ochiai(ef, ep, tf).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                if ef < tf {
                    prop_assert!(ochiai(ef + 1, ep, tf).unwrap() >= s);
                }
                prop_assert!(ochiai(ef, ep + d, tf).unwrap() <= s);
            }

            #[test]
            fn permutation_stable(
                cover in prop::collection::vec(prop::collection::btree_set(0u32..6, 0..6), 2..7),
                fail_mask in prop::collection::vec(any::<bool>(), 7),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let n = cover.len();
                let mut failing: Vec<usize> = (0..n).filter(|&i| fail_mask[i]).collect();
                if failing.is_empty() {
                    failing.push(0);
                }
                let sets = |order: &[usize]| {
                    order
                        .iter()
                        .map(|&t| cover[t].iter().map(|&l| loc("m", l + 1)).collect())
                        .collect::<Vec<_>>()
                };
                let ident: Vec<usize> = (0..n).collect();
                let base = rank_locations(&CoverageMatrix::from_sets(sets(&ident)), &failing).unwrap();
                let mut perm = ident.clone();
                perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                // test perm[k] now sits at position k
                let moved: Vec<usize> = failing
                    .iter()
                    .map(|f| perm.iter().position(|p| p == f).unwrap())
                    .collect();
                let shuffled = rank_locations(&CoverageMatrix::from_sets(sets(&perm)), &moved).unwrap();
                prop_assert_eq!(base, shuffled);
            }
        }
    }
}
