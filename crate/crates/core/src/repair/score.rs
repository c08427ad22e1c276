//! Classic mutation testing over a passing suite.

use std::collections::{BTreeSet, HashSet};

use super::{parallel_map, patched_program, RepairError};
use crate::ir::{MethodRef, Program};
use crate::mutators::{all_locations, Generator, Mask};
use crate::testing::{collect_coverage, run_test_on_patch, FuelPolicy, TestSuite};
use crate::vm::Vm;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutantOutcome {
    pub key: String,
    pub killed: bool,
    pub equivalent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationScore {
    pub killed: u64,
    pub total: u64,
    pub equivalent: u64,
    /// `killed / (total - equivalent)`.
    pub score: f64,
    pub mutants: Vec<MutantOutcome>,
}

/// Mutates every covered location outside the test entries and counts the
/// mutants at least one covering test kills.
pub fn mutation_score(
    program: &Program,
    suite: &TestSuite,
    mask: &Mask,
    equivalents: &[String],
    fuel: &FuelPolicy,
    jobs: usize,
) -> Result<MutationScore, RepairError> {
    let run = collect_coverage(program, suite, fuel)?;
    if let Some(&t) = run.failing.first() {
        return Err(RepairError::NotGreen(suite.tests[t].name.clone()));
    }
    let excluded: HashSet<MethodRef> = suite.entry_methods(program);
    let covered: BTreeSet<_> = run.coverage.locations().cloned().collect();
    let mut generator = Generator::new(program, mask.clone(), excluded.clone());
    let mut mutants = Vec::new();
    for loc in all_locations(program, &excluded) {
        if covered.contains(&loc) {
            mutants.extend(generator.at(&loc));
        }
    }

    let kills = parallel_map(&mutants, jobs, |m| -> Result<bool, RepairError> {
        let patched = patched_program(program, m)?;
        let vm = Vm::new(&patched).map_err(|e| RepairError::Test(e.into()))?;
        Ok(run
            .coverage
            .cover(&m.location)
            .into_iter()
            .any(|t| !run_test_on_patch(&vm, &run.entries[t], &suite.tests[t], run.runs[t].budget)))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let declared: BTreeSet<&str> = equivalents.iter().map(String::as_str).collect();
    let outcomes: Vec<MutantOutcome> = mutants
        .iter()
        .zip(kills)
        .map(|(m, killed)| {
            let key = m.key();
            MutantOutcome {
                equivalent: declared.contains(key.as_str()),
                key,
                killed,
            }
        })
        .collect();
    for e in &declared {
        match outcomes.iter().find(|o| o.key == *e) {
            None => return Err(RepairError::UnknownEquivalent(e.to_string())),
            Some(o) if o.killed => return Err(RepairError::KilledEquivalent(e.to_string())),
            Some(_) => {}
        }
    }
    let total = outcomes.len() as u64;
    let equivalent = declared.len() as u64;
    if total == equivalent {
        return Err(RepairError::NoMutants);
    }
    let killed = outcomes.iter().filter(|o| o.killed).count() as u64;
    Ok(MutationScore {
        killed,
        total,
        equivalent,
        score: killed as f64 / (total - equivalent) as f64,
        mutants: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;
    use crate::mutators::MutatorId;
    use crate::vm::execute;

    const INC: &str = "\
.class Main
.method static int inc(int)
  .local 0 x int
  line 3
  load 0
  const int 1
  add
  return int
.end
.method static int t1()
  line 10
  const int 2
  invokestatic Main.inc(int)int
  return int
.end
.test \"t1\" Main.t1 expect int 3
";

    fn killed_by_oracle(src: &str, mask: &Mask) -> (u64, u64) {
        let u = parse(src).unwrap();
        let excluded = u.suite.entry_methods(&u.program);
        let mut generator = Generator::new(&u.program, mask.clone(), excluded.clone());
        let (mut killed, mut total) = (0, 0);
        for loc in all_locations(&u.program, &excluded) {
            for m in generator.at(&loc) {
                let p = patched_program(&u.program, &m).unwrap();
                total += 1;
                let dead = u.suite.tests.iter().any(|t| {
                    let entry = u.suite.resolve_entry(&p, t).unwrap();
                    let out = execute(&p, &entry, 1_000_000, false).unwrap();
                    !t.expectation.matches(&out.status)
                });
                killed += u64::from(dead);
            }
        }
        (killed, total)
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mask = Mask::all();
        let u = parse(INC).unwrap();
        let s = mutation_score(&u.program, &u.suite, &mask, &[], &FuelPolicy::default(), 1).unwrap();
        assert_eq!((s.killed, s.total), killed_by_oracle(INC, &mask));
        assert_eq!(s.score, s.killed as f64 / s.total as f64);
    }

    #[test]
    fn stronger_suite_scores_higher() {
        let mask = Mask::only([MutatorId::AO, MutatorId::IC]);
        let body = ".class Main
.method static int dbl(int)
  .local 0 x int
  line 3
  load 0
  const int 2
  mul
  return int
.end
.method static int t1()
  line 10
  const int 2
  invokestatic Main.dbl(int)int
  return int
.end
.method static int t2()
  line 20
  const int 3
  invokestatic Main.dbl(int)int
  return int
.end
.test \"t1\" Main.t1 expect int 4
.test \"t2\" Main.t2 expect int 6
";
        // the weak suite only exercises x = 2, where x * 2 == x + 2
        let strong = body.to_string();
        let weak = body
            .replace("const int 3", "const int 2")
            .replace("expect int 6", "expect int 4");
        let score = |src: &str| {
            let u = parse(src).unwrap();
            mutation_score(&u.program, &u.suite, &mask, &[], &FuelPolicy::default(), 1).unwrap()
        };
        let (w, s) = (score(&weak), score(&strong));
        assert_eq!(w.total, s.total);
        assert!(s.score > w.score, "{} vs {}", s.score, w.score);
    }

    #[test]
    fn equivalents_are_checked() {
        let u = parse(INC).unwrap();
        let fuel = FuelPolicy::default();
        let mask = Mask::all();
        let err = mutation_score(&u.program, &u.suite, &mask, &["nope".into()], &fuel, 1);
        assert_eq!(err, Err(RepairError::UnknownEquivalent("nope".into())));
        let s = mutation_score(&u.program, &u.suite, &mask, &[], &fuel, 1).unwrap();
        let k = s.mutants.iter().find(|m| m.killed).unwrap().key.clone();
        let err = mutation_score(&u.program, &u.suite, &mask, std::slice::from_ref(&k), &fuel, 1);
        assert_eq!(err, Err(RepairError::KilledEquivalent(k)));
    }

    #[test]
    fn failing_suite_is_rejected() {
        let u = parse(&INC.replace("expect int 3", "expect int 4")).unwrap();
        let err = mutation_score(&u.program, &u.suite, &Mask::all(), &[], &FuelPolicy::default(), 1);
        assert_eq!(err, Err(RepairError::NotGreen("t1".into())));
    }
}
