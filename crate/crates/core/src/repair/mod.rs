//! Generate-and-validate repair loop.

mod rank;
pub mod result_file;
mod score;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::faultloc::{rank_locations, FaultLocError};
use crate::ir::{MethodRef, Program};
use crate::mutators::{apply, CandidatePatch, Generator, Mask, MutatorId, PatchError};
use crate::testing::{run_suite, run_test_on_patch, FuelPolicy, SuiteRun, TestError, TestSuite};
use crate::verify::{verify, VerifyError};
use crate::vm::Vm;

pub use rank::{rank_keys, rank_patches, RankKey, RankedPatch};
pub use score::{mutation_score, MutantOutcome, MutationScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatchStatus {
    /// The patched location is not covered by every failing test.
    SkippedUncovered,
    /// Index of the first originally-failing test that still fails.
    FalsifiedByFailing(usize),
    /// Index of the first originally-passing test the patch breaks.
    FalsifiedByPassing(usize),
    Plausible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub patch: CandidatePatch,
    pub status: PatchStatus,
    pub tests_executed: u64,
    pub suspiciousness: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutatorTally {
    pub generated: u64,
    pub validated: u64,
    pub plausible: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSummary {
    pub name: String,
    pub originally_passing: bool,
    pub instructions_executed: u64,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairResult {
    /// Subject file name shown in reports.
    pub subject: String,
    pub mask: Mask,
    pub fuel: FuelPolicy,
    pub tests: Vec<TestSummary>,
    pub records: Vec<ValidationRecord>,
    /// Indices into `records` of plausible patches, in validation order.
    pub plausible: Vec<usize>,
    pub tallies: BTreeMap<MutatorId, MutatorTally>,
    pub total_candidates: u64,
    pub total_validated: u64,
    pub total_executions: u64,
}

impl RepairResult {
    pub fn plausible_records(&self) -> impl Iterator<Item = &ValidationRecord> {
        self.plausible.iter().map(|&i| &self.records[i])
    }

    pub fn tally(&self, id: MutatorId) -> MutatorTally {
        self.tallies.get(&id).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    FaultLoc(#[from] FaultLocError),
    #[error("internal error: patch {key} cannot be applied: {source}")]
    Apply { key: String, source: PatchError },
    #[error("internal error: patch {key} does not verify: {source}")]
    IllTyped { key: String, source: Box<VerifyError> },
    #[error("mutation score needs a passing suite; test `{0}` fails on the original program")]
    NotGreen(String),
    #[error("equivalent mutant `{0}` is not generated for this program")]
    UnknownEquivalent(String),
    #[error("mutant `{0}` is declared equivalent but is killed")]
    KilledEquivalent(String),
    #[error("no non-equivalent mutants")]
    NoMutants,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairConfig {
    pub mask: Mask,
    pub fuel: FuelPolicy,
    /// Worker threads for patch validation.
    pub jobs: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            mask: Mask::all(),
            fuel: FuelPolicy::default(),
            jobs: 1,
        }
    }
}

/// Applies and type-checks a patch.
pub fn patched_program(program: &Program, patch: &CandidatePatch) -> Result<Program, RepairError> {
    let patched = apply(program, patch).map_err(|source| RepairError::Apply {
        key: patch.key(),
        source,
    })?;
    verify(&patched).map_err(|source| RepairError::IllTyped {
        key: patch.key(),
        source: Box::new(source),
    })?;
    Ok(patched)
}

/// Validates one patch: failing tests first, then covering passing tests,
/// stopping at the first failure.
pub fn validate_patch(
    program: &Program,
    patch: &CandidatePatch,
    suite: &TestSuite,
    run: &SuiteRun,
    suspiciousness: f64,
) -> Result<ValidationRecord, RepairError> {
    let record = |status, tests_executed| ValidationRecord {
        patch: patch.clone(),
        status,
        tests_executed,
        suspiciousness,
    };
    let cover = run.coverage.cover(&patch.location);
    if !run.failing.iter().all(|t| cover.contains(t)) {
        return Ok(record(PatchStatus::SkippedUncovered, 0));
    }
    let patched = patched_program(program, patch)?;
    let vm = Vm::new(&patched).map_err(|e| RepairError::Test(e.into()))?;
    let mut executed = 0;
    let mut passes = |t: usize| {
        executed += 1;
        run_test_on_patch(&vm, &run.entries[t], &suite.tests[t], run.runs[t].budget)
    };
    for &t in &run.failing {
        if !passes(t) {
            return Ok(record(PatchStatus::FalsifiedByFailing(t), executed));
        }
    }
    for &t in run.passing.iter().filter(|t| cover.contains(t)) {
        if !passes(t) {
            return Ok(record(PatchStatus::FalsifiedByPassing(t), executed));
        }
    }
    Ok(record(PatchStatus::Plausible, executed))
}

/// Maps `f` over `items` on `jobs` threads, preserving order.
pub(crate) fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
    match pool {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Candidates for a suite run: every location covered by a failing test,
/// most suspicious first, outside the test entry methods.
pub fn prioritized_candidates(
    program: &Program,
    suite: &TestSuite,
    run: &SuiteRun,
    mask: &Mask,
) -> Result<Vec<(CandidatePatch, f64)>, RepairError> {
    let excluded: HashSet<MethodRef> = suite.entry_methods(program);
    let ranking = rank_locations(&run.coverage, &run.failing)?;
    let mut generator = Generator::new(program, mask.clone(), excluded.clone());
    let mut out = Vec::new();
    for s in &ranking.entries {
        if excluded.contains(&s.location.method_ref()) {
            continue;
        }
        out.extend(generator.at(&s.location).into_iter().map(|p| (p, s.score)));
    }
    Ok(out)
}

/// Runs the full repair loop over a subject.
pub fn repair(
    subject: &str,
    program: &Program,
    suite: &TestSuite,
    config: &RepairConfig,
) -> Result<RepairResult, RepairError> {
    let run = run_suite(program, suite, &config.fuel)?;
    let candidates = prioritized_candidates(program, suite, &run, &config.mask)?;
    let records = parallel_map(&candidates, config.jobs, |(p, s)| {
        validate_patch(program, p, suite, &run, *s)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut tallies: BTreeMap<MutatorId, MutatorTally> = BTreeMap::new();
    let mut plausible = Vec::new();
    let (mut validated, mut executions) = (0, 0);
    for (i, r) in records.iter().enumerate() {
        let t = tallies.entry(r.patch.mutator).or_default();
        t.generated += 1;
        executions += r.tests_executed;
        if r.status != PatchStatus::SkippedUncovered {
            t.validated += 1;
            validated += 1;
        }
        if r.status == PatchStatus::Plausible {
            t.plausible += 1;
            plausible.push(i);
        }
    }
    let tests = suite
        .tests
        .iter()
        .zip(&run.runs)
        .map(|(t, r)| TestSummary {
            name: t.name.clone(),
            originally_passing: r.passed,
            instructions_executed: r.instructions_executed,
            budget: r.budget,
        })
        .collect();
    Ok(RepairResult {
        subject: subject.to_string(),
        mask: config.mask.clone(),
        fuel: config.fuel,
        tests,
        total_candidates: records.len() as u64,
        total_validated: validated,
        total_executions: executions,
        records,
        plausible,
        tallies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;

    // `abs` multiplies by 1 instead of -1; test `neg` fails.
    const ABS: &str = "\
.class Main
.method static int abs(int)
  .local 0 x int
  line 3
  load 0
  const int 0
  cmp lt
  jmpif NEG
  line 4
  load 0
  return int
NEG:
  line 5
  load 0
  const int 1
  mul
  return int
.end
.method static int pos()
  line 10
  const int 4
  invokestatic Main.abs(int)int
  return int
.end
.method static int neg()
  line 11
  const int -4
  invokestatic Main.abs(int)int
  return int
.end
.test \"pos\" Main.pos expect int 4
.test \"neg\" Main.neg expect int 4
";

    #[test]
    fn repairs_abs() {
        let u = parse(ABS).unwrap();
        let r = repair("abs.mvm", &u.program, &u.suite, &RepairConfig::default()).unwrap();
        assert!(!r.plausible.is_empty());
        assert!(r.plausible_records().any(|p| p.patch.location.line == 5
            && p.patch.mutator == MutatorId::IC
            && p.patch.replacement == [crate::ir::Instruction::Const(crate::ir::Constant::Int(-1))]));
        // no patch in the test entry methods
        assert!(r.records.iter().all(|p| p.patch.location.method == "abs"));
        assert_eq!(
            r.total_validated,
            r.records
                .iter()
                .filter(|p| p.status != PatchStatus::SkippedUncovered)
                .count() as u64
        );
        for p in r.records.iter() {
            match p.status {
                PatchStatus::SkippedUncovered => assert_eq!(p.tests_executed, 0),
                PatchStatus::FalsifiedByFailing(_) => assert_eq!(p.tests_executed, 1),
                _ => {}
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let u = parse(ABS).unwrap();
        let one = repair("abs.mvm", &u.program, &u.suite, &RepairConfig::default()).unwrap();
        let four = repair(
            "abs.mvm",
            &u.program,
            &u.suite,
            &RepairConfig {
                jobs: 4,
                ..RepairConfig::default()
            },
        )
        .unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn nothing_to_repair() {
        let u = parse(&ABS.replace("Main.neg expect int 4", "Main.neg expect int -4")).unwrap();
        assert_eq!(
            repair("abs.mvm", &u.program, &u.suite, &RepairConfig::default()),
            Err(RepairError::Test(TestError::NothingToRepair))
        );
    }
}
