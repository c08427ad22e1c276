//! Test cases, suite execution and line coverage.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::ir::{Location, MethodRef, Program, TypeTag, Value};
use crate::vm::{ConfigError, Status, Vm};

/// Entry method of a test, named by class and method name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entry {
    pub class: String,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expectation {
    Int(i64),
    Bool(bool),
    Fail,
}

impl Expectation {
    /// Exact match against an outcome; exhausted fuel never matches.
    pub fn matches(&self, status: &Status) -> bool {
        match (self, status) {
            (Expectation::Int(n), Status::Returned(Some(Value::Int(v)))) => n == v,
            (Expectation::Bool(b), Status::Returned(Some(Value::Bool(v)))) => b == v,
            (Expectation::Fail, Status::Failed(_)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub entry: Entry,
    pub expectation: Expectation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
    /// Source line each test was declared on, parallel to `tests`.
    pub decl_lines: Vec<usize>,
}

impl TestSuite {
    pub fn push(&mut self, test: TestCase, line: usize) {
        self.tests.push(test);
        self.decl_lines.push(line);
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Resolves a test's entry to a static zero-argument method whose return
    /// type can satisfy the expectation.
    pub fn resolve_entry(&self, program: &Program, test: &TestCase) -> Result<MethodRef, String> {
        let class = program
            .class(&test.entry.class)
            .ok_or_else(|| format!("test `{}`: unknown class `{}`", test.name, test.entry.class))?;
        let mut found = class
            .methods
            .iter()
            .filter(|m| m.name == test.entry.method && m.is_static && m.descriptor.params.is_empty());
        let m = found.next().ok_or_else(|| {
            format!(
                "test `{}`: no static zero-argument method `{}.{}`",
                test.name, test.entry.class, test.entry.method
            )
        })?;
        if found.next().is_some() {
            return Err(format!(
                "test `{}`: entry `{}.{}` is ambiguous",
                test.name, test.entry.class, test.entry.method
            ));
        }
        let ok = match test.expectation {
            Expectation::Int(_) => m.descriptor.ret == TypeTag::Int,
            Expectation::Bool(_) => m.descriptor.ret == TypeTag::Bool,
            Expectation::Fail => true,
        };
        if !ok {
            return Err(format!(
                "test `{}`: entry returns {} which cannot meet the expectation",
                test.name, m.descriptor.ret
            ));
        }
        Ok(m.key(&class.name))
    }

    pub fn check_entry(&self, program: &Program, test: &TestCase) -> Result<(), String> {
        self.resolve_entry(program, test).map(|_| ())
    }

    /// Entry methods of all tests; these are excluded from mutation.
    pub fn entry_methods(&self, program: &Program) -> HashSet<MethodRef> {
        self.tests
            .iter()
            .filter_map(|t| self.resolve_entry(program, t).ok())
            .collect()
    }
}

/// Per-test instruction budget derived from the unpatched run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuelPolicy {
    pub multiplier: u64,
    pub floor: u64,
    /// Budget of the unpatched run itself.
    pub baseline: u64,
}

impl Default for FuelPolicy {
    fn default() -> Self {
        FuelPolicy {
            multiplier: 10,
            floor: 10_000,
            baseline: 1_000_000,
        }
    }
}

impl FuelPolicy {
    /// Budget for validating patches on a test whose unpatched run used
    /// `used` instructions (`None` when it exhausted the baseline).
    pub fn budget(&self, used: Option<u64>) -> u64 {
        match used {
            Some(n) => self.multiplier.saturating_mul(n).max(self.floor),
            None => self.baseline,
        }
    }
}

/// Which tests cover which locations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMatrix {
    per_test: Vec<BTreeSet<Location>>,
    per_location: BTreeMap<Location, BTreeSet<usize>>,
}

impl CoverageMatrix {
    pub fn from_sets(per_test: Vec<BTreeSet<Location>>) -> Self {
        let mut per_location: BTreeMap<Location, BTreeSet<usize>> = BTreeMap::new();
        for (t, locs) in per_test.iter().enumerate() {
            for l in locs {
                per_location.entry(l.clone()).or_default().insert(t);
            }
        }
        CoverageMatrix {
            per_test,
            per_location,
        }
    }

    pub fn covered_by(&self, test: usize) -> &BTreeSet<Location> {
        &self.per_test[test]
    }

    /// Tests covering `loc`, ascending by declaration order.
    pub fn cover(&self, loc: &Location) -> BTreeSet<usize> {
        self.per_location.get(loc).cloned().unwrap_or_default()
    }

    /// All covered locations in lexicographic order.
    pub fn locations(&self) -> impl Iterator<Item = &Location> {
        self.per_location.keys()
    }

    pub fn test_count(&self) -> usize {
        self.per_test.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRun {
    pub status: Status,
    pub instructions_executed: u64,
    pub passed: bool,
    /// Budget for this test when validating patches.
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteRun {
    pub entries: Vec<MethodRef>,
    pub runs: Vec<TestRun>,
    pub failing: Vec<usize>,
    pub passing: Vec<usize>,
    pub coverage: CoverageMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Entry(String),
    #[error("nothing to repair: every test passes")]
    NothingToRepair,
}

/// Runs every test on the unpatched program with tracing on.
pub fn collect_coverage(
    program: &Program,
    suite: &TestSuite,
    policy: &FuelPolicy,
) -> Result<SuiteRun, TestError> {
    let vm = Vm::new(program)?;
    let mut entries = Vec::new();
    let mut runs = Vec::new();
    let mut sets = Vec::new();
    let (mut failing, mut passing) = (Vec::new(), Vec::new());
    for (i, t) in suite.tests.iter().enumerate() {
        let entry = suite.resolve_entry(program, t).map_err(TestError::Entry)?;
        let out = vm.run(&entry, policy.baseline, true)?;
        let passed = t.expectation.matches(&out.status);
        let used = (out.status != Status::FuelExhausted).then_some(out.instructions_executed);
        let points: BTreeSet<_> = out.trace.unwrap_or_default().into_iter().collect();
        sets.push(points.into_iter().map(|cp| vm.location(cp)).collect());
        if passed {
            passing.push(i);
        } else {
            failing.push(i);
        }
        runs.push(TestRun {
            status: out.status,
            instructions_executed: out.instructions_executed,
            passed,
            budget: policy.budget(used),
        });
        entries.push(entry);
    }
    Ok(SuiteRun {
        entries,
        runs,
        failing,
        passing,
        coverage: CoverageMatrix::from_sets(sets),
    })
}

/// Like [`collect_coverage`], but requires at least one failing test.
pub fn run_suite(program: &Program, suite: &TestSuite, policy: &FuelPolicy) -> Result<SuiteRun, TestError> {
    let run = collect_coverage(program, suite, policy)?;
    if run.failing.is_empty() {
        return Err(TestError::NothingToRepair);
    }
    Ok(run)
}

/// Runs one test on an already linked (patched) program without tracing.
pub fn run_test_on_patch(vm: &Vm<'_>, entry: &MethodRef, test: &TestCase, fuel: u64) -> bool {
    match vm.run(entry, fuel, false) {
        Ok(out) => test.expectation.matches(&out.status),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;

    const BRANCHY: &str = "\
.class Main
.method static int pick(int)
  .local 0 x int
  line 10
  load 0
  const int 0
  cmp gt
  jmpif POS
  line 11
  const int -1
  return int
POS:
  line 12
  const int 1
  return int
.end
.method static int neg()
  line 20
  const int -5
  invokestatic Main.pick(int)int
  return int
.end
.method static int pos()
  line 30
  const int 5
  invokestatic Main.pick(int)int
  return int
.end
.test \"neg\" Main.neg expect int -1
.test \"pos\" Main.pos expect int 5
";

    fn loc(method: &str, params: Vec<TypeTag>, line: u32) -> Location {
        Location {
            class: "Main".into(),
            method: method.into(),
            descriptor: crate::ir::Descriptor::new(params, TypeTag::Int),
            line,
        }
    }

    #[test]
    fn partitions_and_covers_branches() {
        let u = parse(BRANCHY).unwrap();
        let run = run_suite(&u.program, &u.suite, &FuelPolicy::default()).unwrap();
        assert_eq!(run.failing, vec![1]);
        assert_eq!(run.passing, vec![0]);
        let neg: Vec<_> = run.coverage.covered_by(0).iter().cloned().collect();
        assert_eq!(
            neg,
            vec![
                loc("neg", vec![], 20),
                loc("pick", vec![TypeTag::Int], 10),
                loc("pick", vec![TypeTag::Int], 11),
            ]
        );
        let then_line = loc("pick", vec![TypeTag::Int], 12);
        assert_eq!(run.coverage.cover(&then_line), BTreeSet::from([1]));
        assert!(!run.coverage.covered_by(0).contains(&then_line));
        assert_eq!(run.runs[0].budget, 10_000);
    }

    #[test]
    fn all_passing_is_nothing_to_repair() {
        let src = BRANCHY.replace("expect int 5", "expect int 1");
        let u = parse(&src).unwrap();
        assert_eq!(
            run_suite(&u.program, &u.suite, &FuelPolicy::default()),
            Err(TestError::NothingToRepair)
        );
        assert!(collect_coverage(&u.program, &u.suite, &FuelPolicy::default()).is_ok());
    }

    #[test]
    fn exhausted_fuel_never_matches() {
        for e in [Expectation::Int(0), Expectation::Bool(false), Expectation::Fail] {
            assert!(!e.matches(&Status::FuelExhausted));
        }
    }

    #[test]
    fn budget_policy() {
        let p = FuelPolicy::default();
        assert_eq!(p.budget(Some(5)), 10_000);
        assert_eq!(p.budget(Some(2_000)), 20_000);
        assert_eq!(p.budget(None), 1_000_000);
    }
}
