//! Mutation-based automated program repair over a small stack bytecode.

pub mod asm;
pub mod faultloc;
pub mod ir;
pub mod mutators;
pub mod repair;
pub mod report;
pub mod testing;
pub mod verify;
pub mod vm;

pub use asm::{parse, parse_named, render, render_unit, ParseError, SourceUnit};
pub use faultloc::{ochiai, rank_locations, Suspicious, SuspiciousnessRanking};
pub use ir::{
    ClassDef, Constant, Descriptor, FieldRef, Instruction, Location, MethodDef, MethodRef, Program, TypeTag,
};
pub use mutators::{apply, generate_candidates, CandidatePatch, Mask, MutatorId};
pub use repair::{
    mutation_score, rank_patches, repair, validate_patch, MutationScore, PatchStatus, RankedPatch,
    RepairConfig, RepairError, RepairResult, ValidationRecord,
};
pub use report::{render_machine_readable, render_report, Clock, FixedClock};
pub use testing::{collect_coverage, run_suite, CoverageMatrix, FuelPolicy, SuiteRun, TestCase, TestSuite};
pub use verify::{verify, VerifyError};
pub use vm::{execute, ExecOutcome, FailReason, Status, Vm};
