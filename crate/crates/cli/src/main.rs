use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mvm_repair::asm::render_method_lines;
use mvm_repair::faultloc::rank_locations;
use mvm_repair::mutators::all_locations;
use mvm_repair::repair::result_file;
use mvm_repair::testing::TestError;
use mvm_repair::{
    apply, collect_coverage, generate_candidates, mutation_score, parse_named, render_machine_readable,
    render_report, render_unit, repair, Clock, FixedClock, FuelPolicy, Mask, RepairConfig, RepairError,
    SourceUnit,
};

const TIMESTAMP_ENV: &str = "MVM_FIXED_TIMESTAMP";

#[derive(Parser)]
#[command(
    name = "mvm-repair",
    version,
    about = "Mutation-based repair for mvm bytecode programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for plausible patches and write a fix report.
    Repair {
        #[command(flatten)]
        common: Common,
        /// Report destination (standard output by default).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full result file here.
        #[arg(long)]
        result: Option<PathBuf>,
        /// Emit one tab-separated line per plausible patch instead of the report.
        #[arg(long)]
        machine_readable: bool,
        /// Show a diff of each patched method.
        #[arg(long)]
        diffs: bool,
        /// Timestamp for the report header.
        #[arg(long, env = TIMESTAMP_ENV)]
        fixed_timestamp: Option<String>,
    },
    /// Mutation score of the subject's (passing) test suite.
    MutationScore {
        #[command(flatten)]
        common: Common,
        /// List each mutant with its outcome.
        #[arg(long)]
        verbose: bool,
    },
    /// Test outcomes and per-location coverage or suspiciousness.
    Coverage {
        file: PathBuf,
        #[command(flatten)]
        fuel: Fuel,
    },
    /// List every candidate patch of a subject outside its test entries.
    Mutants {
        file: PathBuf,
        /// `all`, `original`, or a comma-separated list of mutator ids.
        #[arg(long, default_value = "all")]
        mutators: Mask,
        /// Print each patched method after its key.
        #[arg(long)]
        show: bool,
    },
    /// Parse and type-check a subject.
    Verify { file: PathBuf },
    /// Print the canonical rendering of a subject.
    Render { file: PathBuf },
}

#[derive(Args)]
struct Fuel {
    /// Per-test fuel as a multiple of the unpatched run.
    #[arg(long, default_value_t = 10)]
    fuel_mult: u64,
    /// Minimum per-test fuel.
    #[arg(long, default_value_t = 10_000)]
    fuel_floor: u64,
}

impl Fuel {
    fn policy(&self) -> FuelPolicy {
        FuelPolicy {
            multiplier: self.fuel_mult,
            floor: self.fuel_floor,
            ..FuelPolicy::default()
        }
    }
}

#[derive(Args)]
struct Common {
    file: PathBuf,
    /// `all`, `original`, or a comma-separated list of mutator ids.
    #[arg(long, default_value = "all")]
    mutators: Mask,
    #[command(flatten)]
    fuel: Fuel,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }

    fn subject(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 3,
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::usage(format!("{e:#}"))
    }
}

impl From<RepairError> for Failure {
    fn from(e: RepairError) -> Self {
        match e {
            RepairError::Test(TestError::NothingToRepair) | RepairError::NotGreen(_) => Failure::subject(e),
            e => Failure::usage(e),
        }
    }
}

struct WallClock;

impl Clock for WallClock {
    fn timestamp(&self) -> String {
        chrono::Local::now().format("%a %b %d %H:%M:%S %Z %Y").to_string()
    }
}

fn load(path: &Path) -> Result<SourceUnit, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let shown = path.display().to_string();
    let name = path
        .file_name()
        .map_or_else(|| shown.clone(), |n| n.to_string_lossy().into_owned());
    parse_named(&text, &name).map_err(|e| {
        let lines: Vec<String> = e.diagnostics.iter().map(|d| format!("{shown}:{d}")).collect();
        Failure::subject(lines.join("\n"))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(Failure::from),
        None => {
            // a closed pipe is not an error worth reporting
            let _ = io::stdout().lock().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Repair {
            common,
            out,
            result,
            machine_readable,
            diffs,
            fixed_timestamp,
        } => {
            let unit = load(&common.file)?;
            let config = RepairConfig {
                mask: common.mutators,
                fuel: common.fuel.policy(),
                jobs: usize::from(common.jobs),
            };
            let r = repair(&unit.path, &unit.program, &unit.suite, &config)?;
            if let Some(p) = &result {
                emit(Some(p), &result_file::write(&r))?;
            }
            let text = if machine_readable {
                render_machine_readable(&r)
            } else {
                let program = diffs.then_some(&unit.program);
                match fixed_timestamp {
                    Some(ts) => render_report(&r, program, &FixedClock(ts)),
                    None => render_report(&r, program, &WallClock),
                }
            };
            emit(out.as_deref(), &text)?;
            eprintln!(
                "{} plausible of {} candidates ({} validated, {} test executions)",
                r.plausible.len(),
                r.total_candidates,
                r.total_validated,
                r.total_executions
            );
            Ok(if r.plausible.is_empty() { 1 } else { 0 })
        }
        Command::MutationScore { common, verbose } => {
            let unit = load(&common.file)?;
            let s = mutation_score(
                &unit.program,
                &unit.suite,
                &common.mutators,
                &unit.equivalents,
                &common.fuel.policy(),
                usize::from(common.jobs),
            )?;
            let mut o = String::new();
            if verbose {
                for m in &s.mutants {
                    let tag = match (m.killed, m.equivalent) {
                        (true, _) => "killed",
                        (false, true) => "equivalent",
                        (false, false) => "survived",
                    };
                    let _ = writeln!(o, "{tag}\t{}", m.key);
                }
            }
            let _ = writeln!(
                o,
                "killed = {}, total = {}, equivalent = {}",
                s.killed, s.total, s.equivalent
            );
            let _ = writeln!(o, "MS = {}", s.score);
            emit(None, &o)?;
            Ok(0)
        }
        Command::Coverage { file, fuel } => {
            let unit = load(&file)?;
            let run = collect_coverage(&unit.program, &unit.suite, &fuel.policy())
                .map_err(|e| Failure::from(RepairError::from(e)))?;
            let mut o = String::new();
            for (t, r) in unit.suite.tests.iter().zip(&run.runs) {
                let verdict = if r.passed { "pass" } else { "fail" };
                let _ = writeln!(o, "test\t{}\t{verdict}\t{}", t.name, r.instructions_executed);
            }
            if run.failing.is_empty() {
                for loc in run.coverage.locations() {
                    let _ = writeln!(o, "cover\t{loc}\t{}", run.coverage.cover(loc).len());
                }
            } else {
                let ranking = rank_locations(&run.coverage, &run.failing)
                    .map_err(|e| Failure::from(RepairError::from(e)))?;
                for s in &ranking.entries {
                    let _ = writeln!(o, "ochiai\t{}\t{}\t{}\t{:.6}", s.location, s.ef, s.ep, s.score);
                }
            }
            emit(None, &o)?;
            Ok(0)
        }
        Command::Mutants { file, mutators, show } => {
            let unit = load(&file)?;
            let excluded = unit.suite.entry_methods(&unit.program);
            let locations = all_locations(&unit.program, &excluded);
            let mut o = String::new();
            for p in generate_candidates(&unit.program, &locations, &mutators, &excluded) {
                let _ = writeln!(o, "{}\t{}", p.key(), p.description);
                if show {
                    let patched = apply(&unit.program, &p).map_err(Failure::usage)?;
                    if let Some(m) = patched.method(&p.location.method_ref()) {
                        for row in render_method_lines(m, "    ") {
                            let _ = writeln!(o, "{row}");
                        }
                    }
                }
            }
            emit(None, &o)?;
            Ok(0)
        }
        Command::Verify { file } => {
            let unit = load(&file)?;
            let text = format!(
                "{}: ok ({} classes, {} tests)\n",
                unit.path,
                unit.program.classes.len(),
                unit.suite.len()
            );
            emit(None, &text)?;
            Ok(0)
        }
        Command::Render { file } => {
            let unit = load(&file)?;
            emit(None, &render_unit(&unit))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
