//! Line-oriented serialization of [`RepairResult`]. Fields are separated by
//! tabs, shown as spaces below.
//!
//! ```text
//! mvm-repair-result 1
//! subject abs.mvm
//! mask all
//! fuel 10 10000 1000000
//! test <name> pass|fail <executed> <budget>
//! totals <candidates> <validated> <executions>
//! tally <ID> <generated> <validated> <plausible>
//! record <ID> <location> <start> <end> <ordinal> <status> <executed> <suspiciousness> <description>
//! code <instruction>
//! label <name> <offset>
//! temp <type>
//! plausible <record>...
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{MutatorTally, PatchStatus, RepairResult, TestSummary, ValidationRecord};
use crate::asm::{parse_instruction, parse_method_ref, parse_type};
use crate::ir::Location;
use crate::mutators::{CandidatePatch, Mask, MutatorId};
use crate::testing::FuelPolicy;

pub const MAGIC: &str = "mvm-repair-result";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("result file line {line}: {message}")]
pub struct ResultFileError {
    pub line: usize,
    pub message: String,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(format!(
                    "bad escape `\\{}`",
                    other.map(String::from).unwrap_or_default()
                ))
            }
        }
    }
    Ok(out)
}

fn status_text(s: PatchStatus) -> String {
    match s {
        PatchStatus::SkippedUncovered => "skipped".into(),
        PatchStatus::FalsifiedByFailing(t) => format!("falsified-failing:{t}"),
        PatchStatus::FalsifiedByPassing(t) => format!("falsified-passing:{t}"),
        PatchStatus::Plausible => "plausible".into(),
    }
}

fn parse_status(s: &str) -> Result<PatchStatus, String> {
    let num = |t: &str| {
        t.parse::<usize>()
            .map_err(|e| format!("bad test index `{t}`: {e}"))
    };
    match s.split_once(':') {
        None if s == "skipped" => Ok(PatchStatus::SkippedUncovered),
        None if s == "plausible" => Ok(PatchStatus::Plausible),
        Some(("falsified-failing", t)) => Ok(PatchStatus::FalsifiedByFailing(num(t)?)),
        Some(("falsified-passing", t)) => Ok(PatchStatus::FalsifiedByPassing(num(t)?)),
        _ => Err(format!("unknown status `{s}`")),
    }
}

pub fn parse_location(s: &str) -> Result<Location, String> {
    let (head, line) = s
        .rsplit_once(':')
        .ok_or_else(|| format!("location `{s}` lacks a line"))?;
    let m = parse_method_ref(head)?;
    Ok(Location {
        class: m.class,
        method: m.name,
        descriptor: m.descriptor,
        line: line.parse().map_err(|e| format!("bad line in `{s}`: {e}"))?,
    })
}

pub fn write(result: &RepairResult) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "{MAGIC}\t{VERSION}");
    let _ = writeln!(o, "subject\t{}", escape(&result.subject));
    let _ = writeln!(o, "mask\t{}", result.mask);
    let f = &result.fuel;
    let _ = writeln!(o, "fuel\t{}\t{}\t{}", f.multiplier, f.floor, f.baseline);
    for t in &result.tests {
        let verdict = if t.originally_passing { "pass" } else { "fail" };
        let _ = writeln!(
            o,
            "test\t{}\t{verdict}\t{}\t{}",
            escape(&t.name),
            t.instructions_executed,
            t.budget
        );
    }
    let _ = writeln!(
        o,
        "totals\t{}\t{}\t{}",
        result.total_candidates, result.total_validated, result.total_executions
    );
    for (id, t) in &result.tallies {
        let _ = writeln!(
            o,
            "tally\t{}\t{}\t{}\t{}",
            id.code(),
            t.generated,
            t.validated,
            t.plausible
        );
    }
    for r in &result.records {
        let p = &r.patch;
        let _ = writeln!(
            o,
            "record\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.mutator.code(),
            p.location,
            p.span.start,
            p.span.end,
            p.ordinal,
            status_text(r.status),
            r.tests_executed,
            r.suspiciousness,
            escape(&p.description)
        );
        for ins in &p.replacement {
            let _ = writeln!(o, "code\t{ins}");
        }
        for (name, at) in &p.labels {
            let _ = writeln!(o, "label\t{name}\t{at}");
        }
        for t in &p.temps {
            let _ = writeln!(o, "temp\t{t}");
        }
    }
    let idx: Vec<String> = result.plausible.iter().map(ToString::to_string).collect();
    if idx.is_empty() {
        o.push_str("plausible\n");
    } else {
        let _ = writeln!(o, "plausible\t{}", idx.join("\t"));
    }
    o.push_str("end\n");
    o
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| format!("bad number `{s}`: {e}"))
}

fn mutator(s: &str) -> Result<MutatorId, String> {
    MutatorId::from_code(s).ok_or_else(|| format!("unknown mutator `{s}`"))
}

fn last_patch<'r>(
    r: &'r mut RepairResult,
    line: usize,
    tag: &str,
) -> Result<&'r mut CandidatePatch, ResultFileError> {
    r.records
        .last_mut()
        .map(|x| &mut x.patch)
        .ok_or_else(|| ResultFileError {
            line,
            message: format!("`{tag}` before any record"),
        })
}

pub fn parse(text: &str) -> Result<RepairResult, ResultFileError> {
    let mut result = RepairResult {
        subject: String::new(),
        mask: Mask::all(),
        fuel: FuelPolicy::default(),
        tests: Vec::new(),
        records: Vec::new(),
        plausible: Vec::new(),
        tallies: BTreeMap::new(),
        total_candidates: 0,
        total_validated: 0,
        total_executions: 0,
    };
    let mut ended = false;
    let mut last = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        last = line;
        let err = |message: String| ResultFileError { line, message };
        if ended {
            return Err(err("content after `end`".into()));
        }
        let f: Vec<&str> = raw.split('\t').collect();
        if line == 1 {
            if f != [MAGIC, VERSION.to_string().as_str()] {
                return Err(err(format!("expected `{MAGIC}\\t{VERSION}` header")));
            }
            continue;
        }
        let arity = |k: usize| {
            if f.len() == k {
                Ok(())
            } else {
                Err(err(format!(
                    "`{}` expects {} fields, found {}",
                    f[0],
                    k - 1,
                    f.len() - 1
                )))
            }
        };
        match f[0] {
            "subject" => {
                arity(2)?;
                result.subject = unescape(f[1]).map_err(err)?;
            }
            "mask" => {
                arity(2)?;
                result.mask = f[1].parse().map_err(|e: crate::mutators::MaskError| err(e.0))?;
            }
            "fuel" => {
                arity(4)?;
                result.fuel = FuelPolicy {
                    multiplier: num(f[1]).map_err(err)?,
                    floor: num(f[2]).map_err(err)?,
                    baseline: num(f[3]).map_err(err)?,
                };
            }
            "test" => {
                arity(5)?;
                let originally_passing = match f[2] {
                    "pass" => true,
                    "fail" => false,
                    v => return Err(err(format!("bad verdict `{v}`"))),
                };
                result.tests.push(TestSummary {
                    name: unescape(f[1]).map_err(err)?,
                    originally_passing,
                    instructions_executed: num(f[3]).map_err(err)?,
                    budget: num(f[4]).map_err(err)?,
                });
            }
            "totals" => {
                arity(4)?;
                result.total_candidates = num(f[1]).map_err(err)?;
                result.total_validated = num(f[2]).map_err(err)?;
                result.total_executions = num(f[3]).map_err(err)?;
            }
            "tally" => {
                arity(5)?;
                let id = mutator(f[1]).map_err(err)?;
                let t = MutatorTally {
                    generated: num(f[2]).map_err(err)?,
                    validated: num(f[3]).map_err(err)?,
                    plausible: num(f[4]).map_err(err)?,
                };
                if result.tallies.insert(id, t).is_some() {
                    return Err(err(format!("duplicate tally for {}", f[1])));
                }
            }
            "record" => {
                arity(10)?;
                let patch = CandidatePatch {
                    mutator: mutator(f[1]).map_err(err)?,
                    location: parse_location(f[2]).map_err(err)?,
                    span: num(f[3]).map_err(err)?..num(f[4]).map_err(err)?,
                    replacement: Vec::new(),
                    labels: Vec::new(),
                    temps: Vec::new(),
                    description: unescape(f[9]).map_err(err)?,
                    ordinal: num(f[5]).map_err(err)?,
                };
                result.records.push(ValidationRecord {
                    patch,
                    status: parse_status(f[6]).map_err(err)?,
                    tests_executed: num(f[7]).map_err(err)?,
                    suspiciousness: num(f[8]).map_err(err)?,
                });
            }
            "code" => {
                arity(2)?;
                let ins = parse_instruction(f[1]).map_err(err)?;
                last_patch(&mut result, line, f[0])?.replacement.push(ins);
            }
            "label" => {
                arity(3)?;
                let at = num(f[2]).map_err(err)?;
                last_patch(&mut result, line, f[0])?
                    .labels
                    .push((f[1].to_string(), at));
            }
            "temp" => {
                arity(2)?;
                let t = parse_type(f[1]).map_err(err)?;
                last_patch(&mut result, line, f[0])?.temps.push(t);
            }
            "plausible" => {
                result.plausible = f[1..]
                    .iter()
                    .map(|s| num::<usize>(s))
                    .collect::<Result<_, _>>()
                    .map_err(err)?;
                if let Some(&bad) = result.plausible.iter().find(|&&i| i >= result.records.len()) {
                    return Err(err(format!("plausible index {bad} out of range")));
                }
            }
            "end" => {
                arity(1)?;
                ended = true;
            }
            other => return Err(err(format!("unknown entry `{other}`"))),
        }
    }
    if !ended {
        return Err(ResultFileError {
            line: last,
            message: "missing `end`".into(),
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse as parse_unit;
    use crate::repair::{repair, RepairConfig};

    const SRC: &str = "\
.class Main
.method static int f(int)
  .local 0 x int
  line 3
  load 0
  const int 0
  cmp gt
  jmpif P
  line 4
  const int 0
  return int
P:
  line 5
  load 0
  const int 2
  add
  return int
.end
.method static int t1()
  line 10
  const int 3
  invokestatic Main.f(int)int
  return int
.end
.method static int t2()
  line 11
  const int -3
  invokestatic Main.f(int)int
  return int
.end
.test \"t 1\" Main.t1 expect int 6
.test \"t2\" Main.t2 expect int 0
";

    #[test]
    fn round_trip() {
        let u = parse_unit(SRC).unwrap();
        let r = repair(
            "dir\\with\ttab.mvm",
            &u.program,
            &u.suite,
            &RepairConfig::default(),
        )
        .unwrap();
        assert!(r
            .records
            .iter()
            .any(|x| !x.patch.labels.is_empty() || !x.patch.temps.is_empty()));
        let text = write(&r);
        let back = parse(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(write(&back), text);
    }

    #[test]
    fn rejects_damage() {
        let u = parse_unit(SRC).unwrap();
        let text = write(&repair("f.mvm", &u.program, &u.suite, &RepairConfig::default()).unwrap());
        assert_eq!(
            parse(text.trim_end_matches("end\n")).unwrap_err().message,
            "missing `end`"
        );
        assert_eq!(parse(&text.replacen("\t1\n", "\t2\n", 1)).unwrap_err().line, 1);
        let e = parse(&text.replace("record\t", "record\tZZ\t")).unwrap_err();
        assert!(e.message.contains("expects"), "{e}");
    }

    #[test]
    fn escapes_round_trip() {
        for s in ["", "a\tb", "x\\n", "line\nbreak\r", "\\\\t"] {
            assert_eq!(unescape(&escape(s)).unwrap(), s);
            assert!(!escape(s).contains('\t'));
        }
        assert!(unescape("bad\\q").is_err());
    }
}
