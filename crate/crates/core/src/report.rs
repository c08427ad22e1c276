//! Human-readable and tab-separated fix reports.

use std::fmt::Write as _;

use similar::{capture_diff_slices, Algorithm, ChangeTag};

use crate::asm::render_method_lines;
use crate::ir::Program;
use crate::mutators::apply;
use crate::repair::{rank_patches, RepairResult};

pub const TOOL: &str = "mvm-repair";
pub const RULE: &str = "================================================";
pub const SEPARATOR: &str = "-----------";

/// Source of the report timestamp.
pub trait Clock {
    fn timestamp(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn timestamp(&self) -> String {
        self.0.clone()
    }
}

/// Line diff of the original and patched enclosing method.
pub fn method_diff(original: &[String], patched: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for op in capture_diff_slices(Algorithm::Lcs, original, patched) {
        for c in op.iter_changes(original, patched) {
            let mark = match c.tag() {
                ChangeTag::Equal => "   ",
                ChangeTag::Delete => "---",
                ChangeTag::Insert => "+++",
            };
            out.push(format!("{mark}{}", c.value()));
        }
    }
    out
}

fn patch_diff(program: &Program, result: &RepairResult, record: usize) -> Option<Vec<String>> {
    let patch = &result.records[record].patch;
    let loc = &patch.location;
    let before = program.method(&loc.method_ref())?;
    let patched = apply(program, patch).ok()?;
    let after = patched.method(&loc.method_ref())?;
    Some(method_diff(
        &render_method_lines(before, ""),
        &render_method_lines(after, ""),
    ))
}

/// Renders the fix report. With `diffs`, each entry is followed by a diff of
/// its enclosing method against the given original program.
pub fn render_report(result: &RepairResult, diffs: Option<&Program>, clock: &dyn Clock) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "{TOOL} Fix Report - {}", clock.timestamp());
    let _ = writeln!(o, "Number of Plausible Fixes: {}", result.plausible.len());
    let _ = writeln!(o, "Total Number of Patches: {}", result.total_candidates);
    let _ = writeln!(o, "{RULE}");
    for (k, ranked) in rank_patches(result).into_iter().enumerate() {
        if k > 0 {
            let _ = writeln!(o, "{SEPARATOR}");
        }
        let p = &result.records[ranked.record].patch;
        let _ = writeln!(
            o,
            "{}. Mutator = {} ({}),",
            k + 1,
            p.mutator.name(),
            p.description
        );
        let _ = writeln!(o, "File Name = {},", result.subject);
        let _ = writeln!(o, "Line Number = {}.", p.location.line);
        let _ = writeln!(o, "Rank = {}.", ranked.rank);
        if let Some(lines) = diffs.and_then(|prog| patch_diff(prog, result, ranked.record)) {
            o.push('\n');
            for l in lines {
                let _ = writeln!(o, "{l}");
            }
        }
    }
    o
}

/// One tab-separated line per plausible patch:
/// rank, mutator id, file, line, description.
pub fn render_machine_readable(result: &RepairResult) -> String {
    let mut o = String::new();
    for ranked in rank_patches(result) {
        let p = &result.records[ranked.record].patch;
        let desc: String = p
            .description
            .chars()
            .map(|c| if c == '\t' || c == '\n' { ' ' } else { c })
            .collect();
        let _ = writeln!(
            o,
            "{}\t{}\t{}\t{}\t{}",
            ranked.rank,
            p.mutator.code(),
            result.subject,
            p.location.line,
            desc
        );
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;
    use crate::mutators::MutatorId;
    use crate::repair::{repair, RepairConfig};

    // `isWs` is consulted where it should not be; line 307 holds the bug.
    const WS: &str = "\
.class Main
.method static bool isWs(int)
  .local 0 c int
  line 20
  load 0
  const int 32
  cmp eq
  return bool
.end
.method static int count(int)
  .local 0 c int
  line 307
  load 0
  invokestatic Main.isWs(int)bool
  jmpif SKIP
  line 308
  const int 1
  return int
SKIP:
  line 309
  const int 0
  return int
.end
.method static int a()
  line 400
  const int 32
  invokestatic Main.count(int)int
  return int
.end
.method static int b()
  line 401
  const int 7
  invokestatic Main.count(int)int
  return int
.end
.test \"space\" Main.a expect int 1
.test \"letter\" Main.b expect int 1
";

    fn result() -> (Program, RepairResult) {
        let u = parse(WS).unwrap();
        let r = repair("Main.mvm", &u.program, &u.suite, &RepairConfig::default()).unwrap();
        (u.program, r)
    }

    #[test]
    fn header_and_entries() {
        let (_, r) = result();
        let text = render_report(&r, None, &FixedClock("T0".into()));
        let n = r.plausible.len();
        assert!(n >= 2);
        assert!(text.starts_with("mvm-repair Fix Report - T0\n"));
        assert!(text.contains(&format!("Number of Plausible Fixes: {n}\n")));
        assert!(text.contains(&format!("Total Number of Patches: {}\n", r.total_candidates)));
        assert_eq!(text.matches("Line Number = ").count(), n);
        assert_eq!(text.matches(&format!("\n{SEPARATOR}\n")).count(), n - 1);
        assert!(text.contains(
            "Mutator = METHOD CALL (removed call to Main::isWs, and supplied default return value false),"
        ));
        assert!(text.contains("Line Number = 307."));
        assert_eq!(text, render_report(&r, None, &FixedClock("T0".into())));
    }

    #[test]
    fn entries_resolve_to_program_locations() {
        let (p, r) = result();
        for line in render_machine_readable(&r).lines() {
            let f: Vec<&str> = line.split('\t').collect();
            assert_eq!(f.len(), 5);
            assert!(MutatorId::from_code(f[1]).is_some());
            assert_eq!(f[2], "Main.mvm");
            let l: u32 = f[3].parse().unwrap();
            assert!(p
                .classes
                .iter()
                .flat_map(|c| &c.methods)
                .any(|m| m.line_map.contains(&l)));
        }
    }

    #[test]
    fn empty_report() {
        let (_, mut r) = result();
        r.plausible.clear();
        let text = render_report(&r, None, &FixedClock("T".into()));
        assert!(text.contains("Number of Plausible Fixes: 0\n"));
        assert!(text.ends_with(&format!("{RULE}\n")));
        assert_eq!(render_machine_readable(&r), "");
    }

    #[test]
    fn diffs_mark_changed_lines() {
        let (p, r) = result();
        let text = render_report(&r, Some(&p), &FixedClock("T".into()));
        assert!(
            text.contains("---  /*307*/ invokestatic Main.isWs(int)bool"),
            "{text}"
        );
        assert!(text.contains("+++  /*307*/ pop"));
        assert!(text.contains("+++  /*307*/ const bool false"));
    }

    #[test]
    fn diff_is_an_alignment() {
        let a: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let b: Vec<String> = ["x", "q", "z", "w"].map(String::from).to_vec();
        let d = method_diff(&a, &b);
        let old: Vec<&str> = d
            .iter()
            .filter(|l| !l.starts_with("+++"))
            .map(|l| &l[3..])
            .collect();
        let new: Vec<&str> = d
            .iter()
            .filter(|l| !l.starts_with("---"))
            .map(|l| &l[3..])
            .collect();
        assert_eq!(old, ["x", "y", "z"]);
        assert_eq!(new, ["x", "q", "z", "w"]);
        assert_eq!(d.iter().filter(|l| l.starts_with("   ")).count(), 2);
    }
}
