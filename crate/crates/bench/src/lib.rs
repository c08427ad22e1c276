//! Fixture loading shared by the benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

use mvm_repair::{parse_named, SourceUnit};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Parses one fixture, relative to the fixtures directory.
pub fn load(rel: &str) -> SourceUnit {
    let path = fixtures_dir().join(rel);
    let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_named(&text, rel).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Every seeded-bug fixture, sorted by name.
pub fn bug_corpus() -> Vec<SourceUnit> {
    let mut names: Vec<String> = fs::read_dir(fixtures_dir().join("bugs"))
        .expect("fixtures/bugs")
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".mvm"))
        .collect();
    names.sort();
    names.iter().map(|n| load(&format!("bugs/{n}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_loads() {
        assert!(bug_corpus().len() >= 20);
        assert!(!load("economy.mvm").suite.is_empty());
    }
}
