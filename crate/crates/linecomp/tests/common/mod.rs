//! Shared test support: an independent naive evaluation oracle (nested
//! loops, no index, no shared engine code), process helpers for driving the
//! CLI binary, and a seeded synthetic git history generator.

#![allow(dead_code)] // each integration test binary uses a different subset

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn fixture_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus_mini")
}

pub fn fixture_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

// ---------------------------------------------------------------------------
// Naive evaluation oracle.
//
// Deliberately reimplements the whole protocol from its plain-language
// definition (not from the library): its own directory walker, its own JSONL
// field extraction, trimming, nested-loop matching over a plain set of lines.

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveRow {
    pub k: usize,
    pub total_added: u64,
    pub suggestible: u64,
    pub short_excluded: u64,
    pub queries: u64,
    pub retrieved_total: u64,
    pub relevant_total: u64,
    pub hits: u64,
    pub recall_global: Option<f64>,
    pub recall_conditional: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn naive_is_source(name: &str) -> bool {
    let lower = name.to_lowercase();
    lower.ends_with(".c") || lower.ends_with(".h") || lower.ends_with(".java")
}

fn naive_collect_lines(dir: &Path, out: &mut Vec<String>) {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("read {}: {e}", dir.display()))
        .map(|e| e.unwrap())
        .collect();
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            naive_collect_lines(&path, out);
        } else if naive_is_source(&entry.file_name().to_string_lossy()) {
            let text = fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
            for line in text.lines() {
                out.push(line.to_string());
            }
        }
    }
}

/// Loads the distinct trimmed, non-empty lines of snapshot `rev`.
fn naive_pool(corpus: &Path, rev: usize) -> BTreeSet<String> {
    let dir = corpus.join(format!("r{rev:04}"));
    let mut raw = Vec::new();
    naive_collect_lines(&dir, &mut raw);
    raw.iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.to_string())
        .collect()
}

/// Extracts (revision, text) pairs from an added-line JSONL file using
/// generic JSON parsing only.
pub fn naive_read_db(path: &Path) -> Vec<(usize, String)> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("read db: {e}"));
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let value: serde_json::Value = serde_json::from_str(line).expect("valid JSONL");
            let rev = value["rev"].as_u64().expect("rev field") as usize;
            let text = value["text"].as_str().expect("text field").to_string();
            (rev, text)
        })
        .collect()
}

fn naive_revision_count(corpus: &Path) -> usize {
    fs::read_to_string(corpus.join("manifest.tsv"))
        .expect("manifest")
        .lines()
        .filter(|l| !l.is_empty())
        .count()
}

/// Nested-loop sweep over a corpus directory and extracted database.
pub fn naive_sweep(
    corpus: &Path,
    records: &[(usize, String)],
    k_min: usize,
    k_max: usize,
    fixed_cohort: bool,
) -> Vec<NaiveRow> {
    let revision_count = naive_revision_count(corpus);
    assert!(revision_count >= 2, "oracle needs two revisions");
    if records.is_empty() {
        return Vec::new();
    }

    let mut rows = Vec::new();
    for k in k_min..=k_max {
        let mut total_added = 0u64;
        let mut suggestible = 0u64;
        let mut short_excluded = 0u64;
        let mut queries = 0u64;
        let mut retrieved_total = 0u64;
        let mut relevant_total = 0u64;
        let mut hits = 0u64;

        for prev_rev in 0..revision_count - 1 {
            let pool = naive_pool(corpus, prev_rev);
            for (rev, text) in records {
                if *rev != prev_rev + 1 {
                    continue;
                }
                let trimmed = text.trim();
                if trimmed.is_empty() {
                    continue;
                }
                if fixed_cohort
                    && !(pool.contains(trimmed) && trimmed.chars().count() > k_max)
                {
                    continue;
                }
                total_added += 1;
                if !pool.contains(trimmed) {
                    continue;
                }
                suggestible += 1;
                if trimmed.chars().count() < k + 1 {
                    short_excluded += 1;
                    continue;
                }
                queries += 1;
                let prefix: String = trimmed.chars().take(k).collect();
                let mut retrieved = 0u64;
                let mut relevant = 0u64;
                for entry in &pool {
                    if entry.starts_with(&prefix) {
                        retrieved += 1;
                        if entry == trimmed {
                            relevant += 1;
                        }
                    }
                }
                retrieved_total += retrieved;
                relevant_total += relevant;
                if relevant >= 1 {
                    hits += 1;
                }
            }
        }

        let recall_global = if total_added == 0 {
            None
        } else {
            Some(100.0 * suggestible as f64 / total_added as f64)
        };
        let recall_conditional = if suggestible == 0 {
            None
        } else {
            Some(100.0 * hits as f64 / suggestible as f64)
        };
        let precision = if retrieved_total == 0 {
            None
        } else {
            Some(100.0 * relevant_total as f64 / retrieved_total as f64)
        };
        let f1 = match (precision, recall_conditional) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        rows.push(NaiveRow {
            k,
            total_added,
            suggestible,
            short_excluded,
            queries,
            retrieved_total,
            relevant_total,
            hits,
            recall_global,
            recall_conditional,
            precision,
            f1,
        });
    }
    rows
}

/// Field-by-field comparison of a production row against the oracle.
pub fn assert_rows_match(produced: &linecomp::EvalRow, oracle: &NaiveRow) {
    assert_eq!(produced.k, oracle.k, "k");
    let c = &produced.counts;
    assert_eq!(c.total_added, oracle.total_added, "total_added at k={}", oracle.k);
    assert_eq!(c.suggestible, oracle.suggestible, "suggestible at k={}", oracle.k);
    assert_eq!(
        c.short_excluded, oracle.short_excluded,
        "short_excluded at k={}",
        oracle.k
    );
    assert_eq!(c.queries, oracle.queries, "queries at k={}", oracle.k);
    assert_eq!(
        c.retrieved_total, oracle.retrieved_total,
        "retrieved_total at k={}",
        oracle.k
    );
    assert_eq!(
        c.relevant_total, oracle.relevant_total,
        "relevant_total at k={}",
        oracle.k
    );
    assert_eq!(c.hits, oracle.hits, "hits at k={}", oracle.k);
    assert_eq!(produced.recall_global_pct, oracle.recall_global, "recall_global");
    assert_eq!(
        produced.recall_conditional_pct, oracle.recall_conditional,
        "recall_conditional"
    );
    assert_eq!(produced.precision_pct, oracle.precision, "precision");
    assert_eq!(produced.f1_pct, oracle.f1, "f1");
}

// ---------------------------------------------------------------------------
// CLI helpers.

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_linecomp")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin_path())
        .args(args)
        .output()
        .expect("spawn linecomp binary")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

// ---------------------------------------------------------------------------
// Synthetic git history.

fn git_in(repo: &Path, args: &[&str]) {
    let output = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args([
            "-c",
            "user.name=fixture",
            "-c",
            "user.email=fixture@example.invalid",
            "-c",
            "commit.gpgsign=false",
        ])
        .args(args)
        .output()
        .expect("spawn git");
    assert!(
        output.status.success(),
        "git {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Statement templates: a mix of lengths (including one-char lines) and
/// heavily shared prefixes, so prefix length genuinely disambiguates.
const STATEMENTS: &[&str] = &[
    "}",
    "};",
    "    }",
    "    return rc;",
    "    return 0;",
    "    count += 1;",
    "    count -= 1;",
    "    idx++;",
    "    if (ptr == NULL) {",
    "    if (ptr != NULL) {",
    "    if (count > limit) {",
    "    for (i = 0; i < n; i++) {",
    "    while (head != NULL) {",
    "    int status = 0;",
    "    int status = -1;",
    "    static int cache_hits = 0;",
    "    static int cache_misses = 0;",
    "    buffer[pos] = '\\0';",
    "    fprintf(stderr, \"fatal\\n\");",
    "    fprintf(stderr, \"retry\\n\");",
    "    free(node);",
    "    free(list);",
    "#include <stdlib.h>",
    "#include <string.h>",
];

/// Builds a git repository whose history rewrites `file_count` C files over
/// `commits` commits. Each file starts with boilerplate plus `initial_lines`
/// generated statements. Each commit inserts a few lines — most copied from
/// lines already present somewhere in the tree, some brand new — and
/// occasionally deletes or edits one. Deterministic for a given seed.
pub fn build_synthetic_git_repo(
    repo: &Path,
    commits: usize,
    file_count: usize,
    initial_lines: usize,
    seed: u64,
) {
    fs::create_dir_all(repo).expect("create repo dir");
    git_in(repo, &["init", "-q", "-b", "main"]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fresh_counter = 0usize;
    let mut files: Vec<Vec<String>> = (0..file_count)
        .map(|i| {
            let mut lines = vec![
                "#include <stdio.h>".to_string(),
                format!("int unit_{i}(void) {{"),
                "    int rc = 0;".to_string(),
                "    return rc;".to_string(),
                "}".to_string(),
            ];
            for _ in 0..initial_lines {
                if rng.random_bool(0.6) {
                    lines.push(STATEMENTS[rng.random_range(0..STATEMENTS.len())].to_string());
                } else {
                    fresh_counter += 1;
                    lines.push(format!(
                        "    int seed_{fresh_counter} = {};",
                        fresh_counter % 13
                    ));
                }
            }
            lines
        })
        .collect();

    for commit in 0..commits {
        let edits = rng.random_range(3..9);
        for _ in 0..edits {
            let file_idx = rng.random_range(0..files.len());
            let roll: f64 = rng.random();
            if roll < 0.55 {
                // Re-add a line that already exists somewhere in the tree.
                let src_file = rng.random_range(0..files.len());
                let src_line = rng.random_range(0..files[src_file].len());
                let line = files[src_file][src_line].clone();
                let at = rng.random_range(1..=files[file_idx].len());
                files[file_idx].insert(at, line);
            } else if roll < 0.75 {
                // A recurring statement from the shared vocabulary.
                let line = STATEMENTS[rng.random_range(0..STATEMENTS.len())].to_string();
                let at = rng.random_range(1..=files[file_idx].len());
                files[file_idx].insert(at, line);
            } else if roll < 0.9 {
                // A line nobody has ever written before.
                fresh_counter += 1;
                let line = format!("    int fresh_{fresh_counter} = {};", fresh_counter % 7);
                let at = rng.random_range(1..=files[file_idx].len());
                files[file_idx].insert(at, line);
            } else if files[file_idx].len() > 3 {
                // Deletion or in-place edit.
                let at = rng.random_range(1..files[file_idx].len());
                if rng.random_bool(0.5) {
                    files[file_idx].remove(at);
                } else {
                    let touched = format!("{} /* edited */", files[file_idx][at]);
                    files[file_idx][at] = touched;
                }
            }
        }
        for (i, lines) in files.iter().enumerate() {
            let mut body = lines.join("\n");
            body.push('\n');
            fs::write(repo.join(format!("src_{i}.c")), body).expect("write source file");
        }
        git_in(repo, &["add", "-A"]);
        git_in(repo, &["commit", "-q", "-m", &format!("step {commit}")]);
    }
}
