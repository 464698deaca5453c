//! Empirical evaluation: replay every added line as a completion attempt
//! against the previous revision's index and pool recall/precision/F1 over a
//! sweep of prefix lengths.
//!
//! Two recall ratios are reported side by side because they answer different
//! questions: `recall_global` is the share of all added lines that existed
//! verbatim in the previous snapshot (could the system ever have suggested
//! this line?), while `recall_conditional` is the share of those suggestible
//! lines actually retrieved by their k-character prefix query. Precision is
//! micro-pooled within a run (summed relevant over summed retrieved);
//! cross-system combination is a macro average.

use std::ops::AddAssign;
use std::path::Path;

use thiserror::Error;

use crate::adddb::AddedLineDb;
use crate::corpus::{self, CorpusError, FileFilter, Snapshot};
use crate::diff::AddedLine;
use crate::engine::{
    build_index, normalize, query_prefix, target_prefix, NormalizationPolicy, PrefixIndex,
    RecencyMap, Suggestion,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(
        "revision-pair-mismatch: index covers revision {index_revision} but an added line \
         belongs to revision {added_revision} (expected {})",
        index_revision + 1
    )]
    RevisionPairMismatch {
        index_revision: usize,
        added_revision: usize,
    },
    #[error("invalid-k-range: need 1 <= k_min <= k_max, got {k_min}..{k_max}")]
    InvalidKRange { k_min: usize, k_max: usize },
    #[error("insufficient-history: evaluation needs at least 2 revisions, found {found}")]
    InsufficientRevisions { found: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Pooled query outcomes for one revision pair (or a sum of pairs).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    /// Added lines considered.
    pub total_added: u64,
    /// Added lines whose normalized text exists verbatim in the previous
    /// snapshot's index.
    pub suggestible: u64,
    /// Suggestible lines too short to query (normalized length < k+1).
    pub short_excluded: u64,
    /// Queries issued.
    pub queries: u64,
    /// Suggestions returned over all queries.
    pub retrieved_total: u64,
    /// Retrieved suggestions exactly matching their candidate.
    pub relevant_total: u64,
    /// Queries that retrieved at least one relevant suggestion.
    pub hits: u64,
}

impl PairCounts {
    /// Checks the structural relations every pooled count must satisfy.
    pub fn invariants_hold(&self) -> bool {
        self.hits <= self.queries
            && self.queries <= self.suggestible
            && self.suggestible <= self.total_added
            && self.relevant_total <= self.retrieved_total
            && self.queries == self.suggestible - self.short_excluded
    }
}

impl AddAssign for PairCounts {
    fn add_assign(&mut self, rhs: PairCounts) {
        self.total_added += rhs.total_added;
        self.suggestible += rhs.suggestible;
        self.short_excluded += rhs.short_excluded;
        self.queries += rhs.queries;
        self.retrieved_total += rhs.retrieved_total;
        self.relevant_total += rhs.relevant_total;
        self.hits += rhs.hits;
    }
}

/// Which added lines participate in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cohort {
    /// Every added line of every pair, re-judged at each k.
    All,
    /// Only suggestible lines of normalized length >= k_max+1, so the same
    /// query set is issued at every k (clean monotonicity checks).
    Fixed,
}

impl Cohort {
    pub fn describe(&self) -> &'static str {
        match self {
            Cohort::All => "all",
            Cohort::Fixed => "fixed",
        }
    }
}

/// Scores one query's result list against its candidate:
/// (retrieved, relevant, hit). Under index dedup, relevant is 0 or 1.
pub fn judge_query(suggestions: &[Suggestion], candidate_norm: &str) -> (u64, u64, bool) {
    let retrieved = suggestions.len() as u64;
    let relevant = suggestions
        .iter()
        .filter(|s| s.text == candidate_norm)
        .count() as u64;
    (retrieved, relevant, relevant >= 1)
}

/// Replays `added` (the lines added by revision i+1) against the index of
/// snapshot i with prefix length `k`.
pub fn eval_revision_pair(
    index_prev: &PrefixIndex,
    added: &[AddedLine],
    k: usize,
    policy: &NormalizationPolicy,
) -> Result<PairCounts, EvalError> {
    let mut counts = PairCounts::default();
    for record in added {
        if record.revision != index_prev.revision + 1 {
            return Err(EvalError::RevisionPairMismatch {
                index_revision: index_prev.revision,
                added_revision: record.revision,
            });
        }
        let Some(norm) = normalize(&record.text, policy) else {
            continue; // blank after trimming: not a completable line
        };
        counts.total_added += 1;
        if !index_prev.contains(norm) {
            continue;
        }
        counts.suggestible += 1;
        let Some(prefix) = target_prefix(norm, k) else {
            counts.short_excluded += 1;
            continue;
        };
        counts.queries += 1;
        let suggestions =
            query_prefix(index_prev, prefix, None).expect("target_prefix is never empty");
        let (retrieved, relevant, hit) = judge_query(&suggestions, norm);
        counts.retrieved_total += retrieved;
        counts.relevant_total += relevant;
        if hit {
            counts.hits += 1;
        }
    }
    debug_assert!(counts.invariants_hold());
    Ok(counts)
}

/// Share of added lines that existed verbatim in the previous snapshot.
/// Undefined when nothing was added.
pub fn recall_global_pct(counts: &PairCounts) -> Option<f64> {
    if counts.total_added == 0 {
        None
    } else {
        Some(100.0 * counts.suggestible as f64 / counts.total_added as f64)
    }
}

/// Share of suggestible lines whose prefix query retrieved them;
/// short-excluded lines count as misses. Undefined when nothing was
/// suggestible.
pub fn recall_conditional_pct(counts: &PairCounts) -> Option<f64> {
    if counts.suggestible == 0 {
        None
    } else {
        Some(100.0 * counts.hits as f64 / counts.suggestible as f64)
    }
}

/// Micro-pooled precision: summed relevant over summed retrieved. Undefined
/// (never zero) when no suggestions were retrieved at all.
pub fn precision_pct(counts: &PairCounts) -> Option<f64> {
    if counts.retrieved_total == 0 {
        None
    } else {
        Some(100.0 * counts.relevant_total as f64 / counts.retrieved_total as f64)
    }
}

/// Harmonic mean of two percentages; undefined when both are zero.
pub fn f1_pct(precision: f64, recall: f64) -> Option<f64> {
    if precision + recall == 0.0 {
        None
    } else {
        Some(2.0 * precision * recall / (precision + recall))
    }
}

/// One sweep row: pooled counts for a prefix length plus derived metrics.
/// `None` percentages are undefined (reported blank, never as 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub k: usize,
    pub counts: PairCounts,
    pub recall_global_pct: Option<f64>,
    pub recall_conditional_pct: Option<f64>,
    pub precision_pct: Option<f64>,
    pub f1_pct: Option<f64>,
}

impl EvalRow {
    pub fn from_counts(k: usize, counts: PairCounts) -> Self {
        let recall_global = recall_global_pct(&counts);
        let recall_conditional = recall_conditional_pct(&counts);
        let precision = precision_pct(&counts);
        let f1 = match (precision, recall_conditional) {
            (Some(p), Some(r)) => f1_pct(p, r),
            _ => None,
        };
        EvalRow {
            k,
            counts,
            recall_global_pct: recall_global,
            recall_conditional_pct: recall_conditional,
            precision_pct: precision,
            f1_pct: f1,
        }
    }
}

/// Sweep rows plus non-fatal notes (skipped files, empty database).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<EvalRow>,
    pub warnings: Vec<String>,
}

/// Runs the k-sweep over snapshots produced by `load` (called once per
/// revision index, in ascending order). The index for each pair is built
/// once and reused across every k; recency folds forward incrementally so
/// only one snapshot is held in memory at a time.
pub fn sweep_with<F>(
    mut load: F,
    revision_count: usize,
    db: &AddedLineDb,
    k_min: usize,
    k_max: usize,
    policy: &NormalizationPolicy,
    cohort: Cohort,
) -> Result<SweepOutcome, EvalError>
where
    F: FnMut(usize) -> Result<Snapshot, EvalError>,
{
    if k_min < 1 || k_min > k_max {
        return Err(EvalError::InvalidKRange { k_min, k_max });
    }
    if revision_count < 2 {
        return Err(EvalError::InsufficientRevisions {
            found: revision_count,
        });
    }
    let mut warnings = Vec::new();
    if db.is_empty() {
        warnings.push("empty-database: no added lines to evaluate".to_string());
        return Ok(SweepOutcome {
            rows: Vec::new(),
            warnings,
        });
    }

    let ks: Vec<usize> = (k_min..=k_max).collect();
    let mut pooled = vec![PairCounts::default(); ks.len()];

    let base = load(0)?;
    let mut recency = RecencyMap::seed_base(&base, policy);
    let mut snapshot = base;
    for prev_rev in 0..revision_count - 1 {
        if snapshot.revision.index != prev_rev {
            snapshot = load(prev_rev)?;
        }
        // Fold additions up to and including prev_rev into the recency map.
        if prev_rev > 0 {
            for record in db.for_revision(prev_rev) {
                if let Some(norm) = normalize(&record.text, policy) {
                    recency.observe_added(norm, record.revision);
                }
            }
        }
        let index = build_index(&snapshot, &recency, policy);
        let added = db.for_revision(prev_rev + 1);
        let cohort_lines: Vec<AddedLine> = match cohort {
            Cohort::All => added.to_vec(),
            Cohort::Fixed => added
                .iter()
                .filter(|record| {
                    normalize(&record.text, policy).is_some_and(|norm| {
                        index.contains(norm) && norm.chars().count() > k_max
                    })
                })
                .cloned()
                .collect(),
        };
        for (slot, &k) in pooled.iter_mut().zip(&ks) {
            *slot += eval_revision_pair(&index, &cohort_lines, k, policy)?;
        }
    }

    let rows = ks
        .iter()
        .zip(pooled)
        .map(|(&k, counts)| EvalRow::from_counts(k, counts))
        .collect();
    Ok(SweepOutcome { rows, warnings })
}

/// Disk-backed sweep over a corpus directory; snapshot load warnings are
/// carried through into the outcome.
pub fn sweep(
    corpus_root: &Path,
    filter: &FileFilter,
    db: &AddedLineDb,
    k_min: usize,
    k_max: usize,
    policy: &NormalizationPolicy,
    cohort: Cohort,
) -> Result<SweepOutcome, EvalError> {
    let revisions = corpus::load_manifest(corpus_root)?;
    let revision_count = revisions.len();
    let mut load_warnings: Vec<String> = Vec::new();
    let outcome = {
        let warnings_ref = &mut load_warnings;
        sweep_with(
            move |rev| {
                let loaded = corpus::load_snapshot(corpus_root, &revisions[rev], filter)?;
                for warning in &loaded.warnings {
                    warnings_ref.push(warning.to_string());
                }
                Ok(loaded.snapshot)
            },
            revision_count,
            db,
            k_min,
            k_max,
            policy,
            cohort,
        )?
    };
    let mut warnings = load_warnings;
    warnings.extend(outcome.warnings);
    Ok(SweepOutcome {
        rows: outcome.rows,
        warnings,
    })
}

/// Averages rows for the same k across systems: percentages by arithmetic
/// mean over the rows where they are defined, counts summed for reference.
///
/// Panics when `rows` is empty or mixes prefix lengths (caller contract).
pub fn macro_average(rows: &[EvalRow]) -> EvalRow {
    assert!(!rows.is_empty(), "macro_average needs at least one row");
    let k = rows[0].k;
    assert!(
        rows.iter().all(|r| r.k == k),
        "macro_average rows must share the same k"
    );
    let mut counts = PairCounts::default();
    for row in rows {
        counts += row.counts;
    }
    let mean = |values: Vec<f64>| -> Option<f64> {
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    EvalRow {
        k,
        counts,
        recall_global_pct: mean(rows.iter().filter_map(|r| r.recall_global_pct).collect()),
        recall_conditional_pct: mean(
            rows.iter()
                .filter_map(|r| r.recall_conditional_pct)
                .collect(),
        ),
        precision_pct: mean(rows.iter().filter_map(|r| r.precision_pct).collect()),
        f1_pct: mean(rows.iter().filter_map(|r| r.f1_pct).collect()),
    }
}
