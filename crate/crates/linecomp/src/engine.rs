//! The completion engine: line normalization, the recency-annotated prefix
//! index over one snapshot's codebase, and ranked prefix queries.
//!
//! The index is a sorted, deduplicated array of normalized lines; a prefix
//! query is a binary-search range over it (the lexicographic neighborhood of
//! the prefix), re-ranked by recency. Matching is case-sensitive and
//! code-point exact. Recency is the last revision at which the line's text
//! was observed as an addition anywhere in history, with every line of the
//! first snapshot seeded at 0; the candidate set itself is always a single
//! snapshot's codebase, history only influences ranking.

use std::collections::HashMap;

use thiserror::Error;

use crate::adddb::AddedLineDb;
use crate::corpus::Snapshot;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid-prefix: prefix must be non-empty")]
    InvalidPrefix,
}

/// Whitespace handling applied before indexing and matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationPolicy {
    pub trim_leading: bool,
    pub trim_trailing: bool,
    /// Minimum normalized length (in code points) to be indexable.
    pub min_len: usize,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            trim_leading: true,
            trim_trailing: true,
            min_len: 1,
        }
    }
}

impl NormalizationPolicy {
    /// Summary used in report headers, e.g. `trim=both,min_len=1`.
    pub fn describe(&self) -> String {
        let trim = match (self.trim_leading, self.trim_trailing) {
            (true, true) => "both",
            (true, false) => "leading",
            (false, true) => "trailing",
            (false, false) => "none",
        };
        format!("trim={trim},min_len={}", self.min_len)
    }
}

/// Trims per policy; `None` when the result is shorter than `min_len`.
pub fn normalize<'a>(raw: &'a str, policy: &NormalizationPolicy) -> Option<&'a str> {
    let mut text = raw;
    if policy.trim_leading {
        text = text.trim_start();
    }
    if policy.trim_trailing {
        text = text.trim_end();
    }
    if text.chars().count() < policy.min_len {
        None
    } else {
        Some(text)
    }
}

/// Last revision at which each normalized line text was added. Lines present
/// since the first snapshot map to 0; lines never observed are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecencyMap {
    map: HashMap<String, usize>,
}

impl RecencyMap {
    /// Seeds every normalized line of the base (revision 0) snapshot at 0.
    pub fn seed_base(base: &Snapshot, policy: &NormalizationPolicy) -> Self {
        let mut map = HashMap::new();
        for lines in base.files.values() {
            for line in lines {
                if let Some(norm) = normalize(line, policy) {
                    map.entry(norm.to_string()).or_insert(0);
                }
            }
        }
        RecencyMap { map }
    }

    /// Records that `norm` was added at `revision`, keeping the maximum.
    pub fn observe_added(&mut self, norm: &str, revision: usize) {
        let slot = self.map.entry(norm.to_string()).or_insert(revision);
        if *slot < revision {
            *slot = revision;
        }
    }

    pub fn lookup(&self, norm: &str) -> Option<usize> {
        self.map.get(norm).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Builds the recency map for queries against snapshot `up_to_rev`:
/// the base snapshot's lines at 0, overridden by the latest addition
/// revision `<= up_to_rev` per line text.
pub fn build_recency(
    db: &AddedLineDb,
    up_to_rev: usize,
    base: &Snapshot,
    policy: &NormalizationPolicy,
) -> RecencyMap {
    let mut recency = RecencyMap::seed_base(base, policy);
    for record in db.records() {
        if record.revision > up_to_rev {
            continue;
        }
        if let Some(norm) = normalize(&record.text, policy) {
            recency.observe_added(norm, record.revision);
        }
    }
    recency
}

/// One indexed line: its normalized text, recency, and the location of its
/// first occurrence (smallest file path, then smallest line number).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub norm_text: String,
    pub recency: usize,
    pub file: String,
    pub line_no: usize,
}

/// Sorted, deduplicated normalized lines of one snapshot, queryable by
/// prefix range. Immutable after build; concurrent queries are safe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixIndex {
    pub revision: usize,
    entries: Vec<IndexEntry>,
}

impl PrefixIndex {
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact-match lookup on normalized text.
    pub fn contains(&self, norm: &str) -> bool {
        self.entries
            .binary_search_by(|e| e.norm_text.as_str().cmp(norm))
            .is_ok()
    }
}

/// A ranked completion candidate.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Suggestion {
    pub text: String,
    pub recency: usize,
    pub file: String,
    pub line_no: usize,
    /// 1-based position in the result list.
    pub rank: usize,
}

/// Indexes the distinct normalized lines of `snapshot`, annotating each with
/// its recency (0 when the map has no entry for it).
pub fn build_index(
    snapshot: &Snapshot,
    recency: &RecencyMap,
    policy: &NormalizationPolicy,
) -> PrefixIndex {
    // BTreeMap iteration goes in ascending path order and line numbers
    // ascend within a file, so the first sighting of a text is its
    // canonical location.
    let mut first_seen: HashMap<&str, (&str, usize)> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (path, lines) in &snapshot.files {
        for (idx, line) in lines.iter().enumerate() {
            let Some(norm) = normalize(line, policy) else {
                continue;
            };
            if !first_seen.contains_key(norm) {
                first_seen.insert(norm, (path.as_str(), idx + 1));
                order.push(norm);
            }
        }
    }
    order.sort_unstable();
    let entries = order
        .into_iter()
        .map(|norm| {
            let (file, line_no) = first_seen[norm];
            IndexEntry {
                norm_text: norm.to_string(),
                recency: recency.lookup(norm).unwrap_or(0),
                file: file.to_string(),
                line_no,
            }
        })
        .collect();
    PrefixIndex {
        revision: snapshot.revision.index,
        entries,
    }
}

/// All entries whose text starts with `prefix`, ordered by recency
/// descending, then file path, then line number; ranks are 1-based and the
/// list is truncated to `limit` when given.
pub fn query_prefix(
    index: &PrefixIndex,
    prefix: &str,
    limit: Option<usize>,
) -> Result<Vec<Suggestion>, EngineError> {
    if prefix.is_empty() {
        return Err(EngineError::InvalidPrefix);
    }
    // The entries are sorted byte-wise (equal to code-point order for valid
    // UTF-8), so the matches form one contiguous range: everything below
    // `prefix` first, then everything starting with it.
    let entries = &index.entries;
    let start = entries.partition_point(|e| e.norm_text.as_str() < prefix);
    let end = entries.partition_point(|e| {
        e.norm_text.as_str() < prefix || e.norm_text.starts_with(prefix)
    });

    let mut matched: Vec<&IndexEntry> = entries[start..end].iter().collect();
    matched.sort_by(|a, b| {
        b.recency
            .cmp(&a.recency)
            .then_with(|| a.file.cmp(&b.file))
            .then_with(|| a.line_no.cmp(&b.line_no))
    });
    if let Some(limit) = limit {
        matched.truncate(limit);
    }
    Ok(matched
        .into_iter()
        .enumerate()
        .map(|(i, e)| Suggestion {
            text: e.norm_text.clone(),
            recency: e.recency,
            file: e.file.clone(),
            line_no: e.line_no,
            rank: i + 1,
        })
        .collect())
}

/// The first `k` code points of a candidate, provided a non-empty remainder
/// exists to complete (length at least `k + 1`); `None` otherwise.
pub fn target_prefix(candidate_norm: &str, k: usize) -> Option<&str> {
    debug_assert!(k >= 1);
    let mut chars = candidate_norm.char_indices();
    let Some((_, _)) = chars.nth(k.saturating_sub(1)) else {
        return None; // shorter than k
    };
    match chars.next() {
        // The k-th char exists and at least one more follows it.
        Some((end, _)) if candidate_norm.len() > end => Some(&candidate_norm[..end]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RevisionDescriptor;
    use crate::diff::AddedLine;
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::collections::BTreeSet;

    fn policy() -> NormalizationPolicy {
        NormalizationPolicy::default()
    }

    fn snap(index: usize, files: &[(&str, &[&str])]) -> Snapshot {
        Snapshot {
            revision: RevisionDescriptor {
                index,
                label: format!("r{index}"),
            },
            files: files
                .iter()
                .map(|(p, ls)| (p.to_string(), ls.iter().map(|s| s.to_string()).collect()))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn normalize_trims_per_policy() {
        assert_eq!(normalize("  int x;  ", &policy()), Some("int x;"));
        assert_eq!(normalize("   ", &policy()), None);
        assert_eq!(normalize("}", &policy()), Some("}"));
        let keep_leading = NormalizationPolicy {
            trim_leading: false,
            ..policy()
        };
        assert_eq!(normalize("  x", &keep_leading), Some("  x"));
        let min3 = NormalizationPolicy {
            min_len: 3,
            ..policy()
        };
        assert_eq!(normalize("ab", &min3), None);
        assert_eq!(normalize("abc", &min3), Some("abc"));
    }

    #[test]
    fn recency_base_maps_to_zero() {
        let base = snap(0, &[("a.c", &["int x;"])]);
        let recency = build_recency(&AddedLineDb::default(), 0, &base, &policy());
        assert_eq!(recency.lookup("int x;"), Some(0));
        assert_eq!(recency.lookup("absent"), None);
    }

    #[test]
    fn recency_takes_maximum_revision() {
        let base = snap(0, &[("a.c", &["int x;"])]);
        let db = AddedLineDb::new(vec![
            AddedLine { revision: 2, file: "a.c".into(), line_no: 1, text: "int x;".into() },
            AddedLine { revision: 5, file: "b.c".into(), line_no: 3, text: "  int x;".into() },
        ]);
        let recency = build_recency(&db, 6, &base, &policy());
        assert_eq!(recency.lookup("int x;"), Some(5));
        // Additions beyond the horizon are ignored.
        let recency = build_recency(&db, 4, &base, &policy());
        assert_eq!(recency.lookup("int x;"), Some(2));
    }

    #[test]
    fn recency_skips_blank_added_lines() {
        let base = snap(0, &[]);
        let db = AddedLineDb::new(vec![AddedLine {
            revision: 1,
            file: "a.c".into(),
            line_no: 1,
            text: "   ".into(),
        }]);
        let recency = build_recency(&db, 1, &base, &policy());
        assert!(recency.is_empty());
    }

    #[test]
    fn build_index_dedups_normalized_lines() {
        let snapshot = snap(1, &[("a.c", &[" x;", "x;"])]);
        let index = build_index(&snapshot, &RecencyMap::default(), &policy());
        assert_eq!(index.len(), 1);
        let entry = &index.entries()[0];
        assert_eq!(entry.norm_text, "x;");
        assert_eq!((entry.file.as_str(), entry.line_no), ("a.c", 1));
    }

    #[test]
    fn build_index_empty_snapshot() {
        let index = build_index(&snap(0, &[]), &RecencyMap::default(), &policy());
        assert!(index.is_empty());
    }

    #[test]
    fn build_index_sorts_entries() {
        let snapshot = snap(1, &[("a.c", &["b;", "a;", "c;"])]);
        let index = build_index(&snapshot, &RecencyMap::default(), &policy());
        let texts: Vec<&str> = index.entries().iter().map(|e| e.norm_text.as_str()).collect();
        assert_eq!(texts, vec!["a;", "b;", "c;"]);
    }

    #[test]
    fn location_tie_breaks_by_path_then_line() {
        let snapshot = snap(1, &[("b.c", &["dup;"]), ("a.c", &["x;", "dup;"])]);
        let index = build_index(&snapshot, &RecencyMap::default(), &policy());
        let entry = index
            .entries()
            .iter()
            .find(|e| e.norm_text == "dup;")
            .unwrap();
        assert_eq!((entry.file.as_str(), entry.line_no), ("a.c", 2));
    }

    fn demo_index() -> PrefixIndex {
        let snapshot = snap(
            8,
            &[("m.c", &["int count = 0;", "int counter;", "float x;"])],
        );
        let mut recency = RecencyMap::default();
        recency.observe_added("int count = 0;", 4);
        recency.observe_added("int counter;", 7);
        recency.observe_added("float x;", 1);
        build_index(&snapshot, &recency, &policy())
    }

    #[test]
    fn query_ranks_by_recency_then_location() {
        let index = demo_index();
        let suggestions = query_prefix(&index, "int c", None).unwrap();
        let ranked: Vec<(&str, usize)> = suggestions
            .iter()
            .map(|s| (s.text.as_str(), s.rank))
            .collect();
        assert_eq!(
            ranked,
            vec![("int counter;", 1), ("int count = 0;", 2)]
        );
        assert_eq!(suggestions[0].recency, 7);
        assert_eq!(suggestions[1].recency, 4);
    }

    #[test]
    fn query_no_match_is_empty() {
        let index = demo_index();
        assert!(query_prefix(&index, "zzz", None).unwrap().is_empty());
    }

    #[test]
    fn query_whole_entry_is_its_own_prefix() {
        let index = demo_index();
        let suggestions = query_prefix(&index, "float x;", None).unwrap();
        assert_eq!(suggestions.len(), 1);
        assert_eq!(suggestions[0].text, "float x;");
    }

    #[test]
    fn query_empty_prefix_rejected() {
        let index = demo_index();
        assert!(matches!(
            query_prefix(&index, "", None),
            Err(EngineError::InvalidPrefix)
        ));
    }

    #[test]
    fn query_limit_truncates_after_ranking() {
        let index = demo_index();
        let suggestions = query_prefix(&index, "int c", Some(1)).unwrap();
        assert_eq!(suggestions.len(), 1);
        assert_eq!(suggestions[0].text, "int counter;");
    }

    #[test]
    fn target_prefix_needs_a_remainder() {
        assert_eq!(target_prefix("int count = 0;", 5), Some("int c"));
        assert_eq!(target_prefix("int x;", 6), None);
        assert_eq!(target_prefix("int x;", 10), None);
        assert_eq!(target_prefix("ab", 1), Some("a"));
        assert_eq!(target_prefix("a", 1), None);
    }

    #[test]
    fn target_prefix_counts_code_points() {
        // 3 code points: prefix of 2 exists, prefix of 3 leaves no remainder.
        assert_eq!(target_prefix("é¿z", 2), Some("é¿"));
        assert_eq!(target_prefix("é¿z", 3), None);
    }

    /// Brute-force oracle: linear scan of the entries.
    fn brute_force_match(index: &PrefixIndex, prefix: &str) -> BTreeSet<String> {
        index
            .entries()
            .iter()
            .filter(|e| e.norm_text.starts_with(prefix))
            .map(|e| e.norm_text.clone())
            .collect()
    }

    fn corpus_line() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-d]{1,6}",
            "int [a-c]{1,4};",
            "x{1,3}[=+][0-9];",
            // Multi-byte code points exercise the byte-order = code-point
            // order property of the range search.
            "[α-ε]{1,4}",
        ]
    }

    proptest! {
        #[test]
        fn range_search_equals_brute_force(
            lines in prop::collection::vec(corpus_line(), 1..60),
            prefix in prop_oneof!["[a-d]{1,3}", "int ", "[α-β]{1,2}"],
        ) {
            let line_refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let snapshot = snap(1, &[("f.c", &line_refs)]);
            let index = build_index(&snapshot, &RecencyMap::default(), &policy());
            let got: BTreeSet<String> = query_prefix(&index, &prefix, None)
                .unwrap()
                .into_iter()
                .map(|s| s.text)
                .collect();
            prop_assert_eq!(got, brute_force_match(&index, &prefix));
        }

        #[test]
        fn prefix_monotonicity(
            lines in prop::collection::vec(corpus_line(), 1..60),
            prefix in "[a-d]{1,2}",
            extension in "[a-d]{1,2}",
        ) {
            let line_refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let snapshot = snap(1, &[("f.c", &line_refs)]);
            let index = build_index(&snapshot, &RecencyMap::default(), &policy());
            let longer = format!("{prefix}{extension}");
            let shorter_set = brute_force_match(&index, &prefix);
            let longer_set: BTreeSet<String> = query_prefix(&index, &longer, None)
                .unwrap()
                .into_iter()
                .map(|s| s.text)
                .collect();
            prop_assert!(longer_set.is_subset(&shorter_set));
        }

        #[test]
        fn recency_dominates_rank(
            lines in prop::collection::vec(corpus_line(), 1..40),
            recencies in prop::collection::vec(0usize..10, 1..40),
        ) {
            let line_refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let snapshot = snap(1, &[("f.c", &line_refs)]);
            let mut recency = RecencyMap::default();
            for (line, rev) in lines.iter().zip(&recencies) {
                if let Some(norm) = normalize(line, &policy()) {
                    recency.observe_added(norm, *rev);
                }
            }
            let index = build_index(&snapshot, &recency, &policy());
            let suggestions = query_prefix(&index, "i", None).unwrap();
            for pair in suggestions.windows(2) {
                prop_assert!(pair[0].recency >= pair[1].recency);
            }
            for (i, s) in suggestions.iter().enumerate() {
                prop_assert_eq!(s.rank, i + 1);
            }
        }

        #[test]
        fn self_retrieval(
            lines in prop::collection::vec(corpus_line(), 1..40),
            pick in any::<prop::sample::Index>(),
            k in 1usize..6,
        ) {
            let line_refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let snapshot = snap(1, &[("f.c", &line_refs)]);
            let index = build_index(&snapshot, &RecencyMap::default(), &policy());
            let candidate = lines[pick.index(lines.len())].as_str();
            if let Some(norm) = normalize(candidate, &policy()) {
                if let Some(prefix) = target_prefix(norm, k) {
                    let suggestions = query_prefix(&index, prefix, None).unwrap();
                    prop_assert!(suggestions.iter().any(|s| s.text == norm));
                }
            }
        }
    }
}
