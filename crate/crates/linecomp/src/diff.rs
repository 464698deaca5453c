//! Minimal line-level edit scripts between file versions, and extraction of
//! purely added lines.
//!
//! `line_diff` produces an edit script with longest-common-subsequence
//! semantics: the total number of inserted plus deleted lines is minimal.
//! Adjacent delete/insert runs are fused into `change` hunks, mirroring the
//! a/d/c taxonomy of classic line diffs. Deleted and changed lines never
//! count as additions; only pure insert hunks feed the added-line database.
//!
//! Tie-breaking between equal-cost scripts: every pure insert or delete hunk
//! is slid as far down (towards the end of the file) as its content allows,
//! without ever becoming adjacent to the next hunk. This makes hunk
//! placement canonical, so golden fixtures are stable across refactors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Snapshot;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Both sides of the trimmed diff must exceed this many lines before the
/// patience-style unique-line anchoring kicks in. Plain Myers is minimal but
/// worst-case quadratic in the edit distance; anchoring keeps
/// hundreds-of-revisions runs tractable on pathological inputs.
pub const FALLBACK_THRESHOLD: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HunkKind {
    Insert,
    Delete,
    Change,
}

/// One contiguous edit region. `old_start`/`new_start` are 0-based positions
/// in the old and new line sequences. For an insert hunk `old_start` is the
/// insertion point (lines appear before `old[old_start]`); for a delete hunk
/// `new_start` is the position the removed lines collapse onto.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub kind: HunkKind,
    pub old_start: usize,
    pub old_lines: Vec<String>,
    pub new_start: usize,
    pub new_lines: Vec<String>,
}

impl Hunk {
    /// Checks the kind/content invariants. Used by tests and debug builds.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            HunkKind::Insert => self.old_lines.is_empty() && !self.new_lines.is_empty(),
            HunkKind::Delete => self.new_lines.is_empty() && !self.old_lines.is_empty(),
            HunkKind::Change => !self.old_lines.is_empty() && !self.new_lines.is_empty(),
        }
    }
}

/// A line newly inserted in revision `revision` relative to the previous
/// one. `line_no` is 1-based in the newer file. Serializes to the JSONL
/// record `{"rev":..,"file":..,"line":..,"text":..}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AddedLine {
    #[serde(rename = "rev")]
    pub revision: usize,
    pub file: String,
    #[serde(rename = "line")]
    pub line_no: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("revision-pair-mismatch: snapshots {prev} and {next} are not consecutive")]
    RevisionPairMismatch { prev: usize, next: usize },
}

/// `line_diff` plus a flag reporting whether the unique-line anchoring
/// fallback ran for this file pair.
#[derive(Debug, Clone)]
pub struct DiffOutcome {
    pub hunks: Vec<Hunk>,
    pub used_fallback: bool,
}

/// Minimal line edit script from `old` to `new`.
pub fn line_diff<S: AsRef<str>>(old: &[S], new: &[S]) -> Vec<Hunk> {
    line_diff_full(old, new).hunks
}

/// Minimal line edit script, also reporting which diff path ran.
pub fn line_diff_full<S: AsRef<str>>(old: &[S], new: &[S]) -> DiffOutcome {
    let (old_ids, new_ids) = intern(old, new);
    let mut ops = Vec::with_capacity(old_ids.len().max(new_ids.len()));
    let mut used_fallback = false;
    diff_ids(&old_ids, &new_ids, &mut ops, &mut used_fallback);
    let mut hunks = group_hunks(&ops, old, new);
    slide_down(&mut hunks, &old_ids, &new_ids, old, new);
    debug_assert!(hunks.iter().all(Hunk::is_well_formed));
    DiffOutcome {
        hunks,
        used_fallback,
    }
}

/// The 1-based new-file positions and texts of all purely added lines.
/// Change and delete hunks contribute nothing.
pub fn added_from_hunks(hunks: &[Hunk]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for hunk in hunks {
        if hunk.kind == HunkKind::Insert {
            for (offset, line) in hunk.new_lines.iter().enumerate() {
                out.push((hunk.new_start + offset + 1, line.clone()));
            }
        }
    }
    out
}

/// Per-pair statistics reported alongside the added lines.
#[derive(Debug, Clone, Default)]
pub struct DeltaStats {
    pub files_compared: usize,
    pub files_new: usize,
    /// Files whose diff took the unique-line anchoring path.
    pub fallback_files: Vec<String>,
}

/// All lines added in `next` relative to `prev`, ordered by (file, line_no).
///
/// Files present in both snapshots are diffed; files only in `next` count as
/// fully added; files only in `prev` are ignored.
pub fn snapshot_delta(prev: &Snapshot, next: &Snapshot) -> Result<Vec<AddedLine>, DiffError> {
    snapshot_delta_full(prev, next).map(|(added, _)| added)
}

/// `snapshot_delta` plus per-pair diff statistics.
pub fn snapshot_delta_full(
    prev: &Snapshot,
    next: &Snapshot,
) -> Result<(Vec<AddedLine>, DeltaStats), DiffError> {
    if prev.revision.index + 1 != next.revision.index {
        return Err(DiffError::RevisionPairMismatch {
            prev: prev.revision.index,
            next: next.revision.index,
        });
    }
    let revision = next.revision.index;

    let entries: Vec<(&String, &Vec<String>)> = next.files.iter().collect();
    let per_file: Vec<(Vec<AddedLine>, bool, bool)> = map_files(&entries, |(path, new_lines)| {
        match prev.files.get(*path) {
            Some(old_lines) => {
                let outcome = line_diff_full(old_lines, new_lines);
                let added = added_from_hunks(&outcome.hunks)
                    .into_iter()
                    .map(|(line_no, text)| AddedLine {
                        revision,
                        file: (*path).clone(),
                        line_no,
                        text,
                    })
                    .collect();
                (added, outcome.used_fallback, false)
            }
            None => {
                let added = new_lines
                    .iter()
                    .enumerate()
                    .map(|(i, text)| AddedLine {
                        revision,
                        file: (*path).clone(),
                        line_no: i + 1,
                        text: text.clone(),
                    })
                    .collect();
                (added, false, true)
            }
        }
    });

    let mut stats = DeltaStats::default();
    let mut added = Vec::new();
    for ((path, _), (file_added, fallback, is_new)) in entries.iter().zip(per_file) {
        if is_new {
            stats.files_new += 1;
        } else {
            stats.files_compared += 1;
        }
        if fallback {
            stats.fallback_files.push((*path).clone());
        }
        added.extend(file_added);
    }
    // entries iterate in path order and line numbers ascend within a file,
    // so the result is already ordered by (file, line_no).
    Ok((added, stats))
}

#[cfg(feature = "parallel")]
fn map_files<T: Send, F>(entries: &[(&String, &Vec<String>)], f: F) -> Vec<T>
where
    F: Fn(&(&String, &Vec<String>)) -> T + Sync + Send,
{
    entries.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_files<T, F>(entries: &[(&String, &Vec<String>)], f: F) -> Vec<T>
where
    F: Fn(&(&String, &Vec<String>)) -> T,
{
    entries.iter().map(f).collect()
}

// ---------------------------------------------------------------------------
// Edit script search on interned line ids.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Keep,
    Del,
    Ins,
}

/// Maps equal lines to equal ids so the search compares u32s, not strings.
fn intern<S: AsRef<str>>(old: &[S], new: &[S]) -> (Vec<u32>, Vec<u32>) {
    let mut table: HashMap<&str, u32> = HashMap::with_capacity(old.len() + new.len());
    let mut old_ids = Vec::with_capacity(old.len());
    let mut new_ids = Vec::with_capacity(new.len());
    for line in old {
        let next = table.len() as u32;
        old_ids.push(*table.entry(line.as_ref()).or_insert(next));
    }
    for line in new {
        let next = table.len() as u32;
        new_ids.push(*table.entry(line.as_ref()).or_insert(next));
    }
    (old_ids, new_ids)
}

fn common_prefix_len(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn common_suffix_len(a: &[u32], b: &[u32]) -> usize {
    a.iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count()
}

fn push_ops(ops: &mut Vec<Op>, op: Op, count: usize) {
    ops.extend(std::iter::repeat_n(op, count));
}

/// Emits a minimal (LCS-semantics) op sequence for `old` -> `new`, taking the
/// anchoring fallback when both trimmed sides exceed [`FALLBACK_THRESHOLD`].
fn diff_ids(old: &[u32], new: &[u32], ops: &mut Vec<Op>, used_fallback: &mut bool) {
    let prefix = common_prefix_len(old, new);
    push_ops(ops, Op::Keep, prefix);
    let old = &old[prefix..];
    let new = &new[prefix..];

    let suffix = common_suffix_len(old, new);
    let old = &old[..old.len() - suffix];
    let new = &new[..new.len() - suffix];

    if old.is_empty() {
        push_ops(ops, Op::Ins, new.len());
    } else if new.is_empty() {
        push_ops(ops, Op::Del, old.len());
    } else if old.len() > FALLBACK_THRESHOLD && new.len() > FALLBACK_THRESHOLD {
        *used_fallback = true;
        let anchors = patience_anchors(old, new);
        if anchors.is_empty() {
            myers(old, new, ops);
        } else {
            let (mut oi, mut ni) = (0, 0);
            for (ai, aj) in anchors {
                diff_ids(&old[oi..ai], &new[ni..aj], ops, used_fallback);
                ops.push(Op::Keep);
                oi = ai + 1;
                ni = aj + 1;
            }
            diff_ids(&old[oi..], &new[ni..], ops, used_fallback);
        }
    } else {
        myers(old, new, ops);
    }

    push_ops(ops, Op::Keep, suffix);
}

/// Matching positions of lines that occur exactly once in both sides, thinned
/// to a longest increasing chain.
fn patience_anchors(old: &[u32], new: &[u32]) -> Vec<(usize, usize)> {
    let mut old_seen: HashMap<u32, Option<usize>> = HashMap::new();
    for (i, &id) in old.iter().enumerate() {
        old_seen
            .entry(id)
            .and_modify(|slot| *slot = None)
            .or_insert(Some(i));
    }
    let mut new_seen: HashMap<u32, Option<usize>> = HashMap::new();
    for (j, &id) in new.iter().enumerate() {
        new_seen
            .entry(id)
            .and_modify(|slot| *slot = None)
            .or_insert(Some(j));
    }

    // Pairs sorted by old position; LIS over the new positions.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, &id) in old.iter().enumerate() {
        if let (Some(Some(_)), Some(Some(j))) = (old_seen.get(&id), new_seen.get(&id)) {
            pairs.push((i, *j));
        }
    }

    longest_increasing_chain(&pairs)
}

fn longest_increasing_chain(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    // Patience stacks: tails[s] = index into `pairs` of the smallest known
    // chain tail of length s+1; prev[] links each element to its chain head.
    let mut tails: Vec<usize> = Vec::new();
    let mut prev: Vec<Option<usize>> = vec![None; pairs.len()];
    for (idx, &(_, j)) in pairs.iter().enumerate() {
        let pos = tails.partition_point(|&t| pairs[t].1 < j);
        if pos > 0 {
            prev[idx] = Some(tails[pos - 1]);
        }
        if pos == tails.len() {
            tails.push(idx);
        } else {
            tails[pos] = idx;
        }
    }
    let mut chain = Vec::with_capacity(tails.len());
    let mut cursor = tails.last().copied();
    while let Some(idx) = cursor {
        chain.push(pairs[idx]);
        cursor = prev[idx];
    }
    chain.reverse();
    chain
}

/// Furthest-reaching x values per diagonal, indexable by a possibly negative
/// diagonal number.
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        V {
            offset: max_d as isize,
            v: vec![0; 2 * max_d + 2],
        }
    }

    fn get(&self, k: isize) -> usize {
        self.v[(k + self.offset) as usize]
    }

    fn set(&mut self, k: isize, x: usize) {
        self.v[(k + self.offset) as usize] = x;
    }
}

struct Snake {
    x_start: usize,
    y_start: usize,
}

/// Classic divide-and-conquer Myers: find the middle snake of an optimal
/// path, split there, recurse. Linear space, O((N+M)·D) time.
fn myers(old: &[u32], new: &[u32], ops: &mut Vec<Op>) {
    let max_d = (old.len() + new.len()).div_ceil(2) + 1;
    let mut vf = V::new(max_d);
    let mut vb = V::new(max_d);
    myers_rec(old, new, &mut vf, &mut vb, ops);
}

fn myers_rec(old: &[u32], new: &[u32], vf: &mut V, vb: &mut V, ops: &mut Vec<Op>) {
    let prefix = common_prefix_len(old, new);
    push_ops(ops, Op::Keep, prefix);
    let old = &old[prefix..];
    let new = &new[prefix..];

    let suffix = common_suffix_len(old, new);
    let old = &old[..old.len() - suffix];
    let new = &new[..new.len() - suffix];

    if old.is_empty() {
        push_ops(ops, Op::Ins, new.len());
    } else if new.is_empty() {
        push_ops(ops, Op::Del, old.len());
    } else {
        let snake = find_middle_snake(old, new, vf, vb);
        let (old_a, old_b) = old.split_at(snake.x_start);
        let (new_a, new_b) = new.split_at(snake.y_start);
        myers_rec(old_a, new_a, vf, vb, ops);
        myers_rec(old_b, new_b, vf, vb, ops);
    }

    push_ops(ops, Op::Keep, suffix);
}

fn find_middle_snake(old: &[u32], new: &[u32], vf: &mut V, vb: &mut V) -> Snake {
    let n = old.len();
    let m = new.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;

    vf.set(1, 0);
    vb.set(1, 0);

    let d_max = ((n + m).div_ceil(2) + 1) as isize;
    for d in 0..d_max {
        // Forward search from (0, 0).
        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vf.get(k - 1) < vf.get(k + 1)) {
                vf.get(k + 1)
            } else {
                vf.get(k - 1) + 1
            };
            let mut y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            while x < n && y < m && old[x] == new[y] {
                x += 1;
                y += 1;
            }
            vf.set(k, x);
            if odd && (k - delta).abs() < d && vf.get(k) + vb.get(delta - k) >= n {
                return Snake {
                    x_start: x0,
                    y_start: y0,
                };
            }
            k -= 2;
        }

        // Backward search from (N, M), tracked in reversed coordinates.
        let mut k = d;
        while k >= -d {
            let mut x = if k == -d || (k != d && vb.get(k - 1) < vb.get(k + 1)) {
                vb.get(k + 1)
            } else {
                vb.get(k - 1) + 1
            };
            let mut y = (x as isize - k) as usize;
            while x < n && y < m && old[n - x - 1] == new[m - y - 1] {
                x += 1;
                y += 1;
            }
            vb.set(k, x);
            if !odd && (k - delta).abs() <= d && vb.get(k) + vf.get(delta - k) >= n {
                // Convert back to forward coordinates; the snake runs from
                // (n - x, m - y) to (n - x0, m - y0).
                return Snake {
                    x_start: n - x,
                    y_start: m - y,
                };
            }
            k -= 2;
        }
    }

    unreachable!("middle snake search exhausted the edit graph");
}

// ---------------------------------------------------------------------------
// Hunk assembly and canonical placement.

fn group_hunks<S: AsRef<str>>(ops: &[Op], old: &[S], new: &[S]) -> Vec<Hunk> {
    let mut hunks = Vec::new();
    let (mut oi, mut ni) = (0usize, 0usize);
    let mut i = 0;
    while i < ops.len() {
        if ops[i] == Op::Keep {
            oi += 1;
            ni += 1;
            i += 1;
            continue;
        }
        let (old_start, new_start) = (oi, ni);
        let mut old_lines = Vec::new();
        let mut new_lines = Vec::new();
        while i < ops.len() && ops[i] != Op::Keep {
            match ops[i] {
                Op::Del => {
                    old_lines.push(old[oi].as_ref().to_string());
                    oi += 1;
                }
                Op::Ins => {
                    new_lines.push(new[ni].as_ref().to_string());
                    ni += 1;
                }
                Op::Keep => unreachable!(),
            }
            i += 1;
        }
        let kind = match (old_lines.is_empty(), new_lines.is_empty()) {
            (true, false) => HunkKind::Insert,
            (false, true) => HunkKind::Delete,
            (false, false) => HunkKind::Change,
            (true, true) => unreachable!("empty edit run"),
        };
        hunks.push(Hunk {
            kind,
            old_start,
            old_lines,
            new_start,
            new_lines,
        });
    }
    hunks
}

/// Slides every pure insert/delete hunk as far towards the end of the file
/// as its content allows, keeping at least one context line before the next
/// hunk. Equal-cost scripts differing only in such placement thereby get one
/// canonical form.
fn slide_down<S: AsRef<str>>(
    hunks: &mut [Hunk],
    old_ids: &[u32],
    new_ids: &[u32],
    old: &[S],
    new: &[S],
) {
    for idx in (0..hunks.len()).rev() {
        let next_bound = if idx + 1 < hunks.len() {
            Some((hunks[idx + 1].old_start, hunks[idx + 1].new_start))
        } else {
            None
        };
        let hunk = &mut hunks[idx];
        match hunk.kind {
            HunkKind::Insert => {
                let len = hunk.new_lines.len();
                let limit = match next_bound {
                    // Keep one context line between this hunk and the next.
                    Some((_, next_new)) => next_new - 1,
                    None => new_ids.len(),
                };
                let mut start = hunk.new_start;
                while start + len < limit && new_ids[start] == new_ids[start + len] {
                    start += 1;
                }
                if start != hunk.new_start {
                    let moved = start - hunk.new_start;
                    hunk.old_start += moved;
                    hunk.new_start = start;
                    hunk.new_lines = new[start..start + len]
                        .iter()
                        .map(|l| l.as_ref().to_string())
                        .collect();
                }
            }
            HunkKind::Delete => {
                let len = hunk.old_lines.len();
                let limit = match next_bound {
                    Some((next_old, _)) => next_old - 1,
                    None => old_ids.len(),
                };
                let mut start = hunk.old_start;
                while start + len < limit && old_ids[start] == old_ids[start + len] {
                    start += 1;
                }
                if start != hunk.old_start {
                    let moved = start - hunk.old_start;
                    hunk.new_start += moved;
                    hunk.old_start = start;
                    hunk.old_lines = old[start..start + len]
                        .iter()
                        .map(|l| l.as_ref().to_string())
                        .collect();
                }
            }
            HunkKind::Change => {}
        }
    }
}
