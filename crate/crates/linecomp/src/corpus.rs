//! The on-disk corpus of ordered revision snapshots.
//!
//! A corpus is a directory holding `manifest.tsv` (lines `index<TAB>label`,
//! LF-terminated, UTF-8) and one full file tree per revision under
//! `r0000/ .. rNNNN/`. Revision indices are 0-based and contiguous; labels
//! are free text (commit hashes, revision numbers). Two adapters populate
//! the layout: a git history exporter and an importer for plain directories
//! of snapshots.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus-not-found: no manifest.tsv under {0}")]
    CorpusNotFound(PathBuf),
    #[error("malformed-manifest at line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("snapshot-not-found: {0}")]
    SnapshotNotFound(PathBuf),
    #[error("ingest-failed: {0}")]
    IngestFailed(String),
    #[error("insufficient-history: {0}")]
    InsufficientHistory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of one revision within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RevisionDescriptor {
    /// 0-based, contiguous within a manifest.
    pub index: usize,
    /// Commit hash, revision number, or any other non-empty unique label.
    pub label: String,
}

/// One revision's full source tree as ordered lines per file. Paths are
/// relative with forward slashes. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub revision: RevisionDescriptor,
    pub files: BTreeMap<String, Vec<String>>,
}

impl Snapshot {
    pub fn line_count(&self) -> usize {
        self.files.values().map(Vec::len).sum()
    }
}

/// Which files enter the pipeline. Extension matching is case-insensitive;
/// `extensions` must be non-empty and `max_file_bytes` positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileFilter {
    pub extensions: BTreeSet<String>,
    pub max_file_bytes: u64,
}

impl Default for FileFilter {
    fn default() -> Self {
        FileFilter {
            extensions: [".c", ".h", ".java"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_file_bytes: 2 * 1024 * 1024,
        }
    }
}

impl FileFilter {
    /// Builds a filter from extension names, normalizing to a lowercase
    /// `.ext` form ("C" and ".c" both mean ".c").
    pub fn new<I, S>(extensions: I, max_file_bytes: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let extensions = extensions
            .into_iter()
            .map(|e| {
                let e = e.as_ref().trim().to_lowercase();
                if e.starts_with('.') {
                    e
                } else {
                    format!(".{e}")
                }
            })
            .filter(|e| e.len() > 1)
            .collect();
        FileFilter {
            extensions,
            max_file_bytes,
        }
    }

    pub fn matches_path(&self, rel_path: &str) -> bool {
        let lower = rel_path.to_lowercase();
        self.extensions.iter().any(|ext| lower.ends_with(ext))
    }

    pub fn matches_size(&self, bytes: u64) -> bool {
        bytes <= self.max_file_bytes
    }

    /// Summary used in report headers, e.g. `.c,.h,.java<=2097152B`.
    pub fn describe(&self) -> String {
        let exts: Vec<&str> = self.extensions.iter().map(String::as_str).collect();
        format!("{}<={}B", exts.join(","), self.max_file_bytes)
    }
}

/// Why a file inside a snapshot directory was left out of the `Snapshot`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    NonUtf8,
    TooLarge(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadWarning {
    pub file: String,
    pub reason: SkipReason,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            SkipReason::NonUtf8 => write!(f, "skipped {} (not valid UTF-8)", self.file),
            SkipReason::TooLarge(size) => {
                write!(f, "skipped {} ({size} bytes exceeds the size limit)", self.file)
            }
        }
    }
}

/// A loaded snapshot plus warnings for files that were skipped.
#[derive(Debug, Clone)]
pub struct SnapshotLoad {
    pub snapshot: Snapshot,
    pub warnings: Vec<LoadWarning>,
}

/// Directory name for revision `index` within a corpus. Zero-padding keeps
/// lexicographic order equal to numeric order for up to 10,000 revisions.
pub fn snapshot_dir_name(index: usize) -> String {
    format!("r{index:04}")
}

/// Reads and validates `corpus_root/manifest.tsv`.
pub fn load_manifest(corpus_root: &Path) -> Result<Vec<RevisionDescriptor>, CorpusError> {
    let path = corpus_root.join("manifest.tsv");
    if !path.is_file() {
        return Err(CorpusError::CorpusNotFound(corpus_root.to_path_buf()));
    }
    let text = fs::read_to_string(&path)?;
    let mut descriptors: Vec<RevisionDescriptor> = Vec::new();
    let mut labels: HashSet<String> = HashSet::new();
    for (line_idx, raw) in text.lines().enumerate() {
        let line = line_idx + 1;
        if raw.is_empty() {
            continue;
        }
        let (index_text, label) = raw.split_once('\t').ok_or_else(|| {
            CorpusError::MalformedManifest {
                line,
                reason: "missing tab separator".into(),
            }
        })?;
        let index: usize =
            index_text
                .parse()
                .map_err(|_| CorpusError::MalformedManifest {
                    line,
                    reason: format!("invalid index {index_text:?}"),
                })?;
        if label.is_empty() {
            return Err(CorpusError::MalformedManifest {
                line,
                reason: "empty label".into(),
            });
        }
        if index != descriptors.len() {
            return Err(CorpusError::MalformedManifest {
                line,
                reason: format!("expected index {}, found {index}", descriptors.len()),
            });
        }
        if !labels.insert(label.to_string()) {
            return Err(CorpusError::MalformedManifest {
                line,
                reason: format!("duplicate label {label:?}"),
            });
        }
        descriptors.push(RevisionDescriptor {
            index,
            label: label.to_string(),
        });
    }
    Ok(descriptors)
}

/// Splits file content on LF, stripping one trailing CR per line. A file
/// with no trailing newline contributes its final partial line.
pub fn split_lines(text: &str) -> Vec<String> {
    let mut parts: Vec<&str> = text.split('\n').collect();
    if parts.last() == Some(&"") {
        parts.pop();
    }
    parts
        .into_iter()
        .map(|p| p.strip_suffix('\r').unwrap_or(p).to_string())
        .collect()
}

/// Loads one revision's file tree, applying `filter`. Non-UTF-8 files are
/// skipped and reported in the warning list rather than failing the load.
pub fn load_snapshot(
    corpus_root: &Path,
    desc: &RevisionDescriptor,
    filter: &FileFilter,
) -> Result<SnapshotLoad, CorpusError> {
    let dir = corpus_root.join(snapshot_dir_name(desc.index));
    if !dir.is_dir() {
        return Err(CorpusError::SnapshotNotFound(dir));
    }
    let mut files = BTreeMap::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(&dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            CorpusError::Io(e.into_io_error().unwrap_or_else(|| {
                std::io::Error::other("walkdir loop")
            }))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(&dir)
            .expect("walked path is under its root");
        let Some(rel_str) = rel.to_str() else {
            continue; // non-UTF-8 file name; nothing downstream could hold it
        };
        let rel_str = rel_str.replace(std::path::MAIN_SEPARATOR, "/");
        if !filter.matches_path(&rel_str) {
            continue;
        }
        let size = entry.metadata().map_err(|e| {
            CorpusError::Io(e.into_io_error().unwrap_or_else(|| {
                std::io::Error::other("metadata unavailable")
            }))
        })?.len();
        if !filter.matches_size(size) {
            warnings.push(LoadWarning {
                file: rel_str,
                reason: SkipReason::TooLarge(size),
            });
            continue;
        }
        let bytes = fs::read(entry.path())?;
        match String::from_utf8(bytes) {
            Ok(text) => {
                files.insert(rel_str, split_lines(&text));
            }
            Err(_) => warnings.push(LoadWarning {
                file: rel_str,
                reason: SkipReason::NonUtf8,
            }),
        }
    }
    Ok(SnapshotLoad {
        snapshot: Snapshot {
            revision: desc.clone(),
            files,
        },
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Git adapter. Shells out to the system `git`; no network access.

fn git_output(repo: &Path, args: &[&str]) -> Result<Vec<u8>, CorpusError> {
    let output = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| CorpusError::IngestFailed(format!("cannot run git: {e}")))?;
    if !output.status.success() {
        return Err(CorpusError::IngestFailed(format!(
            "git {} failed: {}",
            args.first().unwrap_or(&""),
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    Ok(output.stdout)
}

fn is_safe_rel_path(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && path.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
}

/// Removes any previously exported snapshot directories and manifest so a
/// rerun never leaves stale revisions behind.
fn clear_corpus_dir(out_root: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(out_root)?;
    let manifest = out_root.join("manifest.tsv");
    if manifest.exists() {
        fs::remove_file(&manifest)?;
    }
    for entry in fs::read_dir(out_root)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let is_snapshot_dir = name.len() == 5
            && name.starts_with('r')
            && name[1..].chars().all(|c| c.is_ascii_digit());
        if is_snapshot_dir && entry.file_type()?.is_dir() {
            fs::remove_dir_all(entry.path())?;
        }
    }
    Ok(())
}

fn write_manifest(
    out_root: &Path,
    descriptors: &[RevisionDescriptor],
) -> Result<(), CorpusError> {
    let mut text = String::new();
    for desc in descriptors {
        text.push_str(&format!("{}\t{}\n", desc.index, desc.label));
    }
    fs::write(out_root.join("manifest.tsv"), text)?;
    Ok(())
}

/// Exports the most recent `limit` first-parent commits of `branch` as a
/// corpus under `out_root`, oldest first. Returns the written manifest.
///
/// The tree of each commit is materialized through `git ls-tree` plus
/// `git cat-file --batch`; only blobs passing `filter` are written, symlinks
/// and submodule entries are skipped. If the branch holds fewer than `limit`
/// commits the available ones are exported (at least 2 are required).
pub fn export_git_history(
    repo_path: &Path,
    branch: &str,
    limit: usize,
    filter: &FileFilter,
    out_root: &Path,
) -> Result<Vec<RevisionDescriptor>, CorpusError> {
    if limit < 2 {
        return Err(CorpusError::InsufficientHistory(format!(
            "the pipeline needs at least 2 revisions (limit was {limit})"
        )));
    }
    git_output(repo_path, &["rev-parse", "--git-dir"])
        .map_err(|_| CorpusError::IngestFailed(format!("{} is not a git repository", repo_path.display())))?;

    let rev_list = git_output(repo_path, &["rev-list", "--first-parent", "--reverse", branch])?;
    let commits: Vec<String> = String::from_utf8_lossy(&rev_list)
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if commits.len() < 2 {
        return Err(CorpusError::InsufficientHistory(format!(
            "branch {branch:?} has only {} commit(s)",
            commits.len()
        )));
    }
    let start = commits.len().saturating_sub(limit);
    let selected = &commits[start..];

    clear_corpus_dir(out_root)?;
    let mut descriptors = Vec::with_capacity(selected.len());
    for (index, hash) in selected.iter().enumerate() {
        let dest = out_root.join(snapshot_dir_name(index));
        export_tree(repo_path, hash, filter, &dest)?;
        descriptors.push(RevisionDescriptor {
            index,
            label: hash.clone(),
        });
    }
    write_manifest(out_root, &descriptors)?;
    Ok(descriptors)
}

struct BlobRef {
    oid: String,
    rel_path: String,
}

fn list_filtered_blobs(
    repo: &Path,
    commit: &str,
    filter: &FileFilter,
) -> Result<Vec<BlobRef>, CorpusError> {
    let listing = git_output(repo, &["ls-tree", "-r", "-l", "-z", commit])?;
    let mut blobs = Vec::new();
    for record in listing.split(|&b| b == 0) {
        if record.is_empty() {
            continue;
        }
        let record = String::from_utf8_lossy(record);
        let Some((meta, path)) = record.split_once('\t') else {
            continue;
        };
        let fields: Vec<&str> = meta.split_whitespace().collect();
        let [mode, kind, oid, size] = fields.as_slice() else {
            continue;
        };
        if *kind != "blob" || *mode == "120000" {
            continue; // symlinks and non-blob entries carry no source lines
        }
        if !is_safe_rel_path(path) || !filter.matches_path(path) {
            continue;
        }
        let size: u64 = size.parse().unwrap_or(u64::MAX);
        if !filter.matches_size(size) {
            continue;
        }
        blobs.push(BlobRef {
            oid: oid.to_string(),
            rel_path: path.to_string(),
        });
    }
    Ok(blobs)
}

/// Materializes one commit's filtered tree via a single `cat-file --batch`
/// process. Requests are chunked so the pipe never fills up in one
/// direction while the other side waits.
fn export_tree(
    repo: &Path,
    commit: &str,
    filter: &FileFilter,
    dest: &Path,
) -> Result<(), CorpusError> {
    let blobs = list_filtered_blobs(repo, commit, filter)?;
    fs::create_dir_all(dest)?;
    if blobs.is_empty() {
        return Ok(());
    }

    let mut child = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["cat-file", "--batch"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| CorpusError::IngestFailed(format!("cannot run git cat-file: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));

    const CHUNK: usize = 200;
    for chunk in blobs.chunks(CHUNK) {
        for blob in chunk {
            stdin
                .write_all(format!("{}\n", blob.oid).as_bytes())
                .map_err(|e| CorpusError::IngestFailed(format!("cat-file stdin: {e}")))?;
        }
        stdin
            .flush()
            .map_err(|e| CorpusError::IngestFailed(format!("cat-file stdin: {e}")))?;
        for blob in chunk {
            let mut header = String::new();
            stdout
                .read_line(&mut header)
                .map_err(|e| CorpusError::IngestFailed(format!("cat-file stdout: {e}")))?;
            let fields: Vec<&str> = header.split_whitespace().collect();
            let size: usize = match fields.as_slice() {
                [_, "blob", size] => size.parse().map_err(|_| {
                    CorpusError::IngestFailed(format!("bad cat-file header {header:?}"))
                })?,
                _ => {
                    return Err(CorpusError::IngestFailed(format!(
                        "unexpected cat-file response for {}: {}",
                        blob.oid,
                        header.trim()
                    )))
                }
            };
            let mut content = vec![0u8; size + 1]; // content plus trailing LF
            stdout
                .read_exact(&mut content)
                .map_err(|e| CorpusError::IngestFailed(format!("cat-file stdout: {e}")))?;
            content.pop();

            let target = dest.join(&blob.rel_path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&target, &content)?;
        }
    }
    drop(stdin);
    let status = child
        .wait()
        .map_err(|e| CorpusError::IngestFailed(format!("cat-file wait: {e}")))?;
    if !status.success() {
        return Err(CorpusError::IngestFailed("git cat-file failed".into()));
    }
    Ok(())
}

/// Imports a directory of plain snapshot directories (one subdirectory per
/// revision, sorted by name) into the canonical corpus layout. Labels are
/// the original directory names.
pub fn import_snapshot_dirs(
    src_root: &Path,
    filter: &FileFilter,
    out_root: &Path,
) -> Result<Vec<RevisionDescriptor>, CorpusError> {
    if !src_root.is_dir() {
        return Err(CorpusError::IngestFailed(format!(
            "{} is not a directory",
            src_root.display()
        )));
    }
    let mut dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(src_root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let Some(name) = entry.file_name().to_str().map(String::from) else {
                continue;
            };
            dirs.push((name, entry.path()));
        }
    }
    dirs.sort();
    if dirs.len() < 2 {
        return Err(CorpusError::InsufficientHistory(format!(
            "{} holds only {} snapshot directories",
            src_root.display(),
            dirs.len()
        )));
    }

    clear_corpus_dir(out_root)?;
    let mut descriptors = Vec::with_capacity(dirs.len());
    for (index, (label, src_dir)) in dirs.iter().enumerate() {
        let dest = out_root.join(snapshot_dir_name(index));
        fs::create_dir_all(&dest)?;
        for entry in WalkDir::new(src_dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                CorpusError::Io(e.into_io_error().unwrap_or_else(|| {
                    std::io::Error::other("walkdir loop")
                }))
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(src_dir).expect("under root");
            let Some(rel_str) = rel.to_str() else { continue };
            let rel_str = rel_str.replace(std::path::MAIN_SEPARATOR, "/");
            if !filter.matches_path(&rel_str) {
                continue;
            }
            if !filter.matches_size(entry.metadata().map(|m| m.len()).unwrap_or(u64::MAX)) {
                continue;
            }
            let target = dest.join(rel);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::copy(entry.path(), &target)?;
        }
        descriptors.push(RevisionDescriptor {
            index,
            label: label.clone(),
        });
    }
    write_manifest(out_root, &descriptors)?;
    Ok(descriptors)
}
