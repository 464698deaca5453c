//! Line-level code completion mined from version history.
//!
//! The pipeline has three stages. `corpus` defines an on-disk layout of
//! ordered revision snapshots (with a git exporter to populate it). `diff`
//! compares consecutive snapshots and keeps only purely added lines, which
//! `adddb` persists as a JSONL database. `engine` builds a recency-annotated
//! prefix index over one snapshot's codebase and answers ranked prefix
//! queries; `eval` replays every added line as a completion attempt against
//! the previous revision's index and reports recall/precision/F1 across
//! prefix lengths. `report` renders the results as CSV and SVG.

pub mod adddb;
pub mod corpus;
pub mod diff;
pub mod engine;
pub mod eval;
pub mod report;

pub use adddb::AddedLineDb;
pub use corpus::{FileFilter, RevisionDescriptor, Snapshot};
pub use diff::AddedLine;
pub use engine::{NormalizationPolicy, PrefixIndex, Suggestion};
pub use eval::{Cohort, EvalRow, PairCounts};
