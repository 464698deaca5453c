//! WebAssembly bindings for the linecomp engine, driving a small static
//! demo page. The crate embeds a five-revision C mini-history so the demo
//! needs no filesystem: completions are served from the latest snapshot,
//! ranked by how recently each line was added anywhere in the history.
//!
//! The exported surface is three operations: `suggest` (prefix
//! completion), `added_lines` (diff two buffers and report the inserted
//! lines), and `evaluation_svg`/`evaluation_csv` (run the k = 1..=11 sweep
//! over the embedded history). Everything crosses the boundary as strings
//! (JSON, CSV, or SVG) so the page stays framework-free.

use std::collections::BTreeMap;

use wasm_bindgen::prelude::*;

use linecomp::corpus::{split_lines, RevisionDescriptor};
use linecomp::diff::snapshot_delta;
use linecomp::engine::{self, NormalizationPolicy, PrefixIndex};
use linecomp::eval::{self, Cohort};
use linecomp::report::{self, ReportMeta};
use linecomp::{AddedLineDb, Snapshot};

/// Embedded demo history: each entry is one revision of `queue.c`, oldest
/// first. The edits are small and deliberate — lines get added, removed,
/// and re-added so recency ranking is visible in the suggestions.
const HISTORY: [&str; 5] = [
    // r0: minimal ring buffer skeleton.
    "#include <stdlib.h>\n\
     \n\
     struct queue {\n\
     \x20   int *slots;\n\
     \x20   int head;\n\
     \x20   int tail;\n\
     };\n",
    // r1: allocation and a capacity field.
    "#include <stdlib.h>\n\
     \n\
     struct queue {\n\
     \x20   int *slots;\n\
     \x20   int head;\n\
     \x20   int tail;\n\
     \x20   int cap;\n\
     };\n\
     \n\
     struct queue *queue_new(int cap) {\n\
     \x20   struct queue *q = malloc(sizeof *q);\n\
     \x20   q->slots = malloc(cap * sizeof *q->slots);\n\
     \x20   q->cap = cap;\n\
     \x20   return q;\n\
     }\n",
    // r2: push, and the head/tail fields gain initialisers.
    "#include <stdlib.h>\n\
     \n\
     struct queue {\n\
     \x20   int *slots;\n\
     \x20   int head;\n\
     \x20   int tail;\n\
     \x20   int cap;\n\
     };\n\
     \n\
     struct queue *queue_new(int cap) {\n\
     \x20   struct queue *q = malloc(sizeof *q);\n\
     \x20   q->slots = malloc(cap * sizeof *q->slots);\n\
     \x20   q->cap = cap;\n\
     \x20   q->head = 0;\n\
     \x20   q->tail = 0;\n\
     \x20   return q;\n\
     }\n\
     \n\
     int queue_push(struct queue *q, int value) {\n\
     \x20   if (q->tail == q->cap)\n\
     \x20       return -1;\n\
     \x20   q->slots[q->tail++] = value;\n\
     \x20   return 0;\n\
     }\n",
    // r3: pop mirrors push; its guard reuses the push error style.
    "#include <stdlib.h>\n\
     \n\
     struct queue {\n\
     \x20   int *slots;\n\
     \x20   int head;\n\
     \x20   int tail;\n\
     \x20   int cap;\n\
     };\n\
     \n\
     struct queue *queue_new(int cap) {\n\
     \x20   struct queue *q = malloc(sizeof *q);\n\
     \x20   q->slots = malloc(cap * sizeof *q->slots);\n\
     \x20   q->cap = cap;\n\
     \x20   q->head = 0;\n\
     \x20   q->tail = 0;\n\
     \x20   return q;\n\
     }\n\
     \n\
     int queue_push(struct queue *q, int value) {\n\
     \x20   if (q->tail == q->cap)\n\
     \x20       return -1;\n\
     \x20   q->slots[q->tail++] = value;\n\
     \x20   return 0;\n\
     }\n\
     \n\
     int queue_pop(struct queue *q, int *out) {\n\
     \x20   if (q->head == q->tail)\n\
     \x20       return -1;\n\
     \x20   *out = q->slots[q->head++];\n\
     \x20   return 0;\n\
     }\n",
    // r4: queue_len plus a free routine; `return -1;` shows up once more
    // so it carries the freshest recency of all shared lines.
    "#include <stdlib.h>\n\
     \n\
     struct queue {\n\
     \x20   int *slots;\n\
     \x20   int head;\n\
     \x20   int tail;\n\
     \x20   int cap;\n\
     };\n\
     \n\
     struct queue *queue_new(int cap) {\n\
     \x20   struct queue *q = malloc(sizeof *q);\n\
     \x20   q->slots = malloc(cap * sizeof *q->slots);\n\
     \x20   q->cap = cap;\n\
     \x20   q->head = 0;\n\
     \x20   q->tail = 0;\n\
     \x20   return q;\n\
     }\n\
     \n\
     int queue_push(struct queue *q, int value) {\n\
     \x20   if (q->tail == q->cap)\n\
     \x20       return -1;\n\
     \x20   q->slots[q->tail++] = value;\n\
     \x20   return 0;\n\
     }\n\
     \n\
     int queue_pop(struct queue *q, int *out) {\n\
     \x20   if (q->head == q->tail)\n\
     \x20       return -1;\n\
     \x20   *out = q->slots[q->head++];\n\
     \x20   return 0;\n\
     }\n\
     \n\
     int queue_len(const struct queue *q) {\n\
     \x20   if (q == NULL)\n\
     \x20       return -1;\n\
     \x20   return q->tail - q->head;\n\
     }\n\
     \n\
     void queue_free(struct queue *q) {\n\
     \x20   free(q->slots);\n\
     \x20   free(q);\n\
     }\n",
];

fn snapshot_at(index: usize) -> Snapshot {
    let mut files = BTreeMap::new();
    files.insert("queue.c".to_string(), split_lines(HISTORY[index]));
    Snapshot {
        revision: RevisionDescriptor {
            index,
            label: format!("r{index}"),
        },
        files,
    }
}

/// The demo engine: embedded history mined once at construction.
#[wasm_bindgen]
pub struct Demo {
    index: PrefixIndex,
    db: AddedLineDb,
    policy: NormalizationPolicy,
}

impl Default for Demo {
    fn default() -> Self {
        Self::new()
    }
}

#[wasm_bindgen]
impl Demo {
    /// Mines the embedded history and indexes the latest snapshot.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        let policy = NormalizationPolicy::default();
        let mut records = Vec::new();
        for rev in 1..HISTORY.len() {
            let prev = snapshot_at(rev - 1);
            let next = snapshot_at(rev);
            records.extend(
                snapshot_delta(&prev, &next).expect("embedded history has matching revisions"),
            );
        }
        let db = AddedLineDb::new(records);
        let latest = snapshot_at(HISTORY.len() - 1);
        let recency = engine::build_recency(&db, HISTORY.len() - 1, &snapshot_at(0), &policy);
        let index = engine::build_index(&latest, &recency, &policy);
        Demo { index, db, policy }
    }

    /// Number of revisions in the embedded history.
    pub fn revision_count(&self) -> usize {
        HISTORY.len()
    }

    /// Source text of the latest revision, for display next to the input.
    pub fn latest_source(&self) -> String {
        HISTORY[HISTORY.len() - 1].to_string()
    }

    /// Completes `prefix` against the latest snapshot. Returns a JSON array
    /// of `{rank, recency, file, line, text}` objects, or `{"error": ...}`
    /// when the prefix is rejected.
    pub fn suggest(&self, prefix: &str, limit: usize) -> String {
        let limit = if limit == 0 { None } else { Some(limit) };
        match engine::query_prefix(&self.index, prefix, limit) {
            Ok(suggestions) => {
                serde_json::to_string(&suggestions).expect("suggestions serialize")
            }
            Err(err) => serde_json::json!({ "error": err.to_string() }).to_string(),
        }
    }

    /// Diffs two buffers as successive revisions of one file and returns
    /// the added lines as a JSON array of `{line, text}` objects.
    pub fn added_lines(&self, old_text: &str, new_text: &str) -> String {
        let mut old_files = BTreeMap::new();
        old_files.insert("buffer.c".to_string(), split_lines(old_text));
        let mut new_files = BTreeMap::new();
        new_files.insert("buffer.c".to_string(), split_lines(new_text));
        let prev = Snapshot {
            revision: RevisionDescriptor {
                index: 0,
                label: "old".to_string(),
            },
            files: old_files,
        };
        let next = Snapshot {
            revision: RevisionDescriptor {
                index: 1,
                label: "new".to_string(),
            },
            files: new_files,
        };
        let added = snapshot_delta(&prev, &next).expect("revisions are consecutive");
        let items: Vec<serde_json::Value> = added
            .iter()
            .map(|a| serde_json::json!({ "line": a.line_no, "text": a.text }))
            .collect();
        serde_json::to_string(&items).expect("added lines serialize")
    }

    /// Runs the k = 1..=11 sweep over the embedded history and renders the
    /// metric chart as a standalone SVG document.
    pub fn evaluation_svg(&self) -> String {
        report::render_svg(&self.sweep_rows())
    }

    /// The same sweep as CSV, for download or inspection.
    pub fn evaluation_csv(&self) -> String {
        let meta = ReportMeta::new(
            self.policy.describe(),
            "embedded demo history".to_string(),
            Cohort::All.describe().to_string(),
        );
        report::render_csv(&meta, &self.sweep_rows())
    }
}

impl Demo {
    fn sweep_rows(&self) -> Vec<linecomp::EvalRow> {
        let outcome = eval::sweep_with(
            |rev| Ok(snapshot_at(rev)),
            HISTORY.len(),
            &self.db,
            1,
            11,
            &self.policy,
            Cohort::All,
        )
        .expect("embedded sweep parameters are valid");
        outcome.rows
    }
}
