//! Command-line front end for the line-completion pipeline:
//! `ingest` a history into a corpus, `extract` the added-line database,
//! `suggest` completions interactively, `evaluate` the k-sweep, and
//! `report` macro-averages across systems.

use std::error::Error;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use linecomp::adddb::{self, AddedLineDb};
use linecomp::corpus::{self, CorpusError, FileFilter, RevisionDescriptor, Snapshot};
use linecomp::diff;
use linecomp::engine::{self, NormalizationPolicy};
use linecomp::eval::{self, Cohort};
use linecomp::report::{self, ReportMeta};

#[derive(Parser)]
#[command(
    name = "linecomp",
    version,
    about = "Line completion mined from revision history: suggest whole lines \
             from what the codebase already contains, ranked by recency."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export a git history (or plain snapshot directories) as a corpus
    Ingest(IngestArgs),
    /// Diff consecutive revisions and write the added-line database
    Extract(ExtractArgs),
    /// Print ranked completions for a prefix against one snapshot
    Suggest(SuggestArgs),
    /// Sweep prefix lengths and write recall/precision/F1 CSV (and SVG)
    Evaluate(EvaluateArgs),
    /// Macro-average several per-system result CSVs
    Report(ReportArgs),
}

#[derive(Args)]
struct FilterArgs {
    /// File extension to include (repeatable)
    #[arg(long = "ext", value_name = "EXT")]
    extensions: Vec<String>,
    /// Skip files larger than this many bytes
    #[arg(long, value_name = "BYTES", default_value_t = 2 * 1024 * 1024)]
    max_file_bytes: u64,
}

impl FilterArgs {
    fn to_filter(&self) -> FileFilter {
        if self.extensions.is_empty() {
            FileFilter {
                max_file_bytes: self.max_file_bytes,
                ..FileFilter::default()
            }
        } else {
            FileFilter::new(&self.extensions, self.max_file_bytes)
        }
    }
}

#[derive(Args)]
struct PolicyArgs {
    /// Keep leading whitespace instead of trimming it
    #[arg(long)]
    keep_leading: bool,
    /// Keep trailing whitespace instead of trimming it
    #[arg(long)]
    keep_trailing: bool,
    /// Minimum normalized length (in code points) for a line to count
    #[arg(long, value_name = "N", default_value_t = 1)]
    min_len: usize,
}

impl PolicyArgs {
    fn to_policy(&self) -> NormalizationPolicy {
        NormalizationPolicy {
            trim_leading: !self.keep_leading,
            trim_trailing: !self.keep_trailing,
            min_len: self.min_len,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Git repository whose history to export
    #[arg(long, value_name = "REPO", required_unless_present = "dirs", conflicts_with = "dirs")]
    git: Option<PathBuf>,
    /// Directory of plain snapshot subdirectories to import instead
    #[arg(long, value_name = "DIR")]
    dirs: Option<PathBuf>,
    /// Branch or ref to walk (first-parent order); git mode only
    #[arg(long, value_name = "REF", default_value = "HEAD")]
    branch: String,
    /// Export at most the most recent N revisions; git mode only
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
    /// Corpus output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus directory produced by `ingest`
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Output path for the added-line database (JSONL)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Args)]
struct SuggestArgs {
    /// Corpus directory produced by `ingest`
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Added-line database produced by `extract`
    #[arg(long, value_name = "FILE")]
    db: PathBuf,
    /// Snapshot index to complete against (1-based; needs history through N)
    #[arg(long, value_name = "N")]
    snapshot: usize,
    /// The characters typed so far
    #[arg(long, value_name = "TEXT")]
    prefix: String,
    /// Maximum number of suggestions to print
    #[arg(long, value_name = "M", default_value_t = 10)]
    limit: usize,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CohortArg {
    /// Every added line, re-judged at each k
    All,
    /// Suggestible lines long enough for every k (same query set per k)
    Fixed,
}

impl CohortArg {
    fn to_cohort(self) -> Cohort {
        match self {
            CohortArg::All => Cohort::All,
            CohortArg::Fixed => Cohort::Fixed,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Corpus directory produced by `ingest`
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Added-line database produced by `extract`
    #[arg(long, value_name = "FILE")]
    db: PathBuf,
    /// Smallest prefix length to evaluate
    #[arg(long, value_name = "K", default_value_t = 1)]
    k_min: usize,
    /// Largest prefix length to evaluate
    #[arg(long, value_name = "K", default_value_t = 11)]
    k_max: usize,
    /// Which added lines participate
    #[arg(long, value_enum, default_value_t = CohortArg::All)]
    cohort: CohortArg,
    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write a line chart of the three series to this path
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-system result CSVs produced by `evaluate` (at least one)
    #[arg(required = true, value_name = "CSV")]
    inputs: Vec<PathBuf>,
    /// Output path for the macro-averaged CSV
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// Input or usage problems detected outside the library layer.
#[derive(Debug)]
struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Error for CliError {}

fn cli_error<T>(message: impl Into<String>) -> Result<T, Box<dyn Error>> {
    Err(Box::new(CliError(message.into())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Suggest(args) => cmd_suggest(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<(), Box<dyn Error>> {
    let filter = args.filter.to_filter();
    let descriptors = if let Some(repo) = &args.git {
        corpus::export_git_history(
            repo,
            &args.branch,
            args.limit.unwrap_or(usize::MAX),
            &filter,
            &args.out,
        )?
    } else {
        let dirs = args.dirs.as_ref().expect("clap requires --git or --dirs");
        if let Some(limit) = args.limit {
            if limit < 2 {
                return cli_error(format!(
                    "insufficient-history: the pipeline needs at least 2 revisions (limit was {limit})"
                ));
            }
        }
        corpus::import_snapshot_dirs(dirs, &filter, &args.out)?
    };
    println!(
        "exported {} revisions to {}",
        descriptors.len(),
        args.out.display()
    );
    Ok(())
}

/// Loads one snapshot, echoing skip warnings to standard error.
fn load_snapshot_verbose(
    corpus_root: &std::path::Path,
    desc: &RevisionDescriptor,
    filter: &FileFilter,
) -> Result<Snapshot, CorpusError> {
    let loaded = corpus::load_snapshot(corpus_root, desc, filter)?;
    for warning in &loaded.warnings {
        eprintln!("warning: {}: {warning}", desc.label);
    }
    Ok(loaded.snapshot)
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Box<dyn Error>> {
    let filter = args.filter.to_filter();
    let revisions = corpus::load_manifest(&args.corpus)?;
    if revisions.len() < 2 {
        return cli_error(format!(
            "insufficient-history: corpus has {} revision(s), need at least 2",
            revisions.len()
        ));
    }
    let mut prev = load_snapshot_verbose(&args.corpus, &revisions[0], &filter)?;
    let mut all_records = Vec::new();
    for desc in &revisions[1..] {
        let next = load_snapshot_verbose(&args.corpus, desc, &filter)?;
        let (records, stats) = diff::snapshot_delta_full(&prev, &next)?;
        for file in &stats.fallback_files {
            eprintln!(
                "note: {}: {file}: large file, diffed via unique-line anchors",
                desc.label
            );
        }
        println!("revision {} ({}): {} added", desc.index, desc.label, records.len());
        all_records.extend(records);
        prev = next;
    }
    let db = AddedLineDb::new(all_records);
    adddb::write_db(&db, &args.out)?;
    println!("total: {}", db.len());
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_suggest(args: SuggestArgs) -> Result<(), Box<dyn Error>> {
    if args.prefix.is_empty() {
        return cli_error("invalid-prefix: prefix must be non-empty");
    }
    let filter = args.filter.to_filter();
    let policy = args.policy.to_policy();
    let revisions = corpus::load_manifest(&args.corpus)?;
    if args.snapshot < 1 || args.snapshot >= revisions.len() {
        return cli_error(format!(
            "snapshot-not-found: corpus has revisions 1..{}, asked for {}",
            revisions.len().saturating_sub(1),
            args.snapshot
        ));
    }
    let read = adddb::read_db(&args.db)?;
    for warning in &read.warnings {
        eprintln!("warning: {warning}");
    }
    let base = load_snapshot_verbose(&args.corpus, &revisions[0], &filter)?;
    let recency = engine::build_recency(&read.db, args.snapshot, &base, &policy);
    let target = load_snapshot_verbose(&args.corpus, &revisions[args.snapshot], &filter)?;
    let index = engine::build_index(&target, &recency, &policy);
    let suggestions = engine::query_prefix(&index, &args.prefix, Some(args.limit))?;
    for s in &suggestions {
        println!("{}\t{}\t{}:{}\t{}", s.rank, s.recency, s.file, s.line_no, s.text);
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Box<dyn Error>> {
    let filter = args.filter.to_filter();
    let policy = args.policy.to_policy();
    let cohort = args.cohort.to_cohort();
    let read = adddb::read_db(&args.db)?;
    for warning in &read.warnings {
        eprintln!("warning: {warning}");
    }
    let outcome = eval::sweep(
        &args.corpus,
        &filter,
        &read.db,
        args.k_min,
        args.k_max,
        &policy,
        cohort,
    )?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    let meta = ReportMeta::new(
        policy.describe(),
        filter.describe(),
        cohort.describe().to_string(),
    );
    fs::write(&args.out, report::render_csv(&meta, &outcome.rows))?;
    println!("wrote {} rows to {}", outcome.rows.len(), args.out.display());
    if let Some(svg_path) = &args.svg {
        fs::write(svg_path, report::render_svg(&outcome.rows))?;
        println!("wrote chart to {}", svg_path.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Box<dyn Error>> {
    let mut parsed = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
        let file = report::parse_csv(&text)
            .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
        parsed.push(file);
    }
    let k_range: Vec<usize> = parsed[0].rows.iter().map(|r| r.k).collect();
    for (path, file) in args.inputs.iter().zip(&parsed) {
        let this_range: Vec<usize> = file.rows.iter().map(|r| r.k).collect();
        if this_range != k_range {
            return cli_error(format!(
                "k-range-mismatch: {} covers k={this_range:?}, expected k={k_range:?}",
                path.display()
            ));
        }
        if file.meta != parsed[0].meta {
            eprintln!(
                "warning: {} was produced with different settings than {}",
                path.display(),
                args.inputs[0].display()
            );
        }
    }

    let mut averaged = Vec::with_capacity(k_range.len());
    for position in 0..k_range.len() {
        let per_system: Vec<_> = parsed
            .iter()
            .map(|file| file.rows[position].clone())
            .collect();
        let row = eval::macro_average(&per_system);
        // F1 in the CSV is the mean of per-system F1 values; the harmonic
        // mean of the averaged precision/recall is a different number, so
        // surface both.
        let harmonic = match (row.precision_pct, row.recall_conditional_pct) {
            (Some(p), Some(r)) => eval::f1_pct(p, r),
            _ => None,
        };
        match harmonic {
            Some(h) => println!(
                "k={}: macro_f1={} harmonic_of_means={h:.4}",
                row.k,
                row.f1_pct.map_or("undefined".to_string(), |v| format!("{v:.4}")),
            ),
            None => println!("k={}: macro_f1=undefined harmonic_of_means=undefined", row.k),
        }
        averaged.push(row);
    }

    let mut meta_lines = parsed[0].meta.clone();
    meta_lines.push(format!("systems: {}", args.inputs.len()));
    fs::write(&args.out, report::render_csv_lines(&meta_lines, &averaged))?;
    println!("wrote {} averaged rows to {}", averaged.len(), args.out.display());
    Ok(())
}
