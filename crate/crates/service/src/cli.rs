use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{ArgGroup, Parser, Subcommand};
use innotree_core::mining::{classify, induce, tree_to_rules, InduceParams, LabeledDataset};
use innotree_core::ValidationReport;
use serde::Serialize;

use crate::api::{self, ApiError, ErrorKind, WhatIfRequest};
use crate::config::load_config;
use crate::http;
use crate::snapshot::{EngineSnapshot, SnapshotStore, StoreError};

pub const EXIT_OK: i32 = 0;
/// Validation findings or a domain error such as an unknown id.
pub const EXIT_FINDINGS: i32 = 1;
/// Usage, configuration or parse error.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "innotree",
    version,
    about = "Decision support for innovation projects"
)]
pub struct Cli {
    /// JSON config naming the model, rules, schema and reports files.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model, rules, analytical schema and report config.
    Validate,
    /// List feasible configurations with their scores.
    Enumerate {
        /// Maximum number of configurations to list.
        #[arg(long)]
        limit: usize,
        /// Order by score instead of enumeration order.
        #[arg(long)]
        rank: bool,
        /// Parameter at which series characteristics are evaluated.
        #[arg(long)]
        param: Option<f64>,
        /// Write variants.json here instead of standard output.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Evaluate one selection of node ids.
    Score {
        /// Comma-separated node ids.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        selection: Vec<String>,
        /// Parameter at which series characteristics are evaluated.
        #[arg(long)]
        param: Option<f64>,
    },
    /// Render a static (XML) or pivot (CSV) report.
    #[command(group(ArgGroup::new("which").required(true).args(["static_id", "pivot"])))]
    Report {
        /// Id of a static report.
        #[arg(long = "static", value_name = "ID")]
        static_id: Option<String>,
        /// Id of a pivot report.
        #[arg(long, value_name = "ID")]
        pivot: Option<String>,
        /// Write <id>.xml or <id>.csv here instead of standard output.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Induce a decision tree from a labelled CSV (last column is the label)
    /// and print it as a rules file.
    Mine {
        /// Labelled CSV file.
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
        /// Most tests on any path from the root; 0 gives a single leaf.
        #[arg(long)]
        max_depth: Option<usize>,
        /// Nodes with fewer rows become leaves.
        #[arg(long, default_value_t = 1)]
        min_rows: usize,
        /// Write tree.json and rules.json here instead of printing rules.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Port to listen on; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Address to bind.
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Findings(ValidationReport),
    Domain(anyhow::Error),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        match e.kind {
            ErrorKind::BadRequest => Failure::Usage(e.into()),
            ErrorKind::NotFound | ErrorKind::Unprocessable => Failure::Domain(e.into()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Load(e) => Failure::Usage(e.into()),
            StoreError::Invalid(report) => Failure::Findings(report),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Data goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Findings(report)) => {
            let _ = writeln!(err, "{} validation finding(s):", report.len());
            for v in report.violations() {
                let _ = writeln!(err, "  {v}");
            }
            EXIT_FINDINGS
        }
        Err(Failure::Domain(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FINDINGS
        }
    }
}

fn open_store(config: Option<&Path>) -> Result<SnapshotStore, Failure> {
    let path =
        config.ok_or_else(|| usage(anyhow::anyhow!("--config <PATH> is required for this command")))?;
    let resolved = load_config(path).map_err(usage)?;
    Ok(SnapshotStore::open(resolved)?)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("response types serialize");
    text.push('\n');
    out.write_all(text.as_bytes()).map_err(usage)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], err: &mut dyn Write) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(usage)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(usage)?;
    let _ = writeln!(err, "wrote {}", path.display());
    Ok(())
}

fn emit(
    out: &mut dyn Write,
    err: &mut dyn Write,
    dir: Option<&Path>,
    name: &str,
    bytes: &[u8],
) -> Result<(), Failure> {
    match dir {
        Some(dir) => write_file(dir, name, bytes, err),
        None => out.write_all(bytes).map_err(usage),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Validate => {
            let store = open_store(config)?;
            summary(&store.current(), out)
        }
        Command::Enumerate {
            limit,
            rank,
            param,
            out: dir,
        } => {
            if limit == 0 {
                return Err(usage(anyhow::anyhow!("--limit must be at least 1")));
            }
            let s = open_store(config)?.current();
            let response = api::variants(&s, limit, param, rank)?;
            let mut text = serde_json::to_string_pretty(&response).expect("response types serialize");
            text.push('\n');
            emit(out, err, dir.as_deref(), "variants.json", text.as_bytes())
        }
        Command::Score { selection, param } => {
            let s = open_store(config)?.current();
            let response = api::whatif(&s, &WhatIfRequest { selection, param })?;
            write_json(out, &response)
        }
        Command::Report {
            static_id,
            pivot,
            out: dir,
        } => {
            let s = open_store(config)?.current();
            let (name, bytes) = match (static_id, pivot) {
                (Some(id), _) => (format!("{id}.xml"), api::static_report(&s, &id)?),
                (None, Some(id)) => (format!("{id}.csv"), api::pivot_report(&s, &id)?),
                (None, None) => unreachable!("clap requires one of --static and --pivot"),
            };
            emit(out, err, dir.as_deref(), &name, &bytes)
        }
        Command::Mine {
            data,
            max_depth,
            min_rows,
            out: dir,
        } => mine(
            &data,
            InduceParams { max_depth, min_rows },
            dir.as_deref(),
            out,
            err,
        ),
        Command::Serve { port, host } => {
            let store = Arc::new(open_store(config)?);
            let runtime = tokio::runtime::Runtime::new().map_err(usage)?;
            runtime
                .block_on(http::serve(store, SocketAddr::new(host, port)))
                .with_context(|| format!("cannot serve on {host}:{port}"))
                .map_err(usage)
        }
    }
}

fn summary(s: &EngineSnapshot, out: &mut dyn Write) -> Result<(), Failure> {
    let h = &s.model.hierarchy;
    writeln!(
        out,
        "valid: {} nodes ({} leaves), {} rules, {} fact tables, {} static and {} pivot reports",
        h.nodes.len(),
        h.leaf_ids().len(),
        s.rules.len(),
        s.schema.facts().len(),
        s.reports.statics.len(),
        s.reports.dynamics.len(),
    )
    .map_err(usage)
}

fn mine(
    data: &Path,
    params: InduceParams,
    dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(data)
        .with_context(|| format!("cannot read {}", data.display()))
        .map_err(usage)?;
    let dataset = LabeledDataset::from_csv(&text)
        .with_context(|| format!("{}", data.display()))
        .map_err(usage)?;
    let tree = induce(&dataset, params).map_err(|e| Failure::Domain(e.into()))?;
    let rules = tree_to_rules(&tree);
    let correct = (0..dataset.rows().len())
        .filter(|&i| classify(&tree, &dataset.row_map(i)).ok() == Some(dataset.rows()[i].label.as_str()))
        .count();
    let _ = writeln!(
        err,
        "tree: depth {}, {} leaves; training accuracy {}/{}",
        tree.depth(),
        tree.leaf_count(),
        correct,
        dataset.rows().len()
    );
    let mut rules_json = rules.to_json_pretty();
    rules_json.push('\n');
    match dir {
        Some(dir) => {
            let mut tree_json = serde_json::to_string_pretty(&tree).expect("trees serialize");
            tree_json.push('\n');
            write_file(dir, "tree.json", tree_json.as_bytes(), err)?;
            write_file(dir, "rules.json", rules_json.as_bytes(), err)
        }
        None => out.write_all(rules_json.as_bytes()).map_err(usage),
    }
}
