//! Run-directory artifacts and the metadata header each one carries.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult, InternalContext, UserContext};

pub const TOOL: &str = "opframe";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sidecar holding wall-clock timestamps; excluded from reproducibility.
pub const RUN_LOG: &str = "run.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub subcommand: String,
    pub seed: u64,
    /// Flag values that shaped this artifact.
    pub parameters: Value,
}

/// A named artifact and the subcommand(s) that write it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArtifactKind {
    pub file: &'static str,
    pub producers: &'static [&'static str],
}

impl ArtifactKind {
    const fn new(file: &'static str, producers: &'static [&'static str]) -> Self {
        ArtifactKind { file, producers }
    }

    fn producer_hint(&self) -> String {
        self.producers.iter().map(|p| format!("`{TOOL} {p}`")).collect::<Vec<_>>().join(" or ")
    }
}

pub const ARTICLES: ArtifactKind = ArtifactKind::new("articles.jsonl", &["corpus"]);
pub const CORPUS_SUMMARY: ArtifactKind = ArtifactKind::new("corpus_summary.json", &["corpus"]);
pub const TUPLES: ArtifactKind = ArtifactKind::new("tuples.jsonl", &["extract"]);
pub const EXTRACTION_SUMMARY: ArtifactKind = ArtifactKind::new("extraction_summary.json", &["extract"]);
pub const AGGREGATION: ArtifactKind = ArtifactKind::new("aggregation.json", &["aggregate"]);
pub const AGGREGATED_LABELS: ArtifactKind = ArtifactKind::new("aggregated_labels.csv", &["aggregate"]);
pub const DEMOGRAPHICS: ArtifactKind = ArtifactKind::new("demographics.json", &["demographics"]);
pub const HUMAN_PERFORMANCE: ArtifactKind = ArtifactKind::new("human_performance.json", &["human-perf"]);
pub const STANCE_MODEL: ArtifactKind = ArtifactKind::new("stance_model.json", &["train-stance"]);
pub const STANCE_SPLIT: ArtifactKind = ArtifactKind::new("stance_split.json", &["train-stance"]);
pub const STANCE_EVAL: ArtifactKind = ArtifactKind::new("stance_eval.json", &["eval"]);
pub const LABELS: ArtifactKind = ArtifactKind::new("labels.csv", &["classify", "ingest-labels"]);
pub const INGEST_REJECTED: ArtifactKind = ArtifactKind::new("ingest_rejected.csv", &["ingest-labels"]);
pub const FRAMING_STATS: ArtifactKind = ArtifactKind::new("framing_stats.csv", &["framing"]);
pub const FRAMING: ArtifactKind = ArtifactKind::new("framing.json", &["framing"]);
pub const ATTRIBUTIONS: ArtifactKind = ArtifactKind::new("attributions.csv", &["faithfulness"]);
pub const FAITHFULNESS: ArtifactKind = ArtifactKind::new("faithfulness.json", &["faithfulness"]);
pub const REVIEW_QUEUE: ArtifactKind = ArtifactKind::new("review_queue.csv", &["faithfulness"]);
pub const HYPOCRISY: ArtifactKind = ArtifactKind::new("hypocrisy_predicates.csv", &["faithfulness"]);
pub const REPORT_JSON: ArtifactKind = ArtifactKind::new("report.json", &["report"]);
pub const REPORT_MD: ArtifactKind = ArtifactKind::new("report.md", &["report"]);

/// Artifact contents with the header removed.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub meta: Meta,
    pub body: String,
}

/// Reads and writes artifacts in one run directory, checking that inputs
/// were produced under the same configuration.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    /// Combine artifacts even when their config hashes differ.
    pub force: bool,
}

impl RunDir {
    pub fn path(&self, kind: ArtifactKind) -> PathBuf {
        self.root.join(kind.file)
    }

    pub fn exists(&self, kind: ArtifactKind) -> bool {
        self.path(kind).exists()
    }

    pub fn meta(&self, subcommand: &str, parameters: Value) -> Meta {
        Meta {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_sha256: self.config_hash.clone(),
            subcommand: subcommand.into(),
            seed: self.seed,
            parameters,
        }
    }

    fn ensure_root(&self) -> CliResult<()> {
        fs::create_dir_all(&self.root).internal_ctx(format_args!("cannot create {}", self.root.display()))
    }

    fn write_bytes(&self, kind: ArtifactKind, bytes: &[u8]) -> CliResult<PathBuf> {
        self.ensure_root()?;
        let path = self.path(kind);
        let tmp = path.with_extension("partial");
        fs::write(&tmp, bytes).internal_ctx(format_args!("cannot write {}", tmp.display()))?;
        fs::rename(&tmp, &path).internal_ctx(format_args!("cannot write {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// JSON object with the header under `_meta`.
    pub fn write_json<T: Serialize>(&self, kind: ArtifactKind, meta: &Meta, value: &T) -> CliResult<PathBuf> {
        let mut obj = match serde_json::to_value(value).internal_ctx("serialize artifact")? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        obj.insert("_meta".into(), serde_json::to_value(meta).internal_ctx("serialize header")?);
        let mut text = serde_json::to_string_pretty(&Value::Object(obj)).internal_ctx("serialize artifact")?;
        text.push('\n');
        self.write_bytes(kind, text.as_bytes())
    }

    /// JSON lines with the header alone on the first line.
    pub fn write_jsonl(&self, kind: ArtifactKind, meta: &Meta, body: &[u8]) -> CliResult<PathBuf> {
        let mut out = header_line(meta)?;
        out.push(b'\n');
        out.extend_from_slice(body);
        self.write_bytes(kind, &out)
    }

    /// CSV preceded by a `# {header}` comment line.
    pub fn write_csv(&self, kind: ArtifactKind, meta: &Meta, body: &[u8]) -> CliResult<PathBuf> {
        let mut out = b"# ".to_vec();
        out.extend(serde_json::to_vec(meta).internal_ctx("serialize header")?);
        out.push(b'\n');
        out.extend_from_slice(body);
        self.write_bytes(kind, &out)
    }

    /// Plain text with no header of its own.
    pub fn write_text(&self, kind: ArtifactKind, text: &str) -> CliResult<PathBuf> {
        self.write_bytes(kind, text.as_bytes())
    }

    /// Reads an upstream artifact, failing with the name of the subcommand
    /// that produces it when absent.
    pub fn load(&self, kind: ArtifactKind) -> CliResult<Loaded> {
        let path = self.path(kind);
        if !path.exists() {
            return Err(CliError::user(format!(
                "missing {} in {}; run {} first",
                kind.file,
                self.root.display(),
                kind.producer_hint()
            )));
        }
        let body = fs::read_to_string(&path).user_ctx(format_args!("cannot read {}", path.display()))?;
        let meta = parse_meta(&body).ok_or_else(|| CliError::user(format!("{} has no artifact header", path.display())))?;
        self.check_hash(kind, &meta)?;
        Ok(Loaded { meta, body })
    }

    /// Like [`RunDir::load`] but absent artifacts yield `None`.
    pub fn load_optional(&self, kind: ArtifactKind) -> CliResult<Option<Loaded>> {
        if self.exists(kind) {
            self.load(kind).map(Some)
        } else {
            Ok(None)
        }
    }

    fn check_hash(&self, kind: ArtifactKind, meta: &Meta) -> CliResult<()> {
        if meta.config_sha256 == self.config_hash {
            return Ok(());
        }
        let msg = format!(
            "{} was produced under config {} but the current config is {}",
            kind.file,
            short(&meta.config_sha256),
            short(&self.config_hash)
        );
        if self.force {
            log::warn!("{msg}; combining anyway (--force)");
            Ok(())
        } else {
            Err(CliError::user(format!("{msg}; rerun `{TOOL} {}` or pass --force", meta.subcommand)))
        }
    }

    /// Appends a timestamped line to the sidecar log.
    pub fn log_run(&self, line: &str) {
        use std::io::Write;
        if self.ensure_root().is_err() {
            return;
        }
        let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        if let Ok(mut f) = fs::OpenOptions::new().create(true).append(true).open(self.root.join(RUN_LOG)) {
            let _ = writeln!(f, "{stamp} {line}");
        }
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn header_line(meta: &Meta) -> CliResult<Vec<u8>> {
    let mut m = Map::new();
    m.insert("_meta".into(), serde_json::to_value(meta).internal_ctx("serialize header")?);
    serde_json::to_vec(&Value::Object(m)).internal_ctx("serialize header")
}

/// Header of an artifact in any of the three layouts.
pub fn parse_meta(text: &str) -> Option<Meta> {
    let first = text.lines().next()?.trim();
    if let Some(rest) = first.strip_prefix("# ") {
        return serde_json::from_str(rest).ok();
    }
    if first.starts_with("{\"_meta\"") {
        let v: Value = serde_json::from_str(first).ok()?;
        return serde_json::from_value(v.get("_meta")?.clone()).ok();
    }
    let v: Value = serde_json::from_str(text).ok()?;
    serde_json::from_value(v.get("_meta")?.clone()).ok()
}

/// Reads the header of an artifact file on disk.
pub fn read_meta(path: &Path) -> CliResult<Option<Meta>> {
    let f = fs::File::open(path).user_ctx(format_args!("cannot open {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first).user_ctx(format_args!("cannot read {}", path.display()))?;
    if first.starts_with("# ") || first.starts_with("{\"_meta\"") {
        return Ok(parse_meta(&first));
    }
    let text = fs::read_to_string(path).user_ctx(format_args!("cannot read {}", path.display()))?;
    Ok(parse_meta(&text))
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn run_dir(root: &Path, hash: &str, force: bool) -> RunDir {
        RunDir {
            root: root.to_path_buf(),
            config_hash: hash.into(),
            seed: 3,
            force,
        }
    }

    #[test]
    fn headers_round_trip_in_every_layout() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_dir(dir.path(), "abc", false);
        let meta = run.meta("extract", json!({"x": 1}));
        run.write_json(EXTRACTION_SUMMARY, &meta, &json!({"kept": 2})).unwrap();
        run.write_jsonl(TUPLES, &meta, b"{\"a\":1}\n").unwrap();
        run.write_csv(LABELS, &meta, b"reference,label\nr,agree\n").unwrap();
        for kind in [EXTRACTION_SUMMARY, TUPLES, LABELS] {
            assert_eq!(read_meta(&run.path(kind)).unwrap().as_ref(), Some(&meta));
            assert_eq!(run.load(kind).unwrap().meta, meta);
        }
        let body = run.load(TUPLES).unwrap().body;
        assert!(body.ends_with("{\"a\":1}\n"));
    }

    #[test]
    fn missing_artifact_names_its_producer() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_dir(dir.path(), "abc", false);
        let err = run.load(LABELS).unwrap_err().to_string();
        assert!(err.contains("classify") && err.contains("ingest-labels"), "{err}");
        let err = run.load(TUPLES).unwrap_err().to_string();
        assert!(err.contains("opframe extract"), "{err}");
        assert!(run.load_optional(FRAMING).unwrap().is_none());
    }

    #[test]
    fn hash_mismatch_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        let first = run_dir(dir.path(), "aaaa", false);
        first.write_json(FRAMING, &first.meta("framing", json!({})), &json!({})).unwrap();
        let other = run_dir(dir.path(), "bbbb", false);
        let err = other.load(FRAMING).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("--force"));
        assert!(run_dir(dir.path(), "bbbb", true).load(FRAMING).is_ok());
    }
}
