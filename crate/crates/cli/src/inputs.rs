use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use swnabc::eventlog::parse_log;
use swnabc::petrinet::{parse_net_json, parse_pnml, validate_workflow};
use swnabc::{LogFormat, LogLanguage, StochasticWorkflowNet};

/// Reads a net as PNML or JSON, by extension and otherwise by content.
pub fn read_net(path: &Path) -> Result<StochasticWorkflowNet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let xml = match ext.as_deref() {
        Some("pnml" | "xml") => true,
        Some("json") => false,
        _ => text.trim_start().starts_with('<'),
    };
    let net = if xml {
        parse_pnml(&text)?
    } else {
        parse_net_json(&text)?
    };
    Ok(net)
}

/// Reads a net and refuses it unless it is a workflow net.
pub fn read_workflow_net(path: &Path) -> Result<StochasticWorkflowNet> {
    let net = read_net(path)?;
    let report = validate_workflow(&net);
    if !report.is_valid() {
        bail!("{} is not a workflow net:\n{report}", path.display());
    }
    Ok(net)
}

/// Reads a log as CSV or JSON lines, by extension and otherwise by content.
pub fn read_log(path: &Path) -> Result<LogLanguage> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => LogFormat::Csv,
        Some("jsonl" | "ndjson") => LogFormat::JsonLines,
        _ => LogFormat::sniff(&text),
    };
    parse_log(&text, format).with_context(|| format!("parsing {}", path.display()))
}

/// Output directory whose files were checked for collisions up front.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: &Path, force: bool, files: &[&str]) -> Result<Self> {
        if !force {
            let existing: Vec<String> = files
                .iter()
                .map(|f| root.join(f))
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !existing.is_empty() {
                bail!(
                    "refusing to overwrite {} (use --force)",
                    existing.join(", ")
                );
            }
        }
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn write_bytes(&self, file: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(file, text.as_bytes())
    }
}
