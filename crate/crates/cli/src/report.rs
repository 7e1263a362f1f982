//! Comparison tables across run manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use sleepstage::metrics::{render_table, TableFormat, TableRow};

use crate::artifacts::{read_json, MANIFEST_FILE, REPORT_FILE};
use crate::error::{CliError, Result};
use crate::pipeline::{RunManifest, RunReport};

fn report_path(manifest_path: &Path, manifest: &RunManifest) -> PathBuf {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    dir.join(manifest.outputs.get("report").map_or(REPORT_FILE, String::as_str))
}

/// One row per pipeline variant and one column group per dataset. A banner
/// precedes the table when the manifests disagree on tool version or when a
/// (variant, dataset) pair appears more than once.
pub fn cmd_report(manifests: &[PathBuf], format: TableFormat) -> Result<String> {
    if manifests.is_empty() {
        return Err(CliError::Usage("report needs at least one manifest".into()));
    }
    let mut missing = Vec::new();
    let mut reports = Vec::new();
    let mut versions = BTreeSet::new();
    for path in manifests {
        let resolved = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.clone()
        };
        let path = &resolved;
        if !path.is_file() {
            missing.push(path.display().to_string());
            continue;
        }
        let manifest: RunManifest = read_json(path)?;
        versions.insert(manifest.tool_version.clone());
        let rp = report_path(path, &manifest);
        if rp.is_file() {
            reports.push(read_json::<RunReport>(&rp)?);
        } else {
            missing.push(rp.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(CliError::MissingReports(missing));
    }
    let mut warnings = Vec::new();
    if versions.len() > 1 {
        warnings.push(format!(
            "WARNING: manifests come from different tool versions ({})",
            versions.into_iter().collect::<Vec<_>>().join(", ")
        ));
    }
    let mut rows: Vec<TableRow> = Vec::new();
    let mut seen = BTreeMap::new();
    for r in reports {
        let idx = *seen.entry(r.variant.clone()).or_insert_with(|| {
            rows.push(TableRow {
                variant: r.variant.clone(),
                scores: BTreeMap::new(),
            });
            rows.len() - 1
        });
        if rows[idx].scores.insert(r.dataset.clone(), r.test.triple()).is_some() {
            warnings.push(format!(
                "WARNING: {} on {} appears more than once; the last manifest wins",
                r.variant, r.dataset
            ));
        }
    }
    let mut out = String::new();
    for w in warnings {
        let line = match format {
            TableFormat::Text => w,
            TableFormat::Csv => format!("# {w}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&render_table(&rows, format));
    Ok(out)
}
