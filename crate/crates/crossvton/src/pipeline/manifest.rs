//! Manifest persistence and validation.
//!
//! A manifest is UTF-8 JSON-lines: one header line carrying the round
//! tag and config fingerprint, then one record per line in execution
//! order. Field order is frozen by struct declaration order. Raster
//! payloads live in files referenced by relative path, so manifests
//! stay streamable, diff-able, and resumable.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::maskcore::{load_rgb_image, load_trizone_mask, GarmentSpec};
use crate::routing::{route, ConstructionMethod, Round};

use super::PipelineError;

pub const PROVENANCE_SYNTHETIC: &str = "Synthetic";
pub const PROVENANCE_REAL: &str = "Real";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordStatus {
    Ok,
    Degenerate,
    BackendFailed,
}

/// One persisted quadruplet. `p_c`/`p_g`/`g_g`/`m3g` are paths relative
/// to the manifest's directory; they are empty for failed records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrupletRecord {
    pub id: String,
    pub round: Round,
    pub method: ConstructionMethod,
    pub pc_spec: GarmentSpec,
    pub pg_spec: GarmentSpec,
    pub p_c: String,
    pub p_g: String,
    pub g_g: String,
    pub m3g: String,
    pub p_c_provenance: String,
    pub p_g_provenance: String,
    pub seed: u64,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub round: Round,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<QuadrupletRecord>,
}

/// Incremental writer: header first, then one flushed line per record,
/// so an interrupted run leaves a readable prefix.
pub struct ManifestWriter {
    file: File,
}

impl ManifestWriter {
    pub fn create(path: &Path, header: &ManifestHeader) -> Result<Self, PipelineError> {
        let mut file = File::create(path)?;
        writeln!(file, "{}", serde_json::to_string(header)?)?;
        file.flush()?;
        Ok(ManifestWriter { file })
    }

    /// Reopens an existing manifest for appending, after verifying the
    /// stored fingerprint matches the resuming run's config.
    pub fn append(path: &Path, header: &ManifestHeader) -> Result<Self, PipelineError> {
        let existing = read_manifest(path)?;
        if existing.header != *header {
            return Err(PipelineError::ResumeMismatch {
                stored: existing.header.config_fingerprint,
                current: header.config_fingerprint.clone(),
            });
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(ManifestWriter { file })
    }

    pub fn write_record(&mut self, record: &QuadrupletRecord) -> Result<(), PipelineError> {
        writeln!(self.file, "{}", serde_json::to_string(record)?)?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, PipelineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| PipelineError::Manifest(format!("{}: empty manifest", path.display())))??;
    let header: ManifestHeader = serde_json::from_str(&header_line)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(Manifest { header, records })
}

#[derive(Debug, Default)]
pub struct ValidationReport {
    pub records_checked: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report-only integrity check over a manifest and its referenced files:
/// provenance flags, id uniqueness, round/method consistency with the
/// routing table, mask decodability, and grid agreement between the
/// constructed image and its tri-zone GT.
pub fn validate_manifest(manifest_path: &Path) -> Result<ValidationReport, PipelineError> {
    let manifest = read_manifest(manifest_path)?;
    let base: PathBuf = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut report = ValidationReport::default();
    let mut seen = BTreeSet::new();

    for record in &manifest.records {
        report.records_checked += 1;
        let mut violation = |msg: String| report.violations.push(format!("{}: {msg}", record.id));

        if !seen.insert(record.id.clone()) {
            violation("duplicate id".to_string());
        }
        if record.p_c_provenance != PROVENANCE_SYNTHETIC {
            violation(format!(
                "p_c_provenance must be {PROVENANCE_SYNTHETIC}, got {:?}",
                record.p_c_provenance
            ));
        }
        if record.p_g_provenance != PROVENANCE_REAL {
            violation(format!(
                "p_g_provenance must be {PROVENANCE_REAL}, got {:?}",
                record.p_g_provenance
            ));
        }
        if record.round != manifest.header.round {
            violation(format!("round {} in a {} manifest", record.round, manifest.header.round));
        }
        let expected = route(record.pc_spec, record.pg_spec);
        if expected.method != record.method || expected.round != record.round {
            violation(format!(
                "method/round ({}, {}) disagrees with the routing table ({}, {})",
                record.method, record.round, expected.method, expected.round
            ));
        }
        if record.status == RecordStatus::BackendFailed {
            continue; // failed records persist no rasters
        }
        let m3g = match load_trizone_mask(&base.join(&record.m3g)) {
            Ok(m) => m,
            Err(e) => {
                violation(format!("m3g unreadable: {e}"));
                continue;
            }
        };
        match load_rgb_image(&base.join(&record.p_c)) {
            Ok(p_c) => {
                if p_c.grid() != m3g.grid() {
                    violation("p_c and m3g grids differ".to_string());
                }
            }
            Err(e) => violation(format!("p_c unreadable: {e}")),
        }
        for (field, path) in [("p_g", &record.p_g), ("g_g", &record.g_g)] {
            if let Err(e) = load_rgb_image(&base.join(path)) {
                violation(format!("{field} unreadable: {e}"));
            }
        }
    }
    Ok(report)
}
