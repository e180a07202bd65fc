//! The progressive two-round quadruplet constructor.
//!
//! Round 1 builds intra-category and any-to-dress quadruplets with the
//! mask-based try-on backend (plus the stretch/shrink mask adjustment
//! for size-mismatched pairs); round 2 builds dress-to-any quadruplets
//! with the round-1-trained model and the tri-zone predictor. Real
//! images only ever land in the ground-truth slot, synthetic images only
//! in the input slot, and every record carries the seed that rebuilds it.

use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{
    BackendError, DenseposeBackend, InpaintBackend, MaskPayload, MockDensepose, MockInpaint,
    MockParse, MockTriZone, MockTryOn, ParseBackend, TriZoneBackend, TryOnBackend, TryOnRequest,
};
use crate::config::RunConfig;
use crate::maskadjust::{shrink_up, stretch_down, AdjustError, ShiftPolicy};
use crate::maskcore::{
    assemble_trizone, bounding_box, extract_class_mask, foreground_mask, mask_union,
    save_rgb_image, save_trizone_mask, BinaryMask, GarmentSpec, IoError, MaskError, RgbImage,
    TriZoneMask, Zone,
};
use crate::routing::{ConstructionMethod, ConstructionPlan, PlannedPair, Round};
use crate::zonealgebra::{imagination_zone_round1, imagination_zone_round2};

pub mod corpus;
mod manifest;

pub use corpus::{make_job, ConstructionJob};
pub use manifest::{
    read_manifest, validate_manifest, Manifest, ManifestHeader, ManifestWriter, QuadrupletRecord,
    RecordStatus, ValidationReport, PROVENANCE_REAL, PROVENANCE_SYNTHETIC,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("mask: {0}")]
    Mask(#[from] MaskError),
    #[error("adjust: {0}")]
    Adjust(#[from] AdjustError),
    #[error("raster i/o: {0}")]
    Raster(#[from] IoError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("job routed to {got}, but this constructor handles {expected}")]
    RoutingMismatch { expected: &'static str, got: ConstructionMethod },
    #[error("round-2 construction requires a round-1-trained try-on backend (set round1_trained)")]
    StageGate,
    #[error("round-2 construction requires a tri-zone backend")]
    MissingTriZoneBackend,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("resume fingerprint mismatch: manifest built with {stored}, current config is {current}")]
    ResumeMismatch { stored: String, current: String },
}

/// The backends one run drives. The tri-zone predictor is optional —
/// it only exists after round-1 training.
pub struct PipelineBackends<'a> {
    pub tryon: &'a dyn TryOnBackend,
    pub inpaint: &'a dyn InpaintBackend,
    pub parse: &'a dyn ParseBackend,
    pub densepose: &'a dyn DenseposeBackend,
    pub trizone: Option<&'a dyn TriZoneBackend>,
}

/// Owned mock set, convenient for tests and `--mock` runs.
pub struct MockBackendSet {
    tryon: MockTryOn,
    inpaint: MockInpaint,
    parse: MockParse,
    densepose: MockDensepose,
    trizone: MockTriZone,
}

impl MockBackendSet {
    pub fn new() -> Self {
        MockBackendSet {
            tryon: MockTryOn,
            inpaint: MockInpaint,
            parse: MockParse,
            densepose: MockDensepose,
            trizone: MockTriZone,
        }
    }

    pub fn as_refs(&self) -> PipelineBackends<'_> {
        PipelineBackends {
            tryon: &self.tryon,
            inpaint: &self.inpaint,
            parse: &self.parse,
            densepose: &self.densepose,
            trizone: Some(&self.trizone),
        }
    }
}

impl Default for MockBackendSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-record seed: first eight bytes of SHA-256(run seed ‖ record id),
/// little-endian. Independent per record, stable across runs.
pub fn record_seed(run_seed: u64, id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(run_seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Densepose part whose lower boundary a stretched mask should reach,
/// for a garment ending at figure row `bottom` (16-row figure bands).
fn stretch_target_part(bottom: u32) -> &'static str {
    if bottom <= 8 {
        crate::backends::PART_TORSO
    } else if bottom <= 12 {
        crate::backends::PART_UPPER_LEG
    } else {
        crate::backends::PART_LOWER_LEG
    }
}

/// Rectangle around the worn garment, expanded by the configured margin
/// and clipped to the grid: the M₂ generation region when no external
/// mask is supplied.
fn generation_region(class_mask: &BinaryMask, margin: u32) -> Option<BinaryMask> {
    let bb = bounding_box(class_mask)?;
    let grid = class_mask.grid();
    let top = bb.top.saturating_sub(margin);
    let left = bb.left.saturating_sub(margin);
    let bottom = (bb.bottom + margin).min(grid.height - 1);
    let right = (bb.right + margin).min(grid.width - 1);
    Some(BinaryMask::from_fn(grid, |r, c| {
        (top..=bottom).contains(&r) && (left..=right).contains(&c)
    }))
}

/// What a constructor produced for one job, before persistence.
#[derive(Debug, Clone)]
pub struct RecordArtifacts {
    pub p_c: RgbImage,
    pub m3g: TriZoneMask,
    pub degenerate: bool,
}

/// Round-1 construction: adjust the generation region if the pair is
/// size-mismatched, run try-on, complete any shrink residual with the
/// inpainting backend, then assemble the GT tri-zone mask from the
/// round-1 imagination formula.
pub fn construct_round1_record(
    job: &ConstructionJob,
    method: ConstructionMethod,
    backends: &PipelineBackends<'_>,
    config: &RunConfig,
    seed: u64,
) -> Result<RecordArtifacts, PipelineError> {
    if !matches!(method, ConstructionMethod::Idm | ConstructionMethod::IdmS) {
        return Err(PipelineError::RoutingMismatch { expected: "IDM/IDM_S", got: method });
    }
    let pm_g = backends.parse.parse_human(&job.p_g)?;
    let garment_class = corpus::garment_class(job.pg_spec);
    let tryon_g = extract_class_mask(&pm_g, garment_class)?;

    let Some(gen) = generation_region(&tryon_g, config.gen_margin) else {
        // nothing recognizable to replace: degenerate pass-through
        let empty = BinaryMask::empty(job.p_g.grid());
        return Ok(RecordArtifacts {
            p_c: job.p_g.clone(),
            m3g: assemble_trizone(&empty, &empty)?,
            degenerate: true,
        });
    };

    let (adjusted, residual) = match method {
        ConstructionMethod::Idm => (gen.clone(), BinaryMask::empty(gen.grid())),
        _ => {
            let target_bottom = corpus::garment_bottom(job.pc_spec);
            let source_bottom = corpus::garment_bottom(job.pg_spec);
            if target_bottom > source_bottom {
                let policy = ShiftPolicy::stretch_down(stretch_target_part(target_bottom), seed);
                let densepose = backends.densepose.densepose(&job.p_g)?;
                let out = stretch_down(&gen, &densepose, &policy)?;
                (out.adjusted, out.residual)
            } else {
                let policy = ShiftPolicy::shrink_up(config.shrink_fraction_range, seed);
                let out = shrink_up(&gen, &policy)?;
                (out.adjusted, out.residual)
            }
        }
    };

    let req = TryOnRequest::new(
        job.p_g.clone(),
        job.g_c.clone(),
        MaskPayload::Binary(adjusted.clone()),
    )?;
    let generated = backends.tryon.tryon(&req)?;
    let p_c = if residual.is_empty() {
        generated
    } else {
        backends.inpaint.inpaint(&generated, &residual)?
    };

    let fg_c = foreground_mask(&backends.parse.parse_human(&p_c)?);
    // the area regenerated during construction: the adjusted region plus
    // whatever the shrink carved out and inpainting re-completed
    let gen_for_formula = mask_union(&adjusted, &residual)?;
    let imagi = imagination_zone_round1(&gen_for_formula, &fg_c, &tryon_g)?;
    let m3g = assemble_trizone(&tryon_g, &imagi)?;
    Ok(RecordArtifacts { p_c, m3g, degenerate: tryon_g.is_empty() })
}

/// Round-2 construction: the tri-zone predictor proposes the forward
/// zones, the round-1-trained try-on backend constructs the image, and
/// the GT mask follows the round-2 imagination formula.
pub fn construct_round2_record(
    job: &ConstructionJob,
    method: ConstructionMethod,
    backends: &PipelineBackends<'_>,
    config: &RunConfig,
) -> Result<RecordArtifacts, PipelineError> {
    if method != ConstructionMethod::CrossVton {
        return Err(PipelineError::RoutingMismatch { expected: "CROSSVTON", got: method });
    }
    if !config.round1_trained {
        return Err(PipelineError::StageGate);
    }
    let trizone = backends.trizone.ok_or(PipelineError::MissingTriZoneBackend)?;

    let m3p = trizone.predict_trizone(&job.p_g, &job.g_c)?;
    let tryon_p = m3p.zone_mask(Zone::Tryon);
    let imagi_p = m3p.zone_mask(Zone::Imagi);
    let prediction_empty = tryon_p.is_empty() && imagi_p.is_empty();

    let req =
        TryOnRequest::new(job.p_g.clone(), job.g_c.clone(), MaskPayload::TriZone(m3p))?;
    let p_c = backends.tryon.tryon(&req)?;

    let pm_g = backends.parse.parse_human(&job.p_g)?;
    let tryon_g = extract_class_mask(&pm_g, corpus::garment_class(job.pg_spec))?;
    let fg_c = foreground_mask(&backends.parse.parse_human(&p_c)?);
    let imagi = imagination_zone_round2(
        &tryon_p,
        &imagi_p,
        &fg_c,
        &tryon_g,
        config.round2_parenthesization,
    )?;
    let m3g = assemble_trizone(&tryon_g, &imagi)?;
    Ok(RecordArtifacts { p_c, m3g, degenerate: prediction_empty || tryon_g.is_empty() })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Stop after writing this many records (simulated interruption).
    pub stop_after: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub round1_manifest: Option<PathBuf>,
    pub round2_manifest: Option<PathBuf>,
    pub records_written: usize,
    pub records_skipped: usize,
    pub failures: usize,
    /// N/A pairs rejected at planning time.
    pub rejected: usize,
    pub threshold_exceeded: bool,
    /// Execution order, for schedule invariants: round-1 entries always
    /// precede round-2 entries.
    pub trace: Vec<(Round, String)>,
    pub stopped_early: bool,
}

/// Executes a plan over the corpus generator: every round-1 job strictly
/// before any round-2 job, one manifest per round, per-record seeds
/// derived from the run seed, incremental writes, and resume that skips
/// completed ids. Backend failures become `BackendFailed` records, never
/// a crash; the run only counts as failed when the failure ratio
/// exceeds the configured threshold.
pub fn run(
    plan: &ConstructionPlan,
    backends: &PipelineBackends<'_>,
    config: &RunConfig,
    options: &RunOptions,
) -> Result<RunReport, PipelineError> {
    if !plan.round2.is_empty() && !config.round1_trained {
        return Err(PipelineError::StageGate);
    }
    if !plan.round2.is_empty() && backends.trizone.is_none() {
        return Err(PipelineError::MissingTriZoneBackend);
    }

    let records_dir = config.output_dir.join("records");
    std::fs::create_dir_all(&records_dir)?;
    let fingerprint = config.fingerprint();

    let mut report = RunReport {
        round1_manifest: None,
        round2_manifest: None,
        records_written: 0,
        records_skipped: 0,
        failures: 0,
        rejected: plan.rejected.len(),
        threshold_exceeded: false,
        trace: Vec::new(),
        stopped_early: false,
    };

    let rounds: [(Round, &[PlannedPair], &str); 2] = [
        (Round::Round1, &plan.round1, "manifest.round1.jsonl"),
        (Round::Round2, &plan.round2, "manifest.round2.jsonl"),
    ];
    let mut global_index = 0usize;
    'rounds: for (round, jobs, file_name) in rounds {
        if jobs.is_empty() {
            global_index += jobs.len();
            continue;
        }
        let path = config.output_dir.join(file_name);
        let header = ManifestHeader { round, config_fingerprint: fingerprint.clone() };
        let completed: std::collections::BTreeSet<String> = if options.resume && path.exists() {
            read_manifest(&path)?.records.into_iter().map(|r| r.id).collect()
        } else {
            Default::default()
        };
        let mut writer = if options.resume && path.exists() {
            ManifestWriter::append(&path, &header)?
        } else {
            ManifestWriter::create(&path, &header)?
        };
        match round {
            Round::Round1 => report.round1_manifest = Some(path.clone()),
            _ => report.round2_manifest = Some(path.clone()),
        }

        for planned in jobs {
            let job = make_job(global_index, planned.pc, planned.pg);
            global_index += 1;
            if completed.contains(&job.id) {
                report.records_skipped += 1;
                continue;
            }
            if options.stop_after == Some(report.records_written) {
                report.stopped_early = true;
                break 'rounds;
            }
            let seed = record_seed(config.seed, &job.id);
            report.trace.push((round, job.id.clone()));

            let outcome = match round {
                Round::Round1 => {
                    construct_round1_record(&job, planned.decision.method, backends, config, seed)
                }
                _ => construct_round2_record(&job, planned.decision.method, backends, config),
            };
            let record = match outcome {
                Ok(artifacts) => {
                    persist_record(&job, planned, round, seed, &artifacts, config)?
                }
                Err(PipelineError::Backend(_)) => {
                    report.failures += 1;
                    failed_record(&job, planned, round, seed)
                }
                Err(other) => return Err(other),
            };
            writer.write_record(&record)?;
            report.records_written += 1;
        }
    }

    let attempted = report.records_written;
    if attempted > 0 {
        let ratio = report.failures as f64 / attempted as f64;
        report.threshold_exceeded = ratio > config.failure_threshold;
    }
    Ok(report)
}

fn persist_record(
    job: &ConstructionJob,
    planned: &PlannedPair,
    round: Round,
    seed: u64,
    artifacts: &RecordArtifacts,
    config: &RunConfig,
) -> Result<QuadrupletRecord, PipelineError> {
    let rel = |suffix: &str| format!("records/{}.{suffix}.png", job.id);
    save_rgb_image(&artifacts.p_c, &config.output_dir.join(rel("p_c")))?;
    save_rgb_image(&job.p_g, &config.output_dir.join(rel("p_g")))?;
    save_rgb_image(&job.g_g, &config.output_dir.join(rel("g_g")))?;
    save_trizone_mask(&artifacts.m3g, &config.output_dir.join(rel("m3g")))?;
    Ok(QuadrupletRecord {
        id: job.id.clone(),
        round,
        method: planned.decision.method,
        pc_spec: job.pc_spec,
        pg_spec: job.pg_spec,
        p_c: rel("p_c"),
        p_g: rel("p_g"),
        g_g: rel("g_g"),
        m3g: rel("m3g"),
        p_c_provenance: PROVENANCE_SYNTHETIC.to_string(),
        p_g_provenance: PROVENANCE_REAL.to_string(),
        seed,
        status: if artifacts.degenerate { RecordStatus::Degenerate } else { RecordStatus::Ok },
    })
}

fn failed_record(
    job: &ConstructionJob,
    planned: &PlannedPair,
    round: Round,
    seed: u64,
) -> QuadrupletRecord {
    QuadrupletRecord {
        id: job.id.clone(),
        round,
        method: planned.decision.method,
        pc_spec: job.pc_spec,
        pg_spec: job.pg_spec,
        p_c: String::new(),
        p_g: String::new(),
        g_g: String::new(),
        m3g: String::new(),
        p_c_provenance: PROVENANCE_SYNTHETIC.to_string(),
        p_g_provenance: PROVENANCE_REAL.to_string(),
        seed,
        status: RecordStatus::BackendFailed,
    }
}

/// Garment spec of a fine CCGD-style category token (already handled by
/// `GarmentSpec::parse`); re-exported here for plan construction.
pub fn parse_spec(token: &str) -> Result<GarmentSpec, String> {
    GarmentSpec::parse(token)
}

#[cfg(test)]
mod tests;
