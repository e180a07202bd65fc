//! Uniform interfaces to the learned models the pipeline orchestrates.
//!
//! Each capability (try-on, inpainting, human parsing, densepose,
//! tri-zone prediction, reasonableness judging) sits behind a small
//! trait with two implementations: a deterministic mock used for tests
//! and offline runs, and an HTTP client for real model servers. Mocks
//! are pure functions of their inputs, so runs built on them are
//! byte-identical across invocations and platforms.

use std::time::Duration;

use thiserror::Error;

use crate::maskcore::{BinaryMask, ImageGrid, LabelMap, MaskError, RgbImage, TriZoneMask};

mod http;
mod mock;

pub use http::HttpBackend;
pub use mock::{
    MockDensepose, MockInpaint, MockParse, MockTriZone, MockTryOn, ScriptedJudge, ScriptedStep,
    CLASS_BACKGROUND, CLASS_DRESS, CLASS_FACE, CLASS_LOWER, CLASS_SKIN, CLASS_UPPER,
    COLOR_BACKGROUND, COLOR_DRESS_A, COLOR_DRESS_B, COLOR_FACE, COLOR_LOWER_A, COLOR_LOWER_B,
    COLOR_SKIN, COLOR_UPPER_A, COLOR_UPPER_B, GARMENT_CLASSES, PART_HEAD, PART_LOWER_LEG,
    PART_TORSO, PART_UPPER_LEG,
};

pub mod protocol;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote failure: {0}")]
    RemoteFailure(String),
    #[error("unparseable judge reply: {0:?}")]
    UnparseableReply(String),
    #[error("{0}")]
    Mask(#[from] MaskError),
    #[error("scripted backend exhausted after {0} step(s)")]
    ScriptExhausted(usize),
}

/// Where to reach a remote model server and how patiently.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub retry_limit: u32,
    pub auth_token: Option<String>,
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        BackendEndpoint {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            retry_limit: 2,
            auth_token: None,
        }
    }

    /// Applies `CROSSVTON_BASE_URL`, `CROSSVTON_AUTH_TOKEN`,
    /// `CROSSVTON_TIMEOUT_SECS`, and `CROSSVTON_RETRY_LIMIT` from the
    /// environment over the configured values.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var("CROSSVTON_BASE_URL") {
            self.base_url = url;
        }
        if let Ok(token) = std::env::var("CROSSVTON_AUTH_TOKEN") {
            self.auth_token = Some(token);
        }
        if let Ok(secs) = std::env::var("CROSSVTON_TIMEOUT_SECS") {
            if let Ok(secs) = secs.parse::<f64>() {
                if secs > 0.0 {
                    self.timeout = Duration::from_secs_f64(secs);
                }
            }
        }
        if let Ok(n) = std::env::var("CROSSVTON_RETRY_LIMIT") {
            if let Ok(n) = n.parse::<u32>() {
                self.retry_limit = n;
            }
        }
        self
    }
}

/// What kind of mask accompanies a try-on request. `None` is the
/// mask-free ablation path.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskPayload {
    None,
    Binary(BinaryMask),
    TriZone(TriZoneMask),
}

#[derive(Debug, Clone)]
pub struct TryOnRequest {
    pub model_image: RgbImage,
    pub garment_image: RgbImage,
    pub mask: MaskPayload,
}

impl TryOnRequest {
    pub fn new(
        model_image: RgbImage,
        garment_image: RgbImage,
        mask: MaskPayload,
    ) -> Result<Self, MaskError> {
        let grid = model_image.grid();
        match &mask {
            MaskPayload::None => {}
            MaskPayload::Binary(m) => ImageGrid::check(grid, m.grid())?,
            MaskPayload::TriZone(m) => ImageGrid::check(grid, m.grid())?,
        }
        Ok(TryOnRequest { model_image, garment_image, mask })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Reasonable,
    Unreasonable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub verdict: Verdict,
    pub raw_reply: String,
}

/// Verdict rule: the reply, lowercased and trimmed, is Reasonable iff it
/// contains "reasonable" and does not contain "unreasonable"; a reply
/// containing "unreasonable" is Unreasonable; anything else is
/// unparseable. Case and surrounding prose are tolerated because real
/// MLLM replies are rarely single tokens.
pub fn parse_verdict(raw_reply: &str) -> Result<JudgeVerdict, BackendError> {
    let normalized = raw_reply.trim().to_lowercase();
    let verdict = if normalized.contains("unreasonable") {
        Verdict::Unreasonable
    } else if normalized.contains("reasonable") {
        Verdict::Reasonable
    } else {
        return Err(BackendError::UnparseableReply(raw_reply.to_string()));
    };
    Ok(JudgeVerdict { verdict, raw_reply: raw_reply.to_string() })
}

pub trait TryOnBackend {
    fn tryon(&self, req: &TryOnRequest) -> Result<RgbImage, BackendError>;
    /// Short provenance tag recorded in pipeline logs (e.g. "mock:tryon").
    fn descriptor(&self) -> String;
}

pub trait InpaintBackend {
    fn inpaint(&self, image: &RgbImage, region: &BinaryMask) -> Result<RgbImage, BackendError>;
    fn descriptor(&self) -> String;
}

pub trait ParseBackend {
    fn parse_human(&self, image: &RgbImage) -> Result<LabelMap, BackendError>;
    fn descriptor(&self) -> String;
}

pub trait DenseposeBackend {
    fn densepose(&self, image: &RgbImage) -> Result<LabelMap, BackendError>;
    fn descriptor(&self) -> String;
}

pub trait TriZoneBackend {
    fn predict_trizone(
        &self,
        model_image: &RgbImage,
        garment_image: &RgbImage,
    ) -> Result<TriZoneMask, BackendError>;
    fn descriptor(&self) -> String;
}

pub trait JudgeBackend {
    fn judge(&self, triptych: &RgbImage, prompt: &str) -> Result<JudgeVerdict, BackendError>;
    fn descriptor(&self) -> String;
}
