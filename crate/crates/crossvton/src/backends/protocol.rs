//! Wire schema for the HTTP backends.
//!
//! One POST endpoint per capability; request and response bodies are
//! JSON with raster payloads as base64-encoded PNG. Field names are
//! frozen — see PROTOCOL.md at the repository root.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::maskcore::{
    decode_binary_mask_png, decode_labels_png, decode_rgb_png, decode_trizone_png,
    encode_binary_mask_png, encode_rgb_png, encode_trizone_png, BinaryMask, LabelMap, RgbImage,
    TriZoneMask,
};

use super::{BackendError, MaskPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireMaskKind {
    None,
    Binary,
    Trizone,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TryOnWire {
    pub model_image: String,
    pub garment_image: String,
    pub mask_kind: WireMaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InpaintWire {
    pub image: String,
    pub region: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImageWire {
    pub image: String,
}

/// Response for /parse and /densepose: label raster plus its palette,
/// keyed by the label index rendered as a decimal string.
#[derive(Debug, Serialize, Deserialize)]
pub struct LabelMapReply {
    pub labels: String,
    pub palette: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TriZoneWire {
    pub model_image: String,
    pub garment_image: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TriZoneReply {
    pub mask: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgeWire {
    pub image: String,
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgeReply {
    pub reply: String,
}

pub fn image_to_field(img: &RgbImage) -> String {
    BASE64.encode(encode_rgb_png(img))
}

pub fn image_from_field(field: &str) -> Result<RgbImage, BackendError> {
    let bytes = BASE64
        .decode(field)
        .map_err(|e| BackendError::Protocol(format!("bad base64 image field: {e}")))?;
    decode_rgb_png(&bytes).map_err(|e| BackendError::Protocol(format!("bad png payload: {e}")))
}

pub fn binary_mask_to_field(mask: &BinaryMask) -> String {
    BASE64.encode(encode_binary_mask_png(mask))
}

pub fn binary_mask_from_field(field: &str) -> Result<BinaryMask, BackendError> {
    let bytes = BASE64
        .decode(field)
        .map_err(|e| BackendError::Protocol(format!("bad base64 mask field: {e}")))?;
    decode_binary_mask_png(&bytes)
        .map_err(|e| BackendError::Protocol(format!("bad mask payload: {e}")))
}

pub fn trizone_to_field(mask: &TriZoneMask) -> String {
    BASE64.encode(encode_trizone_png(mask))
}

pub fn trizone_from_field(field: &str) -> Result<TriZoneMask, BackendError> {
    let bytes = BASE64
        .decode(field)
        .map_err(|e| BackendError::Protocol(format!("bad base64 mask field: {e}")))?;
    decode_trizone_png(&bytes)
        .map_err(|e| BackendError::Protocol(format!("bad tri-zone payload: {e}")))
}

pub fn label_map_from_reply(reply: &LabelMapReply) -> Result<LabelMap, BackendError> {
    let bytes = BASE64
        .decode(&reply.labels)
        .map_err(|e| BackendError::Protocol(format!("bad base64 labels field: {e}")))?;
    let mut palette = BTreeMap::new();
    for (key, name) in &reply.palette {
        let label: u8 = key
            .parse()
            .map_err(|_| BackendError::Protocol(format!("bad palette key {key:?}")))?;
        palette.insert(label, name.clone());
    }
    decode_labels_png(&bytes, palette)
        .map_err(|e| BackendError::Protocol(format!("bad label payload: {e}")))
}

pub fn label_map_to_reply(map: &LabelMap) -> LabelMapReply {
    LabelMapReply {
        labels: BASE64.encode(crate::maskcore::encode_labels_png(map)),
        palette: map
            .palette()
            .iter()
            .map(|(label, name)| (label.to_string(), name.clone()))
            .collect(),
    }
}

pub fn mask_payload_to_fields(mask: &MaskPayload) -> (WireMaskKind, Option<String>) {
    match mask {
        MaskPayload::None => (WireMaskKind::None, None),
        MaskPayload::Binary(m) => (WireMaskKind::Binary, Some(binary_mask_to_field(m))),
        MaskPayload::TriZone(m) => (WireMaskKind::Trizone, Some(trizone_to_field(m))),
    }
}
