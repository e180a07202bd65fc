//! Blocking HTTP client implementing every backend trait against a
//! remote model server speaking the protocol in `protocol`.
//!
//! Retry policy: timeouts, connection errors, and 5xx responses are
//! transient and retried up to `retry_limit` extra attempts (so
//! `retry_limit + 1` attempts total); 4xx responses fail fast. The
//! request body is built once and resent unchanged, with a
//! content-derived idempotency key attached so a server can deduplicate
//! replayed work.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::maskcore::{BinaryMask, LabelMap, RgbImage, TriZoneMask};

use super::protocol::{
    binary_mask_to_field, image_from_field, image_to_field, label_map_from_reply,
    mask_payload_to_fields, trizone_from_field, ImageWire, InpaintWire, JudgeReply, JudgeWire,
    LabelMapReply, TriZoneReply, TriZoneWire, TryOnWire,
};
use super::{
    parse_verdict, BackendEndpoint, BackendError, DenseposeBackend, InpaintBackend, JudgeBackend,
    JudgeVerdict, ParseBackend, TriZoneBackend, TryOnBackend, TryOnRequest,
};

pub struct HttpBackend {
    endpoint: BackendEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .connect_timeout(endpoint.timeout)
            .build()
            .map_err(|e| BackendError::Protocol(format!("client build: {e}")))?;
        Ok(HttpBackend { endpoint, client })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let payload = serde_json::to_vec(body)
            .map_err(|e| BackendError::Protocol(format!("encode request: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(path.as_bytes());
        hasher.update(&payload);
        let key: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let url = format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), path);

        let max_attempts = self.endpoint.retry_limit + 1;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut req = self
                .client
                .post(&url)
                .header("content-type", "application/json")
                .header("idempotency-key", &key)
                .body(payload.clone());
            if let Some(token) = &self.endpoint.auth_token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json().map_err(|e| {
                            BackendError::Protocol(format!("decode response from {path}: {e}"))
                        });
                    }
                    if status.is_server_error() && attempts < max_attempts {
                        continue;
                    }
                    return Err(BackendError::RemoteFailure(format!("{status} from {path}")));
                }
                Err(e) if e.is_timeout() || e.is_connect() => {
                    if attempts < max_attempts {
                        continue;
                    }
                    return Err(BackendError::Timeout { attempts });
                }
                Err(e) => return Err(BackendError::Protocol(e.to_string())),
            }
        }
    }

    fn tag(&self, capability: &str) -> String {
        format!("http:{}{}", self.endpoint.base_url.trim_end_matches('/'), capability)
    }
}

impl TryOnBackend for HttpBackend {
    fn tryon(&self, req: &TryOnRequest) -> Result<RgbImage, BackendError> {
        let (mask_kind, mask) = mask_payload_to_fields(&req.mask);
        let wire = TryOnWire {
            model_image: image_to_field(&req.model_image),
            garment_image: image_to_field(&req.garment_image),
            mask_kind,
            mask,
        };
        let reply: ImageWire = self.post("/tryon", &wire)?;
        image_from_field(&reply.image)
    }

    fn descriptor(&self) -> String {
        self.tag("/tryon")
    }
}

impl InpaintBackend for HttpBackend {
    fn inpaint(&self, image: &RgbImage, region: &BinaryMask) -> Result<RgbImage, BackendError> {
        crate::maskcore::ImageGrid::check(image.grid(), region.grid())?;
        let wire = InpaintWire {
            image: image_to_field(image),
            region: binary_mask_to_field(region),
        };
        let reply: ImageWire = self.post("/inpaint", &wire)?;
        image_from_field(&reply.image)
    }

    fn descriptor(&self) -> String {
        self.tag("/inpaint")
    }
}

impl ParseBackend for HttpBackend {
    fn parse_human(&self, image: &RgbImage) -> Result<LabelMap, BackendError> {
        let wire = ImageWire { image: image_to_field(image) };
        let reply: LabelMapReply = self.post("/parse", &wire)?;
        label_map_from_reply(&reply)
    }

    fn descriptor(&self) -> String {
        self.tag("/parse")
    }
}

impl DenseposeBackend for HttpBackend {
    fn densepose(&self, image: &RgbImage) -> Result<LabelMap, BackendError> {
        let wire = ImageWire { image: image_to_field(image) };
        let reply: LabelMapReply = self.post("/densepose", &wire)?;
        label_map_from_reply(&reply)
    }

    fn descriptor(&self) -> String {
        self.tag("/densepose")
    }
}

impl TriZoneBackend for HttpBackend {
    fn predict_trizone(
        &self,
        model_image: &RgbImage,
        garment_image: &RgbImage,
    ) -> Result<TriZoneMask, BackendError> {
        let wire = TriZoneWire {
            model_image: image_to_field(model_image),
            garment_image: image_to_field(garment_image),
        };
        let reply: TriZoneReply = self.post("/trizone", &wire)?;
        trizone_from_field(&reply.mask)
    }

    fn descriptor(&self) -> String {
        self.tag("/trizone")
    }
}

impl JudgeBackend for HttpBackend {
    fn judge(&self, triptych: &RgbImage, prompt: &str) -> Result<JudgeVerdict, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::Protocol("empty judge prompt".to_string()));
        }
        let wire = JudgeWire { image: image_to_field(triptych), prompt: prompt.to_string() };
        let reply: JudgeReply = self.post("/judge", &wire)?;
        parse_verdict(&reply.reply)
    }

    fn descriptor(&self) -> String {
        self.tag("/judge")
    }
}
