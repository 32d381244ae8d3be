//! Typed async client for the `glf` service.

use glf::api::{
    ApiError, AuditRequest, BenchRequest, BenchResponse, BoundsRequest, BoundsResponse, FitRequest, FitResponse,
    LearnRequest, LearnResponse, PredictRequest, PredictResponse, SynthRequest, SynthResponse,
};
use glf::experiment::AuditReport;
use glf::GlfError;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service ran the request and reported a library error.
    #[error("{0}")]
    Api(GlfError),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response ({status}): {body}")]
    Decode { status: u16, body: String },
}

impl ClientError {
    /// 2 for validation errors, 3 for numerical failures, 1 when the service
    /// could not be reached or answered nonsense.
    pub fn exit_code(&self) -> i32 {
        match self {
            ClientError::Api(e) => e.exit_code(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Client { base, http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let r = self.http.get(format!("{}/health", self.base)).send().await.map_err(transport)?;
        if r.status().is_success() {
            Ok(())
        } else {
            Err(ClientError::Decode { status: r.status().as_u16(), body: r.text().await.unwrap_or_default() })
        }
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(&self, op: &str, req: &Req) -> Result<Resp, ClientError> {
        let r = self.http.post(format!("{}/v1/{op}", self.base)).json(req).send().await.map_err(transport)?;
        let status = r.status();
        let bytes = r.bytes().await.map_err(transport)?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
                status: status.as_u16(),
                body: format!("{e}"),
            });
        }
        match serde_json::from_slice::<ApiError>(&bytes) {
            Ok(e) => Err(ClientError::Api(e.into())),
            Err(_) => Err(ClientError::Decode {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&bytes).into_owned(),
            }),
        }
    }

    pub async fn synth(&self, req: &SynthRequest) -> Result<SynthResponse, ClientError> {
        self.post("synth", req).await
    }

    pub async fn bounds(&self, req: &BoundsRequest) -> Result<BoundsResponse, ClientError> {
        self.post("bounds", req).await
    }

    pub async fn fit(&self, req: &FitRequest) -> Result<FitResponse, ClientError> {
        self.post("fit", req).await
    }

    pub async fn predict(&self, req: &PredictRequest) -> Result<PredictResponse, ClientError> {
        self.post("predict", req).await
    }

    pub async fn learn(&self, req: &LearnRequest) -> Result<LearnResponse, ClientError> {
        self.post("learn", req).await
    }

    pub async fn audit(&self, req: &AuditRequest) -> Result<AuditReport, ClientError> {
        self.post("audit", req).await
    }

    pub async fn bench(&self, req: &BenchRequest) -> Result<BenchResponse, ClientError> {
        self.post("bench", req).await
    }
}

fn transport(e: reqwest::Error) -> ClientError {
    ClientError::Transport(e.to_string())
}
