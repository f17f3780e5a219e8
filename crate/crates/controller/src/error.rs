use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use testbed_core::emulator::SpecError;
use testbed_core::topo::TopoError;
use thiserror::Error;

use crate::state::ExperimentState;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("request body is empty")]
    EmptyBody,
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Topology(#[from] TopoError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("no topology with id {0}")]
    UnknownTopology(String),
    #[error("no experiment with id {0}")]
    UnknownExperiment(String),
    #[error("no link between {0} and {1}")]
    UnknownLink(String, String),
    #[error("experiment is {0}")]
    NotDone(ExperimentState),
    #[error("worker is gone")]
    WorkerGone,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::EmptyBody => StatusCode::BAD_REQUEST,
            ApiError::Malformed(_) | ApiError::Topology(_) | ApiError::Spec(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::UnknownTopology(_)
            | ApiError::UnknownExperiment(_)
            | ApiError::UnknownLink(..) => StatusCode::NOT_FOUND,
            ApiError::NotDone(_) => StatusCode::CONFLICT,
            ApiError::WorkerGone => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    /// Stable machine-readable error name; topology and spec errors pass
    /// their own kinds through.
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::EmptyBody => "empty_body",
            ApiError::Malformed(_) => "malformed",
            ApiError::Topology(e) => e.kind(),
            ApiError::Spec(e) => e.kind(),
            ApiError::UnknownTopology(_) => "unknown_topology",
            ApiError::UnknownExperiment(_) => "unknown_experiment",
            ApiError::UnknownLink(..) => "unknown_link",
            ApiError::NotDone(_) => "not_done",
            ApiError::WorkerGone => "worker_gone",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
