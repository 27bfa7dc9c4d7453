//! JSON handlers. Errors are returned as `{code, message, detail}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use combodose_core::designs::{DesignConfig, DesignId};
use combodose_core::history::TrialHistory;
use combodose_core::scenario::ScenarioFile;
use combodose_core::{seeds, CohortRecord, Dose, DoseGrid, Error, StudyConfig};

use crate::session::{Event, SessionView, Store};

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    fn detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no trial `{id}`"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::UnknownDesign { valid, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_design", message)
                    .detail(json!({ "valid": valid }))
            }
            Error::InvalidParameter(_) | Error::ShapeMismatch(_) | Error::Parse(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", message)
            }
            Error::InvalidHistory(_)
            | Error::TooManyDlts { .. }
            | Error::EmptyCohort
            | Error::OutOfGrid { .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_cohort", message)
            }
            Error::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "design_failure", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text = if body.is_empty() {
        &b"{}"[..]
    } else {
        &body[..]
    };
    serde_json::from_slice(text).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("request body: {e}"),
        )
    })
}

/// Trial settings; an absent seed is derived from the trial id.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductSettings {
    pub phi: Option<f64>,
    pub max_n: Option<u32>,
    pub cohort_size: Option<u32>,
    pub early_stop_n: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTrial {
    pub design: Value,
    pub grid: DoseGrid,
    #[serde(default)]
    pub config: ConductSettings,
    #[serde(default)]
    pub scenario: Option<ScenarioFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostCohort {
    pub dose: Dose,
    pub patients: u32,
    pub dlts: u32,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    #[serde(default)]
    pub expected_revision: Option<u64>,
    /// Required to enrol at a dose other than the recommended one.
    #[serde(default)]
    pub override_note: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Undo {
    #[serde(default)]
    pub expected_revision: Option<u64>,
}

pub async fn create_trial(
    State(store): State<Arc<Store>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateTrial = parse_body(&body)?;
    DoseGrid::new(req.grid.j_levels, req.grid.k_levels)?;
    let design = DesignConfig::from_value(req.design)?;
    let d = StudyConfig::default();
    let s = req.config;
    let config = StudyConfig {
        phi: s.phi.unwrap_or(d.phi),
        max_n: s.max_n.unwrap_or(d.max_n),
        cohort_size: s.cohort_size.unwrap_or(d.cohort_size),
        early_stop_n: s.early_stop_n,
        reps: 1,
        seed: s
            .seed
            .unwrap_or_else(|| seeds::splitmix64(uuid::Uuid::new_v4().as_u128() as u64)),
    };
    let mut history = TrialHistory::new(design, req.grid, config);
    history.scenario = req.scenario;
    let session = store.create(history).await?;
    let view = session.lock().await.view().clone();
    Ok((StatusCode::CREATED, Json(view)))
}

pub async fn get_trial(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let session = store
        .get(&id)
        .await
        .ok_or_else(|| ApiError::not_found(&id))?;
    let view = session.lock().await.view().clone();
    Ok(Json(view))
}

fn check_revision(expected: Option<u64>, actual: u64) -> ApiResult<()> {
    match expected {
        Some(e) if e != actual => Err(ApiError::new(
            StatusCode::CONFLICT,
            "revision_conflict",
            format!("trial is at revision {actual}, request expected {e}"),
        )
        .detail(json!({ "revision": actual }))),
        _ => Ok(()),
    }
}

pub async fn post_cohort(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let req: PostCohort = parse_body(&body)?;
    let session = store
        .get(&id)
        .await
        .ok_or_else(|| ApiError::not_found(&id))?;
    let mut s = session.lock().await;
    if let Some(prev) = req
        .idempotency_key
        .as_deref()
        .and_then(|k| s.cached_response(k))
    {
        return Ok(Json(prev.clone()));
    }
    check_revision(req.expected_revision, s.revision)?;
    let view = s.view();
    if view.terminated {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "trial_finished",
            "the trial has ended",
        )
        .detail(json!({ "reason": view.recommendation.decision.reason })));
    }
    if req.patients == 0 || req.dlts > req.patients {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_counts",
            format!("{} DLTs among {} patients", req.dlts, req.patients),
        ));
    }
    let config = &s.history.config;
    let enrolled: u32 = s.history.log.iter().map(|c| c.patients).sum();
    if enrolled + req.patients > config.max_n {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_counts",
            format!(
                "{} more patients would exceed max_n {}",
                req.patients, config.max_n
            ),
        ));
    }
    if !s.history.grid.contains(req.dose) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_dose",
            format!("{} is outside the grid", req.dose),
        ));
    }
    let recommended = view.recommendation.decision.dose();
    let note = req.override_note.filter(|n| !n.trim().is_empty());
    if recommended != Some(req.dose) && note.is_none() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "dose_mismatch",
            format!(
                "recommended dose is {}; give override_note to enrol elsewhere",
                recommended.unwrap()
            ),
        )
        .detail(json!({ "recommended": recommended })));
    }
    let event = Event::Cohort {
        cohort: CohortRecord {
            dose: req.dose,
            patients: req.patients,
            dlts: req.dlts,
        },
        idempotency_key: req.idempotency_key,
        note,
    };
    store.append(&id, &event)?;
    s.apply(&event)?;
    Ok(Json(s.view().clone()))
}

pub async fn undo(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let req: Undo = parse_body(&body)?;
    let session = store
        .get(&id)
        .await
        .ok_or_else(|| ApiError::not_found(&id))?;
    let mut s = session.lock().await;
    check_revision(req.expected_revision, s.revision)?;
    if s.history.log.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "empty_log",
            "no cohort to undo",
        ));
    }
    store.append(&id, &Event::Undo)?;
    s.apply(&Event::Undo)?;
    Ok(Json(s.view().clone()))
}

#[derive(Debug, Serialize)]
pub struct Parameter {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub default: Value,
}

#[derive(Debug, Serialize)]
pub struct CatalogEntry {
    pub id: DesignId,
    pub name: &'static str,
    pub parameters: Vec<Parameter>,
    /// Designs whose prior guesses default to the scenario need explicit
    /// guesses (or a scenario) to run live.
    pub needs_scenario_by_default: bool,
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "optional",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_u64() || n.is_i64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Parameter schemas read off each design's defaults.
pub fn catalog() -> Vec<CatalogEntry> {
    DesignId::ALL
        .into_iter()
        .map(|id| {
            let config = DesignConfig::default_for(id);
            let defaults = serde_json::to_value(&config).expect("design config serializes");
            let parameters = defaults
                .as_object()
                .into_iter()
                .flatten()
                .filter(|(k, _)| k.as_str() != "id")
                .map(|(k, v)| Parameter {
                    name: k.clone(),
                    kind: kind(v),
                    default: v.clone(),
                })
                .collect();
            CatalogEntry {
                id,
                name: id.display_name(),
                parameters,
                needs_scenario_by_default: config.needs_scenario(),
            }
        })
        .collect()
}

pub async fn designs() -> Json<Vec<CatalogEntry>> {
    Json(catalog())
}
