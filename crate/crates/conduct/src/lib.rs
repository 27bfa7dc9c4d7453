//! Live trial conduct over HTTP.
//!
//! Each trial is a session holding a design, its settings and seed, and the
//! cohort log. Every accepted mutation is appended to the session's JSON-lines
//! file before it is applied, so restarting the service replays to the same
//! state and recommendation.

use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub mod api;
pub mod session;

pub use session::{Event, Session, SessionView, Store};

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/designs", get(api::designs))
        .route("/api/trials", post(api::create_trial))
        .route("/api/trials/{id}", get(api::get_trial))
        .route("/api/trials/{id}/cohorts", post(api::post_cohort))
        .route("/api/trials/{id}/undo", post(api::undo))
        .with_state(store)
}
