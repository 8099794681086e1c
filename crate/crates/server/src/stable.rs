use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use codesign_core::session::to_stable_json;
use serde::Serialize;

/// JSON body with sorted keys and six-significant-digit floats, so that
/// identical project state always yields identical bytes.
pub struct Stable<T>(pub StatusCode, pub T);

impl<T: Serialize> IntoResponse for Stable<T> {
    fn into_response(self) -> Response {
        match to_stable_json(&self.1) {
            Ok(body) => (self.0, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
            Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        }
    }
}
