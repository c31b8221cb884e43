use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use jeaudit_core::report::{rank_entries, LatentExport, LatentRecord};
use jeaudit_core::scoring::{anomaly_score, ScoreRecord};
use serde::{Deserialize, Serialize};

/// Shared read-only snapshot of one export.
struct Snapshot {
    export: LatentExport,
    by_id: BTreeMap<u64, usize>,
}

#[derive(Debug, Serialize)]
pub struct MetaResponse {
    pub n: usize,
    pub tau: usize,
    pub alpha_default: f64,
    /// Entry count per class; unlabeled entries count as "unlabeled".
    pub classes: BTreeMap<String, usize>,
    pub centers: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
struct AlphaQuery {
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct EntriesQuery {
    alpha: Option<f64>,
    mode: Option<usize>,
    top: Option<usize>,
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(export: LatentExport) -> Router {
    let by_id = export.records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let state = Arc::new(Snapshot { export, by_id });
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/latent", get(latent))
        .route("/api/entries", get(entries))
        .route("/api/entry/{id}", get(entry))
        .with_state(state)
}

pub async fn serve(export: LatentExport, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} records on http://{}", export.records.len(), listener.local_addr()?);
    axum::serve(listener, router(export)).await
}

async fn meta(State(s): State<Arc<Snapshot>>) -> Json<MetaResponse> {
    let mut classes = BTreeMap::new();
    for r in &s.export.records {
        let name = r.label.map_or("unlabeled".to_string(), |l| l.to_string());
        *classes.entry(name).or_insert(0) += 1;
    }
    Json(MetaResponse {
        n: s.export.records.len(),
        tau: s.export.meta.tau,
        alpha_default: s.export.meta.alpha_default,
        classes,
        centers: s.export.meta.centers.clone(),
    })
}

async fn latent(State(s): State<Arc<Snapshot>>, Query(q): Query<AlphaQuery>) -> ApiResult<Vec<LatentRecord>> {
    Ok(Json(blended(&s, q.alpha)?))
}

async fn entries(State(s): State<Arc<Snapshot>>, Query(q): Query<EntriesQuery>) -> ApiResult<Vec<LatentRecord>> {
    if let Some(mode) = q.mode {
        if mode == 0 || mode > s.export.meta.tau {
            return Err(ApiError(
                StatusCode::BAD_REQUEST,
                format!("mode {mode} outside 1..={}", s.export.meta.tau),
            ));
        }
    }
    let records = blended(&s, q.alpha)?;
    let ranked = rank_entries(&score_records(&records), q.top.unwrap_or(records.len()), q.mode);
    Ok(Json(ranked.iter().map(|r| records[s.by_id[&r.id]].clone()).collect()))
}

async fn entry(
    State(s): State<Arc<Snapshot>>,
    Path(id): Path<u64>,
    Query(q): Query<AlphaQuery>,
) -> ApiResult<LatentRecord> {
    let Some(&index) = s.by_id.get(&id) else {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("no entry with id {id}")));
    };
    let alpha = resolve_alpha(&s, q.alpha)?;
    let mut record = s.export.records[index].clone();
    record.score = blend(&record, alpha)?;
    Ok(Json(record))
}

fn resolve_alpha(s: &Snapshot, alpha: Option<f64>) -> Result<f64, ApiError> {
    let alpha = alpha.unwrap_or(s.export.meta.alpha_default);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(alpha)
}

fn blend(record: &LatentRecord, alpha: f64) -> Result<f64, ApiError> {
    anomaly_score(&[record.re], &[record.md], alpha)
        .map(|v| v[0])
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

/// Every record with AS recomputed for `alpha`.
fn blended(s: &Snapshot, alpha: Option<f64>) -> Result<Vec<LatentRecord>, ApiError> {
    let alpha = resolve_alpha(s, alpha)?;
    let re: Vec<f64> = s.export.records.iter().map(|r| r.re).collect();
    let md: Vec<f64> = s.export.records.iter().map(|r| r.md).collect();
    let scores = anomaly_score(&re, &md, alpha).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(s.export
        .records
        .iter()
        .zip(scores)
        .map(|(r, score)| LatentRecord { score, ..r.clone() })
        .collect())
}

fn score_records(records: &[LatentRecord]) -> Vec<ScoreRecord> {
    records
        .iter()
        .map(|r| ScoreRecord {
            id: r.id,
            closest_mode: r.mode,
            divergence: f64::NAN,
            md: r.md,
            error: f64::NAN,
            re: r.re,
            score: r.score,
            latent: r.z,
            label: r.label,
        })
        .collect()
}
