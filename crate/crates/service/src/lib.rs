//! HTTP survey service. Respondents answer the BYO question, then play a
//! single-elimination choice tournament. Every accepted answer is appended to
//! a per-study event log before it is acknowledged; completed sessions are
//! also written to `records.jsonl` in the format the analysis tools read.
//!
//! Layout on disk: `<data_dir>/<study>/events.jsonl` and
//! `<data_dir>/<study>/records.jsonl`. The records file is derived and is
//! regenerated from the event log at startup.

pub mod api;
pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use acbc_core::io::design_to_json;
use acbc_core::SurveyDesign;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::Mutex;

use api::{parse_create_request, parse_response_request, SessionView};
use error::{ApiError, OpenError};
use session::{Event, Prepared, Session};
use store::{append_record, write_records_file, EventLog};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const MAX_KEY_LEN: usize = 128;

struct Study {
    design: SurveyDesign,
    design_json: String,
    records_path: PathBuf,
    log: Mutex<EventLog>,
}

pub struct Service {
    studies: HashMap<String, Arc<Study>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

pub fn valid_study_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn corrupt(path: &Path, line: usize, message: impl Into<String>) -> OpenError {
    OpenError::Corrupt {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

impl Service {
    /// Opens every study under `data_dir`, replaying its event log.
    pub fn open(data_dir: &Path, studies: Vec<(String, SurveyDesign)>) -> Result<Service, OpenError> {
        let mut study_map = HashMap::new();
        let mut sessions = HashMap::new();
        for (id, design) in studies {
            if !valid_study_id(&id) {
                return Err(OpenError::StudyId(id));
            }
            let dir = data_dir.join(&id);
            fs::create_dir_all(&dir).map_err(|source| OpenError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            let events_path = dir.join("events.jsonl");
            let (log, events) = EventLog::open(&events_path)?;

            let mut local: HashMap<String, Session> = HashMap::new();
            let mut completed = Vec::new();
            for (i, rec) in events.into_iter().enumerate() {
                let line = i + 1;
                match rec.event {
                    Event::SessionCreated {
                        population_tag,
                        seed,
                        created_at,
                    } => {
                        if local.contains_key(&rec.session_id) || sessions.contains_key(&rec.session_id) {
                            return Err(corrupt(&events_path, line, format!("duplicate session {}", rec.session_id)));
                        }
                        let s = Session::new(rec.session_id.clone(), id.clone(), population_tag, seed, created_at);
                        local.insert(rec.session_id, s);
                    }
                    Event::Answered {
                        step,
                        idempotency_key,
                        request,
                        response,
                    } => {
                        let s = local
                            .get_mut(&rec.session_id)
                            .ok_or_else(|| corrupt(&events_path, line, format!("unknown session {}", rec.session_id)))?;
                        s.transition(&step).map_err(|m| corrupt(&events_path, line, m))?;
                        s.remember(idempotency_key, request, response);
                        if s.phase() == api::Phase::Complete {
                            completed.push(rec.session_id.clone());
                        }
                    }
                }
            }
            let records: Vec<_> = completed.iter().filter_map(|sid| local[sid].record()).collect();
            let records_path = dir.join("records.jsonl");
            write_records_file(&records_path, &records).map_err(|source| OpenError::Io {
                path: records_path.display().to_string(),
                source,
            })?;
            for (sid, s) in local {
                sessions.insert(sid, Arc::new(Mutex::new(s)));
            }
            study_map.insert(
                id,
                Arc::new(Study {
                    design_json: design_to_json(&design),
                    design,
                    records_path,
                    log: Mutex::new(log),
                }),
            );
        }
        Ok(Service {
            studies: study_map,
            sessions: RwLock::new(sessions),
        })
    }

    fn study(&self, id: &str) -> Result<&Arc<Study>, ApiError> {
        self.studies
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown study {id:?}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id:?}")))
    }

    pub async fn create_session(&self, study_id: &str, body: &[u8]) -> Result<SessionView, ApiError> {
        let study = self.study(study_id)?;
        let req = parse_create_request(body)?;
        let session_id = uuid::Uuid::new_v4().to_string();
        let seed = req.seed.unwrap_or_else(rand::random);
        let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        let tag = req.population_tag.trim().to_string();
        let event = Event::SessionCreated {
            population_tag: tag.clone(),
            seed,
            created_at: created_at.clone(),
        };
        let session = Session::new(session_id.clone(), study_id.to_string(), tag, seed, created_at);
        let view = session.view(&study.design);
        {
            let mut log = study.log.lock().await;
            log.append(&session_id, &event)?;
            // Inserted while the log is held so no reader sees a session
            // that is not yet durable.
            self.sessions
                .write()
                .expect("session map lock")
                .insert(session_id, Arc::new(Mutex::new(session)));
        }
        Ok(view)
    }

    pub async fn next(&self, session_id: &str) -> Result<SessionView, ApiError> {
        let session = self.session(session_id)?;
        let s = session.lock().await;
        let study = self.study(&s.study_id)?;
        Ok(s.view(&study.design))
    }

    pub async fn respond(&self, session_id: &str, key: Option<&str>, body: &[u8]) -> Result<SessionView, ApiError> {
        let key = key.ok_or_else(|| ApiError::BadRequest("missing Idempotency-Key header".into()))?;
        if key.is_empty() || key.len() > MAX_KEY_LEN || !key.bytes().all(|b| b.is_ascii_graphic()) {
            return Err(ApiError::BadRequest(format!(
                "Idempotency-Key must be 1-{MAX_KEY_LEN} visible ASCII characters"
            )));
        }
        let req = parse_response_request(body)?;
        let session = self.session(session_id)?;
        let mut s = session.lock().await;
        let study = self.study(&s.study_id)?.clone();
        match s.prepare(&study.design, key, &req)? {
            Prepared::Repeat(view) => Ok(view),
            Prepared::Advance { event, next } => {
                let Event::Answered { response, .. } = &event else {
                    unreachable!("prepare yields answers")
                };
                let view = response.clone();
                {
                    let mut log = study.log.lock().await;
                    log.append(session_id, &event)?;
                    if let Some(record) = next.record() {
                        append_record(&study.records_path, &record)?;
                    }
                }
                *s = *next;
                Ok(view)
            }
        }
    }

    pub async fn records(&self, study_id: &str) -> Result<String, ApiError> {
        let study = self.study(study_id)?;
        let _log = study.log.lock().await;
        Ok(fs::read_to_string(&study.records_path)?)
    }
}

type Shared = State<Arc<Service>>;

async fn design_handler(State(svc): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let study = svc.study(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], study.design_json.clone()).into_response())
}

async fn create_handler(State(svc): Shared, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, ApiError> {
    let view = svc.create_session(&id, &body).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn next_handler(State(svc): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(svc.next(&id).await?))
}

async fn respond_handler(
    State(svc): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| ApiError::BadRequest("Idempotency-Key is not ASCII".into()))?,
        ),
        None => None,
    };
    Ok(Json(svc.respond(&id, key, &body).await?))
}

async fn records_handler(State(svc): Shared, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let text = svc.records(&id).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/studies/{id}", get(design_handler))
        .route("/studies/{id}/sessions", post(create_handler))
        .route("/studies/{id}/records.jsonl", get(records_handler))
        .route("/sessions/{id}/next", get(next_handler))
        .route("/sessions/{id}/responses", post(respond_handler))
        .with_state(service)
}

pub async fn serve(addr: SocketAddr, service: Arc<Service>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}
