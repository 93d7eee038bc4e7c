//! Routes and the server entry points.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use aogqa::world::World;

use crate::error::ApiError;
use crate::session::{
    Ack, CreateSession, SceneDoc, Session, SessionCreated, SessionState, SubmitAnswer,
    TranscriptEntry,
};

/// Sessions over one shared world.
#[derive(Clone)]
pub struct Service {
    world: Arc<World>,
    sessions: Arc<Mutex<BTreeMap<u64, Arc<Session>>>>,
    next_id: Arc<AtomicU64>,
}

impl Service {
    pub fn new(world: Arc<World>) -> Self {
        Service {
            world,
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn create(&self, req: CreateSession) -> Result<Arc<Session>, ApiError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let session = Session::start(id, self.world.clone(), req)?;
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, session.clone());
        Ok(session)
    }

    pub fn session(&self, id: u64) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
            .ok_or(ApiError::UnknownSession(id))
    }
}

async fn create_session(
    State(svc): State<Service>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let s = svc.create(req)?;
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            id: s.id,
            mode: s.mode,
        }),
    ))
}

async fn question(State(svc): State<Service>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    Ok(match svc.session(id)?.question() {
        Some(q) => Json(q).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn answer(
    State(svc): State<Service>,
    Path(id): Path<u64>,
    Json(a): Json<SubmitAnswer>,
) -> Result<Json<Ack>, ApiError> {
    Ok(Json(svc.session(id)?.submit(a)?))
}

async fn state(
    State(svc): State<Service>,
    Path(id): Path<u64>,
) -> Result<Json<SessionState>, ApiError> {
    Ok(Json(svc.session(id)?.state()))
}

async fn transcript(
    State(svc): State<Service>,
    Path(id): Path<u64>,
) -> Result<Json<Vec<TranscriptEntry>>, ApiError> {
    Ok(Json(svc.session(id)?.transcript()))
}

async fn events(State(svc): State<Service>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let text = svc.session(id)?.events()?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn scene(
    State(svc): State<Service>,
    Path(id): Path<usize>,
) -> Result<Json<SceneDoc>, ApiError> {
    let s = svc
        .world
        .scene(id)
        .map_err(|_| ApiError::UnknownScene(id))?;
    Ok(Json(SceneDoc {
        id,
        keyword: s.keyword,
        grid: s.grid.clone(),
    }))
}

pub fn router(svc: Service) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/question", get(question))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/events", get(events))
        .route("/scenes/{id}", get(scene))
        .with_state(svc)
}

pub async fn serve(listener: TcpListener, svc: Service) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).await
}

/// Serves on `addr` from a background thread; returns the bound address.
pub fn spawn(
    svc: Service,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?;
    let listener = rt.block_on(TcpListener::bind(addr))?;
    let bound = listener.local_addr()?;
    let handle = std::thread::Builder::new()
        .name("aogqa-service".into())
        .spawn(move || rt.block_on(serve(listener, svc)))?;
    Ok((bound, handle))
}
