use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use mask_atari::session::{Outgoing, Session, SessionDefaults};
use tokio::net::TcpListener;
use tokio::time::{interval, MissedTickBehavior};

use crate::store::EpisodeStore;

pub struct ServerState {
    pub defaults: SessionDefaults,
    pub store: Option<EpisodeStore>,
    next_id: AtomicU64,
}

impl ServerState {
    pub fn new(defaults: SessionDefaults, store: Option<EpisodeStore>) -> Arc<Self> {
        Arc::new(Self {
            defaults,
            store,
            next_id: AtomicU64::new(0),
        })
    }
}

pub fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/ws", get(upgrade))
        .route("/health", get(|| async { "ok" }))
        .with_state(state)
}

/// Binds and serves until the process ends.
pub async fn serve(bind: SocketAddr, state: Arc<ServerState>) -> std::io::Result<()> {
    let listener = TcpListener::bind(bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// Serves on an already-bound listener in a background task.
pub fn spawn(
    listener: TcpListener,
    state: Arc<ServerState>,
) -> tokio::task::JoinHandle<std::io::Result<()>> {
    tokio::spawn(async move { axum::serve(listener, router(state)).await })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<ServerState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn run_session(socket: WebSocket, state: Arc<ServerState>) {
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let mut session = Session::new(id, state.defaults.clone());
    let (mut tx, mut rx) = socket.split();
    let period = Duration::from_secs_f64(1.0 / session.steps_per_sec());
    let mut clock = interval(period);
    clock.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        let out = tokio::select! {
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => session.handle_text(text.as_str()),
                Some(Ok(Message::Binary(_))) => session.handle_text("binary message"),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => session.disconnect(),
                Some(Ok(_)) => continue,
            },
            _ = clock.tick(), if session.is_paced() => session.tick(),
        };
        if deliver(&mut tx, out, &state).await.is_err() {
            let rest = session.disconnect();
            let _ = deliver(&mut tx, rest, &state).await;
        }
        if session.is_closed() {
            break;
        }
    }
    let _ = tx.close().await;
}

async fn deliver<S>(tx: &mut S, out: Vec<Outgoing>, state: &ServerState) -> Result<(), ()>
where
    S: futures::Sink<Message> + Unpin,
{
    let mut failed = false;
    for item in out {
        match item {
            Outgoing::Record(rec) => {
                if let Some(store) = &state.store {
                    if let Err(e) = store.append(&rec) {
                        tracing::error!("failed to store episode from {}: {e}", rec.session);
                    }
                }
            }
            _ if failed => {}
            Outgoing::Text(msg) => {
                let text = serde_json::to_string(&msg).expect("server messages serialize");
                failed = tx.send(Message::Text(text.into())).await.is_err();
            }
            Outgoing::Binary(bytes) => {
                failed = tx.send(Message::Binary(bytes.into())).await.is_err();
            }
            Outgoing::Close => {
                let _ = tx.send(Message::Close(None)).await;
            }
        }
    }
    if failed {
        Err(())
    } else {
        Ok(())
    }
}
