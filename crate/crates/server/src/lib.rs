//! WebSocket front end for a teleoperation [`Session`].
//!
//! One task owns the session and advances it at the tick rate. Clients
//! connect at `/ws`, receive a `model` hello, then a `state` frame every
//! tick. Inbound commands are queued and applied at the next tick boundary in
//! arrival order; rejections go back only to the client that sent them.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use auglimb::teleop::{codes, parse_client_message, ClientMessage, ServerMessage, Session};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tower_http::services::ServeDir;

pub const WS_PATH: &str = "/ws";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("UI directory {0} does not exist")]
    MissingUiDir(PathBuf),
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Directory served as static assets at `/`.
    pub ui_dir: Option<PathBuf>,
}

type Command = (ClientMessage, mpsc::UnboundedSender<String>);

#[derive(Clone)]
struct Shared {
    hello: String,
    commands: mpsc::UnboundedSender<Command>,
    updates: broadcast::Sender<String>,
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })
}

/// Serves `session` on `listener` until the process is stopped.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    opts: ServeOptions,
) -> Result<(), ServeError> {
    let app = router(session, &opts)?;
    log::info!("teleop endpoint ws://{}{WS_PATH}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

/// Binds and serves in a background task; returns the bound address.
pub async fn spawn(
    addr: &str,
    session: Session,
    opts: ServeOptions,
) -> Result<SocketAddr, ServeError> {
    let listener = bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(session, &opts)?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok(local)
}

fn router(session: Session, opts: &ServeOptions) -> Result<Router, ServeError> {
    let (commands, inbox) = mpsc::unbounded_channel();
    let (updates, _) = broadcast::channel(256);
    let shared = Shared {
        hello: session.hello().to_json(),
        commands,
        updates: updates.clone(),
    };
    tokio::spawn(tick_loop(session, inbox, updates));
    let app = Router::new()
        .route(WS_PATH, get(upgrade))
        .with_state(shared);
    match &opts.ui_dir {
        Some(dir) if !dir.is_dir() => Err(ServeError::MissingUiDir(dir.clone())),
        Some(dir) => Ok(app.fallback_service(ServeDir::new(dir))),
        None => Ok(app),
    }
}

async fn tick_loop(
    mut session: Session,
    mut inbox: mpsc::UnboundedReceiver<Command>,
    updates: broadcast::Sender<String>,
) {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / session.tick_rate()));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        interval.tick().await;
        loop {
            match inbox.try_recv() {
                Ok((msg, reply)) => {
                    if let Some(answer) = session.command(msg) {
                        let _ = reply.send(answer.to_json());
                    }
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        let update = ServerMessage::State(session.tick());
        let _ = updates.send(update.to_json());
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Shared) {
    let (mut tx, mut rx) = socket.split();
    let mut updates = shared.updates.subscribe();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();
    if tx
        .send(Message::Text(shared.hello.clone().into()))
        .await
        .is_err()
    {
        return;
    }
    loop {
        let outgoing = tokio::select! {
            frame = rx.next() => match frame {
                Some(Ok(Message::Text(text))) => match parse_client_message(text.as_str()) {
                    Ok(msg) => {
                        if shared.commands.send((msg, reply_tx.clone())).is_err() {
                            return;
                        }
                        continue;
                    }
                    Err(err) => err.to_json(),
                },
                Some(Ok(Message::Binary(_))) => {
                    ServerMessage::error(codes::BAD_MESSAGE, "binary frames are not supported").to_json()
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => continue,
            },
            update = updates.recv() => match update {
                Ok(json) => json,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("client lagged, dropped {n} updates");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            Some(reply) = replies.recv() => reply,
        };
        if tx.send(Message::Text(outgoing.into())).await.is_err() {
            return;
        }
    }
}
