//! WebSocket front end. One driver task owns the [`Session`]; every client
//! connection talks to it through a channel and listens on a shared
//! broadcast, so all clients see the same message order.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use crate::protocol::{ClientMessage, ServerMessage};
use crate::session::{GatewayError, Session};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    /// Multiplier on the scenario tick rate.
    pub speed: f64,
    pub start_paused: bool,
    /// Written once the run finishes.
    pub trace_out: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            speed: 1.0,
            start_paused: false,
            trace_out: None,
        }
    }
}

#[derive(Clone)]
struct Outbound {
    /// `None` goes to every client.
    target: Option<u64>,
    text: Arc<str>,
}

enum DriverMsg {
    Connect {
        client: u64,
        reply: oneshot::Sender<(String, broadcast::Receiver<Outbound>)>,
    },
    Client {
        client: u64,
        msg: ClientMessage,
    },
}

#[derive(Clone)]
struct AppState {
    tx: mpsc::Sender<DriverMsg>,
    next_client: Arc<AtomicU64>,
}

fn encode(m: &ServerMessage) -> Arc<str> {
    serde_json::to_string(m)
        .expect("server message serializes")
        .into()
}

struct Driver {
    session: Session,
    opts: ServeOptions,
    paused: bool,
    out: broadcast::Sender<Outbound>,
    trace_written: bool,
}

impl Driver {
    fn send(&self, target: Option<u64>, m: &ServerMessage) {
        // No subscribers is fine.
        let _ = self.out.send(Outbound {
            target,
            text: encode(m),
        });
    }

    fn period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / (self.session.config().tick_rate_hz * self.opts.speed))
    }

    /// One tick; false when the run is over.
    fn tick(&mut self) -> bool {
        match self.session.step() {
            Ok(Some(report)) => {
                self.send(None, &ServerMessage::Delta(self.session.delta(&report)));
                for event in report.events {
                    self.send(None, &ServerMessage::TraceEvent { event });
                }
                self.after_tick();
                true
            }
            Ok(None) => {
                self.after_tick();
                false
            }
            Err(e) => {
                log::error!("{e}");
                self.send(
                    None,
                    &ServerMessage::Error {
                        request: None,
                        message: e.to_string(),
                    },
                );
                self.paused = true;
                false
            }
        }
    }

    fn after_tick(&mut self) {
        if !self.session.is_finished() || self.trace_written {
            return;
        }
        self.trace_written = true;
        if let Some(path) = &self.opts.trace_out {
            if let Err(e) = std::fs::write(path, self.session.trace().to_text()) {
                log::error!("writing {}: {e}", path.display());
                self.send(
                    None,
                    &ServerMessage::Error {
                        request: None,
                        message: format!("writing trace: {e}"),
                    },
                );
            }
        }
    }

    fn handle(&mut self, client: u64, msg: ClientMessage) {
        let request = msg.name().to_string();
        let result = match msg {
            ClientMessage::Utterance { sender, text } => self
                .session
                .inject_utterance(&sender, &text)
                .map_err(|e| e.to_string()),
            ClientMessage::Pause {} => {
                self.paused = true;
                Ok(())
            }
            ClientMessage::Resume {} => {
                self.paused = false;
                Ok(())
            }
            ClientMessage::Step { n } => {
                for _ in 0..n {
                    if !self.tick() {
                        break;
                    }
                }
                Ok(())
            }
            ClientMessage::SetSpeed { speed } => {
                if speed.is_finite() && speed > 0.0 {
                    self.opts.speed = speed;
                    Ok(())
                } else {
                    Err(format!("speed must be a positive number, got {speed}"))
                }
            }
        };
        let reply = match result {
            Ok(()) => ServerMessage::Ack {
                request,
                tick: self.session.tick(),
            },
            Err(message) => ServerMessage::Error {
                request: Some(request),
                message,
            },
        };
        self.send(Some(client), &reply);
    }

    async fn run(mut self, mut rx: mpsc::Receiver<DriverMsg>) {
        let mut next = Instant::now() + self.period();
        loop {
            let running = !self.paused && !self.session.is_finished();
            tokio::select! {
                msg = rx.recv() => match msg {
                    None => return,
                    Some(DriverMsg::Connect { client, reply }) => {
                        log::info!("client {client} connected");
                        let snap = ServerMessage::Snapshot(self.session.snapshot(self.paused, self.opts.speed));
                        let _ = reply.send((encode(&snap).to_string(), self.out.subscribe()));
                    }
                    Some(DriverMsg::Client { client, msg }) => {
                        let was_paused = self.paused;
                        self.handle(client, msg);
                        if was_paused && !self.paused {
                            next = Instant::now() + self.period();
                        }
                    }
                },
                _ = tokio::time::sleep_until(next), if running => {
                    self.tick();
                    next += self.period();
                    let now = Instant::now();
                    if next < now {
                        next = now;
                    }
                }
            }
        }
    }
}

async fn ws_handler(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| client_loop(socket, state))
}

async fn client_loop(socket: WebSocket, state: AppState) {
    let client = state.next_client.fetch_add(1, Ordering::Relaxed);
    let (reply_tx, reply_rx) = oneshot::channel();
    if state
        .tx
        .send(DriverMsg::Connect {
            client,
            reply: reply_tx,
        })
        .await
        .is_err()
    {
        return;
    }
    let Ok((snapshot, mut events)) = reply_rx.await else {
        return;
    };
    let (mut sink, mut stream) = socket.split();
    if sink.send(Message::Text(snapshot.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Ok(msg) => {
                        if state.tx.send(DriverMsg::Client { client, msg }).await.is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let m = ServerMessage::Error { request: None, message: format!("bad message: {e}") };
                        if sink.send(Message::Text(encode(&m).to_string().into())).await.is_err() {
                            return;
                        }
                    }
                }
            }
            out = events.recv() => match out {
                Ok(o) => {
                    if o.target.is_some_and(|t| t != client) {
                        continue;
                    }
                    if sink.send(Message::Text(o.text.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let m = ServerMessage::Error { request: None, message: format!("client fell behind by {n} messages") };
                    let _ = sink.send(Message::Text(encode(&m).to_string().into())).await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            }
        }
    }
}

/// Serve `session` on `listener` at path `/ws` until the process stops.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    opts: ServeOptions,
) -> Result<(), GatewayError> {
    let (tx, rx) = mpsc::channel(256);
    let (out, _) = broadcast::channel(65536);
    let driver = Driver {
        session,
        paused: opts.start_paused,
        opts,
        out,
        trace_written: false,
    };
    tokio::spawn(driver.run(rx));
    let app = Router::new()
        .route("/ws", get(ws_handler))
        .with_state(AppState {
            tx,
            next_client: Arc::new(AtomicU64::new(0)),
        });
    axum::serve(listener, app).await?;
    Ok(())
}
