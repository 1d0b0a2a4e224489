//! Websocket fan-out between the tick owner and connected clients.
//!
//! The tick owner only ever calls non-blocking methods here: frames go out
//! through a broadcast channel (slow clients lag and skip), the latest
//! state sits in a watch cell for late joiners, and client input comes back
//! through a latest-value mailbox.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio_tungstenite::tungstenite::Message;

use coreach::geometry::Vec2;
use coreach::metrics::{weights_from_choices, TlxResponse};

use crate::input::cursor_mailbox;
use crate::wire::{Body, ErrorPayload, Hello, TlxSubmit, WireMessage};

/// A message for every client; `seq` is assigned per connection.
#[derive(Debug, Clone)]
pub struct Frame {
    pub t: f64,
    pub body: Body,
}

const FRAME_BACKLOG: usize = 256;

#[derive(Debug)]
pub struct Hub {
    frames: broadcast::Sender<Arc<Frame>>,
    latest: watch::Sender<(f64, Hello)>,
    cursor: watch::Sender<Option<Vec2>>,
    cursor_rx: watch::Receiver<Option<Vec2>>,
    tlx: watch::Sender<Option<TlxResponse>>,
    closed: watch::Sender<bool>,
    clients: AtomicUsize,
    epochs: AtomicU64,
}

impl Hub {
    pub fn new(t: f64, hello: Hello) -> Arc<Self> {
        let (cursor, cursor_rx) = cursor_mailbox();
        Arc::new(Self {
            frames: broadcast::channel(FRAME_BACKLOG).0,
            latest: watch::channel((t, hello)).0,
            cursor,
            cursor_rx,
            tlx: watch::channel(None).0,
            closed: watch::channel(false).0,
            clients: AtomicUsize::new(0),
            epochs: AtomicU64::new(0),
        })
    }

    pub fn publish(&self, t: f64, body: Body) {
        // No receivers is not an error: nobody is watching.
        let _ = self.frames.send(Arc::new(Frame { t, body }));
    }

    /// Replaces the state a newly connected client is greeted with.
    pub fn set_latest(&self, t: f64, hello: Hello) {
        self.latest.send_replace((t, hello));
    }

    pub fn latest(&self) -> (f64, Hello) {
        self.latest.borrow().clone()
    }

    pub fn cursor_mailbox(&self) -> watch::Receiver<Option<Vec2>> {
        self.cursor_rx.clone()
    }

    pub fn tlx(&self) -> Option<TlxResponse> {
        *self.tlx.borrow()
    }

    pub fn tlx_updates(&self) -> watch::Receiver<Option<TlxResponse>> {
        self.tlx.subscribe()
    }

    pub fn client_count(&self) -> usize {
        self.clients.load(Ordering::SeqCst)
    }

    /// Ends every connection after its pending frames, and any session
    /// still running on this hub.
    pub fn close(&self) {
        self.closed.send_replace(true);
    }

    pub fn is_closed(&self) -> bool {
        *self.closed.borrow()
    }

    pub async fn bind(host: &str, port: u16) -> std::io::Result<(TcpListener, SocketAddr)> {
        let listener = TcpListener::bind((host, port)).await?;
        let addr = listener.local_addr()?;
        Ok((listener, addr))
    }

    /// Accepts websocket clients until the hub is closed.
    pub async fn serve(self: Arc<Self>, listener: TcpListener) {
        let mut closed = self.closed.subscribe();
        loop {
            tokio::select! {
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let hub = Arc::clone(&self);
                        tokio::spawn(async move {
                            if let Err(e) = hub.connection(stream).await {
                                tracing::debug!(%peer, "connection ended: {e}");
                            }
                        });
                    }
                    Err(e) => tracing::warn!("accept failed: {e}"),
                },
                _ = closed.changed() => break,
            }
        }
    }

    fn ingest(&self, text: &str) -> Result<(), String> {
        let msg = WireMessage::from_json(text).map_err(|e| format!("malformed message: {e}"))?;
        match msg.body {
            Body::Input(i) => {
                if !i.cursor.is_finite() {
                    return Err("non-finite cursor".into());
                }
                self.cursor.send_replace(Some(i.cursor));
                Ok(())
            }
            Body::TlxSubmit(s) => {
                let resp = tlx_response(&s).map_err(|e| e.to_string())?;
                self.tlx.send_replace(Some(resp));
                Ok(())
            }
            other => Err(format!("clients may not send {}", other.kind())),
        }
    }

    async fn connection(self: Arc<Self>, stream: TcpStream) -> Result<(), tokio_tungstenite::tungstenite::Error> {
        let ws = tokio_tungstenite::accept_async(stream).await?;
        let (mut sink, mut source) = ws.split();
        let epoch = self.epochs.fetch_add(1, Ordering::SeqCst) + 1;
        self.clients.fetch_add(1, Ordering::SeqCst);
        let _guard = ClientGuard(&self.clients);

        // Subscribe before reading the latest state so nothing falls in
        // between; frames older than the greeting are then skipped.
        let mut frames = self.frames.subscribe();
        let mut closed = self.closed.subscribe();
        let (t0, mut hello) = self.latest();
        hello.epoch = epoch;
        let mut seq = 0u64;
        let mut last_t = t0;
        let mut send = |body: Body, t: f64| {
            let msg = WireMessage { seq, t, body };
            seq += 1;
            Message::Text(msg.to_json().into())
        };
        sink.send(send(Body::Hello(hello), t0)).await?;

        let (errors_tx, mut errors) = mpsc::unbounded_channel::<String>();
        let hub = Arc::clone(&self);
        let mut reader = tokio::spawn(async move {
            while let Some(Ok(m)) = source.next().await {
                match m {
                    Message::Text(text) => {
                        if let Err(e) = hub.ingest(text.as_str()) {
                            let _ = errors_tx.send(e);
                        }
                    }
                    Message::Close(_) => break,
                    _ => {}
                }
            }
        });

        loop {
            tokio::select! {
                f = frames.recv() => match f {
                    Ok(f) => {
                        if f.t < t0 && matches!(f.body, Body::TickState(_)) {
                            continue;
                        }
                        last_t = f.t;
                        sink.send(send(f.body.clone(), f.t)).await?;
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                Some(message) = errors.recv() => {
                    sink.send(send(Body::Error(ErrorPayload { message }), last_t)).await?;
                }
                // The flag only ever goes from false to true.
                _ = closed.changed() => {
                    // Flush what the tick owner published before closing.
                    while let Ok(f) = frames.try_recv() {
                        sink.send(send(f.body.clone(), f.t)).await?;
                    }
                    let _ = sink.send(Message::Close(None)).await;
                    break;
                }
                _ = &mut reader => break,
            }
        }
        reader.abort();
        Ok(())
    }
}

struct ClientGuard<'a>(&'a AtomicUsize);

impl Drop for ClientGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Validated TLX response from a submitted form; weights are the win
/// counts of the pairwise choices.
pub fn tlx_response(s: &TlxSubmit) -> Result<TlxResponse, coreach::metrics::MetricsError> {
    let resp = TlxResponse {
        ratings: s.ratings,
        weights: weights_from_choices(&s.choices)?,
    };
    resp.validate()?;
    Ok(resp)
}
