//! Steering server: raw TCP and WebSocket transports in front of one
//! engine. Each connection gets a reader and a bounded writer; the engine
//! runs on its own thread and only ever pushes into send queues.

mod queue;
mod session;

pub use queue::{Outgoing, SendQueue};

use std::collections::HashMap;
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::engine::{Engine, Mailbox, Origin, Outbound, Outbox, Stats, StatusBoard};
use crate::protocol::MAX_MESSAGE_LEN;
use session::SessionParams;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub bind_tcp: Option<String>,
    pub bind_ws: Option<String>,
    /// Largest message accepted or sent, in bytes.
    pub max_message: usize,
    pub stats_period: Duration,
    /// Frames queued per session before old ones are dropped.
    pub queue_depth: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind_tcp: Some("127.0.0.1:7070".into()),
            bind_ws: Some("127.0.0.1:7071".into()),
            max_message: MAX_MESSAGE_LEN,
            stats_period: Duration::from_secs(1),
            queue_depth: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    Tcp,
    WebSocket,
}

struct SessionEntry {
    queue: Arc<SendQueue>,
    stream: Option<TcpStream>,
    transport: Transport,
}

/// Routes engine output to session queues.
pub(crate) struct Hub {
    sessions: Mutex<HashMap<u64, SessionEntry>>,
    next_id: AtomicU64,
    status: Arc<StatusBoard>,
}

impl Hub {
    fn register(&self, transport: Transport, stream: Option<TcpStream>, depth: usize) -> (u64, Arc<SendQueue>) {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let queue = Arc::new(SendQueue::new(depth));
        self.sessions.lock().unwrap().insert(
            id,
            SessionEntry {
                queue: queue.clone(),
                stream,
                transport,
            },
        );
        (id, queue)
    }

    fn remove(&self, id: u64) {
        self.sessions.lock().unwrap().remove(&id);
    }

    fn close_all(&self) {
        for (_, s) in self.sessions.lock().unwrap().drain() {
            s.queue.close();
            if let Some(stream) = s.stream {
                let _ = stream.shutdown(Shutdown::Both);
            }
        }
    }
}

impl Outbox for Hub {
    fn deliver(&self, to: Origin, msg: Outbound) {
        if let Origin::Session(id) = to {
            if let Some(s) = self.sessions.lock().unwrap().get(&id) {
                s.queue.push(Outgoing::Engine(msg));
            }
        }
    }

    fn broadcast(&self, msg: Outbound) {
        for s in self.sessions.lock().unwrap().values() {
            s.queue.push(Outgoing::Engine(msg.clone()));
        }
    }
}

/// A running server. Dropping it without [`shutdown`](Self::shutdown)
/// leaves the threads running.
pub struct ServerHandle {
    tcp_addr: Option<SocketAddr>,
    ws_addr: Option<SocketAddr>,
    stop: Arc<AtomicBool>,
    hub: Arc<Hub>,
    mailbox: Mailbox,
    engine: Option<JoinHandle<Engine>>,
    acceptors: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn tcp_addr(&self) -> Option<SocketAddr> {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    pub fn stats(&self) -> Stats {
        self.hub.status.get()
    }

    pub fn iteration(&self) -> u64 {
        self.stats().iteration
    }

    pub fn session_count(&self) -> usize {
        self.hub.sessions.lock().unwrap().len()
    }

    /// Per-session `(transport, queued items, dropped frames)`.
    pub fn session_queues(&self) -> Vec<(Transport, usize, u64)> {
        self.hub
            .sessions
            .lock()
            .unwrap()
            .values()
            .map(|s| (s.transport, s.queue.len(), s.queue.dropped()))
            .collect()
    }

    /// Injects commands as a local script would.
    pub fn mailbox(&self) -> Mailbox {
        self.mailbox.clone()
    }

    /// Blocks for as long as the server runs.
    pub fn wait(mut self) -> Engine {
        for a in self.acceptors.drain(..) {
            let _ = a.join();
        }
        self.engine
            .take()
            .expect("engine thread")
            .join()
            .expect("engine thread panicked")
    }

    /// Stops accepting, closes every session and returns the engine.
    pub fn shutdown(mut self) -> Engine {
        self.stop.store(true, Ordering::Relaxed);
        for a in self.acceptors.drain(..) {
            let _ = a.join();
        }
        self.hub.close_all();
        self.engine
            .take()
            .expect("engine thread")
            .join()
            .expect("engine thread panicked")
    }
}

fn spawn_acceptor(
    listener: TcpListener,
    transport: Transport,
    stop: Arc<AtomicBool>,
    hub: Arc<Hub>,
    mailbox: Mailbox,
    config: &ServerConfig,
) -> io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    let depth = config.queue_depth;
    let cap = config.max_message.min(MAX_MESSAGE_LEN);
    std::thread::Builder::new()
        .name(format!("accept-{transport:?}"))
        .spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        if stream.set_nonblocking(false).is_err() {
                            continue;
                        }
                        let (id, queue) = hub.register(transport, stream.try_clone().ok(), depth);
                        log::info!("session {id}: {transport:?} connection from {peer}");
                        let params = SessionParams {
                            id,
                            mailbox: mailbox.clone(),
                            queue,
                            hub: hub.clone(),
                            cap,
                        };
                        let spawned = std::thread::Builder::new()
                            .name(format!("session-{id}"))
                            .spawn(move || match transport {
                                Transport::Tcp => session::run_tcp(stream, params),
                                Transport::WebSocket => session::run_ws(stream, params),
                            });
                        if let Err(e) = spawned {
                            log::warn!("cannot spawn session thread: {e}");
                            hub.remove(id);
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        std::thread::sleep(Duration::from_millis(50));
                    }
                }
            }
        })
}

/// Binds the configured transports and starts the engine thread. The
/// engine keeps its phase: call [`Engine::start`] first to serve a running
/// simulation.
pub fn serve(engine: Engine, config: &ServerConfig) -> io::Result<ServerHandle> {
    let tcp = config.bind_tcp.as_deref().map(TcpListener::bind).transpose()?;
    let ws = config.bind_ws.as_deref().map(TcpListener::bind).transpose()?;
    let stop = Arc::new(AtomicBool::new(false));
    let hub = Arc::new(Hub {
        sessions: Mutex::new(HashMap::new()),
        next_id: AtomicU64::new(1),
        status: engine.status(),
    });
    let mailbox = engine.mailbox();

    let mut acceptors = Vec::new();
    let tcp_addr = tcp.as_ref().map(|l| l.local_addr()).transpose()?;
    let ws_addr = ws.as_ref().map(|l| l.local_addr()).transpose()?;
    if let Some(l) = tcp {
        acceptors.push(spawn_acceptor(l, Transport::Tcp, stop.clone(), hub.clone(), mailbox.clone(), config)?);
    }
    if let Some(l) = ws {
        acceptors.push(spawn_acceptor(
            l,
            Transport::WebSocket,
            stop.clone(),
            hub.clone(),
            mailbox.clone(),
            config,
        )?);
    }

    let period = config.stats_period;
    let engine_hub = hub.clone();
    let engine_stop = stop.clone();
    let engine = std::thread::Builder::new()
        .name("engine".into())
        .spawn(move || {
            let mut engine = engine;
            engine.run(&*engine_hub, &engine_stop, period);
            engine
        })?;

    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        stop,
        hub,
        mailbox,
        engine: Some(engine),
        acceptors,
    })
}
