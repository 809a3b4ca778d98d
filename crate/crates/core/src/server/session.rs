use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use tungstenite::protocol::WebSocketConfig;

use super::queue::{Outgoing, SendQueue};
use super::Hub;
use crate::engine::{command_from_message, Mailbox, Origin, Outbound, SteerCommand};
use crate::protocol::{
    decode_all, encode, encode_frame, ErrorCode, Message, ProtocolError, PROTOCOL_VERSION,
};

/// How long a blocked write to a client may take before the session is
/// dropped.
const WRITE_TIMEOUT: Duration = Duration::from_secs(30);
const WS_POLL: Duration = Duration::from_millis(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    Continue,
    /// Flush what is queued, then close.
    Close,
}

/// Transport-independent session state: handshake, sequence numbering
/// and routing into the engine mailbox.
struct SessionCore {
    id: u64,
    greeted: bool,
    seq: u64,
    mailbox: Mailbox,
    queue: Arc<SendQueue>,
    hub: Arc<Hub>,
}

impl SessionCore {
    fn reply(&self, msg: Message) {
        self.queue.push(Outgoing::Direct(msg));
    }

    fn on_message(&mut self, msg: Message) -> Flow {
        if !self.greeted {
            return match msg {
                Message::Hello { version } if version == PROTOCOL_VERSION => {
                    self.greeted = true;
                    self.reply(Message::Hello {
                        version: PROTOCOL_VERSION,
                    });
                    self.queue
                        .push(Outgoing::Engine(Outbound::Stats(self.hub.status.get())));
                    Flow::Continue
                }
                Message::Hello { version } => {
                    self.reply(Message::error(
                        ErrorCode::Version,
                        format!("unsupported protocol version {version}, server speaks {PROTOCOL_VERSION}"),
                    ));
                    Flow::Close
                }
                Message::Bye => Flow::Close,
                other => {
                    self.reply(Message::error(
                        ErrorCode::Protocol,
                        format!("expected HELLO, got {}", other.name()),
                    ));
                    Flow::Close
                }
            };
        }
        match msg {
            Message::Bye => Flow::Close,
            Message::Hello { .. } => {
                self.reply(Message::error(ErrorCode::Protocol, "duplicate HELLO"));
                Flow::Continue
            }
            Message::Unknown { msg_type, .. } => {
                self.seq += 1;
                self.reply(Message::error(
                    ErrorCode::Protocol,
                    format!("#{} unknown message type {msg_type} ignored", self.seq),
                ));
                Flow::Continue
            }
            msg => {
                self.seq += 1;
                match command_from_message(&msg) {
                    Ok(cmd) => {
                        if self.mailbox.send(Origin::Session(self.id), self.seq, cmd) {
                            Flow::Continue
                        } else {
                            Flow::Close
                        }
                    }
                    Err((code, text)) => {
                        self.reply(Message::error(code, format!("#{} {text}", self.seq)));
                        Flow::Continue
                    }
                }
            }
        }
    }

    fn on_protocol_error(&mut self, e: &ProtocolError) -> Flow {
        log::info!("session {}: {e}", self.id);
        self.reply(Message::error(ErrorCode::Protocol, e.to_string()));
        Flow::Close
    }

    fn finish(&self) {
        self.mailbox
            .send(Origin::Session(self.id), 0, SteerCommand::Disconnect);
        self.hub.remove(self.id);
        self.queue.close();
    }
}

fn encode_outgoing(item: &Outgoing, cap: usize) -> Vec<u8> {
    let bytes = match item {
        Outgoing::Engine(Outbound::Frame(f)) => {
            let len = 6 + 24 + 4 * f.rendered.data.len();
            if len > cap {
                return encode(&Message::error(
                    ErrorCode::Subscription,
                    format!(
                        "#{} frame at iteration {} is {len} bytes, over the {cap} byte limit",
                        f.subscription, f.iteration
                    ),
                ))
                .expect("short error message");
            }
            encode_frame(f.subscription, f.iteration, f.dims(), &f.rendered.data)
        }
        Outgoing::Engine(o) => encode(&o.to_message()),
        Outgoing::Direct(m) => encode(m),
    };
    bytes.unwrap_or_else(|e| {
        encode(&Message::error(ErrorCode::Protocol, e.to_string())).expect("short error message")
    })
}

pub(super) struct SessionParams {
    pub id: u64,
    pub mailbox: Mailbox,
    pub queue: Arc<SendQueue>,
    pub hub: Arc<Hub>,
    pub cap: usize,
}

impl SessionParams {
    fn core(&self) -> SessionCore {
        SessionCore {
            id: self.id,
            greeted: false,
            seq: 0,
            mailbox: self.mailbox.clone(),
            queue: self.queue.clone(),
            hub: self.hub.clone(),
        }
    }
}

pub(super) fn run_tcp(stream: TcpStream, p: SessionParams) {
    let mut core = p.core();
    let _ = stream.set_nodelay(true);
    let _ = stream.set_write_timeout(Some(WRITE_TIMEOUT));
    let writer = match stream.try_clone() {
        Ok(mut out) => {
            let queue = p.queue.clone();
            let cap = p.cap;
            std::thread::spawn(move || {
                while let Some(item) = queue.pop() {
                    if out.write_all(&encode_outgoing(&item, cap)).is_err() {
                        queue.close();
                        let _ = out.shutdown(Shutdown::Both);
                        break;
                    }
                }
            })
        }
        Err(e) => {
            log::warn!("session {}: {e}", p.id);
            core.finish();
            return;
        }
    };

    let mut decoder = crate::protocol::Decoder::with_cap(p.cap);
    let mut buf = vec![0u8; 64 * 1024];
    let mut reader = &stream;
    let graceful = 'read: loop {
        let n = match reader.read(&mut buf) {
            Ok(0) | Err(_) => break false,
            Ok(n) => n,
        };
        decoder.push(&buf[..n]);
        loop {
            let flow = match decoder.next_message() {
                Ok(Some(m)) => core.on_message(m),
                Ok(None) => break,
                Err(e) => core.on_protocol_error(&e),
            };
            if flow == Flow::Close {
                break 'read true;
            }
        }
        if core.queue.is_closed() {
            break false;
        }
    };
    core.finish();
    if graceful {
        let _ = writer.join();
        let _ = stream.shutdown(Shutdown::Both);
    } else {
        let _ = stream.shutdown(Shutdown::Both);
        let _ = writer.join();
    }
    log::info!("session {} closed", p.id);
}

pub(super) fn run_ws(stream: TcpStream, p: SessionParams) {
    let mut core = p.core();
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
    let _ = stream.set_write_timeout(Some(WRITE_TIMEOUT));
    let config = WebSocketConfig {
        max_message_size: Some(p.cap),
        max_frame_size: Some(p.cap),
        ..Default::default()
    };
    let mut ws = match tungstenite::accept_with_config(stream, Some(config)) {
        Ok(ws) => ws,
        Err(e) => {
            log::info!("session {}: websocket handshake failed: {e}", p.id);
            core.finish();
            return;
        }
    };
    let _ = ws.get_ref().set_read_timeout(Some(WS_POLL));

    let mut closing = false;
    'session: loop {
        let mut wrote = false;
        while let Some(item) = core.queue.try_pop() {
            let bytes = encode_outgoing(&item, p.cap);
            if ws.write(tungstenite::Message::Binary(bytes)).is_err() {
                break 'session;
            }
            wrote = true;
        }
        if wrote && ws.flush().is_err() {
            break;
        }
        if closing || core.queue.is_closed() {
            let _ = ws.close(None);
            let _ = ws.flush();
            break;
        }
        let flow = match ws.read() {
            Ok(tungstenite::Message::Binary(bytes)) => match decode_all(&bytes) {
                Ok(msgs) => {
                    let mut flow = Flow::Continue;
                    for m in msgs {
                        flow = core.on_message(m);
                        if flow == Flow::Close {
                            break;
                        }
                    }
                    flow
                }
                Err(e) => core.on_protocol_error(&e),
            },
            Ok(tungstenite::Message::Text(_)) => {
                core.reply(Message::error(
                    ErrorCode::Protocol,
                    "text frames are not part of the protocol",
                ));
                Flow::Close
            }
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => Flow::Continue,
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
            {
                Flow::Continue
            }
            Err(_) => break,
        };
        if flow == Flow::Close {
            // One more pass writes the queued replies before closing.
            closing = true;
        }
    }
    core.finish();
    let _ = ws.get_ref().shutdown(Shutdown::Both);
    log::info!("session {} closed", p.id);
}
