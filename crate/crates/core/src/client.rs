//! Blocking steering client for scripts and tests, over TCP or WebSocket.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use tungstenite::stream::MaybeTlsStream;
use tungstenite::WebSocket;

use crate::protocol::{decode_all, encode, Decoder, ErrorCode, Message, PROTOCOL_VERSION};

enum Link {
    Tcp(TcpStream),
    Ws(Box<WebSocket<MaybeTlsStream<TcpStream>>>),
}

/// Outcome of one command.
#[derive(Clone, Debug, PartialEq)]
pub enum Reply {
    Ack,
    Error { code: u16, text: String },
}

pub struct Client {
    link: Link,
    decoder: Decoder,
    inbox: VecDeque<Message>,
    seq: u64,
}

fn proto_err(e: impl ToString) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

impl Client {
    pub fn connect_tcp(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            link: Link::Tcp(stream),
            decoder: Decoder::new(),
            inbox: VecDeque::new(),
            seq: 0,
        })
    }

    /// `url` like `ws://127.0.0.1:7071/`.
    pub fn connect_ws(url: &str) -> io::Result<Self> {
        let (ws, _) = tungstenite::connect(url).map_err(io::Error::other)?;
        if let MaybeTlsStream::Plain(s) = ws.get_ref() {
            s.set_nodelay(true)?;
        }
        Ok(Client {
            link: Link::Ws(Box::new(ws)),
            decoder: Decoder::new(),
            inbox: VecDeque::new(),
            seq: 0,
        })
    }

    /// Sends HELLO and waits for the server's HELLO (or its refusal).
    pub fn hello(&mut self) -> io::Result<()> {
        self.hello_with(PROTOCOL_VERSION)
    }

    pub fn hello_with(&mut self, version: u16) -> io::Result<()> {
        self.send(&Message::Hello { version })?;
        match self.recv()? {
            Message::Hello { .. } => Ok(()),
            Message::Error { code, text } => Err(proto_err(format!("refused ({code}): {text}"))),
            other => Err(proto_err(format!("expected HELLO, got {}", other.name()))),
        }
    }

    /// Sends one message; returns the sequence number the server assigns
    /// to it (0 for HELLO and BYE, which are not numbered).
    pub fn send(&mut self, msg: &Message) -> io::Result<u64> {
        let bytes = encode(msg).map_err(proto_err)?;
        self.send_raw(&bytes)?;
        Ok(match msg {
            Message::Hello { .. } | Message::Bye => 0,
            _ => {
                self.seq += 1;
                self.seq
            }
        })
    }

    /// Writes bytes as-is (one WebSocket frame on that transport).
    pub fn send_raw(&mut self, bytes: &[u8]) -> io::Result<()> {
        match &mut self.link {
            Link::Tcp(s) => s.write_all(bytes),
            Link::Ws(ws) => ws
                .send(tungstenite::Message::Binary(bytes.to_vec()))
                .map_err(io::Error::other),
        }
    }

    fn fill(&mut self, timeout: Option<Duration>) -> io::Result<bool> {
        match &mut self.link {
            Link::Tcp(s) => {
                s.set_read_timeout(timeout)?;
                let mut buf = [0u8; 64 * 1024];
                match s.read(&mut buf) {
                    Ok(0) => Err(io::ErrorKind::UnexpectedEof.into()),
                    Ok(n) => {
                        self.decoder.push(&buf[..n]);
                        while let Some(m) = self.decoder.next_message().map_err(proto_err)? {
                            self.inbox.push_back(m);
                        }
                        Ok(true)
                    }
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                        Ok(false)
                    }
                    Err(e) => Err(e),
                }
            }
            Link::Ws(ws) => {
                if let MaybeTlsStream::Plain(s) = ws.get_ref() {
                    s.set_read_timeout(timeout)?;
                }
                match ws.read() {
                    Ok(tungstenite::Message::Binary(b)) => {
                        self.inbox.extend(decode_all(&b).map_err(proto_err)?);
                        Ok(true)
                    }
                    Ok(tungstenite::Message::Close(_)) => Err(io::ErrorKind::UnexpectedEof.into()),
                    Ok(_) => Ok(true),
                    Err(tungstenite::Error::Io(e))
                        if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                    {
                        Ok(false)
                    }
                    Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                        Err(io::ErrorKind::UnexpectedEof.into())
                    }
                    Err(e) => Err(io::Error::other(e)),
                }
            }
        }
    }

    pub fn recv(&mut self) -> io::Result<Message> {
        loop {
            if let Some(m) = self.inbox.pop_front() {
                return Ok(m);
            }
            self.fill(None)?;
        }
    }

    /// `Ok(None)` when nothing arrived within `timeout`.
    pub fn recv_timeout(&mut self, timeout: Duration) -> io::Result<Option<Message>> {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(m) = self.inbox.pop_front() {
                return Ok(Some(m));
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.fill(Some(left))?;
        }
    }

    /// Sends a command and reads until its ACK or ERROR, handing every
    /// other message to `other`.
    pub fn command_with(
        &mut self,
        msg: &Message,
        mut other: impl FnMut(Message),
    ) -> io::Result<Reply> {
        let seq = self.send(msg)?;
        let tag = format!("#{seq} ");
        loop {
            match self.recv()? {
                Message::Ack { seq: s } if s == seq => return Ok(Reply::Ack),
                Message::Error { code, text }
                    if text.starts_with(&tag) || code == ErrorCode::Divergence as u16 =>
                {
                    return Ok(Reply::Error { code, text })
                }
                m => other(m),
            }
        }
    }

    /// [`command_with`](Self::command_with), keeping the other messages in
    /// arrival order.
    pub fn command(&mut self, msg: &Message) -> io::Result<(Reply, Vec<Message>)> {
        let mut seen = Vec::new();
        let reply = self.command_with(msg, |m| seen.push(m))?;
        Ok((reply, seen))
    }

    /// Sends BYE and waits for the server to close the connection.
    pub fn bye(mut self) -> io::Result<()> {
        self.send(&Message::Bye)?;
        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            match self.fill(Some(Duration::from_millis(100))) {
                Ok(_) => self.inbox.clear(),
                Err(_) => return Ok(()),
            }
        }
        Err(io::ErrorKind::TimedOut.into())
    }

    /// The raw TCP stream, for fault injection in tests.
    pub fn tcp_stream(&self) -> Option<&TcpStream> {
        match &self.link {
            Link::Tcp(s) => Some(s),
            Link::Ws(_) => None,
        }
    }
}
