use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use crate::engine::Outbound;
use crate::protocol::Message;

/// Something waiting to be written to one client.
#[derive(Clone, Debug)]
pub enum Outgoing {
    Engine(Outbound),
    /// Session-level replies (HELLO, protocol errors).
    Direct(Message),
}

impl Outgoing {
    fn subscription(&self) -> Option<u32> {
        match self {
            Outgoing::Engine(Outbound::Frame(f)) => Some(f.subscription),
            _ => None,
        }
    }
}

#[derive(Debug, Default)]
struct State {
    items: VecDeque<Outgoing>,
    frames: usize,
    closed: bool,
    dropped: u64,
}

/// Per-session send queue. At most `depth` FRAMEs wait at once; a new
/// frame beyond that evicts the oldest queued frame of the same
/// subscription (or the oldest frame of any subscription). Other messages
/// are never dropped. Pushing never blocks.
#[derive(Debug)]
pub struct SendQueue {
    state: Mutex<State>,
    ready: Condvar,
    depth: usize,
}

impl SendQueue {
    pub fn new(depth: usize) -> Self {
        SendQueue {
            state: Mutex::new(State::default()),
            ready: Condvar::new(),
            depth: depth.max(1),
        }
    }

    pub fn push(&self, item: Outgoing) {
        let mut s = self.state.lock().unwrap();
        if s.closed {
            return;
        }
        if let Some(sub) = item.subscription() {
            if s.frames >= self.depth {
                let victim = s
                    .items
                    .iter()
                    .position(|i| i.subscription() == Some(sub))
                    .or_else(|| s.items.iter().position(|i| i.subscription().is_some()));
                if let Some(k) = victim {
                    s.items.remove(k);
                    s.frames -= 1;
                    s.dropped += 1;
                }
            }
            s.frames += 1;
        }
        s.items.push_back(item);
        drop(s);
        self.ready.notify_one();
    }

    fn take(s: &mut State) -> Option<Outgoing> {
        let item = s.items.pop_front()?;
        if item.subscription().is_some() {
            s.frames -= 1;
        }
        Some(item)
    }

    /// Blocks until an item is available or the queue is closed and empty.
    pub fn pop(&self) -> Option<Outgoing> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(item) = Self::take(&mut s) {
                return Some(item);
            }
            if s.closed {
                return None;
            }
            s = self.ready.wait(s).unwrap();
        }
    }

    /// Like [`pop`](Self::pop) but gives up after `timeout`.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<Outgoing> {
        let mut s = self.state.lock().unwrap();
        if s.items.is_empty() && !s.closed {
            s = self.ready.wait_timeout(s, timeout).unwrap().0;
        }
        Self::take(&mut s)
    }

    pub fn try_pop(&self) -> Option<Outgoing> {
        Self::take(&mut self.state.lock().unwrap())
    }

    /// Stops accepting items; queued items can still be popped.
    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queued_frames(&self) -> usize {
        self.state.lock().unwrap().frames
    }

    /// Frames evicted so far.
    pub fn dropped(&self) -> u64 {
        self.state.lock().unwrap().dropped
    }
}
