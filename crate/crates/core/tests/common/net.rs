use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::time::{Duration, Instant};

use lbsteer::client::{Client, Reply};
use lbsteer::engine::{message_from_command, Engine, Geometry};
use lbsteer::extract::FieldId;
use lbsteer::protocol::{FrameMsg, Message};
use lbsteer::runner::{FrameDump, FrameHeader};
use lbsteer::scenario::Scenario;
use lbsteer::server::{self, ServerConfig, ServerHandle};
use lbsteer::Simulation;

use super::dam_flags;
use lbsteer::boundary::{CellFlags, CellType};
use lbsteer::lattice::{Dims, FluidParams, Lattice};

pub fn local_config() -> ServerConfig {
    ServerConfig {
        bind_tcp: Some("127.0.0.1:0".into()),
        bind_ws: Some("127.0.0.1:0".into()),
        stats_period: Duration::from_millis(200),
        ..ServerConfig::default()
    }
}

pub fn serve_sim(sim: Simulation, running: bool) -> ServerHandle {
    let (mut engine, _) = Engine::new(sim);
    if running {
        engine.start();
    }
    server::serve(engine, &local_config()).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Via {
    Tcp,
    Ws,
}

pub fn connect(server: &ServerHandle, via: Via) -> Client {
    let c = match via {
        Via::Tcp => Client::connect_tcp(server.tcp_addr().unwrap()),
        Via::Ws => Client::connect_ws(&ws_url(server.ws_addr().unwrap())),
    };
    c.unwrap()
}

pub fn ws_url(addr: SocketAddr) -> String {
    format!("ws://{addr}/")
}

pub fn wait_until(timeout: Duration, mut f: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if f() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    f()
}

pub fn dam_geometry(nx: usize, ny: usize) -> Geometry {
    Geometry {
        flags: dam_flags(Dims::new_2d(nx, ny), nx / 3, 2 * ny / 3),
    }
}

/// What a scripted HELLO -> GEOMETRY -> START -> SUBSCRIBE session saw.
#[derive(Debug)]
pub struct SessionLog {
    pub every_n: u32,
    pub subscription: u32,
    pub frames: Vec<FrameMsg>,
    pub replies: Vec<Reply>,
    pub stats_seen: usize,
    pub dropped: u64,
}

impl SessionLog {
    pub fn iterations(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.iteration).collect()
    }

    /// Strictly increasing, on the cadence, with no gaps.
    pub fn on_cadence(&self) -> bool {
        let it = self.iterations();
        !it.is_empty()
            && it.iter().all(|i| i % self.every_n as u64 == 0)
            && it.windows(2).all(|w| w[1] == w[0] + self.every_n as u64)
    }
}

pub fn fig19_session(via: Via, frames: usize) -> SessionLog {
    // The initial grid only supplies tau and gravity; GEOMETRY replaces it.
    let params = FluidParams::new(0.7, [0.0, -1e-4, 0.0]).unwrap();
    let (sim, _) = Simulation::from_flags(
        Lattice::D2Q9,
        CellFlags::new(Dims::new_2d(8, 8), CellType::Fluid),
        params,
    )
    .unwrap();
    let server = serve_sim(sim, false);
    let mut client = connect(&server, via);
    client.hello().unwrap();
    let mut stats_seen = 0;
    let mut frames_seen = Vec::new();
    let mut replies = Vec::new();
    let every_n = 5;
    let sort = |m: Message, frames_seen: &mut Vec<FrameMsg>, stats_seen: &mut usize| match m {
        Message::Frame(f) => frames_seen.push(f),
        Message::Stats { .. } => *stats_seen += 1,
        other => panic!("unexpected {other:?}"),
    };
    let geometry = Message::Geometry(dam_geometry(96, 64).to_message());
    for msg in [geometry, Message::Start] {
        let r = client
            .command_with(&msg, |m| sort(m, &mut frames_seen, &mut stats_seen))
            .unwrap();
        replies.push(r);
    }
    let subscribe = Message::Subscribe {
        field: FieldId::Fill as u16,
        axis: 2,
        index: 0,
        every_n,
    };
    let seq = {
        let r = client
            .command_with(&subscribe, |m| sort(m, &mut frames_seen, &mut stats_seen))
            .unwrap();
        replies.push(r);
        3
    };
    while frames_seen.len() < frames {
        let m = client.recv_timeout(Duration::from_secs(20)).unwrap().expect("frame");
        sort(m, &mut frames_seen, &mut stats_seen);
    }
    let dropped = server.session_queues().iter().map(|q| q.2).sum();
    client.bye().unwrap();
    server.shutdown();
    SessionLog {
        every_n,
        subscription: seq,
        frames: frames_seen,
        replies,
        stats_seen,
        dropped,
    }
}

/// Drives `scenario` over TCP with STEP_N chunks of the output cadence,
/// sending each scheduled command at its iteration, and dumps every
/// received frame into `dir`. Returns the command replies.
pub fn network_run(scenario: &Scenario, seed: u64, iterations: u64, dir: &Path) -> Vec<Reply> {
    let (sim, _) = scenario.build(seed).unwrap();
    let server = serve_sim(sim, false);
    let mut client = connect(&server, Via::Tcp);
    client.hello().unwrap();
    let dump = FrameDump::create(dir).unwrap();
    let mut names: HashMap<u32, FieldId> = HashMap::new();
    let mut replies = Vec::new();

    let handle = |m: Message, names: &HashMap<u32, FieldId>| {
        if let Message::Frame(f) = m {
            let field = names[&f.subscription];
            let [width, height, components] = f.dims;
            dump.submit(
                FrameHeader {
                    field: field.name().to_string(),
                    iteration: f.iteration,
                    width,
                    height,
                    components,
                },
                f.data,
            );
        }
    };

    let mut fields = scenario.fields.clone();
    fields.dedup();
    for field in fields {
        let msg = Message::Subscribe {
            field: field as u16,
            axis: scenario.slice.axis as u8,
            index: scenario.slice.index,
            every_n: scenario.output_every as u32,
        };
        // The subscription id is the low half of the sequence number, which
        // the client counts the same way the server does.
        let (reply, seen) = client.command(&msg).unwrap();
        let seq = replies.len() as u32 + 1;
        names.insert(seq, field);
        replies.push(reply);
        for m in seen {
            handle(m, &names);
        }
    }

    let mut schedule: BTreeMap<u64, Vec<Message>> = BTreeMap::new();
    for s in &scenario.schedule {
        if let Some(m) = message_from_command(&s.cmd) {
            schedule.entry(s.at).or_default().push(m);
        }
    }
    let mut now = 0;
    loop {
        if let Some(cmds) = schedule.remove(&now) {
            for m in cmds {
                let (reply, seen) = client.command(&m).unwrap();
                replies.push(reply);
                for m in seen {
                    handle(m, &names);
                }
            }
        }
        if now >= iterations {
            break;
        }
        let next_cmd = schedule.keys().next().copied().unwrap_or(u64::MAX);
        let chunk = (scenario.output_every - now % scenario.output_every)
            .min(iterations - now)
            .min(next_cmd - now);
        let (reply, seen) = client.command(&Message::StepN { n: chunk }).unwrap();
        assert_eq!(reply, Reply::Ack, "STEP_N at {now}");
        for m in seen {
            handle(m, &names);
        }
        now += chunk;
    }
    let dropped: u64 = server.session_queues().iter().map(|q| q.2).sum();
    assert_eq!(dropped, 0, "frames were dropped");
    client.bye().unwrap();
    server.shutdown();
    dump.finish().unwrap();
    replies
}

/// Names of differing or one-sided files between two dump directories.
pub fn dump_differences(a: &Path, b: &Path) -> Vec<String> {
    let list = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
            .collect()
    };
    let (la, lb) = (list(a), list(b));
    let mut diff: Vec<String> = la
        .iter()
        .filter(|(k, v)| lb.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    diff.extend(lb.keys().filter(|k| !la.contains_key(*k)).cloned());
    diff
}

pub fn count_files(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().count()
}

fn rate_over(server: &ServerHandle, window: Duration) -> f64 {
    let (i0, t0) = (server.iteration(), Instant::now());
    std::thread::sleep(window);
    (server.iteration() - i0) as f64 / t0.elapsed().as_secs_f64()
}

/// Engine throughput with no client against the same engine while a
/// client that never reads holds a subscription. Alternates the two
/// conditions `rounds` times and returns the medians
/// `(baseline, stalled, frames dropped for the stalled client)`.
pub fn stall_rates(sim: Simulation, every_n: u32, rounds: usize, window: Duration) -> (f64, f64, u64) {
    let server = serve_sim(sim, true);
    let addr = server.tcp_addr().unwrap();
    let mut base = Vec::new();
    let mut stalled = Vec::new();
    let mut dropped = 0;
    std::thread::sleep(window / 2);
    for _ in 0..rounds {
        base.push(rate_over(&server, window));

        let mut c = Client::connect_tcp(addr).unwrap();
        c.hello().unwrap();
        c.send(&Message::Subscribe {
            field: FieldId::VelocityXY as u16,
            axis: 2,
            index: 0,
            every_n,
        })
        .unwrap();
        // Let the socket buffers and the send queue fill up.
        assert!(wait_until(Duration::from_secs(30), || server
            .session_queues()
            .iter()
            .any(|q| q.2 > 0)));
        stalled.push(rate_over(&server, window));
        dropped += server.session_queues().iter().map(|q| q.2).sum::<u64>();
        c.tcp_stream().unwrap().shutdown(std::net::Shutdown::Both).unwrap();
        drop(c);
        assert!(wait_until(Duration::from_secs(10), || server.session_count() == 0));
    }
    server.shutdown();
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    (median(&mut base), median(&mut stalled), dropped)
}
