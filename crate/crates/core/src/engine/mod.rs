//! The stepping context: owns the simulation, drains the command mailbox
//! between iterations and publishes frames to subscribers.

mod command;
mod edit;

pub use command::{
    command_from_message, error_code, message_from_command, Control, Envelope, Geometry, Origin, ParamUpdate,
    SteerCommand,
};
pub use edit::{
    apply_cell_edits, move_wall_region, set_inlet_velocity, set_wall_velocity, CellEdit,
    EditReport,
};

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};

use crate::error::SimError;
use crate::extract::{render, FieldId, Rendered, SliceSpec};
use crate::lattice::FluidParams;
use crate::protocol::{encode_frame, ErrorCode, Message};
use crate::Simulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Configuring,
    Running,
    Paused,
    Diverged,
    Resetting,
}

/// One published snapshot, immutable once created.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub subscription: u32,
    pub iteration: u64,
    pub field: FieldId,
    pub rendered: Rendered,
}

impl Frame {
    pub fn dims(&self) -> [u32; 3] {
        [
            self.rendered.width,
            self.rendered.height,
            self.rendered.components,
        ]
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_frame(
            self.subscription,
            self.iteration,
            self.dims(),
            &self.rendered.data,
        )
        .expect("frames are sized to fit the message cap")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub iteration: u64,
    pub it_per_sec: f64,
    pub mass: f64,
    pub phase: Phase,
}

impl Stats {
    pub fn to_message(&self) -> Message {
        Message::Stats {
            iteration: self.iteration,
            it_per_sec: self.it_per_sec,
            mass: self.mass,
        }
    }
}

/// Replies and published data leaving the engine.
#[derive(Clone, Debug, PartialEq)]
pub enum Outbound {
    Ack(u64),
    Error { code: ErrorCode, text: String },
    Frame(Arc<Frame>),
    Stats(Stats),
}

impl Outbound {
    pub fn to_message(&self) -> Message {
        match self {
            Outbound::Ack(seq) => Message::Ack { seq: *seq },
            Outbound::Error { code, text } => Message::error(*code, text.clone()),
            Outbound::Frame(f) => Message::Frame(crate::protocol::FrameMsg {
                subscription: f.subscription,
                iteration: f.iteration,
                dims: f.dims(),
                data: f.rendered.data.clone(),
            }),
            Outbound::Stats(s) => s.to_message(),
        }
    }
}

/// Where the engine sends replies. Implementations must not block.
pub trait Outbox {
    fn deliver(&self, to: Origin, msg: Outbound);
    fn broadcast(&self, msg: Outbound);
}

/// An outbox that records everything; handy for tests and scripts.
#[derive(Debug, Default)]
pub struct Recorder {
    pub log: Mutex<Vec<(Option<Origin>, Outbound)>>,
}

impl Recorder {
    pub fn take(&self) -> Vec<(Option<Origin>, Outbound)> {
        std::mem::take(&mut *self.log.lock().unwrap())
    }
}

impl Outbox for Recorder {
    fn deliver(&self, to: Origin, msg: Outbound) {
        self.log.lock().unwrap().push((Some(to), msg));
    }

    fn broadcast(&self, msg: Outbound) {
        self.log.lock().unwrap().push((None, msg));
    }
}

/// Sending half of the command queue; cheap to clone, one per producer.
#[derive(Clone, Debug)]
pub struct Mailbox(Sender<Envelope>);

impl Mailbox {
    /// Returns false once the engine has gone away.
    pub fn send(&self, origin: Origin, seq: u64, cmd: SteerCommand) -> bool {
        self.0.send(Envelope { origin, seq, cmd }).is_ok()
    }
}

/// Iterations per second over a sliding window.
#[derive(Debug)]
struct RateMeter {
    window: Duration,
    stamps: VecDeque<Instant>,
}

impl RateMeter {
    fn new(window: Duration) -> Self {
        RateMeter {
            window,
            stamps: VecDeque::new(),
        }
    }

    fn record(&mut self, now: Instant) {
        self.stamps.push_back(now);
        while self
            .stamps
            .front()
            .is_some_and(|&t| now.duration_since(t) > self.window)
        {
            self.stamps.pop_front();
        }
    }

    fn rate(&self) -> f64 {
        match (self.stamps.front(), self.stamps.back()) {
            (Some(a), Some(b)) if self.stamps.len() > 1 && b > a => {
                (self.stamps.len() - 1) as f64 / b.duration_since(*a).as_secs_f64()
            }
            _ => 0.0,
        }
    }

    fn clear(&mut self) {
        self.stamps.clear();
    }
}

#[derive(Clone, Debug)]
struct Subscription {
    field: FieldId,
    slice: SliceSpec,
    every_n: u32,
    last: Option<u64>,
}

/// Latest engine stats, readable from any thread.
#[derive(Debug)]
pub struct StatusBoard(Mutex<Stats>);

impl StatusBoard {
    pub fn get(&self) -> Stats {
        *self.0.lock().unwrap()
    }
}

/// What one [`Engine::tick`] did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tick {
    pub applied: usize,
    pub stepped: bool,
    pub diverged: bool,
}

pub struct Engine {
    sim: Simulation,
    params: FluidParams,
    parallel: bool,
    phase: Phase,
    resume_running: bool,
    rx: Receiver<Envelope>,
    tx: Sender<Envelope>,
    pending_steps: u64,
    step_ack: Option<(Origin, u64)>,
    subs: BTreeMap<(Origin, u32), Subscription>,
    rate: RateMeter,
    status: Arc<StatusBoard>,
    last_divergence: Option<SimError>,
}

impl Engine {
    /// Wraps a freshly built simulation; the engine starts in Configuring.
    pub fn new(sim: Simulation) -> (Engine, Mailbox) {
        let (tx, rx) = crossbeam_channel::unbounded();
        let params = sim.params();
        let stats = Stats {
            iteration: sim.iteration(),
            it_per_sec: 0.0,
            mass: sim.total_mass(),
            phase: Phase::Configuring,
        };
        let engine = Engine {
            parallel: false,
            params,
            phase: Phase::Configuring,
            resume_running: false,
            rx,
            tx: tx.clone(),
            pending_steps: 0,
            step_ack: None,
            subs: BTreeMap::new(),
            rate: RateMeter::new(Duration::from_secs(2)),
            status: Arc::new(StatusBoard(Mutex::new(stats))),
            last_divergence: None,
            sim,
        };
        (engine, Mailbox(tx))
    }

    pub fn mailbox(&self) -> Mailbox {
        Mailbox(self.tx.clone())
    }

    pub fn sim(&self) -> &Simulation {
        &self.sim
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn iteration(&self) -> u64 {
        self.sim.iteration()
    }

    pub fn status(&self) -> Arc<StatusBoard> {
        self.status.clone()
    }

    pub fn last_divergence(&self) -> Option<&SimError> {
        self.last_divergence.as_ref()
    }

    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
        self.sim.set_parallel(parallel);
    }

    /// Puts the engine straight into Running, as a scenario start does.
    pub fn start(&mut self) {
        if self.phase == Phase::Configuring || self.phase == Phase::Paused {
            self.phase = Phase::Running;
        }
    }

    pub fn stats(&self) -> Stats {
        Stats {
            iteration: self.sim.iteration(),
            it_per_sec: self.rate.rate(),
            mass: self.sim.total_mass(),
            phase: self.phase,
        }
    }

    fn refresh_status(&self) {
        *self.status.0.lock().unwrap() = self.stats();
    }

    pub fn subscription_count(&self) -> usize {
        self.subs.len()
    }

    fn wants_step(&self) -> bool {
        self.phase != Phase::Diverged && (self.phase == Phase::Running || self.pending_steps > 0)
    }

    /// Applies queued commands in arrival order. Stops after a STEP_N so
    /// the commands behind it see the requested iterations first; does
    /// nothing while such steps are outstanding.
    pub fn drain_and_apply(&mut self, out: &dyn Outbox) -> usize {
        let mut applied = 0;
        while self.pending_steps == 0 {
            let Ok(env) = self.rx.try_recv() else { break };
            self.apply(env, out);
            applied += 1;
        }
        applied
    }

    fn reply_error(&self, out: &dyn Outbox, origin: Origin, seq: u64, code: ErrorCode, text: &str) {
        out.deliver(
            origin,
            Outbound::Error {
                code,
                text: format!("#{seq} {text}"),
            },
        );
    }

    /// Applies one command and replies to its origin. Returns whether it
    /// was accepted.
    pub fn apply(&mut self, env: Envelope, out: &dyn Outbox) -> bool {
        let Envelope { origin, seq, cmd } = env;
        if let SteerCommand::Disconnect = cmd {
            self.subs.retain(|(o, _), _| *o != origin);
            if self.step_ack.is_some_and(|(o, _)| o == origin) {
                self.step_ack = None;
            }
            return true;
        }
        if self.phase == Phase::Diverged && !matches!(cmd, SteerCommand::Control(Control::Reset(_)))
        {
            self.reply_error(
                out,
                origin,
                seq,
                ErrorCode::State,
                &format!("{} rejected: simulation diverged, send RESET", cmd.name()),
            );
            return false;
        }
        let result = self.execute(origin, seq, cmd, out);
        match result {
            Ok(Reply::Ack) => {
                out.deliver(origin, Outbound::Ack(seq));
                true
            }
            Ok(Reply::Deferred) => true,
            Err((code, text)) => {
                self.reply_error(out, origin, seq, code, &text);
                false
            }
        }
    }

    fn execute(
        &mut self,
        origin: Origin,
        seq: u64,
        cmd: SteerCommand,
        out: &dyn Outbox,
    ) -> Result<Reply, (ErrorCode, String)> {
        let sim_err = |e: SimError| (error_code(&e), e.to_string());
        match cmd {
            SteerCommand::SetCells(edits) => {
                apply_cell_edits(&mut self.sim, &edits).map_err(sim_err)?;
            }
            SteerCommand::MoveWallRegion { region, offset } => {
                move_wall_region(&mut self.sim, region, offset).map_err(sim_err)?;
            }
            SteerCommand::SetParam(p) => match p {
                ParamUpdate::Tau(tau) => {
                    let params = FluidParams::new(tau, self.params.gravity).map_err(sim_err)?;
                    self.sim.set_params(params).map_err(sim_err)?;
                    self.params = params;
                }
                ParamUpdate::Gravity(g) => {
                    let params = FluidParams::new(self.params.tau, g).map_err(sim_err)?;
                    self.sim.set_params(params).map_err(sim_err)?;
                    self.params = params;
                }
                ParamUpdate::InletVelocity { u, region } => {
                    set_inlet_velocity(&mut self.sim, u, region).map_err(sim_err)?;
                }
                ParamUpdate::WallVelocity { u, region } => {
                    set_wall_velocity(&mut self.sim, u, region).map_err(sim_err)?;
                }
            },
            SteerCommand::Control(c) => match c {
                Control::Start => match self.phase {
                    Phase::Configuring | Phase::Paused | Phase::Running => {
                        self.phase = Phase::Running
                    }
                    p => return Err((ErrorCode::State, format!("cannot start from {p:?}"))),
                },
                Control::Pause => match self.phase {
                    Phase::Running | Phase::Paused => self.phase = Phase::Paused,
                    p => return Err((ErrorCode::State, format!("cannot pause from {p:?}"))),
                },
                Control::Resume => match self.phase {
                    Phase::Paused | Phase::Running => self.phase = Phase::Running,
                    p => return Err((ErrorCode::State, format!("cannot resume from {p:?}"))),
                },
                Control::Reset(geometry) => {
                    let running = self.phase == Phase::Running
                        || (self.phase == Phase::Diverged && self.resume_running);
                    let before = self.phase;
                    self.phase = Phase::Resetting;
                    if let Err(e) = self.load(&geometry, out) {
                        self.phase = before;
                        return Err(sim_err(e));
                    }
                    self.phase = if running {
                        Phase::Running
                    } else {
                        Phase::Configuring
                    };
                    out.deliver(origin, Outbound::Ack(seq));
                    self.publish_due(out);
                    return Ok(Reply::Deferred);
                }
                Control::StepN(n) => {
                    if n == 0 {
                        return Ok(Reply::Ack);
                    }
                    self.pending_steps = n;
                    self.step_ack = Some((origin, seq));
                    return Ok(Reply::Deferred);
                }
            },
            SteerCommand::Geometry(geometry) => {
                self.load(&geometry, out).map_err(sim_err)?;
                self.phase = Phase::Configuring;
                out.deliver(origin, Outbound::Ack(seq));
                self.publish_due(out);
                return Ok(Reply::Deferred);
            }
            SteerCommand::Subscribe {
                field,
                slice,
                every_n,
            } => {
                if every_n == 0 {
                    return Err((ErrorCode::Subscription, "every_n must be at least 1".into()));
                }
                self.check_subscription(field, slice)
                    .map_err(|e| (ErrorCode::Subscription, e))?;
                let id = seq as u32;
                self.subs.insert(
                    (origin, id),
                    Subscription {
                        field,
                        slice,
                        every_n,
                        last: None,
                    },
                );
                out.deliver(origin, Outbound::Ack(seq));
                self.publish_one(origin, id, out);
                return Ok(Reply::Deferred);
            }
            SteerCommand::Unsubscribe { id } => {
                if self.subs.remove(&(origin, id)).is_none() {
                    return Err((ErrorCode::Subscription, format!("no subscription {id}")));
                }
            }
            SteerCommand::Disconnect => unreachable!(),
        }
        Ok(Reply::Ack)
    }

    fn check_subscription(&self, field: FieldId, slice: SliceSpec) -> Result<(), String> {
        let dims = self.sim.dims();
        if field == FieldId::Isosurface {
            return if dims.is_2d() {
                Err("isosurface needs a 3D lattice".into())
            } else {
                Ok(())
            };
        }
        slice.validate(dims).map_err(|e| e.to_string())
    }

    /// Replaces the simulation by one built from `geometry`, keeping the
    /// current fluid parameters. Subscriptions that no longer fit are
    /// cancelled with an error.
    fn load(&mut self, geometry: &Geometry, out: &dyn Outbox) -> Result<(), SimError> {
        let (mut sim, repaired) = geometry.build(self.params)?;
        if !repaired.is_empty() {
            log::info!("geometry repair turned {} cells into interface", repaired.len());
        }
        sim.set_parallel(self.parallel);
        self.sim = sim;
        self.pending_steps = 0;
        self.step_ack = None;
        self.rate.clear();
        self.last_divergence = None;
        let stale: Vec<(Origin, u32)> = self
            .subs
            .iter()
            .filter(|(_, s)| self.check_subscription(s.field, s.slice).is_err())
            .map(|(k, _)| *k)
            .collect();
        for key in stale {
            self.subs.remove(&key);
            out.deliver(
                key.0,
                Outbound::Error {
                    code: ErrorCode::Subscription,
                    text: format!("#{} subscription cancelled: slice outside new geometry", key.1),
                },
            );
        }
        for s in self.subs.values_mut() {
            s.last = None;
        }
        self.refresh_status();
        Ok(())
    }

    fn publish_one(&mut self, origin: Origin, id: u32, out: &dyn Outbox) {
        let iteration = self.sim.iteration();
        let Some(sub) = self.subs.get_mut(&(origin, id)) else {
            return;
        };
        if iteration % sub.every_n as u64 != 0 || sub.last == Some(iteration) {
            return;
        }
        sub.last = Some(iteration);
        let (field, slice) = (sub.field, sub.slice);
        match render(self.sim.field(), self.sim.flags(), field, slice) {
            Ok(rendered) => out.deliver(
                origin,
                Outbound::Frame(Arc::new(Frame {
                    subscription: id,
                    iteration,
                    field,
                    rendered,
                })),
            ),
            Err(e) => {
                self.subs.remove(&(origin, id));
                out.deliver(
                    origin,
                    Outbound::Error {
                        code: ErrorCode::Subscription,
                        text: format!("#{id} subscription cancelled: {e}"),
                    },
                );
            }
        }
    }

    /// Publishes a frame for every subscription due at this iteration.
    pub fn publish_due(&mut self, out: &dyn Outbox) {
        let keys: Vec<(Origin, u32)> = self.subs.keys().copied().collect();
        for (origin, id) in keys {
            self.publish_one(origin, id, out);
        }
    }

    /// Advances one iteration if the phase (or an outstanding STEP_N) asks
    /// for it, then publishes due frames.
    pub fn step_once(&mut self, out: &dyn Outbox) -> Option<Result<(), SimError>> {
        if !self.wants_step() {
            return None;
        }
        match self.sim.step() {
            Ok(_) => {
                self.rate.record(Instant::now());
                self.publish_due(out);
                // Acked after the frames of its last iteration.
                if self.pending_steps > 0 {
                    self.pending_steps -= 1;
                    if self.pending_steps == 0 {
                        if let Some((origin, seq)) = self.step_ack.take() {
                            out.deliver(origin, Outbound::Ack(seq));
                        }
                    }
                }
                Some(Ok(()))
            }
            Err(e) => {
                log::warn!("{e}");
                self.resume_running = self.phase == Phase::Running;
                self.phase = Phase::Diverged;
                self.pending_steps = 0;
                self.step_ack = None;
                out.broadcast(Outbound::Error {
                    code: ErrorCode::Divergence,
                    text: e.to_string(),
                });
                self.last_divergence = Some(e.clone());
                Some(Err(e))
            }
        }
    }

    /// One iteration boundary: drain commands, then step if due.
    pub fn tick(&mut self, out: &dyn Outbox) -> Tick {
        let applied = self.drain_and_apply(out);
        let step = self.step_once(out);
        Tick {
            applied,
            stepped: matches!(step, Some(Ok(()))),
            diverged: matches!(step, Some(Err(_))),
        }
    }

    /// Runs until `shutdown` is set, broadcasting STATS every
    /// `stats_period`. Blocks on the mailbox while there is nothing to step.
    pub fn run(&mut self, out: &dyn Outbox, shutdown: &AtomicBool, stats_period: Duration) {
        let mut next_stats = Instant::now() + stats_period;
        while !shutdown.load(Ordering::Relaxed) {
            let t = self.tick(out);
            let now = Instant::now();
            if t.stepped {
                self.refresh_status();
            }
            if now >= next_stats {
                self.refresh_status();
                out.broadcast(Outbound::Stats(self.stats()));
                next_stats = now + stats_period;
            }
            if !t.stepped && !self.wants_step() {
                let wait = next_stats
                    .saturating_duration_since(now)
                    .min(Duration::from_millis(50));
                match self.rx.recv_timeout(wait) {
                    Ok(env) => {
                        self.apply(env, out);
                        self.refresh_status();
                    }
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
        }
        // Commands already queued (disconnects in particular) still land.
        self.drain_and_apply(out);
        self.refresh_status();
    }
}

enum Reply {
    Ack,
    Deferred,
}
