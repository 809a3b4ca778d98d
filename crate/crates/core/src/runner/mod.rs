//! Headless scenario runs and throughput benchmarks.

mod bench;
mod dump;

pub use bench::{benchmark, hardware_string, BenchOptions, BenchReport};
pub use dump::{read_frame, write_csv, write_frame_files, FrameDump, FrameHeader};

use std::fmt;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::boundary::CellType;
use crate::engine::{Engine, Origin, Outbound, Outbox, SteerCommand};
use crate::error::SimError;
use crate::protocol::ErrorCode;
use crate::scenario::{Scenario, ScenarioError};
use crate::Simulation;

/// Sequence numbers used for scripted commands; subscriptions take 1..
pub const SCRIPT_SEQ_BASE: u64 = 1_000_000;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Frame output directory; no frames are written without one.
    pub out: Option<PathBuf>,
    /// Overrides the scenario's run length.
    pub iterations: Option<u64>,
    pub seed: u64,
    pub parallel: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub name: String,
    pub cells: usize,
    pub iterations: u64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_speed: f64,
    pub wall_time: Duration,
    pub frames_written: usize,
    /// `(iteration, x)` of the furthest cell at least half full, sampled at
    /// the output cadence. Empty without a free surface.
    pub front: Vec<(u64, f64)>,
    /// Rejected scripted commands as `(iteration, message)`.
    pub command_errors: Vec<(u64, String)>,
    pub divergence: Option<SimError>,
}

impl RunReport {
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass) / self.initial_mass
    }

    /// The last iteration whose state was committed.
    pub fn last_stable_iteration(&self) -> u64 {
        self.iterations
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario      {}", self.name)?;
        writeln!(f, "cells         {}", self.cells)?;
        writeln!(f, "iterations    {}", self.iterations)?;
        writeln!(f, "mass          {:.9} -> {:.9}", self.initial_mass, self.final_mass)?;
        writeln!(f, "mass drift    {:.3e}", self.mass_drift())?;
        writeln!(f, "max |u|       {:.6}", self.max_speed)?;
        writeln!(f, "wall time     {:.3} s", self.wall_time.as_secs_f64())?;
        writeln!(f, "frames        {}", self.frames_written)?;
        if !self.front.is_empty() {
            let series: Vec<String> = self
                .front
                .iter()
                .map(|(it, x)| format!("{it}:{x:.1}"))
                .collect();
            writeln!(f, "front         {}", series.join(" "))?;
        }
        for (it, e) in &self.command_errors {
            writeln!(f, "command error at {it}: {e}")?;
        }
        if let Some(e) = &self.divergence {
            writeln!(f, "DIVERGED      {e}")?;
            writeln!(f, "last stable   {}", self.last_stable_iteration())?;
        }
        Ok(())
    }
}

/// Furthest x (cell centre) of any liquid cell with fill >= 0.5.
pub fn front_position(sim: &Simulation) -> Option<f64> {
    let dims = sim.dims();
    let flags = sim.flags();
    (0..dims.cells())
        .filter(|&c| flags.kind(c).is_liquid() && flags.fill(c) >= 0.5)
        .map(|c| dims.coords(c)[0] as f64)
        .reduce(f64::max)
}

struct ScriptOutbox {
    dump: Option<FrameDump>,
    errors: Mutex<Vec<String>>,
}

impl Outbox for ScriptOutbox {
    fn deliver(&self, _to: Origin, msg: Outbound) {
        self.broadcast(msg)
    }

    fn broadcast(&self, msg: Outbound) {
        match msg {
            Outbound::Frame(frame) => {
                if let Some(d) = &self.dump {
                    d.submit_frame(frame);
                }
            }
            Outbound::Error {
                code: ErrorCode::Divergence,
                ..
            } => {}
            Outbound::Error { text, .. } => self.errors.lock().unwrap().push(text),
            Outbound::Ack(_) | Outbound::Stats(_) => {}
        }
    }
}

/// Runs a scenario to completion without any client attached. Scheduled
/// commands due at iteration `k` are applied at the boundary before the
/// step from `k` to `k + 1`.
pub fn run_headless(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    let (sim, _) = scenario.build(opts.seed)?;
    let (mut engine, mailbox) = Engine::new(sim);
    engine.set_parallel(opts.parallel);
    let dump = opts
        .out
        .as_deref()
        .map(FrameDump::create)
        .transpose()
        .map_err(|source| ScenarioError::Io {
            path: opts.out.as_ref().unwrap().display().to_string(),
            source,
        })?;
    let out = ScriptOutbox {
        dump,
        errors: Mutex::new(Vec::new()),
    };

    let mut fields = scenario.fields.clone();
    fields.dedup();
    for (k, &field) in fields.iter().enumerate() {
        mailbox.send(
            Origin::Script,
            k as u64 + 1,
            SteerCommand::Subscribe {
                field,
                slice: scenario.slice,
                every_n: scenario.output_every.min(u32::MAX as u64) as u32,
            },
        );
    }
    engine.drain_and_apply(&out);
    engine.start();

    let target = opts.iterations.unwrap_or(scenario.iterations);
    let free_surface = engine.sim().flags().has_free_surface()
        || engine.sim().flags().count(CellType::Gas) > 0;
    let initial_mass = engine.sim().total_mass();
    let mut max_speed = 0.0f64;
    let mut front = Vec::new();
    let mut command_errors = Vec::new();
    let mut next = 0;
    let started = Instant::now();

    let sample = |engine: &Engine, front: &mut Vec<(u64, f64)>, max_speed: &mut f64| {
        *max_speed = max_speed.max(engine.sim().max_speed());
        if free_surface {
            if let Some(x) = front_position(engine.sim()) {
                front.push((engine.iteration(), x));
            }
        }
    };
    sample(&engine, &mut front, &mut max_speed);

    loop {
        let it = engine.iteration();
        while next < scenario.schedule.len() && scenario.schedule[next].at <= it {
            mailbox.send(
                Origin::Script,
                SCRIPT_SEQ_BASE + next as u64,
                scenario.schedule[next].cmd.clone(),
            );
            next += 1;
        }
        if it >= target {
            engine.drain_and_apply(&out);
            break;
        }
        let tick = engine.tick(&out);
        for e in out.errors.lock().unwrap().drain(..) {
            log::warn!("iteration {it}: {e}");
            command_errors.push((it, e));
        }
        if tick.diverged {
            break;
        }
        if tick.stepped {
            if engine.iteration() % scenario.output_every == 0 {
                sample(&engine, &mut front, &mut max_speed);
            }
        } else if tick.applied == 0 {
            log::warn!("run stalled at iteration {it}: engine is {:?}", engine.phase());
            break;
        }
    }
    let wall_time = started.elapsed();
    for e in out.errors.lock().unwrap().drain(..) {
        command_errors.push((engine.iteration(), e));
    }
    if engine.iteration() % scenario.output_every != 0 {
        sample(&engine, &mut front, &mut max_speed);
    }

    let frames_written = match out.dump {
        Some(d) => d.finish().map_err(|source| ScenarioError::Io {
            path: opts.out.as_ref().unwrap().display().to_string(),
            source,
        })?,
        None => 0,
    };
    let divergence = engine.last_divergence().cloned();
    Ok(RunReport {
        name: scenario.name.clone(),
        cells: scenario.dims().cells(),
        iterations: engine.iteration(),
        initial_mass,
        final_mass: engine.sim().total_mass(),
        max_speed,
        wall_time,
        frames_written,
        front,
        command_errors,
        divergence,
    })
}
