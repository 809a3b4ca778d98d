use std::fmt;
use std::time::{Duration, Instant};

use crate::error::SimError;
use crate::scenario::{Scenario, ScenarioError};
use crate::sim::PhaseTimings;

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub warmup: u64,
    /// Measurement stops at whichever of these limits is hit first.
    pub seconds: f64,
    pub max_iterations: Option<u64>,
    pub parallel: bool,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            warmup: 50,
            seconds: 10.0,
            max_iterations: None,
            parallel: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub name: String,
    pub dims: [usize; 3],
    pub cells: usize,
    pub parallel: bool,
    pub threads: usize,
    pub iterations: u64,
    pub elapsed: Duration,
    pub mean_it_per_sec: f64,
    pub median_it_per_sec: f64,
    pub timings: PhaseTimings,
    pub hardware: String,
}

impl BenchReport {
    pub fn cell_updates_per_sec(&self) -> f64 {
        self.cells as f64 * self.mean_it_per_sec
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [nx, ny, nz] = self.dims;
        writeln!(f, "scenario      {}", self.name)?;
        writeln!(f, "grid          {nx}x{ny}x{nz} ({} cells)", self.cells)?;
        writeln!(f, "hardware      {}", self.hardware)?;
        writeln!(
            f,
            "mode          {}",
            if self.parallel {
                format!("parallel, {} threads", self.threads)
            } else {
                "single-threaded".to_string()
            }
        )?;
        writeln!(
            f,
            "iterations    {} in {:.3} s",
            self.iterations,
            self.elapsed.as_secs_f64()
        )?;
        writeln!(f, "mean it/s     {:.2}", self.mean_it_per_sec)?;
        writeln!(f, "median it/s   {:.2}", self.median_it_per_sec)?;
        writeln!(f, "MLUPS         {:.3}", self.cell_updates_per_sec() / 1e6)?;
        let total = self.timings.total().as_secs_f64().max(1e-12);
        for (name, d) in [
            ("collide", self.timings.collide),
            ("stream", self.timings.stream),
            ("boundary", self.timings.boundary),
            ("free-surface", self.timings.free_surface),
        ] {
            writeln!(
                f,
                "  {name:<12} {:>9.3} ms/it  {:>5.1}%",
                d.as_secs_f64() * 1e3 / self.iterations.max(1) as f64,
                100.0 * d.as_secs_f64() / total
            )?;
        }
        Ok(())
    }
}

/// CPU model from /proc/cpuinfo plus the logical core count.
pub fn hardware_string() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{model}, {cores} logical cores")
}

/// Steps the scenario's initial state, ignoring its schedule, and reports
/// iteration throughput after `warmup` untimed iterations.
pub fn benchmark(scenario: &Scenario, opts: &BenchOptions) -> Result<BenchReport, ScenarioError> {
    let (mut sim, _) = scenario.build(opts.seed)?;
    sim.set_parallel(opts.parallel);
    let step = |sim: &mut crate::Simulation| -> Result<Duration, SimError> {
        let t = Instant::now();
        sim.step()?;
        Ok(t.elapsed())
    };
    for _ in 0..opts.warmup {
        step(&mut sim)?;
    }
    sim.reset_timings();
    let budget = Duration::from_secs_f64(opts.seconds.max(0.0));
    let limit = opts.max_iterations.unwrap_or(u64::MAX);
    let mut samples = Vec::new();
    let started = Instant::now();
    while (samples.len() as u64) < limit && (samples.is_empty() || started.elapsed() < budget) {
        samples.push(step(&mut sim)?);
    }
    let elapsed = started.elapsed();
    let mut rates: Vec<f64> = samples
        .iter()
        .map(|d| 1.0 / d.as_secs_f64().max(1e-12))
        .collect();
    rates.sort_by(f64::total_cmp);
    let median = match rates.len() {
        0 => 0.0,
        n if n % 2 == 1 => rates[n / 2],
        n => 0.5 * (rates[n / 2 - 1] + rates[n / 2]),
    };
    let dims = scenario.dims();
    Ok(BenchReport {
        name: scenario.name.clone(),
        dims: dims.as_array(),
        cells: dims.cells(),
        parallel: opts.parallel,
        threads: if opts.parallel {
            rayon::current_num_threads()
        } else {
            1
        },
        iterations: samples.len() as u64,
        elapsed,
        mean_it_per_sec: samples.len() as f64 / elapsed.as_secs_f64().max(1e-12),
        median_it_per_sec: median,
        timings: sim.timings(),
        hardware: hardware_string(),
    })
}
