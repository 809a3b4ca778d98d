mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::net::{count_files, dump_differences, fig19_session, network_run, stall_rates, Via};
use common::wire::{random_message, rechunk};
use common::{dam_2d, locality_violations, poiseuille, quiescent, rel_l2, taylor_green, walled};
use lbsteer::boundary::CellType;
use lbsteer::client::Reply;
use lbsteer::lattice::{Dims, FluidParams, Lattice};
use lbsteer::protocol::{encode, Decoder, Message, ProtocolErrorKind, MAX_MESSAGE_LEN};
use lbsteer::runner::{self, hardware_string, BenchOptions, RunOptions};
use lbsteer::scenario::Scenario;
use lbsteer::Simulation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tracks live and peak heap bytes so the decoder's allocations can be
/// measured rather than inferred.
struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Resets the peak to the current live size and returns that baseline.
fn reset_peak() -> usize {
    let live = LIVE.load(Ordering::Relaxed);
    PEAK.store(live, Ordering::Relaxed);
    live
}

#[derive(Default)]
struct Gate {
    failed: Vec<String>,
    reported: Vec<String>,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name.to_string());
        }
    }

    /// Hardware-dependent criterion: printed, never fails the run.
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail} [report only]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.reported.push(name.to_string());
        }
    }
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(name)).unwrap()
}

fn physics(g: &mut Gate) {
    for tau in [0.6, 0.8, 1.0] {
        let t = Instant::now();
        let (measured, expected) = taylor_green(tau);
        let secs = t.elapsed().as_secs_f64();
        let rel = (measured - expected).abs() / expected;
        g.check(
            &format!("taylor-green 64x64 tau={tau}"),
            rel < 0.02 && secs < 60.0,
            format!("decay rate {measured:.5e} vs {expected:.5e}, rel err {rel:.2e} (< 2e-2), {secs:.1} s (< 60 s)"),
        );
    }
    let t = Instant::now();
    let (num, exact) = poiseuille(32, 0.8, 1e-6, 12_000);
    let secs = t.elapsed().as_secs_f64();
    let err = rel_l2(&num, &exact);
    g.check(
        "poiseuille width 32 tau=0.8",
        err < 1e-2 && secs < 60.0,
        format!("relative L2 {err:.3e} (< 1e-2), {secs:.1} s (< 60 s)"),
    );
}

fn conservation(g: &mut Gate) {
    let dims = Dims::new_2d(48, 48);
    let params = FluidParams::new(0.7, [1e-5, -2e-5, 0.0]).unwrap();
    let (mut sim, _) =
        Simulation::from_flags(Lattice::D2Q9, walled(dims, CellType::Fluid), params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for c in 0..dims.cells() {
        if sim.flags().kind(c) == CellType::Fluid {
            let u = [rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), 0.0];
            sim.set_equilibrium(c, 1.0 + rng.gen_range(-0.02..0.02), u);
        }
    }
    let m0 = sim.total_mass();
    sim.step_n(1000).unwrap();
    let drift = ((sim.total_mass() - m0) / m0).abs();
    g.check(
        "closed all-fluid box, 1000 steps",
        drift < 1e-9,
        format!("relative mass drift {drift:.2e} (< 1e-9)"),
    );

    let mut sim = dam_2d(60, 40, 20, 30, 0.7, 1e-4);
    let m0 = sim.total_mass();
    sim.step_n(1000).unwrap();
    let drift = ((sim.total_mass() - m0) / m0).abs();
    g.check(
        "dam break 60x40, 1000 steps",
        drift < 5e-3,
        format!("relative mass drift {drift:.2e} (< 5e-3)"),
    );
}

fn throughput(g: &mut Gate) {
    let hw = hardware_string();
    let reference = hw.contains("i5-4200M");
    println!("hardware: {hw}");
    let cases = [
        ("dam3d.scn", false, 10.0, "single-threaded"),
        ("dam3d_large.scn", true, 20.0, "parallel collision"),
    ];
    for (file, parallel, target, mode) in cases {
        let s = scenario(file);
        let opts = BenchOptions {
            warmup: 20,
            seconds: 5.0,
            parallel,
            ..BenchOptions::default()
        };
        let r = runner::benchmark(&s, &opts).unwrap();
        let name = format!("throughput {} cells {mode}", r.cells);
        let pass = r.mean_it_per_sec >= target;
        let detail = format!(
            "{:.1} it/s mean, {:.1} median, {} threads (>= {target})",
            r.mean_it_per_sec, r.median_it_per_sec, r.threads
        );
        if reference {
            g.check(&name, pass, detail);
        } else {
            g.report(&name, pass, detail);
        }
    }
}

fn twin(g: &mut Gate) {
    let s = scenario("dam2d_steer.scn");
    let iterations = 500;
    let script = tempfile::tempdir().unwrap();
    let report = runner::run_headless(
        &s,
        &RunOptions {
            out: Some(script.path().to_path_buf()),
            iterations: Some(iterations),
            ..RunOptions::default()
        },
    )
    .unwrap();
    let net = tempfile::tempdir().unwrap();
    let replies = network_run(&s, 0, iterations, net.path());
    let acked = replies.iter().all(|r| *r == Reply::Ack);
    let files = count_files(net.path());
    let diff = dump_differences(script.path(), net.path());
    g.check(
        "tcp vs script twin, 500 iterations",
        acked && report.command_errors.is_empty() && diff.is_empty() && files > 0,
        format!("{files} files compared, {} differ", diff.len()),
    );
}

fn locality(g: &mut Gate) {
    let bad2 = locality_violations(quiescent(Lattice::D2Q9, Dims::new_2d(24, 20), 1), 1000, 11);
    let bad3 = locality_violations(quiescent(Lattice::D3Q19, Dims::new(12, 10, 8), 2), 1000, 12);
    g.check(
        "edit locality, 1000 random edits per lattice",
        bad2.is_empty() && bad3.is_empty(),
        format!("{} D2Q9 and {} D3Q19 edits touched cells outside their neighbourhood", bad2.len(), bad3.len()),
    );
}

fn protocol_fuzz(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let total = 1_000_000;
    let batch = 1000;
    let mut mismatches = 0;
    let mut bytes_total = 0;
    for _ in 0..total / batch {
        let msgs: Vec<Message> = (0..batch).map(|_| random_message(&mut rng)).collect();
        let mut stream = Vec::new();
        for m in &msgs {
            stream.extend(encode(m).unwrap());
        }
        bytes_total += stream.len();
        let max_chunk = rng.gen_range(1..512);
        let mut d = Decoder::new();
        let mut out = Vec::with_capacity(batch);
        for c in rechunk(&mut rng, &stream, max_chunk) {
            d.push(c);
            while let Ok(Some(m)) = d.next_message() {
                out.push(m);
            }
        }
        if d.finish().is_err() || out != msgs {
            mismatches += 1;
        }
    }
    g.check(
        "protocol round-trip with re-chunking",
        mismatches == 0,
        format!("{total} messages, {bytes_total} bytes, {mismatches} mismatching batches"),
    );
}

fn malformed_lengths(g: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let base = reset_peak();
    let mut rejected = 0;
    let mut accepted_oversize = 0;
    let trials = 20_000;
    for _ in 0..trials {
        let len: u32 = match rng.gen_range(0..3) {
            0 => rng.gen_range(MAX_MESSAGE_LEN as u32 + 1..=u32::MAX),
            1 => u32::MAX - rng.gen_range(0..16),
            _ => MAX_MESSAGE_LEN as u32 + rng.gen_range(1..4096),
        };
        let mut d = Decoder::new();
        d.push(&len.to_le_bytes());
        let tail: Vec<u8> = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect();
        d.push(&tail);
        match d.next_message() {
            Err(e) if matches!(e.kind, ProtocolErrorKind::TooLong(_)) => rejected += 1,
            _ => accepted_oversize += 1,
        }
    }
    // A length right at the cap with a short body must wait, not reserve.
    let mut d = Decoder::new();
    d.push(&(MAX_MESSAGE_LEN as u32).to_le_bytes());
    d.push(&[5, 0, 1, 2, 3]);
    let waits = matches!(d.next_message(), Ok(None));
    // Element counts inside a payload are checked against its length.
    let huge = [
        &(14u32).to_le_bytes()[..],
        &2u16.to_le_bytes(),
        &u32::MAX.to_le_bytes(),
        &u32::MAX.to_le_bytes(),
        &2u32.to_le_bytes(),
    ]
    .concat();
    let mut d = Decoder::new();
    d.push(&huge);
    let dims_rejected = d.next_message().is_err();
    drop(d);
    let peak = PEAK.load(Ordering::Relaxed).saturating_sub(base);
    g.check(
        "malformed lengths rejected under the 64 MiB cap",
        rejected == trials && accepted_oversize == 0 && waits && dims_rejected && peak < MAX_MESSAGE_LEN,
        format!("{rejected}/{trials} oversized prefixes rejected, peak extra heap {peak} bytes (< {MAX_MESSAGE_LEN})"),
    );
}

fn stalled_subscriber(g: &mut Gate) {
    // Measured on the benchmark grid with a frame due every iteration.
    let (sim, _) = scenario("dam3d.scn").build(0).unwrap();
    let (base, stalled, dropped) = stall_rates(sim, 1, 7, Duration::from_millis(1000));
    let loss = 1.0 - stalled / base;
    g.check(
        "stalled subscriber throughput loss",
        loss < 0.05 && dropped > 0,
        format!("{base:.1} it/s alone, {stalled:.1} it/s stalled, loss {:.1}% (< 5%), {dropped} frames dropped", loss * 100.0),
    );
}

fn session(g: &mut Gate) {
    for via in [Via::Tcp, Via::Ws] {
        let log = fig19_session(via, 20);
        let acked = log.replies.iter().all(|r| *r == Reply::Ack);
        let ours = log.frames.iter().all(|f| f.subscription == log.subscription);
        let its = log.iterations();
        g.check(
            &format!("hello/geometry/start/subscribe session over {via:?}"),
            acked && ours && log.on_cadence(),
            format!(
                "{} frames at iterations {}..={} every {}, {} stats",
                its.len(),
                its.first().unwrap_or(&0),
                its.last().unwrap_or(&0),
                log.every_n,
                log.stats_seen
            ),
        );
    }
}

fn main() {
    // `cargo test -- --list` and filters are harness flags this target ignores.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let mut g = Gate::default();
    physics(&mut g);
    conservation(&mut g);
    throughput(&mut g);
    twin(&mut g);
    locality(&mut g);
    protocol_fuzz(&mut g);
    malformed_lengths(&mut g);
    stalled_subscriber(&mut g);
    session(&mut g);
    println!(
        "acceptance: {} failed, {} hardware-dependent below target, {:.0} s",
        g.failed.len(),
        g.reported.len(),
        started.elapsed().as_secs_f64()
    );
    if !g.failed.is_empty() {
        eprintln!("failed: {:?}", g.failed);
        std::process::exit(1);
    }
}
