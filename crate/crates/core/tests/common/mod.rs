#![allow(dead_code)]

pub mod net;
pub mod wire;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use lbsteer::boundary::{CellFlags, CellType};
use lbsteer::engine::{apply_cell_edits, CellEdit};
use lbsteer::lattice::{Dims, FluidParams, Lattice, Region, CS2};
use lbsteer::Simulation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Wall ring around the whole domain (all faces of non-flat axes).
pub fn walled(dims: Dims, inside: CellType) -> CellFlags {
    let mut f = CellFlags::new(dims, inside);
    for cell in 0..dims.cells() {
        if dims.on_boundary(cell) {
            f.set(cell, CellType::Wall, None);
        }
    }
    f
}

pub fn paint(flags: &mut CellFlags, region: Region, kind: CellType) {
    let dims = flags.dims();
    for cell in region.cells(dims).collect::<Vec<_>>() {
        flags.set(cell, kind, None);
    }
}

/// Closed box with a water column occupying `[1, col_w] x [1, col_h]`.
pub fn dam_flags(dims: Dims, col_w: usize, col_h: usize) -> CellFlags {
    let mut f = walled(dims, CellType::Gas);
    let hi_z = if dims.nz > 1 { dims.nz - 1 } else { 1 };
    let lo_z = if dims.nz > 1 { 1 } else { 0 };
    paint(
        &mut f,
        Region::new([1, 1, lo_z], [1 + col_w, 1 + col_h, hi_z]),
        CellType::Fluid,
    );
    f
}

pub fn dam_2d(nx: usize, ny: usize, col_w: usize, col_h: usize, tau: f64, g: f64) -> Simulation {
    let flags = dam_flags(Dims::new_2d(nx, ny), col_w, col_h);
    let params = FluidParams::new(tau, [0.0, -g, 0.0]).unwrap();
    Simulation::from_flags(Lattice::D2Q9, flags, params).unwrap().0
}

pub fn kinetic_energy(sim: &Simulation) -> f64 {
    let n = sim.dims().cells();
    (0..n)
        .filter(|&c| sim.flags().kind(c).is_liquid())
        .map(|c| {
            let u = sim.field().velocity(c);
            0.5 * sim.field().rho(c) * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
        })
        .sum()
}

/// Measured and analytic kinetic-energy decay rates of a 64x64
/// Taylor-Green vortex over one expected half-life.
pub fn taylor_green(tau: f64) -> (f64, f64) {
    let n = 64;
    let dims = Dims::new_2d(n, n);
    let params = FluidParams::new(tau, [0.0; 3]).unwrap();
    let mut sim = Simulation::periodic(Lattice::D2Q9, dims, params).unwrap();
    let k = 2.0 * PI / n as f64;
    let u0 = 0.02;
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64, y as f64);
            let ux = -u0 * (k * xf).cos() * (k * yf).sin();
            let uy = u0 * (k * xf).sin() * (k * yf).cos();
            let p = -0.25 * u0 * u0 * ((2.0 * k * xf).cos() + (2.0 * k * yf).cos());
            sim.set_equilibrium(dims.index(x, y, 0), 1.0 + p / CS2, [ux, uy, 0.0]);
        }
    }
    let nu = params.viscosity();
    let expected_rate = 2.0 * nu * 2.0 * k * k;
    let half_life = (2f64.ln() / expected_rate).round() as u64;
    let e0 = kinetic_energy(&sim);
    sim.step_n(half_life).unwrap();
    let e1 = kinetic_energy(&sim);
    let measured_rate = (e0 / e1).ln() / half_life as f64;
    (measured_rate, expected_rate)
}

/// Body-force channel between walls at y = 0 and y = h + 1; returns the
/// steady profile and the analytic one at the fluid nodes.
pub fn poiseuille(h: usize, tau: f64, g: f64, steps: u64) -> (Vec<f64>, Vec<f64>) {
    let dims = Dims::new_2d(4, h + 2);
    let mut flags = lbsteer::boundary::CellFlags::new(dims, CellType::Fluid);
    for x in 0..dims.nx {
        flags.set(dims.index(x, 0, 0), CellType::Wall, None);
        flags.set(dims.index(x, h + 1, 0), CellType::Wall, None);
    }
    let params = FluidParams::new(tau, [g, 0.0, 0.0]).unwrap();
    let mut sim = Simulation::from_flags(Lattice::D2Q9, flags, params).unwrap().0;
    sim.step_n(steps).unwrap();
    let nu = params.viscosity();
    let hf = h as f64;
    let mut num = Vec::new();
    let mut exact = Vec::new();
    for y in 1..=h {
        let s = y as f64 - 0.5;
        num.push(sim.field().velocity(dims.index(1, y, 0))[0]);
        exact.push(g * s * (hf - s) / (2.0 * nu));
    }
    (num, exact)
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn populations(sim: &Simulation) -> Vec<f64> {
    (0..sim.dims().cells())
        .flat_map(|c| sim.field().populations(c).to_vec())
        .collect()
}

pub fn neighbourhood(sim: &Simulation, cell: usize) -> BTreeSet<usize> {
    let dims = sim.dims();
    sim.model()
        .velocities
        .iter()
        .map(|&c| dims.neighbor(cell, c))
        .collect()
}

pub fn random_edit(rng: &mut ChaCha8Rng, dims: Dims) -> CellEdit {
    let cell = rng.gen_range(0..dims.cells());
    let kinds = [
        CellType::Fluid,
        CellType::Wall,
        CellType::Gas,
        CellType::Interface,
        CellType::Inlet,
        CellType::Outlet,
    ];
    let mut kind = kinds[rng.gen_range(0..kinds.len())];
    if matches!(kind, CellType::Inlet | CellType::Outlet) && !dims.on_boundary(cell) {
        kind = CellType::Fluid;
    }
    let fill = (kind == CellType::Interface).then(|| rng.gen_range(0.0..=1.0));
    CellEdit { cell, kind, fill }
}

pub fn quiescent(lattice: Lattice, dims: Dims, seed: u64) -> Simulation {
    let params = FluidParams::new(0.8, [0.0; 3]).unwrap();
    let (mut sim, _) = Simulation::from_flags(lattice, walled(dims, CellType::Fluid), params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..dims.cells() {
        if sim.flags().kind(c) == CellType::Fluid {
            sim.set_equilibrium(c, 1.0 + rng.gen_range(-0.01..0.01), [0.0; 3]);
        }
    }
    sim
}

/// Applies `edits` random single-cell edits one at a time and returns a
/// description of every cell outside the edited cell's stencil whose
/// populations or flag changed.
pub fn locality_violations(mut sim: Simulation, edits: usize, seed: u64) -> Vec<String> {
    let dims = sim.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = sim.model().q();
    let mut bad = Vec::new();
    for _ in 0..edits {
        let edit = random_edit(&mut rng, dims);
        let before = populations(&sim);
        let flags_before = sim.flags().clone();
        apply_cell_edits(&mut sim, &[edit]).unwrap();
        let allowed = neighbourhood(&sim, edit.cell);
        let after = populations(&sim);
        for cell in 0..dims.cells() {
            if allowed.contains(&cell) {
                continue;
            }
            let range = cell * q..(cell + 1) * q;
            let same = before[range.clone()]
                .iter()
                .zip(&after[range])
                .all(|(a, b)| a.to_bits() == b.to_bits());
            let flag_same = flags_before.kind(cell) == sim.flags().kind(cell)
                && flags_before.fill(cell).to_bits() == sim.flags().fill(cell).to_bits();
            if !same || !flag_same {
                bad.push(format!("edit {edit:?} changed {:?}", dims.coords(cell)));
            }
        }
    }
    bad
}
