//! Wall, moving-wall, inlet and outlet behaviour.

mod common;

use common::*;
use lbsteer::boundary::{CellFlags, CellType};
use lbsteer::lattice::{Dims, FluidParams, Lattice, Region};
use lbsteer::Simulation;

fn cavity(n: usize, lid: f64, tau: f64) -> Simulation {
    let dims = Dims::new_2d(n + 2, n + 2);
    let mut flags = walled(dims, CellType::Fluid);
    for x in 0..dims.nx {
        flags.set_wall_velocity(dims.index(x, n + 1, 0), [lid, 0.0, 0.0]);
    }
    let params = FluidParams::new(tau, [0.0; 3]).unwrap();
    Simulation::from_flags(Lattice::D2Q9, flags, params).unwrap().0
}

/// u_x / U along the vertical centre line, one value per fluid row.
fn centre_line(sim: &Simulation, n: usize, lid: f64) -> Vec<f64> {
    let d = sim.dims();
    (1..=n)
        .map(|y| {
            let a = sim.field().velocity(d.index(n / 2, y, 0))[0];
            let b = sim.field().velocity(d.index(n / 2 + 1, y, 0))[0];
            0.5 * (a + b) / lid
        })
        .collect()
}

fn run_to_steady(sim: &mut Simulation, n: usize, lid: f64, max_steps: u64) -> Vec<f64> {
    let mut prev = centre_line(sim, n, lid);
    let mut done = 0;
    while done < max_steps {
        sim.step_n(500).unwrap();
        done += 500;
        let cur = centre_line(sim, n, lid);
        let change = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = cur;
        if change < 1e-5 {
            break;
        }
    }
    prev
}

#[test]
fn lid_driven_cavity_matches_refined_grid() {
    // Re = U N / nu = 32 on both grids.
    let mut coarse = cavity(32, 0.1, 0.8);
    let c = run_to_steady(&mut coarse, 32, 0.1, 40_000);
    let mut fine = cavity(128, 0.1, 1.7);
    let f = run_to_steady(&mut fine, 128, 0.1, 60_000);
    // Coarse node j sits between fine nodes 4j-2 and 4j-1 (1-based).
    let mut worst: f64 = 0.0;
    for j in 1..=32 {
        let fine_val = 0.5 * (f[4 * j - 3] + f[4 * j - 2]);
        worst = worst.max((c[j - 1] - fine_val).abs());
    }
    println!("cavity centre-line max |du|/U = {worst:.4}");
    assert!(worst < 0.05);
    // The lid drags the top row forward and the return flow runs backward.
    assert!(c[31] > 0.2);
    assert!(c.iter().cloned().fold(f64::MAX, f64::min) < -0.1);
}

#[test]
fn zero_wall_velocity_matches_static_walls() {
    let mut moving = cavity(12, 0.0, 0.7);
    let dims = moving.dims();
    let mut flags = walled(dims, CellType::Fluid);
    flags.set(dims.index(4, 4, 0), CellType::Wall, None);
    let params = FluidParams::new(0.7, [1e-5, -2e-5, 0.0]).unwrap();
    let mut a = Simulation::from_flags(Lattice::D2Q9, flags.clone(), params).unwrap().0;
    for x in 0..dims.nx {
        flags.set_wall_velocity(dims.index(x, 13, 0), [0.0; 3]);
    }
    let mut b = Simulation::from_flags(Lattice::D2Q9, flags, params).unwrap().0;
    a.step_n(200).unwrap();
    b.step_n(200).unwrap();
    assert_eq!(a.field().all_populations(), b.field().all_populations());
    moving.step_n(10).unwrap();
    assert!(moving.max_speed() < 1e-15);
}

#[test]
fn lid_sign_flip_mirrors_flow() {
    let n = 16;
    let mut pos = cavity(n, 0.05, 0.8);
    let mut neg = cavity(n, -0.05, 0.8);
    pos.step_n(800).unwrap();
    neg.step_n(800).unwrap();
    let d = pos.dims();
    let mut worst: f64 = 0.0;
    for y in 0..d.ny {
        for x in 0..d.nx {
            let a = pos.field().velocity(d.index(x, y, 0));
            let b = neg.field().velocity(d.index(d.nx - 1 - x, y, 0));
            if pos.flags().kind(d.index(x, y, 0)).is_liquid() {
                worst = worst.max((a[0] + b[0]).abs()).max((a[1] - b[1]).abs());
            }
        }
    }
    assert!(worst < 1e-12, "mirror mismatch {worst}");
}

#[test]
fn static_box_at_rest_stays_at_rest() {
    let dims = Dims::new_2d(3, 20);
    let flags = walled(dims, CellType::Fluid);
    let mut sim = Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::default())
        .unwrap()
        .0;
    let before = sim.field().all_populations().to_vec();
    sim.step_n(500).unwrap();
    for c in 0..dims.cells() {
        if sim.flags().kind(c).is_liquid() {
            let q = 9;
            for i in 0..q {
                let (now, then) = (sim.field().all_populations()[c * q + i], before[c * q + i]);
                assert!((now - then).abs() < 1e-15, "cell {c} dir {i}: {now} vs {then}");
            }
        }
    }
}

#[test]
fn population_returns_reversed_from_wall() {
    let dims = Dims::new_2d(3, 3);
    let mut flags = CellFlags::new(dims, CellType::Wall);
    let centre = dims.index(1, 1, 0);
    flags.set(centre, CellType::Fluid, None);
    let mut sim = Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::new(1.0, [0.0; 3]).unwrap())
        .unwrap()
        .0;
    // Rest weights plus an extra east-moving packet; at tau = 1 collision
    // relaxes it, so compare against the collided populations directly.
    let mut f = lbsteer::lattice::D2Q9.weights.to_vec();
    f[1] += 0.01;
    sim.set_populations(centre, &f);
    sim.step().unwrap();
    let post = sim.field().post_collision(centre).to_vec();
    let now = sim.field().populations(centre);
    for i in 1..9 {
        assert_eq!(now[i], post[lbsteer::lattice::D2Q9.opposite[i]]);
    }
}

/// Channel `nx x h` with an equilibrium inlet column at x = 0 and a
/// zero-gradient outlet at x = nx - 1.
fn open_channel(nx: usize, h: usize, u_in: f64, tau: f64) -> Simulation {
    let dims = Dims::new_2d(nx, h + 2);
    let mut flags = CellFlags::new(dims, CellType::Fluid);
    for x in 0..nx {
        flags.set(dims.index(x, 0, 0), CellType::Wall, None);
        flags.set(dims.index(x, h + 1, 0), CellType::Wall, None);
    }
    for y in 1..=h {
        flags.set(dims.index(0, y, 0), CellType::Inlet, None);
        flags.set_inlet_velocity(dims.index(0, y, 0), [u_in, 0.0, 0.0]);
        flags.set(dims.index(nx - 1, y, 0), CellType::Outlet, None);
    }
    let params = FluidParams::new(tau, [0.0; 3]).unwrap();
    Simulation::from_flags(Lattice::D2Q9, flags, params).unwrap().0
}

fn flux(sim: &Simulation, x: usize, h: usize) -> f64 {
    let d = sim.dims();
    (1..=h)
        .map(|y| {
            let c = d.index(x, y, 0);
            sim.field().rho(c) * sim.field().velocity(c)[0]
        })
        .sum()
}

#[test]
fn inlet_flux_is_conserved_downstream() {
    let (nx, h, u_in) = (60, 16, 0.05);
    let mut sim = open_channel(nx, h, u_in, 0.8);
    sim.step_n(6000).unwrap();
    let inlet = flux(&sim, 1, h);
    for x in [5, nx / 2, nx - 5] {
        let f = flux(&sim, x, h);
        println!("x={x}: flux {f:.6} vs inlet {inlet:.6}");
        assert!((f - inlet).abs() / inlet < 0.01);
    }
    assert!(inlet > 0.0);
}

#[test]
fn zero_inlet_velocity_is_rest_reservoir() {
    let mut sim = open_channel(20, 8, 0.0, 0.8);
    sim.step_n(300).unwrap();
    assert!(sim.max_speed() < 1e-14);
}

#[test]
fn inlet_change_applies_next_iteration() {
    let mut sim = open_channel(20, 8, 0.02, 0.8);
    sim.step_n(5).unwrap();
    let d = sim.dims();
    let inlet = d.index(0, 4, 0);
    assert_close(sim.field().velocity(inlet), [0.02, 0.0, 0.0]);
    lbsteer::engine::set_inlet_velocity(&mut sim, [0.04, 0.0, 0.0], Some(Region::new([0, 4, 0], [1, 5, 1])))
        .unwrap();
    sim.step().unwrap();
    assert_close(sim.field().velocity(inlet), [0.04, 0.0, 0.0]);
    let other = d.index(0, 2, 0);
    assert_close(sim.field().velocity(other), [0.02, 0.0, 0.0]);
}

fn assert_close(a: [f64; 3], b: [f64; 3]) {
    for k in 0..3 {
        assert!((a[k] - b[k]).abs() < 1e-15, "{a:?} vs {b:?}");
    }
}

#[test]
fn outlet_channel_matches_body_force_profile() {
    let (nx, h) = (160, 16);
    let mut open = open_channel(nx, h, 0.04, 0.8);
    open.step_n(20_000).unwrap();
    let d = open.dims();
    let x = 110;
    let open_profile: Vec<f64> = (1..=h).map(|y| open.field().velocity(d.index(x, y, 0))[0]).collect();

    // Body-forced periodic channel with the same mean velocity.
    let nu = FluidParams::new(0.8, [0.0; 3]).unwrap().viscosity();
    let mean: f64 = open_profile.iter().sum::<f64>() / h as f64;
    let g = 12.0 * nu * mean / (h * h) as f64;
    let dims = Dims::new_2d(4, h + 2);
    let mut flags = CellFlags::new(dims, CellType::Fluid);
    for x in 0..4 {
        flags.set(dims.index(x, 0, 0), CellType::Wall, None);
        flags.set(dims.index(x, h + 1, 0), CellType::Wall, None);
    }
    let mut forced = Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::new(0.8, [g, 0.0, 0.0]).unwrap())
        .unwrap()
        .0;
    forced.step_n(8000).unwrap();
    let forced_profile: Vec<f64> = (1..=h).map(|y| forced.field().velocity(dims.index(1, y, 0))[0]).collect();
    let num: f64 = open_profile.iter().zip(&forced_profile).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = forced_profile.iter().map(|b| b * b).sum();
    let err = (num / den).sqrt();
    println!("outlet vs body-force profile L2 {err:.4}");
    assert!(err < 0.02);
}

#[test]
fn outlet_copy_preserves_uniform_flow() {
    let dims = Dims::new_2d(10, 5);
    let mut flags = CellFlags::new(dims, CellType::Fluid);
    for y in 0..5 {
        flags.set(dims.index(9, y, 0), CellType::Outlet, None);
    }
    let mut sim = Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::new(0.9, [0.0; 3]).unwrap())
        .unwrap()
        .0;
    for c in 0..dims.cells() {
        sim.set_equilibrium(c, 1.0, [0.03, 0.0, 0.0]);
    }
    sim.step_n(20).unwrap();
    for c in 0..dims.cells() {
        let u = sim.field().velocity(c);
        assert!((u[0] - 0.03).abs() < 1e-15 && u[1].abs() < 1e-15, "cell {c}: {u:?}");
    }
}

#[test]
fn outlet_behind_wall_copies_from_first_open_cell() {
    let dims = Dims::new_2d(8, 3);
    let mut flags = CellFlags::new(dims, CellType::Fluid);
    flags.set(dims.index(7, 1, 0), CellType::Outlet, None);
    flags.set(dims.index(6, 1, 0), CellType::Wall, None);
    let mut sim = Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::new(0.9, [0.0; 3]).unwrap())
        .unwrap()
        .0;
    sim.set_equilibrium(dims.index(5, 1, 0), 1.05, [0.0; 3]);
    sim.step().unwrap();
    assert_eq!(
        sim.field().populations(dims.index(7, 1, 0)),
        sim.field().populations(dims.index(5, 1, 0))
    );
}

#[test]
fn fast_walls_and_inlets_are_rejected() {
    let dims = Dims::new_2d(6, 6);
    let mut flags = walled(dims, CellType::Fluid);
    flags.set_wall_velocity(0, [0.3, 0.0, 0.0]);
    assert!(Simulation::from_flags(Lattice::D2Q9, flags, FluidParams::default()).is_err());
    let mut sim = cavity(8, 0.1, 0.8);
    assert!(lbsteer::engine::set_wall_velocity(&mut sim, [0.31, 0.0, 0.0], None).is_err());
    assert!(lbsteer::engine::set_inlet_velocity(&mut sim, [0.0, 0.35, 0.0], None).is_err());
    let _ = paint;
}
