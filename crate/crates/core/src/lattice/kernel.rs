//! BGK collide-and-stream kernel shared by every stencil.

use rayon::prelude::*;

use super::{Dims, LatticeField, LatticeModel, CS2, MAX_Q};
use crate::boundary::{CellFlags, CellType};
use crate::error::SimError;

/// Relaxation time and body force, in lattice units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub tau: f64,
    pub gravity: [f64; 3],
}

/// Largest velocity magnitude accepted for walls and inlets.
pub const MAX_BOUNDARY_SPEED: f64 = 0.3;

impl FluidParams {
    pub fn new(tau: f64, gravity: [f64; 3]) -> Result<Self, SimError> {
        let p = FluidParams { tau, gravity };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tau.is_finite() && self.tau > 0.5) {
            return Err(SimError::param("tau", format!("{} is not > 0.5", self.tau)));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(SimError::param("gravity", "non-finite component"));
        }
        Ok(())
    }

    /// Kinematic viscosity `cs2 (tau - 1/2)`.
    pub fn viscosity(&self) -> f64 {
        CS2 * (self.tau - 0.5)
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        FluidParams {
            tau: 1.0,
            gravity: [0.0; 3],
        }
    }
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Second-order equilibrium written into `out` (length `q`).
#[inline]
pub fn equilibrium_into(model: &LatticeModel, rho: f64, u: [f64; 3], out: &mut [f64]) {
    let usq = dot(u, u) / (2.0 * CS2);
    for (i, o) in out.iter_mut().enumerate().take(model.q()) {
        let cu = dot(model.velocity(i), u) / CS2;
        *o = model.weights[i] * rho * (1.0 + cu + 0.5 * cu * cu - usq);
    }
}

/// Equilibrium populations for density `rho` and velocity `u`.
pub fn equilibrium(model: &LatticeModel, rho: f64, u: [f64; 3]) -> Result<Vec<f64>, SimError> {
    if !rho.is_finite() || u.iter().any(|c| !c.is_finite()) {
        return Err(SimError::Divergence {
            iteration: 0,
            cell: [0; 3],
            reason: format!("non-finite equilibrium input rho={rho} u={u:?}"),
        });
    }
    let mut out = vec![0.0; model.q()];
    equilibrium_into(model, rho, u, &mut out);
    Ok(out)
}

/// Density and velocity of one cell, with the half-force correction
/// `rho u = sum f c + rho g / 2`.
#[inline]
pub fn cell_moments(model: &LatticeModel, f: &[f64], gravity: [f64; 3]) -> (f64, [f64; 3]) {
    let mut rho = 0.0;
    let mut j = [0.0; 3];
    for (i, &fi) in f.iter().enumerate() {
        rho += fi;
        let c = model.velocities[i];
        j[0] += fi * c[0] as f64;
        j[1] += fi * c[1] as f64;
        j[2] += fi * c[2] as f64;
    }
    let u = [
        j[0] / rho + 0.5 * gravity[0],
        j[1] / rho + 0.5 * gravity[1],
        j[2] / rho + 0.5 * gravity[2],
    ];
    (rho, u)
}

/// BGK relaxation with Guo forcing for a single cell. `u` is the
/// force-corrected velocity from [`cell_moments`].
#[inline]
pub fn collide_cell(
    model: &LatticeModel,
    f: &[f64],
    rho: f64,
    u: [f64; 3],
    params: &FluidParams,
    out: &mut [f64],
) {
    let omega = 1.0 / params.tau;
    let force = [
        rho * params.gravity[0],
        rho * params.gravity[1],
        rho * params.gravity[2],
    ];
    let forced = force != [0.0; 3];
    let pref = 1.0 - 0.5 * omega;
    let usq = dot(u, u) / (2.0 * CS2);
    for i in 0..model.q() {
        let c = model.velocity(i);
        let cu = dot(c, u) / CS2;
        let feq = model.weights[i] * rho * (1.0 + cu + 0.5 * cu * cu - usq);
        let mut v = (1.0 - omega) * f[i] + omega * feq;
        if forced {
            let cmu = [c[0] - u[0], c[1] - u[1], c[2] - u[2]];
            let term = dot(cmu, force) / CS2 + cu * dot(c, force) / CS2;
            v += pref * model.weights[i] * term;
        }
        out[i] = v;
    }
}

/// Runs `op(cell, chunk)` over the `q`-sized chunks of `buf`, optionally on
/// the rayon pool. Returns the smallest cell index for which `op` failed.
fn for_each_cell<F>(buf: &mut [f64], q: usize, parallel: bool, op: F) -> Option<usize>
where
    F: Fn(usize, &mut [f64]) -> bool + Sync + Send,
{
    if parallel {
        buf.par_chunks_mut(q)
            .enumerate()
            .filter_map(|(c, s)| (!op(c, s)).then_some(c))
            .min()
    } else {
        buf.chunks_mut(q)
            .enumerate()
            .filter_map(|(c, s)| (!op(c, s)).then_some(c))
            .min()
    }
}

/// Recomputes `rho`/`u` from `f` for liquid and open-boundary cells.
pub fn moments(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    params: &FluidParams,
) -> Result<(), SimError> {
    let dims = field.dims();
    for cell in 0..dims.cells() {
        let kind = flags.kind(cell);
        if !kind.is_source() {
            continue;
        }
        let g = if kind.is_liquid() {
            params.gravity
        } else {
            [0.0; 3]
        };
        let (rho, u) = cell_moments(model, field.populations(cell), g);
        check_cell(dims, cell, rho, u, 0)?;
        field.rho[cell] = rho;
        field.u[cell] = u;
    }
    Ok(())
}

pub(crate) fn check_cell(
    dims: Dims,
    cell: usize,
    rho: f64,
    u: [f64; 3],
    iteration: u64,
) -> Result<(), SimError> {
    if !rho.is_finite() || u.iter().any(|c| !c.is_finite()) {
        return Err(SimError::Divergence {
            iteration,
            cell: dims.coords(cell),
            reason: format!("non-finite moments rho={rho} u={u:?}"),
        });
    }
    if rho <= 0.0 {
        return Err(SimError::Divergence {
            iteration,
            cell: dims.coords(cell),
            reason: format!("non-positive density {rho}"),
        });
    }
    Ok(())
}

/// Collides liquid cells from `f` into `f_post`; open-boundary cells are
/// copied through unchanged. Wall and Gas cells are not touched.
pub fn collide(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    params: &FluidParams,
    parallel: bool,
) -> Result<(), SimError> {
    let q = model.q();
    let dims = field.dims();
    let LatticeField {
        f, f_post, rho, u, ..
    } = field;
    let (f, rho, u) = (&*f, &*rho, &*u);
    let kinds = flags.kinds();
    let bad = for_each_cell(f_post, q, parallel, |cell, out| {
        let src = &f[cell * q..(cell + 1) * q];
        match kinds[cell] {
            CellType::Fluid | CellType::Interface => {
                collide_cell(model, src, rho[cell], u[cell], params, out);
                out.iter().all(|v| v.is_finite())
            }
            CellType::Inlet | CellType::Outlet => {
                out.copy_from_slice(src);
                true
            }
            CellType::Wall | CellType::Gas => true,
        }
    });
    match bad {
        Some(cell) => Err(SimError::Divergence {
            iteration: 0,
            cell: dims.coords(cell),
            reason: "non-finite post-collision population".into(),
        }),
        None => Ok(()),
    }
}

/// Per-direction linear index offsets, valid away from the domain faces.
pub(crate) fn linear_offsets(model: &LatticeModel, dims: Dims) -> [isize; MAX_Q] {
    let mut off = [0isize; MAX_Q];
    for (i, c) in model.velocities.iter().enumerate() {
        off[i] = c[0] as isize
            + dims.nx as isize * (c[1] as isize + dims.ny as isize * c[2] as isize);
    }
    off
}

#[inline]
fn interior(dims: Dims, p: [usize; 3]) -> bool {
    let n = dims.as_array();
    (0..3).all(|a| n[a] == 1 || (p[a] > 0 && p[a] + 1 < n[a]))
}

/// Pull-streams `f_post` into `f_tmp` for liquid cells:
/// `f_tmp[x][i] = f_post[x - c_i][i]` whenever the source cell may stream.
/// Links whose source is a Wall or Gas cell are left for the boundary and
/// free-surface passes. Periodic wrap on every axis.
pub fn stream(model: &LatticeModel, field: &mut LatticeField, flags: &CellFlags, parallel: bool) {
    let q = model.q();
    let dims = field.dims();
    let off = linear_offsets(model, dims);
    let kinds = flags.kinds();
    let LatticeField { f_post, f_tmp, .. } = field;
    let f_post = &*f_post;
    for_each_cell(f_tmp, q, parallel, |cell, out| {
        if !kinds[cell].is_liquid() {
            return true;
        }
        let p = dims.coords(cell);
        let fast = interior(dims, p);
        for i in 0..q {
            let src = if fast {
                (cell as isize - off[i]) as usize
            } else {
                let c = model.velocities[i];
                dims.neighbor(cell, [-c[0], -c[1], -c[2]])
            };
            if kinds[src].is_source() {
                out[i] = f_post[src * q + i];
            }
        }
        true
    });
}
