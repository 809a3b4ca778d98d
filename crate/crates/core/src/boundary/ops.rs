use super::{BoundarySet, CellFlags, CellType};
use crate::error::SimError;
use crate::lattice::{equilibrium_into, LatticeField, LatticeModel, CS2, MAX_BOUNDARY_SPEED, MAX_Q};

/// Rejects wall and inlet velocities at or above the low-Mach bound.
pub fn validate_boundary_speed(name: &'static str, u: [f64; 3]) -> Result<(), SimError> {
    let speed = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if !speed.is_finite() || speed >= MAX_BOUNDARY_SPEED {
        return Err(SimError::param(
            name,
            format!("speed {speed} must be below {MAX_BOUNDARY_SPEED}"),
        ));
    }
    Ok(())
}

fn reflect_links(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    set: &BoundarySet,
    moving: bool,
) {
    let q = model.q();
    let dims = field.dims();
    for (cell, mask) in set.wall_links() {
        if !flags.kind(cell).is_liquid() {
            continue;
        }
        let rho = field.rho[cell];
        for i in 1..q {
            if mask & (1 << i) == 0 {
                continue;
            }
            // Population `out` left towards the wall and comes back as `i`.
            let out = model.opposite[i];
            let mut v = field.f_post[cell * q + out];
            if moving {
                let wall = dims.neighbor(cell, model.velocities[out]);
                let uw = flags.wall_velocity(wall);
                if uw != [0.0; 3] {
                    let c = model.velocity(out);
                    let cu = c[0] * uw[0] + c[1] * uw[1] + c[2] * uw[2];
                    v -= 2.0 * model.weights[out] * rho * cu / CS2;
                }
            }
            field.f_tmp[cell * q + i] = v;
        }
    }
}

/// Half-way bounce-back on every wall link of a liquid cell:
/// `f_tmp[x][opp(i)] = f_post[x][i]` for each `i` pointing into a wall.
pub fn bounce_back(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    set: &BoundarySet,
) {
    reflect_links(model, field, flags, set, false);
}

/// Bounce-back with the moving-wall momentum term
/// `- 2 w_i rho (c_i . u_w) / cs2`, `rho` taken from the fluid cell.
/// Static walls reduce to [`bounce_back`].
pub fn moving_wall_bounce_back(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    set: &BoundarySet,
) {
    reflect_links(model, field, flags, set, true);
}

/// Imposes `f = f_eq(1, u_inlet)` on every inlet cell of the streamed buffer.
pub fn apply_inlet(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    set: &BoundarySet,
) {
    let q = model.q();
    for cell in set.inlets() {
        let u = flags.inlet_velocity(cell);
        equilibrium_into(model, 1.0, u, &mut field.f_tmp[cell * q..(cell + 1) * q]);
        field.rho_tmp[cell] = 1.0;
        field.u_tmp[cell] = u;
    }
}

/// Zero-gradient outlet: copies the streamed populations of the source cell.
pub fn apply_outlet(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
    set: &BoundarySet,
) {
    let q = model.q();
    let mut buf = [0.0; MAX_Q];
    for (cell, source) in set.outlets() {
        let Some(src) = source else { continue };
        if flags.kind(src) == CellType::Gas {
            continue;
        }
        buf[..q].copy_from_slice(&field.f_tmp[src * q..(src + 1) * q]);
        field.f_tmp[cell * q..(cell + 1) * q].copy_from_slice(&buf[..q]);
    }
}
