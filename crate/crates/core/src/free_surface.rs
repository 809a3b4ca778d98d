//! Single-phase free surface by mass tracking.
//!
//! Interface cells carry a mass `m` next to their populations; their fill
//! fraction is `m / rho`. Gas cells hold no valid populations and are never
//! read. Each step exchanges mass across liquid links, reconstructs the
//! populations that would have streamed in from Gas at atmospheric density,
//! and converts cells whose fill leaves `[-eps, 1 + eps]`.

use crate::boundary::{CellFlags, CellType};
use crate::lattice::{cell_moments, equilibrium_into, Dims, LatticeField, LatticeModel, MAX_Q};

/// Conversion hysteresis on the fill fraction.
pub const CONVERSION_EPSILON: f64 = 1e-3;

/// Atmospheric density imposed on the interface.
pub const GAS_DENSITY: f64 = 1.0;

/// Per-cell liquid mass. Fluid cells hold `rho`, Gas cells zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MassField {
    mass: Vec<f64>,
}

impl MassField {
    pub fn from_state(flags: &CellFlags, field: &LatticeField) -> Self {
        let mass = (0..flags.dims().cells())
            .map(|cell| match flags.kind(cell) {
                CellType::Fluid => field.rho(cell),
                CellType::Interface => flags.fill(cell) * field.rho(cell),
                _ => 0.0,
            })
            .collect();
        MassField { mass }
    }

    #[inline]
    pub fn get(&self, cell: usize) -> f64 {
        self.mass[cell]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, m: f64) {
        self.mass[cell] = m;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    /// Liquid mass held by Fluid and Interface cells.
    pub fn total(&self, flags: &CellFlags) -> f64 {
        self.mass
            .iter()
            .zip(flags.kinds())
            .filter(|(_, k)| k.is_liquid())
            .map(|(m, _)| m)
            .sum()
    }
}

/// Counts from one [`convert_cells`] pass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConversionReport {
    pub filled: usize,
    pub emptied: usize,
    pub new_interface: usize,
    /// Excess mass that had no liquid neighbour to go to.
    pub mass_lost: f64,
}

fn interface_cells(flags: &CellFlags) -> Vec<usize> {
    flags
        .kinds()
        .iter()
        .enumerate()
        .filter(|(_, &k)| k == CellType::Interface)
        .map(|(c, _)| c)
        .collect()
}

/// Updates Interface masses from the post-collision populations:
/// `dm = sum_i w(link) (f_post[n][opp i] - f_post[x][i])`, `n = x + c_i`,
/// with weight 1 towards Fluid, the mean fill towards Interface and 0
/// otherwise. The exchange is antisymmetric, so liquid mass is conserved.
pub fn mass_exchange(
    model: &LatticeModel,
    field: &LatticeField,
    flags: &CellFlags,
    mass: &mut MassField,
) {
    let q = model.q();
    let dims = flags.dims();
    for x in interface_cells(flags) {
        let fill_x = flags.fill(x);
        let mut dm = 0.0;
        for i in 1..q {
            let n = dims.neighbor(x, model.velocities[i]);
            let w = match flags.kind(n) {
                CellType::Fluid => 1.0,
                CellType::Interface => 0.5 * (fill_x + flags.fill(n)),
                _ => continue,
            };
            dm += w * (field.f_post[n * q + model.opposite[i]] - field.f_post[x * q + i]);
        }
        mass.mass[x] += dm;
    }
}

/// Fills the streamed buffer on links whose upstream cell is Gas:
/// `f_i = f_eq_i(rho_A, u) + f_eq_opp(i)(rho_A, u) - f_post[opp(i)]`.
pub fn reconstruct_interface_populations(
    model: &LatticeModel,
    field: &mut LatticeField,
    flags: &CellFlags,
) {
    let q = model.q();
    let dims = flags.dims();
    let mut feq = [0.0; MAX_Q];
    for x in interface_cells(flags) {
        let mut computed = false;
        for i in 1..q {
            let c = model.velocities[i];
            let src = dims.neighbor(x, [-c[0], -c[1], -c[2]]);
            if flags.kind(src) != CellType::Gas {
                continue;
            }
            if !computed {
                equilibrium_into(model, GAS_DENSITY, field.u[x], &mut feq[..q]);
                computed = true;
            }
            let o = model.opposite[i];
            field.f_tmp[x * q + i] = feq[i] + feq[o] - field.f_post[x * q + o];
        }
    }
}

fn neighbors(model: &LatticeModel, dims: Dims, cell: usize) -> impl Iterator<Item = usize> + '_ {
    model.velocities[1..]
        .iter()
        .map(move |&c| dims.neighbor(cell, c))
}

/// Applies the fill/empty conversions after a mass exchange.
///
/// Interface cells above `1 + eps` become Fluid and turn their Gas
/// neighbours into Interface cells initialised at the neighbourhood-mean
/// equilibrium; cells below `-eps` become Gas and turn their Fluid
/// neighbours into Interface. Interface cells with no Gas neighbour are
/// absorbed into the liquid once at least half full, and those with no
/// liquid neighbour are removed. The excess (`m - rho` or `m`) goes to the
/// surviving Interface neighbours, weighted by free volume for a surplus and
/// by fill for a deficit; when those weights vanish it goes to Fluid
/// neighbours instead.
/// Cells are visited in row-major order.
pub fn convert_cells(
    model: &LatticeModel,
    flags: &mut CellFlags,
    mass: &mut MassField,
    field: &mut LatticeField,
    gravity: [f64; 3],
    eps: f64,
) -> ConversionReport {
    let q = model.q();
    let dims = flags.dims();
    let n = dims.cells();
    let mut report = ConversionReport::default();
    let mut filled = Vec::new();
    let mut emptied = Vec::new();
    for x in interface_cells(flags) {
        let rho = field.rho[x];
        let m = mass.mass[x];
        let mut gas = false;
        let mut liquid = false;
        for nb in neighbors(model, dims, x) {
            match flags.kind(nb) {
                CellType::Gas => gas = true,
                k if k.is_liquid() => liquid = true,
                _ => {}
            }
        }
        // Trapped cells join the liquid only once mostly full; absorbing a
        // near-empty one would push a large deficit into fresh neighbours.
        if m > (1.0 + eps) * rho || (!gas && m >= 0.5 * rho) {
            filled.push(x);
        } else if m < -eps * rho || !liquid {
            emptied.push(x);
        }
    }
    if filled.is_empty() && emptied.is_empty() {
        return report;
    }

    // 0: untouched, 1: filled, 2: emptied, 3: new interface from gas.
    let mut mark = vec![0u8; n];
    for &x in &filled {
        mark[x] = 1;
    }
    for &x in &emptied {
        mark[x] = 2;
    }

    let mut born = Vec::new();
    for &x in &filled {
        for nb in neighbors(model, dims, x) {
            match flags.kind(nb) {
                CellType::Gas if mark[nb] == 0 => {
                    mark[nb] = 3;
                    born.push(nb);
                }
                CellType::Interface if mark[nb] == 2 => mark[nb] = 0,
                _ => {}
            }
        }
    }
    emptied.retain(|&x| mark[x] == 2);
    born.sort_unstable();

    let mut feq = [0.0; MAX_Q];
    for &b in &born {
        let mut rho_sum = 0.0;
        let mut u_sum = [0.0; 3];
        let mut count = 0usize;
        for nb in neighbors(model, dims, b) {
            if flags.kind(nb).is_liquid() && mark[nb] != 3 {
                rho_sum += field.rho[nb];
                for a in 0..3 {
                    u_sum[a] += field.u[nb][a];
                }
                count += 1;
            }
        }
        let (rho, u) = if count > 0 {
            let k = count as f64;
            (rho_sum / k, [u_sum[0] / k, u_sum[1] / k, u_sum[2] / k])
        } else {
            (GAS_DENSITY, [0.0; 3])
        };
        equilibrium_into(model, rho, u, &mut feq[..q]);
        field.f[b * q..(b + 1) * q].copy_from_slice(&feq[..q]);
        field.rho[b] = rho;
        field.u[b] = u;
        mass.mass[b] = 0.0;
        flags.set(b, CellType::Interface, Some(0.0));
    }
    report.new_interface = born.len();

    for &x in &emptied {
        for nb in neighbors(model, dims, x) {
            if flags.kind(nb) == CellType::Fluid {
                mass.mass[nb] = field.rho[nb];
                flags.set(nb, CellType::Interface, Some(1.0));
            }
        }
    }

    let mut excess = Vec::with_capacity(filled.len() + emptied.len());
    for &x in &filled {
        excess.push((x, mass.mass[x] - field.rho[x]));
        mass.mass[x] = field.rho[x];
        flags.set(x, CellType::Fluid, None);
    }
    for &x in &emptied {
        excess.push((x, mass.mass[x]));
        mass.mass[x] = 0.0;
        flags.set(x, CellType::Gas, None);
    }
    excess.sort_unstable_by_key(|e| e.0);
    report.filled = filled.len();
    report.emptied = emptied.len();

    let mut recipients = Vec::with_capacity(MAX_Q);
    for (x, dm) in excess {
        recipients.clear();
        let mut total_w = 0.0;
        for nb in neighbors(model, dims, x) {
            if flags.kind(nb) == CellType::Interface && mark[nb] != 1 && mark[nb] != 2 {
                let fill = (mass.mass[nb] / field.rho[nb]).clamp(0.0, 1.0);
                let w = if dm >= 0.0 { 1.0 - fill } else { fill };
                recipients.push((nb, w));
                total_w += w;
            }
        }
        if total_w > 1e-12 {
            for (nb, w) in &recipients {
                mass.mass[*nb] += dm * w / total_w;
            }
            continue;
        }
        // No interface neighbour can take it: fold the excess into adjacent
        // Fluid cells as an isotropic density change, which leaves momentum
        // untouched.
        let fluid: Vec<usize> = neighbors(model, dims, x)
            .filter(|&nb| flags.kind(nb) == CellType::Fluid)
            .collect();
        if fluid.is_empty() {
            if recipients.is_empty() {
                report.mass_lost += dm;
            } else {
                let k = recipients.len() as f64;
                for (nb, _) in &recipients {
                    mass.mass[*nb] += dm / k;
                }
            }
            continue;
        }
        let share = dm / fluid.len() as f64;
        for nb in fluid {
            for i in 0..q {
                field.f[nb * q + i] += model.weights[i] * share;
            }
            let (rho, u) = cell_moments(model, &field.f[nb * q..(nb + 1) * q], gravity);
            field.rho[nb] = rho;
            field.u[nb] = u;
            mass.mass[nb] = rho;
        }
    }
    report
}

/// Refreshes stored fill fractions (`m / rho`, clamped to [0, 1]) and
/// pins Fluid mass to density.
pub fn sync_fill(flags: &mut CellFlags, mass: &mut MassField, field: &LatticeField) {
    for cell in 0..flags.dims().cells() {
        match flags.kind(cell) {
            CellType::Fluid => mass.mass[cell] = field.rho[cell],
            CellType::Interface => {
                let fill = (mass.mass[cell] / field.rho[cell]).clamp(0.0, 1.0);
                flags.set_fill(cell, fill);
            }
            _ => {}
        }
    }
}
