//! Discrete velocity sets.
//!
//! Both stencils are stored with three-component velocities so a single
//! kernel handles 2D and 3D grids; D2Q9 has `c_z = 0` everywhere and is run on
//! grids with `nz = 1`.

/// Lattice speed of sound squared, in lattice units.
pub const CS2: f64 = 1.0 / 3.0;

/// Largest `q` of any supported stencil; sizes stack buffers in the kernels.
pub const MAX_Q: usize = 19;

/// A DdQq velocity set: discrete velocities, quadrature weights and the
/// index of each velocity's opposite.
#[derive(Debug, PartialEq)]
pub struct LatticeModel {
    pub name: &'static str,
    pub dimension: usize,
    pub velocities: &'static [[i32; 3]],
    pub weights: &'static [f64],
    pub opposite: &'static [usize],
}

impl LatticeModel {
    #[inline]
    pub fn q(&self) -> usize {
        self.velocities.len()
    }

    /// `c_i` as floating point.
    #[inline]
    pub fn velocity(&self, i: usize) -> [f64; 3] {
        let c = self.velocities[i];
        [c[0] as f64, c[1] as f64, c[2] as f64]
    }

    /// Index of the velocity equal to `c`, if it belongs to the stencil.
    pub fn direction_of(&self, c: [i32; 3]) -> Option<usize> {
        self.velocities.iter().position(|&v| v == c)
    }

    /// Directions mirrored across the plane normal to `axis`.
    pub fn mirror(&self, i: usize, axis: usize) -> usize {
        let mut c = self.velocities[i];
        c[axis] = -c[axis];
        self.direction_of(c).expect("stencils are closed under reflection")
    }
}

/// Lattice choice as named in scenario files and on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lattice {
    D2Q9,
    D3Q19,
}

impl Lattice {
    pub fn model(self) -> &'static LatticeModel {
        match self {
            Lattice::D2Q9 => &D2Q9,
            Lattice::D3Q19 => &D3Q19,
        }
    }

    /// D2Q9 for single-layer grids, D3Q19 otherwise.
    pub fn for_depth(nz: usize) -> Self {
        if nz <= 1 {
            Lattice::D2Q9
        } else {
            Lattice::D3Q19
        }
    }
}

//   6   2   5
//    \  |  /
//   3 - 0 - 1
//    /  |  \
//   7   4   8
const D2Q9_VELOCITIES: [[i32; 3]; 9] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [-1, 0, 0],
    [0, -1, 0],
    [1, 1, 0],
    [-1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
];

const D2Q9_WEIGHTS: [f64; 9] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

const D2Q9_OPPOSITE: [usize; 9] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

pub static D2Q9: LatticeModel = LatticeModel {
    name: "d2q9",
    dimension: 2,
    velocities: &D2Q9_VELOCITIES,
    weights: &D2Q9_WEIGHTS,
    opposite: &D2Q9_OPPOSITE,
};

// Rest, six face neighbours, twelve edge neighbours; opposites are adjacent.
const D3Q19_VELOCITIES: [[i32; 3]; 19] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

const D3Q19_WEIGHTS: [f64; 19] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

const D3Q19_OPPOSITE: [usize; 19] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

pub static D3Q19: LatticeModel = LatticeModel {
    name: "d3q19",
    dimension: 3,
    velocities: &D3Q19_VELOCITIES,
    weights: &D3Q19_WEIGHTS,
    opposite: &D3Q19_OPPOSITE,
};
