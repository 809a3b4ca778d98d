use std::collections::HashMap;

use crate::boundary::{CellFlags, CellType};
use crate::lattice::Dims;

use super::SliceSpec;

/// Scalar samples at integer grid points, `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: [usize; 3], values: Vec<f64>) -> Self {
        assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
        ScalarGrid { dims, values }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    values.push(f(x, y, z));
                }
            }
        }
        ScalarGrid { dims, values }
    }

    /// Fill fraction of every cell; Wall, Inlet and Outlet count as empty.
    pub fn fill_volume(flags: &CellFlags) -> Self {
        let d = flags.dims();
        Self::from_fn(d.as_array(), |x, y, z| cell_fill(flags, d.index(x, y, z)))
    }

    /// Fill fraction on a cutting plane.
    pub fn fill_slice(flags: &CellFlags, spec: SliceSpec) -> Self {
        let d: Dims = flags.dims();
        let (w, h) = spec.plane_dims(d);
        Self::from_fn([w, h, 1], |i, j, _| cell_fill(flags, spec.cell(d, i, j)))
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(x, y, z)]
    }

    /// Trilinear interpolation; coordinates are clamped to the grid.
    pub fn sample(&self, p: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let c = p[a].clamp(0.0, (n - 1) as f64);
            let b = (c.floor() as usize).min(n - 2);
            base[a] = b;
            frac[a] = c - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut q = base;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                if bit == 1 {
                    if self.dims[a] == 1 {
                        w = 0.0;
                        break;
                    }
                    q[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.at(q[0], q[1], q[2]);
            }
        }
        acc
    }

    /// Central-difference gradient at a grid point, one-sided on edges.
    fn gradient_at(&self, p: [usize; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let mut lo = p;
            let mut hi = p;
            let span = if p[a] == 0 {
                hi[a] += 1;
                1.0
            } else if p[a] == n - 1 {
                lo[a] -= 1;
                1.0
            } else {
                lo[a] -= 1;
                hi[a] += 1;
                2.0
            };
            g[a] = (self.at(hi[0], hi[1], hi[2]) - self.at(lo[0], lo[1], lo[2])) / span;
        }
        g
    }
}

fn cell_fill(flags: &CellFlags, cell: usize) -> f64 {
    match flags.kind(cell) {
        CellType::Fluid | CellType::Interface => flags.fill(cell),
        _ => 0.0,
    }
}

/// Contour (2D) or isosurface (3D) of a scalar grid. Vertices are shared
/// between neighbouring marching cells; normals point from high to low
/// values, i.e. out of the liquid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InterfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub segments: Vec<[u32; 2]>,
    pub triangles: Vec<[u32; 3]>,
}

impl InterfaceMesh {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.triangles.is_empty()
    }
}

struct MeshBuilder<'a> {
    grid: &'a ScalarGrid,
    level: f64,
    mesh: InterfaceMesh,
    edges: HashMap<(usize, usize), u32>,
}

impl<'a> MeshBuilder<'a> {
    fn new(grid: &'a ScalarGrid, level: f64) -> Self {
        MeshBuilder {
            grid,
            level,
            mesh: InterfaceMesh::default(),
            edges: HashMap::new(),
        }
    }

    fn point(&self, idx: usize) -> [usize; 3] {
        let d = self.grid.dims;
        [idx % d[0], (idx / d[0]) % d[1], idx / (d[0] * d[1])]
    }

    /// Crossing vertex on the edge between grid points `a` and `b`.
    fn vertex(&mut self, a: usize, b: usize) -> u32 {
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&v) = self.edges.get(&key) {
            return v;
        }
        let (a, b) = key;
        let (fa, fb) = (self.grid.values[a], self.grid.values[b]);
        let t = ((self.level - fa) / (fb - fa)).clamp(0.0, 1.0);
        let (pa, pb) = (self.point(a), self.point(b));
        let (ga, gb) = (self.grid.gradient_at(pa), self.grid.gradient_at(pb));
        let mut pos = [0.0; 3];
        let mut n = [0.0; 3];
        for k in 0..3 {
            pos[k] = pa[k] as f64 + t * (pb[k] as f64 - pa[k] as f64);
            n[k] = -(ga[k] + t * (gb[k] - ga[k]));
        }
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len > 0.0 {
            n.iter_mut().for_each(|c| *c /= len);
        }
        let id = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(pos);
        self.mesh.normals.push(n);
        self.edges.insert(key, id);
        id
    }
}

// Square corners counter-clockwise from (i, j); edge k joins corner k and k+1.
const SQUARE_EDGES: [[usize; 2]; 4] = [[0, 1], [1, 2], [3, 2], [0, 3]];

fn square_segments(case: usize, saddle_inside: bool) -> &'static [[usize; 2]] {
    match case {
        0 | 15 => &[],
        1 | 14 => &[[3, 0]],
        2 | 13 => &[[0, 1]],
        3 | 12 => &[[3, 1]],
        4 | 11 => &[[1, 2]],
        6 | 9 => &[[0, 2]],
        7 | 8 => &[[3, 2]],
        5 if saddle_inside => &[[0, 1], [2, 3]],
        5 => &[[3, 0], [1, 2]],
        10 if saddle_inside => &[[3, 0], [1, 2]],
        10 => &[[0, 1], [2, 3]],
        _ => unreachable!(),
    }
}

/// Marching squares on the `z = 0` layer. A corner is inside when its value
/// exceeds `level`; saddles are resolved with the asymptotic decider.
pub fn extract_interface(grid: &ScalarGrid, level: f64) -> InterfaceMesh {
    let [w, h, _] = grid.dims;
    let mut b = MeshBuilder::new(grid, level);
    if w < 2 || h < 2 {
        return b.mesh;
    }
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let corners = [
                grid.index(i, j, 0),
                grid.index(i + 1, j, 0),
                grid.index(i + 1, j + 1, 0),
                grid.index(i, j + 1, 0),
            ];
            let v = corners.map(|c| grid.values[c]);
            let case = (0..4).fold(0, |acc, k| acc | (((v[k] > level) as usize) << k));
            let saddle_inside = if case == 5 || case == 10 {
                let denom = v[0] + v[2] - v[1] - v[3];
                denom != 0.0 && (v[0] * v[2] - v[1] * v[3]) / denom > level
            } else {
                false
            };
            for &[ea, eb] in square_segments(case, saddle_inside) {
                let [a0, a1] = SQUARE_EDGES[ea];
                let [b0, b1] = SQUARE_EDGES[eb];
                let va = b.vertex(corners[a0], corners[a1]);
                let vb = b.vertex(corners[b0], corners[b1]);
                b.mesh.segments.push([va, vb]);
            }
        }
    }
    b.mesh
}

/// Marching tetrahedra over the Kuhn split of every cube (six tetrahedra
/// along the main diagonal), which matches on shared faces and so needs no
/// ambiguity resolution.
pub fn extract_isosurface(grid: &ScalarGrid, level: f64) -> InterfaceMesh {
    let [nx, ny, nz] = grid.dims;
    let mut b = MeshBuilder::new(grid, level);
    if nx < 2 || ny < 2 || nz < 2 {
        return b.mesh;
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                for perm in PERMS {
                    let mut p = [x, y, z];
                    let mut tet = [0usize; 4];
                    tet[0] = grid.index(p[0], p[1], p[2]);
                    for (k, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[k + 1] = grid.index(p[0], p[1], p[2]);
                    }
                    march_tet(&mut b, tet);
                }
            }
        }
    }
    b.mesh
}

fn march_tet(b: &mut MeshBuilder, tet: [usize; 4]) {
    let level = b.level;
    let inside: Vec<usize> = tet.iter().copied().filter(|&c| b.grid.values[c] > level).collect();
    let outside: Vec<usize> = tet.iter().copied().filter(|&c| b.grid.values[c] <= level).collect();
    match inside.len() {
        1 | 3 => {
            let (apex, base) = if inside.len() == 1 {
                (inside[0], outside)
            } else {
                (outside[0], inside)
            };
            let v: Vec<u32> = base.iter().map(|&o| b.vertex(apex, o)).collect();
            b.mesh.triangles.push([v[0], v[1], v[2]]);
        }
        2 => {
            let (i0, i1) = (inside[0], inside[1]);
            let (o0, o1) = (outside[0], outside[1]);
            let a = b.vertex(i0, o0);
            let c = b.vertex(i0, o1);
            let d = b.vertex(i1, o1);
            let e = b.vertex(i1, o0);
            b.mesh.triangles.push([a, c, d]);
            b.mesh.triangles.push([a, d, e]);
        }
        _ => {}
    }
}
