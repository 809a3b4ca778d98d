/// Grid extents in cells. 2D grids have `nz == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn new_2d(nx: usize, ny: usize) -> Self {
        Dims { nx, ny, nz: 1 }
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn is_2d(&self) -> bool {
        self.nz == 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let x = cell % self.nx;
        let rest = cell / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    pub fn contains(&self, p: [i64; 3]) -> bool {
        p[0] >= 0
            && p[1] >= 0
            && p[2] >= 0
            && (p[0] as usize) < self.nx
            && (p[1] as usize) < self.ny
            && (p[2] as usize) < self.nz
    }

    /// Cell at `cell + c`, wrapping periodically on every axis.
    #[inline]
    pub fn neighbor(&self, cell: usize, c: [i32; 3]) -> usize {
        let [x, y, z] = self.coords(cell);
        self.index(
            wrap(x, c[0], self.nx),
            wrap(y, c[1], self.ny),
            wrap(z, c[2], self.nz),
        )
    }

    /// Cell at `cell + c` without wrapping, or `None` outside the grid.
    pub fn offset(&self, cell: usize, c: [i32; 3]) -> Option<usize> {
        let p = self.coords(cell);
        let q = [
            p[0] as i64 + c[0] as i64,
            p[1] as i64 + c[1] as i64,
            p[2] as i64 + c[2] as i64,
        ];
        self.contains(q)
            .then(|| self.index(q[0] as usize, q[1] as usize, q[2] as usize))
    }

    /// True when the cell lies on any face of the domain.
    pub fn on_boundary(&self, cell: usize) -> bool {
        self.boundary_normal(cell).is_some()
    }

    /// Outward normal of the first domain face (x, then y, then z) the cell
    /// lies on. Axes with a single layer have no faces.
    pub fn boundary_normal(&self, cell: usize) -> Option<[i32; 3]> {
        let p = self.coords(cell);
        let n = self.as_array();
        for axis in 0..3 {
            if n[axis] <= 1 {
                continue;
            }
            let mut normal = [0; 3];
            if p[axis] == 0 {
                normal[axis] = -1;
                return Some(normal);
            }
            if p[axis] == n[axis] - 1 {
                normal[axis] = 1;
                return Some(normal);
            }
        }
        None
    }
}

#[inline]
fn wrap(p: usize, d: i32, n: usize) -> usize {
    let v = p as i64 + d as i64;
    v.rem_euclid(n as i64) as usize
}

/// Half-open axis-aligned box of cells, `lo` inclusive and `hi` exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Region {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Region { lo, hi }
    }

    pub fn whole(dims: Dims) -> Self {
        Region {
            lo: [0; 3],
            hi: dims.as_array(),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.hi[a] <= self.lo[a])
    }

    pub fn within(&self, dims: Dims) -> bool {
        let n = dims.as_array();
        (0..3).all(|a| self.lo[a] <= self.hi[a] && self.hi[a] <= n[a])
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] < self.hi[a])
    }

    /// Cell indices in row-major order (x fastest).
    pub fn cells(&self, dims: Dims) -> impl Iterator<Item = usize> + '_ {
        let r = *self;
        (r.lo[2]..r.hi[2]).flat_map(move |z| {
            (r.lo[1]..r.hi[1])
                .flat_map(move |y| (r.lo[0]..r.hi[0]).map(move |x| dims.index(x, y, z)))
        })
    }

    pub fn translated(&self, offset: [i64; 3]) -> Option<Region> {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            let l = self.lo[a] as i64 + offset[a];
            let h = self.hi[a] as i64 + offset[a];
            if l < 0 || h < 0 {
                return None;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        Some(Region { lo, hi })
    }
}
