use super::{Dims, LatticeModel};

/// Populations and macroscopic moments for every cell.
///
/// `f` is the committed state. A step collides `f` into `f_post`, streams
/// `f_post` into `f_tmp` and swaps `f`/`f_tmp` only once the result has been
/// checked, so a diverged step leaves `f` untouched.
#[derive(Clone, Debug)]
pub struct LatticeField {
    dims: Dims,
    q: usize,
    pub(crate) f: Vec<f64>,
    pub(crate) f_post: Vec<f64>,
    pub(crate) f_tmp: Vec<f64>,
    pub(crate) rho: Vec<f64>,
    pub(crate) u: Vec<[f64; 3]>,
    pub(crate) rho_tmp: Vec<f64>,
    pub(crate) u_tmp: Vec<[f64; 3]>,
}

impl LatticeField {
    /// A field with every cell at rest equilibrium (`f_i = w_i`).
    pub fn at_rest(dims: Dims, model: &LatticeModel) -> Self {
        let q = model.q();
        let n = dims.cells();
        let mut f = Vec::with_capacity(n * q);
        for _ in 0..n {
            f.extend_from_slice(model.weights);
        }
        LatticeField {
            dims,
            q,
            f_post: f.clone(),
            f_tmp: f.clone(),
            f,
            rho: vec![1.0; n],
            u: vec![[0.0; 3]; n],
            rho_tmp: vec![1.0; n],
            u_tmp: vec![[0.0; 3]; n],
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn populations(&self, cell: usize) -> &[f64] {
        &self.f[cell * self.q..(cell + 1) * self.q]
    }

    #[inline]
    pub fn populations_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.f[cell * self.q..(cell + 1) * self.q]
    }

    /// Post-collision populations of the last collide pass.
    #[inline]
    pub fn post_collision(&self, cell: usize) -> &[f64] {
        &self.f_post[cell * self.q..(cell + 1) * self.q]
    }

    pub fn all_populations(&self) -> &[f64] {
        &self.f
    }

    #[inline]
    pub fn rho(&self, cell: usize) -> f64 {
        self.rho[cell]
    }

    #[inline]
    pub fn velocity(&self, cell: usize) -> [f64; 3] {
        self.u[cell]
    }

    pub fn set_moments(&mut self, cell: usize, rho: f64, u: [f64; 3]) {
        self.rho[cell] = rho;
        self.u[cell] = u;
    }

    pub(crate) fn commit(&mut self) {
        std::mem::swap(&mut self.f, &mut self.f_tmp);
        std::mem::swap(&mut self.rho, &mut self.rho_tmp);
        std::mem::swap(&mut self.u, &mut self.u_tmp);
    }
}
