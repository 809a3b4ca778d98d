use super::SliceData;

/// `du_b/di - du_a/dj` of a two-component slice: central differences where
/// both neighbours are valid, one-sided next to walls and domain edges.
pub fn vorticity(vel: &SliceData) -> SliceData {
    assert_eq!(vel.components, 2, "vorticity needs a vector slice");
    let (w, h) = (vel.width, vel.height);
    let deriv = |i: usize, j: usize, di: isize, dj: isize, comp: usize| -> f64 {
        let fwd = {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            (ni >= 0 && nj >= 0 && (ni as usize) < w && (nj as usize) < h && vel.is_valid(ni as usize, nj as usize))
                .then(|| vel.at(ni as usize, nj as usize, comp))
        };
        let bwd = {
            let (ni, nj) = (i as isize - di, j as isize - dj);
            (ni >= 0 && nj >= 0 && (ni as usize) < w && (nj as usize) < h && vel.is_valid(ni as usize, nj as usize))
                .then(|| vel.at(ni as usize, nj as usize, comp))
        };
        let here = vel.at(i, j, comp);
        match (fwd, bwd) {
            (Some(f), Some(b)) => 0.5 * (f - b),
            (Some(f), None) => f - here,
            (None, Some(b)) => here - b,
            (None, None) => 0.0,
        }
    };
    let mut values = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            if !vel.is_valid(i, j) {
                values.push(f64::NAN);
                continue;
            }
            let dv_di = deriv(i, j, 1, 0, 1);
            let du_dj = deriv(i, j, 0, 1, 0);
            values.push(dv_di - du_dj);
        }
    }
    SliceData {
        width: w,
        height: h,
        components: 1,
        values,
        valid: vel.valid.clone(),
    }
}
