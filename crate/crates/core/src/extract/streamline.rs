use super::SliceData;

/// Speed below which a streamline is considered stagnant.
pub const STAGNATION_SPEED: f64 = 1e-8;

/// Bilinear interpolation of a two-component slice. `None` outside the
/// sampled rectangle or when the nearest sample is a wall. Wall samples
/// contribute zero velocity to neighbouring interpolants.
pub fn sample_velocity(vel: &SliceData, p: [f64; 2]) -> Option<[f64; 2]> {
    let (w, h) = (vel.width, vel.height);
    let (x, y) = (p[0], p[1]);
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let (ni, nj) = (x.round() as usize, y.round() as usize);
    if !vel.is_valid(ni, nj) {
        return None;
    }
    let i0 = (x.floor() as usize).min(w.saturating_sub(2));
    let j0 = (y.floor() as usize).min(h.saturating_sub(2));
    let i1 = (i0 + 1).min(w - 1);
    let j1 = (j0 + 1).min(h - 1);
    let (tx, ty) = (x - i0 as f64, y - j0 as f64);
    let mut out = [0.0; 2];
    for (i, j, wgt) in [
        (i0, j0, (1.0 - tx) * (1.0 - ty)),
        (i1, j0, tx * (1.0 - ty)),
        (i0, j1, (1.0 - tx) * ty),
        (i1, j1, tx * ty),
    ] {
        if wgt == 0.0 || !vel.is_valid(i, j) {
            continue;
        }
        out[0] += wgt * vel.at(i, j, 0);
        out[1] += wgt * vel.at(i, j, 1);
    }
    Some(out)
}

fn direction(vel: &SliceData, p: [f64; 2]) -> Option<[f64; 2]> {
    let v = sample_velocity(vel, p)?;
    let s = (v[0] * v[0] + v[1] * v[1]).sqrt();
    (s >= STAGNATION_SPEED).then(|| [v[0] / s, v[1] / s])
}

/// Traces one streamline per seed with classical RK4 on the normalised
/// velocity, so `h` is an arc-length step in cells. A seed that is outside
/// the slice or inside a wall yields an empty polyline.
pub fn trace_streamlines(
    vel: &SliceData,
    seeds: &[[f64; 2]],
    h: f64,
    max_steps: usize,
) -> Vec<Vec<[f64; 2]>> {
    assert_eq!(vel.components, 2, "streamlines need a vector slice");
    seeds
        .iter()
        .map(|&seed| trace_one(vel, seed, h, max_steps))
        .collect()
}

fn trace_one(vel: &SliceData, seed: [f64; 2], h: f64, max_steps: usize) -> Vec<[f64; 2]> {
    if sample_velocity(vel, seed).is_none() {
        return Vec::new();
    }
    let mut line = vec![seed];
    let mut p = seed;
    let add = |p: [f64; 2], k: [f64; 2], s: f64| [p[0] + s * k[0], p[1] + s * k[1]];
    for _ in 0..max_steps {
        let Some(k1) = direction(vel, p) else { break };
        let Some(k2) = direction(vel, add(p, k1, 0.5 * h)) else { break };
        let Some(k3) = direction(vel, add(p, k2, 0.5 * h)) else { break };
        let Some(k4) = direction(vel, add(p, k3, h)) else { break };
        let next = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if sample_velocity(vel, next).is_none() {
            break;
        }
        line.push(next);
        p = next;
    }
    line
}

/// Regular seed lattice over the valid, moving part of a slice.
pub fn seed_grid(vel: &SliceData, spacing: usize) -> Vec<[f64; 2]> {
    let spacing = spacing.max(1);
    let mut seeds = Vec::new();
    for j in (spacing / 2..vel.height).step_by(spacing) {
        for i in (spacing / 2..vel.width).step_by(spacing) {
            if !vel.is_valid(i, j) {
                continue;
            }
            let (u, v) = (vel.at(i, j, 0), vel.at(i, j, 1));
            if (u * u + v * v).sqrt() >= STAGNATION_SPEED {
                seeds.push([i as f64, j as f64]);
            }
        }
    }
    seeds
}
