//! Deterministic low-discrepancy sampling.
//!
//! All sample patterns derive from the Halton sequence; the scenario `seed`
//! offsets the starting index so runs are reproducible bit-for-bit.

const BASES: [u64; 3] = [2, 3, 5];

/// Radical-inverse of `index` in `base`, in (0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut result = 0.0;
    let mut f = inv;
    while index > 0 {
        result += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    result
}

/// `count` Halton points in the unit cube (0,1)^dim, starting at index
/// `seed + 1` (index 0 is degenerate).
pub fn halton_cube(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim >= 1 && dim <= 3, "sampling supports dims 1..=3");
    (0..count)
        .map(|k| {
            let idx = seed + 1 + k as u64;
            (0..dim).map(|d| radical_inverse(idx, BASES[d])).collect()
        })
        .collect()
}

/// Halton points mapped uniformly into the ball of `radius` about `center`.
pub fn halton_ball(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = center.len();
    halton_cube(dim, count, seed)
        .into_iter()
        .map(|u| {
            let z = cube_to_ball(&u);
            center.iter().zip(&z).map(|(c, zi)| c + radius * zi).collect()
        })
        .collect()
}

/// Maps a unit-cube point to the unit ball, uniform in volume.
pub fn cube_to_ball(u: &[f64]) -> Vec<f64> {
    match u.len() {
        1 => vec![2.0 * u[0] - 1.0],
        2 => {
            let r = u[0].sqrt();
            let th = 2.0 * std::f64::consts::PI * u[1];
            vec![r * th.cos(), r * th.sin()]
        }
        3 => {
            let r = u[0].cbrt();
            let ct = 2.0 * u[1] - 1.0;
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let ph = 2.0 * std::f64::consts::PI * u[2];
            vec![r * st * ph.cos(), r * st * ph.sin(), r * ct]
        }
        d => panic!("unsupported dimension {d}"),
    }
}

/// Halton points in the axis box [lo, hi].
pub fn halton_box(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = lo.len();
    halton_cube(dim, count, seed)
        .into_iter()
        .map(|u| (0..dim).map(|d| lo[d] + (hi[d] - lo[d]) * u[d]).collect())
        .collect()
}

/// Fixed unit direction set used by shell samplers and jet verification.
pub fn directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * (j as f64) / 16.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            // axes, face diagonals and corner diagonals, normalized
            let mut dirs = Vec::new();
            for ix in -1i32..=1 {
                for iy in -1i32..=1 {
                    for iz in -1i32..=1 {
                        if ix == 0 && iy == 0 && iz == 0 {
                            continue;
                        }
                        let v = [ix as f64, iy as f64, iz as f64];
                        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                        dirs.push(vec![v[0] / n, v[1] / n, v[2] / n]);
                    }
                }
            }
            dirs
        }
        d => panic!("unsupported dimension {d}"),
    }
}
