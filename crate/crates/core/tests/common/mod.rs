//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the model code of the crate.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn wrap(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if r < -std::f64::consts::PI + 1e-300 {
        r + t
    } else {
        r
    }
}

/// Range-bearing observation of `(mx, my)` from `(x, y, theta)`.
pub fn h_active(s: &[f64; 5]) -> [f64; 2] {
    let (dx, dy) = (s[3] - s[0], s[4] - s[1]);
    [dx.hypot(dy), wrap(dy.atan2(dx) - s[2])]
}

pub fn h_passive(s: &[f64; 5]) -> [f64; 1] {
    let (dx, dy) = (s[3] - s[0], s[4] - s[1]);
    [wrap(dy.atan2(dx) - s[2])]
}

/// Central-difference Jacobian of `f` with respect to the five stacked
/// coordinates `(x, y, theta, mx, my)`. Angular outputs are wrapped.
pub fn numeric_jacobian<const M: usize>(f: impl Fn(&[f64; 5]) -> [f64; M], s: &[f64; 5], angular: &[bool; M]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(M, 5);
    for j in 0..5 {
        let h = 1e-6 * s[j].abs().max(1.0);
        let mut up = *s;
        let mut dn = *s;
        up[j] += h;
        dn[j] -= h;
        let (a, b) = (f(&up), f(&dn));
        for i in 0..M {
            let d = if angular[i] { wrap(a[i] - b[i]) } else { a[i] - b[i] };
            out[(i, j)] = d / (2.0 * h);
        }
    }
    out
}

/// Random geometry with the landmark between 0.5 and 25 m from the pose.
pub fn random_geometry<R: Rng>(rng: &mut R) -> [f64; 5] {
    let x = rng.random_range(-20.0..20.0);
    let y = rng.random_range(-20.0..20.0);
    let theta = rng.random_range(-3.1..3.1);
    let r: f64 = rng.random_range(0.5..25.0);
    let b: f64 = rng.random_range(-3.1..3.1);
    [x, y, theta, x + r * b.cos(), y + r * b.sin()]
}

/// One stacked observation for the batch oracle.
pub struct BatchTerm {
    /// Offset of the landmark block in the state.
    pub offset: usize,
    pub z: Vec<f64>,
    pub active: bool,
}

/// Joint EKF update of every term at once, linearized at the prior mean.
pub fn batch_update(x: &DVector<f64>, p: &DMatrix<f64>, terms: &[BatchTerm], sr: f64, sb: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let rows: usize = terms.iter().map(|t| if t.active { 2 } else { 1 }).sum();
    let mut h = DMatrix::zeros(rows, n);
    let mut nu = DVector::zeros(rows);
    let mut r = DMatrix::zeros(rows, rows);
    let mut row = 0;
    for t in terms {
        let s = [x[0], x[1], x[2], x[t.offset], x[t.offset + 1]];
        let (dx, dy) = (s[3] - s[0], s[4] - s[1]);
        let q = dx * dx + dy * dy;
        let d = q.sqrt();
        let bearing_row = [dy / q, -dx / q, -1.0, -dy / q, dx / q];
        if t.active {
            let range_row = [-dx / d, -dy / d, 0.0, dx / d, dy / d];
            for (k, col) in [0, 1, 2, t.offset, t.offset + 1].into_iter().enumerate() {
                h[(row, col)] = range_row[k];
                h[(row + 1, col)] = bearing_row[k];
            }
            let zhat = h_active(&s);
            nu[row] = t.z[0] - zhat[0];
            nu[row + 1] = wrap(t.z[1] - zhat[1]);
            r[(row, row)] = sr * sr;
            r[(row + 1, row + 1)] = sb * sb;
            row += 2;
        } else {
            for (k, col) in [0, 1, 2, t.offset, t.offset + 1].into_iter().enumerate() {
                h[(row, col)] = bearing_row[k];
            }
            nu[row] = wrap(t.z[0] - h_passive(&s)[0]);
            r[(row, row)] = sb * sb;
            row += 1;
        }
    }
    let s = &h * p * h.transpose() + r;
    let k = p * h.transpose() * s.try_inverse().expect("innovation covariance invertible");
    let mut x1 = x + &k * nu;
    x1[2] = wrap(x1[2]);
    let p1 = p - &k * &h * p;
    (x1, p1)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
