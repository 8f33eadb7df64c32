//! Special functions needed by the emitter model.

use std::f64::consts::{PI, TAU};

/// Number of trapezoid nodes over one period of the Bessel integrand.
///
/// The integrand is periodic and entire, so the trapezoid rule converges
/// geometrically once the node count exceeds |x|; 256 nodes give full double
/// precision for |x| up to roughly 150, far beyond the piston arguments used
/// here (k·a ≤ 20).
const BESSEL_NODES: usize = 256;

/// Bessel function of the first kind, order one.
///
/// Evaluated from Bessel's integral `J₁(x) = (1/2π) ∫₀^{2π} cos(τ − x sin τ) dτ`.
pub fn bessel_j1(x: f64) -> f64 {
    if x.abs() > 150.0 {
        // Leading-order asymptotic form; not reached by the acoustic models.
        return (2.0 / (PI * x.abs())).sqrt() * (x.abs() - 0.75 * PI).cos() * x.signum();
    }
    let h = TAU / BESSEL_NODES as f64;
    let sum: f64 = (0..BESSEL_NODES)
        .map(|i| {
            let t = i as f64 * h;
            (t - x * t.sin()).cos()
        })
        .sum();
    sum / BESSEL_NODES as f64
}

/// Finds a root of `f` in `[lo, hi]` by bisection. The bracket must change sign.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || (hi - lo) < 1e-15 * mid.abs().max(1.0) {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series `Σ (-1)^m (x/2)^{2m+1} / (m! (m+1)!)`, accurate for small |x|.
    fn j1_series(x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half;
        let mut sum = term;
        for m in 1..60 {
            term *= -half * half / (m as f64 * (m as f64 + 1.0));
            sum += term;
        }
        sum
    }

    #[test]
    fn matches_tabulated_values() {
        // Abramowitz & Stegun Table 9.1.
        let table = [
            (0.5, 0.242_268_457_674_873_9),
            (1.0, 0.440_050_585_744_933_5),
            (2.0, 0.576_724_807_756_873_4),
            (5.0, -0.327_579_137_591_465_2),
            (10.0, 0.043_472_746_168_861_44),
        ];
        for (x, expected) in table {
            assert!((bessel_j1(x) - expected).abs() < 1e-14, "J1({x})");
            assert!((bessel_j1(-x) + expected).abs() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_power_series() {
        for i in 0..=80 {
            let x = i as f64 * 0.1;
            assert!((bessel_j1(x) - j1_series(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn first_zero() {
        let z = bisect(bessel_j1, 3.0, 4.5).unwrap();
        assert!((z - 3.831_705_970_207_512).abs() < 1e-12);
    }
}
