//! Faddeeva function `w(z) = exp(−z²)·erfc(−iz)` in the upper half plane.
//!
//! Weideman's rational expansion: with `Z = (L + iz)/(L − iz)`,
//! `w(z) ≈ 2·p(Z)/(L − iz)² + 1/(√π·(L − iz))`, where `p` is a polynomial
//! whose coefficients come from a discrete cosine transform of
//! `exp(−t²)(L² + t²)` sampled at `t = L·tan(θ/2)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::C64;

const TERMS: usize = 32;

struct Expansion {
    l: f64,
    coeffs: [f64; TERMS],
}

fn expansion() -> &'static Expansion {
    static CELL: OnceLock<Expansion> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = 2 * TERMS;
        let m2 = 2 * m;
        let l = (TERMS as f64 / 2f64.sqrt()).sqrt();
        let samples: Vec<(f64, f64)> = (-(m as i64) + 1..m as i64)
            .map(|k| {
                let t = l * (k as f64 * PI / m as f64 / 2.0).tan();
                (k as f64, (-t * t).exp() * (l * l + t * t))
            })
            .collect();
        let mut coeffs = [0.0; TERMS];
        for (n, c) in coeffs.iter_mut().enumerate() {
            let n = (n + 1) as f64;
            *c = samples
                .iter()
                .map(|(k, f)| f * (2.0 * PI * k * n / m2 as f64).cos())
                .sum::<f64>()
                / m2 as f64;
        }
        Expansion { l, coeffs }
    })
}

/// `w(z)` for `Im z ≥ 0`; the lower half plane uses
/// `w(z) = 2·exp(−z²) − w(−z)`.
pub fn faddeeva(z: C64) -> C64 {
    if z.im < 0.0 {
        return 2.0 * (-z * z).exp() - faddeeva(-z);
    }
    let e = expansion();
    let iz = C64::new(-z.im, z.re);
    let denom = e.l - iz;
    let zz = (e.l + iz) / denom;
    let mut p = C64::new(0.0, 0.0);
    for &c in e.coeffs.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (denom * denom) + 1.0 / (PI.sqrt() * denom)
}
