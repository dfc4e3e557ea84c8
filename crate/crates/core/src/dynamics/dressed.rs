use serde::Serialize;

/// Instantaneous eigen-decomposition of the rotating-frame Hamiltonian.
///
/// With `θ = atan2(Ω, Δ)`:
/// `|+⟩ = cos(θ/2)|g⟩ + sin(θ/2)|e⟩`, `|−⟩ = sin(θ/2)|g⟩ − cos(θ/2)|e⟩`.
/// Far red detuning (θ → π) gives `|+⟩ → |e⟩`, `|−⟩ → |g⟩`; far blue
/// (θ → 0) the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedFrame {
    /// Splitting `Λ = √(Δ² + Ω²)`, rad/ps.
    pub splitting: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    /// Mixing angle θ ∈ [0, π].
    pub mixing_angle: f64,
    pub plus: [f64; 2],
    pub minus: [f64; 2],
}

impl DressedFrame {
    /// Flip eigenvector signs so both have non-negative overlap with
    /// `previous`.
    pub fn aligned_to(mut self, previous: &DressedFrame) -> DressedFrame {
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        if dot(self.plus, previous.plus) < 0.0 {
            self.plus = [-self.plus[0], -self.plus[1]];
        }
        if dot(self.minus, previous.minus) < 0.0 {
            self.minus = [-self.minus[0], -self.minus[1]];
        }
        self
    }
}

pub fn dressed_frame(omega: f64, delta: f64) -> DressedFrame {
    let omega = omega.abs();
    let splitting = omega.hypot(delta);
    let theta = omega.atan2(delta);
    let (s, c) = (0.5 * theta).sin_cos();
    DressedFrame {
        splitting,
        e_plus: 0.5 * (-delta + splitting),
        e_minus: 0.5 * (-delta - splitting),
        mixing_angle: theta,
        plus: [c, s],
        minus: [s, -c],
    }
}

/// Pointwise `|Ω̇Δ − ΩΔ̇| / Λ³` from central differences on a uniform grid.
/// Samples with `Λ = 0` report zero.
pub fn adiabaticity_series(omega: &[f64], delta: &[f64], dt: f64) -> Vec<f64> {
    let n = omega.len();
    let deriv = |v: &[f64], k: usize| -> f64 {
        if n < 2 {
            0.0
        } else if k == 0 {
            (v[1] - v[0]) / dt
        } else if k == n - 1 {
            (v[n - 1] - v[n - 2]) / dt
        } else {
            (v[k + 1] - v[k - 1]) / (2.0 * dt)
        }
    };
    (0..n)
        .map(|k| {
            let lambda = omega[k].hypot(delta[k]);
            if lambda == 0.0 {
                return 0.0;
            }
            let num = deriv(omega, k) * delta[k] - omega[k] * deriv(delta, k);
            num.abs() / lambda.powi(3)
        })
        .collect()
}

/// Largest value of the adiabaticity series over the field; values well
/// below one indicate adiabatic following.
pub fn adiabaticity_parameter(field: &crate::pulse::SampledField) -> crate::Result<f64> {
    let delta = crate::pulse::instantaneous_detuning(field)?;
    let omega = field.magnitude();
    Ok(adiabaticity_series(&omega, &delta, field.dt)
        .into_iter()
        .fold(0.0, f64::max))
}
