use super::dressed::dressed_frame;
use super::phonon::dressed_relaxation_rates;
use super::SystemParams;
use crate::error::Result;
use crate::pulse::{instantaneous_detuning, SampledField};

pub(crate) type Real2 = [[f64; 2]; 2];

/// Rotating-frame Hamiltonian sampled on the field grid.
///
/// `H(t) = −Δ(t)|e⟩⟨e| + (Ω(t)/2)(|e⟩⟨g| + |g⟩⟨e|)` with `Ω = |envelope|`
/// and `Δ` the instantaneous detuning. Between samples both are linear in
/// time, and so is `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub t0: f64,
    pub dt: f64,
    pub omega: Vec<f64>,
    pub delta: Vec<f64>,
}

pub fn build_hamiltonian(field: &SampledField) -> Result<Hamiltonian> {
    Ok(Hamiltonian {
        t0: field.t0,
        dt: field.dt,
        omega: field.magnitude(),
        delta: instantaneous_detuning(field)?,
    })
}

impl Hamiltonian {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Matrix at sample `k` in the basis `(|g⟩, |e⟩)`.
    pub fn matrix(&self, k: usize) -> Real2 {
        hamiltonian_matrix(self.omega[k], self.delta[k])
    }

    /// Matrix at arbitrary `t` inside the grid, linearly interpolated.
    pub fn matrix_at(&self, t: f64) -> Real2 {
        let x = ((t - self.t0) / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.len() - 2);
        let s = x - k as f64;
        let omega = self.omega[k] + s * (self.omega[k + 1] - self.omega[k]);
        let delta = self.delta[k] + s * (self.delta[k + 1] - self.delta[k]);
        hamiltonian_matrix(omega, delta)
    }

    /// Eigenvalues at sample `k`, ascending.
    pub fn eigenvalues(&self, k: usize) -> [f64; 2] {
        let f = dressed_frame(self.omega[k], self.delta[k]);
        [f.e_minus, f.e_plus]
    }
}

pub(crate) fn hamiltonian_matrix(omega: f64, delta: f64) -> Real2 {
    [[0.0, 0.5 * omega], [0.5 * omega, -delta]]
}

/// Operators of the full generator at one grid node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeOps {
    pub h: Real2,
    /// `√γ_down·|−⟩⟨+|`
    pub l_down: Real2,
    /// `√γ_up·|+⟩⟨−|`
    pub l_up: Real2,
}

impl NodeOps {
    pub fn lerp(a: &NodeOps, b: &NodeOps, s: f64) -> NodeOps {
        let mix = |x: &Real2, y: &Real2| -> Real2 {
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = x[i][j] + s * (y[i][j] - x[i][j]);
                }
            }
            out
        };
        NodeOps {
            h: mix(&a.h, &b.h),
            l_down: mix(&a.l_down, &b.l_down),
            l_up: mix(&a.l_up, &b.l_up),
        }
    }
}

/// Hamiltonian plus dissipators, precomputed on the grid nodes.
///
/// Phonon jump operators are built in the instantaneous dressed basis at
/// every node, with eigenvector signs kept continuous from node to node,
/// and interpolated linearly in between like the Hamiltonian.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    pub t0: f64,
    pub dt: f64,
    pub nodes: Vec<NodeOps>,
    pub radiative: f64,
    pub dephasing: f64,
}

impl Generator {
    pub fn new(ham: &Hamiltonian, params: &SystemParams) -> Generator {
        let mut previous = None;
        let nodes = ham
            .omega
            .iter()
            .zip(&ham.delta)
            .map(|(&omega, &delta)| {
                let mut frame = dressed_frame(omega, delta);
                if let Some(prev) = &previous {
                    frame = frame.aligned_to(prev);
                }
                previous = Some(frame);
                let (down, up) = dressed_relaxation_rates(omega, delta, &params.phonon);
                let outer = |a: [f64; 2], b: [f64; 2], scale: f64| -> Real2 {
                    [
                        [scale * a[0] * b[0], scale * a[0] * b[1]],
                        [scale * a[1] * b[0], scale * a[1] * b[1]],
                    ]
                };
                NodeOps {
                    h: hamiltonian_matrix(omega, delta),
                    l_down: outer(frame.minus, frame.plus, down.sqrt()),
                    l_up: outer(frame.plus, frame.minus, up.sqrt()),
                }
            })
            .collect();
        Generator {
            t0: ham.t0,
            dt: ham.dt,
            nodes,
            radiative: params.radiative_rate_per_ps,
            dephasing: params.pure_dephasing_per_ps,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Operators at time `t` inside interval `k`.
    #[inline]
    pub fn ops_in(&self, k: usize, t: f64) -> NodeOps {
        let s = (t - self.time(k)) / self.dt;
        NodeOps::lerp(&self.nodes[k], &self.nodes[k + 1], s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::PulseSpec;

    #[test]
    fn trivial_matrices() {
        assert_eq!(hamiltonian_matrix(0.0, 0.0), [[0.0, 0.0], [0.0, 0.0]]);
        let h = hamiltonian_matrix(0.0, -5.0);
        assert_eq!(h, [[0.0, 0.0], [0.0, 5.0]]);
    }

    #[test]
    fn resonant_gap_equals_rabi_frequency() {
        // 100 GHz peak Rabi frequency: 2π·0.1 THz ≈ 0.628 rad/ps
        let omega = crate::units::ghz_to_radps(100.0);
        assert!((omega - 0.6283).abs() < 1e-4);
        let f = dressed_frame(omega, 0.0);
        assert!((f.e_plus - f.e_minus - omega).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_follows_field() {
        let field = PulseSpec::sech(3.0, 1.0).synthesize().unwrap();
        let ham = build_hamiltonian(&field).unwrap();
        let mid = ham.len() / 2;
        let h = ham.matrix(mid);
        assert!((2.0 * h[0][1] - field.peak()).abs() < 1e-9);
        assert_eq!(h[1][1], 0.0);
        let between = ham.matrix_at(ham.time(mid) + 0.5 * ham.dt);
        let expect = 0.5 * (ham.matrix(mid)[0][1] + ham.matrix(mid + 1)[0][1]);
        assert!((between[0][1] - expect).abs() < 1e-12);
    }
}
