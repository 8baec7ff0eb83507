//! Ideal and noisy hyperentangled states.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{self, CMatrix, DensityMatrix, HilbertError, Ket, Layout, Subsystem, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// Source imperfections: coherence per degree of freedom and white-noise weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub mu_tb: f64,
    pub mu_fb: f64,
    pub p_white: f64,
}

impl NoiseParams {
    pub const IDEAL: NoiseParams = NoiseParams {
        mu_tb: 1.0,
        mu_fb: 1.0,
        p_white: 0.0,
    };

    pub fn new(mu_tb: f64, mu_fb: f64, p_white: f64) -> Result<Self> {
        let n = NoiseParams {
            mu_tb,
            mu_fb,
            p_white,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("mu_tb", self.mu_tb)?;
        check_unit("mu_fb", self.mu_fb)?;
        if !(self.p_white >= 0.0 && self.p_white < 1.0) {
            return Err(StateError::OutOfRange {
                name: "p_white",
                value: self.p_white,
                range: "[0, 1)",
            });
        }
        Ok(())
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(StateError::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

/// Degree of freedom of the photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dof {
    #[serde(rename = "TB")]
    TimeBin,
    #[serde(rename = "FB")]
    FrequencyBin,
}

impl Dof {
    pub const BOTH: [Dof; 2] = [Dof::TimeBin, Dof::FrequencyBin];

    pub fn tag(self) -> &'static str {
        match self {
            Dof::TimeBin => "TB",
            Dof::FrequencyBin => "FB",
        }
    }

    pub fn layout(self) -> Layout {
        match self {
            Dof::TimeBin => Layout::time_bin(),
            Dof::FrequencyBin => Layout::frequency_bin(),
        }
    }

    pub fn subsystems(self) -> [Subsystem; 2] {
        match self {
            Dof::TimeBin => [Subsystem::TbSignal, Subsystem::TbIdler],
            Dof::FrequencyBin => [Subsystem::FbSignal, Subsystem::FbIdler],
        }
    }

    pub fn other(self) -> Dof {
        match self {
            Dof::TimeBin => Dof::FrequencyBin,
            Dof::FrequencyBin => Dof::TimeBin,
        }
    }
}

impl std::fmt::Display for Dof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// `(|00> + |11>)/√2` on the given pair of qubits.
pub fn bell_phi_plus(dof_labels: [Subsystem; 2]) -> Result<Ket> {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let layout = Layout::new(dof_labels.to_vec())?;
    Ok(Ket::new(DVector::from_vec(vec![h, z, z, h]), layout)?)
}

pub fn bell_for(dof: Dof) -> Ket {
    bell_phi_plus(dof.subsystems()).expect("distinct labels")
}

/// `|Φ⁺_TB> ⊗ |Φ⁺_FB>` in canonical order.
pub fn ideal_he_state() -> Ket {
    bell_for(Dof::TimeBin)
        .tensor(&bell_for(Dof::FrequencyBin))
        .expect("disjoint layouts")
}

/// Bell state with its coherence scaled by `mu`.
pub fn dephased_bell(mu: f64, dof: Dof) -> Result<DensityMatrix> {
    check_unit("mu", mu)?;
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = Complex64::new(0.5, 0.0);
    m[(3, 3)] = Complex64::new(0.5, 0.0);
    m[(0, 3)] = Complex64::new(0.5 * mu, 0.0);
    m[(3, 0)] = Complex64::new(0.5 * mu, 0.0);
    Ok(DensityMatrix::new(m, dof.layout())?)
}

/// `(1 − p)·[ρ_TB(μ_tb) ⊗ ρ_FB(μ_fb)] + p·I/16`.
pub fn noisy_he_state(noise: &NoiseParams) -> Result<DensityMatrix> {
    noise.validate()?;
    let tb = dephased_bell(noise.mu_tb, Dof::TimeBin)?;
    let fb = dephased_bell(noise.mu_fb, Dof::FrequencyBin)?;
    let product = tb.tensor(&fb)?;
    let white = DensityMatrix::maximally_mixed(Layout::canonical());
    Ok(product.mix(&white, noise.p_white)?)
}

/// Reduced state of one degree of freedom.
pub fn marginal(rho: &DensityMatrix, dof: Dof) -> Result<DensityMatrix> {
    Ok(hilbert::partial_trace(rho, &dof.subsystems())?)
}

/// Closed form for the purity of either marginal of [`noisy_he_state`].
pub fn marginal_purity_closed_form(mu: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    q * q * (1.0 + mu * mu) / 2.0 + p * q / 2.0 + p * p / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, fidelity_pure, purity, Observable, Pauli};
    use approx::assert_abs_diff_eq;

    fn corr(rho: &DensityMatrix, a: Pauli, b: Pauli) -> f64 {
        let o = Observable::pauli_string(&[a, b], rho.layout().clone()).unwrap();
        expectation(rho, &o).unwrap()
    }

    #[test]
    fn bell_state_properties() {
        let psi = bell_for(Dof::FrequencyBin);
        assert_abs_diff_eq!(psi.amplitudes().norm(), 1.0, epsilon = 1e-15);
        let rho = psi.projector();
        assert_abs_diff_eq!(fidelity_pure(&rho, &psi).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(corr(&rho, Pauli::X, Pauli::X), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(corr(&rho, Pauli::Z, Pauli::Z), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(corr(&rho, Pauli::X, Pauli::Z), 0.0, epsilon = 1e-15);
        assert!(bell_phi_plus([Subsystem::TbSignal, Subsystem::TbSignal]).is_err());
    }

    #[test]
    fn ideal_state_structure() {
        let he = ideal_he_state();
        let amps: Vec<f64> = he.amplitudes().iter().map(|a| a.re).collect();
        assert_eq!(amps.iter().filter(|a| a.abs() > 0.0).count(), 4);
        assert!(amps.iter().all(|&a| a == 0.0 || (a - 0.5).abs() < 1e-15));
        let rho = he.projector();
        assert_abs_diff_eq!(purity(&rho), 1.0, epsilon = 1e-14);
        for dof in Dof::BOTH {
            let m = marginal(&rho, dof).unwrap();
            assert_abs_diff_eq!(purity(&m), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(
                fidelity_pure(&m, &bell_for(dof)).unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn dephased_bell_limits() {
        let pure = dephased_bell(1.0, Dof::TimeBin).unwrap();
        let bell = bell_for(Dof::TimeBin).projector();
        assert!((pure.matrix() - bell.matrix()).norm() < 1e-15);
        let classical = dephased_bell(0.0, Dof::TimeBin).unwrap();
        assert_abs_diff_eq!(purity(&classical), 0.5, epsilon = 1e-15);
        let d = dephased_bell(0.834, Dof::FrequencyBin).unwrap();
        assert_abs_diff_eq!(purity(&d), 0.847778, epsilon = 1e-6);
        assert_abs_diff_eq!(
            fidelity_pure(&d, &bell_for(Dof::FrequencyBin)).unwrap(),
            0.917,
            epsilon = 1e-12
        );
        assert!(dephased_bell(1.2, Dof::TimeBin).is_err());
    }

    #[test]
    fn noisy_state_marginal_purities() {
        let ideal = noisy_he_state(&NoiseParams::IDEAL).unwrap();
        assert_abs_diff_eq!(purity(&ideal), 1.0, epsilon = 1e-14);

        let rho = noisy_he_state(&NoiseParams::new(0.93, 0.834, 0.0).unwrap()).unwrap();
        let tb = marginal(&rho, Dof::TimeBin).unwrap();
        let fb = marginal(&rho, Dof::FrequencyBin).unwrap();
        assert_abs_diff_eq!(purity(&tb), 0.93245, epsilon = 1e-12);
        assert_abs_diff_eq!(purity(&fb), 0.847778, epsilon = 1e-12);
        assert_abs_diff_eq!(
            marginal_purity_closed_form(0.93, 0.0),
            purity(&tb),
            epsilon = 1e-12
        );
    }

    #[test]
    fn parameter_ranges() {
        assert!(NoiseParams::new(1.1, 0.5, 0.0).is_err());
        assert!(NoiseParams::new(0.5, -0.1, 0.0).is_err());
        assert!(NoiseParams::new(0.5, 0.5, 1.0).is_err());
        let bad = NoiseParams {
            mu_tb: 0.5,
            mu_fb: 0.5,
            p_white: -0.5,
        };
        assert!(noisy_he_state(&bad).is_err());
    }

    #[test]
    fn marginal_trace_preserved() {
        let rho = noisy_he_state(&NoiseParams::new(0.3, 0.7, 0.2).unwrap()).unwrap();
        for dof in Dof::BOTH {
            let m = marginal(&rho, dof).unwrap();
            assert_abs_diff_eq!(hilbert::trace(m.matrix()).re, 1.0, epsilon = 1e-14);
            assert_eq!(m.layout(), &dof.layout());
        }
    }
}
