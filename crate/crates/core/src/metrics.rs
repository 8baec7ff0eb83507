//! Entanglement and hyperentanglement figures of merit.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzers::stabilizer_plan;
use crate::hilbert::{self, CMatrix, DensityMatrix, HilbertError, Ket, Pauli};
use crate::state::{bell_phi_plus, StateError};
use crate::tomo::ErrorEstimate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("expected a two-qubit state, got dimension {0}")]
    NotTwoQubit(usize),
    #[error("expected the 16-dimensional state, got dimension {0}")]
    NotFullState(usize),
    #[error("need at least 4 distinct phases for a fringe fit, got {0}")]
    TooFewPhases(usize),
    #[error("witness needs d >= 2 and 2d stabilizer values (d = {d}, got {got})")]
    StabilizerCount { d: usize, got: usize },
    #[error("standard deviation must be positive (got {0})")]
    NonPositiveStd(f64),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Local-realist bound of the CHSH expression.
pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;
/// Tsirelson bound `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

fn two_qubit(rho: &DensityMatrix) -> Result<&CMatrix> {
    if rho.dim() != 4 {
        return Err(MetricsError::NotTwoQubit(rho.dim()));
    }
    Ok(rho.matrix())
}

/// `T_ij = Tr[ρ σ_i⊗σ_j]` for `i, j ∈ {x, y, z}`.
pub fn correlation_matrix(rho: &DensityMatrix) -> Result<Matrix3<f64>> {
    let m = two_qubit(rho)?;
    let mut t = Matrix3::zeros();
    for (i, a) in Pauli::XYZ.iter().enumerate() {
        for (j, b) in Pauli::XYZ.iter().enumerate() {
            let op = a.matrix().kronecker(&b.matrix());
            t[(i, j)] = hilbert::trace_product(m, &op).re;
        }
    }
    Ok(t)
}

/// Maximal CHSH value over all measurement directions: `2√(λ₁ + λ₂)` with
/// λ₁ ≥ λ₂ the two largest eigenvalues of `TᵀT`.
pub fn chsh_horodecki(rho: &DensityMatrix) -> Result<f64> {
    let t = correlation_matrix(rho)?;
    let mut ev: Vec<f64> = (t.transpose() * t)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(2.0 * (ev[0] + ev[1]).max(0.0).sqrt())
}

/// Unit Bloch direction of a ±1-valued measurement `n·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(pub Vector3<f64>);

impl Direction {
    /// Polar angle θ from +z and azimuth φ from +x.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        Direction(Vector3::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ))
    }

    /// Direction in the x–z plane at `angle` from +z.
    pub fn xz(angle: f64) -> Self {
        Direction::spherical(angle, 0.0)
    }

    fn operator(&self) -> CMatrix {
        let v = self.0;
        Pauli::X.matrix().scale(v.x) + Pauli::Y.matrix().scale(v.y) + Pauli::Z.matrix().scale(v.z)
    }
}

/// Measurement choices `(a, a′)` on the signal and `(b, b′)` on the idler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub a: Direction,
    pub a_prime: Direction,
    pub b: Direction,
    pub b_prime: Direction,
}

impl ChshSettings {
    /// (0, π/2; π/4, 3π/4) in the x–z plane.
    pub fn canonical() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        ChshSettings {
            a: Direction::xz(0.0),
            a_prime: Direction::xz(FRAC_PI_2),
            b: Direction::xz(FRAC_PI_4),
            b_prime: Direction::xz(3.0 * FRAC_PI_4),
        }
    }
}

/// `E(a, b) = Tr[ρ (a·σ)⊗(b·σ)]`.
pub fn correlator(rho: &DensityMatrix, a: &Direction, b: &Direction) -> Result<f64> {
    let m = two_qubit(rho)?;
    Ok(hilbert::trace_product(m, &a.operator().kronecker(&b.operator())).re)
}

/// `E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)`.
pub fn chsh_fixed_angles(rho: &DensityMatrix, s: &ChshSettings) -> Result<f64> {
    Ok(
        correlator(rho, &s.a, &s.b)? - correlator(rho, &s.a, &s.b_prime)?
            + correlator(rho, &s.a_prime, &s.b)?
            + correlator(rho, &s.a_prime, &s.b_prime)?,
    )
}

/// Least-squares fit of `A(1 + V cos(φ + φ₀))` to a phase sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility: f64,
    /// Mean level `A`.
    pub mean: f64,
    /// φ₀ in radians.
    pub phase_offset: f64,
}

pub fn visibility_from_fringe(samples: &[(f64, f64)]) -> Result<FringeFit> {
    let mut phases: Vec<f64> = samples
        .iter()
        .map(|(p, _)| p.rem_euclid(std::f64::consts::TAU))
        .collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if phases.len() < 4 {
        return Err(MetricsError::TooFewPhases(phases.len()));
    }
    // rate = c0 + c1 cos φ + c2 sin φ
    let n = samples.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => samples[r].0.cos(),
        _ => samples[r].0.sin(),
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let coef = design
        .svd(true, true)
        .solve(&y, 1e-12)
        .expect("thin SVD with U and V computed");
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);
    let amp = (c1 * c1 + c2 * c2).sqrt();
    let visibility = if c0 > 0.0 { amp / c0 } else { 0.0 };
    Ok(FringeFit {
        visibility,
        mean: c0,
        // c1 cos φ + c2 sin φ = amp cos(φ + φ₀) with φ₀ = atan2(−c2, c1)
        phase_offset: (-c2).atan2(c1),
    })
}

/// `W = (2d − 1) − Σ S_k`; negative values certify hyperentanglement.
pub fn witness(stabilizers: &[f64], d: usize) -> Result<f64> {
    if d < 2 || stabilizers.len() != 2 * d {
        return Err(MetricsError::StabilizerCount {
            d,
            got: stabilizers.len(),
        });
    }
    Ok((2 * d - 1) as f64 - stabilizers.iter().sum::<f64>())
}

pub fn is_hyperentangled(witness_value: f64) -> bool {
    witness_value < 0.0
}

/// Which side of the threshold counts as a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationSide {
    /// e.g. CHSH, `S > 2`
    Above,
    /// e.g. the witness, `W < 0`
    Below,
}

/// Distance from `threshold` in units of `std`; positive when violated.
pub fn violation_stds(value: f64, threshold: f64, std: f64, side: ViolationSide) -> Result<f64> {
    if !(std > 0.0) {
        return Err(MetricsError::NonPositiveStd(std));
    }
    let excess = match side {
        ViolationSide::Above => value - threshold,
        ViolationSide::Below => threshold - value,
    };
    Ok(excess / std)
}

/// `|Φ⁺⟩` on the two qubits of a two-qubit state's layout.
pub fn bell_target(rho: &DensityMatrix) -> Result<Ket> {
    two_qubit(rho)?;
    let l = rho.layout().labels();
    Ok(bell_phi_plus([l[0], l[1]])?)
}

/// Fidelity, purity and CHSH value of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofPoint {
    pub fidelity: f64,
    pub purity: f64,
    pub s_parameter: f64,
}

pub fn dof_point(rho: &DensityMatrix) -> Result<DofPoint> {
    let target = bell_target(rho)?;
    Ok(DofPoint {
        fidelity: hilbert::fidelity_pure(rho, &target)?,
        purity: hilbert::purity(rho),
        s_parameter: chsh_horodecki(rho)?,
    })
}

/// Stabilizer expectations `⟨S_k⟩` of the full state, in witness order.
pub fn stabilizer_values(rho_full: &DensityMatrix) -> Result<[f64; 4]> {
    if rho_full.dim() != 16 {
        return Err(MetricsError::NotFullState(rho_full.dim()));
    }
    let plan = stabilizer_plan();
    let mut out = [0.0; 4];
    for (o, s) in out.iter_mut().zip(&plan) {
        *o = hilbert::expectation(rho_full, s)?;
    }
    Ok(out)
}

/// One row of the figures-of-merit table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofMerits {
    pub fidelity: f64,
    pub fidelity_std: f64,
    pub purity: f64,
    pub purity_std: f64,
    pub s_parameter: f64,
    pub s_std: f64,
    /// `None` when `s_std` is zero.
    pub violation_stds_chsh: Option<f64>,
    pub visibility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritReport {
    #[serde(rename = "TB")]
    pub tb: DofMerits,
    #[serde(rename = "FB")]
    pub fb: DofMerits,
    pub stabilizers: [f64; 4],
    pub stabilizer_stds: [f64; 4],
    pub witness: f64,
    pub witness_std: f64,
    /// `None` when `witness_std` is zero.
    pub violation_stds_witness: Option<f64>,
    pub hyperentangled: bool,
}

fn dof_merits(rho: &DensityMatrix, err: &crate::tomo::DofErrors) -> Result<DofMerits> {
    let p = dof_point(rho)?;
    Ok(DofMerits {
        fidelity: p.fidelity,
        fidelity_std: err.fidelity,
        purity: p.purity,
        purity_std: err.purity,
        s_parameter: p.s_parameter,
        s_std: err.s_parameter,
        violation_stds_chsh: violation_stds(
            p.s_parameter,
            CHSH_CLASSICAL_BOUND,
            err.s_parameter,
            ViolationSide::Above,
        )
        .ok(),
        visibility: None,
    })
}

/// Report with stabilizers evaluated on the full state.
pub fn merit_report(
    rho_tb: &DensityMatrix,
    rho_fb: &DensityMatrix,
    rho_full: &DensityMatrix,
    errors: &ErrorEstimate,
) -> Result<MeritReport> {
    let stabilizers = stabilizer_values(rho_full)?;
    merit_report_with_stabilizers(rho_tb, rho_fb, stabilizers, errors)
}

/// Report with externally measured stabilizer values.
pub fn merit_report_with_stabilizers(
    rho_tb: &DensityMatrix,
    rho_fb: &DensityMatrix,
    stabilizers: [f64; 4],
    errors: &ErrorEstimate,
) -> Result<MeritReport> {
    let w = witness(&stabilizers, 2)?;
    Ok(MeritReport {
        tb: dof_merits(rho_tb, &errors.tb)?,
        fb: dof_merits(rho_fb, &errors.fb)?,
        stabilizers,
        stabilizer_stds: errors.stabilizers,
        witness: w,
        witness_std: errors.witness,
        violation_stds_witness: violation_stds(w, 0.0, errors.witness, ViolationSide::Below).ok(),
        hyperentangled: is_hyperentangled(w),
    })
}

/// Dephasing model closed forms for a marginal: `(fidelity, ⟨σx σx⟩)`.
pub fn dephasing_closed_form(mu: f64, p: f64) -> (f64, f64) {
    ((1.0 - p) * (1.0 + mu) / 2.0 + p / 4.0, (1.0 - p) * mu)
}
