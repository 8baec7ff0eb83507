//! Time-bin and frequency-bin analyzers.
//!
//! An analyzer configuration is turned into a set of [`ProjectorSetting`]s:
//! a rank-1 projector on the two qubits of one degree of freedom together
//! with the probability factor with which a detected coincidence realizes it.
//!
//! Time-bin analysis uses one unbalanced interferometer per photon with delay
//! τ and a phase θ on the long arm, observed at one output port. A photon from
//! the early pulse through the short arm arrives at 0, the late pulse through
//! the long arm at 2τ, and the two indistinguishable paths meet at τ. Per
//! photon the three arrival bins realize `¼|e⟩⟨e|`, `½|φ_θ⟩⟨φ_θ|` and
//! `¼|l⟩⟨l|` with `|φ_θ⟩ = (|e⟩ + e^{iθ}|l⟩)/√2`.
//!
//! Frequency-bin analysis mixes the two bins with a phase modulator driven at
//! the bin spacing, followed by a filter on one bin. With modulation index δ
//! the filtered amplitude is `J₀(δ)c₁ + J₁(δ)e^{iφ}c₀`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{CMatrix, CVector, HilbertError, Layout, Observable, Pauli};
use crate::state::Dof;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzerError {
    #[error("invalid basis '{0}'")]
    InvalidBasis(String),
    #[error("a Z-basis setting cannot carry an analyzer phase (got {0})")]
    PhaseOnZ(f64),
    #[error("RF is off on the {0} photon but a superposition basis was requested")]
    RfOffSuperposition(&'static str),
    #[error("RF is on on the {0} photon but the Z basis was requested")]
    RfOnComputational(&'static str),
    #[error("modulation index must be non-negative and finite (got {0})")]
    ModulationIndex(f64),
    #[error("filter transmission must lie in (0, 1] (got {0})")]
    FilterTransmission(f64),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, AnalyzerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub fn pauli(self) -> Pauli {
        match self {
            Basis::Z => Pauli::Z,
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
        }
    }
}

impl FromStr for Basis {
    type Err = AnalyzerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            "Y" | "y" => Ok(Basis::Y),
            other => Err(AnalyzerError::InvalidBasis(other.to_string())),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::Z => "Z",
            Basis::X => "X",
            Basis::Y => "Y",
        };
        f.write_str(s)
    }
}

/// One of the six single-qubit Pauli eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Eigenstate {
    pub basis: Basis,
    pub plus: bool,
}

impl Eigenstate {
    /// Tomography order: |0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩.
    pub const ALL: [Eigenstate; 6] = [
        Eigenstate::new(Basis::Z, true),
        Eigenstate::new(Basis::Z, false),
        Eigenstate::new(Basis::X, true),
        Eigenstate::new(Basis::X, false),
        Eigenstate::new(Basis::Y, true),
        Eigenstate::new(Basis::Y, false),
    ];

    pub const fn new(basis: Basis, plus: bool) -> Self {
        Eigenstate { basis, plus }
    }

    pub fn sign(self) -> f64 {
        if self.plus {
            1.0
        } else {
            -1.0
        }
    }

    /// Relative phase of `(|0⟩ + e^{iφ}|1⟩)/√2`: X → {0, π}, Y → {π/2, 3π/2}.
    pub fn superposition_phase(self) -> Option<f64> {
        match (self.basis, self.plus) {
            (Basis::Z, _) => None,
            (Basis::X, true) => Some(0.0),
            (Basis::X, false) => Some(PI),
            (Basis::Y, true) => Some(FRAC_PI_2),
            (Basis::Y, false) => Some(3.0 * FRAC_PI_2),
        }
    }

    pub fn ket(self) -> CVector {
        match self.superposition_phase() {
            None => computational(if self.plus { 0 } else { 1 }),
            Some(phi) => superposition(phi),
        }
    }

    /// Outcome code used in count files: `0`/`1` for Z, `+`/`-` otherwise.
    pub fn code(self) -> &'static str {
        match (self.basis, self.plus) {
            (Basis::Z, true) => "0",
            (Basis::Z, false) => "1",
            (_, true) => "+",
            (_, false) => "-",
        }
    }
}

impl fmt::Display for Eigenstate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.basis, if self.plus { "+" } else { "-" })
    }
}

fn computational(k: usize) -> CVector {
    let mut v = CVector::zeros(2);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

/// `(|0⟩ + e^{iφ}|1⟩)/√2`.
pub fn superposition(phi: f64) -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_vec(vec![Complex64::new(h, 0.0), Complex64::from_polar(h, phi)])
}

fn canonical_phase_label(phase: f64) -> String {
    for e in Eigenstate::ALL {
        if let Some(p) = e.superposition_phase() {
            if (p - phase).abs() < 1e-12 {
                return e.to_string();
            }
        }
    }
    format!("P{phase:.6}")
}

fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Arrival time of a photon relative to the pump trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArrivalBin {
    /// Δt = 0
    Early,
    /// Δt = τ
    Middle,
    /// Δt = 2τ
    Late,
}

impl ArrivalBin {
    pub const ALL: [ArrivalBin; 3] = [ArrivalBin::Early, ArrivalBin::Middle, ArrivalBin::Late];

    /// Delay in units of τ.
    pub fn delay_units(self) -> u8 {
        match self {
            ArrivalBin::Early => 0,
            ArrivalBin::Middle => 1,
            ArrivalBin::Late => 2,
        }
    }

    pub fn index(self) -> usize {
        self.delay_units() as usize
    }
}

/// Time-bin analysis of one photon: basis plus waveshaper phase on the long arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbPhoton {
    pub basis: Basis,
    pub phase: f64,
}

impl TbPhoton {
    pub fn new(basis: Basis, phase: f64) -> Result<Self> {
        if basis == Basis::Z && phase != 0.0 {
            return Err(AnalyzerError::PhaseOnZ(phase));
        }
        Ok(TbPhoton {
            basis,
            phase: if basis == Basis::Z {
                0.0
            } else {
                wrap_phase(phase)
            },
        })
    }

    pub fn from_eigenstate(e: Eigenstate) -> Self {
        TbPhoton {
            basis: e.basis,
            phase: e.superposition_phase().unwrap_or(0.0),
        }
    }

    fn label(&self) -> String {
        match self.basis {
            Basis::Z => "Z".to_string(),
            _ => canonical_phase_label(self.phase),
        }
    }

    /// Per-photon detection operators for the three arrival bins, with their weights.
    pub fn arrival_elements(&self) -> [(ArrivalBin, CVector, f64); 3] {
        [
            (ArrivalBin::Early, computational(0), 0.25),
            (ArrivalBin::Middle, superposition(self.phase), 0.5),
            (ArrivalBin::Late, computational(1), 0.25),
        ]
    }

    /// The bins post-selected for this photon's basis.
    fn selected(&self) -> Vec<PhotonOutcome> {
        match self.basis {
            Basis::Z => vec![
                PhotonOutcome {
                    ket: computational(0),
                    weight: 0.25,
                    arrival: Some(ArrivalBin::Early),
                    eigenstate: Some(Eigenstate::new(Basis::Z, true)),
                },
                PhotonOutcome {
                    ket: computational(1),
                    weight: 0.25,
                    arrival: Some(ArrivalBin::Late),
                    eigenstate: Some(Eigenstate::new(Basis::Z, false)),
                },
            ],
            basis => vec![PhotonOutcome {
                ket: superposition(self.phase),
                weight: 0.5,
                arrival: Some(ArrivalBin::Middle),
                eigenstate: canonical_eigenstate(basis, self.phase),
            }],
        }
    }
}

fn canonical_eigenstate(basis: Basis, phase: f64) -> Option<Eigenstate> {
    [true, false]
        .into_iter()
        .map(|plus| Eigenstate::new(basis, plus))
        .find(|e| matches!(e.superposition_phase(), Some(p) if (p - phase).abs() < 1e-12))
}

struct PhotonOutcome {
    ket: CVector,
    weight: f64,
    arrival: Option<ArrivalBin>,
    eigenstate: Option<Eigenstate>,
}

impl PhotonOutcome {
    fn code(&self) -> &'static str {
        match self.eigenstate {
            Some(e) => e.code(),
            None => "~",
        }
    }
}

/// Time-bin analyzer configuration for a photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbSetting {
    pub signal: TbPhoton,
    pub idler: TbPhoton,
}

impl TbSetting {
    pub fn new(basis_s: Basis, phase_s: f64, basis_i: Basis, phase_i: f64) -> Result<Self> {
        Ok(TbSetting {
            signal: TbPhoton::new(basis_s, phase_s)?,
            idler: TbPhoton::new(basis_i, phase_i)?,
        })
    }

    pub fn from_eigenstates(s: Eigenstate, i: Eigenstate) -> Self {
        TbSetting {
            signal: TbPhoton::from_eigenstate(s),
            idler: TbPhoton::from_eigenstate(i),
        }
    }

    /// Both photons in the interfering bin with arbitrary phases.
    pub fn interferometric(phase_s: f64, phase_i: f64) -> Self {
        TbSetting {
            signal: TbPhoton {
                basis: Basis::X,
                phase: wrap_phase(phase_s),
            },
            idler: TbPhoton {
                basis: Basis::X,
                phase: wrap_phase(phase_i),
            },
        }
    }

    pub fn label(&self) -> String {
        format!("TB:{}{}", self.signal.label(), self.idler.label())
    }
}

/// Frequency-bin analysis of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbPhoton {
    pub basis: Basis,
    pub rf_on: bool,
    pub rf_phase: f64,
    /// Z basis only: which bin the filter passes.
    pub selected_bin: u8,
}

impl FbPhoton {
    pub fn new(basis: Basis, rf_on: bool, rf_phase: f64, selected_bin: u8) -> Result<Self> {
        let p = FbPhoton {
            basis,
            rf_on,
            rf_phase: wrap_phase(rf_phase),
            selected_bin,
        };
        p.check("signal")?;
        Ok(p)
    }

    pub fn from_eigenstate(e: Eigenstate) -> Self {
        match e.superposition_phase() {
            None => FbPhoton {
                basis: Basis::Z,
                rf_on: false,
                rf_phase: 0.0,
                selected_bin: if e.plus { 0 } else { 1 },
            },
            Some(phi) => FbPhoton {
                basis: e.basis,
                rf_on: true,
                rf_phase: phi,
                selected_bin: 1,
            },
        }
    }

    fn check(&self, which: &'static str) -> Result<()> {
        match (self.basis, self.rf_on) {
            (Basis::Z, true) => Err(AnalyzerError::RfOnComputational(which)),
            (Basis::X | Basis::Y, false) => Err(AnalyzerError::RfOffSuperposition(which)),
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        match self.basis {
            Basis::Z => "Z".to_string(),
            _ => canonical_phase_label(self.rf_phase),
        }
    }

    fn selected(&self, modulation_index: f64, opts: &AnalyzerOptions) -> Vec<PhotonOutcome> {
        match self.basis {
            // both bins are filtered in turn; each row of the count file is one filter pair
            Basis::Z => (0..2)
                .map(|k| PhotonOutcome {
                    ket: computational(k),
                    weight: opts.filter_transmission,
                    arrival: None,
                    eigenstate: Some(Eigenstate::new(Basis::Z, k == 0)),
                })
                .collect(),
            basis => {
                let (ket, weight) = if opts.realistic_efficiency {
                    let j0 = bessel_j(0, modulation_index);
                    let j1 = bessel_j(1, modulation_index);
                    // filtered amplitude J0 c1 + J1 e^{iφ} c0 = <v|ψ>
                    let v = DVector::from_vec(vec![
                        Complex64::from_polar(j1, -self.rf_phase),
                        Complex64::new(j0, 0.0),
                    ]);
                    let w = j0 * j0 + j1 * j1;
                    // global phase chosen so the equalized case equals (|0> + e^{iφ}|1>)/√2
                    let v = v.scale(1.0 / w.sqrt()) * Complex64::from_polar(1.0, self.rf_phase);
                    (v, w * opts.filter_transmission)
                } else {
                    (superposition(self.rf_phase), opts.filter_transmission)
                };
                vec![PhotonOutcome {
                    ket,
                    weight,
                    arrival: None,
                    eigenstate: canonical_eigenstate(basis, self.rf_phase),
                }]
            }
        }
    }
}

/// Frequency-bin analyzer configuration for a photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbSetting {
    pub signal: FbPhoton,
    pub idler: FbPhoton,
    pub modulation_index: f64,
}

impl FbSetting {
    pub fn new(signal: FbPhoton, idler: FbPhoton, modulation_index: f64) -> Result<Self> {
        let s = FbSetting {
            signal,
            idler,
            modulation_index,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_eigenstates(s: Eigenstate, i: Eigenstate) -> Self {
        FbSetting {
            signal: FbPhoton::from_eigenstate(s),
            idler: FbPhoton::from_eigenstate(i),
            modulation_index: equalization_index(),
        }
    }

    /// Both modulators on with arbitrary RF phases.
    pub fn interferometric(phase_s: f64, phase_i: f64) -> Self {
        let photon = |phase| FbPhoton {
            basis: Basis::X,
            rf_on: true,
            rf_phase: wrap_phase(phase),
            selected_bin: 1,
        };
        FbSetting {
            signal: photon(phase_s),
            idler: photon(phase_i),
            modulation_index: equalization_index(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_index >= 0.0 && self.modulation_index.is_finite()) {
            return Err(AnalyzerError::ModulationIndex(self.modulation_index));
        }
        self.signal.check("signal")?;
        self.idler.check("idler")
    }

    pub fn label(&self) -> String {
        format!("FB:{}{}", self.signal.label(), self.idler.label())
    }
}

/// Global analyzer switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerOptions {
    /// Include the electro-optic sideband-mixing loss in frequency-bin weights.
    pub realistic_efficiency: bool,
    /// Per-photon transmission of the frequency-bin filter.
    pub filter_transmission: f64,
}

impl Default for AnalyzerOptions {
    fn default() -> Self {
        AnalyzerOptions {
            realistic_efficiency: false,
            filter_transmission: 1.0,
        }
    }
}

impl AnalyzerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.filter_transmission > 0.0 && self.filter_transmission <= 1.0) {
            return Err(AnalyzerError::FilterTransmission(self.filter_transmission));
        }
        Ok(())
    }
}

/// One measurement outcome: rank-1 projector on a degree of freedom and its post-selection weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSetting {
    pub setting_label: String,
    pub outcome_label: String,
    pub dof: Dof,
    /// Acts on the two qubits of `dof`.
    pub projector: Observable,
    pub weight: f64,
    pub arrival: Option<[ArrivalBin; 2]>,
    pub eigenstates: Option<[Eigenstate; 2]>,
}

impl ProjectorSetting {
    pub fn label(&self) -> String {
        format!("{}:{}", self.setting_label, self.outcome_label)
    }

    /// The projector extended by the identity on the other degree of freedom.
    pub fn full_projector(&self) -> Observable {
        self.projector
            .embed(&Layout::canonical())
            .expect("DoF layout is part of the canonical layout")
    }

    /// Product of the eigenvalue signs of the two photons, if both are Pauli eigenstates.
    pub fn parity(&self) -> Option<f64> {
        self.eigenstates.map(|[a, b]| a.sign() * b.sign())
    }
}

fn pair_projectors(
    dof: Dof,
    setting_label: String,
    s: Vec<PhotonOutcome>,
    i: Vec<PhotonOutcome>,
) -> Vec<ProjectorSetting> {
    let mut out = Vec::with_capacity(s.len() * i.len());
    for a in &s {
        for b in &i {
            let ket = a.ket.kronecker(&b.ket);
            let projector =
                Observable::from_hermitian_unchecked(&ket * ket.adjoint(), dof.layout());
            let arrival = match (a.arrival, b.arrival) {
                (Some(x), Some(y)) => Some([x, y]),
                _ => None,
            };
            let eigenstates = match (a.eigenstate, b.eigenstate) {
                (Some(x), Some(y)) => Some([x, y]),
                _ => None,
            };
            out.push(ProjectorSetting {
                setting_label: setting_label.clone(),
                outcome_label: format!("{}{}", a.code(), b.code()),
                dof,
                projector,
                weight: a.weight * b.weight,
                arrival,
                eigenstates,
            });
        }
    }
    out
}

/// Projectors realized by a time-bin setting in the bins its bases select.
pub fn tb_projectors(setting: &TbSetting) -> Vec<ProjectorSetting> {
    pair_projectors(
        Dof::TimeBin,
        setting.label(),
        setting.signal.selected(),
        setting.idler.selected(),
    )
}

/// The nine arrival-bin cells of a time-bin setting as `(projector, weight)` on the TB qubits.
pub fn tb_arrival_cells(setting: &TbSetting) -> [[(CMatrix, f64); 3]; 3] {
    let s = setting.signal.arrival_elements();
    let i = setting.idler.arrival_elements();
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let ket = s[a].1.kronecker(&i[b].1);
            (&ket * ket.adjoint(), s[a].2 * i[b].2)
        })
    })
}

pub fn fb_projectors(setting: &FbSetting, opts: &AnalyzerOptions) -> Result<Vec<ProjectorSetting>> {
    setting.validate()?;
    opts.validate()?;
    Ok(pair_projectors(
        Dof::FrequencyBin,
        setting.label(),
        setting.signal.selected(setting.modulation_index, opts),
        setting.idler.selected(setting.modulation_index, opts),
    ))
}

/// An analyzer configuration of either degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalyzerSetting {
    Tb(TbSetting),
    Fb(FbSetting),
}

impl AnalyzerSetting {
    pub fn from_eigenstates(dof: Dof, s: Eigenstate, i: Eigenstate) -> Self {
        match dof {
            Dof::TimeBin => AnalyzerSetting::Tb(TbSetting::from_eigenstates(s, i)),
            Dof::FrequencyBin => AnalyzerSetting::Fb(FbSetting::from_eigenstates(s, i)),
        }
    }

    pub fn interferometric(dof: Dof, phase_s: f64, phase_i: f64) -> Self {
        match dof {
            Dof::TimeBin => AnalyzerSetting::Tb(TbSetting::interferometric(phase_s, phase_i)),
            Dof::FrequencyBin => AnalyzerSetting::Fb(FbSetting::interferometric(phase_s, phase_i)),
        }
    }

    pub fn dof(&self) -> Dof {
        match self {
            AnalyzerSetting::Tb(_) => Dof::TimeBin,
            AnalyzerSetting::Fb(_) => Dof::FrequencyBin,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AnalyzerSetting::Tb(s) => s.label(),
            AnalyzerSetting::Fb(s) => s.label(),
        }
    }

    pub fn projectors(&self, opts: &AnalyzerOptions) -> Result<Vec<ProjectorSetting>> {
        match self {
            AnalyzerSetting::Tb(s) => Ok(tb_projectors(s)),
            AnalyzerSetting::Fb(s) => fb_projectors(s, opts),
        }
    }
}

/// Per-photon analyses used for tomography: Z (both outcomes at once), then X±, Y±.
const PHOTON_ANALYSES: [Eigenstate; 5] = [
    Eigenstate::new(Basis::Z, true),
    Eigenstate::new(Basis::X, true),
    Eigenstate::new(Basis::X, false),
    Eigenstate::new(Basis::Y, true),
    Eigenstate::new(Basis::Y, false),
];

/// The 25 analyzer configurations that realize the 36 tomography projectors.
pub fn tomography_settings(dof: Dof) -> Vec<AnalyzerSetting> {
    let mut out = Vec::with_capacity(25);
    for s in PHOTON_ANALYSES {
        for i in PHOTON_ANALYSES {
            out.push(AnalyzerSetting::from_eigenstates(dof, s, i));
        }
    }
    out
}

/// All 6×6 products of single-photon Pauli eigenstates on one degree of freedom.
pub fn tomography_plan(dof: Dof) -> Vec<ProjectorSetting> {
    tomography_plan_with(dof, &AnalyzerOptions::default()).expect("default options are valid")
}

pub fn tomography_plan_with(dof: Dof, opts: &AnalyzerOptions) -> Result<Vec<ProjectorSetting>> {
    let mut out = Vec::with_capacity(36);
    for setting in tomography_settings(dof) {
        out.extend(setting.projectors(opts)?);
    }
    Ok(out)
}

/// Names of the four stabilizers, in witness order.
pub const STABILIZER_NAMES: [&str; 4] = ["TB_XX", "TB_ZZ", "FB_XX", "FB_ZZ"];

/// `(dof, Pauli)` of each stabilizer `σ⊗σ`.
pub const STABILIZERS: [(Dof, Basis); 4] = [
    (Dof::TimeBin, Basis::X),
    (Dof::TimeBin, Basis::Z),
    (Dof::FrequencyBin, Basis::X),
    (Dof::FrequencyBin, Basis::Z),
];

/// `σ_X⊗σ_X` and `σ_Z⊗σ_Z` on each degree of freedom, on the full register.
pub fn stabilizer_plan() -> Vec<Observable> {
    STABILIZERS
        .iter()
        .map(|&(dof, basis)| {
            let p = basis.pauli();
            Observable::pauli_string(&[p, p], dof.layout())
                .and_then(|o| o.embed(&Layout::canonical()))
                .expect("valid layouts")
        })
        .collect()
}

/// Analyzer configurations that measure stabilizer `k` (see [`STABILIZERS`]).
pub fn stabilizer_settings(k: usize) -> Vec<AnalyzerSetting> {
    let (dof, basis) = STABILIZERS[k];
    match basis {
        Basis::Z => vec![AnalyzerSetting::from_eigenstates(
            dof,
            Eigenstate::new(Basis::Z, true),
            Eigenstate::new(Basis::Z, true),
        )],
        b => {
            let mut v = Vec::with_capacity(4);
            for s in [true, false] {
                for i in [true, false] {
                    v.push(AnalyzerSetting::from_eigenstates(
                        dof,
                        Eigenstate::new(b, s),
                        Eigenstate::new(b, i),
                    ));
                }
            }
            v
        }
    }
}

/// Bessel function of the first kind by its power series; accurate for |x| ≲ 20.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = -half * half;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) || k > 200 {
            break;
        }
    }
    sum
}

/// Modulation index δ where `J₀(δ) = J₁(δ)`: equal-intensity sideband mixing.
pub fn equalization_index() -> f64 {
    let f = |d: f64| bessel_j(0, d) - bessel_j(1, d);
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `|J₀(δ)|²`: fraction of one bin's amplitude left in place by the modulator.
pub fn sideband_mixing_efficiency(modulation_index: f64) -> f64 {
    bessel_j(0, modulation_index).powi(2)
}
