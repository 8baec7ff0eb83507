//! Two-qubit state reconstruction from the 36-outcome tomography plan.
//!
//! The count model for outcome `k` is
//! `m_k = N · t_k · w_k · (Tr[ρ P_k] + 1/(2·CAR))`, with `N` the pair rate,
//! `t_k` the integration time and `w_k` the post-selection weight. The
//! accidental term is fixed by the known CAR.
//!
//! [`mle_reconstruct`] maximizes the Poisson log-likelihood over
//! `ρ = T†T / Tr[T†T]` with `T` upper triangular (16 real parameters). The
//! rate is profiled out: for fixed ρ the optimal `N` is `Σn / Σ(t w p)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzers::{tomography_plan, ProjectorSetting};
use crate::counts::{accidental_fraction, poisson_draw, CountRecord, RunSeed};
use crate::hilbert::{self, CMatrix, DensityMatrix, HilbertError, Pauli};
use crate::metrics::{self, DofPoint, MetricsError};
use crate::state::Dof;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomoError {
    #[error("tomography plan for {dof} is incomplete; missing {missing:?}")]
    IncompletePlan { dof: Dof, missing: Vec<String> },
    #[error("setting {0} appears more than once")]
    DuplicateSetting(String),
    #[error("setting {0} is not part of the tomography plan")]
    UnexpectedSetting(String),
    #[error("setting {label} belongs to {found}, expected {expected}")]
    WrongDof {
        label: String,
        expected: Dof,
        found: Dof,
    },
    #[error("counts must be finite and non-negative (setting {0})")]
    InvalidCounts(String),
    #[error("all counts are zero")]
    AllZeroCounts,
    #[error("design matrix has rank {0} < 16")]
    RankDeficient(usize),
    #[error("tolerance must be positive (got {0})")]
    InvalidTolerance(f64),
    #[error("at least 100 resamples are required (got {0})")]
    TooFewResamples(usize),
    #[error("stabilizer group {0} has no usable counts")]
    EmptyStabilizer(usize),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, TomoError>;

/// Counts of one projector; `counts` may be non-integral for noiseless data.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub setting: ProjectorSetting,
    pub counts: f64,
    pub integration_time_s: f64,
}

impl Observation {
    pub fn from_record(setting: ProjectorSetting, record: &CountRecord) -> Self {
        Observation {
            setting,
            counts: record.coincidences,
            integration_time_s: record.integration_time_s,
        }
    }

    fn exposure(&self) -> f64 {
        self.integration_time_s * self.setting.weight
    }
}

/// Complete 36-setting data set for one degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyInput {
    dof: Dof,
    /// Sorted by label.
    observations: Vec<Observation>,
    car: f64,
}

impl TomographyInput {
    /// `car = f64::INFINITY` when no accidentals are expected.
    pub fn new(dof: Dof, observations: Vec<Observation>, car: f64) -> Result<Self> {
        let mut by_label: BTreeMap<String, Observation> = BTreeMap::new();
        for o in observations {
            if o.setting.dof != dof {
                return Err(TomoError::WrongDof {
                    label: o.setting.label(),
                    expected: dof,
                    found: o.setting.dof,
                });
            }
            if !(o.counts >= 0.0 && o.counts.is_finite() && o.integration_time_s > 0.0) {
                return Err(TomoError::InvalidCounts(o.setting.label()));
            }
            let label = o.setting.label();
            if by_label.insert(label.clone(), o).is_some() {
                return Err(TomoError::DuplicateSetting(label));
            }
        }
        let plan: Vec<String> = tomography_plan(dof).iter().map(|p| p.label()).collect();
        if let Some(extra) = by_label.keys().find(|l| !plan.contains(l)) {
            return Err(TomoError::UnexpectedSetting(extra.clone()));
        }
        let missing: Vec<String> = plan
            .into_iter()
            .filter(|l| !by_label.contains_key(l))
            .collect();
        if !missing.is_empty() {
            return Err(TomoError::IncompletePlan { dof, missing });
        }
        Ok(TomographyInput {
            dof,
            observations: by_label.into_values().collect(),
            car,
        })
    }

    pub fn from_records(
        dof: Dof,
        entries: Vec<(ProjectorSetting, CountRecord)>,
        car: f64,
    ) -> Result<Self> {
        let obs = entries
            .into_iter()
            .map(|(s, r)| Observation::from_record(s, &r))
            .collect();
        TomographyInput::new(dof, obs, car)
    }

    pub fn dof(&self) -> Dof {
        self.dof
    }

    pub fn car(&self) -> f64 {
        self.car
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn total_counts(&self) -> f64 {
        self.observations.iter().map(|o| o.counts).sum()
    }

    fn with_counts(&self, counts: impl Iterator<Item = f64>) -> TomographyInput {
        let observations = self
            .observations
            .iter()
            .zip(counts)
            .map(|(o, n)| Observation {
                counts: n,
                ..o.clone()
            })
            .collect();
        TomographyInput {
            dof: self.dof,
            observations,
            car: self.car,
        }
    }
}

/// Two-qubit Pauli products `σ_i⊗σ_j / 4`, `(I,I)` first.
fn pauli_basis() -> Vec<CMatrix> {
    let ps = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut out = Vec::with_capacity(16);
    for a in ps {
        for b in ps {
            out.push(a.matrix().kronecker(&b.matrix()).scale(0.25));
        }
    }
    out
}

/// Unconstrained least-squares estimate (Hermitian, unit trace, possibly not PSD).
pub fn linear_inversion(input: &TomographyInput) -> Result<CMatrix> {
    let basis = pauli_basis();
    let a = accidental_fraction(input.car);
    let k = input.observations.len();
    let mut design = DMatrix::<f64>::zeros(k, 16);
    let mut y = DVector::<f64>::zeros(k);
    for (row, o) in input.observations.iter().enumerate() {
        for (col, b) in basis.iter().enumerate() {
            design[(row, col)] = hilbert::trace_product(b, o.setting.projector.matrix()).re;
        }
        // floor is proportional to the rate, i.e. to the identity coefficient
        design[(row, 0)] += a;
        y[row] = o.counts / o.exposure();
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < 16 {
        return Err(TomoError::RankDeficient(rank));
    }
    let x = svd.solve(&y, 1e-12 * smax).expect("U and V computed");
    if !(x[0] > 0.0) {
        return Err(TomoError::AllZeroCounts);
    }
    let mut rho = CMatrix::zeros(4, 4);
    for (c, b) in x.iter().zip(&basis) {
        rho += b.scale(c / x[0]);
    }
    Ok((&rho + rho.adjoint()).scale(0.5))
}

/// Nearest density matrix by clipping negative eigenvalues.
pub fn project_to_physical(m: &CMatrix, layout: crate::hilbert::Layout) -> Result<DensityMatrix> {
    let eig = hilbert::eig_hermitian_matrix(m)?;
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Ok(DensityMatrix::maximally_mixed(layout));
    }
    let e = hilbert::Eigen {
        values: clipped.iter().map(|v| v / total).collect(),
        vectors: eig.vectors,
    };
    Ok(DensityMatrix::from_psd_unchecked(e.reconstruct(), layout))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Stop once the relative log-likelihood gain of an iteration falls below this.
    pub tol: f64,
    /// Also required: largest parameter gradient below `gradient_tol` times the total count.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Start from the projected linear-inversion estimate instead of I/4.
    pub warm_start: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tol: 1e-10,
            gradient_tol: 1e-9,
            max_iterations: 100_000,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    #[serde(skip)]
    pub rho_hat: Option<DensityMatrix>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted pair rate `N`, Hz.
    pub normalization_rate: f64,
    /// Log-likelihood after every accepted iteration, starting point first.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl ReconstructionResult {
    pub fn rho(&self) -> &DensityMatrix {
        self.rho_hat.as_ref().expect("set by mle_reconstruct")
    }
}

/// Poisson likelihood of the reconstruction problem, with the rate profiled out.
struct Likelihood {
    projectors: Vec<CMatrix>,
    counts: Vec<f64>,
    exposure: Vec<f64>,
    floor: f64,
    total: f64,
}

const N_PARAMS: usize = 16;

impl Likelihood {
    fn new(input: &TomographyInput) -> Self {
        Likelihood {
            projectors: input
                .observations
                .iter()
                .map(|o| o.setting.projector.matrix().clone())
                .collect(),
            counts: input.observations.iter().map(|o| o.counts).collect(),
            exposure: input.observations.iter().map(|o| o.exposure()).collect(),
            floor: accidental_fraction(input.car),
            total: input.total_counts(),
        }
    }

    /// Model weights `c_k = t_k w_k (p_k + floor)` for a normalized ρ.
    fn model(&self, rho: &CMatrix) -> Vec<f64> {
        self.projectors
            .iter()
            .zip(&self.exposure)
            .map(|(p, e)| e * (hilbert::trace_product(rho, p).re.max(0.0) + self.floor))
            .collect()
    }

    /// Profiled log-likelihood `Σ n ln c − n_tot ln Σc`; `-inf` if a counted outcome has zero weight.
    fn profile(&self, c: &[f64]) -> f64 {
        let sum_c: f64 = c.iter().sum();
        let mut acc = 0.0;
        for (n, ck) in self.counts.iter().zip(c) {
            if *n > 0.0 {
                if *ck <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += n * ck.ln();
            }
        }
        acc - self.total * sum_c.ln()
    }

    /// Full Poisson log-likelihood at the optimal rate, and that rate per unit exposure.
    fn full(&self, c: &[f64]) -> (f64, f64) {
        let sum_c: f64 = c.iter().sum();
        let rate = self.total / sum_c;
        let mut ll = 0.0;
        for (n, ck) in self.counts.iter().zip(c) {
            let m = rate * ck;
            if *n > 0.0 {
                ll += n * m.ln();
            }
            ll -= m;
        }
        (ll, rate)
    }

    /// Gradient of the profile with respect to ρ (Hermitian).
    fn rho_gradient(&self, c: &[f64]) -> CMatrix {
        let sum_c: f64 = c.iter().sum();
        let mut g = CMatrix::zeros(4, 4);
        for (((p, n), e), ck) in self
            .projectors
            .iter()
            .zip(&self.counts)
            .zip(&self.exposure)
            .zip(c)
        {
            let mut coef = -self.total / sum_c;
            if *n > 0.0 {
                coef += n / ck;
            }
            g += p.scale(coef * e);
        }
        g
    }

    /// Expected counts `a_k = t_k w_k (Tr[σP_k] + floor Tr σ)` for an unnormalized `σ = Nρ`.
    fn cone_model(&self, sigma: &CMatrix) -> Vec<f64> {
        let tr = hilbert::trace(sigma).re;
        self.projectors
            .iter()
            .zip(&self.exposure)
            .map(|(p, e)| e * (hilbert::trace_product(sigma, p).re + self.floor * tr))
            .collect()
    }

    /// Poisson log-likelihood on the PSD cone, concave in `σ`, minus its
    /// saturated value so that it stays well resolved near the optimum.
    fn cone_deviance(&self, a: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (n, ak) in self.counts.iter().zip(a) {
            if *n > 0.0 {
                if *ak <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += n * (ak / n).ln();
            }
            ll -= ak - n;
        }
        ll
    }

    /// `Σ n ln n − n`, the saturated log-likelihood.
    fn saturated(&self) -> f64 {
        self.counts
            .iter()
            .map(|&n| if n > 0.0 { n * n.ln() - n } else { 0.0 })
            .sum()
    }

    fn cone_gradient(&self, a: &[f64]) -> CMatrix {
        let mut g = CMatrix::zeros(4, 4);
        let mut diag = 0.0;
        for (((p, n), e), ak) in self
            .projectors
            .iter()
            .zip(&self.counts)
            .zip(&self.exposure)
            .zip(a)
        {
            let mut coef = -1.0;
            if *n > 0.0 {
                coef += n / ak;
            }
            coef *= e;
            g += p.scale(coef);
            diag += coef * self.floor;
        }
        for d in 0..4 {
            g[(d, d)] += diag;
        }
        g
    }

    /// Spectral projected-gradient ascent on `σ = Nρ`. The Cholesky
    /// parametrization flattens to fourth order at rank-deficient optima;
    /// here eigenvalue clipping reaches the boundary exactly.
    fn polish(&self, mut sigma: CMatrix, trace: &mut Vec<f64>, max_iterations: usize) -> Polished {
        let saturated = self.saturated();
        let a = self.cone_model(&sigma);
        let mut f = self.cone_deviance(&a);
        let mut g = self.cone_gradient(&a);
        let mut step = 1.0 / g.norm().max(1e-300);
        let mut quiet = 0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iterations && f.is_finite() {
            iterations += 1;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = psd_projection(&(&sigma + g.scale(step)));
                let d = &trial - &sigma;
                let ascent = hilbert::trace_product(&g, &d).re;
                let at = self.cone_model(&trial);
                let ft = self.cone_deviance(&at);
                if ft.is_finite() && ft >= f + 1e-4 * ascent {
                    accepted = Some((trial, d, at, ft));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, d, at, ft)) = accepted else {
                // no ascent left that double precision can resolve
                converged = true;
                break;
            };
            let g_new = self.cone_gradient(&at);
            // Barzilai-Borwein step for the next iteration
            let curvature = -hilbert::trace_product(&d, &(&g_new - &g)).re;
            let dd = d.norm_squared();
            step = if curvature > 0.0 {
                dd / curvature
            } else {
                2.0 * step
            };
            sigma = trial;
            f = ft;
            g = g_new;
            trace.push(saturated + f);
            if dd.sqrt() <= 1e-13 * hilbert::trace(&sigma).re {
                quiet += 1;
                if quiet >= 3 {
                    converged = true;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        Polished {
            sigma,
            iterations,
            converged,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let t = unpack(x);
        let rho = normalized(&t);
        self.profile(&self.model(&rho))
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, [f64; N_PARAMS]) {
        let t = unpack(x);
        let raw = t.adjoint() * &t;
        let s = hilbert::trace(&raw).re;
        let rho = raw.unscale(s);
        let c = self.model(&rho);
        let f = self.profile(&c);
        let g = self.rho_gradient(&c);
        let gr = hilbert::trace_product(&g, &rho).re;
        let shifted = g - CMatrix::identity(4, 4).scale(gr);
        let m = shifted * t.adjoint();
        let mut grad = [0.0; N_PARAMS];
        // dL = (2/s) Re Tr[M dT] and Re(M_ba dT_ab) splits into real and imaginary parts of T_ab
        let mut idx = 0;
        for a in 0..4 {
            grad[idx] = 2.0 / s * m[(a, a)].re;
            idx += 1;
        }
        for a in 0..4 {
            for b in (a + 1)..4 {
                grad[idx] = 2.0 / s * m[(b, a)].re;
                grad[idx + 1] = -2.0 / s * m[(b, a)].im;
                idx += 2;
            }
        }
        (f, grad)
    }
}

fn unpack(x: &[f64]) -> CMatrix {
    let mut t = CMatrix::zeros(4, 4);
    let mut idx = 0;
    for a in 0..4 {
        t[(a, a)] = Complex64::new(x[idx], 0.0);
        idx += 1;
    }
    for a in 0..4 {
        for b in (a + 1)..4 {
            t[(a, b)] = Complex64::new(x[idx], x[idx + 1]);
            idx += 2;
        }
    }
    t
}

fn pack(t: &CMatrix) -> [f64; N_PARAMS] {
    let mut x = [0.0; N_PARAMS];
    let mut idx = 0;
    for a in 0..4 {
        x[idx] = t[(a, a)].re;
        idx += 1;
    }
    for a in 0..4 {
        for b in (a + 1)..4 {
            x[idx] = t[(a, b)].re;
            x[idx + 1] = t[(a, b)].im;
            idx += 2;
        }
    }
    x
}

fn normalized(t: &CMatrix) -> CMatrix {
    let raw = t.adjoint() * t;
    let s = hilbert::trace(&raw).re;
    raw.unscale(s)
}

/// Upper-triangular `T` with real diagonal and `T†T = ρ`.
fn factor(rho: &DensityMatrix) -> Result<CMatrix> {
    let eig = hilbert::eig_hermitian_matrix(rho.matrix())?;
    let sqrt = DVector::from_iterator(
        4,
        eig.values
            .iter()
            .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)),
    );
    let b = CMatrix::from_diagonal(&sqrt) * eig.vectors.adjoint();
    let mut r = b.qr().r();
    for a in 0..4 {
        let d = r[(a, a)];
        if d.norm() > 0.0 {
            let phase = d.conj() / d.norm();
            for c in 0..4 {
                r[(a, c)] *= phase;
            }
        }
    }
    Ok(r)
}

struct Polished {
    sigma: CMatrix,
    iterations: usize,
    converged: bool,
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped.
fn psd_projection(m: &CMatrix) -> CMatrix {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let clipped = CMatrix::from_diagonal(&DVector::from_iterator(
        4,
        eig.eigenvalues
            .iter()
            .map(|v| Complex64::new(v.max(0.0), 0.0)),
    ));
    &eig.eigenvectors * clipped * eig.eigenvectors.adjoint()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum-likelihood reconstruction by limited-memory BFGS ascent with a
/// monotone backtracking line search.
pub fn mle_reconstruct(input: &TomographyInput, opts: &MleOptions) -> Result<ReconstructionResult> {
    if !(opts.tol > 0.0) {
        return Err(TomoError::InvalidTolerance(opts.tol));
    }
    if !(opts.gradient_tol > 0.0) {
        return Err(TomoError::InvalidTolerance(opts.gradient_tol));
    }
    if !(input.total_counts() > 0.0) {
        return Err(TomoError::AllZeroCounts);
    }
    let lik = Likelihood::new(input);
    let layout = input.dof.layout();

    let mut x: [f64; N_PARAMS] = if opts.warm_start {
        let li = linear_inversion(input)?;
        let proj = project_to_physical(&li, layout.clone())?;
        let mixed = proj.mix(&DensityMatrix::maximally_mixed(layout.clone()), 1e-3)?;
        pack(&factor(&mixed)?)
    } else {
        pack(&CMatrix::identity(4, 4).scale(0.5))
    };
    if opts.warm_start && !lik.value(&x).is_finite() {
        x = pack(&CMatrix::identity(4, 4).scale(0.5));
    }

    const MEMORY: usize = 12;
    const STALL_LIMIT: usize = 25;
    let (mut f, mut grad) = lik.value_and_gradient(&x);
    let mut full = lik.full(&lik.model(&normalized(&unpack(&x)))).0;
    let mut trace = vec![full];
    let mut s_hist: Vec<[f64; N_PARAMS]> = Vec::with_capacity(MEMORY);
    let mut y_hist: Vec<[f64; N_PARAMS]> = Vec::with_capacity(MEMORY);
    let mut converged = false;
    let mut iterations = 0;
    let mut quiet = 0;
    let mut stalled = 0;
    let grad_limit = opts.gradient_tol * input.total_counts();

    while iterations < opts.max_iterations {
        iterations += 1;
        // ascent direction from the two-loop recursion on -f
        let mut q = grad.map(|g| -g);
        let mut alpha = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho_i * dot(&s_hist[i], &q);
            for j in 0..N_PARAMS {
                q[j] -= alpha[i] * y_hist[i][j];
            }
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => 1.0 / dot(&grad, &grad).sqrt().max(1e-300),
        };
        q = q.map(|v| v * gamma);
        for i in 0..s_hist.len() {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho_i * dot(&y_hist[i], &q);
            for j in 0..N_PARAMS {
                q[j] += s_hist[i][j] * (alpha[i] - beta);
            }
        }
        let mut dir = q.map(|v| -v);
        let mut slope = dot(&dir, &grad);
        if !(slope > 0.0) {
            s_hist.clear();
            y_hist.clear();
            let scale = 1.0 / dot(&grad, &grad).sqrt().max(1e-300);
            dir = grad.map(|g| g * scale);
            slope = dot(&dir, &grad);
            if !(slope > 0.0) {
                converged = true;
                break;
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x;
            for j in 0..N_PARAMS {
                trial[j] += step * dir[j];
            }
            let ft = lik.value(&trial);
            if ft.is_finite() && ft >= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, _)) = accepted else {
            // no further ascent is resolvable in double precision
            converged = s_hist.is_empty();
            if converged {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let (f_new, grad_new) = lik.value_and_gradient(&x_new);
        let mut s_vec = [0.0; N_PARAMS];
        let mut y_vec = [0.0; N_PARAMS];
        for j in 0..N_PARAMS {
            s_vec[j] = x_new[j] - x[j];
            // gradient of -f
            y_vec[j] = grad[j] - grad_new[j];
        }
        if dot(&s_vec, &y_vec) > 1e-14 * dot(&s_vec, &s_vec).sqrt() * dot(&y_vec, &y_vec).sqrt() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s_vec);
            y_hist.push(y_vec);
        }
        let gain = f_new - f;
        x = x_new;
        f = f_new;
        grad = grad_new;
        let full_new = lik.full(&lik.model(&normalized(&unpack(&x)))).0;
        trace.push(full_new);
        full = full_new;
        let grad_max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let small_gain = gain <= opts.tol * full.abs().max(1.0);
        quiet = if small_gain && grad_max <= grad_limit {
            quiet + 1
        } else {
            0
        };
        // a long run of negligible gains means a flat boundary approach; the polish finishes it
        stalled = if small_gain { stalled + 1 } else { 0 };
        if quiet >= 2 || stalled >= STALL_LIMIT {
            converged = true;
            break;
        }
    }

    let start = normalized(&unpack(&x));
    let rate = lik.full(&lik.model(&start)).1;
    let polished = lik.polish(start.scale(rate), &mut trace, opts.max_iterations);
    iterations += polished.iterations;
    converged &= polished.converged;
    let rho = polished.sigma.unscale(hilbert::trace(&polished.sigma).re);
    let (log_likelihood, rate) = lik.full(&lik.model(&rho));
    Ok(ReconstructionResult {
        rho_hat: Some(DensityMatrix::from_psd_unchecked(rho, layout)),
        log_likelihood,
        iterations,
        converged,
        normalization_rate: rate,
        trace,
    })
}

/// How counts are perturbed between Monte-Carlo resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resampling {
    /// Each count is redrawn from a Poisson law with the observed count as mean.
    Poisson,
    /// Counts are reused unchanged (zero-variance reference).
    Fixed,
}

/// Monte-Carlo standard deviations of one degree of freedom's metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofErrors {
    pub fidelity: f64,
    pub purity: f64,
    pub s_parameter: f64,
    /// Resample means.
    pub mean: DofPoint,
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    #[serde(rename = "TB")]
    pub tb: DofErrors,
    #[serde(rename = "FB")]
    pub fb: DofErrors,
    pub stabilizers: [f64; 4],
    pub witness: f64,
    pub resamples: usize,
}

impl ErrorEstimate {
    pub fn zero() -> Self {
        let dof = DofErrors {
            fidelity: 0.0,
            purity: 0.0,
            s_parameter: 0.0,
            mean: DofPoint {
                fidelity: 0.0,
                purity: 0.0,
                s_parameter: 0.0,
            },
            resamples: 0,
        };
        ErrorEstimate {
            tb: dof,
            fb: dof,
            stabilizers: [0.0; 4],
            witness: 0.0,
            resamples: 0,
        }
    }
}

pub const MIN_RESAMPLES: usize = 100;

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Resampled standard deviation of fidelity, purity and CHSH value.
/// Resample `r` draws from `seed.child(r)`.
pub fn mc_error(
    input: &TomographyInput,
    n_resamples: usize,
    seed: RunSeed,
    resampling: Resampling,
    opts: &MleOptions,
) -> Result<DofErrors> {
    if n_resamples < MIN_RESAMPLES {
        return Err(TomoError::TooFewResamples(n_resamples));
    }
    let points: Vec<Result<DofPoint>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let resampled = match resampling {
                Resampling::Fixed => input.clone(),
                Resampling::Poisson => {
                    let mut rng = seed.child(r as u64).rng();
                    let counts: Vec<f64> = input
                        .observations
                        .iter()
                        .map(|o| poisson_draw(&mut rng, o.counts) as f64)
                        .collect();
                    input.with_counts(counts.into_iter())
                }
            };
            let rec = mle_reconstruct(&resampled, opts)?;
            Ok(metrics::dof_point(rec.rho())?)
        })
        .collect();
    let points: Vec<DofPoint> = points.into_iter().collect::<Result<_>>()?;
    let (mf, sf) = mean_std(&points.iter().map(|p| p.fidelity).collect::<Vec<_>>());
    let (mp, sp) = mean_std(&points.iter().map(|p| p.purity).collect::<Vec<_>>());
    let (ms, ss) = mean_std(&points.iter().map(|p| p.s_parameter).collect::<Vec<_>>());
    Ok(DofErrors {
        fidelity: sf,
        purity: sp,
        s_parameter: ss,
        mean: DofPoint {
            fidelity: mf,
            purity: mp,
            s_parameter: ms,
        },
        resamples: n_resamples,
    })
}

/// Parity estimate `⟨σ⊗σ⟩` from the four outcomes of one stabilizer measurement,
/// corrected for the CAR floor.
pub fn estimate_stabilizer(observations: &[Observation], car: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut signed = 0.0;
    for o in observations {
        let parity = o.setting.parity()?;
        let r = o.counts / o.exposure();
        total += r;
        signed += parity * r;
    }
    if !(total > 0.0) {
        return None;
    }
    // Σr = N(1 + 4·floor), Σ±r = N⟨S⟩
    Some(signed / total * (1.0 + 4.0 * accidental_fraction(car)))
}

/// Point values, standard deviations and resample means of the four stabilizers and the witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizerEstimate {
    pub values: [f64; 4],
    pub stds: [f64; 4],
    pub witness: f64,
    pub witness_std: f64,
    pub resamples: usize,
}

pub fn stabilizer_mc_error(
    groups: &[Vec<Observation>; 4],
    car: f64,
    n_resamples: usize,
    seed: RunSeed,
    resampling: Resampling,
) -> Result<StabilizerEstimate> {
    if n_resamples < MIN_RESAMPLES {
        return Err(TomoError::TooFewResamples(n_resamples));
    }
    let mut values = [0.0; 4];
    for (k, g) in groups.iter().enumerate() {
        values[k] = estimate_stabilizer(g, car).ok_or(TomoError::EmptyStabilizer(k))?;
    }
    let witness = metrics::witness(&values, 2)?;
    let samples: Vec<Result<[f64; 4]>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.child(r as u64).rng();
            let mut out = [0.0; 4];
            for (k, g) in groups.iter().enumerate() {
                let redrawn: Vec<Observation> = g
                    .iter()
                    .map(|o| Observation {
                        counts: match resampling {
                            Resampling::Poisson => poisson_draw(&mut rng, o.counts) as f64,
                            Resampling::Fixed => o.counts,
                        },
                        ..o.clone()
                    })
                    .collect();
                out[k] = estimate_stabilizer(&redrawn, car).ok_or(TomoError::EmptyStabilizer(k))?;
            }
            Ok(out)
        })
        .collect();
    let samples: Vec<[f64; 4]> = samples.into_iter().collect::<Result<_>>()?;
    let mut stds = [0.0; 4];
    for (k, s) in stds.iter_mut().enumerate() {
        *s = mean_std(&samples.iter().map(|v| v[k]).collect::<Vec<_>>()).1;
    }
    let ws: Vec<f64> = samples
        .iter()
        .map(|v| metrics::witness(v, 2))
        .collect::<std::result::Result<_, _>>()?;
    Ok(StabilizerEstimate {
        values,
        stds,
        witness,
        witness_std: mean_std(&ws).1,
        resamples: n_resamples,
    })
}
