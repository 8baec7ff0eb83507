//! Dense state algebra on small labeled qubit registers.
//!
//! Every subsystem is a qubit. The canonical register for the full two-photon
//! state is `(TB_s, TB_i, FB_s, FB_i)`, so the hyperentangled state factorizes
//! into a time-bin block followed by a frequency-bin block.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("subsystem label {0} appears more than once")]
    LabelCollision(Subsystem),
    #[error("subsystem {0} is not part of the layout")]
    UnknownLabel(Subsystem),
    #[error("empty subsystem selection")]
    EmptySelection,
    #[error("layout mismatch: {left} vs {right}")]
    LayoutMismatch { left: Layout, right: Layout },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("ket is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// One qubit of the two-photon register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subsystem {
    TbSignal,
    TbIdler,
    FbSignal,
    FbIdler,
}

impl Subsystem {
    pub const ALL: [Subsystem; 4] = [
        Subsystem::TbSignal,
        Subsystem::TbIdler,
        Subsystem::FbSignal,
        Subsystem::FbIdler,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Subsystem::TbSignal => "TB_s",
            Subsystem::TbIdler => "TB_i",
            Subsystem::FbSignal => "FB_s",
            Subsystem::FbIdler => "FB_i",
        }
    }

    /// Basis labels for `|0>` and `|1>`: early/late for time bins, ring 1/ring 2 for frequency bins.
    pub fn basis_labels(self) -> [&'static str; 2] {
        match self {
            Subsystem::TbSignal | Subsystem::TbIdler => ["e", "l"],
            Subsystem::FbSignal | Subsystem::FbIdler => ["0", "1"],
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered list of qubit labels; the first label is the most significant index bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout(Vec<Subsystem>);

impl Layout {
    pub fn new(labels: Vec<Subsystem>) -> Result<Self> {
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(HilbertError::LabelCollision(*a));
            }
        }
        Ok(Layout(labels))
    }

    /// `(TB_s, TB_i, FB_s, FB_i)`.
    pub fn canonical() -> Self {
        Layout(Subsystem::ALL.to_vec())
    }

    pub fn time_bin() -> Self {
        Layout(vec![Subsystem::TbSignal, Subsystem::TbIdler])
    }

    pub fn frequency_bin() -> Self {
        Layout(vec![Subsystem::FbSignal, Subsystem::FbIdler])
    }

    pub fn single(label: Subsystem) -> Self {
        Layout(vec![label])
    }

    pub fn labels(&self) -> &[Subsystem] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.0.len()
    }

    pub fn position(&self, label: Subsystem) -> Option<usize> {
        self.0.iter().position(|&l| l == label)
    }

    pub fn concat(&self, other: &Layout) -> Result<Layout> {
        let mut labels = self.0.clone();
        labels.extend_from_slice(&other.0);
        Layout::new(labels)
    }

    /// Human-readable label of a computational basis index, e.g. `|e,l,0,1>`.
    pub fn basis_label(&self, index: usize) -> String {
        let n = self.len();
        let parts: Vec<&str> = self
            .0
            .iter()
            .enumerate()
            .map(|(k, s)| s.basis_labels()[(index >> (n - 1 - k)) & 1])
            .collect();
        parts.concat()
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|s| s.label()).collect();
        write!(f, "({})", names.join(", "))
    }
}

fn check_square(m: &CMatrix, layout: &Layout) -> Result<()> {
    if m.nrows() != layout.dim() || m.ncols() != layout.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: layout.dim(),
            actual: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Tr[a b] without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Pure state vector on a labeled register.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
    layout: Layout,
}

impl Ket {
    pub fn new(amplitudes: CVector, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: layout.dim(),
                actual: amplitudes.len(),
            });
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(HilbertError::NotNormalized(norm2));
        }
        Ok(Ket { amplitudes, layout })
    }

    /// Normalizes the given amplitudes before validating.
    pub fn normalized(amplitudes: CVector, layout: Layout) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(HilbertError::NotNormalized(0.0));
        }
        Ket::new(amplitudes.unscale(norm), layout)
    }

    pub fn basis(index: usize, layout: Layout) -> Result<Self> {
        let mut v = CVector::zeros(layout.dim());
        if index >= v.len() {
            return Err(HilbertError::DimensionMismatch {
                expected: layout.dim(),
                actual: index + 1,
            });
        }
        v[index] = Complex64::new(1.0, 0.0);
        Ket::new(v, layout)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn projector(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            matrix: m,
            layout: self.layout.clone(),
        }
    }

    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    layout: Layout,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, layout: Layout) -> Result<Self> {
        check_square(&matrix, &layout)?;
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(HilbertError::NotHermitian(defect));
        }
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(HilbertError::NotUnitTrace(tr));
        }
        let min = min_eigenvalue(&matrix);
        if min < -PSD_TOL {
            return Err(HilbertError::NotPositive(min));
        }
        Ok(DensityMatrix { matrix, layout })
    }

    /// Symmetrizes and renormalizes a matrix that is PSD up to rounding.
    pub(crate) fn from_psd_unchecked(matrix: CMatrix, layout: Layout) -> Self {
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        let tr = trace(&sym).re;
        DensityMatrix {
            matrix: sym.unscale(tr),
            layout,
        }
    }

    pub fn maximally_mixed(layout: Layout) -> Self {
        let d = layout.dim();
        DensityMatrix {
            matrix: CMatrix::identity(d, d).unscale(d as f64),
            layout,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn relabel(self, layout: Layout) -> Result<Self> {
        check_square(&self.matrix, &layout)?;
        Ok(DensityMatrix {
            matrix: self.matrix,
            layout,
        })
    }

    /// Convex mixture `(1 - p) self + p other`.
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<Self> {
        if self.layout != other.layout {
            return Err(HilbertError::LayoutMismatch {
                left: self.layout.clone(),
                right: other.layout.clone(),
            });
        }
        let m = self.matrix.scale(1.0 - p) + other.matrix.scale(p);
        Ok(DensityMatrix {
            matrix: m,
            layout: self.layout.clone(),
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.matrix)
    }

    /// Trace distance `½‖a − b‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let diff = &self.matrix - &other.matrix;
        Ok(0.5
            * sorted_eigenvalues(&diff)
                .iter()
                .map(|l| l.abs())
                .sum::<f64>())
    }
}

/// Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    layout: Layout,
}

impl Observable {
    pub fn new(matrix: CMatrix, layout: Layout) -> Result<Self> {
        check_square(&matrix, &layout)?;
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(HilbertError::NotHermitian(defect));
        }
        Ok(Observable { matrix, layout })
    }

    pub(crate) fn from_hermitian_unchecked(matrix: CMatrix, layout: Layout) -> Self {
        Observable { matrix, layout }
    }

    pub fn identity(layout: Layout) -> Self {
        let d = layout.dim();
        Observable {
            matrix: CMatrix::identity(d, d),
            layout,
        }
    }

    pub fn pauli(p: Pauli, label: Subsystem) -> Self {
        Observable {
            matrix: p.matrix(),
            layout: Layout::single(label),
        }
    }

    /// Product of single-qubit Paulis, one per label of `layout`.
    pub fn pauli_string(paulis: &[Pauli], layout: Layout) -> Result<Self> {
        if paulis.len() != layout.len() {
            return Err(HilbertError::DimensionMismatch {
                expected: layout.len(),
                actual: paulis.len(),
            });
        }
        let mut m = CMatrix::identity(1, 1);
        for p in paulis {
            m = m.kronecker(&p.matrix());
        }
        Ok(Observable { matrix: m, layout })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Extends the operator by the identity on every label of `target` it does not act on.
    pub fn embed(&self, target: &Layout) -> Result<Observable> {
        for &l in self.layout.labels() {
            if target.position(l).is_none() {
                return Err(HilbertError::UnknownLabel(l));
            }
        }
        let n = target.len();
        let own: Vec<usize> = self
            .layout
            .labels()
            .iter()
            .map(|&l| target.position(l).expect("checked above"))
            .collect();
        let d = target.dim();
        let mut out = CMatrix::zeros(d, d);
        let zero = Complex64::new(0.0, 0.0);
        for row in 0..d {
            for col in 0..d {
                // identity factor on the complement
                let mut same = true;
                for q in 0..n {
                    if !own.contains(&q) && ((row >> (n - 1 - q)) & 1) != ((col >> (n - 1 - q)) & 1)
                    {
                        same = false;
                        break;
                    }
                }
                if !same {
                    continue;
                }
                let sub = |idx: usize| {
                    own.iter()
                        .fold(0usize, |acc, &q| (acc << 1) | ((idx >> (n - 1 - q)) & 1))
                };
                let v = self.matrix[(sub(row), sub(col))];
                if v != zero {
                    out[(row, col)] = v;
                }
            }
        }
        Ok(Observable {
            matrix: out,
            layout: target.clone(),
        })
    }
}

/// Single-qubit Pauli operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => CMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }
}

/// Kronecker product with concatenated layouts.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for Ket {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Ket {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            layout,
        })
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(DensityMatrix {
            matrix: self.matrix.kronecker(&other.matrix),
            layout,
        })
    }
}

impl Tensor for Observable {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Observable {
            matrix: self.matrix.kronecker(&other.matrix),
            layout,
        })
    }
}

/// Reduced state on `keep`; the result lists the kept labels in their original order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Subsystem]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(HilbertError::EmptySelection);
    }
    for &k in keep {
        if rho.layout.position(k).is_none() {
            return Err(HilbertError::UnknownLabel(k));
        }
    }
    let n = rho.layout.len();
    let kept: Vec<usize> = (0..n)
        .filter(|&q| keep.contains(&rho.layout.labels()[q]))
        .collect();
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let layout = Layout::new(kept.iter().map(|&q| rho.layout.labels()[q]).collect())?;

    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            let bit = (k >> (kept.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        idx
    };
    let mut out = CMatrix::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..dt {
                acc += rho.matrix[(compose(r, t), compose(c, t))];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix {
        matrix: out,
        layout,
    })
}

/// `Tr[ρ O]`; the imaginary residue is dropped.
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    if rho.layout != obs.layout {
        return Err(HilbertError::LayoutMismatch {
            left: rho.layout.clone(),
            right: obs.layout.clone(),
        });
    }
    Ok(trace_product(&rho.matrix, &obs.matrix).re)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &Ket) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: rho.dim(),
            actual: target.dim(),
        });
    }
    let v = &target.amplitudes;
    let f = v.dotc(&(&rho.matrix * v)).re;
    Ok(f.clamp(0.0, 1.0))
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    trace_product(&rho.matrix, &rho.matrix).re
}

/// Spectral decomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(m: &Observable) -> Eigen {
    eig_hermitian_matrix(&m.matrix).expect("Observable is Hermitian by construction")
}

pub fn eig_hermitian_matrix(m: &CMatrix) -> Result<Eigen> {
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(HilbertError::NotHermitian(defect));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = m.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

fn sorted_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    sorted_eigenvalues(m).last().copied().unwrap_or(0.0)
}
