//! Labeled tensor-product spaces and the dense linear algebra built on them.
//!
//! Every composite space has a canonical factor order fixed at construction.
//! Basis indices are row-major over that order: the first factor is the most
//! significant digit. Any operation that selects a subset of factors returns
//! its result in the canonical order of the parent space.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrefError, Result};

/// Largest total dimension accepted for a composite space (12 qubits).
pub const MAX_DIM: usize = 4096;
/// Tolerance for normalization, hermiticity, trace and positivity checks.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for eigen-residuals and orthonormality of computed eigenvectors.
pub const EIGEN_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Singular values below this are dropped from a Schmidt expansion.
const SCHMIDT_CUTOFF: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemId {
    name: String,
    dim: usize,
}

impl SubsystemId {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(QrefError::EmptyName);
        }
        if dim < 2 {
            return Err(QrefError::SubsystemTooSmall { name, dim });
        }
        Ok(Self { name, dim })
    }

    /// A two-level system.
    pub fn qubit(name: impl Into<String>) -> Result<Self> {
        Self::new(name, 2)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl fmt::Display for SubsystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.dim)
    }
}

/// An ordered list of distinct subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSpace {
    factors: Vec<SubsystemId>,
}

impl CompositeSpace {
    pub fn new(factors: Vec<SubsystemId>) -> Result<Self> {
        if factors.is_empty() {
            return Err(QrefError::EmptySelection);
        }
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.name == f.name) {
                return Err(QrefError::DuplicateSubsystem(f.name.clone()));
            }
        }
        let mut dim: usize = 1;
        for f in &factors {
            dim = dim.saturating_mul(f.dim);
            if dim > MAX_DIM {
                return Err(QrefError::DimensionCap(dim));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[SubsystemId] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    /// Total dimension: the product of the factor dimensions.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn get(&self, name: &str) -> Option<&SubsystemId> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// Positions of the named factors, in the order given.
    pub fn positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let p = self
                .position(n)
                .ok_or_else(|| QrefError::UnknownSubsystem(n.to_string()))?;
            if out.contains(&p) {
                return Err(QrefError::DuplicateSubsystem(n.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Positions of the named factors sorted into canonical order.
    pub fn canonical_positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        if names.is_empty() {
            return Err(QrefError::EmptySelection);
        }
        let mut p = self.positions(names)?;
        p.sort_unstable();
        Ok(p)
    }

    /// The subspace spanned by the named factors, in canonical order.
    pub fn subspace<S: AsRef<str>>(&self, names: &[S]) -> Result<CompositeSpace> {
        let pos = self.canonical_positions(names)?;
        Ok(self.select(&pos))
    }

    pub(crate) fn select(&self, positions: &[usize]) -> CompositeSpace {
        CompositeSpace {
            factors: positions.iter().map(|&p| self.factors[p].clone()).collect(),
        }
    }

    /// Names of the factors not in `names`, in canonical order.
    pub fn complement<S: AsRef<str>>(&self, names: &[S]) -> Vec<String> {
        self.factors
            .iter()
            .filter(|f| !names.iter().any(|n| n.as_ref() == f.name))
            .map(|f| f.name.clone())
            .collect()
    }

    /// Concatenation `self ⊗ other`; the factor sets must be disjoint.
    pub fn concat(&self, other: &CompositeSpace) -> Result<CompositeSpace> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        CompositeSpace::new(factors)
    }

    /// True when both spaces hold the same factors, in any order.
    pub fn same_factors(&self, other: &CompositeSpace) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().all(|f| other.factors.contains(f))
    }
}

impl fmt::Display for CompositeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

/// Index bookkeeping for splitting a composite index into a selected part and
/// the remaining factors.
///
/// `full_index(s, r)` is the composite index whose selected digits encode `s`
/// (in the order the positions were given) and whose remaining digits encode
/// `r` (remaining factors in ascending position order).
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub sub_dim: usize,
    pub rest_dim: usize,
    map: Vec<usize>,
}

impl Split {
    pub fn new(dims: &[usize], positions: &[usize]) -> Self {
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for p in (0..n.saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * dims[p + 1];
        }
        let rest: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
        let offsets = |sel: &[usize]| -> Vec<usize> {
            let total: usize = sel.iter().map(|&p| dims[p]).product();
            (0..total)
                .map(|mut idx| {
                    let mut off = 0;
                    for &p in sel.iter().rev() {
                        off += (idx % dims[p]) * strides[p];
                        idx /= dims[p];
                    }
                    off
                })
                .collect()
        };
        let sub = offsets(positions);
        let rst = offsets(&rest);
        let mut map = Vec::with_capacity(sub.len() * rst.len());
        for s in &sub {
            for r in &rst {
                map.push(s + r);
            }
        }
        Self {
            sub_dim: sub.len(),
            rest_dim: rst.len(),
            map,
        }
    }

    #[inline]
    pub fn full_index(&self, sub: usize, rest: usize) -> usize {
        self.map[sub * self.rest_dim + rest]
    }

    /// Applies `op ⊗ 1` to a vector.
    pub fn apply(&self, op: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(v.len(), ZERO);
        let mut buf = vec![ZERO; self.sub_dim];
        for r in 0..self.rest_dim {
            for (t, b) in buf.iter_mut().enumerate() {
                *b = v[self.full_index(t, r)];
            }
            for s in 0..self.sub_dim {
                let mut acc = ZERO;
                for (t, b) in buf.iter().enumerate() {
                    acc += op[(s, t)] * b;
                }
                out[self.full_index(s, r)] = acc;
            }
        }
        out
    }

    /// Applies `op ⊗ 1` from the left to every column of `m`.
    pub fn apply_left(
        &self,
        op: &DMatrix<Complex64>,
        m: &DMatrix<Complex64>,
    ) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(m.nrows(), m.ncols(), ZERO);
        for c in 0..m.ncols() {
            let col = self.apply(op, &m.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    /// Dense matrix of `op ⊗ 1`.
    pub fn embed(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.sub_dim * self.rest_dim;
        let mut out = DMatrix::from_element(n, n, ZERO);
        for r in 0..self.rest_dim {
            for s in 0..self.sub_dim {
                for t in 0..self.sub_dim {
                    out[(self.full_index(s, r), self.full_index(t, r))] = op[(s, t)];
                }
            }
        }
        out
    }
}

/// Locates the factors of `sub` inside `space` and returns the matching split.
pub(crate) fn split_for(space: &CompositeSpace, sub: &CompositeSpace) -> Result<Split> {
    let mut pos = Vec::with_capacity(sub.factors.len());
    for f in &sub.factors {
        match space.factors.iter().position(|g| g == f) {
            Some(p) => pos.push(p),
            None => {
                return Err(if space.contains(&f.name) {
                    QrefError::SpaceMismatch(format!("dimension of `{}` differs", f.name))
                } else {
                    QrefError::UnknownSubsystem(f.name.clone())
                })
            }
        }
    }
    Ok(Split::new(&space.dims(), &pos))
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Rotates `v` so that its largest-magnitude component is real and positive.
/// Ties go to the lowest index. Returns the unit factor that was applied.
pub(crate) fn fix_phase(v: &mut DVector<Complex64>) -> Complex64 {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag + 1e-12 {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / best_mag;
        *v *= phase;
        v[best] = Complex64::new(v[best].re, 0.0);
        phase
    } else {
        ONE
    }
}

/// A normalized vector over a labeled composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    space: CompositeSpace,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Wraps amplitudes that are already normalized to within [`STATE_TOL`].
    pub fn new(space: CompositeSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::from_vector(space, DVector::from_vec(amplitudes))
    }

    pub fn from_vector(space: CompositeSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(QrefError::LengthMismatch {
                expected: space.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > STATE_TOL {
            return Err(QrefError::NotNormalized(norm));
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalizes the given amplitudes; rejects the zero vector.
    pub fn normalized(space: CompositeSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(QrefError::NotNormalized(norm));
        }
        Self::from_vector(space, v / Complex64::new(norm, 0.0))
    }

    /// The computational basis state with the given composite index.
    pub fn basis(space: CompositeSpace, index: usize) -> Result<Self> {
        let dim = space.dim();
        if index >= dim {
            return Err(QrefError::IndexOutOfRange { index, len: dim });
        }
        let mut v = DVector::from_element(dim, ZERO);
        v[index] = ONE;
        Ok(Self {
            space,
            amplitudes: v,
        })
    }

    /// The product basis state with one basis index per factor.
    pub fn product_basis(space: CompositeSpace, digits: &[usize]) -> Result<Self> {
        let dims = space.dims();
        if digits.len() != dims.len() {
            return Err(QrefError::LengthMismatch {
                expected: dims.len(),
                got: digits.len(),
            });
        }
        let mut index = 0;
        for (&d, &n) in digits.iter().zip(&dims) {
            if d >= n {
                return Err(QrefError::IndexOutOfRange { index: d, len: n });
            }
            index = index * n + d;
        }
        Self::basis(space, index)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.space != other.space {
            return Err(QrefError::SpaceMismatch(format!(
                "{} vs {}",
                self.space, other.space
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        tensor(self, other)
    }

    pub fn to_density(&self) -> DensityMatrix {
        pure_to_density(self)
    }

    /// `|self⟩⟨self|` as a bare matrix.
    pub fn projector(&self) -> DMatrix<Complex64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// Same state with the global phase fixed by the largest-component rule.
    pub fn with_canonical_phase(&self) -> PureState {
        let mut v = self.amplitudes.clone();
        fix_phase(&mut v);
        PureState {
            space: self.space.clone(),
            amplitudes: v,
        }
    }

    /// Re-expresses the state over `target`, which must hold the same factors
    /// in a possibly different order.
    pub fn permuted(&self, target: &CompositeSpace) -> Result<PureState> {
        if !self.space.same_factors(target) {
            return Err(QrefError::SpaceMismatch(format!(
                "{} is not a reordering of {}",
                target, self.space
            )));
        }
        let split = split_for(&self.space, target)?;
        let amps = (0..split.sub_dim)
            .map(|s| self.amplitudes[split.full_index(s, 0)])
            .collect();
        Ok(PureState {
            space: target.clone(),
            amplitudes: DVector::from_vec(amps),
        })
    }

    /// Largest amplitude difference to `other`, ignoring nothing (phases count).
    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        (&self.amplitudes - &other.amplitudes)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn from_parts_unchecked(
        space: CompositeSpace,
        amplitudes: DVector<Complex64>,
    ) -> Self {
        Self { space, amplitudes }
    }
}

/// A hermitian, unit-trace, positive semidefinite matrix over a labeled space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: CompositeSpace,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity to [`STATE_TOL`].
    pub fn new(space: CompositeSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(QrefError::LengthMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > STATE_TOL {
            return Err(QrefError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QrefError::TraceNotOne(tr.re));
        }
        let spectrum = hermitian_eigen(&space, &matrix)?;
        if let Some(&min) = spectrum.eigenvalues.last() {
            if min < -STATE_TOL {
                return Err(QrefError::NotPositive(min));
            }
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityMatrix> {
        partial_trace(self, keep)
    }

    pub fn eigen(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(self)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Largest elementwise deviation from `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space {
            return Err(QrefError::SpaceMismatch(format!(
                "{} vs {}",
                self.space, other.space
            )));
        }
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }
}

/// Eigenpairs of a hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<PureState>,
    /// Indices `i` with `eigenvalues[i] - eigenvalues[i + 1] < DEGENERACY_GAP`.
    pub degenerate_pairs: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_pairs.is_empty()
    }

    /// Smallest gap between two degenerate eigenvalues that both carry
    /// weight (exceed [`DEGENERACY_GAP`]). Degeneracy inside the null space
    /// is ignored here.
    pub fn support_degeneracy(&self) -> Option<f64> {
        self.degenerate_pairs
            .iter()
            .filter(|&&i| self.eigenvalues[i + 1] > DEGENERACY_GAP)
            .map(|&i| self.eigenvalues[i] - self.eigenvalues[i + 1])
            .fold(None, |acc: Option<f64>, g| {
                Some(acc.map_or(g, |a| a.min(g)))
            })
    }

    /// `Σ λ_j v_j v_j†`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.eigenvectors.first().map_or(0, |v| v.dim());
        let mut m = DMatrix::from_element(n, n, ZERO);
        for (l, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m += v.projector() * Complex64::new(*l, 0.0);
        }
        m
    }
}

/// Eigendecomposition of an arbitrary hermitian matrix over `space`.
///
/// Eigenvectors carry the canonical phase; near-equal eigenvalues are
/// recorded in `degenerate_pairs` rather than rejected.
pub fn hermitian_eigen(
    space: &CompositeSpace,
    matrix: &DMatrix<Complex64>,
) -> Result<SpectralDecomposition> {
    let n = space.dim();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(QrefError::LengthMismatch {
            expected: n,
            got: matrix.nrows(),
        });
    }
    let herm = max_abs(&(matrix - matrix.adjoint()));
    if herm > STATE_TOL {
        return Err(QrefError::NotHermitian(herm));
    }
    let sym = (matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &k in &order {
        let mut v: DVector<Complex64> = eig.eigenvectors.column(k).into_owned();
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        fix_phase(&mut v);
        eigenvalues.push(eig.eigenvalues[k]);
        eigenvectors.push(PureState::from_parts_unchecked(space.clone(), v));
    }
    let degenerate_pairs = eigenvalues
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] - w[1] < DEGENERACY_GAP)
        .map(|(i, _)| i)
        .collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        degenerate_pairs,
    })
}

/// `a ⊗ b` over the concatenated space.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    let space = a.space.concat(&b.space)?;
    let nb = b.dim();
    let mut v = DVector::from_element(a.dim() * nb, ZERO);
    for (i, x) in a.amplitudes.iter().enumerate() {
        for (j, y) in b.amplitudes.iter().enumerate() {
            v[i * nb + j] = x * y;
        }
    }
    Ok(PureState {
        space,
        amplitudes: v,
    })
}

/// Tensor product of several states, left to right.
pub fn tensor_all(states: &[&PureState]) -> Result<PureState> {
    let (first, rest) = states.split_first().ok_or(QrefError::EmptySelection)?;
    rest.iter()
        .try_fold((*first).clone(), |acc, s| tensor(&acc, s))
}

pub fn pure_to_density(psi: &PureState) -> DensityMatrix {
    DensityMatrix {
        space: psi.space.clone(),
        matrix: psi.projector(),
    }
}

/// Traces out every factor not named in `keep`. The result is expressed in
/// the canonical order of the parent space.
pub fn partial_trace<S: AsRef<str>>(rho: &DensityMatrix, keep: &[S]) -> Result<DensityMatrix> {
    let pos = rho.space.canonical_positions(keep)?;
    let split = Split::new(&rho.space.dims(), &pos);
    let m = &rho.matrix;
    let out = DMatrix::from_fn(split.sub_dim, split.sub_dim, |s, t| {
        (0..split.rest_dim)
            .map(|r| m[(split.full_index(s, r), split.full_index(t, r))])
            .sum()
    });
    Ok(DensityMatrix {
        space: rho.space.select(&pos),
        matrix: out,
    })
}

/// Reduced state of a pure state on the named factors.
pub fn reduced_state<S: AsRef<str>>(psi: &PureState, keep: &[S]) -> Result<DensityMatrix> {
    let pos = psi.space.canonical_positions(keep)?;
    let split = Split::new(&psi.space.dims(), &pos);
    let a = DMatrix::from_fn(split.sub_dim, split.rest_dim, |s, r| {
        psi.amplitudes[split.full_index(s, r)]
    });
    Ok(DensityMatrix {
        space: psi.space.select(&pos),
        matrix: &a * a.adjoint(),
    })
}

pub fn eig_hermitian(rho: &DensityMatrix) -> Result<SpectralDecomposition> {
    hermitian_eigen(&rho.space, &rho.matrix)
}

/// Bipartite Schmidt expansion `ψ = Σ_j c_j |left_j⟩|right_j⟩`.
#[derive(Debug, Clone)]
pub struct SchmidtForm {
    /// Real, nonnegative, descending.
    pub coefficients: Vec<Complex64>,
    pub left: Vec<PureState>,
    pub right: Vec<PureState>,
    source: CompositeSpace,
}

impl SchmidtForm {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    pub fn source_space(&self) -> &CompositeSpace {
        &self.source
    }

    /// Rebuilds the amplitudes over the source space.
    pub fn reconstruct(&self) -> Result<DVector<Complex64>> {
        let mut acc = DVector::from_element(self.source.dim(), ZERO);
        for ((c, l), r) in self.coefficients.iter().zip(&self.left).zip(&self.right) {
            let term = tensor(l, r)?.permuted(&self.source)?;
            acc += term.amplitudes * *c;
        }
        Ok(acc)
    }
}

/// Schmidt decomposition across the cut `left_factors | rest`.
///
/// Coefficients are real and descending; any phase is absorbed into the left
/// vectors after the right vectors are brought to canonical phase.
pub fn schmidt_decompose<S: AsRef<str>>(
    psi: &PureState,
    left_factors: &[S],
) -> Result<SchmidtForm> {
    let left_pos = psi.space.canonical_positions(left_factors)?;
    if left_pos.len() == psi.space.factors.len() {
        return Err(QrefError::TrivialBipartition);
    }
    let right_pos: Vec<usize> = (0..psi.space.factors.len())
        .filter(|p| !left_pos.contains(p))
        .collect();
    let split = Split::new(&psi.space.dims(), &left_pos);
    let a = DMatrix::from_fn(split.sub_dim, split.rest_dim, |s, r| {
        psi.amplitudes[split.full_index(s, r)]
    });
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));

    let left_space = psi.space.select(&left_pos);
    let right_space = psi.space.select(&right_pos);
    let mut coefficients = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for k in order {
        let sigma = svd.singular_values[k];
        if sigma <= SCHMIDT_CUTOFF {
            continue;
        }
        let mut r: DVector<Complex64> = v_t.row(k).transpose();
        let phase = fix_phase(&mut r);
        let l: DVector<Complex64> = u.column(k).into_owned() * phase.conj();
        coefficients.push(Complex64::new(sigma, 0.0));
        left.push(PureState::from_parts_unchecked(left_space.clone(), l));
        right.push(PureState::from_parts_unchecked(right_space.clone(), r));
    }
    Ok(SchmidtForm {
        coefficients,
        left,
        right,
        source: psi.space.clone(),
    })
}
