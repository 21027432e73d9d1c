//! Measurement interactions as discrete unitary maps.
//!
//! A premeasurement couples a measured system to a pointer so that
//! `|φ_j⟩|m_ready⟩ → |φ_j⟩|m_j⟩`. The unitary is completed outside the
//! ready sector by swapping `m_ready ↔ m_j` within each controlled branch
//! and acting as the identity everywhere else.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrefError, Result};
use crate::tensor::{
    fix_phase, max_abs, split_for, CompositeSpace, PureState, SubsystemId, STATE_TOL,
};

const UNIT_TOL: f64 = 1e-12;

/// A unit vector in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(QrefError::NotUnitVector(norm));
        }
        Ok(Self { x, y, z })
    }

    /// Scales `(x, y, z)` to unit length; rejects the zero vector.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(QrefError::NotUnitVector(norm));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Polar angle `theta` from +z, azimuth `phi` from +x (radians).
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Self {
            x: theta.sin() * phi.cos(),
            y: theta.sin() * phi.sin(),
            z: theta.cos(),
        }
    }

    /// The direction at angle `theta` from +z, rotated towards +x.
    pub fn in_xz_plane(theta: f64) -> Self {
        Self {
            x: theta.sin(),
            y: 0.0,
            z: theta.cos(),
        }
    }

    pub fn z() -> Self {
        Self::in_xz_plane(0.0)
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn polar(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }

    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Angle between the two directions, in `[0, π]`.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    /// `n·σ` in the `(↑, ↓)` basis.
    pub fn pauli_operator(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(self.z, 0.0),
                Complex64::new(self.x, -self.y),
                Complex64::new(self.x, self.y),
                Complex64::new(-self.z, 0.0),
            ],
        )
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Eigenstates of `n·σ` on a two-level `particle`: `(+1, −1)`.
pub fn spin_eigenbasis(n: &Direction, particle: &SubsystemId) -> Result<(PureState, PureState)> {
    if particle.dim() != 2 {
        return Err(QrefError::InvalidArgument(format!(
            "spin basis needs a two-level system, `{}` has dimension {}",
            particle.name(),
            particle.dim()
        )));
    }
    let space = CompositeSpace::new(vec![particle.clone()])?;
    let half = n.polar() / 2.0;
    let phase = Complex64::from_polar(1.0, n.azimuth());
    let mut plus = DVector::from_vec(vec![Complex64::new(half.cos(), 0.0), phase * half.sin()]);
    let mut minus = DVector::from_vec(vec![
        -phase.conj() * half.sin(),
        Complex64::new(half.cos(), 0.0),
    ]);
    fix_phase(&mut plus);
    fix_phase(&mut minus);
    Ok((
        PureState::from_vector(space.clone(), plus)?,
        PureState::from_vector(space, minus)?,
    ))
}

/// A controlled-basis → pointer-index map defining a premeasurement.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    target: SubsystemId,
    pointer: SubsystemId,
    controlled_basis: Vec<PureState>,
    ready_index: usize,
    pointer_map: Vec<usize>,
}

impl MeasurementModel {
    pub fn new(
        target: SubsystemId,
        pointer: SubsystemId,
        controlled_basis: Vec<PureState>,
        ready_index: usize,
        pointer_map: Vec<usize>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(QrefError::InvalidModel(msg));
        if target.name() == pointer.name() {
            return invalid(format!("target and pointer are both `{}`", target.name()));
        }
        if controlled_basis.is_empty() {
            return invalid("controlled basis is empty".into());
        }
        if controlled_basis.len() > target.dim() {
            return invalid(format!(
                "{} basis states for a {}-dimensional target",
                controlled_basis.len(),
                target.dim()
            ));
        }
        let target_space = CompositeSpace::new(vec![target.clone()])?;
        for s in &controlled_basis {
            if s.space() != &target_space {
                return Err(QrefError::SpaceMismatch(format!(
                    "controlled basis state over {} but target is {}",
                    s.space(),
                    target_space
                )));
            }
        }
        let mut worst: f64 = 0.0;
        for (i, a) in controlled_basis.iter().enumerate() {
            for (j, b) in controlled_basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b)? - expected).norm());
            }
        }
        if worst > STATE_TOL {
            return Err(QrefError::NotOrthonormal(worst));
        }
        if pointer_map.len() != controlled_basis.len() {
            return invalid(format!(
                "pointer map has {} entries for {} basis states",
                pointer_map.len(),
                controlled_basis.len()
            ));
        }
        if pointer.dim() < controlled_basis.len() + 1 {
            return invalid(format!(
                "pointer `{}` needs at least {} levels",
                pointer.name(),
                controlled_basis.len() + 1
            ));
        }
        if ready_index >= pointer.dim() {
            return invalid(format!("ready index {ready_index} out of range"));
        }
        for (j, &m) in pointer_map.iter().enumerate() {
            if m >= pointer.dim() {
                return invalid(format!("pointer index {m} out of range"));
            }
            if m == ready_index {
                return invalid(format!("outcome {j} maps onto the ready state"));
            }
            if pointer_map[..j].contains(&m) {
                return invalid(format!("pointer index {m} used twice"));
            }
        }
        Ok(Self {
            target,
            pointer,
            controlled_basis,
            ready_index,
            pointer_map,
        })
    }

    /// Ready state 0, outcome `j` recorded in pointer level `j + 1`.
    pub fn standard(
        target: SubsystemId,
        pointer: SubsystemId,
        basis: Vec<PureState>,
    ) -> Result<Self> {
        let map = (1..=basis.len()).collect();
        Self::new(target, pointer, basis, 0, map)
    }

    /// Spin measurement along `n`: outcome 0 is `+`, outcome 1 is `−`.
    pub fn spin(target: SubsystemId, pointer: SubsystemId, n: &Direction) -> Result<Self> {
        let (plus, minus) = spin_eigenbasis(n, &target)?;
        Self::standard(target, pointer, vec![plus, minus])
    }

    pub fn target(&self) -> &SubsystemId {
        &self.target
    }

    pub fn pointer(&self) -> &SubsystemId {
        &self.pointer
    }

    pub fn controlled_basis(&self) -> &[PureState] {
        &self.controlled_basis
    }

    pub fn ready_index(&self) -> usize {
        self.ready_index
    }

    pub fn pointer_map(&self) -> &[usize] {
        &self.pointer_map
    }

    pub fn outcomes(&self) -> usize {
        self.controlled_basis.len()
    }

    /// The pointer's ready state `|m_ready⟩`.
    pub fn ready_state(&self) -> Result<PureState> {
        PureState::basis(
            CompositeSpace::new(vec![self.pointer.clone()])?,
            self.ready_index,
        )
    }

    /// The pointer state recording outcome `j`.
    pub fn outcome_state(&self, j: usize) -> Result<PureState> {
        let m = *self.pointer_map.get(j).ok_or(QrefError::IndexOutOfRange {
            index: j,
            len: self.pointer_map.len(),
        })?;
        PureState::basis(CompositeSpace::new(vec![self.pointer.clone()])?, m)
    }

    fn local_space(&self) -> Result<CompositeSpace> {
        CompositeSpace::new(vec![self.target.clone(), self.pointer.clone()])
    }

    /// The premeasurement unitary over `target ⊗ pointer` only.
    pub fn local_unitary(&self) -> Result<UnitaryOp> {
        let dt = self.target.dim();
        let dp = self.pointer.dim();
        let n = dt * dp;
        let mut u = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let mut rest = DMatrix::<Complex64>::identity(dt, dt);
        for (phi, &m) in self.controlled_basis.iter().zip(&self.pointer_map) {
            let proj = phi.projector();
            rest -= &proj;
            let swap = transposition(dp, self.ready_index, m);
            u += proj.kronecker(&swap);
        }
        u += rest.kronecker(&DMatrix::<Complex64>::identity(dp, dp));
        UnitaryOp::new(self.local_space()?, u)
    }
}

fn transposition(dim: usize, a: usize, b: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::identity(dim, dim);
    m.swap_rows(a, b);
    m
}

/// A unitary matrix over a labeled space.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    space: CompositeSpace,
    matrix: DMatrix<Complex64>,
}

impl UnitaryOp {
    pub fn new(space: CompositeSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(QrefError::LengthMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let dev = unitarity_defect(&matrix);
        if dev > STATE_TOL {
            return Err(QrefError::NotUnitary(dev));
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: CompositeSpace) -> Self {
        let n = space.dim();
        Self {
            space,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> UnitaryOp {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// `‖U†U − 1‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// The same operator acting as the identity on the other factors of `space`.
    pub fn embed(&self, space: &CompositeSpace) -> Result<UnitaryOp> {
        if space == &self.space {
            return Ok(self.clone());
        }
        let split = split_for(space, &self.space)?;
        Ok(Self {
            space: space.clone(),
            matrix: split.embed(&self.matrix),
        })
    }

    /// `next · self` (apply `self` first). Both operators are embedded into
    /// `space`.
    pub fn then(&self, next: &UnitaryOp, space: &CompositeSpace) -> Result<UnitaryOp> {
        let a = self.embed(space)?;
        let b = next.embed(space)?;
        UnitaryOp::new(space.clone(), &b.matrix * &a.matrix)
    }
}

fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - DMatrix::<Complex64>::identity(n, n)))
}

/// The premeasurement unitary of `model`, acting on `space` (identity on the
/// factors other than target and pointer).
pub fn premeasurement_unitary(
    model: &MeasurementModel,
    space: &CompositeSpace,
) -> Result<UnitaryOp> {
    model.local_unitary()?.embed(space)
}

/// Applies `u` to `psi`. When `u` acts on a subset of `psi`'s factors it is
/// embedded implicitly.
pub fn apply_unitary(u: &UnitaryOp, psi: &PureState) -> Result<PureState> {
    let out = if u.space() == psi.space() {
        u.matrix() * psi.amplitudes()
    } else {
        let split = split_for(psi.space(), u.space()).map_err(|e| match e {
            QrefError::UnknownSubsystem(n) => {
                QrefError::SpaceMismatch(format!("operator factor `{n}` is not in {}", psi.space()))
            }
            other => other,
        })?;
        split.apply(u.matrix(), psi.amplitudes())
    };
    PureState::from_vector(psi.space().clone(), out)
}

/// Convenience: apply the premeasurement of `model` to `psi`.
pub fn premeasure(model: &MeasurementModel, psi: &PureState) -> Result<PureState> {
    apply_unitary(&model.local_unitary()?, psi)
}
