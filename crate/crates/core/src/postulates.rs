//! Possible internal states and joint probabilities of subsystems of an
//! isolated reference system.
//!
//! The state of the isolated system is always a [`PureState`]. The state of a
//! subsystem `S` relative to it is the reduced density matrix `ρ_S(I)`; its
//! eigenvectors are the possible internal states of `S` and its eigenvalues
//! their probabilities. For disjoint subsystems the joint probability is
//! `Tr[π₁ … πₙ ρ(I)]`. For overlapping subsystems the same trace depends on
//! the ordering and is generally complex; it is exposed as a
//! pseudo-probability only.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QrefError, Result};
use crate::tensor::{
    max_abs, reduced_state, split_for, CompositeSpace, DensityMatrix, PureState,
    SpectralDecomposition, SubsystemId, EIGEN_TOL, STATE_TOL,
};

/// Raw probabilities may stray this far outside `[0, 1]` before clamping.
pub const PROBABILITY_SLACK: f64 = 1e-9;
/// A joint table must sum to one within this tolerance.
pub const TABLE_SUM_TOL: f64 = 1e-9;
/// Shots drawn from one random substream.
pub const SHOTS_PER_BLOCK: u64 = 1 << 16;

/// What to do when a reduced state has a degenerate spectrum on its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneracyPolicy {
    /// Refuse with [`QrefError::DegenerateSpectrum`].
    #[default]
    Strict,
    /// Use whatever eigenbasis the solver returns. The resulting
    /// decomposition keeps its degeneracy flag as a warning marker.
    AcceptArbitraryBasis,
}

fn check_policy(spectrum: &SpectralDecomposition, policy: DegeneracyPolicy) -> Result<()> {
    match (policy, spectrum.support_degeneracy()) {
        (DegeneracyPolicy::Strict, Some(gap)) => Err(QrefError::DegenerateSpectrum { gap }),
        _ => Ok(()),
    }
}

/// Possible internal states of `subsystem`, treating `isolated` as the state
/// of an isolated reference system. Degenerate spectra are rejected.
pub fn possible_internal_states<S: AsRef<str>>(
    isolated: &PureState,
    subsystem: &[S],
) -> Result<SpectralDecomposition> {
    possible_internal_states_with(isolated, subsystem, DegeneracyPolicy::Strict)
}

pub fn possible_internal_states_with<S: AsRef<str>>(
    isolated: &PureState,
    subsystem: &[S],
    policy: DegeneracyPolicy,
) -> Result<SpectralDecomposition> {
    let spectrum = reduced_state(isolated, subsystem)?.eigen()?;
    check_policy(&spectrum, policy)?;
    Ok(spectrum)
}

/// `ρ_S(I)` read as the observable whose eigenbasis a nondisturbing
/// measurement of `S` must resolve.
pub fn nondisturbing_observable<S: AsRef<str>>(
    isolated: &PureState,
    subsystem: &[S],
) -> Result<DensityMatrix> {
    reduced_state(isolated, subsystem)
}

/// `‖[ρ, |v⟩⟨v|]‖_max`.
pub fn commutator_norm(rho: &DensityMatrix, state: &PureState) -> Result<f64> {
    let split = split_for(rho.space(), state.space())?;
    if split.rest_dim != 1 {
        return Err(QrefError::SpaceMismatch(format!(
            "projector over {} does not cover {}",
            state.space(),
            rho.space()
        )));
    }
    let proj = split.embed(&state.projector());
    let m = rho.matrix();
    Ok(max_abs(&(m * &proj - &proj * m)))
}

/// Subsystem sets paired with an index into their possible internal states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InternalStateAssignment {
    entries: Vec<(Vec<String>, usize)>,
}

impl InternalStateAssignment {
    pub fn new<S: AsRef<str>>(entries: &[(&[S], usize)]) -> Result<Self> {
        let entries: Vec<(Vec<String>, usize)> = entries
            .iter()
            .map(|(set, j)| (set.iter().map(|s| s.as_ref().to_string()).collect(), *j))
            .collect();
        let sets: Vec<&[String]> = entries.iter().map(|(s, _)| s.as_slice()).collect();
        check_disjoint(&sets)?;
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(Vec<String>, usize)] {
        &self.entries
    }
}

fn check_disjoint<S: AsRef<str>>(sets: &[&[S]]) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for set in sets {
        if set.is_empty() {
            return Err(QrefError::EmptySelection);
        }
        for name in set.iter() {
            let name = name.as_ref();
            if seen.contains(&name) {
                return Err(QrefError::NotDisjoint(name.to_string()));
            }
        }
        seen.extend(set.iter().map(|s| s.as_ref()));
    }
    Ok(())
}

/// `Tr[π₁ π₂ … πₙ ρ_U(I)]` where `U` is the union of the projectors'
/// subsystems and `πᵢ = |vᵢ⟩⟨vᵢ|`. Subsystems may overlap; no
/// interpretation is attached to the value.
pub fn ordered_trace(isolated: &PureState, projectors: &[&PureState]) -> Result<Complex64> {
    if projectors.is_empty() {
        return Err(QrefError::EmptySelection);
    }
    let mut union: Vec<&str> = Vec::new();
    for p in projectors {
        for name in p.space().names() {
            if !isolated.space().contains(name) {
                return Err(QrefError::UnknownSubsystem(name.to_string()));
            }
            if !union.contains(&name) {
                union.push(name);
            }
        }
    }
    let rho = reduced_state(isolated, &union)?;
    let mut acc: DMatrix<Complex64> = rho.matrix().clone();
    for p in projectors.iter().rev() {
        let split = split_for(rho.space(), p.space())?;
        acc = split.apply_left(&p.projector(), &acc);
    }
    Ok(acc.trace())
}

/// Joint probability that each given state coincides with the internal state
/// of its subsystem. The subsystems must be disjoint.
pub fn joint_probability_of_states(isolated: &PureState, states: &[&PureState]) -> Result<f64> {
    let sets: Vec<Vec<&str>> = states.iter().map(|s| s.space().names()).collect();
    let refs: Vec<&[&str]> = sets.iter().map(|s| s.as_slice()).collect();
    check_disjoint(&refs)?;
    if states.is_empty() {
        return Err(QrefError::EmptySelection);
    }
    clamp_probability(disjoint_overlap(isolated, states)?)
}

/// `‖(⟨v₁| ⊗ … ⊗ ⟨vₙ| ⊗ 1)|Ψ⟩‖²`, which equals `Tr[π₁ … πₙ ρ_U]` when the
/// `vᵢ` live on disjoint subsystems, at the cost of a few vector
/// contractions.
fn disjoint_overlap(isolated: &PureState, states: &[&PureState]) -> Result<f64> {
    let mut factors: Vec<SubsystemId> = isolated.space().factors().to_vec();
    let mut amps = isolated.amplitudes().clone();
    for s in states {
        let space = CompositeSpace::new(factors.clone())?;
        let split = split_for(&space, s.space())?;
        let v = s.amplitudes();
        amps = DVector::from_fn(split.rest_dim, |r, _| {
            (0..split.sub_dim).fold(Complex64::new(0.0, 0.0), |acc, t| {
                acc + v[t].conj() * amps[split.full_index(t, r)]
            })
        });
        factors.retain(|f| !s.space().contains(f.name()));
        if factors.is_empty() {
            break;
        }
    }
    Ok(amps.norm_squared())
}

fn clamp_probability(p: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
        return Err(QrefError::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

fn resolve<S: AsRef<str>>(
    isolated: &PureState,
    set: &[S],
    index: usize,
    policy: DegeneracyPolicy,
) -> Result<PureState> {
    let spectrum = possible_internal_states_with(isolated, set, policy)?;
    spectrum
        .eigenvectors
        .get(index)
        .cloned()
        .ok_or(QrefError::IndexOutOfRange {
            index,
            len: spectrum.len(),
        })
}

/// Joint probability of an assignment of possible internal states (indices
/// into each subsystem's descending spectrum). Degenerate spectra are
/// rejected.
pub fn joint_probability(
    isolated: &PureState,
    assignment: &InternalStateAssignment,
) -> Result<f64> {
    joint_probability_with(isolated, assignment, DegeneracyPolicy::Strict)
}

pub fn joint_probability_with(
    isolated: &PureState,
    assignment: &InternalStateAssignment,
    policy: DegeneracyPolicy,
) -> Result<f64> {
    let states = assignment
        .entries
        .iter()
        .map(|(set, j)| resolve(isolated, set, *j, policy))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PureState> = states.iter().collect();
    joint_probability_of_states(isolated, &refs)
}

/// Ordering-dependent trace for possibly overlapping subsystems, with each
/// entry naming an index into that subsystem's possible internal states.
pub fn pseudo_joint_probability<S: AsRef<str>>(
    isolated: &PureState,
    ordered: &[(&[S], usize)],
    policy: DegeneracyPolicy,
) -> Result<Complex64> {
    let states = ordered
        .iter()
        .map(|(set, j)| resolve(isolated, set, *j, policy))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PureState> = states.iter().collect();
    ordered_trace(isolated, &refs)
}

/// One axis of a joint table: a subsystem set and the basis of candidate
/// internal states along it.
#[derive(Debug, Clone)]
pub struct Axis {
    pub label: String,
    pub subsystems: Vec<String>,
    pub states: Vec<PureState>,
}

impl Axis {
    /// All eigenvectors of `ρ_S(I)`, descending eigenvalue order.
    pub fn possible_states<S: AsRef<str>>(
        isolated: &PureState,
        subsystems: &[S],
        policy: DegeneracyPolicy,
    ) -> Result<Axis> {
        let spectrum = possible_internal_states_with(isolated, subsystems, policy)?;
        let space = spectrum.eigenvectors[0].space().clone();
        Ok(Axis {
            label: space.names().join("+"),
            subsystems: space.names().iter().map(|s| s.to_string()).collect(),
            states: spectrum.eigenvectors,
        })
    }

    /// A caller-chosen basis. Every state must be an eigenvector of
    /// `ρ_S(I)` (commutator below [`EIGEN_TOL`]) and the states must be
    /// orthonormal; they need not span the whole space as long as the table
    /// they produce still sums to one.
    pub fn explicit(isolated: &PureState, states: Vec<PureState>) -> Result<Axis> {
        let first = states.first().ok_or(QrefError::EmptySelection)?;
        let names: Vec<String> = first
            .space()
            .names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rho = reduced_state(isolated, &names)?;
        let canonical = rho.space().clone();
        let states = states
            .iter()
            .map(|s| s.permuted(&canonical))
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b)? - expected).norm());
            }
        }
        if worst > STATE_TOL {
            return Err(QrefError::NotOrthonormal(worst));
        }
        for s in &states {
            let comm = commutator_norm(&rho, s)?;
            if comm > EIGEN_TOL {
                return Err(QrefError::NotEigenbasis(comm));
            }
        }
        Ok(Axis {
            label: canonical.names().join("+"),
            subsystems: canonical.names().iter().map(|s| s.to_string()).collect(),
            states,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Joint probabilities over a product of axes, stored row-major.
#[derive(Debug, Clone)]
pub struct JointProbabilityTable {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    probabilities: Vec<f64>,
}

impl JointProbabilityTable {
    /// Evaluates every cell with [`joint_probability_of_states`].
    pub fn compute(isolated: &PureState, axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(QrefError::EmptySelection);
        }
        let sets: Vec<&[String]> = axes.iter().map(|a| a.subsystems.as_slice()).collect();
        check_disjoint(&sets)?;
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let total: usize = shape.iter().product();
        let mut probabilities = Vec::with_capacity(total);
        for flat in 0..total {
            let idx = unflatten(flat, &shape);
            let states: Vec<&PureState> =
                axes.iter().zip(&idx).map(|(a, &i)| &a.states[i]).collect();
            probabilities.push(joint_probability_of_states(isolated, &states)?);
        }
        let table = Self {
            axes,
            shape,
            probabilities,
        };
        let sum = table.total();
        if (sum - 1.0).abs() > TABLE_SUM_TOL {
            return Err(QrefError::TableNotNormalized(sum));
        }
        Ok(table)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Flattened row-major probabilities.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.probabilities[flatten(index, &self.shape)?])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Multi-indices paired with their probabilities, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(flat, &p)| (unflatten(flat, &self.shape), p))
    }

    /// Distribution along one axis, summing out the others.
    pub fn axis_marginal(&self, axis: usize) -> Result<Vec<f64>> {
        if axis >= self.shape.len() {
            return Err(QrefError::IndexOutOfRange {
                index: axis,
                len: self.shape.len(),
            });
        }
        let mut out = vec![0.0; self.shape[axis]];
        for (idx, p) in self.cells() {
            out[idx[axis]] += p;
        }
        Ok(out)
    }

    /// Sums out `axis`, keeping the remaining axes in order.
    pub fn sum_over(&self, axis: usize) -> Result<JointProbabilityTable> {
        if axis >= self.shape.len() || self.shape.len() == 1 {
            return Err(QrefError::IndexOutOfRange {
                index: axis,
                len: self.shape.len(),
            });
        }
        let mut axes = self.axes.clone();
        axes.remove(axis);
        let mut shape = self.shape.clone();
        shape.remove(axis);
        let mut probabilities = vec![0.0; shape.iter().product()];
        for (mut idx, p) in self.cells() {
            idx.remove(axis);
            probabilities[flatten(&idx, &shape)?] += p;
        }
        Ok(Self {
            axes,
            shape,
            probabilities,
        })
    }
}

fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (slot, &n) in idx.iter_mut().zip(shape).rev() {
        *slot = flat % n;
        flat /= n;
    }
    idx
}

fn flatten(index: &[usize], shape: &[usize]) -> Result<usize> {
    if index.len() != shape.len() {
        return Err(QrefError::LengthMismatch {
            expected: shape.len(),
            got: index.len(),
        });
    }
    let mut flat = 0;
    for (&i, &n) in index.iter().zip(shape) {
        if i >= n {
            return Err(QrefError::IndexOutOfRange { index: i, len: n });
        }
        flat = flat * n + i;
    }
    Ok(flat)
}

/// Outcome counts drawn from a [`JointProbabilityTable`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalTable {
    pub shape: Vec<usize>,
    pub counts: Vec<u64>,
    pub shots: u64,
    pub seed: u64,
}

impl EmpiricalTable {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| {
                if self.shots == 0 {
                    0.0
                } else {
                    c as f64 / self.shots as f64
                }
            })
            .collect()
    }

    pub fn count(&self, index: &[usize]) -> Result<u64> {
        Ok(self.counts[flatten(index, &self.shape)?])
    }
}

/// Draws `shots` cells by inverse CDF over the flattened table.
///
/// Shots are processed in blocks of [`SHOTS_PER_BLOCK`]; block `b` uses the
/// ChaCha8 stream `b` seeded with `seed`, so the counts depend only on
/// `(table, shots, seed)`.
pub fn sample_table(table: &JointProbabilityTable, shots: u64, seed: u64) -> EmpiricalTable {
    let mut cdf = Vec::with_capacity(table.probabilities.len());
    let mut acc = 0.0;
    for &p in &table.probabilities {
        acc += p;
        cdf.push(acc);
    }
    let last_live = table
        .probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(0);
    let mut counts = vec![0u64; cdf.len()];
    let blocks = shots.div_ceil(SHOTS_PER_BLOCK);
    for b in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b);
        let n = SHOTS_PER_BLOCK.min(shots - b * SHOTS_PER_BLOCK);
        for _ in 0..n {
            let u = rng.random::<f64>() * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(last_live);
            counts[cell] += 1;
        }
    }
    EmpiricalTable {
        shape: table.shape.clone(),
        counts,
        shots,
        seed,
    }
}

/// Samples joint internal-state assignments of disjoint `subsystems`, each
/// axis running over that subsystem's possible internal states.
pub fn sample_assignments<S: AsRef<str>>(
    isolated: &PureState,
    subsystems: &[&[S]],
    shots: u64,
    seed: u64,
    policy: DegeneracyPolicy,
) -> Result<(JointProbabilityTable, EmpiricalTable)> {
    if shots == 0 {
        return Err(QrefError::InvalidArgument(
            "shots must be at least 1".into(),
        ));
    }
    check_disjoint(subsystems)?;
    let axes = subsystems
        .iter()
        .map(|s| Axis::possible_states(isolated, s, policy))
        .collect::<Result<Vec<_>>>()?;
    let table = JointProbabilityTable::compute(isolated, axes)?;
    let sampled = sample_table(&table, shots, seed);
    Ok((table, sampled))
}

/// The computational-basis state of a single named factor of `space`.
pub fn factor_basis_state(space: &CompositeSpace, name: &str, index: usize) -> Result<PureState> {
    let f = space
        .get(name)
        .ok_or_else(|| QrefError::UnknownSubsystem(name.to_string()))?;
    PureState::basis(CompositeSpace::new(vec![f.clone()])?, index)
}
