//! End-to-end reproductions: a spin measurement read by an observer, and the
//! two-particle correlation experiment with and without an extra
//! nondisturbing measurement of the first particle.
//!
//! Subsystem names: particles `P1`, `P2`; spin-measuring devices `M1`, `M2`;
//! the extra device `M3`. Every device is a three-level pointer with ready
//! state 0; outcome index 0 (`+` along the device direction) is recorded in
//! pointer level 1 and outcome index 1 (`−`) in level 2.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{premeasure, Direction, MeasurementModel};
use crate::error::{QrefError, Result};
use crate::lhv::BellCheckResult;
use crate::postulates::{
    joint_probability_of_states, ordered_trace, possible_internal_states, sample_table, Axis,
    EmpiricalTable, JointProbabilityTable,
};
use crate::tensor::{
    reduced_state, tensor, tensor_all, CompositeSpace, PureState, SpectralDecomposition,
    SubsystemId, STATE_TOL,
};

pub const P1: &str = "P1";
pub const P2: &str = "P2";
pub const M1: &str = "M1";
pub const M2: &str = "M2";
pub const M3: &str = "M3";
pub const POINTER_DIM: usize = 3;
/// Angular step of the side-2 sweep used as locality evidence.
pub const LOCALITY_SWEEP_STEP_DEG: f64 = 30.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn qubit(name: &str) -> SubsystemId {
    SubsystemId::qubit(name).expect("static subsystem")
}

fn pointer(name: &str) -> SubsystemId {
    SubsystemId::new(name, POINTER_DIM).expect("static subsystem")
}

fn basis_state(s: &SubsystemId, index: usize) -> Result<PureState> {
    PureState::basis(CompositeSpace::new(vec![s.clone()])?, index)
}

fn check_pair_normalized(a: Complex64, b: Complex64) -> Result<()> {
    let n = a.norm_sqr() + b.norm_sqr();
    if !n.is_finite() || (n - 1.0).abs() > STATE_TOL {
        return Err(QrefError::NotNormalized(n.sqrt()));
    }
    Ok(())
}

/// `c₁|1,↑⟩|2,↓⟩ + c₂|1,↓⟩|2,↑⟩` over `(P1, P2)`.
pub fn build_epr_state(c1: Complex64, c2: Complex64) -> Result<PureState> {
    check_pair_normalized(c1, c2)?;
    let space = CompositeSpace::new(vec![qubit(P1), qubit(P2)])?;
    PureState::new(space, vec![ZERO, c1, c2, ZERO])
}

/// The Schmidt basis of the pair state on one particle: `(↑, ↓)` for `P1`
/// and `(↓, ↑)` for `P2`.
pub fn phi_basis(particle: &str) -> Result<[PureState; 2]> {
    let s = qubit(particle);
    match particle {
        P1 => Ok([basis_state(&s, 0)?, basis_state(&s, 1)?]),
        P2 => Ok([basis_state(&s, 1)?, basis_state(&s, 0)?]),
        other => Err(QrefError::UnknownSubsystem(other.to_string())),
    }
}

/// Singlet coefficients `(1/√2, −1/√2)`.
pub fn singlet_coefficients() -> (Complex64, Complex64) {
    let s = 0.5f64.sqrt();
    (Complex64::new(s, 0.0), Complex64::new(-s, 0.0))
}

// ---------------------------------------------------------------------------
// single spin measurement read by an observer

#[derive(Debug, Clone)]
pub struct ChainReport {
    /// Spectra of `ρ_P`, `ρ_M`, `ρ_O` after the readout.
    pub spectra: Vec<(String, SpectralDecomposition)>,
    /// Joint table over `P ∈ (↑, ↓)`, `M ∈ (m↑, m↓)`, `O ∈ (O↑, O↓)`.
    pub joint: JointProbabilityTable,
    pub prob_m_up: f64,
    pub prob_m_down: f64,
    /// Largest probability of any cell with mismatched labels.
    pub max_cross_term: f64,
    /// Elementwise change of `ρ_P` and `ρ_M` across the readout.
    pub rho_p_change: f64,
    pub rho_m_change: f64,
}

/// Premeasures `α|↑⟩ + β|↓⟩` along z with device `M`, then lets observer
/// `O` read `M`.
pub fn run_single_measurement_chain(alpha: Complex64, beta: Complex64) -> Result<ChainReport> {
    check_pair_normalized(alpha, beta)?;
    let p = qubit("P");
    let m = pointer("M");
    let o = pointer("O");

    let spin = PureState::new(CompositeSpace::new(vec![p.clone()])?, vec![alpha, beta])?;
    let initial = tensor_all(&[&spin, &basis_state(&m, 0)?, &basis_state(&o, 0)?])?;

    let device = MeasurementModel::spin(p.clone(), m.clone(), &Direction::z())?;
    let measured = premeasure(&device, &initial)?;
    let m_up = device.outcome_state(0)?;
    let m_down = device.outcome_state(1)?;
    let observer = MeasurementModel::standard(m, o.clone(), vec![m_up.clone(), m_down.clone()])?;
    let read = premeasure(&observer, &measured)?;

    let rho_p_change =
        reduced_state(&measured, &["P"])?.max_abs_diff(&reduced_state(&read, &["P"])?)?;
    let rho_m_change =
        reduced_state(&measured, &["M"])?.max_abs_diff(&reduced_state(&read, &["M"])?)?;

    let mut spectra = Vec::new();
    for name in ["P", "M", "O"] {
        spectra.push((name.to_string(), possible_internal_states(&read, &[name])?));
    }

    let axes = vec![
        Axis::explicit(&read, vec![basis_state(&p, 0)?, basis_state(&p, 1)?])?,
        Axis::explicit(&read, vec![m_up, m_down])?,
        Axis::explicit(
            &read,
            vec![observer.outcome_state(0)?, observer.outcome_state(1)?],
        )?,
    ];
    let joint = JointProbabilityTable::compute(&read, axes)?;
    let max_cross_term = joint
        .cells()
        .filter(|(idx, _)| !(idx[0] == idx[1] && idx[1] == idx[2]))
        .map(|(_, p)| p)
        .fold(0.0, f64::max);
    let m_marginal = joint.axis_marginal(1)?;

    Ok(ChainReport {
        spectra,
        joint,
        prob_m_up: m_marginal[0],
        prob_m_down: m_marginal[1],
        max_cross_term,
        rho_p_change,
        rho_m_change,
    })
}

// ---------------------------------------------------------------------------
// two-particle correlation experiment

#[derive(Debug, Clone, PartialEq)]
pub struct EprConfig {
    pub c1: Complex64,
    pub c2: Complex64,
    pub direction_a: Direction,
    pub direction_b: Direction,
    pub with_m3: bool,
    pub shots: u64,
    pub seed: u64,
    /// Also evaluate the ordering-dependent values for every `(l, j, k)`.
    pub include_pseudo: bool,
}

impl EprConfig {
    /// Singlet, `a` along +z, `b` at `theta_ab` in the x–z plane.
    pub fn singlet(theta_ab: f64) -> Self {
        let (c1, c2) = singlet_coefficients();
        Self {
            c1,
            c2,
            direction_a: Direction::z(),
            direction_b: Direction::in_xz_plane(theta_ab),
            with_m3: false,
            shots: 0,
            seed: 0,
            include_pseudo: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_pair_normalized(self.c1, self.c2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoEntry {
    pub l: usize,
    pub j: usize,
    pub k: usize,
    /// `π_{P1+M1,l} π_{M1,j} π_{M2,k}`
    pub forward: Complex64,
    /// `π_{M1,j} π_{P1+M1,l} π_{M2,k}`
    pub swapped: Complex64,
}

#[derive(Debug, Clone)]
pub struct EprReport {
    pub config: EprConfig,
    /// Axes `M1`, `M2` and, with the extra device, `M3`.
    pub analytic: JointProbabilityTable,
    pub empirical: Option<EmpiricalTable>,
    /// One distribution per axis of `analytic`.
    pub marginals: Vec<Vec<f64>>,
    /// Max elementwise change of `ρ_{P1+M1}` while `b` sweeps a grid.
    pub locality_deviation: f64,
    /// Change of `ρ_{P1}` caused by the `M3` premeasurement.
    pub m3_disturbance: Option<f64>,
    pub pseudo: Vec<PseudoEntry>,
    pub final_state: PureState,
}

impl EprReport {
    /// The `(M1, M2)` table, summing out `M3` if present.
    pub fn device_pair_table(&self) -> Result<JointProbabilityTable> {
        if self.analytic.axes().len() == 3 {
            self.analytic.sum_over(2)
        } else {
            Ok(self.analytic.clone())
        }
    }

    /// `P(M1 = +, M2 = +)`.
    pub fn plus_plus(&self) -> Result<f64> {
        self.device_pair_table()?.get(&[0, 0])
    }
}

/// The devices of one run.
#[derive(Debug, Clone)]
pub struct EprDevices {
    pub m1: MeasurementModel,
    pub m2: MeasurementModel,
    pub m3: Option<MeasurementModel>,
}

impl EprDevices {
    pub fn spin(a: &Direction, b: &Direction, with_m3: bool) -> Result<Self> {
        let m3 = if with_m3 {
            Some(MeasurementModel::standard(
                qubit(P1),
                pointer(M3),
                phi_basis(P1)?.to_vec(),
            )?)
        } else {
            None
        };
        Ok(Self {
            m1: MeasurementModel::spin(qubit(P1), pointer(M1), a)?,
            m2: MeasurementModel::spin(qubit(P2), pointer(M2), b)?,
            m3,
        })
    }
}

/// The pair state with every device in its ready state, over
/// `P1, P2, M1, M2[, M3]`.
pub fn epr_initial_state(c1: Complex64, c2: Complex64, with_m3: bool) -> Result<PureState> {
    let pair = build_epr_state(c1, c2)?;
    let mut parts = vec![
        pair,
        basis_state(&pointer(M1), 0)?,
        basis_state(&pointer(M2), 0)?,
    ];
    if with_m3 {
        parts.push(basis_state(&pointer(M3), 0)?);
    }
    let refs: Vec<&PureState> = parts.iter().collect();
    tensor_all(&refs)
}

/// Runs `M3` (if any) and then both spin devices on `initial`.
pub fn evolve_epr(initial: &PureState, devices: &EprDevices) -> Result<PureState> {
    let mut state = initial.clone();
    if let Some(m3) = &devices.m3 {
        state = premeasure(m3, &state)?;
    }
    state = premeasure(&devices.m1, &state)?;
    premeasure(&devices.m2, &state)
}

fn outcome_axis(state: &PureState, device: &MeasurementModel) -> Result<Axis> {
    let states = (0..device.outcomes())
        .map(|j| device.outcome_state(j))
        .collect::<Result<Vec<_>>>()?;
    Ok(Axis::explicit(state, states)?.with_label(device.pointer().name()))
}

/// Directions on a `step`-degree grid of polar and azimuthal angles.
pub fn sphere_grid(step_deg: f64) -> Vec<Direction> {
    let n_polar = (180.0 / step_deg).round() as usize;
    let n_az = (360.0 / step_deg).round() as usize;
    let mut out = vec![Direction::z()];
    for i in 1..n_polar {
        for k in 0..n_az {
            out.push(Direction::from_spherical(
                (i as f64 * step_deg).to_radians(),
                (k as f64 * step_deg).to_radians(),
            ));
        }
    }
    out.push(Direction::in_xz_plane(PI));
    out
}

pub fn run_epr(config: &EprConfig) -> Result<EprReport> {
    config.validate()?;
    let initial = epr_initial_state(config.c1, config.c2, config.with_m3)?;
    let devices = EprDevices::spin(&config.direction_a, &config.direction_b, config.with_m3)?;
    let final_state = evolve_epr(&initial, &devices)?;

    let mut axes = vec![
        outcome_axis(&final_state, &devices.m1)?,
        outcome_axis(&final_state, &devices.m2)?,
    ];
    if let Some(m3) = &devices.m3 {
        axes.push(outcome_axis(&final_state, m3)?);
    }
    let analytic = JointProbabilityTable::compute(&final_state, axes)?;
    let marginals = (0..analytic.axes().len())
        .map(|a| analytic.axis_marginal(a))
        .collect::<Result<Vec<_>>>()?;
    let empirical = (config.shots > 0).then(|| sample_table(&analytic, config.shots, config.seed));

    let reference = reduced_state(&final_state, &[P1, M1])?;
    let mut locality_deviation: f64 = 0.0;
    for b in sphere_grid(LOCALITY_SWEEP_STEP_DEG) {
        let swept = EprDevices {
            m2: MeasurementModel::spin(qubit(P2), pointer(M2), &b)?,
            ..devices.clone()
        };
        let rho = reduced_state(&evolve_epr(&initial, &swept)?, &[P1, M1])?;
        locality_deviation = locality_deviation.max(rho.max_abs_diff(&reference)?);
    }

    let m3_disturbance = match &devices.m3 {
        Some(m3) => {
            let before = reduced_state(&initial, &[P1])?;
            let after = reduced_state(&premeasure(m3, &initial)?, &[P1])?;
            Some(before.max_abs_diff(&after)?)
        }
        None => None,
    };

    let mut pseudo = Vec::new();
    if config.include_pseudo && !config.with_m3 {
        for l in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let (forward, swapped) = pseudo_pair(&final_state, &devices, l, j, k)?;
                    pseudo.push(PseudoEntry {
                        l,
                        j,
                        k,
                        forward,
                        swapped,
                    });
                }
            }
        }
    }

    Ok(EprReport {
        config: config.clone(),
        analytic,
        empirical,
        marginals,
        locality_deviation,
        m3_disturbance,
        pseudo,
        final_state,
    })
}

/// The `l`-th possible internal state of `P1+M1` after the measurement:
/// `U(|φ_{P1,l}⟩|m0⟩)`.
pub fn evolved_branch_state(devices: &EprDevices, l: usize) -> Result<PureState> {
    let phi = phi_basis(P1)?;
    let phi_l = phi
        .get(l)
        .ok_or(QrefError::IndexOutOfRange { index: l, len: 2 })?;
    premeasure(&devices.m1, &tensor(phi_l, &devices.m1.ready_state()?)?)
}

fn pseudo_pair(
    final_state: &PureState,
    devices: &EprDevices,
    l: usize,
    j: usize,
    k: usize,
) -> Result<(Complex64, Complex64)> {
    let branch = evolved_branch_state(devices, l)?;
    let m1 = devices.m1.outcome_state(j)?;
    let m2 = devices.m2.outcome_state(k)?;
    Ok((
        ordered_trace(final_state, &[&branch, &m1, &m2])?,
        ordered_trace(final_state, &[&m1, &branch, &m2])?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoDemo {
    pub forward: Complex64,
    pub swapped: Complex64,
    /// `Σ_l` of the forward-ordered value.
    pub forward_sum_over_l: Complex64,
    /// The genuine joint probability `P(M1 = j, M2 = k)`.
    pub device_probability: f64,
    /// `|Σ_l forward − P(M1 = j, M2 = k)|`.
    pub sum_rule_error: f64,
}

/// Evaluates both orderings of the non-disjoint projector product for
/// `P1+M1` (branch `l`), `M1` (outcome `j`) and `M2` (outcome `k`).
pub fn pseudo_probability_demo(
    config: &EprConfig,
    l: usize,
    j: usize,
    k: usize,
) -> Result<PseudoDemo> {
    if config.with_m3 {
        return Err(QrefError::InvalidArgument(
            "pseudo-probabilities are evaluated without the extra device".into(),
        ));
    }
    config.validate()?;
    let initial = epr_initial_state(config.c1, config.c2, false)?;
    let devices = EprDevices::spin(&config.direction_a, &config.direction_b, false)?;
    let final_state = evolve_epr(&initial, &devices)?;
    let (forward, swapped) = pseudo_pair(&final_state, &devices, l, j, k)?;
    let mut sum = ZERO;
    for ll in 0..2 {
        sum += pseudo_pair(&final_state, &devices, ll, j, k)?.0;
    }
    let device_probability = joint_probability_of_states(
        &final_state,
        &[&devices.m1.outcome_state(j)?, &devices.m2.outcome_state(k)?],
    )?;
    Ok(PseudoDemo {
        forward,
        swapped,
        forward_sum_over_l: sum,
        device_probability,
        sum_rule_error: (sum - Complex64::new(device_probability, 0.0)).norm(),
    })
}

// ---------------------------------------------------------------------------
// three-direction Bell check

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellTripleReport {
    /// Polar angles of `a`, `b`, `c` in the x–z plane (radians).
    pub polar_a: f64,
    pub polar_b: f64,
    pub polar_c: f64,
    pub with_m3: bool,
    pub check: BellCheckResult,
}

const ANGLE_TOL: f64 = 1e-9;

/// Places `a`, `b`, `c` in the x–z plane with the given pairwise angles
/// (radians, each in `[0, π]`): `a` on +z, `b` at `θ_ab`, `c` at
/// `θ_ab ± θ_bc`.
pub fn coplanar_triple(theta_ab: f64, theta_bc: f64, theta_ac: f64) -> Result<[f64; 3]> {
    let bad = || {
        QrefError::InconsistentAngles(
            theta_ab.to_degrees(),
            theta_bc.to_degrees(),
            theta_ac.to_degrees(),
        )
    };
    for t in [theta_ab, theta_bc, theta_ac] {
        if !(-ANGLE_TOL..=PI + ANGLE_TOL).contains(&t) {
            return Err(bad());
        }
    }
    let a = Direction::z();
    for c in [theta_ab + theta_bc, theta_ab - theta_bc] {
        if (a.angle_to(&Direction::in_xz_plane(c)) - theta_ac).abs() < ANGLE_TOL {
            return Ok([0.0, theta_ab, c]);
        }
    }
    Err(bad())
}

/// `P(M1 = +, M2 = +)` for the singlet with devices along `a` and `b`.
pub fn singlet_plus_plus(a: &Direction, b: &Direction, with_m3: bool) -> Result<f64> {
    let config = EprConfig {
        direction_a: *a,
        direction_b: *b,
        with_m3,
        ..EprConfig::singlet(0.0)
    };
    plus_plus(&config)
}

fn plus_plus(config: &EprConfig) -> Result<f64> {
    let initial = epr_initial_state(config.c1, config.c2, config.with_m3)?;
    let devices = EprDevices::spin(&config.direction_a, &config.direction_b, config.with_m3)?;
    let state = evolve_epr(&initial, &devices)?;
    joint_probability_of_states(
        &state,
        &[&devices.m1.outcome_state(0)?, &devices.m2.outcome_state(0)?],
    )
}

/// Bell's inequality for the singlet with the three pairwise angles given in
/// radians.
pub fn run_bell_triple(
    theta_ab: f64,
    theta_bc: f64,
    theta_ac: f64,
    with_m3: bool,
) -> Result<BellTripleReport> {
    let [pa, pb, pc] = coplanar_triple(theta_ab, theta_bc, theta_ac)?;
    let (a, b, c) = (
        Direction::in_xz_plane(pa),
        Direction::in_xz_plane(pb),
        Direction::in_xz_plane(pc),
    );
    let check = BellCheckResult::from_probabilities(
        singlet_plus_plus(&a, &b, with_m3)?,
        singlet_plus_plus(&b, &c, with_m3)?,
        singlet_plus_plus(&a, &c, with_m3)?,
    );
    Ok(BellTripleReport {
        polar_a: pa,
        polar_b: pb,
        polar_c: pc,
        with_m3,
        check,
    })
}
