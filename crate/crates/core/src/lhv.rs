//! Local hidden-variable models and Bell-type inequalities.
//!
//! A discrete model is a list of hidden states `λ` with weights `ρ(λ)` and
//! factorized response probabilities `P₁(a+|λ)`, `P₂(b+|λ)`. Correlations are
//! `P(a+, b+) = Σ_λ ρ(λ) P₁(a+|λ) P₂(b+|λ)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{spin_eigenbasis, Direction};
use crate::error::{QrefError, Result};
use crate::tensor::{PureState, SubsystemId};

/// Angular resolution of [`DirectionKey`], in radians.
pub const DIRECTION_QUANTUM: f64 = 1e-9;
/// Slack allowed when deciding whether an inequality holds.
pub const BELL_SLACK: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

/// Direction quantized to multiples of [`DIRECTION_QUANTUM`] in polar and
/// azimuthal angle. At the poles the azimuth is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectionKey {
    polar: i64,
    azimuth: i64,
}

impl DirectionKey {
    pub fn of(d: &Direction) -> Self {
        let polar = (d.polar() / DIRECTION_QUANTUM).round() as i64;
        let pole = (PI / DIRECTION_QUANTUM).round() as i64;
        let azimuth = if polar == 0 || polar == pole {
            0
        } else {
            let k = (d.azimuth() / DIRECTION_QUANTUM).round() as i64;
            if k == -pole {
                pole
            } else {
                k
            }
        };
        Self { polar, azimuth }
    }
}

impl fmt::Display for DirectionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(θ={:.9}, φ={:.9})",
            self.polar as f64 * DIRECTION_QUANTUM,
            self.azimuth as f64 * DIRECTION_QUANTUM
        )
    }
}

type ResponseFn = dyn Fn(&Direction) -> f64 + Send + Sync;

/// Probability of the `+` outcome as a function of the measured direction.
#[derive(Clone)]
pub enum Response {
    Table(HashMap<DirectionKey, f64>),
    Function(Arc<ResponseFn>),
}

impl Response {
    pub fn table<I: IntoIterator<Item = (Direction, f64)>>(entries: I) -> Self {
        Response::Table(
            entries
                .into_iter()
                .map(|(d, p)| (DirectionKey::of(&d), p))
                .collect(),
        )
    }

    pub fn function<F: Fn(&Direction) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Response::Function(Arc::new(f))
    }

    pub fn constant(p: f64) -> Self {
        Self::function(move |_| p)
    }

    /// `P(+|λ)` for direction `d`.
    pub fn probability(&self, d: &Direction) -> Result<f64> {
        let p = match self {
            Response::Table(map) => {
                let key = DirectionKey::of(d);
                *map.get(&key)
                    .ok_or_else(|| QrefError::MissingResponse(key.to_string()))?
            }
            Response::Function(f) => f(d),
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(QrefError::InvalidLhvModel(format!(
                "response probability {p} outside [0, 1]"
            )));
        }
        Ok(p)
    }

    /// The complementary response `1 − P(+|λ)`.
    pub fn complement(&self) -> Response {
        match self {
            Response::Table(map) => {
                Response::Table(map.iter().map(|(k, p)| (*k, 1.0 - p)).collect())
            }
            Response::Function(f) => {
                let f = Arc::clone(f);
                Response::function(move |d| 1.0 - f(d))
            }
        }
    }
}

impl fmt::Debug for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Table(map) => f.debug_tuple("Table").field(&map.len()).finish(),
            Response::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HiddenState {
    pub weight: f64,
    pub response_a: Response,
    pub response_b: Response,
}

impl HiddenState {
    /// Side 2 answers opposite to side 1 along every direction.
    pub fn anticorrelated(weight: f64, response_a: Response) -> Self {
        let response_b = response_a.complement();
        Self {
            weight,
            response_a,
            response_b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LhvModel {
    lambdas: Vec<HiddenState>,
}

impl LhvModel {
    pub fn new(lambdas: Vec<HiddenState>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(QrefError::InvalidLhvModel("no hidden states".into()));
        }
        let mut sum = 0.0;
        for l in &lambdas {
            if l.weight.is_nan() || l.weight < 0.0 {
                return Err(QrefError::InvalidLhvModel(format!(
                    "weight {} is negative",
                    l.weight
                )));
            }
            sum += l.weight;
            for r in [&l.response_a, &l.response_b] {
                if let Response::Table(map) = r {
                    if let Some(p) = map.values().find(|p| !(0.0..=1.0).contains(*p)) {
                        return Err(QrefError::InvalidLhvModel(format!(
                            "response probability {p} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(QrefError::InvalidLhvModel(format!("weights sum to {sum}")));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[HiddenState] {
        &self.lambdas
    }

    /// A mixture of deterministic, strictly anticorrelated hidden states with
    /// random weights. Each state answers `+` on side 1 for a pseudo-random
    /// half of all directions (hashed from its quantized key); side 2 answers
    /// the opposite.
    pub fn random_deterministic<R: Rng + ?Sized>(rng: &mut R, n_lambdas: usize) -> Result<Self> {
        let raw: Vec<f64> = (0..n_lambdas).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let lambdas = raw
            .iter()
            .map(|w| {
                let salt: u64 = rng.random();
                let response = Response::function(move |d| {
                    let k = DirectionKey::of(d);
                    let h = mix(salt ^ mix(k.polar as u64 ^ mix(k.azimuth as u64)));
                    (h & 1) as f64
                });
                HiddenState::anticorrelated(w / total, response)
            })
            .collect();
        Self::new(lambdas)
    }

    /// Convex combination of several models.
    pub fn mixture(parts: &[(f64, &LhvModel)]) -> Result<Self> {
        let lambdas = parts
            .iter()
            .flat_map(|(w, m)| {
                m.lambdas.iter().map(move |l| HiddenState {
                    weight: w * l.weight,
                    ..l.clone()
                })
            })
            .collect();
        Self::new(lambdas)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `P(a+, b+) = Σ_λ ρ(λ) P₁(a+|λ) P₂(b+|λ)`.
pub fn lhv_correlation(model: &LhvModel, a: &Direction, b: &Direction) -> Result<f64> {
    model.lambdas.iter().try_fold(0.0, |acc, l| {
        Ok(acc + l.weight * l.response_a.probability(a)? * l.response_b.probability(b)?)
    })
}

/// Full outcome table `[[P(++), P(+−)], [P(−+), P(−−)]]`.
pub fn lhv_outcome_table(model: &LhvModel, a: &Direction, b: &Direction) -> Result<[[f64; 2]; 2]> {
    let mut t = [[0.0; 2]; 2];
    for l in &model.lambdas {
        let pa = l.response_a.probability(a)?;
        let pb = l.response_b.probability(b)?;
        let sa = [pa, 1.0 - pa];
        let sb = [pb, 1.0 - pb];
        for i in 0..2 {
            for j in 0..2 {
                t[i][j] += l.weight * sa[i] * sb[j];
            }
        }
    }
    Ok(t)
}

/// `E = P(++) + P(−−) − P(+−) − P(−+)`.
pub fn expectation_from_table(t: &[[f64; 2]; 2]) -> f64 {
    t[0][0] + t[1][1] - t[0][1] - t[1][0]
}

pub fn lhv_expectation(model: &LhvModel, a: &Direction, b: &Direction) -> Result<f64> {
    Ok(expectation_from_table(&lhv_outcome_table(model, a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellCheckResult {
    pub p_ab: f64,
    pub p_bc: f64,
    pub p_ac: f64,
    /// `P(a+, b+) + P(b+, c+)`
    pub lhs: f64,
    /// `P(a+, c+)`
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl BellCheckResult {
    pub fn from_probabilities(p_ab: f64, p_bc: f64, p_ac: f64) -> Self {
        let lhs = p_ab + p_bc;
        let margin = lhs - p_ac;
        Self {
            p_ab,
            p_bc,
            p_ac,
            lhs,
            rhs: p_ac,
            margin,
            satisfied: margin >= -BELL_SLACK,
        }
    }
}

/// Checks `P(a+, b+) + P(b+, c+) ≥ P(a+, c+)`.
pub fn bell_check<F>(
    mut correlation: F,
    a: &Direction,
    b: &Direction,
    c: &Direction,
) -> BellCheckResult
where
    F: FnMut(&Direction, &Direction) -> f64,
{
    let p_ab = correlation(a, b);
    let p_bc = correlation(b, c);
    let p_ac = correlation(a, c);
    BellCheckResult::from_probabilities(p_ab, p_bc, p_ac)
}

pub fn bell_check_lhv(
    model: &LhvModel,
    a: &Direction,
    b: &Direction,
    c: &Direction,
) -> Result<BellCheckResult> {
    Ok(BellCheckResult::from_probabilities(
        lhv_correlation(model, a, b)?,
        lhv_correlation(model, b, c)?,
        lhv_correlation(model, a, c)?,
    ))
}

/// Singlet `P(a+, b+) = ½ sin²(θ/2)` for directions at angle `theta`.
pub fn quantum_correlation(theta: f64) -> f64 {
    0.5 * (theta / 2.0).sin().powi(2)
}

/// `S = E(a, b) − E(a, b′) + E(a′, b) + E(a′, b′)`.
pub fn chsh_value<F>(
    mut expectation: F,
    a: &Direction,
    a_prime: &Direction,
    b: &Direction,
    b_prime: &Direction,
) -> f64
where
    F: FnMut(&Direction, &Direction) -> f64,
{
    expectation(a, b) - expectation(a, b_prime)
        + expectation(a_prime, b)
        + expectation(a_prime, b_prime)
}

fn two_qubit_factors(state: &PureState) -> Result<(SubsystemId, SubsystemId)> {
    let f = state.space().factors();
    if f.len() != 2 || f.iter().any(|s| s.dim() != 2) {
        return Err(QrefError::InvalidArgument(format!(
            "expected a two-qubit state, got {}",
            state.space()
        )));
    }
    Ok((f[0].clone(), f[1].clone()))
}

/// Projective outcome table `[[P(++), P(+−)], [P(−+), P(−−)]]` for spin
/// measurements along `a` on the first qubit and `b` on the second.
pub fn two_qubit_outcome_table(
    state: &PureState,
    a: &Direction,
    b: &Direction,
) -> Result<[[f64; 2]; 2]> {
    let (p1, p2) = two_qubit_factors(state)?;
    let (a_plus, a_minus) = spin_eigenbasis(a, &p1)?;
    let (b_plus, b_minus) = spin_eigenbasis(b, &p2)?;
    let sa = [a_plus, a_minus];
    let sb = [b_plus, b_minus];
    let mut t = [[0.0; 2]; 2];
    for (i, x) in sa.iter().enumerate() {
        for (j, y) in sb.iter().enumerate() {
            t[i][j] = x.tensor(y)?.inner(state)?.norm_sqr();
        }
    }
    Ok(t)
}

pub fn two_qubit_expectation(state: &PureState, a: &Direction, b: &Direction) -> Result<f64> {
    Ok(expectation_from_table(&two_qubit_outcome_table(
        state, a, b,
    )?))
}

/// Result of a coplanar CHSH grid search. Angles are polar angles in the
/// x–z plane, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshScan {
    pub max_abs_s: f64,
    pub s: f64,
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub grid_points: usize,
    pub resolution: f64,
}

/// Maximizes `|S|` over all four settings on the grid `k·resolution`,
/// `0 ≤ k·resolution < 2π`. Ties resolve to the lexicographically lowest
/// `(a, a′, b, b′)` index tuple.
pub fn chsh_scan(state: &PureState, resolution: f64) -> Result<ChshScan> {
    if !resolution.is_finite() || resolution <= 0.0 {
        return Err(QrefError::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    two_qubit_factors(state)?;
    let n = ((2.0 * PI / resolution) - 1e-9).ceil().max(1.0) as usize;
    let angles: Vec<f64> = (0..n).map(|k| k as f64 * resolution).collect();
    let dirs: Vec<[f64; 3]> = angles
        .iter()
        .map(|&t| Direction::in_xz_plane(t).components())
        .collect();
    // E(a, b) is bilinear in a and b: E = aᵀ T b with T_kl = E(e_k, e_l).
    let axes = [
        Direction::new(1.0, 0.0, 0.0)?,
        Direction::new(0.0, 1.0, 0.0)?,
        Direction::z(),
    ];
    let mut t = [[0.0; 3]; 3];
    for (k, ek) in axes.iter().enumerate() {
        for (l, el) in axes.iter().enumerate() {
            t[k][l] = two_qubit_expectation(state, ek, el)?;
        }
    }
    let mut e = vec![0.0; n * n];
    for (i, a) in dirs.iter().enumerate() {
        let ta: Vec<f64> = (0..3)
            .map(|l| (0..3).map(|k| a[k] * t[k][l]).sum())
            .collect();
        for (j, b) in dirs.iter().enumerate() {
            e[i * n + j] = ta[0] * b[0] + ta[1] * b[1] + ta[2] * b[2];
        }
    }

    // S = [E(a,b) + E(a′,b)] + [E(a′,b′) − E(a,b′)] separates in b and b′.
    let mut best = (f64::NEG_INFINITY, 0.0, [0usize; 4]);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    for i in 0..n {
        for i2 in 0..n {
            for j in 0..n {
                f[j] = e[i * n + j] + e[i2 * n + j];
                g[j] = e[i2 * n + j] - e[i * n + j];
            }
            let (fmax, fmin) = extremes(&f);
            let (gmax, gmin) = extremes(&g);
            let hi = f[fmax] + g[gmax];
            let lo = f[fmin] + g[gmin];
            let mut cands = [
                (hi.abs(), hi, [i, i2, fmax, gmax]),
                (lo.abs(), lo, [i, i2, fmin, gmin]),
            ];
            cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.2.cmp(&y.2)));
            let c = cands[0];
            if c.0 > best.0 {
                best = c;
            }
        }
    }
    let [i, i2, j, j2] = best.2;
    Ok(ChshScan {
        max_abs_s: best.0,
        s: best.1,
        a: angles[i],
        a_prime: angles[i2],
        b: angles[j],
        b_prime: angles[j2],
        grid_points: n,
        resolution,
    })
}

/// Indices of the first maximum and first minimum.
fn extremes(v: &[f64]) -> (usize, usize) {
    let mut hi = 0;
    let mut lo = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[hi] {
            hi = k;
        }
        if *x < v[lo] {
            lo = k;
        }
    }
    (hi, lo)
}

/// Uniformly distributed direction on the unit sphere.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(-PI..PI);
    Direction::from_spherical(z.acos(), phi)
}

/// Summary of [`lhv_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LhvSweep {
    pub trials: usize,
    pub triples: usize,
    pub max_lambdas: usize,
    pub seed: u64,
    pub checks: usize,
    pub bell_violations: usize,
    pub chsh_violations: usize,
    pub min_bell_margin: f64,
    pub max_abs_chsh: f64,
}

/// Draws `trials` random deterministic models (1 to `max_lambdas` hidden
/// states each) and tests each against `triples` random direction triples:
/// Bell's inequality on `(a, b, c)` and CHSH on `(a, c; b, d)` with a fourth
/// random direction `d`. Trial `t` uses ChaCha8 stream `t` of `seed`.
pub fn lhv_sweep(trials: usize, triples: usize, max_lambdas: usize, seed: u64) -> Result<LhvSweep> {
    if trials == 0 || triples == 0 || max_lambdas == 0 {
        return Err(QrefError::InvalidArgument(
            "trials, triples and hidden-state count must be positive".into(),
        ));
    }
    let mut out = LhvSweep {
        trials,
        triples,
        max_lambdas,
        seed,
        checks: 0,
        bell_violations: 0,
        chsh_violations: 0,
        min_bell_margin: f64::INFINITY,
        max_abs_chsh: 0.0,
    };
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let n = rng.random_range(1..=max_lambdas);
        let model = LhvModel::random_deterministic(&mut rng, n)?;
        for _ in 0..triples {
            let [a, b, c, d] = std::array::from_fn(|_| random_direction(&mut rng));
            let check = bell_check_lhv(&model, &a, &b, &c)?;
            out.min_bell_margin = out.min_bell_margin.min(check.margin);
            out.bell_violations += usize::from(!check.satisfied);
            let mut failed = None;
            let s = chsh_value(
                |x, y| {
                    lhv_expectation(&model, x, y).unwrap_or_else(|e| {
                        failed = Some(e);
                        0.0
                    })
                },
                &a,
                &c,
                &b,
                &d,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            out.max_abs_chsh = out.max_abs_chsh.max(s.abs());
            out.chsh_violations += usize::from(s.abs() > 2.0 + BELL_SLACK);
            out.checks += 1;
        }
    }
    Ok(out)
}
