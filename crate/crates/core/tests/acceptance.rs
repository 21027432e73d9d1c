//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any failed.

mod common;

use std::f64::consts::{PI, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{c, random_amplitudes, spherical, Pair};
use num_complex::Complex64;
use qrefsim::dynamics::{premeasure, Direction, MeasurementModel};
use qrefsim::lhv::{
    bell_check_lhv, chsh_scan, chsh_value, lhv_expectation, random_direction, LhvModel,
};
use qrefsim::postulates::{
    commutator_norm, sample_table, Axis, DegeneracyPolicy, JointProbabilityTable,
};
use qrefsim::scenarios::{
    build_epr_state, epr_initial_state, evolve_epr, pseudo_probability_demo, run_bell_triple,
    run_epr, run_single_measurement_chain, singlet_plus_plus, sphere_grid, EprConfig, EprDevices,
    M1, M2, P1, P2, POINTER_DIM,
};
use qrefsim::{reduced_state, CompositeSpace, PureState, SubsystemId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dir(n: [f64; 3]) -> Direction {
    Direction::normalized(n[0], n[1], n[2]).unwrap()
}

fn pair_config(pair: &Pair, with_m3: bool) -> EprConfig {
    EprConfig {
        c1: pair.coeffs[0],
        c2: pair.coeffs[1],
        direction_a: dir(pair.a),
        direction_b: dir(pair.b),
        with_m3,
        ..EprConfig::singlet(0.0)
    }
}

fn singlet_pair(a: [f64; 3], b: [f64; 3]) -> Pair {
    let s = 0.5f64.sqrt();
    Pair {
        coeffs: [c(s, 0.0), c(-s, 0.0)],
        a,
        b,
    }
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for step in 0..=72 {
        let theta = (5.0 * step as f64).to_radians();
        let p = singlet_plus_plus(&Direction::z(), &Direction::in_xz_plane(theta), false)
            .map_err(|e| e.to_string())?;
        let expected = 0.5 * (theta / 2.0).sin().powi(2);
        worst = worst.max((p - expected).abs());
    }
    ensure(
        worst <= 1e-10,
        format!("max deviation {worst:e} over the 5° grid"),
    )?;
    let p45 = singlet_plus_plus(&Direction::z(), &Direction::in_xz_plane(PI / 4.0), false)
        .map_err(|e| e.to_string())?;
    let target = 0.25 - SQRT_2 / 8.0;
    ensure(
        (p45 - target).abs() <= 1e-10 && (p45 - 0.0732233).abs() < 5e-8,
        format!("P(++) at 45° is {p45}, expected {target}"),
    )?;
    Ok(format!("max deviation {worst:.2e}; P(++)(45°) = {p45:.10}"))
}

fn criterion_2() -> Outcome {
    let r = run_bell_triple(PI / 4.0, PI / 4.0, PI / 2.0, false).map_err(|e| e.to_string())?;
    let ch = r.check;
    let summary = format!(
        "lhs = {:.10}, rhs = {:.10}, margin = {:.10}, satisfied = {}",
        ch.lhs, ch.rhs, ch.margin, ch.satisfied
    );
    ensure(
        (ch.lhs - (0.5 - SQRT_2 / 4.0)).abs() <= 1e-9,
        format!("lhs off: {summary}"),
    )?;
    ensure(!ch.satisfied, format!("expected a violation: {summary}"))?;
    ensure(
        (ch.rhs - 0.5).abs() <= 1e-9,
        format!("expected rhs = 0.5: {summary}"),
    )?;
    ensure(
        (ch.margin + 0.3535534).abs() <= 1e-7 && (ch.margin + SQRT_2 / 4.0).abs() <= 1e-9,
        format!("expected margin −0.3535534: {summary}"),
    )?;
    Ok(summary)
}

fn criterion_3() -> Outcome {
    let r = run_bell_triple(PI / 4.0, PI / 4.0, PI / 2.0, true).map_err(|e| e.to_string())?;
    ensure(
        r.check.satisfied,
        format!("Bell check with M3 not satisfied: {:?}", r.check),
    )?;

    let pairs = vec![
        singlet_pair(spherical(0.0, 0.0), spherical(PI / 4.0, 0.0)),
        singlet_pair(spherical(PI / 4.0, 0.0), spherical(PI / 2.0, 0.0)),
        singlet_pair(spherical(0.0, 0.0), spherical(PI / 2.0, 0.0)),
        Pair {
            coeffs: [c(0.6, 0.0), Complex64::from_polar(0.8, 0.7)],
            a: spherical(0.9, 0.4),
            b: spherical(2.1, -1.1),
        },
    ];
    let mut worst_pair: f64 = 0.0;
    let mut worst_triple: f64 = 0.0;
    for pair in &pairs {
        let report = run_epr(&pair_config(pair, true)).map_err(|e| e.to_string())?;
        let two = report.device_pair_table().map_err(|e| e.to_string())?;
        for j in 0..2 {
            for k in 0..2 {
                worst_pair =
                    worst_pair.max((two.get(&[j, k]).unwrap() - pair.mixed_joint(j, k)).abs());
                for l in 0..2 {
                    let p = report.analytic.get(&[j, k, l]).unwrap();
                    worst_triple = worst_triple.max((p - pair.recorded_joint(l, j, k)).abs());
                }
            }
        }
    }
    ensure(
        worst_pair <= 1e-10,
        format!("(M1, M2) table deviates by {worst_pair:e}"),
    )?;
    ensure(
        worst_triple <= 1e-10,
        format!("(M3, M1, M2) table deviates by {worst_triple:e}"),
    )?;
    Ok(format!(
        "satisfied, margin {:.6}; pair table dev {worst_pair:.1e}, triple table dev {worst_triple:.1e}",
        r.check.margin
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut runs = 0usize;
    for with_m3 in [false, true] {
        for coeffs in [
            (c(0.5f64.sqrt(), 0.0), c(-(0.5f64.sqrt()), 0.0)),
            (c(0.6, 0.0), Complex64::from_polar(0.8, 1.3)),
        ] {
            let initial =
                epr_initial_state(coeffs.0, coeffs.1, with_m3).map_err(|e| e.to_string())?;
            let a = Direction::from_spherical(0.7, 0.2);
            let base = EprDevices::spin(&a, &Direction::z(), with_m3).map_err(|e| e.to_string())?;
            // side 2 never interacts
            let mut untouched = initial.clone();
            if let Some(m3) = &base.m3 {
                untouched = premeasure(m3, &untouched).unwrap();
            }
            untouched = premeasure(&base.m1, &untouched).unwrap();
            let reference = reduced_state(&untouched, &[P1, M1]).unwrap();

            let mut side2: Vec<MeasurementModel> = sphere_grid(10.0)
                .iter()
                .map(|b| {
                    MeasurementModel::spin(
                        SubsystemId::qubit(P2).unwrap(),
                        SubsystemId::new(M2, POINTER_DIM).unwrap(),
                        b,
                    )
                    .unwrap()
                })
                .collect();
            // arbitrary orthonormal bases, not tied to any spin direction
            for _ in 0..50 {
                let v = random_amplitudes(&mut rng, 2);
                let space = CompositeSpace::new(vec![SubsystemId::qubit(P2).unwrap()]).unwrap();
                let e0 = PureState::new(space.clone(), v.clone()).unwrap();
                let e1 = PureState::new(space, vec![-v[1].conj(), v[0].conj()]).unwrap();
                side2.push(
                    MeasurementModel::standard(
                        SubsystemId::qubit(P2).unwrap(),
                        SubsystemId::new(M2, POINTER_DIM).unwrap(),
                        vec![e0, e1],
                    )
                    .unwrap(),
                );
            }
            for m2 in side2 {
                let devices = EprDevices { m2, ..base.clone() };
                let rho =
                    reduced_state(&evolve_epr(&initial, &devices).unwrap(), &[P1, M1]).unwrap();
                worst = worst.max(rho.max_abs_diff(&reference).unwrap());
                runs += 1;
            }
        }
    }
    ensure(worst <= 1e-10, format!("ρ(P1+M1) moved by {worst:e}"))?;
    Ok(format!("{runs} side-2 devices, max deviation {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let pair = Pair {
        coeffs: [c(0.6, 0.0), Complex64::from_polar(0.8, 0.7)],
        a: spherical(0.9, 0.4),
        b: spherical(2.1, -1.1),
    };
    let config = pair_config(&pair, false);
    let mut min_im = f64::INFINITY;
    let (mut conj_dev, mut sum_dev, mut oracle_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for l in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let d = pseudo_probability_demo(&config, l, j, k).map_err(|e| e.to_string())?;
                min_im = min_im.min(d.forward.im.abs());
                conj_dev = conj_dev.max((d.swapped - d.forward.conj()).norm());
                sum_dev =
                    sum_dev.max((d.forward_sum_over_l - c(pair.entangled_joint(j, k), 0.0)).norm());
                oracle_dev = oracle_dev
                    .max((d.forward - pair.forward_pseudo(l, j, k)).norm())
                    .max((d.swapped - pair.swapped_pseudo(l, j, k)).norm());
            }
        }
    }
    ensure(min_im > 1e-3, format!("smallest |Im| is {min_im:e}"))?;
    ensure(
        conj_dev <= 1e-12,
        format!("swapped ordering differs from the conjugate by {conj_dev:e}"),
    )?;
    ensure(
        sum_dev <= 1e-10,
        format!("sum over l deviates from the device correlation by {sum_dev:e}"),
    )?;
    ensure(
        oracle_dev <= 1e-10,
        format!("closed form deviates by {oracle_dev:e}"),
    )?;
    Ok(format!(
        "min |Im| {min_im:.4}, conj dev {conj_dev:.1e}, sum rule dev {sum_dev:.1e}, closed form dev {oracle_dev:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut bell_violations, mut chsh_violations) = (0usize, 0usize);
    let (mut min_margin, mut max_s) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=16);
        let model = LhvModel::random_deterministic(&mut rng, n).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let (a, b, cc, d) = (
                random_direction(&mut rng),
                random_direction(&mut rng),
                random_direction(&mut rng),
                random_direction(&mut rng),
            );
            let check = bell_check_lhv(&model, &a, &b, &cc).map_err(|e| e.to_string())?;
            min_margin = min_margin.min(check.margin);
            if !check.satisfied {
                bell_violations += 1;
            }
            let s = chsh_value(
                |x, y| lhv_expectation(&model, x, y).unwrap(),
                &a,
                &cc,
                &b,
                &d,
            );
            max_s = max_s.max(s.abs());
            if s.abs() > 2.0 + 1e-12 {
                chsh_violations += 1;
            }
        }
    }
    ensure(
        bell_violations == 0,
        format!("{bell_violations} Bell violations"),
    )?;
    ensure(
        chsh_violations == 0,
        format!("{chsh_violations} CHSH violations"),
    )?;
    Ok(format!(
        "100000 checks; min Bell margin {min_margin:.3e}, max |S| {max_s:.12}"
    ))
}

fn criterion_7() -> Outcome {
    let s = 0.5f64.sqrt();
    let singlet = build_epr_state(c(s, 0.0), c(-s, 0.0)).map_err(|e| e.to_string())?;
    let scan = chsh_scan(&singlet, 1f64.to_radians()).map_err(|e| e.to_string())?;
    // closed form at the reported settings
    let e = |x: f64, y: f64| -(x - y).cos();
    let s_closed = e(scan.a, scan.b) - e(scan.a, scan.b_prime)
        + e(scan.a_prime, scan.b)
        + e(scan.a_prime, scan.b_prime);
    ensure(
        (scan.s - s_closed).abs() <= 1e-10,
        format!("scan S {} vs closed form {s_closed}", scan.s),
    )?;
    ensure(
        (scan.max_abs_s - 2.0 * SQRT_2).abs() <= 5e-4,
        format!("singlet max |S| = {}", scan.max_abs_s),
    )?;
    let product = build_epr_state(c(1.0, 0.0), c(0.0, 0.0)).map_err(|e| e.to_string())?;
    let pscan = chsh_scan(&product, 1f64.to_radians()).map_err(|e| e.to_string())?;
    ensure(
        pscan.max_abs_s <= 2.0 + 1e-9,
        format!("product max |S| = {}", pscan.max_abs_s),
    )?;
    Ok(format!(
        "singlet max |S| {:.10}, product max |S| {:.10}",
        scan.max_abs_s, pscan.max_abs_s
    ))
}

fn random_state(rng: &mut ChaCha8Rng, n_factors: usize) -> PureState {
    let names = ["A", "B", "C", "D"];
    let factors: Vec<SubsystemId> = (0..n_factors)
        .map(|i| SubsystemId::new(names[i], rng.random_range(2..=3)).unwrap())
        .collect();
    let space = CompositeSpace::new(factors).unwrap();
    let amps = random_amplitudes(rng, space.dim());
    PureState::new(space, amps).unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut sum_dev, mut marg_dev, mut comm): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut tables = 0usize;
    for n in [3usize, 4] {
        for _ in 0..40 {
            let psi = random_state(&mut rng, n);
            let names: Vec<String> = psi.space().names().iter().map(|s| s.to_string()).collect();
            // singletons, plus one grouping of the first two factors
            let mut groupings: Vec<Vec<Vec<String>>> =
                vec![names.iter().map(|s| vec![s.clone()]).collect()];
            let mut grouped = vec![vec![names[0].clone(), names[1].clone()]];
            grouped.extend(names[2..].iter().map(|s| vec![s.clone()]));
            groupings.push(grouped);
            for groups in groupings {
                let axes: Vec<Axis> = groups
                    .iter()
                    .map(|g| Axis::possible_states(&psi, g, DegeneracyPolicy::Strict))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                for (g, axis) in groups.iter().zip(&axes) {
                    let rho = reduced_state(&psi, g).unwrap();
                    for st in &axis.states {
                        comm = comm.max(commutator_norm(&rho, st).unwrap());
                    }
                }
                let table = JointProbabilityTable::compute(&psi, axes.clone())
                    .map_err(|e| e.to_string())?;
                sum_dev = sum_dev.max((table.total() - 1.0).abs());
                tables += 1;
                for drop in 0..axes.len() {
                    let summed = table.sum_over(drop).unwrap();
                    let mut rest = axes.clone();
                    rest.remove(drop);
                    let direct = JointProbabilityTable::compute(&psi, rest).unwrap();
                    for (x, y) in summed.probabilities().iter().zip(direct.probabilities()) {
                        marg_dev = marg_dev.max((x - y).abs());
                    }
                }
            }
        }
    }
    ensure(sum_dev <= 1e-9, format!("table sum off by {sum_dev:e}"))?;
    ensure(
        marg_dev <= 1e-10,
        format!("marginals inconsistent by {marg_dev:e}"),
    )?;
    ensure(comm <= 1e-9, format!("commutator norm {comm:e}"))?;
    Ok(format!("{tables} tables; sum dev {sum_dev:.1e}, marginal dev {marg_dev:.1e}, commutator {comm:.1e}"))
}

fn criterion_9() -> Outcome {
    let shots = 100_000u64;
    let configs = vec![
        EprConfig {
            shots,
            seed: 2024,
            ..EprConfig::singlet(PI / 3.0)
        },
        EprConfig {
            c1: c(0.6, 0.0),
            c2: Complex64::from_polar(0.8, 0.7),
            direction_a: Direction::from_spherical(0.9, 0.4),
            direction_b: Direction::from_spherical(2.1, -1.1),
            with_m3: true,
            shots,
            seed: 7,
            ..EprConfig::singlet(0.0)
        },
    ];
    let mut worst_sigma: f64 = 0.0;
    for config in &configs {
        let report = run_epr(config).map_err(|e| e.to_string())?;
        let emp = report.empirical.as_ref().ok_or("no samples")?;
        ensure(
            emp.counts.iter().sum::<u64>() == shots,
            "counts do not add up to shots",
        )?;
        for (p, f) in report
            .analytic
            .probabilities()
            .iter()
            .zip(emp.frequencies())
        {
            let sigma = (p * (1.0 - p) / shots as f64).sqrt();
            if sigma == 0.0 {
                ensure(
                    f == *p,
                    format!("impossible cell sampled: p = {p}, f = {f}"),
                )?;
            } else {
                worst_sigma = worst_sigma.max((f - p).abs() / sigma);
            }
        }
        let again = sample_table(&report.analytic, shots, config.seed);
        let text = |counts: &[u64]| {
            counts
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        ensure(
            text(&again.counts).into_bytes() == text(&emp.counts).into_bytes(),
            "fixed-seed rerun differs",
        )?;
        let other = sample_table(&report.analytic, shots, config.seed + 1);
        ensure(
            other.counts != emp.counts,
            "different seeds gave identical counts",
        )?;
    }
    ensure(
        worst_sigma <= 5.0,
        format!("worst cell at {worst_sigma:.2}σ"),
    )?;
    Ok(format!(
        "worst cell {worst_sigma:.2}σ; reruns byte-identical"
    ))
}

fn criterion_10() -> Outcome {
    let inputs = [
        (c(0.6, 0.0), c(0.0, 0.8)),
        (c(0.3, 0.4), c(0.0, -(0.75f64.sqrt()))),
        (
            Complex64::from_polar(0.9, 2.0),
            Complex64::from_polar((1.0f64 - 0.81).sqrt(), -0.3),
        ),
        (c(1.0, 0.0), c(0.0, 0.0)),
    ];
    let (mut p_dev, mut cross, mut change): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (alpha, beta) in inputs {
        let r = run_single_measurement_chain(alpha, beta).map_err(|e| e.to_string())?;
        p_dev = p_dev.max((r.prob_m_up - alpha.norm_sqr()).abs());
        cross = cross.max(r.max_cross_term);
        change = change.max(r.rho_p_change).max(r.rho_m_change);
    }
    ensure(p_dev <= 1e-10, format!("P(m↑) off by {p_dev:e}"))?;
    ensure(cross == 0.0, format!("cross term {cross:e}"))?;
    ensure(
        change <= 1e-10,
        format!("readout changed reduced states by {change:e}"),
    )?;
    Ok(format!(
        "P(m↑) dev {p_dev:.1e}, max cross term {cross:e}, readout change {change:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("quantum correlation reproduction", criterion_1),
        ("Bell violation without M3", criterion_2),
        ("M3 restores Bell's inequality", criterion_3),
        ("locality of P1+M1", criterion_4),
        ("pseudo-probabilities", criterion_5),
        ("LHV property suite", criterion_6),
        ("CHSH scan", criterion_7),
        ("postulate engine properties", criterion_8),
        ("Monte Carlo sampling", criterion_9),
        ("single-measurement chain", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {:>2} ({name}): {detail} [{secs:.2}s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {:>2} ({name}): {detail} [{secs:.2}s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
