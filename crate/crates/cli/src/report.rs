//! Serializable reports. Outcome and branch labels are 1-based: 1 is `+`
//! along the device direction and 2 is `−`.

use std::fmt::Write;

use num_complex::Complex64;
use qrefsim::lhv::{ChshScan, LhvSweep};
use qrefsim::scenarios::{BellTripleReport, EprReport};
use serde::Serialize;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub trait Report: Serialize {
    fn csv(&self) -> String;

    fn json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Serialize)]
pub struct EprConfigJson {
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub direction_a: [f64; 3],
    pub direction_b: [f64; 3],
    pub with_m3: bool,
    pub shots: u64,
    pub seed: u64,
    pub include_pseudo: bool,
}

#[derive(Debug, Serialize)]
pub struct CellJson {
    pub outcome: Vec<usize>,
    pub analytic_p: f64,
    pub empirical_count: Option<u64>,
    pub empirical_freq: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PseudoJson {
    pub l: usize,
    pub j: usize,
    pub k: usize,
    pub forward: [f64; 2],
    pub swapped: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct EprJson {
    pub command: &'static str,
    pub config: EprConfigJson,
    pub axes: Vec<String>,
    pub cells: Vec<CellJson>,
    pub marginals: Vec<Vec<f64>>,
    pub locality_deviation: f64,
    pub m3_disturbance: Option<f64>,
    pub pseudo: Vec<PseudoJson>,
}

impl EprJson {
    pub fn from_report(r: &EprReport) -> Self {
        let c = &r.config;
        let freqs = r.empirical.as_ref().map(|e| e.frequencies());
        let cells = r
            .analytic
            .cells()
            .enumerate()
            .map(|(flat, (idx, p))| CellJson {
                outcome: idx.iter().map(|i| i + 1).collect(),
                analytic_p: p,
                empirical_count: r.empirical.as_ref().map(|e| e.counts[flat]),
                empirical_freq: freqs.as_ref().map(|f| f[flat]),
            })
            .collect();
        Self {
            command: "epr",
            config: EprConfigJson {
                c1: pair(c.c1),
                c2: pair(c.c2),
                direction_a: c.direction_a.components(),
                direction_b: c.direction_b.components(),
                with_m3: c.with_m3,
                shots: c.shots,
                seed: c.seed,
                include_pseudo: c.include_pseudo,
            },
            axes: r.analytic.axes().iter().map(|a| a.label.clone()).collect(),
            cells,
            marginals: r.marginals.clone(),
            locality_deviation: r.locality_deviation,
            m3_disturbance: r.m3_disturbance,
            pseudo: r
                .pseudo
                .iter()
                .map(|e| PseudoJson {
                    l: e.l + 1,
                    j: e.j + 1,
                    k: e.k + 1,
                    forward: pair(e.forward),
                    swapped: pair(e.swapped),
                })
                .collect(),
        }
    }
}

impl Report for EprJson {
    fn csv(&self) -> String {
        let mut out = String::new();
        for a in &self.axes {
            let _ = write!(out, "{}_outcome,", a.to_lowercase());
        }
        out.push_str("analytic_p,empirical_freq\n");
        for cell in &self.cells {
            for o in &cell.outcome {
                let _ = write!(out, "{o},");
            }
            let freq = cell.empirical_freq.map(num).unwrap_or_default();
            let _ = writeln!(out, "{},{freq}", num(cell.analytic_p));
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct BellReport {
    pub command: &'static str,
    pub angles_deg: [f64; 3],
    pub with_m3: bool,
    /// Polar angles of a, b, c in the x–z plane.
    pub directions_deg: [f64; 3],
    pub p_ab: f64,
    pub p_bc: f64,
    pub p_ac: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl BellReport {
    pub fn new(angles_deg: [f64; 3], r: &BellTripleReport) -> Self {
        Self {
            command: "bell",
            angles_deg,
            with_m3: r.with_m3,
            directions_deg: [
                r.polar_a.to_degrees(),
                r.polar_b.to_degrees(),
                r.polar_c.to_degrees(),
            ],
            p_ab: r.check.p_ab,
            p_bc: r.check.p_bc,
            p_ac: r.check.p_ac,
            lhs: r.check.lhs,
            rhs: r.check.rhs,
            margin: r.check.margin,
            satisfied: r.check.satisfied,
        }
    }
}

impl Report for BellReport {
    fn csv(&self) -> String {
        let [ab, bc, ac] = self.angles_deg;
        format!(
            "theta_ab_deg,theta_bc_deg,theta_ac_deg,with_m3,p_ab,p_bc,p_ac,lhs,rhs,margin,satisfied\n{},{},{},{},{},{},{},{},{},{},{}\n",
            num(ab),
            num(bc),
            num(ac),
            self.with_m3,
            num(self.p_ab),
            num(self.p_bc),
            num(self.p_ac),
            num(self.lhs),
            num(self.rhs),
            num(self.margin),
            self.satisfied
        )
    }
}

#[derive(Debug, Serialize)]
pub struct ChshReport {
    pub command: &'static str,
    pub state: &'static str,
    pub resolution_deg: f64,
    pub grid_points: usize,
    pub max_abs_s: f64,
    pub s: f64,
    pub a_deg: f64,
    pub a_prime_deg: f64,
    pub b_deg: f64,
    pub b_prime_deg: f64,
}

impl ChshReport {
    pub fn new(state: &'static str, resolution_deg: f64, scan: &ChshScan) -> Self {
        Self {
            command: "chsh-scan",
            state,
            resolution_deg,
            grid_points: scan.grid_points,
            max_abs_s: scan.max_abs_s,
            s: scan.s,
            a_deg: scan.a.to_degrees(),
            a_prime_deg: scan.a_prime.to_degrees(),
            b_deg: scan.b.to_degrees(),
            b_prime_deg: scan.b_prime.to_degrees(),
        }
    }
}

impl Report for ChshReport {
    fn csv(&self) -> String {
        format!(
            "state,resolution_deg,grid_points,max_abs_s,s,a_deg,a_prime_deg,b_deg,b_prime_deg\n{},{},{},{},{},{},{},{},{}\n",
            self.state,
            num(self.resolution_deg),
            self.grid_points,
            num(self.max_abs_s),
            num(self.s),
            num(self.a_deg),
            num(self.a_prime_deg),
            num(self.b_deg),
            num(self.b_prime_deg)
        )
    }
}

#[derive(Debug, Serialize)]
pub struct LhvReport {
    pub command: &'static str,
    pub trials: usize,
    pub triples: usize,
    pub max_lambdas: usize,
    pub seed: u64,
    pub checks: usize,
    pub bell_violations: usize,
    pub chsh_violations: usize,
    pub min_bell_margin: f64,
    pub max_abs_chsh: f64,
    pub summary: String,
}

impl LhvReport {
    pub fn new(s: &LhvSweep) -> Self {
        let summary = if s.bell_violations + s.chsh_violations == 0 {
            format!(
                "all {} checks satisfied Bell's inequality and |S| <= 2",
                s.checks
            )
        } else {
            format!(
                "{} Bell and {} CHSH violations in {} checks",
                s.bell_violations, s.chsh_violations, s.checks
            )
        };
        Self {
            command: "lhv-check",
            trials: s.trials,
            triples: s.triples,
            max_lambdas: s.max_lambdas,
            seed: s.seed,
            checks: s.checks,
            bell_violations: s.bell_violations,
            chsh_violations: s.chsh_violations,
            min_bell_margin: s.min_bell_margin,
            max_abs_chsh: s.max_abs_chsh,
            summary,
        }
    }
}

impl Report for LhvReport {
    fn csv(&self) -> String {
        format!(
            "trials,triples,max_lambdas,seed,checks,bell_violations,chsh_violations,min_bell_margin,max_abs_chsh,summary\n{},{},{},{},{},{},{},{},{},{}\n",
            self.trials,
            self.triples,
            self.max_lambdas,
            self.seed,
            self.checks,
            self.bell_violations,
            self.chsh_violations,
            num(self.min_bell_margin),
            num(self.max_abs_chsh),
            self.summary
        )
    }
}
