//! Closed-form references for the pair experiment, written directly in terms
//! of two-component spinors and overlaps. Nothing here goes through the
//! library's state or operator machinery.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

pub type C = Complex64;
pub type Spinor = [C; 2];

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn normalize(v: Spinor) -> Spinor {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Eigenvectors of `n·σ` for eigenvalue `+1` (index 0) and `−1` (index 1),
/// from the null space of `n·σ − λ`.
pub fn spin_basis(n: [f64; 3]) -> [Spinor; 2] {
    let [x, y, z] = n;
    let eig = |lambda: f64| {
        let from_row1 = [c(x, -y), c(lambda - z, 0.0)];
        let from_row2 = [c(z + lambda, 0.0), c(x, y)];
        let norm = |v: &Spinor| v[0].norm_sqr() + v[1].norm_sqr();
        if norm(&from_row1) >= norm(&from_row2) {
            normalize(from_row1)
        } else {
            normalize(from_row2)
        }
    };
    [eig(1.0), eig(-1.0)]
}

pub fn up() -> Spinor {
    [c(1.0, 0.0), c(0.0, 0.0)]
}

pub fn down() -> Spinor {
    [c(0.0, 0.0), c(1.0, 0.0)]
}

/// Schmidt basis of the pair on particle 1 and 2.
pub fn phi1(l: usize) -> Spinor {
    [up(), down()][l]
}

pub fn phi2(l: usize) -> Spinor {
    [down(), up()][l]
}

/// `⟨u|v⟩`
pub fn braket(u: &Spinor, v: &Spinor) -> C {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

pub struct Pair {
    pub coeffs: [C; 2],
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Pair {
    fn xi_a(&self, j: usize) -> Spinor {
        spin_basis(self.a)[j]
    }

    fn xi_b(&self, k: usize) -> Spinor {
        spin_basis(self.b)[k]
    }

    /// `c_l ⟨ξ_a,j|φ₁,l⟩⟨ξ_b,k|φ₂,l⟩`
    fn branch(&self, l: usize, j: usize, k: usize) -> C {
        self.coeffs[l] * braket(&self.xi_a(j), &phi1(l)) * braket(&self.xi_b(k), &phi2(l))
    }

    /// Device correlation of the untouched pair: amplitudes of both
    /// branches interfere.
    pub fn entangled_joint(&self, j: usize, k: usize) -> f64 {
        (self.branch(0, j, k) + self.branch(1, j, k)).norm_sqr()
    }

    /// Device correlation once the branch is recorded: probabilities add.
    pub fn mixed_joint(&self, j: usize, k: usize) -> f64 {
        (0..2).map(|l| self.branch(l, j, k).norm_sqr()).sum()
    }

    /// `|c_l|² |⟨ξ_a,j|φ₁,l⟩|² |⟨ξ_b,k|φ₂,l⟩|²`
    pub fn recorded_joint(&self, l: usize, j: usize, k: usize) -> f64 {
        self.coeffs[l].norm_sqr()
            * braket(&self.xi_a(j), &phi1(l)).norm_sqr()
            * braket(&self.xi_b(k), &phi2(l)).norm_sqr()
    }

    /// Projector product with the `P1+M1` branch first.
    pub fn forward_pseudo(&self, l: usize, j: usize, k: usize) -> C {
        let (xa, xb) = (self.xi_a(j), self.xi_b(k));
        let sum: C = (0..2)
            .map(|n| self.coeffs[n] * braket(&xa, &phi1(n)) * braket(&xb, &phi2(n)))
            .sum();
        self.coeffs[l].conj() * braket(&phi1(l), &xa) * braket(&phi2(l), &xb) * sum
    }

    /// Projector product with the `M1` projector first.
    pub fn swapped_pseudo(&self, l: usize, j: usize, k: usize) -> C {
        let (xa, xb) = (self.xi_a(j), self.xi_b(k));
        let sum: C = (0..2)
            .map(|n| self.coeffs[n].conj() * braket(&phi1(n), &xa) * braket(&phi2(n), &xb))
            .sum();
        self.coeffs[l] * braket(&xa, &phi1(l)) * braket(&xb, &phi2(l)) * sum
    }
}

pub fn spherical(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Random normalized amplitudes of length `n`.
pub fn random_amplitudes<R: Rng>(rng: &mut R, n: usize) -> Vec<C> {
    let v: Vec<C> = (0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Random unit vector, uniform on the sphere.
pub fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}
