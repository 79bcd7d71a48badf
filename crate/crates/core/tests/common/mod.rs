#![allow(dead_code)]

use matscat::linalg::{self, c, CMat};
use matscat::bc;
use matscat::{BoundaryCondition, MatrixPotential, Preset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + linalg::dagger(&m)) * c(0.5 * scale, 0.0)
}

/// `exp(iH)` for a random hermitian `H`, so every eigenphase is reachable.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::unitary_from_hermitian(&random_hermitian(rng, n, 3.0))
}

/// Random `U` whose Robin part `H` has `max |H_ij| <= k_max / 10`. An
/// eigenvalue of `U` very close to `-1` puts the approach of `S` to `Û` far
/// beyond the sampled energies.
pub fn resolvable_unitary(rng: &mut ChaCha8Rng, n: usize, k_max: f64) -> CMat {
    loop {
        let u = random_unitary(rng, n);
        let bc = BoundaryCondition::new(u.clone()).unwrap();
        if linalg::max_abs(&bc::robin_matrix(&bc)) <= 0.1 * k_max {
            return u;
        }
    }
}

/// Hermitian matrix with eigenvalues pushed down by `shift`.
pub fn well_amplitude(rng: &mut ChaCha8Rng, n: usize, shift: f64, spread: f64) -> CMat {
    random_hermitian(rng, n, spread) - linalg::eye(n) * c(shift, 0.0)
}

pub fn gaussian(amplitude: CMat, x_max: f64, count: usize) -> (Preset, MatrixPotential) {
    let p = Preset::Gaussian { amplitude, center: 1.5, width: 0.5 };
    let q = p.sample(x_max, count).unwrap();
    (p, q)
}

/// Smooth potential vanishing at both ends of `[0, x_max]`.
pub fn random_compact(rng: &mut ChaCha8Rng, n: usize, x_max: f64, count: usize) -> MatrixPotential {
    let h1 = random_hermitian(rng, n, 2.0);
    let h2 = random_hermitian(rng, n, 1.0);
    MatrixPotential::uniform(x_max, count, |x| {
        let s = (std::f64::consts::PI * x / x_max).sin();
        let s2 = (2.0 * std::f64::consts::PI * x / x_max).sin();
        &h1 * c(s * s, 0.0) + &h2 * c(s2 * s2, 0.0)
    })
    .unwrap()
}

/// `max ‖Q̂(x) - Q(x)‖` over recovered nodes with `x <= x_to`, entrywise.
pub fn sup_error(q_hat: &MatrixPotential, truth: &dyn Fn(f64) -> CMat, x_to: f64) -> f64 {
    q_hat
        .x
        .iter()
        .zip(&q_hat.q)
        .filter(|(x, _)| **x <= x_to + 1e-12)
        .map(|(x, q)| linalg::max_abs(&(q - truth(*x))))
        .fold(0.0, f64::max)
}
