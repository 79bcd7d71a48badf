mod common;

use matscat::forward::{self, BoundState, ForwardOptions, KGrid, Sign};
use matscat::linalg::{self, c, CMat, C64, I};
use matscat::marchenko::{self, GKernel, MarchenkoConfig};
use matscat::star::{self, RayScatteringData, RecoveryConfig, StarGraphPotential};
use matscat::{BoundaryCondition, MatrixPotential, ScatteringData};
use nalgebra::{DMatrix, DVector};

use common::*;

fn scalar(v: C64) -> CMat {
    CMat::from_element(1, 1, v)
}

fn bump(x: f64) -> f64 {
    -4.0 * (-((x - 1.5) / 0.5_f64).powi(2)).exp()
}

#[test]
fn bound_state_only_data_gives_pure_exponential() {
    let grid = KGrid::uniform(20.0, 0.1).unwrap();
    let c2 = CMat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]);
    let data = ScatteringData {
        n: 2,
        kgrid: grid.k.clone(),
        s: vec![linalg::eye(2); grid.k.len()],
        u_hat: linalg::eye(2),
        bound_states: vec![BoundState { kappa: 0.8, c2: c2.clone(), order: 1 }],
    };
    let g = marchenko::build_g(&data, 0.01, 6.0, &MarchenkoConfig::for_support(1.0)).unwrap();
    for (p, gp) in g.g.iter().enumerate() {
        let t = p as f64 * g.dt;
        assert!(linalg::max_abs(&(gp - &c2 * c((-0.8 * t).exp(), 0.0))) < 1e-12);
    }
}

#[test]
fn reflectionless_kernel_gives_known_jost_function() {
    // G = 2e^{-t}: Q = -2 sech²x and f₊(x,k) = e^{ikx}(k + i tanh x)/(k + i).
    let cfg = MarchenkoConfig::for_support(8.0);
    let g = GKernel::from_fn(1, cfg.dt, 2.0 * cfg.t_max + 0.2, |t| scalar(c(2.0 * (-t).exp(), 0.0)));
    let kernel = marchenko::solve_kernel(&g, &cfg).unwrap();
    let (q_hat, _) = marchenko::recover_potential(&kernel, 8.0).unwrap();
    let trace = marchenko::trace_kernel(&kernel, &g, cfg.t_max);
    for k in [0.5, 1.0, 3.0] {
        let (f, fx) = trace.jost_plus(k);
        let exact_f = c(k, 0.0) / c(k, 1.0);
        let exact_fx = c(1.0, k);
        assert!((f[(0, 0)] - exact_f).norm() < 1e-6, "k = {k}");
        assert!((fx[(0, 0)] - exact_fx).norm() < 1e-5, "k = {k}");
        let fw = forward::compute_jost(&q_hat, c(k, 0.0), Sign::Plus).unwrap();
        assert!((fw.f[(0, 0)] - f[(0, 0)]).norm() <= 1e-4);
        assert!((fw.fx[(0, 0)] - fx[(0, 0)]).norm() <= 1e-4);
    }
}

#[test]
fn matrix_kernel_jost_matches_forward_integrator() {
    let mut r = rng(21);
    let amplitude = well_amplitude(&mut r, 2, 2.0, 1.0);
    let u = resolvable_unitary(&mut r, 2, 50.0);
    let (_, q) = gaussian(amplitude, 4.0, 401);
    let bc = BoundaryCondition::new(u).unwrap();
    let grid = KGrid::uniform(50.0, 0.1).unwrap();
    let fw = forward::scattering_pipeline(&q, &bc, &grid, &ForwardOptions::new(forward::default_kappa_max(&q, &bc))).unwrap();
    let inv = marchenko::invert(&fw.data, &MarchenkoConfig::for_support(4.0)).unwrap();
    for k in [0.5, 1.0, 3.0, 10.0] {
        let (f, fx) = inv.trace.jost_plus(k);
        for target in [&q, &inv.q_hat] {
            let j = forward::compute_jost(target, c(k, 0.0), Sign::Plus).unwrap();
            assert!(linalg::max_abs(&(&j.f - &f)) <= 1e-3, "k = {k}");
            assert!(linalg::max_abs(&(&j.fx - &fx)) <= 1e-3 * (1.0 + k), "k = {k}");
        }
    }
}

#[test]
fn free_kirchhoff_data_recovers_kirchhoff_vertex() {
    let n = 3;
    let q = MatrixPotential::zero(n, 2.0);
    let bc = BoundaryCondition::kirchhoff(n);
    let grid = KGrid::uniform(20.0, 0.1).unwrap();
    let fw = forward::scattering_pipeline(&q, &bc, &grid, &ForwardOptions::new(1.0)).unwrap();
    let inv = marchenko::invert(&fw.data, &MarchenkoConfig::for_support(2.0)).unwrap();
    let want = CMat::from_fn(n, n, |i, j| c(2.0 / 3.0 - if i == j { 1.0 } else { 0.0 }, 0.0));
    assert!(linalg::max_abs(&(inv.u_recovered - want)) <= 1e-3);
    assert!(inv.q_hat.sup_norm() <= 1e-12);
}

#[test]
fn constant_ray_reflection_gives_trivial_ray() {
    let grid = KGrid::uniform(20.0, 0.1).unwrap();
    let r = vec![c(-1.0 / 3.0, 0.0); grid.k.len()];
    let rec = star::diagonal_marchenko(&grid.k, &r, &[], -1.0 / 3.0, &MarchenkoConfig::for_support(1.0)).unwrap();
    assert!(rec.q_hat.sup_norm() <= 1e-12);
}

#[test]
fn well_ray_inside_free_star() {
    // q₁ = -4 on [0, 1]: the jump at x = 1 needs k_max = 100 for 5e-3 on [0, 0.8].
    let well = |_x: f64| -4.0;
    let free = |_x: f64| 0.0;
    let star_q = StarGraphPotential::from_fns(1.0, 201, &[&well, &free, &free]).unwrap();
    let grid = KGrid::uniform(100.0, 0.1).unwrap();
    let fw = star::star_forward(&star_q, &grid, 3.0, Default::default()).unwrap();
    let partial = RayScatteringData::from_scattering(&fw.data, &[0]);
    let bound: Vec<(f64, f64, u32)> = partial.kappa.iter().zip(&partial.b).map(|(&k, b)| (k, b[0], 1)).collect();
    let rec = star::diagonal_marchenko(&grid.k, &partial.rays[0].r, &bound, -1.0 / 3.0, &MarchenkoConfig::for_support(1.0)).unwrap();
    let err = sup_error(&rec.q_hat, &|_| scalar(c(-4.0, 0.0)), 0.8);
    assert!(err <= 5e-3, "error {err:e}");
}

#[test]
fn free_star_recovery_has_closed_form() {
    let n = 3;
    let grid = KGrid::uniform(30.0, 0.1).unwrap();
    let m = grid.k.len();
    let partial = RayScatteringData {
        n,
        kgrid: grid.k.clone(),
        rays: (0..2).map(|j| star::RayData { j, r: vec![c(-1.0 / 3.0, 0.0); m] }).collect(),
        kappa: vec![],
        b: vec![],
        orders: vec![],
    };
    let mut cfg = RecoveryConfig::new(MarchenkoConfig::for_support(2.0));
    cfg.virtual_order = 1;
    let res = star::recover_last_ray(&partial, &cfg).unwrap();
    assert_eq!(res.last, 2);
    assert!(res.q_hat_n.sup_norm() <= 1e-6, "q̂₃ = {:e}", res.q_hat_n.sup_norm());
    let want = CMat::from_fn(n, n, |i, j| c(2.0 / 3.0 - if i == j { 1.0 } else { 0.0 }, 0.0));
    let s_err = res.s_full.iter().map(|s| linalg::max_abs(&(s - &want))).fold(0.0, f64::max);
    assert!(s_err <= 1e-6, "S error {s_err:e}");
    for (i, &k) in grid.k.iter().enumerate() {
        if k.abs() >= 0.5 && k.abs() <= 0.8 * 30.0 {
            let exact = I.powi(3) * k;
            assert!((res.dispersion.m[i] - exact).norm() <= 1e-3 * k.abs(), "k = {k}");
        }
    }
}

#[test]
fn normalised_dispersion_has_no_upper_zeros() {
    // Winding of M̂ along the real axis counts its zeros in the upper half
    // plane, the large arc contributing nothing since M̂ → 1.
    let x_max = 4.0;
    let free = |_x: f64| 0.0;
    let star_q = StarGraphPotential::from_fns(x_max, 401, &[&free, &free, &bump]).unwrap();
    let grid = KGrid::uniform(50.0, 0.1).unwrap();
    let fw = star::star_forward(&star_q, &grid, 3.0, Default::default()).unwrap();
    let zeros: Vec<f64> = fw.data.bound_states.iter().map(|b| b.kappa).collect();
    assert_eq!(zeros.len(), 1);
    let winding = |v: &[C64]| {
        let total: f64 = v.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
        total / (2.0 * std::f64::consts::PI)
    };
    let m_hat = star::normalized_dispersion(&grid.k, &fw.m, 3, &zeros, &[1]).unwrap();
    assert!(winding(&m_hat).abs() < 0.05, "M̂ winds {}", winding(&m_hat));
    let raw: Vec<C64> = grid.k.iter().zip(&fw.m).map(|(&k, &mv)| mv / (I.powi(3) * c(k, 1.0))).collect();
    assert!((winding(&raw) - 1.0).abs() < 0.05, "M/(i³(k+i)) winds {}", winding(&raw));
}

/// Two-ray star = line with ray 1 on `x > 0` and ray 2 folded onto `x < 0`.
/// The line potential vanishes for `x > 0`, so its right Marchenko kernel
/// `F(t) = Σ c² e^{-κt} + (1/2π)∫ R e^{ikt} dk` vanishes for `t > 0` and
/// `K(x, y) = 0` for `y > -x`. Solving
/// `K(x,y) + F(x+y) + ∫_x^{-x} K(x,t) F(t+y) dt = 0` by the trapezoid rule
/// on `[x, -x]` and taking `q₂(-x) = -2 dK(x,x)/dx` gives the oracle.
fn full_line_oracle(k: &[f64], r: &[C64], bound: &[(f64, f64)], h: f64, steps: usize) -> Vec<(f64, f64)> {
    let dk = k[1] - k[0];
    let f: Vec<f64> = (0..=2 * steps)
        .map(|j| {
            let t = -(j as f64) * h;
            let cont: f64 = k.iter().zip(r).map(|(&kv, z)| (z * C64::from_polar(1.0, kv * t)).re).sum::<f64>() * dk / (2.0 * std::f64::consts::PI);
            cont + bound.iter().map(|(kap, b)| b * (-kap * t).exp()).sum::<f64>()
        })
        .collect();
    // F at t = x + y with x = -m h, y = -m h + i h
    let diag: Vec<f64> = (0..=steps)
        .map(|m| {
            if m == 0 {
                return -f[0];
            }
            let size = 2 * m + 1;
            let f_at = |a: usize, b: usize| if a + b > 2 * m { 0.0 } else { f[2 * m - a - b] };
            let a = DMatrix::from_fn(size, size, |i, j| {
                let w = if j == 0 || j == size - 1 { 0.5 * h } else { h };
                (if i == j { 1.0 } else { 0.0 }) + w * f_at(j, i)
            });
            let rhs = DVector::from_fn(size, |i, _| -f_at(0, i));
            a.lu().solve(&rhs).expect("oracle system")[0]
        })
        .collect();
    // K(x,x) at x = -m h; q₂(m h) = -2 dK/dx = 2 dK/d(mh)
    (1..steps)
        .map(|m| (m as f64 * h, (diag[m + 1] - diag[m - 1]) / h))
        .collect()
}

#[test]
fn two_ray_recovery_matches_full_line_marchenko() {
    let x_max = 4.0;
    let free = |_x: f64| 0.0;
    let star_q = StarGraphPotential::from_fns(x_max, 401, &[&free, &bump]).unwrap();
    let grid = KGrid::uniform(50.0, 0.1).unwrap();
    let fw = star::star_forward(&star_q, &grid, 3.0, Default::default()).unwrap();
    let partial = RayScatteringData::from_scattering(&fw.data, &[0]);
    let res = star::recover_last_ray(&partial, &RecoveryConfig::new(MarchenkoConfig::for_support(x_max))).unwrap();
    let bound: Vec<(f64, f64)> = partial.kappa.iter().zip(&partial.b).map(|(&k, b)| (k, b[0])).collect();
    let oracle = full_line_oracle(&grid.k, &partial.rays[0].r, &bound, 0.02, 160);
    let mut vs_truth = 0.0_f64;
    let mut vs_recovery = 0.0_f64;
    for (x, q) in &oracle {
        vs_truth = vs_truth.max((q - bump(*x)).abs());
        vs_recovery = vs_recovery.max((q - res.q_hat_n.eval(*x)[(0, 0)].re).abs());
    }
    assert!(vs_truth <= 5e-3, "oracle vs truth {vs_truth:e}");
    assert!(vs_recovery <= 5e-3, "oracle vs recovery {vs_recovery:e}");
}
