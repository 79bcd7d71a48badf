//! Acceptance criteria AC-1 .. AC-9. Runs as a plain binary so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use matscat::darboux::{self, TestFunction};
use matscat::forward::{self, BoundStateOptions, ForwardOptions, KGrid};
use matscat::linalg::{self, c, CMat, C64, I};
use matscat::marchenko::{self, GKernel, MarchenkoConfig};
use matscat::star::{self, RayScatteringData, RecoveryConfig, StarGraphPotential};
use matscat::{BoundaryCondition, MatrixPotential, Preset, ScatteringData};

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn kirchhoff_s(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| c(2.0 / n as f64 - if i == j { 1.0 } else { 0.0 }, 0.0))
}

fn ac1() -> Verdict {
    let t = Instant::now();
    let grid = KGrid::with_count(20.0, 400).unwrap();
    let cases = [
        ("dirichlet", BoundaryCondition::dirichlet(2), -linalg::eye(2)),
        ("neumann", BoundaryCondition::neumann(2), linalg::eye(2)),
        ("kirchhoff", BoundaryCondition::kirchhoff(3), kirchhoff_s(3)),
    ];
    let mut worst = 0.0_f64;
    for (_, bc, want) in &cases {
        let q = MatrixPotential::zero(bc.n, 1.0);
        let res = forward::scattering_pipeline(&q, bc, &grid, &ForwardOptions::new(1.0)).unwrap();
        for s in &res.data.s {
            worst = worst.max(linalg::max_abs(&(s - want)));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst <= 1e-10 && secs < 5.0, format!("max entry error {worst:.2e} (<= 1e-10), {secs:.2} s (< 5 s)"))
}

fn ac2() -> Verdict {
    let t = Instant::now();
    let grid = KGrid::with_count(20.0, 100).unwrap();
    let mut worst = 0.0_f64;
    let mut monotone = true;
    let mut tails = Vec::new();
    for case in 0..10u64 {
        let mut r = rng(100 + case);
        let n = if case < 5 { 2 } else { 3 };
        let q = random_compact(&mut r, n, 3.0, 301);
        let bc = BoundaryCondition::new(random_unitary(&mut r, n)).unwrap();
        let s = forward::scattering_on_grid(&q, &bc, &grid, Default::default()).unwrap();
        worst = s.iter().map(linalg::unitarity_defect).fold(worst, f64::max);
        let d: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&k| {
                let s = forward::scattering_at(&q, &bc, k).unwrap();
                worst = worst.max(linalg::unitarity_defect(&s));
                linalg::norm(&(s - &bc.u_hat))
            })
            .collect();
        monotone &= d[0] > d[1] && d[1] > d[2];
        tails.push(d);
    }
    let secs = t.elapsed().as_secs_f64();
    let ratios: Vec<String> = tails.iter().map(|d| format!("{:.2}", d[0] / d[2])).collect();
    verdict(
        worst <= 1e-8 && monotone && secs < 60.0,
        format!("max ‖S†S−I‖ {worst:.2e} (<= 1e-8), ‖S−Û‖ decreasing over 50/100/200: {monotone} (ratios 50:200 {}), {secs:.1} s (< 60 s)", ratios.join(" ")),
    )
}

/// `μ cot μ = -κ`, `κ = √(4 - μ²)` by bisection on `(π/2, 2)`.
fn well_oracle() -> f64 {
    let f = |mu: f64| mu / mu.tan() + (4.0 - mu * mu).sqrt();
    let (mut a, mut b) = (std::f64::consts::FRAC_PI_2 + 1e-12, 2.0 - 1e-15);
    assert!(f(a) * f(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let mu = 0.5 * (a + b);
    (4.0 - mu * mu).sqrt()
}

fn ac3() -> Verdict {
    let kappa_star = well_oracle();
    let q = Preset::ConstantWell { amplitude: CMat::from_element(1, 1, c(-4.0, 0.0)), width: 1.0 }.sample(1.0, 201).unwrap();
    let found = forward::bound_states(&q, &BoundaryCondition::dirichlet(1), &BoundStateOptions::new(2.5)).unwrap();
    let kappas: Vec<f64> = found.states.iter().map(|b| b.kappa).collect();
    let err = kappas.first().map_or(f64::INFINITY, |k| (k - kappa_star).abs());
    verdict(kappas.len() == 1 && err <= 1e-3, format!("oracle κ* = {kappa_star:.10}, found {kappas:?}, |κ−κ*| = {err:.2e} (<= 1e-3)"))
}

fn ac4() -> Verdict {
    let x_max = 2.0;
    let count = 2001;
    let mut lines = Vec::new();
    let mut ok = true;
    let frames: Vec<(&str, MatrixPotential, BoundaryCondition, f64)> = vec![
        ("Q=0 U0=I", MatrixPotential::zero(2, x_max), BoundaryCondition::neumann(2), 0.0),
        ("Q=0 U0=-I", MatrixPotential::zero(2, x_max), BoundaryCondition::dirichlet(2), 0.1),
        ("Q=0 U0=-i", MatrixPotential::zero(1, x_max), BoundaryCondition::new(CMat::from_element(1, 1, -I)).unwrap(), 0.0),
    ];
    let mut r = rng(4);
    for (name, q0, bc, x_from) in frames {
        let q = MatrixPotential::uniform(x_max, count, |x| q0.eval(x)).unwrap();
        let n = bc.n;
        let u0 = darboux::choose_u0(&bc, None).unwrap();
        let frame = darboux::zero_energy_frame(&q, &u0).unwrap();
        let v = darboux::darboux_potential(&frame).unwrap();
        let herm = v.max_hermiticity_defect();
        let ric = darboux::riccati_residual(&v, &q)
            .unwrap()
            .iter()
            .zip(&v.x)
            .filter(|(_, x)| **x >= x_from)
            .filter_map(|(r, _)| *r)
            .fold(0.0, f64::max);
        let tests: Vec<TestFunction> = (0..5)
            .map(|_| {
                let a0 = CMat::from_fn(n, 1, |_, _| c(r_unit(&mut r), r_unit(&mut r)));
                let b0 = CMat::from_fn(n, 1, |_, _| c(r_unit(&mut r), r_unit(&mut r)));
                let w = CMat::from_fn(n, 1, |_, _| c(r_unit(&mut r), r_unit(&mut r)));
                darboux::domain_function(&bc, &a0, &b0, &w, &q.x)
            })
            .collect();
        let rep = darboux::factorization_check(&v, &bc, &q, &tests).unwrap();
        let init = rep.initial;
        let pass = herm <= 1e-9 && ric <= 1e-6 && init.is_none_or(|e| e <= 1e-9) && rep.interior <= 1e-5;
        ok &= pass;
        lines.push(format!(
            "[{name}: herm {herm:.1e}, riccati {ric:.1e}, initial {}, factorisation {:.1e}]",
            init.map_or("n/a (singular at 0, P = 0)".to_string(), |e| format!("{e:.1e}")),
            rep.interior
        ));
    }
    verdict(ok, format!("{} (limits 1e-9 / 1e-6 / 1e-9 / 1e-5, h = 1e-3)", lines.join(" ")))
}

fn r_unit(r: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    r.random_range(-1.0..1.0)
}

struct RoundTrip {
    q_err: f64,
    u_err: f64,
    secs: f64,
}

fn round_trip(amplitude: CMat, u: CMat) -> RoundTrip {
    let t = Instant::now();
    let x_max = 4.0;
    let (preset, q) = gaussian(amplitude, x_max, 401);
    let bc = BoundaryCondition::new(u.clone()).unwrap();
    let grid = KGrid::uniform(50.0, 0.1).unwrap();
    let fw = forward::scattering_pipeline(&q, &bc, &grid, &ForwardOptions::new(forward::default_kappa_max(&q, &bc))).unwrap();
    let inv = marchenko::invert(&fw.data, &MarchenkoConfig::for_support(x_max)).unwrap();
    RoundTrip {
        q_err: sup_error(&inv.q_hat, &|x| preset.value(x), 0.8 * x_max),
        u_err: linalg::norm(&(inv.u_recovered - u)),
        secs: t.elapsed().as_secs_f64(),
    }
}

fn round_trip_cases() -> Vec<(String, RoundTrip)> {
    let mut out = Vec::new();
    out.push(("n=1 robin".to_string(), round_trip(CMat::from_element(1, 1, c(-2.0, 0.0)), CMat::from_element(1, 1, C64::from_polar(1.0, 1.0)))));
    for (seed, n) in [(11u64, 2usize), (12, 3)] {
        let mut r = rng(seed);
        let a = well_amplitude(&mut r, n, 2.0, 1.0);
        let u = resolvable_unitary(&mut r, n, 50.0);
        let scale = linalg::max_abs(&matscat::bc::robin_matrix(&BoundaryCondition::new(u.clone()).unwrap()));
        out.push((format!("n={n} seed {seed} |H| {scale:.2}"), round_trip(a, u)));
    }
    let mut r = rng(13);
    let a = well_amplitude(&mut r, 3, 1.5, 1.0);
    out.push(("n=3 kirchhoff".to_string(), round_trip(a, BoundaryCondition::kirchhoff(3).u)));
    out
}

fn ac5_ac6() -> (Verdict, Verdict) {
    let cases = round_trip_cases();
    let q_ok = cases.iter().all(|(_, r)| r.q_err <= 5e-3 && r.secs < 300.0);
    let u_ok = cases.iter().all(|(_, r)| r.u_err <= 1e-3);
    let q_lines: Vec<String> = cases.iter().map(|(n, r)| format!("[{n}: {:.2e}, {:.1} s]", r.q_err, r.secs)).collect();
    let u_lines: Vec<String> = cases.iter().map(|(n, r)| format!("[{n}: {:.2e}]", r.u_err)).collect();
    (
        verdict(q_ok, format!("‖Q̂−Q‖∞ on [0, 0.8 x_max] {} (<= 5e-3, < 300 s each)", q_lines.join(" "))),
        verdict(u_ok, format!("‖U_rec−U‖ {} (<= 1e-3)", u_lines.join(" "))),
    )
}

fn ac7() -> Verdict {
    let mut cfg = MarchenkoConfig::for_support(1.0);
    cfg.t_max = 10.0;
    cfg.dt = 0.005;
    cfg.y_stride = 10;
    let nodes = (cfg.t_max / cfg.h_y()).round() as usize + 1;
    let t_end = 2.0 * cfg.t_max + 2.0 * cfg.h_y();
    // scalar: one bound state
    let (kappa, c2) = (1.0, 2.0);
    let g = GKernel::from_fn(1, cfg.dt, t_end, |t| CMat::from_element(1, 1, c(c2 * (-kappa * t).exp(), 0.0)));
    let mut worst = 0.0_f64;
    for ix in [0usize, 100, 400] {
        let row = marchenko::solve_marchenko(&g, ix, &cfg).unwrap();
        let x = ix as f64 * cfg.dt;
        for (j, kj) in row.k.iter().enumerate() {
            let y = x + j as f64 * cfg.h_y();
            let exact = -c2 * (-kappa * (x + y)).exp() / (1.0 + c2 / (2.0 * kappa) * (-2.0 * kappa * x).exp());
            worst = worst.max((kj[(0, 0)].re - exact).abs() + kj[(0, 0)].im.abs());
        }
    }
    // matrix: G = M e^{-t} with M positive semidefinite
    let mut r = rng(7);
    let b = random_hermitian(&mut r, 2, 1.0);
    let m = &b * linalg::dagger(&b);
    let gm = GKernel::from_fn(2, cfg.dt, t_end, |t| &m * c((-t).exp(), 0.0));
    for ix in [0usize, 100, 400] {
        let row = marchenko::solve_marchenko(&gm, ix, &cfg).unwrap();
        let x = ix as f64 * cfg.dt;
        let inv = linalg::inverse(&(linalg::eye(2) + &m * c(0.5 * (-2.0 * x).exp(), 0.0))).unwrap();
        for (j, kj) in row.k.iter().enumerate() {
            let y = x + j as f64 * cfg.h_y();
            let exact = -(&inv * &m) * c((-(x + y)).exp(), 0.0);
            worst = worst.max(linalg::max_abs(&(kj - exact)));
        }
    }
    verdict(worst <= 1e-8, format!("{nodes}-node y grid, max |K − K_exact| {worst:.2e} over scalar and 2×2 separable kernels (<= 1e-8)"))
}

fn ac8() -> Verdict {
    let t = Instant::now();
    let k_max = 50.0;
    let well = |x: f64| -4.0 * (-((x - 1.5) / 0.5_f64).powi(2)).exp();
    let free = |_x: f64| 0.0;
    let star_q = StarGraphPotential::from_fns(4.0, 401, &[&free, &free, &well]).unwrap();
    let grid = KGrid::uniform(k_max, 0.1).unwrap();
    let fw = star::star_forward(&star_q, &grid, 3.0, Default::default()).unwrap();
    let partial = RayScatteringData::from_scattering(&fw.data, &[0, 1]);
    let res = star::recover_last_ray(&partial, &RecoveryConfig::new(MarchenkoConfig::for_support(4.0))).unwrap();
    let q_err = sup_error(&res.q_hat_n, &|x| CMat::from_element(1, 1, c(well(x), 0.0)), 0.8 * 4.0);
    let mut arg_err = 0.0_f64;
    for (i, &k) in grid.k.iter().enumerate() {
        if k.abs() >= 0.5 && k.abs() <= 0.8 * k_max {
            let d = (res.dispersion.arg_m[i] - fw.m[i].arg()).rem_euclid(2.0 * std::f64::consts::PI);
            arg_err = arg_err.max(d.min(2.0 * std::f64::consts::PI - d));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        q_err <= 1e-2 && arg_err <= 1e-3 && secs < 600.0,
        format!(
            "‖q̂₃−q₃‖∞ {q_err:.2e} (<= 1e-2), arg M error {arg_err:.2e} on |k| ∈ [0.5, 40] (<= 1e-3), {} bound state(s), {} of {} F₃ nodes interpolated, {secs:.1} s (< 600 s)",
            partial.kappa.len(),
            res.diagnostics.skipped_nodes.len(),
            res.diagnostics.total_nodes
        ),
    )
}

fn ac9() -> Verdict {
    let x_max = 4.0;
    let amps = [-2.0, -1.0, -3.0];
    let us = [c(-1.0, 0.0), c(1.0, 0.0), C64::from_polar(1.0, 0.7)];
    let grid = KGrid::uniform(50.0, 0.1).unwrap();
    let channels: Vec<ScatteringData> = amps
        .iter()
        .zip(&us)
        .map(|(&a, &u)| {
            let (_, q) = gaussian(CMat::from_element(1, 1, c(a, 0.0)), x_max, 401);
            let bc = BoundaryCondition::new(CMat::from_element(1, 1, u)).unwrap();
            forward::scattering_pipeline(&q, &bc, &grid, &ForwardOptions::new(forward::default_kappa_max(&q, &bc))).unwrap().data
        })
        .collect();
    let diag = |f: &dyn Fn(&ScatteringData) -> CMat| linalg::diag(&channels.iter().map(|ch| f(ch)[(0, 0)]).collect::<Vec<_>>());
    let kappas: Vec<(usize, usize)> = channels.iter().enumerate().flat_map(|(j, ch)| (0..ch.bound_states.len()).map(move |l| (j, l))).collect();
    let data = ScatteringData {
        n: 3,
        kgrid: grid.k.clone(),
        s: (0..grid.k.len()).map(|i| diag(&|ch| ch.s[i].clone())).collect(),
        u_hat: diag(&|ch| ch.u_hat.clone()),
        bound_states: kappas
            .iter()
            .map(|&(j, l)| {
                let b = &channels[j].bound_states[l];
                let mut c2 = linalg::zeros(3);
                c2[(j, j)] = b.c2[(0, 0)];
                matscat::BoundState { kappa: b.kappa, c2, order: b.order }
            })
            .collect(),
    };
    assert!(data.is_diagonal());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (coupled, split, singles) = pool.install(|| {
        let cfg = MarchenkoConfig::for_support(x_max);
        let coupled = marchenko::invert(&data, &MarchenkoConfig { split_diagonal: false, ..cfg.clone() }).unwrap();
        let split = marchenko::invert(&data, &cfg).unwrap();
        let singles: Vec<_> = (0..3).map(|j| marchenko::invert(&data.channel(j), &cfg).unwrap()).collect();
        (coupled, split, singles)
    });
    let off = coupled.kernel.max_off_diagonal();
    let bitwise = singles.iter().enumerate().all(|(j, s)| {
        split.q_hat.q.iter().zip(&s.q_hat.q).all(|(a, b)| a[(j, j)].to_bits_eq(b[(0, 0)]))
            && split.q_hat.q.iter().all(|a| (0..3).all(|i| i == j || a[(i, j)] == c(0.0, 0.0)))
    });
    let gap = split.q_hat.q.iter().zip(&coupled.q_hat.q).map(|(a, b)| linalg::max_abs(&(a - b))).fold(0.0, f64::max);
    verdict(
        off <= 1e-12 && bitwise,
        format!("coupled solve max |K_ij|, i≠j: {off:.1e} (<= 1e-12); split recovery bitwise equal to per-channel scalar runs: {bitwise}; coupled vs split Q̂ gap {gap:.1e}"),
    )
}

trait BitsEq {
    fn to_bits_eq(&self, other: C64) -> bool;
}

impl BitsEq for C64 {
    fn to_bits_eq(&self, other: C64) -> bool {
        self.re.to_bits() == other.re.to_bits() && self.im.to_bits() == other.im.to_bits()
    }
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => verdict(false, format!("panicked: {}", panic_message(e))),
    }
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut results: Vec<(&str, Verdict, f64)> = Vec::new();
    let mut run = |id: &'static str, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = guarded(f);
        let secs = t.elapsed().as_secs_f64();
        println!("{id} {} {} [{secs:.1} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, v, secs));
    };
    run("AC-1", &ac1);
    run("AC-2", &ac2);
    run("AC-3", &ac3);
    run("AC-4", &ac4);
    let pair = std::cell::RefCell::new(None);
    run("AC-5", &|| {
        let (a, b) = guarded_pair();
        *pair.borrow_mut() = Some(b);
        a
    });
    run("AC-6", &|| pair.borrow_mut().take().unwrap_or_else(|| verdict(false, "round trips did not run".into())));
    run("AC-7", &ac7);
    run("AC-8", &ac8);
    run("AC-9", &ac9);
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: FAILED {}", failed.join(", "));
        std::process::exit(1);
    }
}

fn guarded_pair() -> (Verdict, Verdict) {
    match panic::catch_unwind(ac5_ac6) {
        Ok(p) => p,
        Err(e) => {
            let msg = panic_message(e);
            (verdict(false, format!("round trip panicked: {msg}")), verdict(false, format!("round trip panicked: {msg}")))
        }
    }
}
