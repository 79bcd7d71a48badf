//! The five pipelines behind `matscat run`.

use std::path::Path;

use matscat::io::{self, BoundaryJson, PartialDataJson, PotentialJson, ScatteringJson};
use matscat::linalg::{self, c, CMat};
use matscat::numerics::ode::Tolerances;
use matscat::{darboux, forward, marchenko, star};
use matscat::{BoundaryCondition, ForwardOptions, KGrid, MarchenkoConfig, MatrixPotential, RecoveryConfig, ScatteringData};
use serde_json::{json, Value};

use crate::config::{read_json, Job, Mode, DEFAULT_DK};
use crate::manifest::Artifacts;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { stage: &'static str, message: String },
    Io(String),
}

impl Failure {
    fn numerical(stage: &'static str) -> impl FnOnce(matscat::Error) -> Failure {
        move |e| Failure::Numerical { stage, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub struct Outcome {
    pub warnings: Vec<String>,
    pub files: usize,
}

struct Ctx<'a> {
    job: &'a Job,
    out: Artifacts,
    warnings: Vec<String>,
}

impl Ctx<'_> {
    fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    fn tol(&self) -> Tolerances {
        let t = &self.job.config.tolerances;
        Tolerances { rtol: t.rtol, atol: t.atol, ..Default::default() }
    }

    fn operator(&self) -> Result<(MatrixPotential, BoundaryCondition), Failure> {
        let (q, _) = self.job.potential().map_err(Failure::Config)?;
        let bc = self.job.boundary().map_err(Failure::Config)?;
        Ok((q, bc))
    }

    fn kgrid(&self) -> Result<KGrid, Failure> {
        let g = &self.job.config.grid;
        let k_max = g.k_max.ok_or_else(|| Failure::Config("grid.k_max: missing".into()))?;
        match g.k_count {
            Some(count) => KGrid::with_count(k_max, count),
            None => KGrid::uniform(k_max, g.dk.unwrap_or(DEFAULT_DK)),
        }
        .map_err(|e| Failure::Config(format!("grid: {e}")))
    }

    fn marchenko(&self, support: f64) -> MarchenkoConfig {
        let mut cfg = MarchenkoConfig::for_support(support);
        if let Some(t) = self.job.config.grid.t_max {
            let h = cfg.h_y();
            cfg.t_max = (t / h).ceil() * h;
        }
        cfg.tail_bound = self.job.config.tolerances.tail_bound;
        cfg
    }

    fn report(&mut self, mut report: Value) -> Result<(), Failure> {
        report["warnings"] = json!(self.warnings);
        self.out.write_json("report.json", &report)?;
        Ok(())
    }
}

/// Run `mode` and write every artifact under `out`.
pub fn run(job: &Job, mode: Mode, out: &Path) -> Result<Outcome, Failure> {
    let mut ctx = Ctx { job, out: Artifacts::create(out)?, warnings: Vec::new() };
    match mode {
        Mode::Forward => forward_mode(&mut ctx)?,
        Mode::Darboux => darboux_mode(&mut ctx)?,
        Mode::Inverse => inverse_mode(&mut ctx)?,
        Mode::GraphRecover => graph_mode(&mut ctx)?,
        Mode::Roundtrip => roundtrip_mode(&mut ctx)?,
    }
    let Ctx { out, warnings, .. } = ctx;
    let files = out.finish(mode.name())?.len() + 1;
    Ok(Outcome { warnings, files })
}

fn bound_state_json(d: &ScatteringData) -> Value {
    json!(d.bound_states.iter().map(|b| json!({ "kappa": b.kappa, "energy": -b.kappa * b.kappa, "order": b.order, "C2": io::matrix_to_json(&b.c2) })).collect::<Vec<_>>())
}

fn run_forward(ctx: &mut Ctx, q: &MatrixPotential, bc: &BoundaryCondition) -> Result<ScatteringData, Failure> {
    let kgrid = ctx.kgrid()?;
    let kappa_max = ctx.job.config.grid.kappa_max.unwrap_or_else(|| forward::default_kappa_max(q, bc));
    let mut opts = ForwardOptions::new(kappa_max);
    opts.tol = ctx.tol();
    let res = forward::scattering_pipeline(q, bc, &kgrid, &opts).map_err(Failure::numerical("forward"))?;
    let defect = res.data.max_unitarity_defect();
    if defect > 1e-8 {
        ctx.warn(format!("S(k) deviates from unitarity by {defect:.3e}"));
    }
    if let Some(det) = res.virtual_level {
        ctx.warn(format!("possible virtual level at k = 0 (|det M(0)| ~ {det:.3e})"));
    }
    ctx.out.write_json("scattering.json", &ScatteringJson::from_data(&res.data))?;
    ctx.out.write("scattering.csv", &io::scattering_csv(&res.data.kgrid, &res.data.s))?;
    Ok(res.data)
}

fn forward_mode(ctx: &mut Ctx) -> Result<(), Failure> {
    let (q, bc) = ctx.operator()?;
    let data = run_forward(ctx, &q, &bc)?;
    let report = json!({
        "mode": "forward",
        "n": data.n,
        "k_nodes": data.kgrid.len(),
        "k_max": data.kgrid.last(),
        "unitarity_defect": data.max_unitarity_defect(),
        "bound_states": bound_state_json(&data),
    });
    ctx.report(report)
}

/// Deterministic functions in the operator domain for the factorisation check.
fn test_functions(bc: &BoundaryCondition, x: &[f64]) -> Vec<darboux::TestFunction> {
    let n = bc.n;
    (0..3)
        .map(|m| {
            let col = |shift: f64| CMat::from_fn(n, 1, |j, _| c((shift + (m + j) as f64).cos(), (shift + (2 * m + j) as f64).sin()));
            darboux::domain_function(bc, &col(1.0), &col(2.0), &col(3.0), x)
        })
        .collect()
}

fn darboux_mode(ctx: &mut Ctx) -> Result<(), Failure> {
    let (q, bc) = ctx.operator()?;
    let over = match &ctx.job.config.darboux.u0 {
        Some(u) => Some(io::matrix_from_values(u).map_err(|e| Failure::Config(format!("darboux.U0: {e}")))?),
        None => None,
    };
    let u0 = darboux::choose_u0(&bc, over.as_ref()).map_err(Failure::numerical("darboux-u0"))?;
    let frame = darboux::zero_energy_frame_with(&q, &u0, ctx.tol()).map_err(Failure::numerical("zero-energy-frame"))?;
    let v = darboux::darboux_potential(&frame).map_err(Failure::numerical("darboux-factor"))?;
    let ric = darboux::riccati_residual(&v, &q).map_err(Failure::numerical("riccati"))?;
    let fact = darboux::factorization_check(&v, &bc, &q, &test_functions(&bc, &q.x)).map_err(Failure::numerical("factorisation"))?;

    let herm = v.max_hermiticity_defect();
    let (rx, rv): (Vec<f64>, Vec<f64>) = v.x.iter().zip(&ric).filter_map(|(x, r)| r.map(|r| (*x, r))).unzip();
    let ric_max = rv.iter().copied().fold(0.0, f64::max);
    let h = q.x[1] - q.x[0];
    let ric_limit = 1e-6f64.max(10.0 * h * h * (1.0 + q.sup_norm()));
    if herm > 1e-9 {
        ctx.warn(format!("V is not hermitian to 1e-9 (defect {herm:.3e})"));
    }
    if ric_max > ric_limit {
        ctx.warn(format!("Riccati residual {ric_max:.3e} exceeds {ric_limit:.1e}"));
    }
    if fact.initial.is_some_and(|e| e > 1e-9) {
        ctx.warn(format!("initial relation P V(0) = -P H violated by {:.3e}", fact.initial.unwrap()));
    }
    if fact.interior > 1e-5 {
        ctx.warn(format!("factorisation residual {:.3e} exceeds 1e-5", fact.interior));
    }
    if !v.singular_points.is_empty() {
        ctx.warn(format!("zero-energy frame is singular at {} nodes; V is undefined there", v.singular_points.len()));
    }

    ctx.out.write("darboux_v.csv", &io::matrix_series_csv("x", "v", &v.x, &v.v))?;
    ctx.out.write("riccati.csv", &io::series_csv(("x", "residual"), &rx, &rv))?;
    let partner = match darboux::partner_operator(&v, &q, &bc) {
        Ok((qp, bcp)) => {
            ctx.out.write_json("partner_potential.json", &PotentialJson::from_potential(&qp))?;
            ctx.out.write_json("partner_boundary.json", &BoundaryJson::from_bc(&bcp))?;
            json!({ "written": true })
        }
        Err(e) => json!({ "written": false, "reason": e.to_string() }),
    };
    let report = json!({
        "mode": "darboux",
        "n": bc.n,
        "U0": io::matrix_to_json(&u0),
        "hermiticity_defect": herm,
        "riccati_residual": ric_max,
        "riccati_limit": ric_limit,
        "initial_relation": fact.initial,
        "boundary_residual": fact.boundary,
        "factorisation_residual": fact.interior,
        "singular_points": v.singular_points,
        "partner": partner,
    });
    ctx.report(report)
}

fn write_inverse(ctx: &mut Ctx, data: &ScatteringData, support: f64) -> Result<marchenko::InverseResult, Failure> {
    let cfg = ctx.marchenko(support);
    let inv = marchenko::invert(data, &cfg).map_err(Failure::numerical("marchenko"))?;
    let d = &inv.diagnostics;
    if d.u_spread > ctx.job.config.tolerances.u_spread {
        ctx.warn(format!("inconsistent scattering data: recovered U varies by {:.3e} across k", d.u_spread));
    }
    if d.q_asymmetry > 1e-8 {
        ctx.warn(format!("recovered Q is not hermitian (defect {:.3e})", d.q_asymmetry));
    }
    if d.g.hermiticity > 1e-9 {
        ctx.warn(format!("Marchenko kernel is not hermitian (defect {:.3e})", d.g.hermiticity));
    }
    ctx.out.write_json("potential.json", &PotentialJson::from_potential(&inv.q_hat))?;
    ctx.out.write("potential.csv", &io::potential_csv(&inv.q_hat))?;
    match BoundaryCondition::new(inv.u_recovered.clone()) {
        Ok(bc) => ctx.out.write_json("boundary.json", &BoundaryJson::from_bc(&bc))?,
        Err(e) => ctx.warn(format!("recovered U is not a valid boundary unitary: {e}")),
    }
    let x = inv.kernel.x();
    let res: Vec<f64> = inv.kernel.rows.iter().map(|r| r.residual).collect();
    ctx.out.write("kernel.csv", &io::series_csv(("x", "residual"), &x, &res))?;
    Ok(inv)
}

fn inverse_json(inv: &marchenko::InverseResult) -> Value {
    let d = &inv.diagnostics;
    json!({
        "U_recovered": io::matrix_to_json(&inv.u_recovered),
        "U_hat_recovered": io::matrix_to_json(&inv.u_hat_recovered),
        "tail_residual": d.g.tail_residual,
        "nystrom_residual": d.nystrom_residual,
        "pivot_ratio": d.pivot_ratio,
        "q_asymmetry": d.q_asymmetry,
        "u_spread": d.u_spread,
    })
}

fn inverse_mode(ctx: &mut Ctx) -> Result<(), Failure> {
    let input = ctx.job.config.input.as_ref().ok_or_else(|| Failure::Config("input: missing".into()))?;
    let data = read_json::<ScatteringJson>(&ctx.job.resolve(input))
        .map_err(Failure::Config)?
        .to_data()
        .map_err(|e| Failure::Config(format!("input: {e}")))?;
    let support = ctx.job.config.grid.x_max.ok_or_else(|| Failure::Config("grid.x_max: missing".into()))?;
    let inv = write_inverse(ctx, &data, support)?;
    let mut report = json!({ "mode": "inverse", "n": data.n, "x_max": support });
    report["inverse"] = inverse_json(&inv);
    ctx.report(report)
}

fn graph_mode(ctx: &mut Ctx) -> Result<(), Failure> {
    let input = ctx.job.config.input.as_ref().ok_or_else(|| Failure::Config("input: missing".into()))?;
    let partial = read_json::<PartialDataJson>(&ctx.job.resolve(input))
        .map_err(Failure::Config)?
        .to_data()
        .map_err(|e| Failure::Config(format!("input: {e}")))?;
    let support = ctx.job.config.grid.x_max.ok_or_else(|| Failure::Config("grid.x_max: missing".into()))?;
    let mut cfg = RecoveryConfig::new(ctx.marchenko(support));
    cfg.virtual_order = ctx.job.config.recovery.virtual_order;
    let res = star::recover_last_ray(&partial, &cfg).map_err(Failure::numerical("graph-recover"))?;
    let d = &res.diagnostics;
    if d.completion_unitarity > 1e-6 {
        ctx.warn(format!("completed S(k) deviates from unitarity by {:.3e}", d.completion_unitarity));
    }
    if !d.skipped_nodes.is_empty() {
        ctx.warn(format!("{} of {} k nodes were skipped as ill-conditioned", d.skipped_nodes.len(), d.total_nodes));
    }
    let n = partial.n;
    ctx.out.write("q_hat.csv", &io::potential_csv(&res.q_hat_n))?;
    ctx.out.write_json("q_hat.json", &PotentialJson::from_potential(&res.q_hat_n))?;
    let full = ScatteringData {
        n,
        kgrid: partial.kgrid.clone(),
        s: res.s_full.clone(),
        u_hat: BoundaryCondition::kirchhoff(n).u_hat,
        bound_states: Vec::new(),
    };
    ctx.out.write_json("scattering.json", &ScatteringJson::from_data(&full))?;
    ctx.out.write("dispersion.csv", &io::complex_series_csv("m", &res.dispersion.kgrid, &res.dispersion.m))?;
    let report = json!({
        "mode": "graph-recover",
        "n": n,
        "recovered_ray": res.last + 1,
        "x_max": support,
        "kappa": partial.kappa,
        "b_last": d.b_last,
        "dispersion_zeros": res.dispersion.zeros,
        "completion_unitarity": d.completion_unitarity,
        "skipped_nodes": d.skipped_nodes.len(),
        "modulus_interpolated": d.modulus_interpolated.len(),
        "total_nodes": d.total_nodes,
    });
    ctx.report(report)
}

fn roundtrip_mode(ctx: &mut Ctx) -> Result<(), Failure> {
    let (q, bc) = ctx.operator()?;
    let data = run_forward(ctx, &q, &bc)?;
    let support = ctx.job.config.grid.x_max.unwrap_or_else(|| q.x_max());
    let inv = write_inverse(ctx, &data, support)?;
    let window = 0.8 * support;
    let q_err = inv
        .q_hat
        .x
        .iter()
        .zip(&inv.q_hat.q)
        .filter(|(x, _)| **x <= window)
        .map(|(x, qh)| linalg::max_abs(&(qh - q.eval(*x))))
        .fold(0.0, f64::max);
    let u_err = linalg::max_abs(&(&inv.u_recovered - &bc.u));
    let mut report = json!({
        "mode": "roundtrip",
        "n": bc.n,
        "x_max": support,
        "q_error_window": [0.0, window],
        "q_error": q_err,
        "u_error": u_err,
        "bound_states": bound_state_json(&data),
    });
    report["inverse"] = inverse_json(&inv);
    ctx.report(report)
}
