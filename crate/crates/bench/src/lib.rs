//! Fixtures shared by the benchmarks.

use matscat::forward::{self, ForwardOptions};
use matscat::linalg::{c, CMat};
use matscat::numerics::ode::Tolerances;
use matscat::star::{self, StarGraphPotential};
use matscat::{BoundaryCondition, KGrid, MatrixPotential, Preset, RayScatteringData, ScatteringData};

/// A coupled two-channel Gaussian well on `[0, 3]`.
pub fn coupled_well() -> (MatrixPotential, BoundaryCondition) {
    let amplitude = CMat::from_row_slice(2, 2, &[c(-2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3), c(-1.0, 0.0)]);
    let q = Preset::Gaussian { amplitude, center: 1.5, width: 0.5 }.sample(3.0, 301).unwrap();
    (q, BoundaryCondition::kirchhoff(2))
}

/// Scattering data of the scalar Dirichlet Gaussian well, ready for inversion.
pub fn scalar_data() -> ScatteringData {
    let q = Preset::Gaussian { amplitude: CMat::from_element(1, 1, c(-2.0, 0.0)), center: 1.5, width: 0.5 }.sample(3.0, 301).unwrap();
    let bc = BoundaryCondition::dirichlet(1);
    let kgrid = KGrid::uniform(60.0, 0.05).unwrap();
    forward::scattering_pipeline(&q, &bc, &kgrid, &ForwardOptions::new(forward::default_kappa_max(&q, &bc))).unwrap().data
}

/// Reflection data of the two free rays of a three-ray star whose third ray
/// carries a Gaussian well.
pub fn star_partial() -> RayScatteringData {
    let well = |x: f64| -4.0 * (-((x - 1.5) / 0.5_f64).powi(2)).exp();
    let free = |_x: f64| 0.0;
    let star_q = StarGraphPotential::from_fns(4.0, 401, &[&free, &free, &well]).unwrap();
    let kgrid = KGrid::uniform(40.0, 0.1).unwrap();
    let fwd = star::star_forward(&star_q, &kgrid, 3.0, Tolerances::default()).unwrap();
    RayScatteringData::from_scattering(&fwd.data, &[0, 1])
}
