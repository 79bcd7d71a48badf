//! JSON interchange formats and CSV tables.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. Floats in CSV use `{:.16e}`, i.e. 17 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bc::{standard_bc, BoundaryCondition, StandardKind};
use crate::error::{Error, Result};
use crate::forward::{BoundState, ScatteringData};
use crate::linalg::{c, CMat, C64};
use crate::potential::{MatrixPotential, Preset};
use crate::star::{RayData, RayScatteringData};

pub type ComplexJson = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexJson>>;

/// Either `[re, im]` or `{"re": .., "im": ..}` on input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ComplexValue {
    Pair([f64; 2]),
    Object { re: f64, im: f64 },
}

impl ComplexValue {
    pub fn value(&self) -> C64 {
        match *self {
            ComplexValue::Pair([re, im]) | ComplexValue::Object { re, im } => c(re, im),
        }
    }
}

pub fn complex_to_json(z: C64) -> ComplexJson {
    [z.re, z.im]
}

pub fn complex_from_json(z: &ComplexJson) -> C64 {
    c(z[0], z[1])
}

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()).collect()
}

fn rectangular<T>(m: &[Vec<T>]) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch { expected: "non-empty rectangular matrix".into(), got: format!("{rows} ragged rows") });
    }
    Ok((rows, cols))
}

pub fn matrix_from_json(m: &MatrixJson) -> Result<CMat> {
    let (rows, cols) = rectangular(m)?;
    Ok(CMat::from_fn(rows, cols, |i, j| complex_from_json(&m[i][j])))
}

pub fn matrix_from_values(m: &[Vec<ComplexValue>]) -> Result<CMat> {
    let (rows, cols) = rectangular(m)?;
    Ok(CMat::from_fn(rows, cols, |i, j| m[i][j].value()))
}

/// `U` as `{"re", "im"}` objects, or a `kind` shortcut (with `phases` for
/// robin).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct BoundaryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Vec<ComplexValue>>>,
}

impl BoundaryJson {
    pub fn from_bc(bc: &BoundaryCondition) -> Self {
        let u = (0..bc.n)
            .map(|i| (0..bc.n).map(|j| ComplexValue::Object { re: bc.u[(i, j)].re, im: bc.u[(i, j)].im }).collect())
            .collect();
        Self { n: Some(bc.n), kind: None, phases: None, u: Some(u) }
    }

    pub fn to_bc(&self) -> Result<BoundaryCondition> {
        let bc = match (&self.kind, &self.u) {
            (Some(kind), None) => {
                let n = self.n.ok_or_else(|| Error::BadParams("boundary kind needs n".into()))?;
                standard_bc(kind.parse::<StandardKind>()?, n, self.phases.as_deref())?
            }
            (None, Some(u)) => BoundaryCondition::new(matrix_from_values(u)?)?,
            (Some(_), Some(_)) => return Err(Error::BadParams("give either boundary kind or U, not both".into())),
            (None, None) => return Err(Error::BadParams("boundary needs kind or U".into())),
        };
        if let Some(n) = self.n {
            if n != bc.n {
                return Err(Error::ShapeMismatch { expected: format!("n = {n}"), got: format!("{0}x{0} U", bc.n) });
            }
        }
        Ok(bc)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PotentialJson {
    pub n: usize,
    pub x: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<MatrixJson>,
}

impl PotentialJson {
    pub fn from_potential(q: &MatrixPotential) -> Self {
        Self { n: q.n, x: q.x.clone(), q: q.q.iter().map(matrix_to_json).collect() }
    }

    pub fn to_potential(&self) -> Result<MatrixPotential> {
        let q = MatrixPotential::new(self.x.clone(), self.q.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?)?;
        if q.n != self.n {
            return Err(Error::ShapeMismatch { expected: format!("n = {}", self.n), got: format!("{0}x{0} samples", q.n) });
        }
        Ok(q)
    }
}

/// Amplitude of a preset: a real number (1×1), a real matrix, or a complex
/// matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AmplitudeJson {
    Scalar(f64),
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<ComplexValue>>),
}

impl AmplitudeJson {
    pub fn to_matrix(&self) -> Result<CMat> {
        match self {
            AmplitudeJson::Scalar(v) => Ok(CMat::from_element(1, 1, c(*v, 0.0))),
            AmplitudeJson::Real(m) => {
                let (rows, cols) = rectangular(m)?;
                Ok(CMat::from_fn(rows, cols, |i, j| c(m[i][j], 0.0)))
            }
            AmplitudeJson::Complex(m) => matrix_from_values(m),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum PresetJson {
    Zero { n: usize },
    ConstantWell { amplitude: AmplitudeJson, width: f64 },
    Gaussian { amplitude: AmplitudeJson, center: f64, width: f64 },
    Sech2 { amplitude: AmplitudeJson, center: f64, width: f64 },
}

impl PresetJson {
    pub fn to_preset(&self) -> Result<Preset> {
        Ok(match self {
            PresetJson::Zero { n } => Preset::Zero { n: *n },
            PresetJson::ConstantWell { amplitude, width } => Preset::ConstantWell { amplitude: amplitude.to_matrix()?, width: *width },
            PresetJson::Gaussian { amplitude, center, width } => Preset::Gaussian { amplitude: amplitude.to_matrix()?, center: *center, width: *width },
            PresetJson::Sech2 { amplitude, center, width } => Preset::Sech2 { amplitude: amplitude.to_matrix()?, center: *center, width: *width },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundStateJson {
    pub kappa: f64,
    pub c2: MatrixJson,
    #[serde(default = "one")]
    pub order: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScatteringJson {
    pub n: usize,
    pub k: Vec<f64>,
    pub s: Vec<MatrixJson>,
    pub u_hat: MatrixJson,
    #[serde(default)]
    pub bound_states: Vec<BoundStateJson>,
}

impl ScatteringJson {
    pub fn from_data(d: &ScatteringData) -> Self {
        Self {
            n: d.n,
            k: d.kgrid.clone(),
            s: d.s.iter().map(matrix_to_json).collect(),
            u_hat: matrix_to_json(&d.u_hat),
            bound_states: d
                .bound_states
                .iter()
                .map(|b| BoundStateJson { kappa: b.kappa, c2: matrix_to_json(&b.c2), order: b.order })
                .collect(),
        }
    }

    pub fn to_data(&self) -> Result<ScatteringData> {
        if self.s.len() != self.k.len() {
            return Err(Error::ShapeMismatch { expected: format!("{} S samples", self.k.len()), got: self.s.len().to_string() });
        }
        let s = self.s.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
        if s.iter().any(|m| m.nrows() != self.n || m.ncols() != self.n) {
            return Err(Error::ShapeMismatch { expected: format!("{0}x{0} S samples", self.n), got: "other shape".into() });
        }
        Ok(ScatteringData {
            n: self.n,
            kgrid: self.k.clone(),
            s,
            u_hat: matrix_from_json(&self.u_hat)?,
            bound_states: self
                .bound_states
                .iter()
                .map(|b| Ok(BoundState { kappa: b.kappa, c2: matrix_from_json(&b.c2)?, order: b.order }))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RayJson {
    /// One-based ray number.
    pub j: usize,
    #[serde(rename = "R")]
    pub r: Vec<ComplexJson>,
}

/// Reflection data of `n - 1` rays. Ray numbers are one-based here.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PartialDataJson {
    pub n: usize,
    pub k: Vec<f64>,
    pub rays: Vec<RayJson>,
    #[serde(default)]
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub orders: Vec<u32>,
}

impl PartialDataJson {
    pub fn from_data(d: &RayScatteringData) -> Self {
        Self {
            n: d.n,
            k: d.kgrid.clone(),
            rays: d.rays.iter().map(|r| RayJson { j: r.j + 1, r: r.r.iter().map(|&z| complex_to_json(z)).collect() }).collect(),
            kappa: d.kappa.clone(),
            b: d.b.clone(),
            orders: d.orders.clone(),
        }
    }

    pub fn to_data(&self) -> Result<RayScatteringData> {
        let rays = self
            .rays
            .iter()
            .map(|r| {
                if r.j == 0 {
                    return Err(Error::BadParams("ray numbers start at 1".into()));
                }
                Ok(RayData { j: r.j - 1, r: r.r.iter().map(complex_from_json).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        let d = RayScatteringData { n: self.n, kgrid: self.k.clone(), rays, kappa: self.kappa.clone(), b: self.b.clone(), orders: self.orders.clone() };
        d.validate()?;
        Ok(d)
    }
}

pub fn to_json_string<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

pub fn from_json_str<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

/// `k, Re S_11, Im S_11, Re S_12, ...` with row-major entries.
pub fn scattering_csv(k: &[f64], s: &[CMat]) -> String {
    matrix_series_csv("k", "s", k, s)
}

/// `x, Re Q_11, Im Q_11, ...` with row-major entries.
pub fn potential_csv(q: &MatrixPotential) -> String {
    matrix_series_csv("x", "q", &q.x, &q.q)
}

/// `axis, Re M_11, Im M_11, ...` for a matrix-valued series named `name`.
pub fn matrix_series_csv(axis: &str, name: &str, x: &[f64], m: &[CMat]) -> String {
    let n = m.first().map_or(0, |v| v.nrows());
    let mut out = String::from(axis);
    for i in 1..=n {
        for j in 1..=n {
            let _ = write!(out, ",re_{name}{i}{j},im_{name}{i}{j}");
        }
    }
    out.push('\n');
    for (xv, v) in x.iter().zip(m) {
        let _ = write!(out, "{xv:.16e}");
        for i in 0..n {
            for j in 0..n {
                num(&mut out, v[(i, j)].re);
                num(&mut out, v[(i, j)].im);
            }
        }
        out.push('\n');
    }
    out
}

/// Two columns with a header, e.g. kernel residuals against `x`.
pub fn series_csv(names: (&str, &str), x: &[f64], y: &[f64]) -> String {
    let mut out = format!("{},{}\n", names.0, names.1);
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(out, "{a:.16e},{b:.16e}");
    }
    out
}

/// `k, Re z, Im z` for a scalar function of `k`.
pub fn complex_series_csv(name: &str, k: &[f64], z: &[C64]) -> String {
    let mut out = format!("k,re_{name},im_{name}\n");
    for (a, b) in k.iter().zip(z) {
        let _ = writeln!(out, "{a:.16e},{:.16e},{:.16e}", b.re, b.im);
    }
    out
}
