//! Dormand–Prince 8(5,3) adaptive integrator for complex first-order systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Right-hand side of `y' = f(x, y)` over a flat complex state.
pub trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, x: f64, y: &[Complex64], dy: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000 }
    }
}

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.7109375E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.7578125E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

/// Reusable integrator workspace. The step size carries over between calls
/// to [`Dop853::advance`], which is how grid-cell-by-cell integration stays
/// cheap.
pub struct Dop853 {
    tol: Tolerances,
    k: Vec<Vec<Complex64>>,
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    h: f64,
    pub steps: usize,
}

impl Dop853 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        Self {
            tol,
            k: vec![vec![Complex64::new(0.0, 0.0); dim]; 12],
            stage: vec![Complex64::new(0.0, 0.0); dim],
            y_new: vec![Complex64::new(0.0, 0.0); dim],
            h: 0.0,
            steps: 0,
        }
    }

    /// Integrate `y` in place from `x0` to `x1` (either direction).
    pub fn advance<S: System>(&mut self, sys: &S, x0: f64, x1: f64, y: &mut [Complex64]) -> Result<()> {
        let span = x1 - x0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let n = y.len();
        if self.h == 0.0 {
            self.h = (span.abs() * 0.1).min(1e-2);
        }
        let mut x = x0;
        let mut h = self.h.min(span.abs());
        loop {
            let remaining = (x1 - x) * dir;
            if remaining <= 1e-14 * span.abs().max(1.0) {
                break;
            }
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < 1e-14 * x.abs().max(1.0) {
                return Err(Error::IntegratorFailure { x, reason: "step size underflow".into() });
            }
            self.steps += 1;
            if self.steps > self.tol.max_steps {
                return Err(Error::IntegratorFailure { x, reason: "maximum step count exceeded".into() });
            }
            let hs = h * dir;
            sys.rhs(x, y, &mut self.k[0]);
            for s in 1..12 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..s {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += self.k[j][i] * (a * hs);
                        }
                    }
                    self.stage[i] = acc;
                }
                let (done, rest) = self.k.split_at_mut(s);
                let _ = done;
                sys.rhs(x + C[s] * hs, &self.stage, &mut rest[0]);
            }
            let mut err5 = 0.0;
            let mut err3 = 0.0;
            for i in 0..n {
                let mut incr = Complex64::new(0.0, 0.0);
                let mut e5 = Complex64::new(0.0, 0.0);
                for s in 0..12 {
                    if B[s] != 0.0 {
                        incr += self.k[s][i] * B[s];
                    }
                    if ER[s] != 0.0 {
                        e5 += self.k[s][i] * ER[s];
                    }
                }
                let e3 = incr - self.k[0][i] * BHH[0] - self.k[8][i] * BHH[1] - self.k[11][i] * BHH[2];
                self.y_new[i] = y[i] + incr * hs;
                let sk = self.tol.atol + self.tol.rtol * y[i].norm().max(self.y_new[i].norm());
                err5 += (e5.norm() / sk).powi(2);
                err3 += (e3.norm() / sk).powi(2);
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h * err5 * (1.0 / (n as f64 * deno)).sqrt();
            let fac = if err == 0.0 { 6.0 } else { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.333, 6.0) };
            if err <= 1.0 {
                y.copy_from_slice(&self.y_new);
                x += hs;
                if !last {
                    self.h = h * fac;
                }
                h = self.h.max(1e-300);
                if last {
                    break;
                }
            } else {
                h *= fac.min(1.0);
                self.h = h;
            }
        }
        Ok(())
    }
}
