//! Globally adaptive Gauss–Kronrod (7/15 point) quadrature on finite
//! intervals, plus a nested two-dimensional version.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 5000;

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Interval> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    Ok(Interval {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    })
}

/// `∫_a^b f` to absolute tolerance `tol`, for integrands that may fail.
pub fn integrate_fallible<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("interval", "quadrature bounds must be finite"));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let mut intervals = vec![gk15(&mut f, a, b)?];
    loop {
        let value: f64 = intervals.iter().map(|i| i.value).sum();
        let error: f64 = intervals.iter().map(|i| i.error).sum();
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if error <= tol.max(64.0 * f64::EPSILON * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { tol, err: error });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let iv = intervals.swap_remove(worst);
        let mid = 0.5 * (iv.a + iv.b);
        if mid <= iv.a || mid >= iv.b {
            return Err(Error::Quadrature { tol, err: error });
        }
        intervals.push(gk15(&mut f, iv.a, mid)?);
        intervals.push(gk15(&mut f, mid, iv.b)?);
    }
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    integrate_fallible(|x| Ok(f(x)), a, b, tol)
}

/// `∫_{x0}^{x1} ∫_{y0}^{y1} f(x, y) dy dx` by nested adaptive quadrature.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    tol: f64,
) -> Result<Estimate> {
    let width = (x1 - x0).abs().max(1e-300);
    let inner_tol = 0.1 * tol / width;
    let mut inner_error = 0.0_f64;
    let outer = integrate_fallible(
        |x| {
            let e = integrate(|y| f(x, y), y0, y1, inner_tol)?;
            inner_error = inner_error.max(e.error);
            Ok(e.value)
        },
        x0,
        x1,
        0.9 * tol,
    )?;
    Ok(Estimate {
        value: outer.value,
        error: outer.error + inner_error * width,
    })
}
