//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use crate::error::{LabError, Result};
use crate::real::Real;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadTol<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Real> QuadTol<T> {
    pub fn new(abs: f64, rel: f64) -> Self {
        QuadTol { abs: T::c(abs), rel: T::c(rel), max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

fn kronrod<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::c(0.5);
    let mid = (a + b) * T::c(0.5);
    let fc = f(mid);
    let mut k = fc * T::c(WGK[7]);
    let mut g = fc * T::c(WG[3]);
    for j in 0..7 {
        let dx = half * T::c(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        k += s * T::c(WGK[j]);
        if j % 2 == 1 {
            g += s * T::c(WG[j / 2]);
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Integrates `f` over `[a, b]`, bisecting the interval with the largest
/// error estimate until the total estimate meets `tol`.
pub fn integrate<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: &QuadTol<T>) -> Result<Quad<T>> {
    if a == b {
        return Ok(Quad { value: T::zero(), error: T::zero(), intervals: 0 });
    }
    let (v0, e0) = kronrod(&mut f, a, b);
    let mut parts = vec![(a, b, v0, e0)];
    let floor = T::default_epsilon() * T::c(50.0);
    loop {
        let value = parts.iter().fold(T::zero(), |s, p| s + p.2);
        let error = parts.iter().fold(T::zero(), |s, p| s + p.3);
        if !value.is_finite() || !error.is_finite() {
            return Err(LabError::Numerical(format!(
                "quadrature on [{a:e}, {b:e}] produced a non-finite value"
            )));
        }
        let target = tol.abs.max(tol.rel * value.abs()).max(floor * value.abs());
        if error <= target {
            return Ok(Quad { value, error, intervals: parts.len() });
        }
        if parts.len() >= tol.max_intervals {
            return Err(LabError::Numerical(format!(
                "quadrature on [{a:e}, {b:e}] stalled at error {error:e} (target {target:e})"
            )));
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.partial_cmp(&parts[j].3).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = (lo + hi) * T::c(0.5);
        let (vl, el) = kronrod(&mut f, lo, mid);
        let (vr, er) = kronrod(&mut f, mid, hi);
        parts.push((lo, mid, vl, el));
        parts.push((mid, hi, vr, er));
    }
}

/// Integrates over `[a, b]` with `0 < a < b` in the variable `u = ln t`,
/// which tames integrable power singularities at the lower end.
pub fn integrate_log<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: &QuadTol<T>) -> Result<Quad<T>> {
    if a <= T::zero() || b < a {
        return Err(LabError::Domain(format!("log quadrature needs 0 < a <= b, got [{a}, {b}]")));
    }
    integrate(
        |u: T| {
            let t = u.exp();
            f(t) * t
        },
        a.ln(),
        b.ln(),
        tol,
    )
}
