//! Power-law fits near the boundary and two-sided envelope bands.

use nalgebra::DVector;

use crate::discretize::{Grid, OperatorMatrix};
use crate::error::{LabError, Result};
use crate::real::Real;

/// Fewest dyadic layers a boundary fit accepts.
pub const MIN_LAYERS: usize = 5;

/// Outer edge of the default fit window, in grid spacings.
pub const DEFAULT_WINDOW_CELLS: f64 = 40.0;

/// Residual improvement the log-corrected model must achieve to be flagged.
const LOG_GAIN: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub sse: T,
}

/// Least-squares line through `(x_k, y_k)`.
pub fn fit_line<T: Real>(x: &[T], y: &[T]) -> Result<LineFit<T>> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(LabError::Config(format!("line fit needs two or more matching points, got {n}")));
    }
    let nn = T::usize(n);
    let mx = x.iter().fold(T::zero(), |s, v| s + *v) / nn;
    let my = y.iter().fold(T::zero(), |s, v| s + *v) / nn;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (*xi - mx, *yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == T::zero() {
        return Err(LabError::Numerical("line fit with a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = x.iter().zip(y).fold(T::zero(), |s, (xi, yi)| {
        let r = *yi - intercept - slope * *xi;
        s + r * r
    });
    let r_squared = if syy > T::zero() { (T::one() - sse / syy).max(T::zero()).min(T::one()) } else { T::one() };
    Ok(LineFit { slope, intercept, r_squared, sse })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_power_law<T: Real>(x: &[T], y: &[T]) -> Result<LineFit<T>> {
    if x.iter().chain(y).any(|v| !(*v > T::zero())) {
        return Err(LabError::Numerical("power-law fit needs positive data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit<T> {
    pub exponent: T,
    pub intercept: T,
    pub r_squared: T,
    pub log_correction_detected: bool,
    /// Exponent of the pure power-law model, whichever model is reported.
    pub plain_exponent: T,
    /// Layer representatives `(δ, |value|)`, strictly decreasing in `δ`.
    pub layers: Vec<(T, T)>,
}

/// Fits `|v| ≈ c δ^e` over dyadic layers `(2^{−k−1}, 2^{−k}]·δ_max` that
/// lie above `max(δ_min, 2h)`.
///
/// A log-corrected model `c δ^e log(diam/δ)` replaces the plain one when it
/// cuts the squared residual by at least 30%.
pub fn fit_boundary_rate<T: Real>(values: &DVector<T>, grid: &Grid<T>, delta_min: T, delta_max: T) -> Result<RateFit<T>> {
    if values.len() != grid.n {
        return Err(LabError::Config(format!("{} values for a grid of {} nodes", values.len(), grid.n)));
    }
    let floor = delta_min.max(grid.h * T::c(2.0));
    let mut layers = Vec::new();
    let mut upper = delta_max;
    while upper >= floor {
        let lower = upper * T::c(0.5);
        let (mut ld, mut lv, mut count) = (T::zero(), T::zero(), 0usize);
        for (d, v) in grid.delta.iter().zip(values.iter()) {
            if *d > lower && *d <= upper && *d >= floor {
                let av = v.abs();
                if !(av > T::zero()) || !av.is_finite() {
                    return Err(LabError::Numerical(format!("boundary fit met a zero or non-finite value at δ = {d}")));
                }
                ld += d.ln();
                lv += av.ln();
                count += 1;
            }
        }
        if count > 0 {
            let c = T::usize(count);
            layers.push(((ld / c).exp(), (lv / c).exp()));
        }
        upper = lower;
    }
    if layers.len() < MIN_LAYERS {
        return Err(LabError::Config(format!(
            "boundary fit over [{floor:e}, {delta_max:e}] has {} dyadic layers, needs {MIN_LAYERS}",
            layers.len()
        )));
    }
    let lx: Vec<T> = layers.iter().map(|l| l.0.ln()).collect();
    let ly: Vec<T> = layers.iter().map(|l| l.1.ln()).collect();
    let plain = fit_line(&lx, &ly)?;
    let diam = grid.diameter();
    let log_fit = if layers.iter().all(|l| l.0 < diam) {
        let ly2: Vec<T> = layers.iter().map(|l| l.1.ln() - (diam / l.0).ln().ln()).collect();
        Some(fit_line(&lx, &ly2)?)
    } else {
        None
    };
    Ok(match log_fit {
        Some(lf) if lf.sse <= plain.sse * T::c(LOG_GAIN) => RateFit {
            exponent: lf.slope,
            intercept: lf.intercept,
            r_squared: lf.r_squared,
            log_correction_detected: true,
            plain_exponent: plain.slope,
            layers,
        },
        _ => RateFit {
            exponent: plain.slope,
            intercept: plain.intercept,
            r_squared: plain.r_squared,
            log_correction_detected: false,
            plain_exponent: plain.slope,
            layers,
        },
    })
}

/// Boundary fit over the default window `[2h, 40h]`.
pub fn fit_boundary_rate_default<T: Real>(values: &DVector<T>, grid: &Grid<T>) -> Result<RateFit<T>> {
    fit_boundary_rate(values, grid, grid.h * T::c(2.0), grid.h * T::c(DEFAULT_WINDOW_CELLS))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeBand<T> {
    pub c_low: T,
    pub c_high: T,
    /// Included entries that were not positive and so left out of the ratios.
    pub nonpositive_entries: usize,
    pub compared: usize,
}

impl<T: Real> EnvelopeBand<T> {
    pub fn width(&self) -> T {
        self.c_high / self.c_low
    }
}

/// Extreme ratios `M_ij / formula(x_i, x_j)` over pairs with `|i − j| ≥ k`.
pub fn envelope_check<T: Real>(
    m: &OperatorMatrix<T>,
    grid: &Grid<T>,
    formula: impl Fn(T, T) -> T,
    exclusion: usize,
) -> Result<EnvelopeBand<T>> {
    let n = grid.n;
    let (mut lo, mut hi) = (T::zero(), T::zero());
    let (mut bad, mut count) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) < exclusion {
                continue;
            }
            let f = formula(grid.nodes[i], grid.nodes[j]);
            if !(f > T::zero()) || !f.is_finite() {
                return Err(LabError::Precondition(format!(
                    "envelope formula is not positive at ({}, {})",
                    grid.nodes[i], grid.nodes[j]
                )));
            }
            let e = m.entries[(i, j)];
            if !(e > T::zero()) {
                bad += 1;
                continue;
            }
            let r = e / f;
            if count == 0 {
                lo = r;
                hi = r;
            } else {
                lo = lo.min(r);
                hi = hi.max(r);
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(LabError::Numerical("no positive entries to compare with the envelope".into()));
    }
    Ok(EnvelopeBand { c_low: lo, c_high: hi, nonpositive_entries: bad, compared: count })
}

fn distance_to_boundary<T: Real>(x: T, a: T, b: T) -> T {
    (x - a).min(b - x)
}

/// Sharp two-sided profile of `G^ψ(x,y)` on `(a,b)`:
/// `(V(δx)/V(r) ∧ 1)(V(δy)/V(r) ∧ 1) / (r ψ(V(r)⁻²))` with `r = |x − y|`.
pub fn green_envelope<T: Real>(
    phi: crate::bernstein::BernsteinSpec<T>,
    psi: crate::bernstein::BernsteinSpec<T>,
    a: T,
    b: T,
) -> impl Fn(T, T) -> T {
    move |x, y| {
        let v = |t: T| crate::bernstein::renewal_value(&phi, t);
        let r = (x - y).abs();
        let vr = v(r);
        let fx = (v(distance_to_boundary(x, a, b)) / vr).min(T::one());
        let fy = (v(distance_to_boundary(y, a, b)) / vr).min(T::one());
        fx * fy / (r * psi.value(T::one() / (vr * vr)))
    }
}

/// Small-time profile of the killed `β`-stable heat kernel:
/// `(V(δx)/√t ∧ 1)(V(δy)/√t ∧ 1)(t^{−1/β} ∧ t r^{−1−β})`.
pub fn heat_envelope<T: Real>(beta: T, t: T, a: T, b: T) -> impl Fn(T, T) -> T {
    move |x, y| {
        let v = |s: T| s.powf(beta * T::c(0.5));
        let st = t.sqrt();
        let r = (x - y).abs();
        let fx = (v(distance_to_boundary(x, a, b)) / st).min(T::one());
        let fy = (v(distance_to_boundary(y, a, b)) / st).min(T::one());
        let free = t.powf(-T::one() / beta).min(t * r.powf(-T::one() - beta));
        fx * fy * free
    }
}

/// Log-log slope of `λ_j` against `j` over `lo ≤ j ≤ hi` (1-based).
pub fn weyl_fit<T: Real>(eigenvalues: &DVector<T>, lo: usize, hi: usize) -> Result<LineFit<T>> {
    if lo < 1 || hi > eigenvalues.len() || hi < lo + 2 {
        return Err(LabError::Config(format!(
            "Weyl window [{lo}, {hi}] needs 1 <= lo, hi <= {} and three or more indices",
            eigenvalues.len()
        )));
    }
    let j: Vec<T> = (lo..=hi).map(T::usize).collect();
    let l: Vec<T> = (lo..=hi).map(|k| eigenvalues[k - 1]).collect();
    fit_power_law(&j, &l)
}
