//! Boundary objects: Poisson kernel, Poisson potentials, the jumping kernel
//! and killing density of `ψ(−L_|D)`.

use nalgebra::{DMatrix, DVector};

use crate::bernstein::{levy_density_nu, BernsteinSpec, Family};
use crate::discretize::{Grid, OperatorMatrix};
use crate::error::{LabError, Result};
use crate::quad::{integrate_log, QuadTol};
use crate::real::{gamma, Real};
use crate::spectral::{FunctionalCalculus, Spectrum};

/// Rows this close to an endpoint (in nodes) take the rescaled first-node
/// ratio instead of the extrapolated value, which is unreliable there.
pub const NEAR_FIELD_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    A,
    B,
}

impl Endpoint {
    pub fn column(self) -> usize {
        match self {
            Endpoint::A => 0,
            Endpoint::B => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationDiagnostics<T> {
    /// Node indices whose ratios enter the extrapolation, nearest first.
    pub stencil: [usize; 3],
    pub weights: [T; 3],
    /// Largest relative gap between the 3-point and 2-point extrapolations
    /// over the rows outside the near field.
    pub residual: T,
    pub near_field_rows: usize,
    pub near_field_scale: T,
    pub nonmonotone_rows: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonKernel<T: Real> {
    /// `n × 2`; column 0 belongs to `a`, column 1 to `b`.
    pub values: DMatrix<T>,
    pub diagnostics: [ExtrapolationDiagnostics<T>; 2],
}

impl<T: Real> PoissonKernel<T> {
    pub fn column(&self, z: Endpoint) -> DVector<T> {
        self.values.column(z.column()).into_owned()
    }
}

/// Atoms of the boundary datum at `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData<T> {
    pub zeta_a: T,
    pub zeta_b: T,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(zeta_a: T, zeta_b: T) -> Self {
        BoundaryData { zeta_a, zeta_b }
    }

    /// Counting measure on the two endpoints.
    pub fn sigma() -> Self {
        Self::new(T::one(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.zeta_a >= T::zero() && self.zeta_b >= T::zero()
    }
}

fn lagrange_at_zero<T: Real>(d: [T; 3]) -> [T; 3] {
    let w = |k: usize| {
        let (p, q) = ((k + 1) % 3, (k + 2) % 3);
        d[p] * d[q] / ((d[k] - d[p]) * (d[k] - d[q]))
    };
    [w(0), w(1), w(2)]
}

/// Limit of `M(x, y)/V(δ(y))` as `y` approaches each endpoint.
///
/// Applied to `G^ψ` this is the Poisson kernel; applied to `G` it gives the
/// boundary kernel of the unsubordinated process.
pub fn boundary_extrapolation<T: Real>(
    m: &OperatorMatrix<T>,
    grid: &Grid<T>,
    v: impl Fn(T) -> T,
) -> Result<PoissonKernel<T>> {
    let n = grid.n;
    if m.n() != n {
        return Err(LabError::Config(format!("kernel of size {} does not match grid of {n} nodes", m.n())));
    }
    if n < 2 * NEAR_FIELD_ROWS {
        return Err(LabError::Config(format!("boundary extrapolation needs n >= {}", 2 * NEAR_FIELD_ROWS)));
    }
    let mut values = DMatrix::zeros(n, 2);
    let mut diags = Vec::with_capacity(2);
    for z in [Endpoint::A, Endpoint::B] {
        let stencil = match z {
            Endpoint::A => [0, 1, 2],
            Endpoint::B => [n - 1, n - 2, n - 3],
        };
        let d = stencil.map(|k| grid.delta[k]);
        let vd = d.map(&v);
        let w = lagrange_at_zero(d);
        let w2 = [d[1] / (d[1] - d[0]), d[0] / (d[0] - d[1])];
        let ratio = |i: usize, k: usize| m.entries[(i, stencil[k])] / vd[k];
        let rich = |i: usize| w[0] * ratio(i, 0) + w[1] * ratio(i, 1) + w[2] * ratio(i, 2);
        // Distance of a row from this endpoint, counted in nodes.
        let depth = |i: usize| match z {
            Endpoint::A => i,
            Endpoint::B => n - 1 - i,
        };
        let anchor = match z {
            Endpoint::A => NEAR_FIELD_ROWS,
            Endpoint::B => n - 1 - NEAR_FIELD_ROWS,
        };
        let scale = rich(anchor) / ratio(anchor, 0);
        let (mut residual, mut nonmono) = (T::zero(), 0usize);
        for i in 0..n {
            let val = if depth(i) < NEAR_FIELD_ROWS {
                ratio(i, 0) * scale
            } else {
                let r = rich(i);
                let two = w2[0] * ratio(i, 0) + w2[1] * ratio(i, 1);
                residual = residual.max(((r - two) / r).abs());
                let (s1, s2) = (ratio(i, 1) - ratio(i, 0), ratio(i, 2) - ratio(i, 1));
                if s1 * s2 < -T::c(1e-8) * ratio(i, 0) * ratio(i, 0) {
                    nonmono += 1;
                }
                r
            };
            values[(i, z.column())] = val;
        }
        let mut warning = None;
        if nonmono > 0 {
            warning = Some(format!("{nonmono} rows have a non-monotone ratio sequence"));
        }
        let col = values.column(z.column());
        if col.iter().any(|p| !(*p > T::zero())) {
            let msg = "extrapolated kernel has non-positive entries".to_string();
            warning = Some(warning.map_or(msg.clone(), |w| format!("{w}; {msg}")));
        }
        diags.push(ExtrapolationDiagnostics {
            stencil,
            weights: w,
            residual,
            near_field_rows: NEAR_FIELD_ROWS,
            near_field_scale: scale,
            nonmonotone_rows: nonmono,
            warning,
        });
    }
    let b = diags.pop().expect("two endpoints");
    let a = diags.pop().expect("two endpoints");
    Ok(PoissonKernel { values, diagnostics: [a, b] })
}

/// Poisson kernel `lim_{y→z} G^ψ(x,y)/V(δ(y))`.
pub fn poisson_kernel<T: Real>(gpsi: &OperatorMatrix<T>, grid: &Grid<T>, v: impl Fn(T) -> T) -> Result<PoissonKernel<T>> {
    boundary_extrapolation(gpsi, grid, v)
}

pub fn poisson_potential<T: Real>(k: &PoissonKernel<T>, zeta: &BoundaryData<T>) -> DVector<T> {
    k.column(Endpoint::A) * zeta.zeta_a + k.column(Endpoint::B) * zeta.zeta_b
}

/// Interior size of `ψ(−L)u` relative to `u`: the maximum of
/// `|(ψ(−L)u)_i|` over nodes with `δ_i ≥ margin`, divided by the maximum of
/// `|u_i|` over the same nodes.
pub fn harmonicity_residual<T: Real>(
    u: &DVector<T>,
    psi_op: &FunctionalCalculus<T>,
    grid: &Grid<T>,
    margin: T,
) -> Result<T> {
    if margin < grid.h * T::c(4.0) {
        return Err(LabError::Config(format!("interior margin {margin} is below 4h = {}", grid.h * T::c(4.0))));
    }
    let lu = psi_op.matrix.apply(grid, u);
    let (mut top, mut scale) = (T::zero(), T::zero());
    for i in 0..grid.n {
        if grid.delta[i] >= margin {
            top = top.max(lu[i].abs());
            scale = scale.max(u[i].abs());
        }
    }
    if scale == T::zero() {
        return Err(LabError::Numerical("function vanishes on the interior set".into()));
    }
    Ok(top / scale)
}

/// Time-quadrature settings for the jumping kernel and killing density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuad<T> {
    /// Inner function; sets the split time `V(r)²`.
    pub phi: BernsteinSpec<T>,
    pub abs_tol: T,
    pub rel_tol: T,
}

impl<T: Real> KernelQuad<T> {
    pub fn new(phi: BernsteinSpec<T>) -> Self {
        KernelQuad { phi, abs_tol: T::c(1e-13), rel_tol: T::c(1e-10) }
    }
}

struct TimeWindow<T> {
    lo: T,
    split: T,
    hi: T,
}

fn time_window<T: Real>(spec: &Spectrum<T>, phi: &BernsteinSpec<T>, r: T) -> TimeWindow<T> {
    let lmax = spec.eigenvalues[spec.n() - 1];
    let lo = T::c(1e-6) / lmax;
    let hi = T::c(40.0) / spec.lambda1();
    let v = crate::bernstein::renewal_value(phi, r);
    TimeWindow { lo, split: (v * v).max(lo).min(hi), hi }
}

/// `∫_lo^hi ν(t) t^power dt`.
fn nu_moment<T: Real>(psi: &BernsteinSpec<T>, lo: T, hi: T, power: i32, tol: &QuadTol<T>) -> Result<T> {
    if let Family::Stable { s } = psi.family {
        let e = T::usize(power as usize) - s;
        let k = s / gamma(T::one() - s);
        return Ok(if hi.is_finite() { k * (hi.powf(e) - lo.powf(e)) / e } else { -k * lo.powf(e) / e });
    }
    let hi = if hi.is_finite() { hi } else { lo * T::c(1e16) };
    let f = |t: T| psi.value(T::one() / t) / t * t.powi(power);
    Ok(integrate_log(f, lo, hi, tol)?.value)
}

fn integrate_window<T: Real>(
    w: &TimeWindow<T>,
    tol: &QuadTol<T>,
    mut f: impl FnMut(T) -> T,
) -> Result<T> {
    let first = integrate_log(&mut f, w.lo, w.split, tol)?;
    let second = integrate_log(&mut f, w.split, w.hi, tol)?;
    Ok(first.value + second.value)
}

fn check_node<T: Real>(spec: &Spectrum<T>, i: usize) -> Result<()> {
    if i < spec.n() {
        Ok(())
    } else {
        Err(LabError::Config(format!("node index {i} out of range for n = {}", spec.n())))
    }
}

/// Jumping kernel `J_D(x_i, x_j) = ∫ p_D(t, x_i, x_j) ν(t) dt` for `i ≠ j`.
pub fn jumping_kernel_jd<T: Real>(
    spec: &Spectrum<T>,
    psi: &BernsteinSpec<T>,
    i: usize,
    j: usize,
    quad: &KernelQuad<T>,
) -> Result<T> {
    check_node(spec, i)?;
    check_node(spec, j)?;
    if i == j {
        return Err(LabError::Domain("jumping kernel is defined off the diagonal only".into()));
    }
    let coef = spec.vectors.row(i).component_mul(&spec.vectors.row(j)).transpose();
    let lam = &spec.eigenvalues;
    let heat = |t: T| coef.iter().zip(lam.iter()).fold(T::zero(), |s, (c, l)| s + *c * (-*l * t).exp());
    let tol = QuadTol { abs: quad.abs_tol, rel: quad.rel_tol, max_intervals: 4000 };
    let r = (spec.grid.nodes[i] - spec.grid.nodes[j]).abs();
    let w = time_window(spec, &quad.phi, r);
    let nu = |t: T| levy_density_nu(psi, t).map(|d| d.value).unwrap_or(T::zero());
    let body = integrate_window(&w, &tol, |t| heat(t) * nu(t))?;
    // Below t_lo the heat kernel is linear in t with slope −A_ij.
    let slope = -coef.iter().zip(lam.iter()).fold(T::zero(), |s, (c, l)| s + *c * *l);
    let head = slope * nu_moment(psi, w.lo * T::c(1e-12), w.lo, 1, &tol)?;
    Ok(body + head)
}

/// Killing density `κ(x_i) = ∫ (1 − P_t^D 1(x_i)) ν(t) dt`.
pub fn killing_density_psi<T: Real>(
    spec: &Spectrum<T>,
    psi: &BernsteinSpec<T>,
    i: usize,
    quad: &KernelQuad<T>,
) -> Result<T> {
    check_node(spec, i)?;
    let mass = spec.vectors.tr_mul(&spec.grid.weights);
    let coef = spec.vectors.row(i).transpose().component_mul(&mass);
    let lam = &spec.eigenvalues;
    // Σ_k coef_k = 1 exactly in exact arithmetic; use the expm1 form to keep
    // the small-time difference accurate.
    let escape = |t: T| -coef.iter().zip(lam.iter()).fold(T::zero(), |s, (c, l)| s + *c * (-*l * t).exp_m1());
    let tol = QuadTol { abs: quad.abs_tol, rel: quad.rel_tol, max_intervals: 4000 };
    let w = time_window(spec, &quad.phi, spec.grid.delta[i]);
    let nu = |t: T| levy_density_nu(psi, t).map(|d| d.value).unwrap_or(T::zero());
    let body = integrate_window(&w, &tol, |t| escape(t) * nu(t))?;
    let slope = coef.iter().zip(lam.iter()).fold(T::zero(), |s, (c, l)| s + *c * *l);
    let head = slope * nu_moment(psi, w.lo * T::c(1e-12), w.lo, 1, &tol)?;
    let tail = escape(w.hi) * nu_moment(psi, w.hi, T::c(f64::INFINITY), 0, &tol)?;
    Ok(body + head + tail)
}
