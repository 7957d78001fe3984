//! Linear and semilinear boundary blow-up problems for `ψ(−L_|D)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{fit_boundary_rate_default, RateFit};
use crate::bernstein::{renewal_value, BernsteinSpec};
use crate::discretize::{assemble_generator, build_grid, Grid, OperatorMatrix};
use crate::error::{LabError, Result};
use crate::kernels::{poisson_kernel, poisson_potential, BoundaryData, PoissonKernel};
use crate::real::Real;
use crate::spectral::{apply_psi, eigendecompose, green_matrix, FunctionalCalculus, GreenKind, Spectrum};

/// Everything a solve needs on one grid: the spectrum, `G^ψ`, the Poisson
/// kernel and the reference function `P^ψσ`.
#[derive(Debug, Clone)]
pub struct Problem<T: Real> {
    pub grid: Grid<T>,
    pub beta: T,
    pub phi: BernsteinSpec<T>,
    pub psi: BernsteinSpec<T>,
    pub generator: OperatorMatrix<T>,
    pub spectrum: Spectrum<T>,
    pub gpsi: OperatorMatrix<T>,
    pub poisson: PoissonKernel<T>,
    pub psigma: DVector<T>,
    /// `V(δ_i)`.
    pub v: DVector<T>,
}

impl<T: Real> Problem<T> {
    pub fn new(grid: Grid<T>, beta: T, psi: BernsteinSpec<T>) -> Result<Self> {
        let phi = BernsteinSpec::phi_stable(beta)?;
        let generator = assemble_generator(&grid, beta)?;
        let spectrum = eigendecompose(&generator, &grid)?;
        let gpsi = green_matrix(&spectrum, GreenKind::Psi, &psi);
        let poisson = poisson_kernel(&gpsi, &grid, |d| renewal_value(&phi, d))?;
        let psigma = poisson_potential(&poisson, &BoundaryData::sigma());
        let v = grid.delta.map(|d| renewal_value(&phi, d));
        Ok(Problem { grid, beta, phi, psi, generator, spectrum, gpsi, poisson, psigma, v })
    }

    /// Interval `(-1, 1)` with `n` nodes, `φ(λ) = λ^{β/2}` and `ψ(λ) = λ^{α/2}`.
    pub fn stable(n: usize, beta: T, alpha: T) -> Result<Self> {
        let grid = build_grid(-T::one(), T::one(), n)?;
        Self::new(grid, beta, BernsteinSpec::psi_stable(alpha)?)
    }

    /// `G^ψ W g`.
    pub fn green(&self, g: &DVector<T>) -> DVector<T> {
        self.gpsi.apply(&self.grid, g)
    }

    pub fn poisson_potential(&self, zeta: &BoundaryData<T>) -> DVector<T> {
        poisson_potential(&self.poisson, zeta)
    }

    pub fn psi_operator(&self) -> FunctionalCalculus<T> {
        apply_psi(&self.spectrum, &self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    NonPositive,
    NonNegative,
    Signed,
}

pub type PointwiseMap<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// `f(x, t)` with growth bound `|f(x,t)| ≤ m δ(x)^θ |t|^p`.
///
/// Without a custom map the nonlinearity is `−m δ^θ |t|^p` (non-positive),
/// `m δ^θ (t⁺)^p` (non-negative) or `−m δ^θ sign(t)|t|^p` (signed).
#[derive(Clone)]
pub struct Nonlinearity<T> {
    pub theta: T,
    pub p: T,
    pub sign: Sign,
    pub m: T,
    pub custom: Option<PointwiseMap<T>>,
}

impl<T: fmt::Debug> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("theta", &self.theta)
            .field("p", &self.p)
            .field("sign", &self.sign)
            .field("m", &self.m)
            .field("custom", &self.custom.is_some())
            .finish()
    }
}

impl<T: Real> Nonlinearity<T> {
    pub fn power(sign: Sign, theta: T, p: T, m: T) -> Result<Self> {
        if !(p > T::zero()) || !(m > T::zero()) {
            return Err(LabError::Config(format!("nonlinearity needs p > 0 and m > 0, got p = {p}, m = {m}")));
        }
        Ok(Nonlinearity { theta, p, sign, m, custom: None })
    }

    pub fn with_map(mut self, f: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        self.custom = Some(Arc::new(f));
        self
    }

    /// `f ≡ 0`, with a zero growth bound so preconditions hold trivially.
    pub fn zero(sign: Sign) -> Self {
        Nonlinearity { theta: T::zero(), p: T::one(), sign, m: T::zero(), custom: Some(Arc::new(|_, _| T::zero())) }
    }

    /// Weight `q(δ) = m δ^θ`.
    pub fn q(&self, delta: T) -> T {
        self.m * delta.powf(self.theta)
    }

    /// Growth profile `Λ(t) = |t|^p`.
    pub fn growth(&self, t: T) -> T {
        t.abs().powf(self.p)
    }

    pub fn eval(&self, x: T, delta: T, t: T) -> T {
        if let Some(f) = &self.custom {
            return f(x, t);
        }
        let mag = self.q(delta) * self.growth(t);
        match self.sign {
            Sign::NonPositive => -mag,
            Sign::NonNegative => {
                if t > T::zero() {
                    mag
                } else {
                    T::zero()
                }
            }
            Sign::Signed => {
                if t > T::zero() {
                    -mag
                } else if t < T::zero() {
                    mag
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn eval_grid(&self, grid: &Grid<T>, u: &DVector<T>) -> DVector<T> {
        DVector::from_fn(grid.n, |i, _| self.eval(grid.nodes[i], grid.delta[i], u[i]))
    }

    /// Largest excess of `|f(x,t)|` over `q(x)Λ(|t|)` on the sample values.
    pub fn bound_excess(&self, grid: &Grid<T>, samples: &[T]) -> T {
        let mut worst = T::zero();
        for i in 0..grid.n {
            for &t in samples {
                let f = self.eval(grid.nodes[i], grid.delta[i], t).abs();
                worst = worst.max(f - self.q(grid.delta[i]) * self.growth(t));
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub solution: DVector<T>,
    pub iterations: usize,
    pub residual_trace: Vec<T>,
    pub converged: bool,
    pub boundary_fit: Option<RateFit<T>>,
    pub monotone: Option<bool>,
    pub kato_violation: Option<T>,
    /// Iterates that left the expected bracket, counted per node and step.
    pub bracket_violations: usize,
    pub damping: T,
}

impl<T: Real> SolveReport<T> {
    fn finish(problem: &Problem<T>, solution: DVector<T>, iterations: usize, trace: Vec<T>, converged: bool) -> Self {
        let boundary_fit = fit_boundary_rate_default(&solution, &problem.grid).ok();
        SolveReport {
            solution,
            iterations,
            residual_trace: trace,
            converged,
            boundary_fit,
            monotone: None,
            kato_violation: None,
            bracket_violations: 0,
            damping: T::one(),
        }
    }

    pub fn final_residual(&self) -> Option<T> {
        self.residual_trace.last().copied()
    }
}

/// Right-hand side of the linear problem.
#[derive(Debug, Clone)]
pub enum LinearData<T: Real> {
    /// Density with respect to Lebesgue measure, sampled at the nodes.
    Density(DVector<T>),
    /// Point masses `(node, mass)`.
    Atoms(Vec<(usize, T)>),
    /// `δ^κ`, admissible only for `κ > −1 − β/2`.
    DistancePower(T),
}

pub fn solve_linear<T: Real>(problem: &Problem<T>, data: &LinearData<T>, zeta: &BoundaryData<T>) -> Result<SolveReport<T>> {
    let grid = &problem.grid;
    let density = match data {
        LinearData::Density(d) => {
            if d.len() != grid.n {
                return Err(LabError::Config(format!("data of length {} for {} nodes", d.len(), grid.n)));
            }
            d.clone()
        }
        LinearData::Atoms(atoms) => {
            let mut d = DVector::zeros(grid.n);
            for &(k, mass) in atoms {
                if k >= grid.n {
                    return Err(LabError::Config(format!("atom at node {k} out of range")));
                }
                d[k] += mass / grid.weights[k];
            }
            d
        }
        LinearData::DistancePower(kappa) => {
            let limit = -T::one() - problem.beta * T::c(0.5);
            if !(*kappa > limit) {
                return Err(LabError::Infeasible(format!(
                    "δ^κ with κ = {kappa} is not integrable against V(δ); need κ > {limit}"
                )));
            }
            grid.delta.map(|d| d.powf(*kappa))
        }
    };
    let u = problem.green(&density) + problem.poisson_potential(zeta);
    Ok(SolveReport::finish(problem, u, 1, vec![T::zero()], true))
}

fn sup_scale<T: Real>(u: &DVector<T>) -> T {
    u.amax().max(T::one())
}

/// Minimal solution of `u = G^ψ W f(·,u) + P^ψζ` for a non-negative,
/// nondecreasing `f`, by monotone iteration from `P^ψζ`.
///
/// `tol` bounds the sup-norm step relative to `max(1, sup|u|)`.
pub fn solve_monotone<T: Real>(
    problem: &Problem<T>,
    f: &Nonlinearity<T>,
    zeta: &BoundaryData<T>,
    tol: T,
    max_iter: usize,
) -> Result<SolveReport<T>> {
    if f.sign != Sign::NonNegative {
        return Err(LabError::Config("monotone scheme needs a non-negative nonlinearity".into()));
    }
    if !zeta.is_nonnegative() {
        return Err(LabError::Config("monotone scheme needs nonnegative boundary data".into()));
    }
    let grid = &problem.grid;
    let base = problem.poisson_potential(zeta);
    let load = DVector::from_fn(grid.n, |i, _| f.q(grid.delta[i]) * f.growth(base[i] * T::c(2.0)));
    let lhs = problem.green(&load);
    let slack = T::c(1e-12) * sup_scale(&base);
    if let Some(i) = (0..grid.n).find(|&i| lhs[i] > base[i] + slack) {
        return Err(LabError::Precondition(format!(
            "G(qΛ(2P)) <= P fails at node {i} (x = {}): {} > {}",
            grid.nodes[i], lhs[i], base[i]
        )));
    }
    let mut u = base.clone();
    let mut trace = Vec::new();
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let next = problem.green(&f.eval_grid(grid, &u)) + &base;
        let floor = T::c(1e-12) * sup_scale(&u);
        if next.iter().zip(u.iter()).any(|(a, b)| *a < *b - floor) {
            monotone = false;
        }
        let step = (&next - &u).amax() / sup_scale(&next);
        trace.push(step);
        u = next;
        if !step.is_finite() {
            break;
        }
        if step <= tol {
            converged = true;
            break;
        }
    }
    let mut report = SolveReport::finish(problem, u, iterations, trace, converged);
    report.monotone = Some(monotone);
    Ok(report)
}

/// Damping rule for the absorption iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping<T> {
    Fixed(T),
    /// `ω = 1` when the linearized map contracts, `2/(2+L)` otherwise, with
    /// `L` the largest eigenvalue of the linearization at `P^ψζ`.
    Auto,
}

fn linearized_norm<T: Real>(problem: &Problem<T>, f: &Nonlinearity<T>, base: &DVector<T>) -> T {
    let grid = &problem.grid;
    let d = DVector::from_fn(grid.n, |i, _| {
        let deriv = f.q(grid.delta[i]) * f.p * base[i].abs().powf(f.p - T::one());
        (deriv * grid.weights[i]).sqrt()
    });
    let mut x = DVector::from_element(grid.n, T::one());
    let mut est = T::zero();
    for _ in 0..200 {
        let y = (&problem.gpsi.entries * x.component_mul(&d)).component_mul(&d);
        let norm = y.norm();
        if norm == T::zero() || !norm.is_finite() {
            return norm;
        }
        let next = norm / x.norm();
        x = y / norm;
        if (next - est).abs() <= T::c(1e-6) * next {
            return next;
        }
        est = next;
    }
    est
}

/// Solves `u = G^ψ W f(·,u) + P^ψζ` for a non-positive `f` by damped
/// Picard iteration. Iterates are expected in `[0, P^ψζ]`; excursions are
/// counted in the report, never clamped.
pub fn solve_absorption<T: Real>(
    problem: &Problem<T>,
    f: &Nonlinearity<T>,
    zeta: &BoundaryData<T>,
    tol: T,
    max_iter: usize,
    damping: Damping<T>,
) -> Result<SolveReport<T>> {
    if f.sign != Sign::NonPositive {
        return Err(LabError::Config("absorption solver needs a non-positive nonlinearity".into()));
    }
    if !zeta.is_nonnegative() {
        return Err(LabError::Config("absorption solver needs nonnegative boundary data".into()));
    }
    let grid = &problem.grid;
    let base = problem.poisson_potential(zeta);
    let surrogate = integrability_surrogate(problem, f, &base);
    if !surrogate.is_finite() {
        return Err(LabError::Infeasible("qΛ(P^ψζ) is not integrable against V(δ)".into()));
    }
    let omega = match damping {
        Damping::Fixed(w) if w > T::zero() && w <= T::one() => w,
        Damping::Fixed(w) => return Err(LabError::Config(format!("damping must lie in (0,1], got {w}"))),
        Damping::Auto => {
            let l = linearized_norm(problem, f, &base);
            if l < T::one() {
                T::one()
            } else {
                T::c(2.0) / (T::c(2.0) + l)
            }
        }
    };
    let mut u = base.clone();
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut doublings = 0;
    let mut violations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let image = problem.green(&f.eval_grid(grid, &u)) + &base;
        let res = (&image - &u).amax() / sup_scale(&u);
        if let Some(prev) = trace.last() {
            doublings = if res >= *prev * T::c(2.0) { doublings + 1 } else { 0 };
        }
        trace.push(res);
        if !res.is_finite() || doublings >= 5 {
            break;
        }
        if res <= tol {
            u = image;
            converged = true;
            break;
        }
        u = &u * (T::one() - omega) + image * omega;
        let slack = tol * sup_scale(&base);
        violations += u.iter().zip(base.iter()).filter(|(x, p)| **x < -slack || **x > **p + slack).count();
    }
    let mut report = SolveReport::finish(problem, u, iterations, trace, converged);
    report.damping = omega;
    report.bracket_violations = violations;
    Ok(report)
}

/// Picard iteration (damping 0.5) on `K v = G^ψ W F(·,v) + P^ψζ`, where
/// `F` evaluates `f` at `v` clamped into `[sub, sup]`.
#[allow(clippy::too_many_arguments)]
pub fn solve_truncated<T: Real>(
    problem: &Problem<T>,
    f: &Nonlinearity<T>,
    sub: &DVector<T>,
    sup: &DVector<T>,
    zeta: &BoundaryData<T>,
    tol: T,
    max_iter: usize,
    start: Option<&DVector<T>>,
) -> Result<SolveReport<T>> {
    let grid = &problem.grid;
    if sub.len() != grid.n || sup.len() != grid.n {
        return Err(LabError::Config("bracket length does not match the grid".into()));
    }
    if let Some(i) = (0..grid.n).find(|&i| sub[i] > sup[i]) {
        return Err(LabError::Precondition(format!("sub exceeds super at node {i}")));
    }
    let base = problem.poisson_potential(zeta);
    let omega = T::c(0.5);
    let clamp = |v: &DVector<T>| DVector::from_fn(grid.n, |i, _| v[i].max(sub[i]).min(sup[i]));
    let mut u = match start {
        Some(s) if s.len() == grid.n => s.clone(),
        Some(_) => return Err(LabError::Config("start vector length does not match the grid".into())),
        None => clamp(&base),
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let image = problem.green(&f.eval_grid(grid, &clamp(&u))) + &base;
        let res = (&image - &u).amax() / sup_scale(&u);
        trace.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            u = image;
            converged = true;
            break;
        }
        u = &u * (T::one() - omega) + image * omega;
    }
    let mut report = SolveReport::finish(problem, u, iterations, trace, converged);
    report.damping = omega;
    if converged {
        let slack = tol * sup_scale(&report.solution);
        let bad = (0..grid.n)
            .filter(|&i| report.solution[i] < sub[i] - slack || report.solution[i] > sup[i] + slack)
            .count();
        if bad > 0 {
            return Err(LabError::Inconsistency(format!("{bad} nodes of the fixed point leave [sub, super]")));
        }
    }
    Ok(report)
}

/// Start vectors drawn uniformly inside `[sub, sup]`.
pub fn random_starts<T: Real>(sub: &DVector<T>, sup: &DVector<T>, count: usize, seed: u64) -> Vec<DVector<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(sub.len(), |i, _| sub[i] + (sup[i] - sub[i]) * T::c(rng.gen::<f64>())))
        .collect()
}

/// `max_i (u_i⁺ − (G^ψ W (1_{u>0} f))_i)`.
pub fn kato_check<T: Real>(problem: &Problem<T>, u: &DVector<T>, f_vals: &DVector<T>) -> T {
    let masked = DVector::from_fn(u.len(), |i, _| if u[i] > T::zero() { f_vals[i] } else { T::zero() });
    let rhs = problem.green(&masked);
    (0..u.len()).fold(-T::c(f64::MAX), |m, i| m.max(u[i].max(T::zero()) - rhs[i]))
}

pub fn critical_exponent<T: Real>(alpha: T, beta: T, theta: T) -> Result<T> {
    let two = T::c(2.0);
    if !(alpha > T::zero() && alpha < two && beta > T::zero() && beta < two) {
        return Err(LabError::Domain(format!("alpha and beta must lie in (0,2), got {alpha}, {beta}")));
    }
    Ok((T::one() + two * theta / (two + beta)) / (T::one() - beta * alpha / (two + beta)))
}

/// `Σ q(δ_i) Λ(u_i) V(δ_i) w_i`.
pub fn integrability_surrogate<T: Real>(problem: &Problem<T>, f: &Nonlinearity<T>, u: &DVector<T>) -> T {
    let g = &problem.grid;
    (0..g.n).fold(T::zero(), |s, i| s + f.q(g.delta[i]) * f.growth(u[i]) * problem.v[i] * g.weights[i])
}

/// `(1/t) Σ_{δ_i ≤ t} (u_i / P^ψσ_i) φ(x_i) w_i`.
pub fn weak_trace<T: Real>(problem: &Problem<T>, u: &DVector<T>, test: impl Fn(T) -> T, t: T) -> T {
    let g = &problem.grid;
    let s = (0..g.n)
        .filter(|&i| g.delta[i] <= t)
        .fold(T::zero(), |s, i| s + u[i] / problem.psigma[i] * test(g.nodes[i]) * g.weights[i]);
    s / t
}

/// Smooth bumps `exp(−1/(1−r²))` used as test functions, placed at fixed
/// fractions of the interval.
pub fn test_bumps<T: Real>(grid: &Grid<T>) -> Vec<DVector<T>> {
    let mid = (grid.a + grid.b) * T::c(0.5);
    let half = grid.diameter() * T::c(0.5);
    [(-0.3, 0.2), (0.0, 0.3), (0.4, 0.25)]
        .iter()
        .map(|&(c, w)| {
            let (c, w) = (mid + half * T::c(c), half * T::c(w));
            grid.nodes.map(|x| {
                let r = (x - c) / w;
                if r.abs() < T::one() {
                    (-T::one() / (T::one() - r * r)).exp()
                } else {
                    T::zero()
                }
            })
        })
        .collect()
}

/// Largest `|⟨u, ψ(−L)ξ⟩ − ⟨λ, ξ⟩|` over the test bumps, divided by the
/// grid `L²` norm of `λ`.
pub fn distributional_residual<T: Real>(
    problem: &Problem<T>,
    psi_op: &FunctionalCalculus<T>,
    u: &DVector<T>,
    lambda: &DVector<T>,
) -> T {
    let g = &problem.grid;
    let norm = g.inner(lambda, lambda).sqrt();
    test_bumps(g)
        .iter()
        .map(|xi| (g.inner(u, &psi_op.matrix.apply(g, xi)) - g.inner(lambda, xi)).abs())
        .fold(T::zero(), |m, v| m.max(v))
        / norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Convergent,
    Divergent,
}

impl Class {
    pub fn label(self) -> &'static str {
        match self {
            Class::Convergent => "CONVERGENT",
            Class::Divergent => "DIVERGENT",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<T> {
    pub m: T,
    pub tol: T,
    pub max_iter: usize,
    /// Largest surrogate growth over the last doubling still called stable.
    pub stable_growth: T,
}

impl<T: Real> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions { m: T::one(), tol: T::c(1e-10), max_iter: 500, stable_growth: T::c(0.1) }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow<T> {
    pub p: T,
    pub n: usize,
    pub class: Class,
    pub surrogate: T,
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_exponent: Option<T>,
}

#[derive(Debug, Clone)]
pub struct SweepTable<T> {
    pub rows: Vec<SweepRow<T>>,
    /// Per exponent: surrogate growth over the last doubling and the ratio
    /// of the last two surrogate increments.
    pub growth: Vec<(T, T, T)>,
    /// Largest convergent and smallest divergent exponent when they are
    /// adjacent in the sorted grid.
    pub boundary: Option<(T, T)>,
    pub critical: T,
}

/// Classifies existence for `f = −m δ^θ |t|^p`, `ζ = σ`, across `p_grid`
/// from solves on every resolution in `levels`.
///
/// An exponent is convergent when every solve converges, the surrogate
/// `Σ q Λ(P^ψσ) V w` grows by less than `stable_growth` over the last
/// doubling, and its increments shrink (ratio of the last two below 1).
pub fn existence_sweep<T: Real>(
    alpha: T,
    beta: T,
    theta: T,
    p_grid: &[T],
    levels: &[usize],
    opts: &SweepOptions<T>,
) -> Result<SweepTable<T>> {
    let critical = critical_exponent(alpha, beta, theta)?;
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Config("sweep needs two or more increasing resolutions".into()));
    }
    if p_grid.is_empty() {
        return Err(LabError::Config("sweep needs a nonempty exponent grid".into()));
    }
    let problems: Vec<Problem<T>> =
        levels.par_iter().map(|&n| Problem::stable(n, beta, alpha)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..p_grid.len()).flat_map(|k| (0..levels.len()).map(move |l| (k, l))).collect();
    let solved: Vec<(T, SolveReport<T>)> = cells
        .par_iter()
        .map(|&(k, l)| {
            let prob = &problems[l];
            let f = Nonlinearity::power(Sign::NonPositive, theta, p_grid[k], opts.m)?;
            let s = integrability_surrogate(prob, &f, &prob.psigma);
            let r = solve_absorption(prob, &f, &BoundaryData::sigma(), opts.tol, opts.max_iter, Damping::Auto)?;
            Ok((s, r))
        })
        .collect::<Result<_>>()?;
    let nl = levels.len();
    let mut rows = Vec::with_capacity(cells.len());
    let mut growth = Vec::with_capacity(p_grid.len());
    let mut classes = Vec::with_capacity(p_grid.len());
    for (k, &p) in p_grid.iter().enumerate() {
        let cell = &solved[k * nl..(k + 1) * nl];
        let s: Vec<T> = cell.iter().map(|c| c.0).collect();
        let g = s[nl - 1] / s[nl - 2] - T::one();
        let ratio = if nl >= 3 { (s[nl - 1] - s[nl - 2]) / (s[nl - 2] - s[nl - 3]) } else { T::zero() };
        let all_converged = cell.iter().all(|c| c.1.converged);
        let class = if all_converged && g < opts.stable_growth && ratio < T::one() {
            Class::Convergent
        } else {
            Class::Divergent
        };
        growth.push((p, g, ratio));
        classes.push((p, class));
        for (l, (sv, rep)) in cell.iter().enumerate() {
            rows.push(SweepRow {
                p,
                n: levels[l],
                class,
                surrogate: *sv,
                residual: rep.final_residual().unwrap_or(T::zero()),
                converged: rep.converged,
                iterations: rep.iterations,
                boundary_exponent: rep.boundary_fit.as_ref().map(|f| f.exponent),
            });
        }
    }
    let mut sorted = classes.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let boundary = sorted
        .windows(2)
        .find(|w| w[0].1 == Class::Convergent && w[1].1 == Class::Divergent)
        .map(|w| (w[0].0, w[1].0));
    Ok(SweepTable { rows, growth, boundary, critical })
}

pub fn class_of<T: Real>(table: &SweepTable<T>, p: T) -> Option<Class> {
    table.rows.iter().find(|r| r.p == p).map(|r| r.class)
}

