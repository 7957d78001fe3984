//! Dense eigendecomposition of the discrete generator and the functional
//! calculus built on it.

use nalgebra::{DMatrix, DVector};

use crate::bernstein::{potential_density_u, BernsteinSpec};
use crate::discretize::{Grid, OperatorKind, OperatorMatrix};
use crate::error::{LabError, Result};
use crate::real::{max_abs, Real};

/// Eigenpairs of `−L_|D`, ascending, with eigenvectors orthonormal under the
/// grid inner product (`ΦᵀWΦ = I`).
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: DVector<T>,
    /// Column `j` holds `φ_{j+1}` sampled at the nodes.
    pub vectors: DMatrix<T>,
    pub grid: Grid<T>,
}

#[derive(Debug, Clone)]
pub struct FunctionalCalculus<T: Real> {
    /// `g(λ_j)` in eigenvalue order.
    pub values: DVector<T>,
    pub matrix: OperatorMatrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenKind {
    /// Inverse of `−L_|D`.
    G,
    /// Inverse of `ψ(−L_|D)`.
    Psi,
    /// Inverse of `ψ*(−L_|D)`.
    PsiStar,
}

pub fn eigendecompose<T: Real>(a: &OperatorMatrix<T>, grid: &Grid<T>) -> Result<Spectrum<T>> {
    let n = grid.n;
    if a.n() != n {
        return Err(LabError::Config(format!("matrix of size {} does not match grid of {n} nodes", a.n())));
    }
    let asym = a.asymmetry();
    if !(asym <= T::c(1e-10)) {
        return Err(LabError::Precondition(format!("operator is not symmetric (relative defect {asym:e})")));
    }
    let root: Vec<T> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let v = (a.entries[(i, j)] + a.entries[(j, i)]) * T::c(0.5);
        v * root[i] * root[j]
    });
    let (values, vecs) = T::symmetric_eigen(sym)
        .ok_or_else(|| LabError::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = DVector::from_fn(n, |k, _| values[order[k]]);
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Numerical("eigensolver returned non-finite eigenvalues".into()));
    }
    if !(eigenvalues[0] > T::zero()) {
        return Err(LabError::Numerical(format!(
            "smallest eigenvalue {} is not positive; the assembled generator is wrong",
            eigenvalues[0]
        )));
    }
    let mut vectors = DMatrix::from_fn(n, n, |i, k| vecs[(i, order[k])] / root[i]);
    for k in 0..n {
        let mut col = vectors.column_mut(k);
        let flip = if k == 0 {
            col.sum() < T::zero()
        } else {
            let scale = max_abs(col.iter().copied());
            col.iter().find(|v| v.abs() > scale * T::c(1e-8)).is_some_and(|v| *v < T::zero())
        };
        if flip {
            col.neg_mut();
        }
    }
    Ok(Spectrum { eigenvalues, vectors, grid: grid.clone() })
}

impl<T: Real> Spectrum<T> {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda1(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn eigenvector(&self, j: usize) -> DVector<T> {
        self.vectors.column(j).into_owned()
    }

    /// `Σ_j d_j φ_j φ_jᵀ`.
    pub fn synthesize(&self, d: &DVector<T>, kind: OperatorKind) -> OperatorMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[k];
        }
        OperatorMatrix { entries: scaled * self.vectors.transpose(), kind }
    }

    pub fn calculus(&self, g: impl Fn(T) -> T, kind: OperatorKind) -> FunctionalCalculus<T> {
        let values = self.eigenvalues.map(g);
        let matrix = self.synthesize(&values, kind);
        FunctionalCalculus { values, matrix }
    }

    /// Expansion coefficients `f̂_j = Σ_k f_k φ_j(x_k) w_k`.
    pub fn coefficients(&self, f: &DVector<T>) -> DVector<T> {
        self.vectors.tr_mul(&self.grid.weighted(f))
    }

    /// `max_k |(A φ_j)_k − λ_j φ_j(x_k)|`.
    pub fn eigen_residual(&self, a: &OperatorMatrix<T>, j: usize) -> T {
        let phi = self.eigenvector(j);
        let r = a.apply(&self.grid, &phi) - &phi * self.eigenvalues[j];
        r.amax()
    }

    /// Largest deviation of `ΦᵀWΦ` from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let mut wv = self.vectors.clone();
        for (i, mut row) in wv.row_iter_mut().enumerate() {
            row *= self.grid.weights[i];
        }
        let gram = self.vectors.tr_mul(&wv);
        let n = self.n();
        (gram - DMatrix::identity(n, n)).amax()
    }
}

pub fn apply_psi<T: Real>(spec: &Spectrum<T>, psi: &BernsteinSpec<T>) -> FunctionalCalculus<T> {
    spec.calculus(|l| psi.value(l), OperatorKind::Calculus)
}

pub fn heat_kernel<T: Real>(spec: &Spectrum<T>, t: T) -> Result<OperatorMatrix<T>> {
    if !(t > T::zero()) {
        return Err(LabError::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(spec.calculus(|l| (-l * t).exp(), OperatorKind::Heat { t: t.f64() }).matrix)
}

pub fn green_matrix<T: Real>(spec: &Spectrum<T>, which: GreenKind, psi: &BernsteinSpec<T>) -> OperatorMatrix<T> {
    match which {
        GreenKind::G => spec.calculus(|l| T::one() / l, OperatorKind::Green).matrix,
        GreenKind::Psi => spec.calculus(|l| T::one() / psi.value(l), OperatorKind::GreenPsi).matrix,
        GreenKind::PsiStar => spec.calculus(|l| psi.value(l) / l, OperatorKind::GreenPsiStar).matrix,
    }
}

#[derive(Debug, Clone)]
pub struct SubordinationOracle<T: Real> {
    pub matrix: OperatorMatrix<T>,
    /// Bound on the operator norm of the neglected time tail beyond `t_max`.
    pub tail_bound: T,
    pub t_min: T,
    pub t_max: T,
}

fn tail_bound<T: Real>(spec: &Spectrum<T>, psi: &BernsteinSpec<T>, t_max: T) -> Result<T> {
    let l1 = spec.lambda1();
    // 𝔲 is completely monotone, hence nonincreasing.
    Ok(potential_density_u(psi, t_max)? * (-l1 * t_max).exp() / l1)
}

/// Smallest power-of-two multiple of `1/λ_1` whose tail bound is below `tol`.
pub fn oracle_horizon<T: Real>(spec: &Spectrum<T>, psi: &BernsteinSpec<T>, tol: T) -> Result<T> {
    let mut t = T::one() / spec.lambda1();
    for _ in 0..60 {
        if tail_bound(spec, psi, t)? <= tol {
            return Ok(t);
        }
        t *= T::c(2.0);
    }
    Err(LabError::Numerical(format!("no time horizon reaches tail tolerance {tol:e}")))
}

/// Green matrix of `ψ(−L_|D)` from the subordination integral
/// `∫ p_D(t) 𝔲(t) dt`, using the trapezoid rule in `ln t` on
/// `[t_min, t_max]` and the power-law behaviour of `𝔲` below `t_min`.
pub fn green_oracle_subordination<T: Real>(
    spec: &Spectrum<T>,
    psi: &BernsteinSpec<T>,
    t_max: T,
    quad_nodes: usize,
    tail_tol: T,
) -> Result<SubordinationOracle<T>> {
    if quad_nodes < 2 {
        return Err(LabError::Config("subordination quadrature needs at least 2 nodes".into()));
    }
    let tail = tail_bound(spec, psi, t_max)?;
    if !(tail <= tail_tol) {
        return Err(LabError::Numerical(format!(
            "tail bound {tail:e} at t_max = {t_max} exceeds {tail_tol:e}; increase t_max"
        )));
    }
    let lmax = spec.eigenvalues[spec.n() - 1];
    let t_min = T::c(1e-12) / lmax;
    if !(t_min < t_max) {
        return Err(LabError::Config(format!("t_max = {t_max} is below the quadrature start {t_min:e}")));
    }
    let (u0, u1) = (t_min.ln(), t_max.ln());
    let du = (u1 - u0) / T::usize(quad_nodes - 1);
    let mut nodes = Vec::with_capacity(quad_nodes);
    for m in 0..quad_nodes {
        let t = (u0 + du * T::usize(m)).exp();
        let end = if m == 0 || m + 1 == quad_nodes { T::c(0.5) } else { T::one() };
        nodes.push((t, end * du * t * potential_density_u(psi, t)?));
    }
    let head = potential_density_u(psi, t_min)? * t_min / psi.exponent();
    let d = spec.eigenvalues.map(|l| nodes.iter().fold(head, |s, &(t, w)| s + w * (-l * t).exp()));
    Ok(SubordinationOracle { matrix: spec.synthesize(&d, OperatorKind::GreenPsi), tail_bound: tail, t_min, t_max })
}
