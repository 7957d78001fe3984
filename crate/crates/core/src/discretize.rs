//! Midpoint grid on an interval and the matrix of the restricted fractional
//! Laplacian.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::real::{gamma, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T: Real> {
    pub a: T,
    pub b: T,
    pub n: usize,
    pub h: T,
    pub nodes: DVector<T>,
    pub weights: DVector<T>,
    pub delta: DVector<T>,
}

pub const MIN_NODES: usize = 16;

/// Midpoint grid with the `n ≥ 16` resolution guard.
pub fn build_grid<T: Real>(a: T, b: T, n: usize) -> Result<Grid<T>> {
    if n < MIN_NODES {
        return Err(LabError::Config(format!("grid needs n >= {MIN_NODES} nodes, got n = {n}")));
    }
    Grid::midpoint(a, b, n)
}

impl<T: Real> Grid<T> {
    /// Midpoint layout `x_i = a + (i − ½)h` without the resolution guard.
    pub fn midpoint(a: T, b: T, n: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(LabError::Config(format!("interval needs a < b, got ({a}, {b})")));
        }
        if n == 0 {
            return Err(LabError::Config("grid needs at least one node".into()));
        }
        let h = (b - a) / T::usize(n);
        let nodes = DVector::from_fn(n, |i, _| a + (T::usize(i) + T::c(0.5)) * h);
        let delta = nodes.map(|x| (x - a).min(b - x));
        Ok(Grid { a, b, n, h, weights: DVector::from_element(n, h), nodes, delta })
    }

    pub fn diameter(&self) -> T {
        self.b - self.a
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    pub fn weighted(&self, f: &DVector<T>) -> DVector<T> {
        f.component_mul(&self.weights)
    }

    /// `Σ f_i g_i w_i`.
    pub fn inner(&self, f: &DVector<T>, g: &DVector<T>) -> T {
        f.iter().zip(g.iter()).zip(self.weights.iter()).fold(T::zero(), |s, ((x, y), w)| s + *x * *y * *w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    GeneratorMinus,
    Heat { t: f64 },
    Green,
    GreenPsi,
    GreenPsiStar,
    Jumping,
    /// `g(−L)` for a scalar map `g` other than the ones above.
    Calculus,
}

/// Grid-indexed matrix acting on functions through the weights:
/// `(Af)_i = Σ_j A[i][j] f_j w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    pub entries: DMatrix<T>,
    pub kind: OperatorKind,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn apply(&self, grid: &Grid<T>, f: &DVector<T>) -> DVector<T> {
        &self.entries * grid.weighted(f)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> T {
        self.entries.amax()
    }

    /// Largest `|A_ij − A_ji|` relative to `max|A|`.
    pub fn asymmetry(&self) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst / self.max_abs()
    }

    /// `A W B`, the matrix of the composition under the weight convention.
    pub fn compose(&self, grid: &Grid<T>, other: &OperatorMatrix<T>, kind: OperatorKind) -> OperatorMatrix<T> {
        let mut right = other.entries.clone();
        for (i, mut row) in right.row_iter_mut().enumerate() {
            row *= grid.weights[i];
        }
        OperatorMatrix { entries: &self.entries * right, kind }
    }
}

/// Normalizing constant of `(−Δ)^{β/2}` on the line,
/// `2^β Γ((1+β)/2) / (√π |Γ(−β/2)|)`.
pub fn normalizing_constant<T: Real>(beta: T) -> T {
    let half = beta * T::c(0.5);
    // |Γ(−β/2)| = Γ(1 − β/2) / (β/2) avoids evaluating Gamma at a negative point.
    let abs_gamma_neg = gamma(T::one() - half) / half;
    T::c(2.0).powf(beta) * gamma((T::one() + beta) * T::c(0.5)) / (T::pi().sqrt() * abs_gamma_neg)
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if beta > T::zero() && beta < T::c(2.0) {
        Ok(())
    } else {
        Err(LabError::Domain(format!("beta must lie in (0,2), got {beta}")))
    }
}

/// Exterior integral `∫_{D^c} c|x−y|^{−1−β} dy` at node `i`.
pub fn killing_density_phi<T: Real>(grid: &Grid<T>, beta: T, i: usize) -> Result<T> {
    check_beta(beta)?;
    if i >= grid.n {
        return Err(LabError::Config(format!("node index {i} out of range for n = {}", grid.n)));
    }
    Ok(killing(grid, beta, normalizing_constant(beta), i))
}

fn killing<T: Real>(grid: &Grid<T>, beta: T, c: T, i: usize) -> T {
    let x = grid.nodes[i];
    c / beta * ((x - grid.a).powf(-beta) + (grid.b - x).powf(-beta))
}

/// Matrix of `−L_|D = (−Δ)^{β/2}_|D` in the weight convention.
///
/// Off-diagonal entries integrate the kernel exactly over each cell. The
/// self cell is handled by a second-order Taylor expansion, which couples
/// each node to its two neighbours, and the exterior contributes the
/// closed-form killing term.
pub fn assemble_generator<T: Real>(grid: &Grid<T>, beta: T) -> Result<OperatorMatrix<T>> {
    check_beta(beta)?;
    let n = grid.n;
    let h = grid.h;
    let c = normalizing_constant(beta);
    let half = h * T::c(0.5);
    let anti = |r: T| r.powf(-beta) / beta;
    // Cell integrals depend only on |i - j|.
    let cell: Vec<T> = (0..n)
        .map(|k| {
            if k == 0 {
                T::zero()
            } else {
                let d = h * T::usize(k);
                c * (anti(d - half) - anti(d + half))
            }
        })
        .collect();
    let taylor = c * half.powf(T::c(2.0) - beta) / ((T::c(2.0) - beta) * h * h);
    let mut m = DMatrix::from_fn(n, n, |i, j| -cell[i.abs_diff(j)]);
    for i in 0..n {
        let off: T = (0..n).filter(|&j| j != i).fold(T::zero(), |s, j| s + cell[i.abs_diff(j)]);
        m[(i, i)] = off + killing(grid, beta, c, i) + T::c(2.0) * taylor;
        if i + 1 < n {
            m[(i, i + 1)] -= taylor;
            m[(i + 1, i)] -= taylor;
        }
    }
    m /= h;
    Ok(OperatorMatrix { entries: m, kind: OperatorKind::GeneratorMinus })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_inverse_pi_at_one() {
        let c: f64 = normalizing_constant(1.0);
        assert!((c - 1.0 / std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn constant_matches_half_laplacian_limit() {
        // As β → 2 the constant behaves like (2 − β)/2 times the Laplacian normalization.
        let c: f64 = normalizing_constant(1.999);
        assert!((c / 0.001 - 1.0).abs() < 2e-2, "{c}");
    }

    #[test]
    fn generator_is_z_matrix() {
        let g = build_grid(-1.0_f64, 1.0, 64).unwrap();
        let a = assemble_generator(&g, 1.3).unwrap();
        for i in 0..64 {
            assert!(a.entries[(i, i)] > 0.0);
            for j in 0..64 {
                if i != j {
                    assert!(a.entries[(i, j)] <= 0.0);
                }
            }
        }
    }
}
