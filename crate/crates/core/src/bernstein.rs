//! Complete Bernstein functions and the scalar objects derived from them.

use crate::error::{LabError, Result};
use crate::quad::{integrate_log, QuadTol};
use crate::real::{gamma, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family<T> {
    Stable { s: T },
    Relativistic { s: T, mass: T },
    Tempered { s: T, theta: T },
}

/// Whether a function plays the inner (`Phi`) or outer (`Psi`) role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Phi,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinSpec<T> {
    pub family: Family<T>,
    pub role: Role,
}

impl<T: Real> BernsteinSpec<T> {
    pub fn new(family: Family<T>, role: Role) -> Result<Self> {
        let (s, extra) = match family {
            Family::Stable { s } => (s, None),
            Family::Relativistic { s, mass } => (s, Some(("mass", mass))),
            Family::Tempered { s, theta } => (s, Some(("tempering", theta))),
        };
        if !(s > T::zero() && s < T::one()) {
            return Err(LabError::Domain(format!("exponent s must lie in (0,1), got {s}")));
        }
        if let Some((name, v)) = extra {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(LabError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(BernsteinSpec { family, role })
    }

    pub fn stable(s: T, role: Role) -> Result<Self> {
        Self::new(Family::Stable { s }, role)
    }

    /// `λ^{β/2}`, the inner function of the killed `β`-stable process.
    pub fn phi_stable(beta: T) -> Result<Self> {
        Self::stable(beta * T::c(0.5), Role::Phi)
    }

    /// `λ^{α/2}`, the outer function of the interpolated fractional Laplacian.
    pub fn psi_stable(alpha: T) -> Result<Self> {
        Self::stable(alpha * T::c(0.5), Role::Psi)
    }

    pub fn exponent(&self) -> T {
        match self.family {
            Family::Stable { s } | Family::Relativistic { s, .. } | Family::Tempered { s, .. } => s,
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self.family, Family::Stable { .. })
    }

    /// Closed-form value for `λ ≥ 0`, written to avoid cancellation near 0.
    pub fn value(&self, lambda: T) -> T {
        if lambda == T::zero() {
            return T::zero();
        }
        match self.family {
            Family::Stable { s } => lambda.powf(s),
            Family::Relativistic { s, mass } => {
                let shift = mass.powf(T::one() / s);
                mass * (s * (lambda / shift).ln_1p()).exp_m1()
            }
            Family::Tempered { s, theta } => theta.powf(s) * (s * (lambda / theta).ln_1p()).exp_m1(),
        }
    }

    pub fn eval(&self, lambda: T) -> Result<T> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(LabError::Domain(format!("Bernstein argument must be nonnegative, got {lambda}")));
        }
        Ok(self.value(lambda))
    }

    pub fn conjugate(&self) -> Result<Conjugate<T>> {
        if self.role != Role::Psi {
            return Err(LabError::Domain("conjugate is defined for the outer function only".into()));
        }
        Ok(Conjugate { psi: *self })
    }

    fn require_psi(&self, what: &str) -> Result<()> {
        if self.role == Role::Psi {
            Ok(())
        } else {
            Err(LabError::Domain(format!("{what} needs the outer function")))
        }
    }
}

/// `λ ↦ λ/ψ(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate<T> {
    pub psi: BernsteinSpec<T>,
}

impl<T: Real> Conjugate<T> {
    pub fn value(&self, lambda: T) -> T {
        lambda / self.psi.value(lambda)
    }

    pub fn eval(&self, lambda: T) -> Result<T> {
        if !(lambda > T::zero()) {
            return Err(LabError::Domain(format!("conjugate needs a positive argument, got {lambda}")));
        }
        Ok(self.value(lambda))
    }

    /// For a stable `ψ` the conjugate is again stable with exponent `1 − s`.
    pub fn as_stable(&self) -> Option<BernsteinSpec<T>> {
        match self.psi.family {
            Family::Stable { s } => BernsteinSpec::stable(T::one() - s, Role::Psi).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport<T> {
    pub lower_exponent: T,
    pub upper_exponent: T,
    pub lower_const: T,
    pub upper_const: T,
    pub sample_range: (T, T),
}

/// Weak scaling exponents of `spec` on `[λ_min, λ_max]`.
///
/// Exponents are the extreme chord slopes of `ln φ` against `ln λ` between
/// neighbouring samples of a log-spaced lattice; the constants are the
/// extreme multiplicative gaps over all sample pairs once the exponents are
/// fixed.
pub fn estimate_scaling<T: Real>(
    spec: &BernsteinSpec<T>,
    lambda_min: T,
    lambda_max: T,
    n_samples: usize,
) -> Result<ScalingReport<T>> {
    if n_samples < 8 {
        return Err(LabError::Config(format!("scaling estimate needs n_samples >= 8, got {n_samples}")));
    }
    if !(lambda_min >= T::one() && lambda_min < lambda_max) {
        return Err(LabError::Config(format!(
            "scaling range needs 1 <= lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
        )));
    }
    let (l0, l1) = (lambda_min.ln(), lambda_max.ln());
    let step = (l1 - l0) / T::usize(n_samples - 1);
    let lt: Vec<T> = (0..n_samples).map(|k| l0 + step * T::usize(k)).collect();
    let lf: Vec<T> = lt.iter().map(|&u| spec.value(u.exp()).ln()).collect();
    let mut lo = T::max_value().unwrap_or(T::c(f64::MAX));
    let mut hi = -lo;
    for k in 1..n_samples {
        let slope = (lf[k] - lf[k - 1]) / (lt[k] - lt[k - 1]);
        lo = lo.min(slope);
        hi = hi.max(slope);
    }
    let mut gap_lo = T::zero();
    let mut gap_hi = T::zero();
    let mut first = true;
    for i in 0..n_samples {
        for j in i + 1..n_samples {
            let dl = lt[j] - lt[i];
            let df = lf[j] - lf[i];
            let g_lo = df - lo * dl;
            let g_hi = df - hi * dl;
            if first {
                gap_lo = g_lo;
                gap_hi = g_hi;
                first = false;
            } else {
                gap_lo = gap_lo.min(g_lo);
                gap_hi = gap_hi.max(g_hi);
            }
        }
    }
    Ok(ScalingReport {
        lower_exponent: lo,
        upper_exponent: hi,
        lower_const: gap_lo.exp(),
        upper_const: gap_hi.exp(),
        sample_range: (lambda_min, lambda_max),
    })
}

fn positive<T: Real>(t: T, what: &str) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(LabError::Domain(format!("{what} needs a positive argument, got {t}")))
    }
}

/// Renewal function representative `V(t) = 1/√φ(t⁻²)`.
pub fn renewal_v<T: Real>(phi: &BernsteinSpec<T>, t: T) -> Result<T> {
    positive(t, "renewal function")?;
    Ok(renewal_value(phi, t))
}

pub(crate) fn renewal_value<T: Real>(phi: &BernsteinSpec<T>, t: T) -> T {
    T::one() / phi.value(T::one() / (t * t)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyDensity<T> {
    pub value: T,
    /// `true` when the value is the comparability proxy `ψ(1/t)/t`
    /// rather than the exact density.
    pub proxy: bool,
}

pub fn levy_density_nu<T: Real>(psi: &BernsteinSpec<T>, t: T) -> Result<LevyDensity<T>> {
    positive(t, "Levy density")?;
    Ok(match psi.family {
        Family::Stable { s } => LevyDensity {
            value: s * t.powf(-T::one() - s) / gamma(T::one() - s),
            proxy: false,
        },
        _ => LevyDensity { value: psi.value(T::one() / t) / t, proxy: true },
    })
}

/// Settings of the Gaver-Stehfest inversion used for non-stable potential
/// densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub order: usize,
    pub monitor: [usize; 2],
    pub rel_tol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig { order: 12, monitor: [10, 14], rel_tol: 1e-5 }
    }
}

fn stehfest_weights(order: usize) -> Vec<f64> {
    let half = order / 2;
    let fact = |k: usize| (1..=k).fold(1.0_f64, |p, j| p * j as f64);
    (1..=order)
        .map(|k| {
            let mut sum = 0.0;
            for j in (k + 1) / 2..=k.min(half) {
                sum += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

fn stehfest(psi: &BernsteinSpec<f64>, t: f64, order: usize) -> f64 {
    let a = std::f64::consts::LN_2 / t;
    stehfest_weights(order)
        .iter()
        .enumerate()
        .map(|(k, w)| w / psi.value((k + 1) as f64 * a))
        .sum::<f64>()
        * a
}

fn to_f64_spec<T: Real>(spec: &BernsteinSpec<T>) -> BernsteinSpec<f64> {
    let family = match spec.family {
        Family::Stable { s } => Family::Stable { s: s.f64() },
        Family::Relativistic { s, mass } => Family::Relativistic { s: s.f64(), mass: mass.f64() },
        Family::Tempered { s, theta } => Family::Tempered { s: s.f64(), theta: theta.f64() },
    };
    BernsteinSpec { family, role: spec.role }
}

/// Potential density `𝔲` with `∫ e^{−λt} 𝔲(t) dt = 1/ψ(λ)`.
pub fn potential_density_u<T: Real>(psi: &BernsteinSpec<T>, t: T) -> Result<T> {
    potential_density_u_with(psi, t, &InversionConfig::default())
}

pub fn potential_density_u_with<T: Real>(psi: &BernsteinSpec<T>, t: T, cfg: &InversionConfig) -> Result<T> {
    positive(t, "potential density")?;
    psi.require_psi("potential density")?;
    if let Family::Stable { s } = psi.family {
        return Ok(t.powf(s - T::one()) / gamma(s));
    }
    for order in std::iter::once(cfg.order).chain(cfg.monitor) {
        if order < 2 || order % 2 == 1 || order > 30 {
            return Err(LabError::Config(format!("inversion order must be even in [2, 30], got {order}")));
        }
    }
    let spec = to_f64_spec(psi);
    let tf = t.f64();
    let main = stehfest(&spec, tf, cfg.order);
    // Disagreement of each monitor order with the main order, sorted by order.
    let mut gaps: Vec<(usize, f64)> = cfg
        .monitor
        .iter()
        .map(|&order| (order, ((stehfest(&spec, tf, order) - main) / main).abs()))
        .collect();
    gaps.sort_by_key(|g| g.0);
    let worst = gaps.iter().fold(0.0_f64, |w, g| w.max(g.1));
    // A lower order that is still off by more than the tolerance is fine as
    // long as the gaps shrink with the order and the highest one settles.
    let highest = gaps.last().map_or(0.0, |g| g.1);
    let contracting = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    let settled = worst <= cfg.rel_tol || (contracting && highest <= cfg.rel_tol);
    if !main.is_finite() || main <= 0.0 || !settled {
        return Err(LabError::Numerical(format!(
            "Laplace inversion at t={tf:e} did not settle: order {} gives {main:e}, monitor disagreement {worst:e} (tol {:e})",
            cfg.order, cfg.rel_tol
        )));
    }
    Ok(T::c(main))
}

/// Boundary weight `ρ(δ) = V²ψ(V⁻²) + V∫_V^1 ψ(s⁻²) ds` with `V = V(δ)`.
pub fn weight_rho<T: Real>(phi: &BernsteinSpec<T>, psi: &BernsteinSpec<T>, delta: T) -> Result<T> {
    positive(delta, "weight rho")?;
    let v = renewal_value(phi, delta);
    let head = v * v * psi.value(T::one() / (v * v));
    if v >= T::one() {
        return Ok(head);
    }
    let tol = QuadTol::new(1e-10, 1e-8);
    let q = integrate_log(|s: T| psi.value(T::one() / (s * s)), v, T::one(), &tol)?;
    Ok(head + v * q.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stehfest_inverts_reciprocal() {
        // 1/λ inverts to the constant 1, so the weights must satisfy Σ V_k / k = 1.
        for n in [10, 12, 14] {
            let s: f64 = stehfest_weights(n).iter().enumerate().map(|(k, w)| w / (k + 1) as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn relativistic_small_argument_has_no_cancellation() {
        let psi = BernsteinSpec::new(Family::Relativistic { s: 0.5, mass: 1.0 }, Role::Psi).unwrap();
        let v: f64 = psi.value(1e-12);
        assert!((v / 5e-13 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_exponent_rejected() {
        assert!(BernsteinSpec::stable(1.0_f64, Role::Psi).is_err());
        assert!(BernsteinSpec::new(Family::Tempered { s: 0.5_f64, theta: 0.0 }, Role::Psi).is_err());
    }
}
