//! Invariant suites behind `nlslab verify`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::Config;
use crate::analysis::{fit_boundary_rate_default, weyl_fit};
use crate::discretize::{build_grid, OperatorKind, OperatorMatrix};
use crate::error::Result;
use crate::kernels::{harmonicity_residual, jumping_kernel_jd, killing_density_psi, BoundaryData, KernelQuad};
use crate::semilinear::{
    distributional_residual, kato_check, random_starts, solve_absorption, solve_linear, solve_monotone,
    solve_truncated, weak_trace, Damping, LinearData, Nonlinearity, Problem, Sign,
};
use crate::spectral::{green_matrix, heat_kernel, GreenKind};

/// One measured quantity with the bound it was held to.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `"<="` when `value` must not exceed `tolerance`, `">="` otherwise.
    pub comparison: &'static str,
    pub pass: bool,
}

#[derive(Default)]
struct Suite {
    name: &'static str,
    checks: Vec<Check>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, checks: Vec::new() }
    }

    fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, "<=", value <= tolerance);
    }

    fn at_least(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, ">=", value >= tolerance);
    }

    fn push(&mut self, name: &str, value: f64, tolerance: f64, comparison: &'static str, pass: bool) {
        self.checks.push(Check {
            suite: self.name.to_string(),
            name: name.to_string(),
            value,
            tolerance,
            comparison,
            pass: pass && value.is_finite(),
        });
    }
}

/// `max|a − b| / max|b|`.
fn rel_gap(a: &OperatorMatrix<f64>, b: &OperatorMatrix<f64>) -> f64 {
    (&a.entries - &b.entries).amax() / b.entries.amax()
}

fn spectral_suite(p: &Problem<f64>) -> Result<Suite> {
    let mut s = Suite::new("spectral");
    let (spec, grid, psi) = (&p.spectrum, &p.grid, &p.psi);
    let g = green_matrix(spec, GreenKind::G, psi);
    let gstar = green_matrix(spec, GreenKind::PsiStar, psi);
    s.at_most("green_factorization", rel_gap(&p.gpsi.compose(grid, &gstar, OperatorKind::Green), &g), 1e-9);
    let psi_op = p.psi_operator().matrix;
    let psi_star = spec.calculus(|l| l / psi.value(l), OperatorKind::Calculus).matrix;
    s.at_most(
        "generator_factorization",
        rel_gap(&psi_op.compose(grid, &psi_star, OperatorKind::GeneratorMinus), &p.generator),
        1e-9,
    );
    let worst = (0..spec.n().min(10))
        .map(|j| spec.eigen_residual(&p.generator, j) / (spec.eigenvalues[j] * spec.eigenvector(j).amax()))
        .fold(0.0, f64::max);
    s.at_most("eigen_residual", worst, 1e-8);
    s.at_most("orthonormality", spec.orthonormality_defect(), 1e-10);
    let phi1 = spec.eigenvector(0);
    s.at_least("ground_state_min_over_max", phi1.min() / phi1.max(), 0.0);
    let h1 = heat_kernel(spec, 0.05)?;
    let h2 = heat_kernel(spec, 0.1)?;
    let h3 = heat_kernel(spec, 0.15)?;
    s.at_most("heat_semigroup", rel_gap(&h1.compose(grid, &h2, h3.kind), &h3), 1e-9);
    let mass = h2.apply(grid, &DVector::from_element(grid.n, 1.0));
    s.at_most("heat_submarkov_excess", mass.max() - 1.0, 1e-8);
    s.at_least("green_psi_min_over_max", p.gpsi.entries.min() / p.gpsi.entries.max(), -1e-12);
    Ok(s)
}

/// Observed order of the interior harmonicity residual of `P^ψσ` from `n`
/// to `2n` nodes.
pub fn harmonicity_order(coarse: &Problem<f64>, fine: &Problem<f64>) -> Result<(f64, f64, f64)> {
    let margin = |p: &Problem<f64>| (0.1 * p.grid.diameter()).max(4.0 * coarse.grid.h);
    let r1 = harmonicity_residual(&coarse.psigma, &coarse.psi_operator(), &coarse.grid, margin(coarse))?;
    let r2 = harmonicity_residual(&fine.psigma, &fine.psi_operator(), &fine.grid, margin(fine))?;
    Ok((r1, r2, (r1 / r2).log2()))
}

fn kernel_suite(p: &Problem<f64>, fine: &Problem<f64>) -> Result<Suite> {
    let mut s = Suite::new("kernels");
    let grid = &p.grid;
    let pk = &p.poisson.values;
    s.at_least("poisson_min_over_max", pk.min() / pk.max(), 0.0);
    let n = grid.n;
    let mirror = (0..n).map(|i| (pk[(i, 0)] - pk[(n - 1 - i, 1)]).abs()).fold(0.0, f64::max) / pk.max();
    s.at_most("poisson_mirror_symmetry", mirror, 1e-8);
    let psi_op = p.psi_operator();
    let (_, _, order) = harmonicity_order(p, fine)?;
    s.at_least("harmonicity_refinement_order", order, 0.5);
    if p.psi.is_stable() {
        let quad = KernelQuad::new(p.phi);
        let mut jump = 0.0_f64;
        for (i, j) in [(n / 4, n / 2), (n / 3, 2 * n / 3), (n / 8, n / 2 + 3)] {
            let jd = jumping_kernel_jd(&p.spectrum, &p.psi, i, j, &quad)?;
            let want = -psi_op.matrix.entries[(i, j)];
            jump = jump.max((jd - want).abs() / want.abs());
        }
        s.at_most("jumping_kernel_vs_operator", jump, 1e-6);
        let row_sums = psi_op.matrix.apply(grid, &DVector::from_element(n, 1.0));
        let mut kill = 0.0_f64;
        for i in [n / 16, n / 4, n / 2] {
            let k = killing_density_psi(&p.spectrum, &p.psi, i, &quad)?;
            kill = kill.max((k - row_sums[i]).abs() / row_sums[i].abs());
        }
        s.at_most("killing_density_vs_operator", kill, 1e-6);
    }
    Ok(s)
}

fn rate_suite(p: &Problem<f64>, beta: f64, alpha: f64) -> Result<Suite> {
    let mut s = Suite::new("rates");
    let hopf = fit_boundary_rate_default(&p.spectrum.eigenvector(0), &p.grid)?;
    s.at_most("hopf_exponent_error", (hopf.exponent - beta / 2.0).abs(), 0.05);
    let weyl = weyl_fit(&p.spectrum.eigenvalues, 5, 50.min(p.grid.n))?;
    s.at_most("weyl_slope_error", (weyl.slope - beta).abs(), 0.05);
    if p.psi.is_stable() {
        let fit = fit_boundary_rate_default(&p.psigma, &p.grid)?;
        let target = -1.0 - beta / 2.0 + alpha * beta / 2.0;
        s.at_most("reference_function_exponent_error", (fit.exponent - target).abs(), 0.1);
    }
    Ok(s)
}

fn semilinear_suite(p: &Problem<f64>, cfg: &Config) -> Result<Suite> {
    let mut s = Suite::new("semilinear");
    let grid = &p.grid;
    let n = grid.n;
    let tol = cfg.solver.tol;
    let mid = 0.5 * (grid.a + grid.b);

    let g = grid.nodes.map(|x| 1.0 + (x - mid) * (x - mid));
    let u = p.green(&g);
    s.at_most("kato_equality_case", kato_check(p, &u, &g) / u.amax(), 1e-10);
    s.at_most("kato_nonpositive_case", kato_check(p, &(-&u), &(-&g)), 1e-10);

    // Signed problem with a sign-changing source and an odd absorption.
    let diam = grid.diameter();
    let (a, tau) = (grid.a, std::f64::consts::TAU);
    let source = move |x: f64| 5.0 * (tau * (x - a) / diam).sin();
    let f = Nonlinearity::power(Sign::Signed, 0.0, 1.1, 1.0)?
        .with_map(move |x, t| source(x) - t.signum() * t.abs().powf(1.1));
    let sup = p.green(&grid.nodes.map(|x| source(x).abs()));
    let sub = -&sup;
    let zero = BoundaryData::zero();
    let signed = solve_truncated(p, &f, &sub, &sup, &zero, tol, cfg.solver.max_iter, None)?;
    s.at_least("signed_converged", f64::from(u8::from(signed.converged)), 1.0);
    let scale = signed.solution.amax();
    let fv = f.eval_grid(grid, &signed.solution);
    s.at_most("kato_signed_solution", kato_check(p, &signed.solution, &fv) / scale, 1e-6);
    let mut spread = 0.0_f64;
    for start in random_starts(&sub, &sup, cfg.solver.starts, cfg.output.seed) {
        let r = solve_truncated(p, &f, &sub, &sup, &zero, tol, cfg.solver.max_iter, Some(&start))?;
        spread = spread.max((&r.solution - &signed.solution).amax() / scale.max(1.0));
    }
    s.at_most("uniqueness_start_spread", spread, 10.0 * tol);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.output.seed);
    let mut worst = f64::INFINITY;
    for _ in 0..5 {
        let lam = DVector::from_fn(n, |_, _| rng.gen::<f64>());
        let zeta = BoundaryData::new(rng.gen::<f64>(), rng.gen::<f64>());
        let u = solve_linear(p, &LinearData::Density(lam), &zeta)?.solution;
        worst = worst.min(u.min() / u.max());
    }
    s.at_least("maximum_principle_min_over_max", worst, -1e-10);

    let sigma = BoundaryData::sigma();
    let up = Nonlinearity::power(Sign::NonNegative, 0.0, 1.2, 0.1)?;
    let mono = solve_monotone(p, &up, &sigma, tol, cfg.solver.max_iter)?;
    s.at_least("monotone_converged", f64::from(u8::from(mono.converged)), 1.0);
    s.at_least("monotone_iterates", f64::from(u8::from(mono.monotone == Some(true))), 1.0);
    let excess = (0..n).map(|i| mono.solution[i] - 2.0 * p.psigma[i]).fold(f64::NEG_INFINITY, f64::max);
    s.at_most("monotone_below_supersolution", excess / p.psigma.max(), 1e-12);

    let down = Nonlinearity::power(Sign::NonPositive, 0.0, 1.2, 0.1)?;
    let abs = solve_absorption(p, &down, &sigma, tol, cfg.solver.max_iter, Damping::Auto)?;
    s.at_least("absorption_converged", f64::from(u8::from(abs.converged)), 1.0);
    s.at_most("absorption_bracket_violations", abs.bracket_violations as f64, 0.0);
    let ref_fit = fit_boundary_rate_default(&p.psigma, grid)?;
    if let Some(fit) = &abs.boundary_fit {
        s.at_most("rate_transfer_error", (fit.exponent - ref_fit.exponent).abs(), 0.1);
    } else {
        s.at_most("rate_transfer_error", f64::INFINITY, 0.1);
    }

    let psi_op = p.psi_operator();
    let mut dist = 0.0_f64;
    for lam in [g.clone(), grid.delta.map(|d| d.powf(-0.25))] {
        let u = solve_linear(p, &LinearData::Density(lam.clone()), &zero)?.solution;
        dist = dist.max(distributional_residual(p, &psi_op, &u, &lam));
    }
    s.at_most("distributional_residual", dist, 1e-8);

    let test = move |x: f64| 1.0 + 0.5 * (x - mid) / diam;
    let zeta = BoundaryData::new(1.0, 0.5);
    let limit = zeta.zeta_a * test(grid.a) + zeta.zeta_b * test(grid.b);
    let pz = p.poisson_potential(&zeta);
    let green_u = p.green(&DVector::from_element(n, 1.0));
    let (mut trace_err, mut green_trace) = (0.0_f64, 0.0_f64);
    for t in [0.1, 0.05, 0.025] {
        let t = t * diam;
        trace_err = (weak_trace(p, &pz, test, t) - limit).abs() / limit;
        green_trace = weak_trace(p, &green_u, test, t).abs() / limit;
    }
    s.at_most("weak_trace_poisson_error", trace_err, 0.1);
    s.at_most("weak_trace_green", green_trace, 0.1);
    Ok(s)
}

/// Runs every suite on the configured problem.
pub fn verify_suites(cfg: &Config) -> Result<Vec<Check>> {
    let grid = build_grid(cfg.domain.a, cfg.domain.b, cfg.domain.n)?;
    let p = Problem::new(grid, cfg.operator.beta, cfg.psi()?)?;
    let fine = Problem::new(build_grid(cfg.domain.a, cfg.domain.b, 2 * cfg.domain.n)?, cfg.operator.beta, cfg.psi()?)?;
    let suites = [
        spectral_suite(&p)?,
        kernel_suite(&p, &fine)?,
        rate_suite(&p, cfg.operator.beta, cfg.operator.alpha)?,
        semilinear_suite(&p, cfg)?,
    ];
    Ok(suites.into_iter().flat_map(|s| s.checks).collect())
}
