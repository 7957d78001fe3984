use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use nlslab::analysis::{envelope_check, fit_boundary_rate_default};
use nlslab::bernstein::*;
use nlslab::discretize::{assemble_generator, build_grid, OperatorKind, OperatorMatrix};
use nlslab::kernels::BoundaryData;
use nlslab::quad::{integrate_log, QuadTol};
use nlslab::semilinear::{solve_linear, LinearData, Problem};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family<f64>> {
    prop_oneof![
        (0.05..0.95_f64).prop_map(|s| Family::Stable { s }),
        (0.05..0.95_f64, 0.1..10.0_f64).prop_map(|(s, mass)| Family::Relativistic { s, mass }),
        (0.05..0.95_f64, 0.1..10.0_f64).prop_map(|(s, theta)| Family::Tempered { s, theta }),
    ]
}

fn shared_problem() -> &'static Problem<f64> {
    static P: OnceLock<Problem<f64>> = OnceLock::new();
    P.get_or_init(|| Problem::stable(128, 1.0, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bernstein_is_increasing_and_sublinear(f in family(), t in 1e-3..1e3_f64, k in 1.01..10.0_f64) {
        let spec = BernsteinSpec::new(f, Role::Psi).unwrap();
        let (a, b) = (spec.value(t), spec.value(k * t));
        prop_assert!(a > 0.0 && b >= a);
        prop_assert!(b / (k * t) <= a / t * (1.0 + 1e-12));
    }

    #[test]
    fn stable_scaling_is_exact(s in 0.05..0.95_f64, top in 10.0..1e6_f64) {
        let spec = BernsteinSpec::stable(s, Role::Phi).unwrap();
        let r = estimate_scaling(&spec, 1.0, top, 32).unwrap();
        prop_assert!((r.lower_exponent - s).abs() < 1e-10 && (r.upper_exponent - s).abs() < 1e-10);
        prop_assert!((r.lower_const - 1.0).abs() < 1e-10 && (r.upper_const - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weight_vanishes_toward_the_boundary(
        beta in 0.2..1.8_f64,
        alpha in 0.2..1.8_f64,
        v in 1e-6..1e-3_f64,
    ) {
        // ρ need not be monotone where V(δ) is of order one, so sample δ
        // through V(δ) = δ^{β/2} in the boundary regime.
        let phi = BernsteinSpec::phi_stable(beta).unwrap();
        let psi = BernsteinSpec::psi_stable(alpha).unwrap();
        let delta = v.powf(2.0 / beta);
        let near = weight_rho(&phi, &psi, delta / 10.0).unwrap();
        let far = weight_rho(&phi, &psi, delta).unwrap();
        prop_assert!(near > 0.0 && near < far);
        let gauge = v.powf((2.0 - alpha).min(1.0)) * (1.0 - v.ln());
        prop_assert!(far <= 3.0 * gauge, "{far} vs {gauge}");
    }

    #[test]
    fn grid_invariants(n in 16usize..400, a in -5.0..0.0_f64, len in 0.1..10.0_f64) {
        let b = a + len;
        let g = build_grid(a, b, n).unwrap();
        prop_assert!((g.weights.sum() - len).abs() <= 1e-12 * len);
        for i in 0..n {
            prop_assert!(g.nodes[i] > a && g.nodes[i] < b);
            prop_assert!((g.delta[i] - (g.nodes[i] - a).min(b - g.nodes[i])).abs() <= 1e-12 * len);
            prop_assert!((g.delta[i] - g.delta[g.mirror(i)]).abs() <= 1e-12 * len);
        }
    }

    #[test]
    fn generator_is_a_symmetric_z_matrix(n in 16usize..96, beta in 0.1..1.9_f64) {
        let g = build_grid(-1.0, 1.0, n).unwrap();
        let a = assemble_generator(&g, beta).unwrap();
        prop_assert!(a.asymmetry() <= 1e-12 * a.max_abs());
        for i in 0..n {
            prop_assert!(a.entries[(i, i)] > 0.0);
            for j in 0..n {
                if i != j {
                    prop_assert!(a.entries[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn rate_fit_is_scale_equivariant(e in -1.5..1.5_f64, c in 1e-3..1e3_f64) {
        let g = build_grid(-1.0_f64, 1.0, 256).unwrap();
        let v = g.delta.map(|d| d.powf(e) * (2.0 - d));
        let a = fit_boundary_rate_default(&v, &g).unwrap();
        let b = fit_boundary_rate_default(&(&v * c), &g).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-10);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-10);
    }

    #[test]
    fn envelope_scales_with_the_matrix(c in 1e-3..1e3_f64, bend in 0.1..2.0_f64) {
        let g = build_grid(-1.0_f64, 1.0, 32).unwrap();
        let formula = move |x: f64, y: f64| 1.0 + bend * (x - y).abs();
        let entries = DMatrix::from_fn(32, 32, |i, j| formula(g.nodes[i], g.nodes[j]) * (1.5 + (g.nodes[i] * g.nodes[j]).sin()));
        let m = OperatorMatrix { entries: entries.clone(), kind: OperatorKind::GreenPsi };
        let scaled = OperatorMatrix { entries: entries * c, kind: OperatorKind::GreenPsi };
        let a = envelope_check(&m, &g, formula, 1).unwrap();
        let b = envelope_check(&scaled, &g, formula, 1).unwrap();
        prop_assert!((b.c_low / a.c_low / c - 1.0).abs() < 1e-12);
        prop_assert!((b.c_high / a.c_high / c - 1.0).abs() < 1e-12);
        prop_assert!((a.width() - b.width()).abs() <= 1e-12 * a.width());
    }

    #[test]
    fn poisson_potential_is_linear(za in -5.0..5.0_f64, zb in -5.0..5.0_f64, k in -3.0..3.0_f64) {
        let p = shared_problem();
        let sum = p.poisson_potential(&BoundaryData::new(za + k, zb));
        let parts = p.poisson_potential(&BoundaryData::new(za, zb)) + p.poisson_potential(&BoundaryData::new(k, 0.0));
        prop_assert!((sum - &parts).amax() <= 1e-12 * parts.amax().max(1.0));
    }

    #[test]
    fn linear_solve_preserves_sign(
        density in proptest::collection::vec(0.0..10.0_f64, 128),
        za in 0.0..3.0_f64,
        zb in 0.0..3.0_f64,
    ) {
        let p = shared_problem();
        let data = LinearData::Density(DVector::from_vec(density));
        let u = solve_linear(p, &data, &BoundaryData::new(za, zb)).unwrap().solution;
        prop_assert!(u.min() >= -1e-10 * u.amax().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn potential_density_inverts_the_laplace_transform(
        s in 0.4..0.6_f64,
        scale in 0.5..4.0_f64,
        lambda in 1.0..100.0_f64,
        tempered in any::<bool>(),
    ) {
        let f = if tempered { Family::Tempered { s, theta: scale } } else { Family::Relativistic { s, mass: scale } };
        let psi = BernsteinSpec::new(f, Role::Psi).unwrap();
        let (lo, hi) = (1e-12, 40.0 / lambda);
        let body = integrate_log(
            |t: f64| (-lambda * t).exp() * potential_density_u(&psi, t).unwrap(),
            lo,
            hi,
            &QuadTol::new(1e-13, 1e-9),
        )
        .unwrap()
        .value;
        // Below `lo` the density is the stable one up to relative O(lo^s).
        let head = lo.powf(s) / (s * statrs::function::gamma::gamma(s));
        let target = 1.0 / psi.value(lambda);
        prop_assert!((body + head - target).abs() <= 1e-5 * target, "{} vs {}", body + head, target);
    }
}
