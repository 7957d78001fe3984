use nalgebra::{DMatrix, DVector};
use nlslab::analysis::{fit_boundary_rate_default, weyl_fit};
use nlslab::bernstein::{BernsteinSpec, Family, Role};
use nlslab::discretize::{assemble_generator, build_grid, Grid, OperatorKind, OperatorMatrix};
use nlslab::spectral::*;

fn setup(n: usize, beta: f64) -> (Grid<f64>, OperatorMatrix<f64>, Spectrum<f64>) {
    let g = build_grid(-1.0, 1.0, n).unwrap();
    let a = assemble_generator(&g, beta).unwrap();
    let s = eigendecompose(&a, &g).unwrap();
    (g, a, s)
}

fn psi(alpha: f64) -> BernsteinSpec<f64> {
    BernsteinSpec::psi_stable(alpha).unwrap()
}

/// `A W B` under the weight convention.
fn compose(a: &DMatrix<f64>, g: &Grid<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * DMatrix::from_diagonal(&g.weights) * b
}

fn rel_gap(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).amax() / y.amax()
}

#[test]
fn weyl_slope_is_beta() {
    let (_, _, s) = setup(512, 1.0);
    let fit = weyl_fit(&s.eigenvalues, 5, 50).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.05, "slope {}", fit.slope);
}

#[test]
fn eigenpairs_are_accurate_and_orthonormal() {
    let (g, a, s) = setup(512, 1.0);
    assert!(s.lambda1() > 0.0);
    assert!(s.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    assert!(s.orthonormality_defect() <= 1e-10);
    let phi1 = s.eigenvector(0);
    assert!((g.inner(&phi1, &phi1) - 1.0).abs() <= 1e-10);
    assert!(phi1.iter().all(|&v| v > 0.0));
    for j in 0..s.n() {
        assert!(s.eigen_residual(&a, j) <= 1e-8 * s.eigenvalues[j], "j = {j}");
    }
}

#[test]
fn identity_map_reproduces_generator() {
    let (_, a, s) = setup(256, 1.3);
    let id = s.calculus(|l| l, OperatorKind::Calculus);
    assert!(rel_gap(&id.matrix.entries, &a.entries) <= 1e-9);
}

#[test]
fn psi_and_conjugate_compose_to_generator() {
    let (g, a, s) = setup(256, 1.0);
    let p = psi(1.0);
    let conj = p.conjugate().unwrap();
    let left = apply_psi(&s, &p);
    let right = s.calculus(|l| conj.value(l), OperatorKind::Calculus);
    assert!(rel_gap(&compose(&left.matrix.entries, &g, &right.matrix.entries), &a.entries) <= 1e-9);
    for (v, l) in left.values.iter().zip(s.eigenvalues.iter()) {
        assert_eq!(*v, l.sqrt());
    }
}

#[test]
fn calculus_commutes_with_generator() {
    let (g, a, s) = setup(128, 0.7);
    let m = apply_psi(&s, &psi(1.2)).matrix;
    let ab = compose(&a.entries, &g, &m.entries);
    let ba = compose(&m.entries, &g, &a.entries);
    assert!(rel_gap(&ab, &ba) <= 1e-9);
    assert!(m.asymmetry() <= 1e-12 * m.max_abs());
}

#[test]
fn heat_semigroup_law() {
    let (g, _, s) = setup(256, 1.0);
    let h = |t| heat_kernel(&s, t).unwrap().entries;
    assert!(rel_gap(&compose(&h(0.05), &g, &h(0.1)), &h(0.15)) <= 1e-9);
    assert!(heat_kernel(&s, 0.0).is_err());
}

#[test]
fn heat_kernel_is_sub_markov() {
    let (g, _, s) = setup(256, 0.8);
    for t in [0.01, 0.1, 1.0] {
        let h = heat_kernel(&s, t).unwrap();
        let rows = h.apply(&g, &DVector::from_element(g.n, 1.0));
        assert!(rows.iter().all(|&r| r >= 0.0 && r <= 1.0 + 1e-8), "t = {t}");
    }
}

#[test]
fn heat_kernel_large_time_is_rank_one() {
    let (g, _, s) = setup(256, 1.0);
    let gap = s.eigenvalues[1] - s.eigenvalues[0];
    for t in [2.0, 4.0, 8.0] {
        let h = heat_kernel(&s, t).unwrap();
        let rank_one = s.synthesize(
            &DVector::from_fn(g.n, |j, _| if j == 0 { (-s.lambda1() * t).exp() } else { 0.0 }),
            OperatorKind::Heat { t },
        );
        // The remainder acts on the complement of φ_1 with norm e^{−λ_2 t}.
        let rest = &h.entries - &rank_one.entries;
        let wr = DMatrix::from_diagonal(&g.weights.map(f64::sqrt));
        let norm = |m: &DMatrix<f64>| (&wr * m * &wr).symmetric_eigenvalues().amax();
        let ratio = norm(&rest) / norm(&rank_one.entries);
        assert!(ratio <= (-gap * t).exp() * (1.0 + 1e-9), "t = {t}: {ratio}");
    }
}

#[test]
fn green_psi_acts_diagonally_on_ground_state() {
    let (g, _, s) = setup(256, 1.0);
    let p = psi(1.0);
    let gp = green_matrix(&s, GreenKind::Psi, &p);
    let phi1 = s.eigenvector(0);
    let out = gp.apply(&g, &phi1);
    let expected = &phi1 / p.value(s.lambda1());
    assert!((out - &expected).amax() <= 1e-10 * expected.amax());
}

#[test]
fn green_factorization() {
    let (g, _, s) = setup(256, 1.0);
    let p = psi(0.6);
    let gp = green_matrix(&s, GreenKind::Psi, &p).entries;
    let gs = green_matrix(&s, GreenKind::PsiStar, &p).entries;
    let g0 = green_matrix(&s, GreenKind::G, &p).entries;
    assert!(rel_gap(&compose(&gp, &g, &gs), &g0) <= 1e-9);
}

#[test]
fn green_psi_is_nonnegative() {
    let (_, _, s) = setup(512, 1.0);
    let gp = green_matrix(&s, GreenKind::Psi, &psi(1.0));
    let floor = gp.entries.min();
    assert!(floor >= -1e-10 * gp.max_abs(), "min entry {floor}");
}

#[test]
fn subordination_oracle_matches_spectral_green() {
    let (_, _, s) = setup(256, 1.0);
    let p = psi(1.0);
    let t_max = oracle_horizon(&s, &p, 1e-8).unwrap();
    let oracle = green_oracle_subordination(&s, &p, t_max, 400, 1e-8).unwrap();
    assert!(oracle.tail_bound <= 1e-8);
    let spectral = green_matrix(&s, GreenKind::Psi, &p).entries;
    let mut worst = 0.0_f64;
    for i in 0..s.n() {
        for j in 0..s.n() {
            if i != j {
                let e = spectral[(i, j)];
                worst = worst.max((oracle.matrix.entries[(i, j)] - e).abs() / e.abs());
            }
        }
    }
    assert!(worst <= 1e-4, "worst relative deviation {worst:e}");
}

#[test]
fn subordination_quadrature_self_converges() {
    let (_, _, s) = setup(128, 1.0);
    let p = psi(1.0);
    let t_max = oracle_horizon(&s, &p, 1e-8).unwrap();
    let coarse = green_oracle_subordination(&s, &p, t_max, 200, 1e-8).unwrap().matrix.entries;
    let fine = green_oracle_subordination(&s, &p, t_max, 400, 1e-8).unwrap().matrix.entries;
    assert!(rel_gap(&coarse, &fine) <= 1e-6);
}

#[test]
fn subordination_oracle_refuses_short_horizon() {
    let (_, _, s) = setup(64, 1.0);
    let p = psi(1.0);
    assert!(green_oracle_subordination(&s, &p, 0.01, 200, 1e-8).is_err());
}

#[test]
fn subordination_oracle_for_relativistic_outer_function() {
    let (_, _, s) = setup(64, 1.0);
    let p = BernsteinSpec::new(Family::Relativistic { s: 0.5, mass: 1.0 }, Role::Psi).unwrap();
    let t_max = oracle_horizon(&s, &p, 1e-8).unwrap();
    let oracle = green_oracle_subordination(&s, &p, t_max, 400, 1e-8).unwrap().matrix.entries;
    let spectral = green_matrix(&s, GreenKind::Psi, &p).entries;
    assert!(rel_gap(&oracle, &spectral) <= 1e-4);
}

#[test]
fn ground_state_follows_hopf_rate() {
    for beta in [0.6, 1.0, 1.5] {
        let (g, _, s) = setup(1024, beta);
        let fit = fit_boundary_rate_default(&s.eigenvector(0), &g).unwrap();
        assert!((fit.exponent - beta / 2.0).abs() < 0.05, "beta = {beta}: {}", fit.exponent);
    }
}

#[test]
fn eigenfunctions_vanish_at_the_boundary() {
    let beta = 1.0;
    let outer = |n: usize| -> Vec<f64> {
        let (_, _, s) = setup(n, beta);
        (0..3).map(|j| s.eigenvector(j)[0].abs().max(s.eigenvector(j)[n - 1].abs())).collect()
    };
    let (a, b, c) = (outer(256), outer(512), outer(1024));
    for j in 0..3 {
        assert!(b[j] < a[j] && c[j] < b[j]);
        let order = (b[j] / c[j]).log2();
        assert!(order >= beta / 2.0 - 0.1, "j = {j}: order {order}");
    }
}

#[test]
fn calculus_ring() {
    let (g, _, s) = setup(128, 1.0);
    let p = psi(0.8);
    let conj = p.conjugate().unwrap();
    let t = 0.3;
    let maps: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(move |l| p.value(l)),
        Box::new(move |l| conj.value(l)),
        Box::new(|l| l),
        Box::new(move |l| (-t * l).exp()),
    ];
    for f in &maps {
        for h in &maps {
            let lhs = compose(
                &s.calculus(f, OperatorKind::Calculus).matrix.entries,
                &g,
                &s.calculus(h, OperatorKind::Calculus).matrix.entries,
            );
            let rhs = s.calculus(|l| f(l) * h(l), OperatorKind::Calculus).matrix.entries;
            assert!(rel_gap(&lhs, &rhs) <= 1e-9);
        }
    }
}

#[test]
fn eigendecompose_rejects_mismatched_grid() {
    let (_, a, _) = setup(32, 1.0);
    let other = build_grid(-1.0, 1.0, 64).unwrap();
    assert!(eigendecompose(&a, &other).is_err());
}
