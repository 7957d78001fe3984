use nalgebra::DVector;
use nlslab::analysis::fit_boundary_rate_default;
use nlslab::kernels::BoundaryData;
use nlslab::semilinear::*;
use nlslab::LabError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn problem(n: usize) -> Problem<f64> {
    Problem::stable(n, 1.0, 1.0).unwrap()
}

#[test]
fn linear_solve_on_ground_state() {
    let p = problem(256);
    let phi1 = p.spectrum.eigenvector(0);
    let r = solve_linear(&p, &LinearData::Density(phi1.clone()), &BoundaryData::zero()).unwrap();
    let expected = &phi1 / p.psi.value(p.spectrum.lambda1());
    assert!(r.converged);
    assert!((&r.solution - &expected).amax() <= 1e-10 * expected.amax());
}

#[test]
fn linear_solve_maximum_principle() {
    let p = problem(512);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..8 {
        let lam = DVector::from_fn(p.grid.n, |_, _| rng.gen::<f64>() * rng.gen::<f64>());
        let zeta = BoundaryData::new(rng.gen(), rng.gen());
        let u = solve_linear(&p, &LinearData::Density(lam), &zeta).unwrap().solution;
        assert!(u.min() >= -1e-10 * u.max());
    }
    let atoms = LinearData::Atoms(vec![(3, 0.5), (200, 2.0)]);
    let u = solve_linear(&p, &atoms, &BoundaryData::zero()).unwrap().solution;
    assert!(u.min() >= -1e-10 * u.max());
}

#[test]
fn linear_solve_rejects_non_integrable_profile() {
    let p = problem(64);
    let r = solve_linear(&p, &LinearData::DistancePower(-1.5), &BoundaryData::zero());
    assert!(matches!(r, Err(LabError::Infeasible(_))));
    assert!(solve_linear(&p, &LinearData::DistancePower(-1.4), &BoundaryData::zero()).is_ok());
    assert!(solve_linear(&p, &LinearData::Density(DVector::zeros(3)), &BoundaryData::zero()).is_err());
}

#[test]
fn green_potential_of_critical_power_has_log_rate() {
    let p = problem(1024);
    let r = solve_linear(&p, &LinearData::DistancePower(0.0), &BoundaryData::zero()).unwrap();
    let fit = r.boundary_fit.unwrap();
    assert!(fit.log_correction_detected, "plain exponent {}", fit.plain_exponent);
    assert!((fit.exponent - 0.5).abs() <= 0.07, "exponent {}", fit.exponent);
}

#[test]
fn monotone_scheme_with_zero_nonlinearity() {
    let p = problem(128);
    let f = Nonlinearity::zero(Sign::NonNegative);
    let r = solve_monotone(&p, &f, &BoundaryData::sigma(), TOL, 50).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations, 1);
    assert_eq!(r.solution, p.psigma);
}

#[test]
fn monotone_scheme_below_critical_exponent() {
    let p = problem(512);
    let f = Nonlinearity::power(Sign::NonNegative, 0.0, 1.2, 0.1).unwrap();
    let r = solve_monotone(&p, &f, &BoundaryData::sigma(), TOL, 200).unwrap();
    assert!(r.converged && r.monotone == Some(true));
    assert!(r.final_residual().unwrap() <= TOL);
    assert!((r.boundary_fit.as_ref().unwrap().exponent + 1.0).abs() < 0.1);
    assert!((0..p.grid.n).all(|i| r.solution[i] >= p.psigma[i] && r.solution[i] <= 2.0 * p.psigma[i]));
}

#[test]
fn monotone_iterates_never_decrease() {
    // Re-run the scheme one step at a time through the iteration budget.
    let p = problem(256);
    let f = Nonlinearity::power(Sign::NonNegative, 0.0, 1.2, 0.1).unwrap();
    let mut prev = p.psigma.clone();
    for k in 1..8 {
        let u = solve_monotone(&p, &f, &BoundaryData::sigma(), 0.0, k).unwrap().solution;
        assert!((0..p.grid.n).all(|i| u[i] >= prev[i] - 1e-12 * prev.amax()), "step {k}");
        prev = u;
    }
}

#[test]
fn monotone_scheme_checks_its_precondition() {
    let p = problem(256);
    let f = Nonlinearity::power(Sign::NonNegative, 0.0, 1.2, 10.0).unwrap();
    let r = solve_monotone(&p, &f, &BoundaryData::sigma(), TOL, 50);
    assert!(matches!(r, Err(LabError::Precondition(msg)) if msg.contains("node")));
    let wrong = Nonlinearity::power(Sign::NonPositive, 0.0, 1.2, 0.1).unwrap();
    assert!(solve_monotone(&p, &wrong, &BoundaryData::sigma(), TOL, 50).is_err());
}

#[test]
fn absorption_with_zero_nonlinearity() {
    let p = problem(128);
    let r = solve_absorption(&p, &Nonlinearity::zero(Sign::NonPositive), &BoundaryData::sigma(), TOL, 50, Damping::Fixed(1.0))
        .unwrap();
    assert!(r.converged);
    assert_eq!(r.solution, p.psigma);
}

#[test]
fn absorption_below_critical_exponent() {
    let p = problem(512);
    let f = Nonlinearity::power(Sign::NonPositive, 0.0, 1.2, 0.1).unwrap();
    let r = solve_absorption(&p, &f, &BoundaryData::sigma(), TOL, 500, Damping::Auto).unwrap();
    assert!(r.converged);
    assert_eq!(r.bracket_violations, 0);
    let slack = 1e-9 * p.psigma.amax();
    assert!((0..p.grid.n).all(|i| r.solution[i] >= -slack && r.solution[i] <= p.psigma[i] + slack));
    let fit = r.boundary_fit.unwrap();
    assert!((fit.exponent + 1.0).abs() < 0.1, "exponent {}", fit.exponent);
    let reference = fit_boundary_rate_default(&p.psigma, &p.grid).unwrap();
    assert!((fit.exponent - reference.exponent).abs() < 0.1);
}

#[test]
fn absorption_rejects_bad_damping() {
    let p = problem(64);
    let f = Nonlinearity::power(Sign::NonPositive, 0.0, 1.2, 0.1).unwrap();
    for w in [0.0, 1.5] {
        assert!(matches!(
            solve_absorption(&p, &f, &BoundaryData::sigma(), TOL, 10, Damping::Fixed(w)),
            Err(LabError::Config(_))
        ));
    }
}

#[test]
fn supercritical_absorption_surrogate_blows_up() {
    let f = Nonlinearity::power(Sign::NonPositive, 0.0, 2.0, 1.0).unwrap();
    let s: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|&n| {
            let p = problem(n);
            integrability_surrogate(&p, &f, &p.psigma)
        })
        .collect();
    for w in s.windows(2) {
        assert!(w[1] >= 1.2 * w[0], "{s:?}");
    }
}

#[test]
fn truncated_scheme_with_zero_nonlinearity() {
    let p = problem(128);
    let f = Nonlinearity::zero(Sign::Signed);
    let sup = p.green(&DVector::from_element(p.grid.n, 1.0));
    let r = solve_truncated(&p, &f, &(-&sup), &sup, &BoundaryData::zero(), TOL, 100, None).unwrap();
    assert!(r.converged && r.solution.amax() == 0.0);
}

#[test]
fn odd_nonlinearity_with_zero_data_gives_zero() {
    let p = problem(256);
    let f = Nonlinearity::power(Sign::Signed, 0.0, 1.1, 1.0).unwrap();
    let bound = 2.0;
    let sup = p.green(&DVector::from_element(p.grid.n, f.growth(bound)));
    let sub = -&sup;
    for start in random_starts(&sub, &sup, 3, 11) {
        let r = solve_truncated(&p, &f, &sub, &sup, &BoundaryData::zero(), TOL, 500, Some(&start)).unwrap();
        assert!(r.converged);
        assert!(r.solution.amax() <= 1e-8, "{}", r.solution.amax());
    }
}

fn signed_problem(p: &Problem<f64>) -> (Nonlinearity<f64>, DVector<f64>, DVector<f64>) {
    let tau = std::f64::consts::TAU;
    let source = move |x: f64| 5.0 * (tau * (x + 1.0) / 2.0).sin();
    let f = Nonlinearity::power(Sign::Signed, 0.0, 1.1, 1.0)
        .unwrap()
        .with_map(move |x, t| source(x) - t.signum() * t.abs().powf(1.1));
    let sup = p.green(&p.grid.nodes.map(|x| source(x).abs()));
    let sub = -&sup;
    (f, sub, sup)
}

#[test]
fn truncated_scheme_is_start_independent() {
    let p = problem(256);
    let (f, sub, sup) = signed_problem(&p);
    let zero = BoundaryData::zero();
    let base = solve_truncated(&p, &f, &sub, &sup, &zero, TOL, 1000, None).unwrap();
    assert!(base.converged);
    let slack = TOL * base.solution.amax().max(1.0);
    assert!((0..p.grid.n).all(|i| base.solution[i] >= sub[i] - slack && base.solution[i] <= sup[i] + slack));
    for start in random_starts(&sub, &sup, 5, 42) {
        let r = solve_truncated(&p, &f, &sub, &sup, &zero, TOL, 1000, Some(&start)).unwrap();
        assert!((&r.solution - &base.solution).amax() <= 10.0 * TOL * base.solution.amax().max(1.0));
    }
}

#[test]
fn truncated_scheme_rejects_crossed_bracket() {
    let p = problem(64);
    let (f, sub, sup) = signed_problem(&p);
    let r = solve_truncated(&p, &f, &sup, &sub, &BoundaryData::zero(), TOL, 10, None);
    assert!(matches!(r, Err(LabError::Precondition(_))));
}

#[test]
fn kato_equality_and_nonpositive_cases() {
    let p = problem(256);
    let g = p.grid.nodes.map(|x| 2.0 + x.sin());
    let u = p.green(&g);
    assert!(kato_check(&p, &u, &g) <= 1e-10 * u.amax());
    assert!(kato_check(&p, &(-&u), &(-&g)) <= 1e-10);
}

#[test]
fn kato_inequality_for_signed_solution() {
    let p = problem(512);
    let (f, sub, sup) = signed_problem(&p);
    let r = solve_truncated(&p, &f, &sub, &sup, &BoundaryData::zero(), TOL, 1000, None).unwrap();
    let fv = f.eval_grid(&p.grid, &r.solution);
    assert!(r.solution.max() > 0.0 && r.solution.min() < 0.0);
    assert!(kato_check(&p, &r.solution, &fv) <= 1e-6 * r.solution.amax());
}

#[test]
fn critical_exponent_examples() {
    assert!((critical_exponent(1.0_f64, 1.0, 0.0).unwrap() - 1.5).abs() < 1e-15);
    assert!((critical_exponent(1.0_f64, 1.0, 1.0).unwrap() - 2.5).abs() < 1e-15);
    assert!((critical_exponent(1.0_f64, 1.0, -0.5).unwrap() - 1.0).abs() < 1e-15);
    assert!(critical_exponent(2.0, 1.0, 0.0).is_err());
}

#[test]
fn distributional_residual_is_small() {
    let p = problem(512);
    let op = p.psi_operator();
    for lam in [p.grid.nodes.map(|x| 1.0 + x * x), p.grid.delta.map(|d| d.powf(-0.25))] {
        let u = solve_linear(&p, &LinearData::Density(lam.clone()), &BoundaryData::zero()).unwrap().solution;
        assert!(distributional_residual(&p, &op, &u, &lam) <= 1e-8);
    }
}

#[test]
fn test_bumps_stay_away_from_the_boundary() {
    let p = problem(256);
    for b in test_bumps(&p.grid) {
        for i in 0..p.grid.n {
            if p.grid.delta[i] < 0.2 {
                assert_eq!(b[i], 0.0);
            }
        }
        assert!(b.max() > 0.0);
    }
}

#[test]
fn weak_traces_recover_boundary_data() {
    let zeta = BoundaryData::new(1.0, 0.5);
    let test = |x: f64| 1.0 + 0.25 * x;
    let limit = 0.75 + 0.5 * 1.25;
    for (t, n) in [(0.2, 256), (0.1, 512), (0.05, 1024)] {
        let p = problem(n);
        assert!(p.grid.delta.iter().filter(|&&d| d <= t).count() >= 16);
        let pz = p.poisson_potential(&zeta);
        let err = (weak_trace(&p, &pz, test, t) - limit).abs() / limit;
        let green = p.green(&DVector::from_element(n, 1.0));
        let g = weak_trace(&p, &green, test, t).abs() / limit;
        if t <= 0.1 {
            assert!(err <= 0.1, "t = {t}: {err}");
            assert!(g <= 0.1, "t = {t}: {g}");
        }
    }
}

#[test]
fn sweep_brackets_the_critical_exponent() {
    let opts = SweepOptions { m: 1.0, ..SweepOptions::default() };
    let table = existence_sweep(1.0_f64, 1.0, 0.0, &[1.2, 1.4, 1.6, 1.8], &[256, 512, 1024], &opts).unwrap();
    let classes: Vec<Class> = [1.2, 1.4, 1.6, 1.8].iter().map(|&p| class_of(&table, p).unwrap()).collect();
    assert_eq!(classes, [Class::Convergent, Class::Convergent, Class::Divergent, Class::Divergent]);
    assert_eq!(table.boundary, Some((1.4, 1.6)));
    assert!((table.critical - 1.5).abs() < 1e-12);
}

#[test]
fn sweep_needs_two_resolutions() {
    let opts = SweepOptions::default();
    assert!(existence_sweep(1.0, 1.0, 0.0, &[1.2], &[256], &opts).is_err());
    assert!(existence_sweep(1.0, 1.0, 0.0, &[], &[256, 512], &opts).is_err());
}

#[test]
fn nonlinearity_respects_its_growth_bound() {
    let p = problem(64);
    let samples = [-3.0, -0.5, 0.0, 0.2, 1.0, 4.0];
    for sign in [Sign::NonPositive, Sign::NonNegative, Sign::Signed] {
        let f = Nonlinearity::power(sign, 0.5, 1.3, 0.7).unwrap();
        assert!(f.bound_excess(&p.grid, &samples) <= 0.0);
    }
    assert!(Nonlinearity::power(Sign::Signed, 0.0, 0.0, 1.0).is_err());
}
