//! The six subcommands. Each writes its artifacts into `output.dir` and
//! returns the paths it wrote.

use std::path::PathBuf;

use nalgebra::DVector;
use serde::Serialize;

use super::config::Config;
use super::output::{ensure_dir, header, num, write_csv, write_json};
use super::verify::verify_suites;
use super::CliError;
use crate::analysis::{
    envelope_check, fit_boundary_rate_default, green_envelope, heat_envelope, weyl_fit, EnvelopeBand, RateFit,
};
use crate::bernstein::{BernsteinSpec, Family};
use crate::discretize::{assemble_generator, build_grid, Grid};
use crate::error::LabError;
use crate::kernels::{harmonicity_residual, Endpoint, NEAR_FIELD_ROWS};
use crate::semilinear::{
    existence_sweep, kato_check, random_starts, solve_absorption, solve_monotone, solve_truncated, weak_trace,
    Damping, Problem, Sign, SolveReport, SweepOptions,
};
use crate::spectral::{eigendecompose, green_matrix, heat_kernel, GreenKind};

type Files = Result<Vec<PathBuf>, CliError>;

const HOPF_TOL: f64 = 0.05;
const WEYL_TOL: f64 = 0.05;
const WEYL_WINDOW: (usize, usize) = (5, 50);
const POISSON_TOL: f64 = 0.1;
const ENVELOPE_EXCLUSION: usize = 2;
const ENVELOPE_TIME: f64 = 0.1;

fn grid_of(cfg: &Config) -> Result<Grid<f64>, LabError> {
    build_grid(cfg.domain.a, cfg.domain.b, cfg.domain.n)
}

fn problem_of(cfg: &Config) -> Result<Problem<f64>, LabError> {
    Problem::new(grid_of(cfg)?, cfg.operator.beta, cfg.psi()?)
}

#[derive(Serialize)]
struct FitJson {
    exponent: f64,
    intercept: f64,
    r_squared: f64,
    log_correction_detected: bool,
    plain_exponent: f64,
    layers: usize,
}

impl From<&RateFit<f64>> for FitJson {
    fn from(f: &RateFit<f64>) -> Self {
        FitJson {
            exponent: f.exponent,
            intercept: f.intercept,
            r_squared: f.r_squared,
            log_correction_detected: f.log_correction_detected,
            plain_exponent: f.plain_exponent,
            layers: f.layers.len(),
        }
    }
}

#[derive(Serialize)]
struct Target {
    value: f64,
    target: f64,
    tolerance: f64,
    pass: bool,
}

impl Target {
    fn new(value: f64, target: f64, tolerance: f64) -> Self {
        Target { value, target, tolerance, pass: (value - target).abs() <= tolerance }
    }
}

pub fn cmd_eig(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let grid = grid_of(cfg)?;
    let beta = cfg.operator.beta;
    let spec = eigendecompose(&assemble_generator(&grid, beta)?, &grid)?;

    let rows: Vec<Vec<String>> =
        spec.eigenvalues.iter().enumerate().map(|(j, l)| vec![(j + 1).to_string(), num(*l)]).collect();
    let eig = write_csv(dir, "eig.csv", &header(&["j", "lambda"]), &rows)?;

    let k = cfg.output.eigenfunctions.min(grid.n);
    let mut cols = vec!["x".to_string()];
    cols.extend((1..=k).map(|j| format!("phi_{j}")));
    let rows: Vec<Vec<String>> = (0..grid.n)
        .map(|i| {
            let mut r = vec![num(grid.nodes[i])];
            r.extend((0..k).map(|j| num(spec.vectors[(i, j)])));
            r
        })
        .collect();
    let eigfun = write_csv(dir, "eigfun.csv", &cols, &rows)?;

    let hi = WEYL_WINDOW.1.min(grid.n);
    let weyl = weyl_fit(&spec.eigenvalues, WEYL_WINDOW.0, hi)?;
    let hopf = fit_boundary_rate_default(&spec.eigenvector(0), &grid)?;
    #[derive(Serialize)]
    struct Rates {
        n: usize,
        beta: f64,
        lambda_1: f64,
        weyl_window: [usize; 2],
        weyl_slope: Target,
        weyl_r_squared: f64,
        hopf_exponent: Target,
        hopf_fit: FitJson,
    }
    let rates = Rates {
        n: grid.n,
        beta,
        lambda_1: spec.lambda1(),
        weyl_window: [WEYL_WINDOW.0, hi],
        weyl_slope: Target::new(weyl.slope, beta, WEYL_TOL),
        weyl_r_squared: weyl.r_squared,
        hopf_exponent: Target::new(hopf.exponent, beta / 2.0, HOPF_TOL),
        hopf_fit: FitJson::from(&hopf),
    };
    let rates = write_json(dir, "rates.json", &rates)?;
    Ok(vec![eig, eigfun, rates])
}

#[derive(Serialize)]
struct BandJson {
    c_low: f64,
    c_high: f64,
    width: f64,
    compared: usize,
    nonpositive_entries: usize,
}

impl From<EnvelopeBand<f64>> for BandJson {
    fn from(b: EnvelopeBand<f64>) -> Self {
        BandJson {
            c_low: b.c_low,
            c_high: b.c_high,
            width: b.width(),
            compared: b.compared,
            nonpositive_entries: b.nonpositive_entries,
        }
    }
}

pub fn cmd_green(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let p = problem_of(cfg)?;
    let grid = &p.grid;
    let g = green_matrix(&p.spectrum, GreenKind::G, &p.psi);
    // Source points at a quarter, the middle and three quarters.
    let picks = [grid.n / 4, grid.n / 2, 3 * grid.n / 4];
    let mut cols = header(&["x", "delta"]);
    for (k, _) in picks.iter().enumerate() {
        cols.push(format!("g_psi_{}", k + 1));
    }
    for (k, _) in picks.iter().enumerate() {
        cols.push(format!("g_{}", k + 1));
    }
    let rows: Vec<Vec<String>> = (0..grid.n)
        .map(|i| {
            let mut r = vec![num(grid.nodes[i]), num(grid.delta[i])];
            r.extend(picks.iter().map(|&j| num(p.gpsi.entries[(i, j)])));
            r.extend(picks.iter().map(|&j| num(g.entries[(i, j)])));
            r
        })
        .collect();
    let csv = write_csv(dir, "green.csv", &cols, &rows)?;

    let (a, b) = (grid.a, grid.b);
    let green_band = envelope_check(&p.gpsi, grid, green_envelope(p.phi, p.psi, a, b), ENVELOPE_EXCLUSION)?;
    let heat = heat_kernel(&p.spectrum, ENVELOPE_TIME)?;
    let heat_band =
        envelope_check(&heat, grid, heat_envelope(cfg.operator.beta, ENVELOPE_TIME, a, b), ENVELOPE_EXCLUSION)?;
    #[derive(Serialize)]
    struct Envelope {
        n: usize,
        source_nodes: Vec<f64>,
        exclusion: usize,
        green_psi: BandJson,
        heat_time: f64,
        heat: BandJson,
    }
    let env = Envelope {
        n: grid.n,
        source_nodes: picks.iter().map(|&j| grid.nodes[j]).collect(),
        exclusion: ENVELOPE_EXCLUSION,
        green_psi: green_band.into(),
        heat_time: ENVELOPE_TIME,
        heat: heat_band.into(),
    };
    let json = write_json(dir, "envelope.json", &env)?;
    Ok(vec![csv, json])
}

fn reference_target(psi: &BernsteinSpec<f64>, beta: f64) -> Option<f64> {
    match psi.family {
        Family::Stable { s } => Some(-1.0 - beta / 2.0 + s * beta),
        _ => None,
    }
}

pub fn cmd_poisson(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let p = problem_of(cfg)?;
    let grid = &p.grid;
    let n = grid.n;
    let pa = p.poisson.column(Endpoint::A);
    let pb = p.poisson.column(Endpoint::B);
    let pz = p.poisson_potential(&cfg.zeta());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let near = i < NEAR_FIELD_ROWS || n - 1 - i < NEAR_FIELD_ROWS;
            vec![
                num(grid.nodes[i]),
                num(grid.delta[i]),
                num(pa[i]),
                num(pb[i]),
                num(p.psigma[i]),
                num(pz[i]),
                u8::from(near).to_string(),
            ]
        })
        .collect();
    let cols = header(&["x", "delta", "p_a", "p_b", "p_sigma", "p_zeta", "near_field"]);
    let csv = write_csv(dir, "poisson.csv", &cols, &rows)?;

    let fit = fit_boundary_rate_default(&p.psigma, grid)?;
    let margin = (0.1 * grid.diameter()).max(4.0 * grid.h);
    let harmonic = harmonicity_residual(&p.psigma, &p.psi_operator(), grid, margin)?;
    #[derive(Serialize)]
    struct Endpoints {
        endpoint: &'static str,
        stencil: [usize; 3],
        weights: [f64; 3],
        extrapolation_residual: f64,
        near_field_rows: usize,
        near_field_scale: f64,
        nonmonotone_rows: usize,
        warning: Option<String>,
    }
    #[derive(Serialize)]
    struct Rates {
        n: usize,
        beta: f64,
        alpha: f64,
        reference_fit: FitJson,
        reference_exponent: Option<Target>,
        harmonicity_margin: f64,
        harmonicity_residual: f64,
        extrapolation: Vec<Endpoints>,
    }
    let extrapolation = [("a", 0), ("b", 1)]
        .into_iter()
        .map(|(name, k)| {
            let d = &p.poisson.diagnostics[k];
            Endpoints {
                endpoint: name,
                stencil: d.stencil,
                weights: d.weights,
                extrapolation_residual: d.residual,
                near_field_rows: d.near_field_rows,
                near_field_scale: d.near_field_scale,
                nonmonotone_rows: d.nonmonotone_rows,
                warning: d.warning.clone(),
            }
        })
        .collect();
    let rates = Rates {
        n,
        beta: cfg.operator.beta,
        alpha: cfg.operator.alpha,
        reference_fit: FitJson::from(&fit),
        reference_exponent: reference_target(&p.psi, cfg.operator.beta)
            .map(|t| Target::new(fit.exponent, t, POISSON_TOL)),
        harmonicity_margin: margin,
        harmonicity_residual: harmonic,
        extrapolation,
    };
    let json = write_json(dir, "poisson_rates.json", &rates)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct ReportJson {
    solver: &'static str,
    n: usize,
    theta: f64,
    p: f64,
    m: f64,
    zeta: [f64; 2],
    converged: bool,
    iterations: usize,
    final_residual: Option<f64>,
    damping: f64,
    bracket_violations: usize,
    monotone: Option<bool>,
    kato_violation: Option<f64>,
    start_spread: Option<f64>,
    boundary_fit: Option<FitJson>,
    weak_trace: Vec<[f64; 3]>,
    residual_trace: Vec<f64>,
}

pub fn cmd_solve(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let p = problem_of(cfg)?;
    let grid = &p.grid;
    let f = cfg.nonlinearity()?;
    let zeta = cfg.zeta();
    let (tol, max_iter) = (cfg.solver.tol, cfg.solver.max_iter);
    let mut spread = None;
    let (solver, report): (&'static str, SolveReport<f64>) = match f.sign {
        Sign::NonPositive => {
            let damping = cfg.solver.damping.map_or(Damping::Auto, Damping::Fixed);
            ("absorption", solve_absorption(&p, &f, &zeta, tol, max_iter, damping)?)
        }
        Sign::NonNegative => ("monotone", solve_monotone(&p, &f, &zeta, tol, max_iter)?),
        Sign::Signed => {
            let abs_zeta = crate::kernels::BoundaryData::new(zeta.zeta_a.abs(), zeta.zeta_b.abs());
            let load = DVector::from_fn(grid.n, |i, _| f.q(grid.delta[i]) * f.growth(cfg.solver.bound));
            let sup = p.poisson_potential(&abs_zeta) + p.green(&load);
            let sub = -&sup;
            let main = solve_truncated(&p, &f, &sub, &sup, &zeta, tol, max_iter, None)?;
            let scale = main.solution.amax().max(1.0);
            let mut worst = 0.0_f64;
            for start in random_starts(&sub, &sup, cfg.solver.starts, cfg.output.seed) {
                let r = solve_truncated(&p, &f, &sub, &sup, &zeta, tol, max_iter, Some(&start))?;
                worst = worst.max((&r.solution - &main.solution).amax() / scale);
            }
            spread = Some(worst);
            ("truncated", main)
        }
    };
    let u = &report.solution;
    let kato = (zeta.zeta_a == 0.0 && zeta.zeta_b == 0.0).then(|| kato_check(&p, u, &f.eval_grid(grid, u)));
    let mid = 0.5 * (grid.a + grid.b);
    let traces = [0.1, 0.05, 0.025]
        .iter()
        .map(|&frac| {
            let t = frac * grid.diameter();
            let left = weak_trace(&p, u, |x| if x < mid { 1.0 } else { 0.0 }, t);
            let right = weak_trace(&p, u, |x| if x < mid { 0.0 } else { 1.0 }, t);
            [t, left, right]
        })
        .collect();

    let rows: Vec<Vec<String>> = (0..grid.n)
        .map(|i| vec![num(grid.nodes[i]), num(grid.delta[i]), num(u[i]), num(p.psigma[i]), num(u[i] / p.psigma[i])])
        .collect();
    let csv = write_csv(dir, "solution.csv", &header(&["x", "delta", "u", "p_sigma", "u_over_p_sigma"]), &rows)?;
    let nl = &cfg.nonlinearity;
    let json = ReportJson {
        solver,
        n: grid.n,
        theta: nl.theta,
        p: nl.p,
        m: nl.m,
        zeta: [zeta.zeta_a, zeta.zeta_b],
        converged: report.converged,
        iterations: report.iterations,
        final_residual: report.final_residual(),
        damping: report.damping,
        bracket_violations: report.bracket_violations,
        monotone: report.monotone,
        kato_violation: kato,
        start_spread: spread,
        boundary_fit: report.boundary_fit.as_ref().map(FitJson::from),
        weak_trace: traces,
        residual_trace: report.residual_trace.clone(),
    };
    let json = write_json(dir, "report.json", &json)?;
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "{solver} iteration stopped after {} steps with residual {:e}",
            report.iterations,
            report.final_residual().unwrap_or(f64::NAN)
        )));
    }
    Ok(vec![csv, json])
}

pub fn cmd_sweep(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    if !matches!(cfg.psi()?.family, Family::Stable { .. }) {
        return Err(LabError::Config("sweep supports the stable family only".into()).into());
    }
    let op = &cfg.operator;
    let opts = SweepOptions { m: cfg.nonlinearity.m, tol: cfg.solver.tol, max_iter: cfg.solver.max_iter, ..Default::default() };
    let table = existence_sweep(op.alpha, op.beta, cfg.nonlinearity.theta, &cfg.sweep.p_grid, &cfg.sweep.levels, &opts)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.p),
                r.n.to_string(),
                r.class.label().to_string(),
                num(r.surrogate),
                num(r.residual),
                r.boundary_exponent.map_or_else(String::new, num),
            ]
        })
        .collect();
    let cols = header(&["p", "n", "class", "surrogate", "residual", "boundary_exponent"]);
    let csv = write_csv(dir, "sweep.csv", &cols, &rows)?;
    #[derive(Serialize)]
    struct Growth {
        p: f64,
        surrogate_growth: f64,
        increment_ratio: f64,
    }
    #[derive(Serialize)]
    struct Summary {
        alpha: f64,
        beta: f64,
        theta: f64,
        critical_exponent: f64,
        boundary: Option<[f64; 2]>,
        brackets_critical: bool,
        growth: Vec<Growth>,
    }
    let boundary = table.boundary.map(|(lo, hi)| [lo, hi]);
    let summary = Summary {
        alpha: op.alpha,
        beta: op.beta,
        theta: cfg.nonlinearity.theta,
        critical_exponent: table.critical,
        boundary,
        brackets_critical: boundary.is_some_and(|[lo, hi]| lo < table.critical && table.critical < hi),
        growth: table
            .growth
            .iter()
            .map(|&(p, g, r)| Growth { p, surrogate_growth: g, increment_ratio: r })
            .collect(),
    };
    let json = write_json(dir, "sweep.json", &summary)?;
    Ok(vec![csv, json])
}

pub fn cmd_verify(cfg: &Config) -> Files {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let checks = verify_suites(cfg)?;
    #[derive(Serialize)]
    struct Verify<'a> {
        n: usize,
        beta: f64,
        alpha: f64,
        passed: usize,
        failed: usize,
        all_pass: bool,
        checks: &'a [super::Check],
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let v = Verify {
        n: cfg.domain.n,
        beta: cfg.operator.beta,
        alpha: cfg.operator.alpha,
        passed: checks.len() - failed.len(),
        failed: failed.len(),
        all_pass: failed.is_empty(),
        checks: &checks,
    };
    let json = write_json(dir, "verify.json", &v)?;
    if !failed.is_empty() {
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok(vec![json])
}

