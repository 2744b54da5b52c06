//! Acceptance battery: every advertised property of the solver and the
//! foliation engine, one test per property, each printing a single
//! [PASS]/[FAIL] line with the measured values and the pinned tolerance.

use std::time::{Duration, Instant};

use cmc_foliation::foliation::{
    evolution_identity_check, ordering_trial, time_function_check, uniqueness_trial,
};
use cmc_foliation::geometry::ricci_normal_field;
use cmc_foliation::solver::{jacobian, residual};
use cmc_foliation::{
    compute_geometry, foliate, newton_solve, run_suite, Error, FoliateOptions, MetricSpec,
    NewtonConfig, PeriodicGrid, Result, ScalarField, SuiteMode,
};

const LEN: f64 = 2.0 * std::f64::consts::PI;

/// Sup error of the recovered homogeneous slice.
const TOL_RECOVERY: f64 = 1e-8;
const MAX_RECOVERY_ITERS: usize = 10;
const RECOVERY_BUDGET: Duration = Duration::from_secs(1);
/// Per-slice position and volume error of the long homogeneous march.
const TOL_SHAPE: f64 = 1e-7;
const SHAPE_BUDGET: Duration = Duration::from_secs(30);
/// Largest pairwise sup distance between solutions from perturbed seeds.
const TOL_UNIQUENESS: f64 = 1e-6;
/// Drop of the speed mismatch when the slice schedule is twice as dense
/// (second-order differencing gives 0.25).
const TIMEFN_REFINE_RATIO: f64 = 0.35;
/// Slack on min(|A|^2 + Ric(nu,nu)) >= tau^2/n - lambda.
const TOL_STABILITY_SLACK: f64 = 1e-6;
/// Band of acceptable observed convergence orders.
const ORDER_LO: f64 = 1.7;
const ORDER_HI: f64 = 2.3;
/// Directional-derivative consistency of the probed Jacobian.
const TOL_JACOBIAN_DIRECTIONAL: f64 = 1e-5;
/// Agreement of the probed Jacobian with the stability operator on a
/// homogeneous slice, after scaling directions by v e^psi.
const TOL_JACOBIAN_HOMOGENEOUS: f64 = 1e-6;
/// Vacuum-energy estimates of families with no vacuum-energy floor.
const TOL_LAMBDA_ZERO: f64 = 1e-12;
/// Relative error of the estimate on the exponential family.
const TOL_LAMBDA_REL: f64 = 0.01;
/// Roundoff allowance on graph volume versus the comparison slice.
const TOL_VOLUME_COMPARISON: f64 = 1e-10;
/// Wall-clock budget of the full verification suite.
const SUITE_BUDGET: Duration = Duration::from_secs(600);

fn report(no: &str, name: &str, outcome: Result<(bool, String)>) {
    match outcome {
        Ok((true, detail)) => println!("[PASS] {no} {name}: {detail}"),
        Ok((false, detail)) => {
            println!("[FAIL] {no} {name}: {detail}");
            panic!("{no} {name}: {detail}");
        }
        Err(e) => {
            println!("[FAIL] {no} {name}: {e}");
            panic!("{no} {name}: {e}");
        }
    }
}

fn grid1(n: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(1, &[n], &[LEN])
}

#[test]
fn criterion_01_homogeneous_slice_recovery() {
    report(
        "01",
        "homogeneous slice recovery",
        (|| {
            let m = MetricSpec::frw_collapse_default(1, &[LEN])?;
            let seed = ScalarField::from_fn(grid1(256)?, |x| 0.3 + 0.05 * x[0].sin());
            let start = Instant::now();
            let (u, trace) = newton_solve(&m, &seed, 4.0, &NewtonConfig::default())?;
            let elapsed = start.elapsed();
            // The slice of curvature 4 in the collapse a(t) = 1 - t is t = 1/2.
            let err = u.map(|v| v - 0.5).sup_norm();
            let pass = err < TOL_RECOVERY
                && trace.iterations <= MAX_RECOVERY_ITERS
                && elapsed < RECOVERY_BUDGET;
            Ok((
                pass,
                format!(
                    "sup error {err:.2e} (tol {TOL_RECOVERY:.0e}), {} iterations (max \
                     {MAX_RECOVERY_ITERS}), {elapsed:.2?} (budget {RECOVERY_BUDGET:?})",
                    trace.iterations
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_02_homogeneous_foliation_shape() {
    report(
        "02",
        "homogeneous foliation shape",
        (|| {
            let m = MetricSpec::frw_collapse_default(1, &[LEN])?;
            let opts = FoliateOptions {
                tau0: 4.0,
                tau_max: 100.0,
                slices: 40,
                ..Default::default()
            };
            let start = Instant::now();
            let result = foliate(&m, grid1(128)?, &opts)?;
            let elapsed = start.elapsed();
            let mut pos_err: f64 = 0.0;
            let mut vol_err: f64 = 0.0;
            for s in &result.slices {
                let u_exact = 1.0 - s.tau.powf(-0.5);
                for &v in &s.values {
                    pos_err = pos_err.max((v - u_exact).abs());
                }
                vol_err = vol_err.max((s.volume - LEN * s.tau.powf(-0.5)).abs());
            }
            let vols: Vec<f64> = result.slices.iter().map(|s| s.volume).collect();
            let decreasing = vols.windows(2).all(|p| p[1] < p[0]);
            let pass = pos_err < TOL_SHAPE
                && vol_err < TOL_SHAPE
                && decreasing
                && elapsed < SHAPE_BUDGET;
            Ok((
                pass,
                format!(
                    "40 slices to tau = 100: position error {pos_err:.2e}, volume error \
                     {vol_err:.2e} (tol {TOL_SHAPE:.0e}), volumes decreasing = {decreasing}, \
                     {elapsed:.2?} (budget {SHAPE_BUDGET:?})"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_03_foliation_ordering() {
    report(
        "03",
        "foliation ordering",
        (|| {
            let m = MetricSpec::wavy_collapse(1, &[LEN], 0.05)?;
            let opts = FoliateOptions { tau0: 2.0, tau_max: 8.0, slices: 5, ..Default::default() };
            let result = foliate(&m, grid1(128)?, &opts)?;
            let mut min_gap = f64::INFINITY;
            for pair in result.slices.windows(2) {
                for (a, b) in pair[1].values.iter().zip(&pair[0].values) {
                    min_gap = min_gap.min(a - b);
                }
            }
            let bent = ScalarField::from_fn(grid1(128)?, |x| 0.4 + 0.02 * x[0].sin());
            let trial_gap = ordering_trial(&m, &bent, 4.0, &NewtonConfig::default())?;
            let pass = min_gap > 0.0 && trial_gap > 0.0;
            Ok((
                pass,
                format!(
                    "minimum gap between consecutive slices {min_gap:.3e}, gap above a \
                     slower reference graph {trial_gap:.3e} (both must be positive)"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_04_slice_uniqueness() {
    report(
        "04",
        "slice uniqueness",
        (|| {
            let amplitudes =
                [0.05, -0.05, 0.04, -0.04, 0.03, -0.03, 0.02, -0.02, 0.01, 0.0];
            let newton = NewtonConfig::default();
            let frw = MetricSpec::frw_collapse_default(1, &[LEN])?;
            let d1 = uniqueness_trial(&frw, grid1(64)?, 4.0, &newton, &amplitudes)?;
            let wavy = MetricSpec::wavy_collapse(1, &[LEN], 0.05)?;
            let d2 = uniqueness_trial(&wavy, grid1(64)?, 4.0, &newton, &amplitudes)?;
            let pass = d1 < TOL_UNIQUENESS && d2 < TOL_UNIQUENESS;
            Ok((
                pass,
                format!(
                    "10 perturbed seeds, largest pairwise distance: homogeneous {d1:.2e}, \
                     rippled {d2:.2e} (tol {TOL_UNIQUENESS:.0e})"
                ),
            ))
        })(),
    );
}

/// Worst relative mismatch of differenced slice positions against the
/// closed-form speed of the homogeneous collapse.
fn speed_mismatch_against_closed_form(slices: usize) -> Result<(f64, f64, f64)> {
    let m = MetricSpec::frw_collapse_default(1, &[LEN])?;
    let opts = FoliateOptions { tau0: 4.0, tau_max: 16.0, slices, ..Default::default() };
    let result = foliate(&m, grid1(64)?, &opts)?;
    let tf = time_function_check(&result)?;
    let mut mismatch: f64 = 0.0;
    for k in 1..result.slices.len() - 1 {
        let (prev, mid, next) =
            (&result.slices[k - 1], &result.slices[k], &result.slices[k + 1]);
        let (hm, hp) = (mid.tau - prev.tau, next.tau - mid.tau);
        let exact = 0.5 * mid.tau.powf(-1.5);
        for idx in 0..mid.values.len() {
            let d = (hm * hm * next.values[idx] + (hp * hp - hm * hm) * mid.values[idx]
                - hp * hp * prev.values[idx])
                / (hp * hm * (hp + hm));
            mismatch = mismatch.max((d - exact).abs() / exact);
        }
    }
    let min_lapse = result
        .slices
        .iter()
        .map(|s| s.lapse_min)
        .fold(f64::INFINITY, f64::min);
    Ok((tf.min_dudtau, min_lapse, mismatch))
}

#[test]
fn criterion_05_time_function() {
    report(
        "05",
        "time function",
        (|| {
            let (min_dudtau, min_lapse, coarse) = speed_mismatch_against_closed_form(9)?;
            let (_, _, fine) = speed_mismatch_against_closed_form(17)?;
            let ratio = fine / coarse;
            let pass = min_dudtau > 0.0 && min_lapse > 0.0 && ratio < TIMEFN_REFINE_RATIO;
            Ok((
                pass,
                format!(
                    "min du/dtau {min_dudtau:.3e} > 0, min lapse {min_lapse:.3e} > 0; \
                     mismatch vs tau^(-3/2)/2 drops {coarse:.2e} -> {fine:.2e}, ratio \
                     {ratio:.3} (< {TIMEFN_REFINE_RATIO})"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_06_stability_inequality() {
    report(
        "06",
        "stability inequality",
        (|| {
            let m = MetricSpec::wavy_collapse(1, &[LEN], 0.05)?;
            let opts = FoliateOptions { tau0: 2.0, tau_max: 8.0, slices: 5, ..Default::default() };
            let result = foliate(&m, grid1(128)?, &opts)?;
            let n = result.dim as f64;
            let mut worst_margin = f64::INFINITY;
            for (k, s) in result.slices.iter().enumerate() {
                let u = result.slice_field(k)?;
                let geom = compute_geometry(&m, &u, 1e-12)?;
                let ricci = ricci_normal_field(&m, &u)?;
                let pot_min = geom
                    .second_form_sq
                    .zip_with(&ricci, |a, r| a + r)
                    .min();
                let bound = s.tau * s.tau / n - result.lambda.lambda;
                worst_margin = worst_margin.min(pot_min - bound);
            }
            let pass = worst_margin >= -TOL_STABILITY_SLACK;
            Ok((
                pass,
                format!(
                    "min(|A|^2 + Ric(nu,nu)) - (tau^2/n - lambda) >= {worst_margin:.3e} \
                     over 5 slices (slack {TOL_STABILITY_SLACK:.0e})"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_07_evolution_identities() {
    report(
        "07",
        "evolution identities",
        (|| {
            let flat = MetricSpec::minkowski(1, &[LEN])?;
            let st = evolution_identity_check(&flat, 0.0, &grid1(16)?, 1e-2)?;
            let static_exact =
                st.metric_rel == 0.0 && st.curvature_rel == 0.0 && st.density_rel == 0.0;

            let wavy = MetricSpec::wavy_collapse(1, &[LEN], 0.1)?;
            let grid = grid1(64)?;
            let coarse = evolution_identity_check(&wavy, 0.3, &grid, 1e-2)?;
            let fine = evolution_identity_check(&wavy, 0.3, &grid.refined()?, 5e-3)?;
            let orders = [
                (coarse.metric_rel / fine.metric_rel).log2(),
                (coarse.curvature_rel / fine.curvature_rel).log2(),
                (coarse.density_rel / fine.density_rel).log2(),
            ];
            let in_band = orders.iter().all(|&o| (ORDER_LO..=ORDER_HI).contains(&o));
            let pass = static_exact && in_band;
            Ok((
                pass,
                format!(
                    "static torus residuals exactly zero = {static_exact}; observed orders \
                     under halving: metric {:.2}, curvature {:.2}, density {:.2} (band \
                     [{ORDER_LO}, {ORDER_HI}])",
                    orders[0], orders[1], orders[2]
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_08_jacobian_consistency() {
    report(
        "08",
        "jacobian consistency",
        (|| {
            let cfg = NewtonConfig::default();

            // Directional derivative on a bent graph in the rippled family.
            let m = MetricSpec::wavy_collapse(1, &[LEN], 0.05)?;
            let grid = grid1(64)?;
            let u = ScalarField::from_fn(grid, |x| 0.4 + 0.03 * x[0].sin());
            let jac = jacobian(&m, &u, 4.0, &cfg)?;
            let w = ScalarField::from_fn(grid, |x| (2.0 * x[0]).cos() + 0.5 * x[0].sin());
            let jw = jac.mul_vec(w.data());
            let eps = 1e-6;
            let up = u.add_scaled(&w, eps);
            let dn = u.add_scaled(&w, -eps);
            let dfd = residual(&m, &up, 4.0, cfg.min_v2)?
                .zip_with(&residual(&m, &dn, 4.0, cfg.min_v2)?, |a, b| (a - b) / (2.0 * eps));
            let scale = dfd.sup_norm();
            let dir_err = jw
                .iter()
                .zip(dfd.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                / scale;

            // On a homogeneous slice the Jacobian is the stability operator
            // acting on directions scaled by the normal rate v e^psi.
            let frw = MetricSpec::frw_collapse_default(1, &[LEN])?;
            let u0 = ScalarField::constant(grid, 0.5);
            let jac0 = jacobian(&frw, &u0, 4.0, &cfg)?;
            let jw0 = jac0.mul_vec(w.data());
            let op = cmc_foliation::StabilityOperator::new(&frw, &u0, cfg.min_v2)?;
            let lw = op.apply(&w.map(|v| 0.5 * v));
            let scale0 = lw.sup_norm();
            let hom_err = jw0
                .iter()
                .zip(lw.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                / scale0;

            let pass =
                dir_err < TOL_JACOBIAN_DIRECTIONAL && hom_err < TOL_JACOBIAN_HOMOGENEOUS;
            Ok((
                pass,
                format!(
                    "directional-derivative error {dir_err:.2e} (tol \
                     {TOL_JACOBIAN_DIRECTIONAL:.0e}), homogeneous-slice mismatch with the \
                     stability operator {hom_err:.2e} (tol {TOL_JACOBIAN_HOMOGENEOUS:.0e})"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_09_curvature_bound_gate() {
    report(
        "09",
        "curvature bound gate",
        (|| {
            let scan = cmc_foliation::metric::LambdaScanOptions::default();
            let flat = MetricSpec::minkowski(1, &[LEN])?.estimate_lambda(&scan)?;
            let matter = MetricSpec::frw_collapse_default(1, &[LEN])?.estimate_lambda(&scan)?;
            let h0 = 0.9;
            let exp = MetricSpec::desitter(1, &[LEN], h0)?.estimate_lambda(&scan)?;
            let exp_rel = (exp.lambda - h0 * h0).abs() / (h0 * h0);

            let gate = MetricSpec::desitter(1, &[LEN], 1.0)?;
            let opts = FoliateOptions { tau0: 0.5, tau_max: 4.0, ..Default::default() };
            let refused = matches!(
                foliate(&gate, grid1(16)?, &opts),
                Err(Error::GateRefused { .. })
            );

            let pass = flat.lambda.abs() <= TOL_LAMBDA_ZERO
                && matter.lambda.abs() <= TOL_LAMBDA_ZERO
                && exp_rel <= TOL_LAMBDA_REL
                && refused;
            Ok((
                pass,
                format!(
                    "lambda: static {:.1e}, matter {:.1e} (tol {TOL_LAMBDA_ZERO:.0e}); \
                     exponential relative error {exp_rel:.2e} (tol {TOL_LAMBDA_REL}); \
                     start below sqrt(n lambda) refused = {refused}",
                    flat.lambda, matter.lambda
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_10_volume_comparison() {
    report(
        "10",
        "volume comparison",
        (|| {
            use rand::{Rng, SeedableRng};
            let m = MetricSpec::frw_collapse_default(1, &[LEN])?;
            let grid = grid1(128)?;
            let t0 = 0.2;
            let floor =
                compute_geometry(&m, &ScalarField::constant(grid, t0), 1e-12)?.total_volume();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x70f);
            let mut worst_excess = f64::NEG_INFINITY;
            for _ in 0..100 {
                // Random spacelike graph: sum of low modes with total slope
                // below 1, shifted so its earliest point sits at t0.
                let modes: Vec<(f64, f64, f64)> = (1..=4)
                    .map(|k| (rng.gen_range(-0.05..0.05), k as f64, rng.gen_range(0.0..LEN)))
                    .collect();
                let raw = ScalarField::from_fn(grid, |x| {
                    modes.iter().map(|&(a, k, p)| a * (k * x[0] + p).sin()).sum()
                });
                let u = raw.map(|v| v - raw.min() + t0);
                let vol = compute_geometry(&m, &u, 1e-12)?.total_volume();
                worst_excess = worst_excess.max(vol - floor);
            }
            let pass = worst_excess <= TOL_VOLUME_COMPARISON;
            Ok((
                pass,
                format!(
                    "100 random spacelike graphs above t = {t0}: worst volume excess over \
                     the slice through t = {t0} is {worst_excess:.3e} (tol \
                     {TOL_VOLUME_COMPARISON:.0e})"
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_11_grid_convergence() {
    report(
        "11",
        "grid convergence",
        (|| {
            let amp = 0.1;
            let m = MetricSpec::minkowski(1, &[LEN])?;
            let mut errors = Vec::new();
            for npts in [64usize, 128, 256, 512] {
                let gr = grid1(npts)?;
                let u = ScalarField::from_fn(gr, |x| amp * x[0].sin());
                let h = compute_geometry(&m, &u, 1e-12)?.mean_curvature;
                let exact = ScalarField::from_fn(gr, |x| {
                    let c = amp * x[0].cos();
                    amp * x[0].sin() / (1.0 - c * c).powf(1.5)
                });
                errors.push(h.add_scaled(&exact, -1.0).sup_norm());
            }
            let orders: Vec<f64> =
                errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
            let pass = orders.iter().all(|&o| (ORDER_LO..=ORDER_HI).contains(&o));
            Ok((
                pass,
                format!(
                    "sup errors {:.2e} / {:.2e} / {:.2e} / {:.2e} at 64..512 points, \
                     observed orders {:.2}, {:.2}, {:.2} (band [{ORDER_LO}, {ORDER_HI}])",
                    errors[0], errors[1], errors[2], errors[3], orders[0], orders[1], orders[2]
                ),
            ))
        })(),
    );
}

#[test]
fn criterion_12_full_suite() {
    report(
        "12",
        "full verification suite",
        (|| {
            let start = Instant::now();
            let suite = run_suite(SuiteMode::Full);
            let elapsed = start.elapsed();
            let failed = suite
                .checks
                .iter()
                .filter(|c| c.status == cmc_foliation::CheckStatus::Fail)
                .count();
            let pass = suite.all_passed() && elapsed < SUITE_BUDGET;
            Ok((
                pass,
                format!(
                    "{} checks, {failed} failed, {elapsed:.2?} (budget {SUITE_BUDGET:?})",
                    suite.checks.len()
                ),
            ))
        })(),
    );
}
