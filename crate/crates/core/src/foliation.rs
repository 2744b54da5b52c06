//! Marches the prescribed-curvature solver through an increasing schedule of
//! mean curvatures, producing an ordered stack of graphs with lapse data,
//! plus the observational checks run against foliations and slice evolution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, laplace_beltrami, ricci_normal_field};
use crate::grid::{PeriodicGrid, ScalarField, SymTensorField};
use crate::metric::{LambdaEstimate, LambdaScanOptions, MetricSpec};
use crate::solver::{newton_solve, NewtonConfig, StabilityOperator};

pub const FOLIATION_SCHEMA: &str = "cmc-foliation-v1";

#[derive(Clone, Copy, Debug)]
pub struct FoliateOptions {
    /// First prescribed mean curvature; must clear the spectral gate
    /// tau0 > sqrt(n * lambda).
    pub tau0: f64,
    pub tau_max: f64,
    /// Number of recorded slices; targets follow a geometric schedule.
    pub slices: usize,
    pub newton: NewtonConfig,
    pub lambda_scan: LambdaScanOptions,
    /// Give up on a scheduled interval after this many halvings.
    pub max_substep_halvings: u32,
    /// Newton iteration count at or below which a step counts as easy;
    /// three easy steps in a row double the substep.
    pub easy_iterations: usize,
}

impl Default for FoliateOptions {
    fn default() -> Self {
        Self {
            tau0: 2.0,
            tau_max: 16.0,
            slices: 5,
            newton: NewtonConfig::default(),
            lambda_scan: LambdaScanOptions::default(),
            max_substep_halvings: 12,
            easy_iterations: 4,
        }
    }
}

/// One committed slice of a foliation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceRecord {
    pub tau: f64,
    /// Graph values, row-major over the grid.
    pub values: Vec<f64>,
    /// du/dtau in coordinate time, lapse / (v e^psi), row-major.
    pub coordinate_speed: Vec<f64>,
    pub volume: f64,
    pub lapse_min: f64,
    pub lapse_max: f64,
    /// Lapse integrated against the induced volume measure.
    pub lapse_integral: f64,
    pub newton_iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoliationResult {
    pub schema: String,
    pub family: String,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub tau0: f64,
    pub tau_max: f64,
    pub lambda: LambdaEstimate,
    pub gate_threshold: f64,
    /// Committed Newton solves, including substeps between recorded slices.
    pub substeps_taken: usize,
    pub slices: Vec<SliceRecord>,
}

impl FoliationResult {
    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.dim, &self.sizes, &self.lengths)
    }

    pub fn slice_field(&self, k: usize) -> Result<ScalarField> {
        ScalarField::from_vec(self.grid()?, self.slices[k].values.clone())
    }

    pub fn speed_field(&self, k: usize) -> Result<ScalarField> {
        ScalarField::from_vec(self.grid()?, self.slices[k].coordinate_speed.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let result: FoliationResult =
            serde_json::from_slice(&bytes).map_err(|e| Error::FileFormat {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        if result.schema != FOLIATION_SCHEMA {
            return Err(Error::FileFormat {
                path: path.display().to_string(),
                detail: format!("unknown schema {:?}", result.schema),
            });
        }
        result.grid()?;
        for (k, s) in result.slices.iter().enumerate() {
            let npts: usize = result.sizes.iter().product();
            if s.values.len() != npts || s.coordinate_speed.len() != npts {
                return Err(Error::FileFormat {
                    path: path.display().to_string(),
                    detail: format!("slice {k} has wrong point count"),
                });
            }
        }
        Ok(result)
    }
}

struct CommittedSlice {
    u: ScalarField,
    record: SliceRecord,
}

/// Lapse, speeds, and integrals for a solved slice.
fn commit_slice(
    metric: &MetricSpec,
    u: &ScalarField,
    tau: f64,
    newton_iterations: usize,
    residual: f64,
    min_v2: f64,
) -> Result<CommittedSlice> {
    let geom = compute_geometry(metric, u, min_v2)?;
    let ricci = ricci_normal_field(metric, u)?;
    let op = StabilityOperator::from_parts(&geom, &ricci);
    let lapse = op.solve_lapse()?;
    // Normal speed to coordinate speed: divide by the proper-time rate
    // v e^psi of the coordinate-time direction.
    let speed = ScalarField::from_vec(
        *u.grid(),
        (0..u.grid().num_points())
            .map(|idx| lapse.at(idx) / (geom.v2.at(idx).sqrt() * geom.conformal.at(idx)))
            .collect(),
    )?;
    let lapse_integral = lapse
        .zip_with(&geom.area_density, |a, b| a * b)
        .integrate();
    Ok(CommittedSlice {
        u: u.clone(),
        record: SliceRecord {
            tau,
            values: u.data().to_vec(),
            coordinate_speed: speed.data().to_vec(),
            volume: geom.total_volume(),
            lapse_min: lapse.min(),
            lapse_max: lapse.max(),
            lapse_integral,
            newton_iterations,
            residual,
        },
    })
}

/// Computes the foliation of prescribed mean curvatures on a geometric
/// schedule from tau0 to tau_max. Refuses to start unless tau0 clears the
/// spectral gate sqrt(n * lambda) with lambda estimated by a boost scan.
pub fn foliate(
    metric: &MetricSpec,
    grid: PeriodicGrid,
    opts: &FoliateOptions,
) -> Result<FoliationResult> {
    let n = metric.dim();
    if grid.dim() != n {
        return Err(Error::Precondition(format!(
            "grid dimension {} does not match metric dimension {n}",
            grid.dim()
        )));
    }
    if !(opts.tau0 > 0.0 && opts.tau_max > opts.tau0) {
        return Err(Error::Config(format!(
            "need 0 < tau0 < tau_max, got tau0 = {}, tau_max = {}",
            opts.tau0, opts.tau_max
        )));
    }
    if opts.slices < 2 {
        return Err(Error::Config("need at least two slices".into()));
    }

    let lambda = metric.estimate_lambda(&opts.lambda_scan)?;
    let threshold = (n as f64 * lambda.lambda).sqrt();
    if opts.tau0 <= threshold {
        return Err(Error::GateRefused {
            tau0: opts.tau0,
            lambda: lambda.lambda,
            threshold,
            lambda_converged: lambda.converged,
        });
    }

    let t_seed = metric.seed_time_for_curvature(opts.tau0, &grid)?;
    let u_seed = ScalarField::constant(grid, t_seed);
    let (u0, trace0) = newton_solve(metric, &u_seed, opts.tau0, &opts.newton)?;
    let mut current = commit_slice(
        metric,
        &u0,
        opts.tau0,
        trace0.iterations,
        trace0.final_residual,
        opts.newton.min_v2,
    )?;
    let mut records = vec![current.record.clone()];
    let mut substeps_taken = 1usize;

    let ratio = opts.tau_max / opts.tau0;
    let denom = (opts.slices - 1) as f64;
    for k in 1..opts.slices {
        let target = opts.tau0 * ratio.powf(k as f64 / denom);
        let interval = target - current.record.tau;
        let dtau_min = interval * (0.5f64).powi(opts.max_substep_halvings as i32);
        let mut dtau = interval;
        let mut easy_run = 0usize;
        while current.record.tau < target {
            let remaining = target - current.record.tau;
            let step = dtau.min(remaining);
            let tau_next = current.record.tau + step;
            let speed = ScalarField::from_vec(grid, current.record.coordinate_speed.clone())?;
            let predictor = current.u.add_scaled(&speed, step);
            match newton_solve(metric, &predictor, tau_next, &opts.newton) {
                Ok((u, trace)) => {
                    let gap = u
                        .zip_with(&current.u, |next, prev| next - prev)
                        .min();
                    if gap <= 0.0 {
                        return Err(Error::OrderingViolation {
                            tau_prev: current.record.tau,
                            tau_next,
                            min_gap: gap,
                        });
                    }
                    current = commit_slice(
                        metric,
                        &u,
                        tau_next,
                        trace.iterations,
                        trace.final_residual,
                        opts.newton.min_v2,
                    )?;
                    substeps_taken += 1;
                    if trace.iterations <= opts.easy_iterations {
                        easy_run += 1;
                        if easy_run >= 3 {
                            dtau *= 2.0;
                            easy_run = 0;
                        }
                    } else {
                        easy_run = 0;
                    }
                }
                Err(e) => {
                    dtau *= 0.5;
                    easy_run = 0;
                    if dtau < dtau_min {
                        return Err(Error::ContinuationStall {
                            last_good_tau: current.record.tau,
                            dtau_min,
                            detail: e.to_string(),
                        });
                    }
                }
            }
        }
        records.push(current.record.clone());
    }

    Ok(FoliationResult {
        schema: FOLIATION_SCHEMA.to_string(),
        family: metric.name().to_string(),
        dim: n,
        sizes: (0..n).map(|a| grid.size(a)).collect(),
        lengths: (0..n).map(|a| grid.length(a)).collect(),
        tau0: opts.tau0,
        tau_max: opts.tau_max,
        lambda,
        gate_threshold: threshold,
        substeps_taken,
        slices: records,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct TimeFunctionCheck {
    /// Minimum over interior slices and grid points of du/dtau estimated by
    /// differencing recorded slices; positive means the stack is a graph of
    /// a monotone time function.
    pub min_dudtau: f64,
    /// Worst relative mismatch between differenced du/dtau and the stored
    /// lapse-based coordinate speed.
    pub max_speed_mismatch: f64,
}

/// Differences the recorded slices in tau (non-uniform three-point stencil)
/// and compares with the lapse-based speeds.
pub fn time_function_check(result: &FoliationResult) -> Result<TimeFunctionCheck> {
    if result.slices.len() < 3 {
        return Err(Error::InsufficientData(
            "time function check needs at least three slices".into(),
        ));
    }
    let mut min_dudtau = f64::INFINITY;
    let mut max_mismatch: f64 = 0.0;
    let npts: usize = result.sizes.iter().product();
    for k in 1..result.slices.len() - 1 {
        let (prev, mid, next) = (
            &result.slices[k - 1],
            &result.slices[k],
            &result.slices[k + 1],
        );
        let hm = mid.tau - prev.tau;
        let hp = next.tau - mid.tau;
        let denom = hp * hm * (hp + hm);
        for idx in 0..npts {
            let d = (hm * hm * next.values[idx] + (hp * hp - hm * hm) * mid.values[idx]
                - hp * hp * prev.values[idx])
                / denom;
            min_dudtau = min_dudtau.min(d);
            let stored = mid.coordinate_speed[idx];
            let rel = (d - stored).abs() / stored.abs().max(1e-300);
            max_mismatch = max_mismatch.max(rel);
        }
    }
    Ok(TimeFunctionCheck { min_dudtau, max_speed_mismatch: max_mismatch })
}

#[derive(Clone, Copy, Debug)]
pub struct VolumeDecayCheck {
    /// Maximum of volume(k+1) - volume(k); negative means strictly
    /// decreasing volumes along the foliation.
    pub max_increase: f64,
    /// Worst relative mismatch of the differenced volume derivative against
    /// -tau * integral of the lapse.
    pub max_rate_mismatch: f64,
    /// Maximum over slices of volume minus the volume of the constant graph
    /// at the slice's earliest time. Tilt and the shrinking conformal factor
    /// both lose volume, so anything positive beyond roundoff is a failure.
    pub max_comparison_excess: f64,
}

/// The volume of the slices must shrink, at the rate set by the lapse, and
/// each slice must not exceed the constant slice through its earliest point.
pub fn volume_decay_check(
    metric: &MetricSpec,
    result: &FoliationResult,
) -> Result<VolumeDecayCheck> {
    if result.slices.len() < 3 {
        return Err(Error::InsufficientData(
            "volume decay check needs at least three slices".into(),
        ));
    }
    let mut max_increase = f64::NEG_INFINITY;
    for pair in result.slices.windows(2) {
        max_increase = max_increase.max(pair[1].volume - pair[0].volume);
    }
    let mut max_rate_mismatch: f64 = 0.0;
    for k in 1..result.slices.len() - 1 {
        let (prev, mid, next) = (
            &result.slices[k - 1],
            &result.slices[k],
            &result.slices[k + 1],
        );
        let hm = mid.tau - prev.tau;
        let hp = next.tau - mid.tau;
        let d = (hm * hm * next.volume + (hp * hp - hm * hm) * mid.volume
            - hp * hp * prev.volume)
            / (hp * hm * (hp + hm));
        let expected = -mid.tau * mid.lapse_integral;
        let rel = (d - expected).abs() / expected.abs().max(1e-300);
        max_rate_mismatch = max_rate_mismatch.max(rel);
    }
    let grid = result.grid()?;
    let mut max_comparison_excess = f64::NEG_INFINITY;
    for k in 0..result.slices.len() {
        let u = result.slice_field(k)?;
        let floor = compute_geometry(metric, &ScalarField::constant(grid, u.min()), 1e-12)?
            .total_volume();
        max_comparison_excess =
            max_comparison_excess.max(result.slices[k].volume - floor);
    }
    Ok(VolumeDecayCheck { max_increase, max_rate_mismatch, max_comparison_excess })
}

/// Solves for the slice of prescribed curvature `tau2` starting from `u1`
/// and returns the minimum gap between them. Graphs with everywhere smaller
/// mean curvature must lie strictly to the past of the solved slice, so a
/// nonpositive gap is a failure. Refuses inputs that violate the hypothesis
/// max H(u1) < tau2.
pub fn ordering_trial(
    metric: &MetricSpec,
    u1: &ScalarField,
    tau2: f64,
    newton: &NewtonConfig,
) -> Result<f64> {
    let geom = compute_geometry(metric, u1, newton.min_v2)?;
    let h_max = geom.mean_curvature.max();
    if h_max >= tau2 {
        return Err(Error::Precondition(format!(
            "ordering trial needs max H(u1) < tau2, got {h_max} >= {tau2}"
        )));
    }
    let (u2, _) = newton_solve(metric, u1, tau2, newton)?;
    let mut min_gap = f64::INFINITY;
    for idx in 0..u1.grid().num_points() {
        min_gap = min_gap.min(u2.at(idx) - u1.at(idx));
    }
    Ok(min_gap)
}

#[derive(Clone, Copy, Debug)]
pub struct EvolutionIdentities {
    /// Relative residual of d/dt g_ij = -2 e^psi k_ij on constant slices.
    pub metric_rel: f64,
    /// Relative residual of d/dt H = -Lap e^psi + (|k|^2 + Rnn) e^psi.
    pub curvature_rel: f64,
    /// Relative residual of d/dt sqrt(det g) = -e^psi H sqrt(det g).
    pub density_rel: f64,
}

/// Residuals of the constant-slice evolution identities at time t, with the
/// time derivatives replaced by central differences of width dt. All three
/// are relative to the magnitude of the terms; healthy metric families give
/// residuals falling with dt^2 (and grid spacing squared for the curvature
/// identity), misreported first derivatives give residuals of order one.
pub fn evolution_identity_check(
    metric: &MetricSpec,
    t: f64,
    grid: &PeriodicGrid,
    dt: f64,
) -> Result<EvolutionIdentities> {
    metric.check_time(t - dt)?;
    metric.check_time(t + dt)?;
    let n = grid.dim();
    let npts = grid.num_points();

    let mut metric_num: f64 = 0.0;
    let mut metric_scale: f64 = 0.0;
    let mut density_num: f64 = 0.0;
    let mut density_scale: f64 = 0.0;

    let mut mean_plus = ScalarField::zeros(*grid);
    let mut mean_minus = ScalarField::zeros(*grid);
    let mut lapse = ScalarField::zeros(*grid);
    let mut density = ScalarField::zeros(*grid);
    let mut potential_term = ScalarField::zeros(*grid);
    let mut inverse = SymTensorField::zeros(*grid);

    for idx in 0..npts {
        let x = grid.point(idx);
        let plus = metric.slice_geometry(t + dt, x)?;
        let minus = metric.slice_geometry(t - dt, x)?;
        let here = metric.slice_geometry(t, x)?;
        let p = metric.eval(t, x)?;
        let w = p.psi.exp();

        for i in 1..=n {
            for j in i..=n {
                let dg = (plus.induced[i][j] - minus.induced[i][j]) / (2.0 * dt);
                let rhs = -2.0 * w * here.second_form[i][j];
                metric_num = metric_num.max((dg - rhs).abs());
                metric_scale = metric_scale.max(dg.abs()).max(rhs.abs());
            }
        }

        let dd = (plus.volume_density - minus.volume_density) / (2.0 * dt);
        let rhs = -w * here.mean_curvature * here.volume_density;
        density_num = density_num.max((dd - rhs).abs());
        density_scale = density_scale.max(dd.abs()).max(rhs.abs());

        mean_plus.data_mut()[idx] = plus.mean_curvature;
        mean_minus.data_mut()[idx] = minus.mean_curvature;
        lapse.data_mut()[idx] = w;
        density.data_mut()[idx] = here.volume_density;
        let mut nu = [0.0; 3];
        nu[0] = (-p.psi).exp();
        let rnn = metric.ricci_contraction(t, x, &nu)?;
        potential_term.data_mut()[idx] = (here.second_form_sq + rnn) * w;
        let sinv = p.sigma_inverse();
        let winv2 = (-2.0 * p.psi).exp();
        for i in 1..=n {
            for j in i..=n {
                inverse.set(idx, i - 1, j - 1, winv2 * sinv[i][j]);
            }
        }
    }

    let lap = laplace_beltrami(&inverse, &density, &lapse);
    let mut curvature_num: f64 = 0.0;
    let mut curvature_scale: f64 = 0.0;
    for idx in 0..npts {
        let dh = (mean_plus.at(idx) - mean_minus.at(idx)) / (2.0 * dt);
        let rhs = -lap.at(idx) + potential_term.at(idx);
        curvature_num = curvature_num.max((dh - rhs).abs());
        curvature_scale = curvature_scale.max(dh.abs()).max(rhs.abs());
    }

    let rel = |num: f64, scale: f64| if scale > 0.0 { num / scale } else { num };
    Ok(EvolutionIdentities {
        metric_rel: rel(metric_num, metric_scale),
        curvature_rel: rel(curvature_num, curvature_scale),
        density_rel: rel(density_num, density_scale),
    })
}

/// Solves the same prescribed-curvature problem from several perturbed seeds
/// (in parallel) and reports the largest pairwise sup distance between the
/// solutions; a small value backs uniqueness of the slice.
pub fn uniqueness_trial(
    metric: &MetricSpec,
    grid: PeriodicGrid,
    tau: f64,
    newton: &NewtonConfig,
    amplitudes: &[f64],
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let t_seed = metric.seed_time_for_curvature(tau, &grid)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let seeds: Vec<ScalarField> = amplitudes
        .iter()
        .map(|&amp| {
            let modes: Vec<(f64, f64, f64, f64)> = (1..=3)
                .map(|m| {
                    (
                        amp * rng.gen_range(-1.0..1.0),
                        m as f64,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            ScalarField::from_fn(grid, |x| {
                let mut v = t_seed;
                for &(a, m, p0, p1) in &modes {
                    let k0 = std::f64::consts::TAU / grid.length(0);
                    v += a * (m * k0 * x[0] + p0).sin();
                    if grid.dim() == 2 {
                        let k1 = std::f64::consts::TAU / grid.length(1);
                        v += a * (m * k1 * x[1] + p1).cos();
                    }
                }
                v
            })
        })
        .collect();

    let solutions: Vec<Result<ScalarField>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|seed| {
                scope.spawn(move || newton_solve(metric, seed, tau, newton).map(|(u, _)| u))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut fields = Vec::with_capacity(solutions.len());
    for s in solutions {
        fields.push(s?);
    }
    let mut worst: f64 = 0.0;
    for a in 0..fields.len() {
        for b in a + 1..fields.len() {
            let d = fields[a].zip_with(&fields[b], |x, y| x - y).sup_norm();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU2PI: f64 = 2.0 * std::f64::consts::PI;

    fn grid1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, &[n], &[TAU2PI]).unwrap()
    }

    // In the polynomial collapse family with a(t) = 1 - t the foliation is
    // explicit: the slice of curvature tau sits at u = 1 - tau^(-1/2), has
    // volume 2 pi tau^(-1/2), and moves with du/dtau = tau^(-3/2) / 2.
    #[test]
    fn homogeneous_collapse_matches_closed_form() {
        let m = MetricSpec::frw_collapse_default(1, &[TAU2PI]).unwrap();
        let opts = FoliateOptions { tau0: 2.0, tau_max: 16.0, slices: 5, ..Default::default() };
        let result = foliate(&m, grid1(32), &opts).unwrap();
        assert_eq!(result.slices.len(), 5);
        for (k, s) in result.slices.iter().enumerate() {
            let expected_tau = 2.0 * (8.0f64).powf(k as f64 / 4.0);
            assert!((s.tau - expected_tau).abs() < 1e-12);
            let u_exact = 1.0 - s.tau.powf(-0.5);
            for &v in &s.values {
                assert!((v - u_exact).abs() < 1e-8, "tau {}: {} vs {}", s.tau, v, u_exact);
            }
            let vol_exact = TAU2PI * s.tau.powf(-0.5);
            assert!((s.volume - vol_exact).abs() < 1e-8 * vol_exact);
            let speed_exact = 0.5 * s.tau.powf(-1.5);
            for &w in &s.coordinate_speed {
                assert!(
                    (w - speed_exact).abs() < 1e-9 * speed_exact.max(1.0),
                    "tau {}: speed {} vs {}",
                    s.tau,
                    w,
                    speed_exact
                );
            }
            assert!(s.residual <= opts.newton.tol);
        }
        // Volumes shrink and the stack is ordered upward.
        let vols: Vec<f64> = result.slices.iter().map(|s| s.volume).collect();
        assert!(vols.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn checks_pass_on_homogeneous_collapse() {
        let m = MetricSpec::frw_collapse_default(1, &[TAU2PI]).unwrap();
        let opts = FoliateOptions { tau0: 2.0, tau_max: 16.0, slices: 9, ..Default::default() };
        let result = foliate(&m, grid1(32), &opts).unwrap();
        let tf = time_function_check(&result).unwrap();
        assert!(tf.min_dudtau > 0.0);
        assert!(tf.max_speed_mismatch < 0.15, "mismatch {}", tf.max_speed_mismatch);
        let vd = volume_decay_check(&m, &result).unwrap();
        assert!(vd.max_increase < 0.0);
        assert!(vd.max_rate_mismatch < 0.15, "mismatch {}", vd.max_rate_mismatch);
        // Homogeneous slices coincide with their own comparison slice.
        assert!(vd.max_comparison_excess.abs() < 1e-10, "{}", vd.max_comparison_excess);
    }

    #[test]
    fn ordered_slices_respect_curvature_ordering() {
        let m = MetricSpec::frw_collapse_default(1, &[TAU2PI]).unwrap();
        let newton = NewtonConfig::default();
        // Constant graph at 0.4 has curvature 1/0.36, below 4; the slice of
        // curvature 4 sits at 0.5.
        let flat = ScalarField::constant(grid1(32), 0.4);
        let gap = ordering_trial(&m, &flat, 4.0, &newton).unwrap();
        assert!((gap - 0.1).abs() < 1e-9, "gap {gap}");

        let bent = ScalarField::from_fn(grid1(64), |x| 0.4 + 0.02 * x[0].sin());
        let gap = ordering_trial(&m, &bent, 4.0, &newton).unwrap();
        assert!(gap > 0.0, "gap {gap}");

        // Hypothesis violation: the flat graph's curvature already exceeds
        // the prescribed value.
        let err = ordering_trial(&m, &flat, 2.0, &newton).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
    }

    #[test]
    fn inhomogeneous_collapse_foliates_in_order() {
        let m = MetricSpec::wavy_collapse(1, &[TAU2PI], 0.05).unwrap();
        let opts = FoliateOptions { tau0: 2.0, tau_max: 8.0, slices: 4, ..Default::default() };
        let result = foliate(&m, grid1(64), &opts).unwrap();
        assert_eq!(result.slices.len(), 4);
        for pair in result.slices.windows(2) {
            let gap = pair[1]
                .values
                .iter()
                .zip(&pair[0].values)
                .map(|(a, b)| a - b)
                .fold(f64::INFINITY, f64::min);
            assert!(gap > 0.0, "slices out of order, gap {gap}");
            assert!(pair[1].volume < pair[0].volume);
        }
        for s in &result.slices {
            assert!(s.lapse_min > 0.0);
            assert!(s.residual <= opts.newton.tol);
            // The graphs stay genuinely inhomogeneous.
            let spread = s.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - s.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(spread > 1e-6);
        }
    }

    #[test]
    fn gate_refuses_low_curvature_start() {
        // Vacuum-energy dominated family: lambda = n h0^2, so the gate
        // threshold is h0 here. Ask for a foliation starting below it.
        let m = MetricSpec::desitter(1, &[TAU2PI], 1.0).unwrap();
        let grid = grid1(16);
        let opts = FoliateOptions { tau0: 0.5, tau_max: 4.0, ..Default::default() };
        let err = foliate(&m, grid, &opts).unwrap_err();
        match err {
            Error::GateRefused { tau0, threshold, lambda_converged, .. } => {
                assert_eq!(tau0, 0.5);
                assert!((threshold - 1.0).abs() < 1e-6, "threshold {threshold}");
                assert!(lambda_converged);
            }
            other => panic!("expected gate refusal, got {other}"),
        }
    }

    #[test]
    fn result_round_trips_through_file() {
        let m = MetricSpec::frw_collapse_default(1, &[TAU2PI]).unwrap();
        let opts = FoliateOptions { tau0: 2.0, tau_max: 4.0, slices: 3, ..Default::default() };
        let result = foliate(&m, grid1(16), &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("foliation.json");
        result.save(&path).unwrap();
        let loaded = FoliationResult::load(&path).unwrap();
        assert_eq!(loaded.schema, FOLIATION_SCHEMA);
        assert_eq!(loaded.slices.len(), result.slices.len());
        for (a, b) in loaded.slices.iter().zip(&result.slices) {
            assert_eq!(a.tau.to_bits(), b.tau.to_bits());
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.volume.to_bits(), b.volume.to_bits());
        }
        // Unknown schema versions are refused.
        let mut broken = result.clone();
        broken.schema = "cmc-foliation-v999".to_string();
        let bad = dir.path().join("bad.json");
        broken.save(&bad).unwrap();
        assert!(matches!(FoliationResult::load(&bad), Err(Error::FileFormat { .. })));
    }

    #[test]
    fn evolution_identities_hold_for_collapse() {
        // With a(t) = 1 - t the slice metric and density are polynomial in t
        // of degree two or less, so the central differences are exact.
        let m = MetricSpec::frw_collapse_default(1, &[TAU2PI]).unwrap();
        let grid = grid1(64);
        let out = evolution_identity_check(&m, 0.3, &grid, 1e-2).unwrap();
        assert!(out.metric_rel < 1e-12, "metric residual {}", out.metric_rel);
        assert!(out.density_rel < 1e-12, "density residual {}", out.density_rel);
        assert!(out.curvature_rel < 1e-2, "curvature residual {}", out.curvature_rel);
    }

    #[test]
    fn evolution_identities_second_order_on_inhomogeneous_family() {
        let m = MetricSpec::wavy_collapse(1, &[TAU2PI], 0.1).unwrap();
        let grid = grid1(64);
        let coarse = evolution_identity_check(&m, 0.3, &grid, 1e-2).unwrap();
        assert!(coarse.metric_rel < 1e-3, "metric residual {}", coarse.metric_rel);
        assert!(coarse.density_rel < 1e-3);
        assert!(coarse.curvature_rel < 1e-2);
        let fine =
            evolution_identity_check(&m, 0.3, &grid.refined().unwrap(), 5e-3).unwrap();
        // Second order: halving dt and the spacing cuts residuals by ~4.
        assert!(fine.metric_rel < 0.3 * coarse.metric_rel);
        assert!(fine.density_rel < 0.3 * coarse.density_rel);
        assert!(fine.curvature_rel < 0.3 * coarse.curvature_rel);
    }

    #[test]
    fn evolution_identities_exact_in_static_torus() {
        let m = MetricSpec::minkowski(1, &[TAU2PI]).unwrap();
        let out = evolution_identity_check(&m, 0.0, &grid1(16), 1e-2).unwrap();
        assert_eq!(out.metric_rel, 0.0);
        assert_eq!(out.curvature_rel, 0.0);
        assert_eq!(out.density_rel, 0.0);
    }

    #[test]
    fn misreported_derivatives_are_flagged() {
        // The fixture misstates d psi / dt, which the differenced identities
        // expose as an order-one residual that refinement cannot shrink.
        let m = MetricSpec::inconsistent_fixture(1, &[TAU2PI], 0.1).unwrap();
        let grid = grid1(32);
        let coarse = evolution_identity_check(&m, 0.3, &grid, 1e-2).unwrap();
        let fine =
            evolution_identity_check(&m, 0.3, &grid.refined().unwrap(), 5e-3).unwrap();
        assert!(coarse.metric_rel > 0.05, "fixture not flagged: {}", coarse.metric_rel);
        assert!(fine.metric_rel > 0.5 * coarse.metric_rel, "residual should persist");
    }

    #[test]
    fn perturbed_seeds_reach_the_same_slice() {
        let m = MetricSpec::wavy_collapse(1, &[TAU2PI], 0.05).unwrap();
        let worst = uniqueness_trial(
            &m,
            grid1(64),
            3.0,
            &NewtonConfig::default(),
            &[0.0, 0.02, 0.05, -0.03],
        )
        .unwrap();
        assert!(worst < 1e-8, "solutions diverge by {worst}");
    }
}
