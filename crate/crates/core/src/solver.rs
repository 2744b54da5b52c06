//! Damped Newton solver for the prescribed-mean-curvature equation
//! H(graph u) = tau, with a finite-difference Jacobian (dense or colored
//! probing), and the stability operator phi -> -Lap phi + (|A|^2 + Rnn) phi
//! used for the lapse.

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, laplace_beltrami, ricci_normal_field};
use crate::grid::{PeriodicGrid, ScalarField, SymTensorField};
use crate::linalg::{solve_or_border, DenseMatrix};
use crate::metric::MetricSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    /// One probe per unknown.
    Dense,
    /// Simultaneous probes of stride-separated unknowns; identical to dense
    /// because the residual footprint has radius two.
    Colored,
    /// Dense for one spatial dimension, colored for two.
    Auto,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    /// Sup-norm residual target.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference probing step is fd_scale * (1 + |u|_inf).
    pub fd_scale: f64,
    /// Sufficient-decrease constant on the residual 2-norm.
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    /// Floor on v^2; iterates below it are rejected by the line search.
    pub min_v2: f64,
    pub jacobian: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 30,
            fd_scale: 1e-7,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: (2.0f64).powi(-12),
            min_v2: 1e-12,
            jacobian: JacobianMode::Auto,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonTrace {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    /// True when a singular Jacobian forced the mean-constrained solve.
    pub used_bordered: bool,
}

/// H(graph u) - tau at every grid point.
pub fn residual(metric: &MetricSpec, u: &ScalarField, tau: f64, min_v2: f64) -> Result<ScalarField> {
    let geom = compute_geometry(metric, u, min_v2)?;
    Ok(geom.mean_curvature.map(|h| h - tau))
}

// Smallest divisor of n that is >= lo; n itself in the worst case.
fn stride_for(n: usize, lo: usize) -> usize {
    (lo..=n).find(|d| n % d == 0).unwrap_or(n)
}

/// The residual at a point depends on u within this box radius (stencils of
/// stencils through the discrete induced-metric Christoffels).
const RESIDUAL_FOOTPRINT: usize = 2;

fn jacobian_dense(
    metric: &MetricSpec,
    u: &ScalarField,
    tau: f64,
    cfg: &NewtonConfig,
) -> Result<DenseMatrix> {
    let grid = *u.grid();
    let npts = grid.num_points();
    let h = cfg.fd_scale * (1.0 + u.sup_norm());
    let mut jac = DenseMatrix::zeros(npts);
    let mut pert = u.clone();
    for col in 0..npts {
        pert.data_mut()[col] = u.at(col) + h;
        let rp = residual(metric, &pert, tau, cfg.min_v2)?;
        pert.data_mut()[col] = u.at(col) - h;
        let rm = residual(metric, &pert, tau, cfg.min_v2)?;
        pert.data_mut()[col] = u.at(col);
        for row in 0..npts {
            jac.set(row, col, (rp.at(row) - rm.at(row)) / (2.0 * h));
        }
    }
    Ok(jac)
}

fn jacobian_colored(
    metric: &MetricSpec,
    u: &ScalarField,
    tau: f64,
    cfg: &NewtonConfig,
) -> Result<DenseMatrix> {
    let grid = *u.grid();
    let n = grid.dim();
    let npts = grid.num_points();
    let h = cfg.fd_scale * (1.0 + u.sup_norm());
    let need = 2 * RESIDUAL_FOOTPRINT + 1;
    let s0 = stride_for(grid.size(0), need);
    let s1 = if n == 2 { stride_for(grid.size(1), need) } else { 1 };
    let mut jac = DenseMatrix::zeros(npts);
    let mut pert = u.clone();
    for a in 0..s0 {
        for b in 0..s1 {
            let members: Vec<usize> = (0..npts)
                .filter(|&idx| {
                    let (i, j) = grid.decompose(idx);
                    i % s0 == a && (n == 1 || j % s1 == b)
                })
                .collect();
            for &m in &members {
                pert.data_mut()[m] = u.at(m) + h;
            }
            let rp = residual(metric, &pert, tau, cfg.min_v2)?;
            for &m in &members {
                pert.data_mut()[m] = u.at(m) - h;
            }
            let rm = residual(metric, &pert, tau, cfg.min_v2)?;
            for &m in &members {
                pert.data_mut()[m] = u.at(m);
            }
            // Each row sees at most one member of this color inside its
            // dependency box; attribute the response to that column.
            let fp = RESIDUAL_FOOTPRINT as isize;
            for row in 0..npts {
                let (ri, rj) = grid.decompose(row);
                let mut col_i = None;
                for di in -fp..=fp {
                    let ci = (ri as isize + di).rem_euclid(grid.size(0) as isize) as usize;
                    if ci % s0 == a {
                        col_i = Some(ci);
                        break;
                    }
                }
                let mut col_j = if n == 1 { Some(0) } else { None };
                if n == 2 {
                    for dj in -fp..=fp {
                        let cj = (rj as isize + dj).rem_euclid(grid.size(1) as isize) as usize;
                        if cj % s1 == b {
                            col_j = Some(cj);
                            break;
                        }
                    }
                }
                if let (Some(ci), Some(cj)) = (col_i, col_j) {
                    let col = grid.index(ci, cj);
                    jac.set(row, col, (rp.at(row) - rm.at(row)) / (2.0 * h));
                }
            }
        }
    }
    Ok(jac)
}

pub fn jacobian(
    metric: &MetricSpec,
    u: &ScalarField,
    tau: f64,
    cfg: &NewtonConfig,
) -> Result<DenseMatrix> {
    let colored = match cfg.jacobian {
        JacobianMode::Dense => false,
        JacobianMode::Colored => true,
        JacobianMode::Auto => u.grid().dim() == 2,
    };
    if colored {
        jacobian_colored(metric, u, tau, cfg)
    } else {
        jacobian_dense(metric, u, tau, cfg)
    }
}

/// Damped Newton iteration for H(graph u) = tau starting from `u0`.
pub fn newton_solve(
    metric: &MetricSpec,
    u0: &ScalarField,
    tau: f64,
    cfg: &NewtonConfig,
) -> Result<(ScalarField, NewtonTrace)> {
    let mut u = u0.clone();
    let mut res = residual(metric, &u, tau, cfg.min_v2)?;
    let mut history = vec![res.sup_norm()];
    let mut used_bordered = false;

    for iter in 0..cfg.max_iter {
        let sup = *history.last().unwrap();
        if sup <= cfg.tol {
            return Ok((
                u,
                NewtonTrace {
                    iterations: iter,
                    final_residual: sup,
                    residual_history: history,
                    used_bordered,
                },
            ));
        }
        let jac = jacobian(metric, &u, tau, cfg)?;
        let neg: Vec<f64> = res.data().iter().map(|v| -v).collect();
        let (delta, bordered) = solve_or_border(jac, &neg)?;
        used_bordered |= bordered;

        let norm2 = res.l2_norm();
        let mut step = 1.0;
        let mut accepted = None;
        while step >= cfg.min_step {
            let mut trial = u.clone();
            for (t, d) in trial.data_mut().iter_mut().zip(&delta) {
                *t += step * d;
            }
            match residual(metric, &trial, tau, cfg.min_v2) {
                Ok(r) if r.l2_norm() <= (1.0 - cfg.armijo * step) * norm2 => {
                    accepted = Some((trial, r));
                    break;
                }
                _ => step *= cfg.backtrack,
            }
        }
        let Some((unew, rnew)) = accepted else {
            let geom = compute_geometry(metric, &u, cfg.min_v2)?;
            return Err(Error::NewtonStall {
                step,
                residual: res.sup_norm(),
                min_v2: geom.v2.min(),
            });
        };
        u = unew;
        res = rnew;
        history.push(res.sup_norm());
    }
    let last = *history.last().unwrap();
    if last <= cfg.tol {
        let iterations = history.len() - 1;
        return Ok((
            u,
            NewtonTrace {
                iterations,
                final_residual: last,
                residual_history: history,
                used_bordered,
            },
        ));
    }
    Err(Error::NewtonMaxIter {
        max_iter: cfg.max_iter,
        last_residual: last,
        history,
    })
}

/// The linearized mean-curvature operator along the unit normal:
/// phi -> -Lap_g phi + (|A|^2 + R(nu, nu)) phi.
pub struct StabilityOperator {
    grid: PeriodicGrid,
    inverse: SymTensorField,
    area_density: ScalarField,
    potential: ScalarField,
}

impl StabilityOperator {
    pub fn new(metric: &MetricSpec, u: &ScalarField, min_v2: f64) -> Result<Self> {
        let geom = compute_geometry(metric, u, min_v2)?;
        let ricci = ricci_normal_field(metric, u)?;
        Ok(Self::from_parts(&geom, &ricci))
    }

    pub fn from_parts(
        geom: &crate::geometry::HypersurfaceGeometry,
        ricci_normal: &ScalarField,
    ) -> Self {
        Self {
            grid: geom.grid,
            inverse: geom.inverse.clone(),
            area_density: geom.area_density.clone(),
            potential: geom.second_form_sq.add_scaled(ricci_normal, 1.0),
        }
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn apply(&self, phi: &ScalarField) -> ScalarField {
        let lap = laplace_beltrami(&self.inverse, &self.area_density, phi);
        phi.zip_with(&self.potential, |p, q| p * q).add_scaled(&lap, -1.0)
    }

    /// Exact matrix of the (linear) operator, assembled by probing colored
    /// unit fields; the stencil footprint has box radius one.
    pub fn assemble_matrix(&self) -> DenseMatrix {
        let grid = self.grid;
        let n = grid.dim();
        let npts = grid.num_points();
        let s0 = stride_for(grid.size(0), 3);
        let s1 = if n == 2 { stride_for(grid.size(1), 3) } else { 1 };
        let mut mat = DenseMatrix::zeros(npts);
        for a in 0..s0 {
            for b in 0..s1 {
                let mut probe = ScalarField::zeros(grid);
                for idx in 0..npts {
                    let (i, j) = grid.decompose(idx);
                    if i % s0 == a && (n == 1 || j % s1 == b) {
                        probe.data_mut()[idx] = 1.0;
                    }
                }
                let resp = self.apply(&probe);
                for row in 0..npts {
                    let (ri, rj) = grid.decompose(row);
                    let mut col_i = None;
                    for di in -1isize..=1 {
                        let ci = (ri as isize + di).rem_euclid(grid.size(0) as isize) as usize;
                        if ci % s0 == a {
                            col_i = Some(ci);
                            break;
                        }
                    }
                    let mut col_j = if n == 1 { Some(0) } else { None };
                    if n == 2 {
                        for dj in -1isize..=1 {
                            let cj = (rj as isize + dj).rem_euclid(grid.size(1) as isize) as usize;
                            if cj % s1 == b {
                                col_j = Some(cj);
                                break;
                            }
                        }
                    }
                    if let (Some(ci), Some(cj)) = (col_i, col_j) {
                        mat.set(row, grid.index(ci, cj), resp.at(row));
                    }
                }
            }
        }
        mat
    }

    /// Normal-speed lapse: the solution of (stability operator) phi = 1.
    /// Requires a strictly positive potential, which also makes the discrete
    /// solution positive and bounded by the potential extremes.
    pub fn solve_lapse(&self) -> Result<ScalarField> {
        let pmin = self.potential.min();
        if pmin <= 0.0 {
            return Err(Error::StabilityNotPositive { min_potential: pmin });
        }
        let mat = self.assemble_matrix();
        let ones = vec![1.0; self.grid.num_points()];
        let phi = mat.factor()?.solve(&ones);
        let phi = ScalarField::from_vec(self.grid, phi)?;
        phi.ensure_finite("lapse")?;
        Ok(phi)
    }
}
