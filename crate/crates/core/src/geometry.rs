//! Discrete geometry of spacelike graphs M = {(u(x), x)} over the torus:
//! induced metric, tilt factor, second fundamental form, mean curvature,
//! and the Laplace-Beltrami operator in expanded (non-divergence) form.

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, SymTensorField};
use crate::metric::{christoffels_at, MetricSpec};

/// Graph height function sampled on the spatial grid.
pub type GraphFunction = ScalarField;

/// Default floor on v^2 = 1 - sigma^{ij} u_i u_j below which a graph is
/// treated as degenerate.
pub const SPACELIKE_FLOOR_V2: f64 = 1e-12;

/// Pointwise geometric data of one spacelike graph. Tensor fields use
/// 0-based spatial axes.
pub struct HypersurfaceGeometry {
    pub grid: PeriodicGrid,
    /// Tilt: v^2 = 1 - sigma^{ij} u_i u_j, positive on spacelike graphs.
    pub v2: ScalarField,
    /// Induced metric g_ij = e^{2 psi}(-u_i u_j + sigma_ij).
    pub induced: SymTensorField,
    /// Inverse induced metric.
    pub inverse: SymTensorField,
    /// Second fundamental form with respect to the past-directed normal.
    pub second_form: SymTensorField,
    /// H = g^{ij} h_ij.
    pub mean_curvature: ScalarField,
    /// |A|^2 = h_ij h_kl g^{ik} g^{jl}.
    pub second_form_sq: ScalarField,
    /// sqrt(det g) = v e^{n psi} sqrt(det sigma): the area element per
    /// coordinate cell.
    pub area_density: ScalarField,
    /// e^{psi} along the graph.
    pub conformal: ScalarField,
}

impl HypersurfaceGeometry {
    /// Total induced volume |M| of the graph.
    pub fn total_volume(&self) -> f64 {
        self.area_density.integrate()
    }
}

fn check_compatible(metric: &MetricSpec, u: &ScalarField) -> Result<()> {
    let g = u.grid();
    if g.dim() != metric.dim() {
        return Err(Error::Precondition(format!(
            "grid dimension {} does not match metric dimension {}",
            g.dim(),
            metric.dim()
        )));
    }
    for k in 0..g.dim() {
        let lm = metric.lengths()[k];
        if (g.length(k) - lm).abs() > 1e-12 * lm.abs().max(1.0) {
            return Err(Error::Precondition(format!(
                "grid length {} on axis {k} does not match metric length {lm}",
                g.length(k)
            )));
        }
    }
    u.ensure_finite("graph function")
}

/// Builds the full pointwise geometry of the graph of `u`. Fails when the
/// graph leaves the metric's time domain or its tilt drops below `min_v2`.
pub fn compute_geometry(
    metric: &MetricSpec,
    u: &ScalarField,
    min_v2: f64,
) -> Result<HypersurfaceGeometry> {
    check_compatible(metric, u)?;
    let grid = *u.grid();
    let n = grid.dim();
    let npts = grid.num_points();

    let points: Vec<_> = (0..npts)
        .map(|idx| metric.eval(u.at(idx), grid.point(idx)))
        .collect::<Result<_>>()?;

    // First derivatives of u, 0-based axes.
    let du: Vec<ScalarField> = (0..n).map(|k| u.partial_derivative(k)).collect();

    // Tilt factor, with a single error covering all degenerate points.
    let mut v2 = ScalarField::zeros(grid);
    {
        let mut bad = 0usize;
        let mut first_bad = 0usize;
        let mut min_seen = f64::INFINITY;
        for idx in 0..npts {
            let sinv = points[idx].sigma_inverse();
            let mut grad2 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    grad2 += sinv[i + 1][j + 1] * du[i].at(idx) * du[j].at(idx);
                }
            }
            let val = 1.0 - grad2;
            if val < min_seen {
                min_seen = val;
            }
            if val < min_v2 {
                if bad == 0 {
                    first_bad = idx;
                }
                bad += 1;
            }
            v2.data_mut()[idx] = val;
        }
        if bad > 0 {
            return Err(Error::NotSpacelike {
                min_v2: min_seen,
                count: bad,
                total: npts,
                first_index: first_bad,
            });
        }
    }

    let mut induced = SymTensorField::zeros(grid);
    let mut inverse = SymTensorField::zeros(grid);
    let mut conformal = ScalarField::zeros(grid);
    let mut area_density = ScalarField::zeros(grid);
    for idx in 0..npts {
        let p = &points[idx];
        let w2 = (2.0 * p.psi).exp();
        let sinv = p.sigma_inverse();
        // Raised gradient u^i = sigma^{ij} u_j.
        let mut up = [0.0; 2];
        for i in 0..n {
            for j in 0..n {
                up[i] += sinv[i + 1][j + 1] * du[j].at(idx);
            }
        }
        for i in 0..n {
            for j in i..n {
                let gij = w2 * (-du[i].at(idx) * du[j].at(idx) + p.sigma[i + 1][j + 1]);
                induced.set(idx, i, j, gij);
                let ginv = (sinv[i + 1][j + 1] + up[i] * up[j] / v2.at(idx)) / w2;
                inverse.set(idx, i, j, ginv);
            }
        }
        conformal.data_mut()[idx] = p.psi.exp();
        area_density.data_mut()[idx] =
            v2.at(idx).sqrt() * (n as f64 * p.psi).exp() * p.sigma_det().sqrt();
    }

    // Christoffels of the discrete induced metric: central differences of
    // the induced component fields.
    let dg: Vec<Vec<ScalarField>> = (0..n)
        .map(|k| {
            (0..3)
                .map(|c| {
                    let (i, j) = [(0, 0), (0, 1), (1, 1)][c];
                    if j < n {
                        induced.component(i, j).partial_derivative(k)
                    } else {
                        ScalarField::zeros(grid)
                    }
                })
                .collect()
        })
        .collect();
    let comp = |fields: &Vec<ScalarField>, i: usize, j: usize, idx: usize| {
        let c = match (i.min(j), i.max(j)) {
            (0, 0) => 0,
            (0, 1) => 1,
            _ => 2,
        };
        fields[c].at(idx)
    };

    // Coordinate second derivatives of u.
    let mut d2u = Vec::new();
    for i in 0..n {
        for j in i..n {
            d2u.push((i, j, u.second_partial(i, j)));
        }
    }
    let hess = |i: usize, j: usize, idx: usize| {
        let (a, b) = (i.min(j), i.max(j));
        d2u.iter().find(|(p, q, _)| *p == a && *q == b).unwrap().2.at(idx)
    };

    let mut second_form = SymTensorField::zeros(grid);
    let mut mean_curvature = ScalarField::zeros(grid);
    let mut second_form_sq = ScalarField::zeros(grid);
    for idx in 0..npts {
        let p = &points[idx];
        let gam0 = christoffels_at(p)[0];
        let v = v2.at(idx).sqrt();
        let w = p.psi.exp();
        // Tangents T_i = e_i + u_i e_0; spacetime components (u_i, delta_i).
        let tan = |i: usize, a: usize| {
            if a == 0 {
                du[i].at(idx)
            } else if a == i + 1 {
                1.0
            } else {
                0.0
            }
        };
        for i in 0..n {
            for j in i..n {
                // Covariant Hessian of u in the induced metric.
                let mut cov = hess(i, j, idx);
                for k in 0..n {
                    let mut gam_k = 0.0;
                    for l in 0..n {
                        gam_k += 0.5
                            * inverse.at(idx, k, l)
                            * (comp(&dg[i], l, j, idx) + comp(&dg[j], i, l, idx)
                                - comp(&dg[l], i, j, idx));
                    }
                    cov -= gam_k * du[k].at(idx);
                }
                let mut amb = 0.0;
                for a in 0..=n {
                    for b in 0..=n {
                        amb += gam0[a][b] * tan(i, a) * tan(j, b);
                    }
                }
                second_form.set(idx, i, j, w * v * (-cov - amb));
            }
        }
        let mut tr = 0.0;
        let mut sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += inverse.at(idx, i, j) * second_form.at(idx, i, j);
                for k in 0..n {
                    for l in 0..n {
                        sq += inverse.at(idx, i, k)
                            * inverse.at(idx, j, l)
                            * second_form.at(idx, i, j)
                            * second_form.at(idx, k, l);
                    }
                }
            }
        }
        mean_curvature.data_mut()[idx] = tr;
        second_form_sq.data_mut()[idx] = sq;
    }
    mean_curvature.ensure_finite("mean curvature")?;

    Ok(HypersurfaceGeometry {
        grid,
        v2,
        induced,
        inverse,
        second_form,
        mean_curvature,
        second_form_sq,
        area_density,
        conformal,
    })
}

/// R(nu, nu) along the graph for the past-directed unit normal
/// nu = -(1/(v e^psi)) (1, sigma^{ij} u_j).
pub fn ricci_normal_field(metric: &MetricSpec, u: &ScalarField) -> Result<ScalarField> {
    check_compatible(metric, u)?;
    let grid = *u.grid();
    let n = grid.dim();
    let du: Vec<ScalarField> = (0..n).map(|k| u.partial_derivative(k)).collect();
    let mut out = ScalarField::zeros(grid);
    for idx in 0..grid.num_points() {
        let x = grid.point(idx);
        let t = u.at(idx);
        let p = metric.eval(t, x)?;
        let sinv = p.sigma_inverse();
        let mut grad2 = 0.0;
        let mut up = [0.0; 2];
        for i in 0..n {
            for j in 0..n {
                grad2 += sinv[i + 1][j + 1] * du[i].at(idx) * du[j].at(idx);
                up[i] += sinv[i + 1][j + 1] * du[j].at(idx);
            }
        }
        let v2 = 1.0 - grad2;
        if v2 <= 0.0 {
            return Err(Error::NotSpacelike {
                min_v2: v2,
                count: 1,
                total: grid.num_points(),
                first_index: idx,
            });
        }
        let scale = -1.0 / (v2.sqrt() * p.psi.exp());
        let mut nu = [0.0; 3];
        nu[0] = scale;
        for i in 0..n {
            nu[i + 1] = scale * up[i];
        }
        out.data_mut()[idx] = metric.ricci_contraction(t, x, &nu)?;
    }
    Ok(out)
}

/// Laplace-Beltrami of `phi` in expanded form,
/// g^{ij} phi_{,ij} + b^j phi_{,j} with b^j = (partial_i (w g^{ij})) / w,
/// w = sqrt(det g); all coefficient fields differenced centrally.
pub fn laplace_beltrami(
    inverse: &SymTensorField,
    area_density: &ScalarField,
    phi: &ScalarField,
) -> ScalarField {
    let grid = *phi.grid();
    let n = grid.dim();
    let mut flux: Vec<Vec<ScalarField>> = Vec::new();
    for i in 0..n {
        let mut row = Vec::new();
        for j in 0..n {
            row.push(area_density.zip_with(inverse.component(i, j), |w, g| w * g));
        }
        flux.push(row);
    }
    let mut b = Vec::new();
    for j in 0..n {
        let mut acc = ScalarField::zeros(grid);
        for i in 0..n {
            acc = acc.add_scaled(&flux[i][j].partial_derivative(i), 1.0);
        }
        b.push(acc.zip_with(area_density, |a, w| a / w));
    }
    let mut out = ScalarField::zeros(grid);
    for i in 0..n {
        for j in 0..n {
            let d2 = phi.second_partial(i, j);
            out = ScalarField::from_vec(
                grid,
                (0..grid.num_points())
                    .map(|idx| out.at(idx) + inverse.at(idx, i, j) * d2.at(idx))
                    .collect(),
            )
            .unwrap();
        }
    }
    for j in 0..n {
        let d1 = phi.partial_derivative(j);
        out = ScalarField::from_vec(
            grid,
            (0..grid.num_points())
                .map(|idx| out.at(idx) + b[j].at(idx) * d1.at(idx))
                .collect(),
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::test_support::TrigMetric;
    use std::sync::Arc;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn grid1(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, &[n], &[TAU]).unwrap()
    }

    #[test]
    fn flat_graph_in_static_torus_is_minimal() {
        let m = MetricSpec::minkowski(1, &[TAU]).unwrap();
        let u = ScalarField::constant(grid1(32), 0.0);
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        assert_eq!(g.mean_curvature.sup_norm(), 0.0);
        assert_eq!(g.second_form_sq.sup_norm(), 0.0);
        assert!((g.total_volume() - TAU).abs() < 1e-12);
    }

    #[test]
    fn sine_graph_in_static_torus_matches_closed_form() {
        // u = eps sin x in the flat 2d spacetime:
        // H = eps sin x / (1 - eps^2 cos^2 x)^{3/2}.
        let eps = 0.3;
        let m = MetricSpec::minkowski(1, &[TAU]).unwrap();
        let gr = grid1(512);
        let u = ScalarField::from_fn(gr, |x| eps * x[0].sin());
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        let exact = ScalarField::from_fn(gr, |x| {
            let c = eps * x[0].cos();
            eps * x[0].sin() / (1.0 - c * c).powf(1.5)
        });
        let err = g.mean_curvature.add_scaled(&exact, -1.0).sup_norm();
        assert!(err < 5e-5, "sup error {err}");
        // v^2 = 1 - eps^2 cos^2 x up to stencil error in u'.
        let v2exact = ScalarField::from_fn(gr, |x| {
            let c = eps * x[0].cos();
            1.0 - c * c
        });
        assert!(g.v2.add_scaled(&v2exact, -1.0).sup_norm() < 1e-4);
    }

    #[test]
    fn constant_slice_of_collapse_is_exactly_homogeneous() {
        for n in [1usize, 2] {
            let m = MetricSpec::frw_collapse_default(n, &[TAU, TAU]).unwrap();
            let grid = if n == 1 {
                grid1(16)
            } else {
                PeriodicGrid::new(2, &[16, 16], &[TAU, TAU]).unwrap()
            };
            let u = ScalarField::constant(grid, 0.5);
            let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
            let expect = n as f64 * 4.0;
            // All stencils act on constants here, so the values are exact.
            assert!(
                (g.mean_curvature.min() - expect).abs() < 1e-12
                    && (g.mean_curvature.max() - expect).abs() < 1e-12,
                "n={n}"
            );
            assert!((g.second_form_sq.max() - expect * expect / n as f64).abs() < 1e-11);
            assert_eq!(g.v2.min(), 1.0);
            let vol = g.total_volume();
            let expect_vol = 0.5f64.powi(n as i32) * TAU.powi(n as i32);
            assert!((vol - expect_vol).abs() < 1e-10 * expect_vol);
        }
    }

    #[test]
    fn ricci_normal_on_homogeneous_slice() {
        for n in [1usize, 2] {
            let m = MetricSpec::frw_collapse_default(n, &[TAU, TAU]).unwrap();
            let grid = if n == 1 {
                grid1(16)
            } else {
                PeriodicGrid::new(2, &[16, 16], &[TAU, TAU]).unwrap()
            };
            let u = ScalarField::constant(grid, 0.5);
            let r = ricci_normal_field(&m, &u).unwrap();
            let expect = n as f64 * 16.0;
            assert!((r.min() - expect).abs() < 1e-9, "n={n}: {}", r.min());
            assert!((r.max() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn induced_times_inverse_is_identity() {
        let m = MetricSpec::new(Arc::new(TrigMetric::new(2, true)));
        let grid = PeriodicGrid::new(2, &[24, 24], &[TAU, TAU]).unwrap();
        let u = ScalarField::from_fn(grid, |x| 0.15 * x[0].sin() + 0.1 * (x[1] * 1.0).cos());
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        for idx in [0usize, 7, 100, 571] {
            for i in 0..2 {
                for j in 0..2 {
                    let mut s = 0.0;
                    for k in 0..2 {
                        s += g.induced.at(idx, i, k) * g.inverse.at(idx, k, j);
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s - expect).abs() < 1e-12, "idx {idx} ({i},{j}): {s}");
                }
            }
        }
    }

    #[test]
    fn mean_curvature_converges_at_second_order() {
        let m = MetricSpec::new(Arc::new(TrigMetric::new(1, true)));
        let u_fn = |x: &[f64]| 0.2 * x[0].sin() + 0.05 * (2.0 * x[0]).cos();
        let mut sups = Vec::new();
        let fine = {
            let gr = grid1(1024);
            let u = ScalarField::from_fn(gr, u_fn);
            compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap().mean_curvature
        };
        for nn in [64usize, 128, 256] {
            let gr = grid1(nn);
            let u = ScalarField::from_fn(gr, u_fn);
            let h = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap().mean_curvature;
            let stride = 1024 / nn;
            let mut err = 0.0f64;
            for i in 0..nn {
                err = err.max((h.at(i) - fine.at(i * stride)).abs());
            }
            sups.push(err);
        }
        let r1 = sups[0] / sups[1];
        let r2 = sups[1] / sups[2];
        assert!((3.0..6.0).contains(&r1), "ratios {sups:?}");
        assert!((3.0..6.0).contains(&r2), "ratios {sups:?}");
    }

    #[test]
    fn steep_graph_rejected_as_not_spacelike() {
        let m = MetricSpec::minkowski(1, &[TAU]).unwrap();
        let gr = grid1(64);
        let u = ScalarField::from_fn(gr, |x| 1.2 * x[0].sin());
        match compute_geometry(&m, &u, SPACELIKE_FLOOR_V2) {
            Err(Error::NotSpacelike { count, total, .. }) => {
                assert!(count > 0 && count < total);
            }
            other => panic!("expected spacelike failure, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn graph_leaving_time_domain_rejected() {
        let m = MetricSpec::frw_collapse_default(1, &[TAU]).unwrap();
        let u = ScalarField::constant(grid1(16), 1.5);
        assert!(matches!(
            compute_geometry(&m, &u, SPACELIKE_FLOOR_V2),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn laplacian_of_sine_on_flat_metric() {
        let m = MetricSpec::minkowski(1, &[TAU]).unwrap();
        let gr = grid1(256);
        let u = ScalarField::constant(gr, 0.0);
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        let phi = ScalarField::from_fn(gr, |x| x[0].sin());
        let lap = laplace_beltrami(&g.inverse, &g.area_density, &phi);
        let exact = ScalarField::from_fn(gr, |x| -x[0].sin());
        assert!(lap.add_scaled(&exact, -1.0).sup_norm() < 1e-3);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let m = MetricSpec::new(Arc::new(TrigMetric::new(2, true)));
        let grid = PeriodicGrid::new(2, &[16, 16], &[TAU, TAU]).unwrap();
        let u = ScalarField::from_fn(grid, |x| 0.1 * x[0].sin() + 0.1 * x[1].cos());
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        let phi = ScalarField::constant(grid, 3.25);
        let lap = laplace_beltrami(&g.inverse, &g.area_density, &phi);
        assert_eq!(lap.sup_norm(), 0.0);
    }

    #[test]
    fn laplacian_integrates_to_zero_against_volume() {
        // Divergence structure: integral of (Delta phi) dmu vanishes on the
        // torus; the expanded form reproduces this to stencil accuracy.
        let m = MetricSpec::new(Arc::new(TrigMetric::new(1, true)));
        let gr = grid1(256);
        let u = ScalarField::from_fn(gr, |x| 0.2 * x[0].sin());
        let g = compute_geometry(&m, &u, SPACELIKE_FLOOR_V2).unwrap();
        let phi = ScalarField::from_fn(gr, |x| (2.0 * x[0]).cos() + 0.3 * x[0].sin());
        let lap = laplace_beltrami(&g.inverse, &g.area_density, &phi);
        let total = lap.zip_with(&g.area_density, |l, w| l * w).integrate();
        assert!(total.abs() < 1e-4, "integral {total}");
    }
}
