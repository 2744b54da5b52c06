//! Ambient spacetime model: metrics of the form e^{2 psi}(-(dx^0)^2 + sigma)
//! on an open time interval times a flat torus, with pointwise curvature
//! assembly and a boost scan for the worst timelike Ricci contraction.
//!
//! Index convention: spacetime slot 0 is time, spatial slots are 1..=n.
//! All fixed-size tensors are padded to three slots; unused entries are zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::tensor::{self, mat_from_fn, ten_from_fn, Mat3, Ten3, Vec3};

/// Relative tolerance on g(nu, nu) = -1 for vectors passed as unit timelike.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Pointwise first-order data of the ambient metric.
#[derive(Clone, Copy, Debug)]
pub struct AmbientPoint {
    /// Spacetime dimension n + 1.
    pub dim: usize,
    pub psi: f64,
    /// dpsi[a] = partial_a psi.
    pub dpsi: Vec3,
    /// sigma[i][j] for spatial slots i, j in 1..=n.
    pub sigma: Mat3,
    /// dsigma[a][i][j] = partial_a sigma_ij.
    pub dsigma: Ten3,
}

impl AmbientPoint {
    /// Flat model point: psi = 0, sigma = identity.
    pub fn conformal_flat(dim: usize) -> Self {
        let mut sigma = tensor::mat_zero();
        for i in 1..dim {
            sigma[i][i] = 1.0;
        }
        Self { dim, psi: 0.0, dpsi: [0.0; 3], sigma, dsigma: tensor::ten_zero() }
    }

    fn spatial_dim(&self) -> usize {
        self.dim - 1
    }

    /// The factor multiplied by e^{2 psi}: diag(-1, sigma).
    fn flat_part(&self) -> Mat3 {
        let mut e = self.sigma;
        e[0] = [0.0; 3];
        for row in e.iter_mut() {
            row[0] = 0.0;
        }
        e[0][0] = -1.0;
        e
    }

    pub fn metric(&self) -> Mat3 {
        let w = (2.0 * self.psi).exp();
        let e = self.flat_part();
        mat_from_fn(self.dim, |a, b| w * e[a][b])
    }

    pub fn dmetric(&self) -> Ten3 {
        let w = (2.0 * self.psi).exp();
        let e = self.flat_part();
        ten_from_fn(self.dim, |c, a, b| {
            let de = if a == 0 || b == 0 { 0.0 } else { self.dsigma[c][a][b] };
            w * (2.0 * self.dpsi[c] * e[a][b] + de)
        })
    }

    pub fn sigma_det(&self) -> f64 {
        match self.spatial_dim() {
            1 => self.sigma[1][1],
            _ => self.sigma[1][1] * self.sigma[2][2] - self.sigma[1][2] * self.sigma[2][1],
        }
    }

    pub fn sigma_min_eigenvalue(&self) -> f64 {
        match self.spatial_dim() {
            1 => self.sigma[1][1],
            _ => {
                let tr = self.sigma[1][1] + self.sigma[2][2];
                let dt = self.sigma_det();
                tr / 2.0 - (tr * tr / 4.0 - dt).max(0.0).sqrt()
            }
        }
    }

    /// Inverse of sigma, stored back in spatial slots.
    pub fn sigma_inverse(&self) -> Mat3 {
        let mut inv = tensor::mat_zero();
        match self.spatial_dim() {
            1 => inv[1][1] = 1.0 / self.sigma[1][1],
            _ => {
                let det = self.sigma_det();
                inv[1][1] = self.sigma[2][2] / det;
                inv[2][2] = self.sigma[1][1] / det;
                inv[1][2] = -self.sigma[1][2] / det;
                inv[2][1] = -self.sigma[2][1] / det;
            }
        }
        inv
    }

    pub fn inverse_metric(&self) -> Mat3 {
        let w = (-2.0 * self.psi).exp();
        let sinv = self.sigma_inverse();
        let mut inv = mat_from_fn(self.dim, |a, b| w * sinv[a][b]);
        inv[0][0] = -w;
        inv
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite()
            && self.dpsi.iter().all(|v| v.is_finite())
            && self.sigma.iter().flatten().all(|v| v.is_finite())
            && self.dsigma.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Second derivatives for the analytic Christoffel-derivative path.
#[derive(Clone, Copy, Debug, Default)]
pub struct SecondDerivs {
    /// d2psi[a][b] = partial_a partial_b psi.
    pub d2psi: Mat3,
    /// d2sigma[a][b][i][j] = partial_a partial_b sigma_ij.
    pub d2sigma: [[Mat3; 3]; 3],
}

/// A concrete conformal Gaussian metric family.
pub trait AmbientMetric: Send + Sync {
    fn spatial_dim(&self) -> usize;
    /// Open interval of valid coordinate times.
    fn time_domain(&self) -> (f64, f64);
    fn lengths(&self) -> [f64; 2];
    fn name(&self) -> &str;
    fn eval(&self, t: f64, x: [f64; 2]) -> AmbientPoint;
    /// Analytic second derivatives when the family has them.
    fn second_derivs(&self, _t: f64, _x: [f64; 2]) -> Option<SecondDerivs> {
        None
    }
    /// Closed-form Ricci tensor (coordinate components) when available.
    fn ricci(&self, _t: f64, _x: [f64; 2]) -> Option<Mat3> {
        None
    }
    fn describe(&self) -> String {
        format!("{} (n = {})", self.name(), self.spatial_dim())
    }
}

/// Christoffel symbols of the ambient metric at a point,
/// indexed [upper][lower][lower].
pub fn christoffels_at(p: &AmbientPoint) -> Ten3 {
    let dim = p.dim;
    let g_inv = p.inverse_metric();
    let dg = p.dmetric();
    ten_from_fn(dim, |m, a, b| {
        0.5 * tensor::sum(dim, |nu| g_inv[m][nu] * (dg[a][nu][b] + dg[b][a][nu] - dg[nu][a][b]))
    })
}

fn d2metric(p: &AmbientPoint, s: &SecondDerivs) -> [[Mat3; 3]; 3] {
    let dim = p.dim;
    let w = (2.0 * p.psi).exp();
    let e = p.flat_part();
    let de = |c: usize, a: usize, b: usize| {
        if a == 0 || b == 0 {
            0.0
        } else {
            p.dsigma[c][a][b]
        }
    };
    let d2e = |c: usize, d: usize, a: usize, b: usize| {
        if a == 0 || b == 0 {
            0.0
        } else {
            s.d2sigma[c][d][a][b]
        }
    };
    let mut out = [[tensor::mat_zero(); 3]; 3];
    for c in 0..dim {
        for d in 0..dim {
            out[c][d] = mat_from_fn(dim, |a, b| {
                w * (4.0 * p.dpsi[c] * p.dpsi[d] * e[a][b]
                    + 2.0 * s.d2psi[c][d] * e[a][b]
                    + 2.0 * p.dpsi[c] * de(d, a, b)
                    + 2.0 * p.dpsi[d] * de(c, a, b)
                    + d2e(c, d, a, b))
            });
        }
    }
    out
}

/// Christoffels and their coordinate derivatives from analytic second
/// derivatives of the metric data.
pub fn christoffel_derivs_analytic(p: &AmbientPoint, s: &SecondDerivs) -> (Ten3, [Ten3; 3]) {
    let dim = p.dim;
    let gam = christoffels_at(p);
    let g_inv = p.inverse_metric();
    let dg = p.dmetric();
    let d2g = d2metric(p, s);
    // partial_c g^{mn} = -g^{mr} g^{ns} partial_c g_{rs}
    let mut dginv = [tensor::mat_zero(); 3];
    for c in 0..dim {
        dginv[c] = mat_from_fn(dim, |m, nu| {
            -tensor::sum2(dim, |r, sdx| g_inv[m][r] * g_inv[nu][sdx] * dg[c][r][sdx])
        });
    }
    let mut dgam = [tensor::ten_zero(); 3];
    for c in 0..dim {
        dgam[c] = ten_from_fn(dim, |m, a, b| {
            0.5 * tensor::sum(dim, |nu| {
                dginv[c][m][nu] * (dg[a][nu][b] + dg[b][a][nu] - dg[nu][a][b])
                    + g_inv[m][nu]
                        * (d2g[c][a][nu][b] + d2g[c][b][a][nu] - d2g[c][nu][a][b])
            })
        });
    }
    (gam, dgam)
}

/// Ricci tensor from Christoffels and their derivatives:
/// R_ab = partial_m Gamma^m_ab - partial_a Gamma^m_mb
///        + Gamma^m_ml Gamma^l_ab - Gamma^m_al Gamma^l_mb.
pub fn ricci_from_derivs(dim: usize, gam: &Ten3, dgam: &[Ten3; 3]) -> Mat3 {
    mat_from_fn(dim, |a, b| {
        tensor::sum(dim, |m| dgam[m][m][a][b] - dgam[a][m][m][b])
            + tensor::sum2(dim, |m, l| {
                gam[m][m][l] * gam[l][a][b] - gam[m][a][l] * gam[l][m][b]
            })
    })
}

/// Geometry of a constant-coordinate-time slice at one spatial point, with
/// respect to the past-directed unit normal.
#[derive(Clone, Copy, Debug)]
pub struct SliceGeometry {
    /// Induced metric e^{2 psi} sigma_ij (spatial slots).
    pub induced: Mat3,
    /// Second fundamental form (spatial slots).
    pub second_form: Mat3,
    /// Trace of the second fundamental form; positive on collapsing slices.
    pub mean_curvature: f64,
    /// Full squared norm of the second fundamental form.
    pub second_form_sq: f64,
    /// sqrt(det induced).
    pub volume_density: f64,
}

/// Boost-scan controls for [`MetricSpec::estimate_lambda`].
#[derive(Clone, Copy, Debug)]
pub struct LambdaScanOptions {
    pub time_samples: usize,
    /// Spatial sample count per axis.
    pub spatial_samples: usize,
    pub boost_max: f64,
    pub boost_samples: usize,
    /// Spatial direction count (n = 2; n = 1 always uses both orientations).
    pub directions: usize,
}

impl Default for LambdaScanOptions {
    fn default() -> Self {
        Self {
            time_samples: 9,
            spatial_samples: 8,
            boost_max: 5.0,
            boost_samples: 64,
            directions: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LambdaEstimate {
    /// max(0, -min R(nu, nu)) over the scan.
    pub lambda: f64,
    pub min_contraction: f64,
    /// False when the minimum sat at the largest boost tried.
    pub converged: bool,
    pub argmin_time: f64,
    pub argmin_boost: f64,
}

/// Shared handle to an ambient metric with the validity checks applied.
#[derive(Clone)]
pub struct MetricSpec {
    inner: Arc<dyn AmbientMetric>,
}

impl MetricSpec {
    pub fn new(inner: Arc<dyn AmbientMetric>) -> Self {
        Self { inner }
    }

    pub fn dim(&self) -> usize {
        self.inner.spatial_dim()
    }

    pub fn time_domain(&self) -> (f64, f64) {
        self.inner.time_domain()
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.inner.lengths()
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn describe(&self) -> String {
        self.inner.describe()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.time_domain();
        if !(t > lo && t < hi) {
            return Err(Error::OutsideDomain { t, lo, hi });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> Result<AmbientPoint> {
        self.check_time(t)?;
        let p = self.inner.eval(t, x);
        if !p.is_finite() {
            return Err(Error::NonFinite { context: format!("metric data at t = {t}") });
        }
        let min_eig = p.sigma_min_eigenvalue();
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: format!("sigma at t = {t}, x = ({}, {})", x[0], x[1]),
                min_eig,
            });
        }
        Ok(p)
    }

    pub fn second_derivs(&self, t: f64, x: [f64; 2]) -> Option<SecondDerivs> {
        self.inner.second_derivs(t, x)
    }

    /// Time step for one-dimensional differencing of assembled quantities.
    pub fn fd_step(&self, t: f64) -> f64 {
        let mut h = 1e-4 * t.abs().max(1.0);
        let (lo, hi) = self.time_domain();
        let width = hi - lo;
        if width.is_finite() {
            h = h.min(width / 16.0);
        }
        h
    }

    /// Christoffels plus derivatives; analytic when the family supplies
    /// second derivatives, otherwise centered (one-sided near the time
    /// boundary) differences of the assembled Christoffels.
    pub fn christoffel_derivs(&self, t: f64, x: [f64; 2]) -> Result<(Ten3, [Ten3; 3])> {
        let p = self.eval(t, x)?;
        if let Some(s) = self.inner.second_derivs(t, x) {
            return Ok(christoffel_derivs_analytic(&p, &s));
        }
        let dim = p.dim;
        let gam = christoffels_at(&p);
        let (lo, hi) = self.time_domain();
        let h = self.fd_step(t);
        let gam_at = |tt: f64, xx: [f64; 2]| -> Result<Ten3> {
            Ok(christoffels_at(&self.eval(tt, xx)?))
        };
        let mut dgam = [tensor::ten_zero(); 3];
        // Time direction, second order in every branch.
        dgam[0] = if t - h > lo && t + h < hi {
            let gp = gam_at(t + h, x)?;
            let gm = gam_at(t - h, x)?;
            ten_from_fn(dim, |m, a, b| (gp[m][a][b] - gm[m][a][b]) / (2.0 * h))
        } else if t + h < hi {
            let g1 = gam_at(t + h, x)?;
            let g2 = gam_at(t + 2.0 * h, x)?;
            ten_from_fn(dim, |m, a, b| {
                (-3.0 * gam[m][a][b] + 4.0 * g1[m][a][b] - g2[m][a][b]) / (2.0 * h)
            })
        } else {
            let g1 = gam_at(t - h, x)?;
            let g2 = gam_at(t - 2.0 * h, x)?;
            ten_from_fn(dim, |m, a, b| {
                (3.0 * gam[m][a][b] - 4.0 * g1[m][a][b] + g2[m][a][b]) / (2.0 * h)
            })
        };
        for k in 1..dim {
            let lk = self.lengths()[k - 1];
            let hx = 1e-4 * (lk / (2.0 * std::f64::consts::PI)).max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[k - 1] += hx;
            xm[k - 1] -= hx;
            let gp = gam_at(t, xp)?;
            let gm = gam_at(t, xm)?;
            dgam[k] = ten_from_fn(dim, |m, a, b| (gp[m][a][b] - gm[m][a][b]) / (2.0 * hx));
        }
        Ok((gam, dgam))
    }

    /// Coordinate Ricci tensor at (t, x).
    pub fn ricci_tensor(&self, t: f64, x: [f64; 2]) -> Result<Mat3> {
        self.check_time(t)?;
        if let Some(r) = self.inner.ricci(t, x) {
            return Ok(r);
        }
        let (gam, dgam) = self.christoffel_derivs(t, x)?;
        Ok(ricci_from_derivs(self.dim() + 1, &gam, &dgam))
    }

    /// R(nu, nu) for a unit timelike nu given in coordinate components.
    pub fn ricci_contraction(&self, t: f64, x: [f64; 2], nu: &Vec3) -> Result<f64> {
        let p = self.eval(t, x)?;
        let g = p.metric();
        let dim = p.dim;
        let norm = tensor::sum2(dim, |a, b| g[a][b] * nu[a] * nu[b]);
        if (norm + 1.0).abs() > UNIT_NORM_TOL * norm.abs().max(1.0) {
            return Err(Error::NotUnitTimelike { norm, tol: UNIT_NORM_TOL });
        }
        let r = self.ricci_tensor(t, x)?;
        Ok(tensor::sum2(dim, |a, b| r[a][b] * nu[a] * nu[b]))
    }

    /// Geometry of the constant-time slice through (t, x).
    pub fn slice_geometry(&self, t: f64, x: [f64; 2]) -> Result<SliceGeometry> {
        let p = self.eval(t, x)?;
        let dim = p.dim;
        let w = p.psi.exp();
        let induced = mat_from_fn(dim, |i, j| {
            if i == 0 || j == 0 {
                0.0
            } else {
                w * w * p.sigma[i][j]
            }
        });
        let second_form = mat_from_fn(dim, |i, j| {
            if i == 0 || j == 0 {
                0.0
            } else {
                w * (-0.5 * p.dsigma[0][i][j] - p.dpsi[0] * p.sigma[i][j])
            }
        });
        let sinv = p.sigma_inverse();
        let winv2 = (-2.0 * p.psi).exp();
        let mut mean = 0.0;
        let mut sq = 0.0;
        for i in 1..dim {
            for j in 1..dim {
                mean += winv2 * sinv[i][j] * second_form[i][j];
                for k in 1..dim {
                    for l in 1..dim {
                        sq += winv2 * winv2
                            * sinv[i][k]
                            * sinv[j][l]
                            * second_form[i][j]
                            * second_form[k][l];
                    }
                }
            }
        }
        let nsp = (dim - 1) as f64;
        let volume_density = (nsp * p.psi).exp() * p.sigma_det().sqrt();
        Ok(SliceGeometry {
            induced,
            second_form,
            mean_curvature: mean,
            second_form_sq: sq,
            volume_density,
        })
    }

    /// Average mean curvature of the constant-time slice over grid points.
    pub fn mean_slice_curvature(&self, t: f64, grid: &PeriodicGrid) -> Result<f64> {
        let mut acc = 0.0;
        for idx in 0..grid.num_points() {
            let x = grid.point(idx);
            acc += self.slice_geometry(t, x)?.mean_curvature;
        }
        Ok(acc / grid.num_points() as f64)
    }

    /// Coordinate time whose slice-average mean curvature is closest to tau
    /// (bisection on a bracketing interval when one exists).
    pub fn seed_time_for_curvature(&self, tau: f64, grid: &PeriodicGrid) -> Result<f64> {
        let (lo, hi) = self.scan_interval();
        let samples = 64;
        let mut prev: Option<(f64, f64)> = None;
        let mut best = (f64::INFINITY, lo);
        let mut bracket = None;
        for i in 0..=samples {
            let t = lo + (hi - lo) * i as f64 / samples as f64;
            let f = self.mean_slice_curvature(t, grid)? - tau;
            if f.abs() < best.0 {
                best = (f.abs(), t);
            }
            if let Some((tp, fp)) = prev {
                if fp * f <= 0.0 {
                    bracket = Some((tp, t, fp));
                    break;
                }
            }
            prev = Some((t, f));
        }
        let Some((mut a, mut b, mut fa)) = bracket else {
            return Ok(best.1);
        };
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            let fm = self.mean_slice_curvature(mid, grid)? - tau;
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Interior sampling interval, finite even for eternal metrics.
    fn scan_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.time_domain();
        let lo = if lo.is_finite() { lo } else { -5.0 };
        let hi = if hi.is_finite() { hi } else { 5.0 };
        let margin = 5e-3 * (hi - lo);
        (lo + margin, hi - margin)
    }

    /// Scans unit timelike directions nu = cosh(chi) e_0 + sinh(chi) e(theta)
    /// over sampled events for the most negative Ricci contraction.
    pub fn estimate_lambda(&self, opts: &LambdaScanOptions) -> Result<LambdaEstimate> {
        let n = self.dim();
        let dim = n + 1;
        let (lo, hi) = self.scan_interval();
        let mut min_val = f64::INFINITY;
        let mut argmin_time = lo;
        let mut argmin_boost = 0.0;
        let mut unboosted_at_argmin = f64::INFINITY;
        let boost_step = opts.boost_max / (opts.boost_samples.max(2) - 1) as f64;

        let spatial_points: Vec<[f64; 2]> = {
            let m = opts.spatial_samples.max(1);
            let l = self.lengths();
            match n {
                1 => (0..m).map(|j| [l[0] * j as f64 / m as f64, 0.0]).collect(),
                _ => (0..m * m)
                    .map(|idx| {
                        let (a, b) = (idx / m, idx % m);
                        [l[0] * a as f64 / m as f64, l[1] * b as f64 / m as f64]
                    })
                    .collect(),
            }
        };

        for i in 0..opts.time_samples {
            let t = lo + (hi - lo) * (i as f64 + 0.5) / opts.time_samples as f64;
            for &x in &spatial_points {
                let p = self.eval(t, x)?;
                let r = self.ricci_tensor(t, x)?;
                let winv = (-p.psi).exp();
                let mut e0 = [0.0; 3];
                e0[0] = winv;
                // sigma-orthonormal spatial frame, rescaled to unit vectors.
                let s11 = p.sigma[1][1];
                let mut f1 = [0.0; 3];
                f1[1] = winv / s11.sqrt();
                let mut f2 = [0.0; 3];
                if n == 2 {
                    let w2 = p.sigma[2][2] - p.sigma[1][2] * p.sigma[1][2] / s11;
                    let scale = winv / w2.sqrt();
                    f2[1] = -p.sigma[1][2] / s11 * scale;
                    f2[2] = scale;
                }
                let dirs: Vec<[f64; 2]> = if n == 1 {
                    vec![[1.0, 0.0], [-1.0, 0.0]]
                } else {
                    (0..opts.directions.max(1))
                        .map(|k| {
                            let th =
                                2.0 * std::f64::consts::PI * k as f64 / opts.directions as f64;
                            [th.cos(), th.sin()]
                        })
                        .collect()
                };
                for d in &dirs {
                    let mut unboosted = f64::INFINITY;
                    for bs in 0..opts.boost_samples {
                        let chi = bs as f64 * boost_step;
                        let (ch, sh) = (chi.cosh(), chi.sinh());
                        let mut nu = [0.0; 3];
                        for a in 0..dim {
                            nu[a] = ch * e0[a] + sh * (d[0] * f1[a] + d[1] * f2[a]);
                        }
                        let val = tensor::sum2(dim, |a, b| r[a][b] * nu[a] * nu[b]);
                        if bs == 0 {
                            unboosted = val;
                        }
                        if val < min_val {
                            min_val = val;
                            argmin_time = t;
                            argmin_boost = chi;
                            unboosted_at_argmin = unboosted;
                        }
                    }
                }
            }
        }
        if !min_val.is_finite() {
            return Err(Error::NonFinite { context: "Ricci contraction scan".into() });
        }
        // Unconverged means the minimum sat at the largest boost tried while
        // still genuinely below its chi = 0 value (not a rounding tie).
        let at_edge = argmin_boost >= opts.boost_max - 0.5 * boost_step;
        let decrease = unboosted_at_argmin - min_val;
        let significant = decrease > 1e-9 * unboosted_at_argmin.abs().max(1.0);
        Ok(LambdaEstimate {
            lambda: (-min_val).max(0.0),
            min_contraction: min_val,
            converged: !(at_edge && significant),
            argmin_time,
            argmin_boost,
        })
    }
}
