//! Built-in metric families. All public families are conformally flat
//! (sigma = identity); the curvature machinery itself handles general sigma.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{AmbientMetric, AmbientPoint, MetricSpec, SecondDerivs};
use crate::tensor::Mat3;

fn check_geometry_args(n: usize, lengths: &[f64]) -> Result<[f64; 2]> {
    if n != 1 && n != 2 {
        return Err(Error::Config(format!("spatial dimension must be 1 or 2, got {n}")));
    }
    if lengths.len() < n {
        return Err(Error::Config(format!("need {n} torus lengths, got {}", lengths.len())));
    }
    let mut out = [1.0; 2];
    for k in 0..n {
        if !(lengths[k] > 0.0 && lengths[k].is_finite()) {
            return Err(Error::Config(format!("torus length {} invalid", lengths[k])));
        }
        out[k] = lengths[k];
    }
    Ok(out)
}

/// Flat static torus: psi = 0, sigma = identity.
pub struct MinkowskiTorus {
    n: usize,
    lengths: [f64; 2],
}

impl AmbientMetric for MinkowskiTorus {
    fn spatial_dim(&self) -> usize {
        self.n
    }
    fn time_domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn lengths(&self) -> [f64; 2] {
        self.lengths
    }
    fn name(&self) -> &str {
        "minkowski_torus"
    }
    fn eval(&self, _t: f64, _x: [f64; 2]) -> AmbientPoint {
        AmbientPoint::conformal_flat(self.n + 1)
    }
    fn second_derivs(&self, _t: f64, _x: [f64; 2]) -> Option<SecondDerivs> {
        Some(SecondDerivs::default())
    }
    fn ricci(&self, _t: f64, _x: [f64; 2]) -> Option<Mat3> {
        Some(crate::tensor::mat_zero())
    }
}

// p, p', p'' of sum_k coeffs[k] t^k by Horner's rule.
fn poly_eval(coeffs: &[f64], t: f64) -> (f64, f64, f64) {
    let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d2p = d2p * t + 2.0 * dp;
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp, d2p)
}

/// Homogeneous conformal factor e^psi = a(t) with a polynomial scale factor;
/// the default a(t) = 1 - t collapses toward t = 1.
pub struct FrwCollapse {
    n: usize,
    lengths: [f64; 2],
    coeffs: Vec<f64>,
    domain: (f64, f64),
}

impl FrwCollapse {
    pub fn new(n: usize, lengths: &[f64], coeffs: &[f64], domain: (f64, f64)) -> Result<Self> {
        let lengths = check_geometry_args(n, lengths)?;
        if coeffs.is_empty() {
            return Err(Error::Config("scale factor needs at least one coefficient".into()));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::Config(format!("empty time domain ({}, {})", domain.0, domain.1)));
        }
        let m = Self { n, lengths, coeffs: coeffs.to_vec(), domain };
        for i in 1..64 {
            let t = domain.0 + (domain.1 - domain.0) * i as f64 / 64.0;
            let (a, _, _) = poly_eval(&m.coeffs, t);
            if !(a > 0.0) {
                return Err(Error::Config(format!(
                    "scale factor non-positive at t = {t} (a = {a})"
                )));
            }
        }
        Ok(m)
    }
}

impl AmbientMetric for FrwCollapse {
    fn spatial_dim(&self) -> usize {
        self.n
    }
    fn time_domain(&self) -> (f64, f64) {
        self.domain
    }
    fn lengths(&self) -> [f64; 2] {
        self.lengths
    }
    fn name(&self) -> &str {
        "frw_collapse"
    }
    fn eval(&self, t: f64, _x: [f64; 2]) -> AmbientPoint {
        let (a, a1, _) = poly_eval(&self.coeffs, t);
        let mut p = AmbientPoint::conformal_flat(self.n + 1);
        p.psi = a.ln();
        p.dpsi[0] = a1 / a;
        p
    }
    fn second_derivs(&self, t: f64, _x: [f64; 2]) -> Option<SecondDerivs> {
        let (a, a1, a2) = poly_eval(&self.coeffs, t);
        let h = a1 / a;
        let mut s = SecondDerivs::default();
        s.d2psi[0][0] = a2 / a - h * h;
        Some(s)
    }
}

/// Collapsing conformal factor with a spatially inhomogeneous ripple:
/// psi = ln(1 - t) + eps cos(t) sum_k sin(2 pi x_k / L_k).
pub struct WavyCollapse {
    n: usize,
    lengths: [f64; 2],
    eps: f64,
}

impl WavyCollapse {
    pub fn new(n: usize, lengths: &[f64], eps: f64) -> Result<Self> {
        let lengths = check_geometry_args(n, lengths)?;
        if !eps.is_finite() || eps.abs() >= 0.5 {
            return Err(Error::Config(format!("ripple amplitude {eps} out of range")));
        }
        Ok(Self { n, lengths, eps })
    }

    fn ripple(&self, x: [f64; 2]) -> ([f64; 2], [f64; 2], [f64; 2], f64) {
        let mut w = 0.0;
        let mut wk = [0.0; 2];
        let mut wkk = [0.0; 2];
        let mut freq = [0.0; 2];
        for k in 0..self.n {
            let om = 2.0 * std::f64::consts::PI / self.lengths[k];
            let th = om * x[k];
            w += th.sin();
            wk[k] = om * th.cos();
            wkk[k] = -om * om * th.sin();
            freq[k] = om;
        }
        (wk, wkk, freq, w)
    }
}

impl AmbientMetric for WavyCollapse {
    fn spatial_dim(&self) -> usize {
        self.n
    }
    fn time_domain(&self) -> (f64, f64) {
        // Far from the collapse the 1/(1-t)^2 background curvature decays
        // and a fixed-amplitude ripple can push null contractions negative
        // (for n = 2), which makes the vacuum-energy scan diverge; keep the
        // domain where the background dominates.
        (-1.0, 1.0)
    }
    fn lengths(&self) -> [f64; 2] {
        self.lengths
    }
    fn name(&self) -> &str {
        "wavy_collapse"
    }
    fn eval(&self, t: f64, x: [f64; 2]) -> AmbientPoint {
        let (wk, _, _, w) = self.ripple(x);
        let mut p = AmbientPoint::conformal_flat(self.n + 1);
        p.psi = (1.0 - t).ln() + self.eps * t.cos() * w;
        p.dpsi[0] = -1.0 / (1.0 - t) - self.eps * t.sin() * w;
        for k in 0..self.n {
            p.dpsi[k + 1] = self.eps * t.cos() * wk[k];
        }
        p
    }
    fn second_derivs(&self, t: f64, x: [f64; 2]) -> Option<SecondDerivs> {
        let (wk, wkk, _, w) = self.ripple(x);
        let mut s = SecondDerivs::default();
        let om = 1.0 - t;
        s.d2psi[0][0] = -1.0 / (om * om) - self.eps * t.cos() * w;
        for k in 0..self.n {
            s.d2psi[0][k + 1] = -self.eps * t.sin() * wk[k];
            s.d2psi[k + 1][0] = s.d2psi[0][k + 1];
            s.d2psi[k + 1][k + 1] = self.eps * t.cos() * wkk[k];
        }
        Some(s)
    }
}

/// Exponentially expanding universe in conformal time, t in (-20/h0, 0):
/// e^psi = -1/(h0 t). Closed-form Ricci n h0^2 g.
pub struct DesitterConformal {
    n: usize,
    lengths: [f64; 2],
    h0: f64,
}

impl DesitterConformal {
    pub fn new(n: usize, lengths: &[f64], h0: f64) -> Result<Self> {
        let lengths = check_geometry_args(n, lengths)?;
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::Config(format!("expansion rate {h0} must be positive")));
        }
        Ok(Self { n, lengths, h0 })
    }
}

impl AmbientMetric for DesitterConformal {
    fn spatial_dim(&self) -> usize {
        self.n
    }
    fn time_domain(&self) -> (f64, f64) {
        (-20.0 / self.h0, 0.0)
    }
    fn lengths(&self) -> [f64; 2] {
        self.lengths
    }
    fn name(&self) -> &str {
        "desitter_conformal"
    }
    fn eval(&self, t: f64, _x: [f64; 2]) -> AmbientPoint {
        let mut p = AmbientPoint::conformal_flat(self.n + 1);
        p.psi = -(-self.h0 * t).ln();
        p.dpsi[0] = -1.0 / t;
        p
    }
    fn second_derivs(&self, t: f64, _x: [f64; 2]) -> Option<SecondDerivs> {
        let mut s = SecondDerivs::default();
        s.d2psi[0][0] = 1.0 / (t * t);
        Some(s)
    }
    fn ricci(&self, t: f64, x: [f64; 2]) -> Option<Mat3> {
        let g = self.eval(t, x).metric();
        let c = self.n as f64 * self.h0 * self.h0;
        Some(crate::tensor::mat_from_fn(self.n + 1, |a, b| c * g[a][b]))
    }
}

/// Diagnostic fixture: wavy data whose reported time derivative of psi is
/// scaled by 1.5, so the pointwise data are mutually inconsistent. The
/// evolution identity checks must flag this.
pub struct InconsistentFixture {
    inner: WavyCollapse,
}

impl AmbientMetric for InconsistentFixture {
    fn spatial_dim(&self) -> usize {
        self.inner.spatial_dim()
    }
    fn time_domain(&self) -> (f64, f64) {
        self.inner.time_domain()
    }
    fn lengths(&self) -> [f64; 2] {
        self.inner.lengths()
    }
    fn name(&self) -> &str {
        "inconsistent_fixture"
    }
    fn eval(&self, t: f64, x: [f64; 2]) -> AmbientPoint {
        let mut p = self.inner.eval(t, x);
        p.dpsi[0] *= 1.5;
        p
    }
    fn second_derivs(&self, t: f64, x: [f64; 2]) -> Option<SecondDerivs> {
        let mut s = self.inner.second_derivs(t, x)?;
        let dim = self.inner.spatial_dim() + 1;
        for a in 0..dim {
            s.d2psi[0][a] *= 1.5;
            if a != 0 {
                s.d2psi[a][0] *= 1.5;
            }
        }
        Some(s)
    }
}

/// On-disk layout for a sampled conformal factor.
#[derive(Serialize, Deserialize)]
struct TabulatedFile {
    schema: String,
    n: usize,
    lengths: Vec<f64>,
    t0: f64,
    dt: f64,
    nt: usize,
    sizes: Vec<usize>,
    psi: Vec<f64>,
}

const TABULATED_SCHEMA: &str = "tabulated-metric-v1";

/// Conformal factor sampled on a uniform (time x torus) lattice and
/// reconstructed with cubic tensor-product interpolation (clamped in time,
/// periodic in space). Provides first derivatives only, so curvature goes
/// through the difference path.
pub struct TabulatedMetric {
    n: usize,
    lengths: [f64; 2],
    t0: f64,
    dt: f64,
    nt: usize,
    sizes: [usize; 2],
    psi: Vec<f64>,
}

// Cubic interpolation weights and their s-derivatives on stencil
// [p0 p1 p2 p3] with s in [0, 1] between p1 and p2.
fn cubic_weights(s: f64) -> ([f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    let w = [
        0.5 * (-s3 + 2.0 * s2 - s),
        0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
        0.5 * (-3.0 * s3 + 4.0 * s2 + s),
        0.5 * (s3 - s2),
    ];
    let dw = [
        0.5 * (-3.0 * s2 + 4.0 * s - 1.0),
        0.5 * (9.0 * s2 - 10.0 * s),
        0.5 * (-9.0 * s2 + 8.0 * s + 1.0),
        0.5 * (3.0 * s2 - 2.0 * s),
    ];
    (w, dw)
}

impl TabulatedMetric {
    pub fn new(
        n: usize,
        lengths: &[f64],
        t0: f64,
        dt: f64,
        nt: usize,
        sizes: &[usize],
        psi: Vec<f64>,
    ) -> Result<Self> {
        let lengths = check_geometry_args(n, lengths)?;
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::Config("tabulated time lattice invalid".into()));
        }
        if nt < 4 {
            return Err(Error::Config(format!("need at least 4 time samples, got {nt}")));
        }
        if sizes.len() < n {
            return Err(Error::Config(format!("need {n} spatial sizes, got {}", sizes.len())));
        }
        let mut sz = [1usize; 2];
        for k in 0..n {
            if sizes[k] < 4 {
                return Err(Error::Config(format!(
                    "axis {k}: need at least 4 samples, got {}",
                    sizes[k]
                )));
            }
            sz[k] = sizes[k];
        }
        let expect = nt * sz[0] * sz[1];
        if psi.len() != expect {
            return Err(Error::Config(format!(
                "sample count {} does not match lattice {}x{}x{}",
                psi.len(),
                nt,
                sz[0],
                sz[1]
            )));
        }
        if !psi.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "tabulated samples".into() });
        }
        Ok(Self { n, lengths, t0, dt, nt, sizes: sz, psi })
    }

    /// Samples the conformal factor of another metric onto a lattice.
    pub fn sample(
        source: &MetricSpec,
        t_start: f64,
        t_end: f64,
        nt: usize,
        sizes: &[usize],
    ) -> Result<Self> {
        let n = source.dim();
        let mut sz = [1usize; 2];
        for k in 0..n {
            sz[k] = *sizes.get(k).ok_or_else(|| Error::Config("missing spatial size".into()))?;
        }
        if nt < 4 || !(t_end > t_start) {
            return Err(Error::Config("tabulation window invalid".into()));
        }
        let dt = (t_end - t_start) / (nt - 1) as f64;
        let lengths = source.lengths();
        let mut psi = Vec::with_capacity(nt * sz[0] * sz[1]);
        for it in 0..nt {
            let t = t_start + it as f64 * dt;
            for ix in 0..sz[0] {
                for iy in 0..sz[1] {
                    let x = [
                        lengths[0] * ix as f64 / sz[0] as f64,
                        lengths[1] * iy as f64 / sz[1] as f64,
                    ];
                    psi.push(source.eval(t, x)?.psi);
                }
            }
        }
        Self::new(n, &lengths[..n], t_start, dt, nt, &sz[..n], psi)
    }

    #[inline]
    fn value(&self, it: usize, ix: usize, iy: usize) -> f64 {
        self.psi[(it * self.sizes[0] + ix) * self.sizes[1] + iy]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TabulatedFile {
            schema: TABULATED_SCHEMA.to_string(),
            n: self.n,
            lengths: self.lengths[..self.n].to_vec(),
            t0: self.t0,
            dt: self.dt,
            nt: self.nt,
            sizes: self.sizes[..self.n].to_vec(),
            psi: self.psi.clone(),
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&file)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let file: TabulatedFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::FileFormat {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        if file.schema != TABULATED_SCHEMA {
            return Err(Error::FileFormat {
                path: path.display().to_string(),
                detail: format!("unknown schema {:?}", file.schema),
            });
        }
        Self::new(file.n, &file.lengths, file.t0, file.dt, file.nt, &file.sizes, file.psi)
            .map_err(|e| Error::FileFormat {
                path: path.display().to_string(),
                detail: e.to_string(),
            })
    }
}

impl AmbientMetric for TabulatedMetric {
    fn spatial_dim(&self) -> usize {
        self.n
    }
    fn time_domain(&self) -> (f64, f64) {
        // Keep the four-point stencil strictly interior.
        (self.t0 + self.dt, self.t0 + (self.nt as f64 - 2.0) * self.dt)
    }
    fn lengths(&self) -> [f64; 2] {
        self.lengths
    }
    fn name(&self) -> &str {
        "tabulated"
    }
    fn eval(&self, t: f64, x: [f64; 2]) -> AmbientPoint {
        let st = (t - self.t0) / self.dt;
        let it_base = (st.floor() as isize).clamp(0, self.nt as isize - 2);
        let (wt, dwt) = cubic_weights(st - it_base as f64);
        let ti: Vec<usize> = (-1..3)
            .map(|o| (it_base + o).clamp(0, self.nt as isize - 1) as usize)
            .collect();

        let mut si = [[0usize; 4]; 2];
        let mut sw = [[0.0f64; 4]; 2];
        let mut sdw = [[0.0f64; 4]; 2];
        let mut active = [1usize; 2];
        for k in 0..self.n {
            let nk = self.sizes[k];
            let hx = self.lengths[k] / nk as f64;
            let sx = x[k] / hx;
            let base = sx.floor() as isize;
            let (w, dw) = cubic_weights(sx - base as f64);
            for (o, off) in (-1..3).enumerate() {
                si[k][o] = (base + off).rem_euclid(nk as isize) as usize;
                sw[k][o] = w[o];
                sdw[k][o] = dw[o] / hx;
            }
            active[k] = 4;
        }
        if self.n == 1 {
            sw[1][0] = 1.0;
        }

        let mut val = 0.0;
        let mut d = [0.0f64; 3];
        for (a, &ita) in ti.iter().enumerate() {
            for b in 0..active[0] {
                for c in 0..active[1] {
                    let p = self.value(ita, si[0][b], si[1][c]);
                    let (wx, dwx) = (sw[0][b], sdw[0][b]);
                    let (wy, dwy) = if self.n == 2 { (sw[1][c], sdw[1][c]) } else { (1.0, 0.0) };
                    val += wt[a] * wx * wy * p;
                    d[0] += dwt[a] / self.dt * wx * wy * p;
                    d[1] += wt[a] * dwx * wy * p;
                    if self.n == 2 {
                        d[2] += wt[a] * wx * dwy * p;
                    }
                }
            }
        }
        let mut pt = AmbientPoint::conformal_flat(self.n + 1);
        pt.psi = val;
        pt.dpsi = d;
        pt
    }
}

impl MetricSpec {
    pub fn minkowski(n: usize, lengths: &[f64]) -> Result<Self> {
        let lengths = check_geometry_args(n, lengths)?;
        Ok(Self::new(Arc::new(MinkowskiTorus { n, lengths })))
    }

    pub fn frw_collapse(
        n: usize,
        lengths: &[f64],
        coeffs: &[f64],
        domain: (f64, f64),
    ) -> Result<Self> {
        Ok(Self::new(Arc::new(FrwCollapse::new(n, lengths, coeffs, domain)?)))
    }

    /// Scale factor 1 - t on t in (-3, 1).
    pub fn frw_collapse_default(n: usize, lengths: &[f64]) -> Result<Self> {
        Self::frw_collapse(n, lengths, &[1.0, -1.0], (-3.0, 1.0))
    }

    pub fn wavy_collapse(n: usize, lengths: &[f64], eps: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(WavyCollapse::new(n, lengths, eps)?)))
    }

    pub fn desitter(n: usize, lengths: &[f64], h0: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(DesitterConformal::new(n, lengths, h0)?)))
    }

    pub fn inconsistent_fixture(n: usize, lengths: &[f64], eps: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(InconsistentFixture {
            inner: WavyCollapse::new(n, lengths, eps)?,
        })))
    }

    pub fn tabulated(tab: TabulatedMetric) -> Self {
        Self::new(Arc::new(tab))
    }

    pub fn tabulated_from_file(path: &Path) -> Result<Self> {
        Ok(Self::tabulated(TabulatedMetric::load(path)?))
    }
}
