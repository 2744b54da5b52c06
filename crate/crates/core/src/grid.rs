//! Periodic structured grid on the flat torus (n = 1 or 2) with
//! second-order finite differences and equispaced quadrature.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equispaced periodic lattice on T^n. Axis 0 is the slow (outer) index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n: usize,
    sizes: [usize; 2],
    lengths: [f64; 2],
}

impl PeriodicGrid {
    pub fn new(n: usize, sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Grid(format!("spatial dimension must be 1 or 2, got {n}")));
        }
        if sizes.len() != n || lengths.len() != n {
            return Err(Error::Grid(format!(
                "expected {n} sizes and lengths, got {} and {}",
                sizes.len(),
                lengths.len()
            )));
        }
        let mut sz = [1usize; 2];
        let mut ln = [1.0f64; 2];
        for k in 0..n {
            if sizes[k] < 8 || sizes[k] % 2 != 0 {
                return Err(Error::Grid(format!(
                    "axis {k}: N must be even and >= 8, got {}",
                    sizes[k]
                )));
            }
            if !(lengths[k] > 0.0) || !lengths[k].is_finite() {
                return Err(Error::Grid(format!("axis {k}: length must be positive finite")));
            }
            sz[k] = sizes[k];
            ln[k] = lengths[k];
        }
        Ok(Self { n, sizes: sz, lengths: ln })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn num_points(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    /// Volume of one grid cell, prod_k h_k.
    pub fn cell_volume(&self) -> f64 {
        let mut v = 1.0;
        for k in 0..self.n {
            v *= self.spacing(k);
        }
        v
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.sizes[1] + j
    }

    #[inline]
    pub fn decompose(&self, idx: usize) -> (usize, usize) {
        (idx / self.sizes[1], idx % self.sizes[1])
    }

    /// Coordinates of a grid point.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.decompose(idx);
        [i as f64 * self.spacing(0), if self.n == 2 { j as f64 * self.spacing(1) } else { 0.0 }]
    }

    /// Index of the neighbour shifted by `offset` steps along `axis`, with
    /// periodic wrap.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let (i, j) = self.decompose(idx);
        let nloc = self.sizes[axis];
        let cur = if axis == 0 { i } else { j };
        let shifted = (cur as isize + offset).rem_euclid(nloc as isize) as usize;
        if axis == 0 {
            self.index(shifted, j)
        } else {
            self.index(i, shifted)
        }
    }

    /// Grid with every axis refined by a factor of two (same lengths).
    pub fn refined(&self) -> Result<Self> {
        let sizes: Vec<usize> = (0..self.n).map(|k| 2 * self.sizes[k]).collect();
        let lengths: Vec<f64> = (0..self.n).map(|k| self.lengths[k]).collect();
        Self::new(self.n, &sizes, &lengths)
    }
}

/// A scalar function sampled on a [`PeriodicGrid`], stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: PeriodicGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self { grid, data: vec![0.0; grid.num_points()] }
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self { grid, data: vec![c; grid.num_points()] }
    }

    pub fn from_fn(grid: PeriodicGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let data = (0..grid.num_points())
            .map(|idx| {
                let p = grid.point(idx);
                f(&p[..grid.dim()])
            })
            .collect();
        Self { grid, data }
    }

    pub fn from_vec(grid: PeriodicGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.num_points() {
            return Err(Error::Grid(format!(
                "field length {} does not match grid with {} points",
                data.len(),
                grid.num_points()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.data[idx]
    }

    /// Second-order central difference along `axis`, periodic wrap.
    pub fn partial_derivative(&self, axis: usize) -> ScalarField {
        let g = self.grid;
        let inv2h = 1.0 / (2.0 * g.spacing(axis));
        let mut out = ScalarField::zeros(g);
        for idx in 0..g.num_points() {
            let fp = self.data[g.neighbor(idx, axis, 1)];
            let fm = self.data[g.neighbor(idx, axis, -1)];
            out.data[idx] = (fp - fm) * inv2h;
        }
        out
    }

    /// Second-order pure or mixed second difference.
    pub fn second_partial(&self, axis_k: usize, axis_l: usize) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        if axis_k == axis_l {
            let inv_h2 = 1.0 / (g.spacing(axis_k) * g.spacing(axis_k));
            for idx in 0..g.num_points() {
                let fp = self.data[g.neighbor(idx, axis_k, 1)];
                let fm = self.data[g.neighbor(idx, axis_k, -1)];
                out.data[idx] = (fp - 2.0 * self.data[idx] + fm) * inv_h2;
            }
        } else {
            let inv4h = 1.0 / (4.0 * g.spacing(axis_k) * g.spacing(axis_l));
            for idx in 0..g.num_points() {
                let pp = self.data[g.neighbor(g.neighbor(idx, axis_k, 1), axis_l, 1)];
                let pm = self.data[g.neighbor(g.neighbor(idx, axis_k, 1), axis_l, -1)];
                let mp = self.data[g.neighbor(g.neighbor(idx, axis_k, -1), axis_l, 1)];
                let mm = self.data[g.neighbor(g.neighbor(idx, axis_k, -1), axis_l, -1)];
                out.data[idx] = (pp - pm - mp + mm) * inv4h;
            }
        }
        out
    }

    /// Equispaced quadrature sum(f) * prod(h_k); spectrally accurate for
    /// smooth periodic integrands.
    pub fn integrate(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { context: context.to_string() })
        }
    }

    /// Field translated by `steps` lattice points along `axis`.
    pub fn shifted(&self, axis: usize, steps: isize) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        for idx in 0..g.num_points() {
            out.data[idx] = self.data[g.neighbor(idx, axis, steps)];
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_scaled(&self, other: &ScalarField, factor: f64) -> ScalarField {
        self.zip_with(other, |a, b| a + factor * b)
    }

    /// Writes the field as CSV: a header comment recording the grid, then
    /// one value per line (n = 1) or one row per slow index (n = 2).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid;
        match g.dim() {
            1 => {
                writeln!(w, "# n=1 N={} L={:.17e}", g.size(0), g.length(0))?;
                for v in &self.data {
                    writeln!(w, "{v:.17e}")?;
                }
            }
            _ => {
                writeln!(
                    w,
                    "# n=2 N0={} N1={} L0={:.17e} L1={:.17e}",
                    g.size(0),
                    g.size(1),
                    g.length(0),
                    g.length(1)
                )?;
                for i in 0..g.size(0) {
                    let row: Vec<String> =
                        (0..g.size(1)).map(|j| format!("{:.17e}", self.data[g.index(i, j)])).collect();
                    writeln!(w, "{}", row.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_csv(&mut f)
    }

    /// Parses the CSV layout produced by [`ScalarField::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<ScalarField> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::FileFormat { path: "<csv>".into(), detail: "empty file".into() })??;
        let grid = parse_field_header(&header)?;
        let mut data = Vec::with_capacity(grid.num_points());
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|e| Error::FileFormat {
                    path: "<csv>".into(),
                    detail: format!("bad number {tok:?}: {e}"),
                })?;
                data.push(v);
            }
        }
        ScalarField::from_vec(grid, data)
    }

    pub fn read_csv_file(path: &Path) -> Result<ScalarField> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(BufReader::new(f))
    }
}

fn parse_field_header(header: &str) -> Result<PeriodicGrid> {
    let err = |detail: String| Error::FileFormat { path: "<csv>".into(), detail };
    let mut n = None;
    let mut ns: Vec<(usize, usize)> = Vec::new();
    let mut ls: Vec<(usize, f64)> = Vec::new();
    for tok in header.trim_start_matches('#').split_whitespace() {
        let Some((key, val)) = tok.split_once('=') else { continue };
        match key {
            "n" => n = Some(val.parse::<usize>().map_err(|e| err(format!("bad n: {e}")))?),
            "N" => ns.push((0, val.parse().map_err(|e| err(format!("bad N: {e}")))?)),
            "L" => ls.push((0, val.parse().map_err(|e| err(format!("bad L: {e}")))?)),
            k if k.starts_with('N') => {
                let axis: usize = k[1..].parse().map_err(|e| err(format!("bad axis: {e}")))?;
                ns.push((axis, val.parse().map_err(|e| err(format!("bad N: {e}")))?));
            }
            k if k.starts_with('L') => {
                let axis: usize = k[1..].parse().map_err(|e| err(format!("bad axis: {e}")))?;
                ls.push((axis, val.parse().map_err(|e| err(format!("bad L: {e}")))?));
            }
            _ => {}
        }
    }
    let n = n.ok_or_else(|| err("header missing n=".into()))?;
    ns.sort_by_key(|&(a, _)| a);
    ls.sort_by_key(|&(a, _)| a);
    let sizes: Vec<usize> = ns.into_iter().map(|(_, v)| v).collect();
    let lengths: Vec<f64> = ls.into_iter().map(|(_, v)| v).collect();
    PeriodicGrid::new(n, &sizes, &lengths)
}

/// Symmetric n x n tensor field, one scalar field per independent component.
/// Component order: (0,0), (0,1), (1,1); n = 1 uses only (0,0).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    grid: PeriodicGrid,
    comps: [ScalarField; 3],
}

impl SymTensorField {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            comps: [
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ],
        }
    }

    #[inline]
    fn comp_index(i: usize, j: usize) -> usize {
        match (i.min(j), i.max(j)) {
            (0, 0) => 0,
            (0, 1) => 1,
            (1, 1) => 2,
            _ => panic!("component index out of range"),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize, i: usize, j: usize) -> f64 {
        self.comps[Self::comp_index(i, j)].at(idx)
    }

    #[inline]
    pub fn set(&mut self, idx: usize, i: usize, j: usize, v: f64) {
        self.comps[Self::comp_index(i, j)].data_mut()[idx] = v;
    }

    /// Full matrix at a point (upper-left n x n block meaningful).
    #[inline]
    pub fn matrix(&self, idx: usize) -> [[f64; 2]; 2] {
        let a = self.comps[0].at(idx);
        let b = self.comps[1].at(idx);
        let c = self.comps[2].at(idx);
        [[a, b], [b, c]]
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[Self::comp_index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.n {
            1 => write!(f, "T^1 grid N={} L={:.6}", self.sizes[0], self.lengths[0]),
            _ => write!(
                f,
                "T^2 grid {}x{} L=({:.6}, {:.6})",
                self.sizes[0], self.sizes[1], self.lengths[0], self.lengths[1]
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(nn: usize) -> PeriodicGrid {
        PeriodicGrid::new(1, &[nn], &[2.0 * PI]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid::new(3, &[8, 8, 8], &[1.0, 1.0, 1.0]).is_err());
        assert!(PeriodicGrid::new(1, &[7], &[1.0]).is_err());
        assert!(PeriodicGrid::new(1, &[9], &[1.0]).is_err());
        assert!(PeriodicGrid::new(1, &[8], &[-1.0]).is_err());
        assert!(PeriodicGrid::new(2, &[8], &[1.0]).is_err());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = grid1(64);
        let f = ScalarField::constant(g, 3.7);
        assert_eq!(f.partial_derivative(0).sup_norm(), 0.0);
        assert_eq!(f.second_partial(0, 0).sup_norm(), 0.0);
    }

    #[test]
    fn derivative_of_sine_matches_taylor_bound() {
        let g = grid1(256);
        let l = g.length(0);
        let k = 2.0 * PI / l;
        let f = ScalarField::from_fn(g, |x| (k * x[0]).sin());
        let df = f.partial_derivative(0);
        let exact = ScalarField::from_fn(g, |x| k * (k * x[0]).cos());
        let err = df.add_scaled(&exact, -1.0).sup_norm();
        assert!(err < 1e-3 * k, "central difference error {err} too large");
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let k = 1.0;
        let mut prev_err = None;
        for nn in [64usize, 128, 256] {
            let g = grid1(nn);
            let f = ScalarField::from_fn(g, |x| (k * x[0]).sin());
            let df = f.partial_derivative(0);
            let exact = ScalarField::from_fn(g, |x| k * (k * x[0]).cos());
            let err = df.add_scaled(&exact, -1.0).sup_norm();
            if let Some(p) = prev_err {
                let ratio: f64 = p / err;
                assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} outside [3.5, 4.5]");
            }
            prev_err = Some(err);
        }
    }

    #[test]
    fn second_partials_match_analytic() {
        let g = grid1(256);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let d2 = f.second_partial(0, 0);
        let exact = ScalarField::from_fn(g, |x| -x[0].sin());
        assert!(d2.add_scaled(&exact, -1.0).sup_norm() < 1e-3);

        // Cross stencil on sin(x)sin(y) is exact up to (1 - (sin h / h)^2),
        // about h^2/3 = 3.3e-3 at this resolution.
        let g2 = PeriodicGrid::new(2, &[64, 64], &[2.0 * PI, 2.0 * PI]).unwrap();
        let f2 = ScalarField::from_fn(g2, |x| x[0].sin() * x[1].sin());
        let dxy = f2.second_partial(0, 1);
        let exact2 = ScalarField::from_fn(g2, |x| x[0].cos() * x[1].cos());
        assert!(dxy.add_scaled(&exact2, -1.0).sup_norm() < 5e-3);
    }

    #[test]
    fn integrate_constant_and_sine() {
        let g = grid1(128);
        assert!((ScalarField::constant(g, 1.0).integrate() - 2.0 * PI).abs() < 1e-13);
        let f = ScalarField::from_fn(g, |x| 1.0 + x[0].sin());
        assert!((f.integrate() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn integrate_matches_fine_grid_oracle() {
        let coarse = grid1(256);
        let fine = grid1(4096);
        let f = |x: &[f64]| x[0].sin().exp();
        let ic = ScalarField::from_fn(coarse, f).integrate();
        let io = ScalarField::from_fn(fine, f).integrate();
        assert!((ic - io).abs() < 1e-12, "difference {}", (ic - io).abs());
    }

    #[test]
    fn full_period_shift_is_identity() {
        let g = grid1(32);
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).cos() + 0.3 * x[0].sin());
        assert_eq!(f.shifted(0, 32), f);
        assert_eq!(f.shifted(0, -32), f);

        let g2 = PeriodicGrid::new(2, &[16, 8], &[1.0, 2.0]).unwrap();
        let f2 = ScalarField::from_fn(g2, |x| (2.0 * PI * x[0]).sin() + (PI * x[1]).cos());
        assert_eq!(f2.shifted(0, 16).shifted(1, 8), f2);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid1(16);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = ScalarField::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(f, back);

        let g2 = PeriodicGrid::new(2, &[8, 10], &[1.0, 3.0]).unwrap();
        let f2 = ScalarField::from_fn(g2, |x| x[0] + 10.0 * x[1]);
        let mut buf2 = Vec::new();
        f2.write_csv(&mut buf2).unwrap();
        let back2 = ScalarField::read_csv(std::io::Cursor::new(buf2)).unwrap();
        assert_eq!(f2, back2);
    }

    #[test]
    fn sym_tensor_field_symmetric_access() {
        let g = PeriodicGrid::new(2, &[8, 8], &[1.0, 1.0]).unwrap();
        let mut t = SymTensorField::zeros(g);
        t.set(5, 0, 1, 2.5);
        assert_eq!(t.at(5, 1, 0), 2.5);
        let m = t.matrix(5);
        assert_eq!(m[0][1], m[1][0]);
    }
}
