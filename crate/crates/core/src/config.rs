//! Run configuration: a JSON file selects the metric family, grid, and
//! curvature schedule; command-line flags override individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::FoliateOptions;
use crate::grid::PeriodicGrid;
use crate::metric::MetricSpec;
use crate::solver::NewtonConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// One of "minkowski", "collapse", "wavy", "desitter", "tabulated".
    pub family: String,
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Torus circumferences per axis; defaults to 2 pi each.
    pub lengths: Vec<f64>,
    /// Grid points per axis; defaults to 128 (one dimension) or 48 per axis.
    pub grid: Vec<usize>,

    /// Scale-factor polynomial coefficients for "collapse", constant first.
    pub coefficients: Vec<f64>,
    /// Time domain for "collapse".
    pub domain: (f64, f64),
    /// Ripple amplitude for "wavy".
    pub eps: f64,
    /// Expansion rate for "desitter".
    pub h0: f64,
    /// Lattice file for "tabulated".
    pub metric_file: Option<PathBuf>,

    /// First prescribed mean curvature of the schedule.
    pub tau0: f64,
    pub tau_max: f64,
    /// Number of recorded slices.
    pub slices: usize,

    /// Newton residual target (sup norm).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let newton = NewtonConfig::default();
        let fold = FoliateOptions::default();
        Self {
            family: "collapse".to_string(),
            dim: 1,
            lengths: Vec::new(),
            grid: Vec::new(),
            coefficients: vec![1.0, -1.0],
            domain: (-3.0, 1.0),
            eps: 0.05,
            h0: 1.0,
            metric_file: None,
            tau0: fold.tau0,
            tau_max: fold.tau_max,
            slices: fold.slices,
            tol: newton.tol,
            max_iter: newton.max_iter,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_slice(&bytes).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn lengths(&self) -> Vec<f64> {
        if self.lengths.is_empty() {
            vec![2.0 * std::f64::consts::PI; self.dim]
        } else {
            self.lengths.clone()
        }
    }

    pub fn grid_sizes(&self) -> Vec<usize> {
        if self.grid.is_empty() {
            match self.dim {
                1 => vec![128],
                _ => vec![48; self.dim],
            }
        } else {
            self.grid.clone()
        }
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.dim, &self.grid_sizes(), &self.lengths())
    }

    pub fn metric(&self) -> Result<MetricSpec> {
        let lengths = self.lengths();
        match self.family.as_str() {
            "minkowski" => MetricSpec::minkowski(self.dim, &lengths),
            "collapse" => {
                MetricSpec::frw_collapse(self.dim, &lengths, &self.coefficients, self.domain)
            }
            "wavy" => MetricSpec::wavy_collapse(self.dim, &lengths, self.eps),
            "desitter" => MetricSpec::desitter(self.dim, &lengths, self.h0),
            "tabulated" => {
                let path = self.metric_file.as_ref().ok_or_else(|| {
                    Error::Config("family \"tabulated\" needs metric_file".into())
                })?;
                let m = MetricSpec::tabulated_from_file(path)?;
                if m.dim() != self.dim {
                    return Err(Error::Config(format!(
                        "metric file has dimension {}, config says {}",
                        m.dim(),
                        self.dim
                    )));
                }
                Ok(m)
            }
            other => Err(Error::Config(format!(
                "unknown family {other:?} (expected minkowski, collapse, wavy, desitter, or tabulated)"
            ))),
        }
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig { tol: self.tol, max_iter: self.max_iter, ..Default::default() }
    }

    pub fn foliate_options(&self) -> FoliateOptions {
        FoliateOptions {
            tau0: self.tau0,
            tau_max: self.tau_max,
            slices: self.slices,
            newton: self.newton(),
            ..Default::default()
        }
    }
}
