//! JSON run configuration. Unknown keys are rejected everywhere so a
//! typo never silently changes a run.

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use nonherm::grid::{make_grid, Grid};
use nonherm::hamiltonian::{build_hamiltonian, two_level_pt, PotentialSpec};
use nonherm::invariants::{HamiltonianSchedule, Variant};
use nonherm::linalg::{vec_norm, C64, CVec};
use nonherm::{Basis, Error, Operator, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<GridConfig>,
    pub potential: Option<PotentialSpec>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub times: Option<TimesConfig>,
    pub initial_state: Option<InitialState>,
    pub outputs: Option<PathBuf>,
    pub invariant: Option<InvariantConfig>,
}

fn default_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub x_max: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_max: f64,
    pub samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum InitialState {
    Gaussian { center: f64, width: f64, momentum: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantConfig {
    pub schedule: ScheduleConfig,
    pub variant: VariantConfig,
    pub step: Option<f64>,
    /// Initial invariant as rows of [re, im] pairs; defaults to H(0).
    pub i0: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ScheduleConfig {
    Rabi {
        delta: f64,
        amp: f64,
        #[serde(default)]
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum VariantConfig {
    Plain,
    Primed,
}

impl VariantConfig {
    pub fn to_variant(self) -> Variant {
        match self {
            VariantConfig::Plain => Variant::Plain,
            VariantConfig::Primed => Variant::Primed,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Input("this run needs a \"grid\" section".into()))?;
        make_grid(g.n, g.x_max, g.hbar, g.mass)
    }

    /// The Hamiltonian and the grid it lives on. TwoLevelPT runs get a
    /// two-point symmetric grid so that parity is defined.
    pub fn hamiltonian(&self) -> Result<(Operator, Arc<Grid>)> {
        let spec = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::Input("this run needs a \"potential\" section".into()))?;
        if let PotentialSpec::TwoLevelPT { gamma, kappa } = spec {
            let grid = make_grid(2, 1.0, 1.0, 1.0)?;
            let h = Operator::new(
                two_level_pt(*gamma, *kappa).into_matrix(),
                Basis::Position,
                Arc::clone(&grid),
            )?;
            return Ok((h, grid));
        }
        let grid = self.grid()?;
        let h = build_hamiltonian(&grid, spec)?;
        Ok((h, grid))
    }

    pub fn sample_times(&self) -> Result<Vec<f64>> {
        let t = self.times.as_ref().map(|t| (t.t_max, t.samples)).unwrap_or((5.0, 51));
        if !(t.0 > 0.0) || t.1 < 2 {
            return Err(Error::Input("times.t_max must be positive and samples >= 2".into()));
        }
        Ok((0..t.1).map(|k| t.0 * k as f64 / (t.1 - 1) as f64).collect())
    }

    pub fn initial_state(&self, grid: &Grid) -> Result<CVec> {
        let state = match &self.initial_state {
            None => gaussian(grid, 0.0, 1.0, 0.0),
            Some(InitialState::Gaussian { center, width, momentum }) => {
                if !(*width > 0.0) {
                    return Err(Error::Input("initial_state width must be positive".into()));
                }
                gaussian(grid, *center, *width, *momentum)
            }
            Some(InitialState::File { path }) => read_state(path, grid.n())?,
        };
        Ok(state)
    }

    pub fn schedule(&self) -> Result<(HamiltonianSchedule, &InvariantConfig)> {
        let inv = self
            .invariant
            .as_ref()
            .ok_or_else(|| Error::Input("this run needs an \"invariant\" section".into()))?;
        let ScheduleConfig::Rabi { delta, amp, gamma } = inv.schedule;
        let schedule = if gamma == 0.0 {
            HamiltonianSchedule::rabi(delta, amp)
        } else {
            HamiltonianSchedule::rabi_lossy(delta, amp, gamma)
        };
        Ok((schedule, inv))
    }
}

impl InvariantConfig {
    pub fn initial_operator(&self, schedule: &HamiltonianSchedule) -> Result<Operator> {
        match &self.i0 {
            None => Ok(schedule.at(0.0)),
            Some(rows) => {
                let n = rows.len();
                if n != schedule.dim() || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Input(format!(
                        "i0 must be a {0}x{0} matrix of [re, im] pairs",
                        schedule.dim()
                    )));
                }
                let m = Array2::from_shape_fn((n, n), |(i, j)| {
                    C64::new(rows[i][j][0], rows[i][j][1])
                });
                Operator::model(m)
            }
        }
    }
}

fn gaussian(grid: &Grid, center: f64, width: f64, momentum: f64) -> CVec {
    let mut v: CVec = Array1::from_iter(grid.points().iter().map(|&x| {
        let amp = (-(x - center).powi(2) / (4.0 * width * width)).exp();
        let phase = momentum * x / grid.hbar();
        C64::new(phase.cos(), phase.sin()) * amp
    }));
    let n = vec_norm(&v);
    v.mapv_inplace(|z| z / n);
    v
}

/// CSV state file: one "re,im" row per grid point; normalized on load.
fn read_state(path: &PathBuf, n: usize) -> Result<CVec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read state file {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Input(format!(
                "state file line {}: expected \"re,im\"",
                lineno + 1
            )));
        }
        let re: f64 = parts[0]
            .parse()
            .map_err(|e| Error::Input(format!("state file line {}: {e}", lineno + 1)))?;
        let im: f64 = parts[1]
            .parse()
            .map_err(|e| Error::Input(format!("state file line {}: {e}", lineno + 1)))?;
        values.push(C64::new(re, im));
    }
    if values.len() != n {
        return Err(Error::Input(format!(
            "state file holds {} samples but the grid has {n}",
            values.len()
        )));
    }
    let mut v = Array1::from_vec(values);
    let nn = vec_norm(&v);
    if nn == 0.0 {
        return Err(Error::Input("state file holds the zero vector".into()));
    }
    v.mapv_inplace(|z| z / nn);
    Ok(v)
}
