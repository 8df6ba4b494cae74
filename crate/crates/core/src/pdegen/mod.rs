//! Ground-truth trajectories for the 1-D Burgers and 2-D Navier–Stokes
//! equations on the periodic unit torus.

mod burgers;
mod dataset;
mod navier_stokes;

pub use burgers::burgers_solve;
pub use dataset::{build_dataset, solve_seeded, Dataset, Normalizer};
pub use navier_stokes::{make_forcing, ns_vorticity_solve};

use crate::error::{Error, Result};
use crate::spectral::{check_size, GrfParams, RealField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Burgers1d,
    NavierStokes2d,
}

impl PdeKind {
    pub fn dim(self) -> usize {
        match self {
            PdeKind::Burgers1d => 1,
            PdeKind::NavierStokes2d => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    None,
    /// `0.1 (sin 2π(x+y) + cos 2π(x+y))`, see [`make_forcing`].
    Standard,
    Custom(RealField),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub kind: PdeKind,
    pub nu: f64,
    pub forcing: Forcing,
    pub dt_internal: f64,
    pub dt_record: f64,
    pub t_end: f64,
    pub s: usize,
    pub ic: GrfParams,
}

impl PdeProblem {
    /// Burgers with ν = 0.1 recorded every 0.025 up to t = 1 (41 snapshots).
    pub fn burgers_default(s: usize) -> Self {
        Self {
            kind: PdeKind::Burgers1d,
            nu: 0.1,
            forcing: Forcing::None,
            dt_internal: 1e-4,
            dt_record: 0.025,
            t_end: 1.0,
            s,
            ic: GrfParams::burgers(0),
        }
    }

    /// Forced Navier–Stokes on a 64×64 grid, recorded every unit of time.
    /// `t_end` is 50 for ν = 1e-3 and 30 otherwise.
    pub fn navier_stokes_default(nu: f64) -> Self {
        Self {
            kind: PdeKind::NavierStokes2d,
            nu,
            forcing: Forcing::Standard,
            dt_internal: 1e-3,
            dt_record: 1.0,
            t_end: if nu >= 1e-3 { 50.0 } else { 30.0 },
            s: 64,
            ic: GrfParams::navier_stokes(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Internal steps between two recorded snapshots.
    pub fn steps_per_record(&self) -> Result<usize> {
        let ratio = self.dt_record / self.dt_internal;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "dt_record {} is not an integer multiple of dt_internal {}",
                self.dt_record, self.dt_internal
            )));
        }
        Ok(n as usize)
    }

    /// Number of recorded intervals, `t_end / dt_record`.
    pub fn record_count(&self) -> Result<usize> {
        let ratio = self.t_end / self.dt_record;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "dt_record {} does not divide t_end {}",
                self.dt_record, self.t_end
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        check_size(self.s)?;
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be > 0, got {}", self.nu)));
        }
        if !(self.dt_internal > 0.0) || self.dt_internal > self.dt_record {
            return Err(Error::InvalidParameter(
                "need 0 < dt_internal <= dt_record".into(),
            ));
        }
        self.steps_per_record()?;
        self.record_count()?;
        self.ic.validate(self.dim())?;
        if self.kind == PdeKind::Burgers1d && self.forcing != Forcing::None {
            return Err(Error::InvalidParameter("Burgers problems take no forcing".into()));
        }
        Ok(())
    }

    pub(crate) fn forcing_field(&self) -> Option<RealField> {
        match &self.forcing {
            Forcing::None => None,
            Forcing::Standard => Some(make_forcing(self.s)),
            Forcing::Custom(f) => Some(f.clone()),
        }
    }
}

/// Recorded snapshots of one solution, `t = 0, ε, 2ε, …, t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<RealField>,
    pub dt_record: f64,
    pub problem: PdeProblem,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn size(&self) -> usize {
        self.problem.s
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn channels(&self) -> usize {
        self.snapshots.first().map_or(1, RealField::channels)
    }

    /// Strided subsampling in space; the time axis is untouched.
    pub fn downsample(&self, factor: usize) -> Result<Trajectory> {
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| s.downsample(factor))
            .collect::<Result<Vec<_>>>()?;
        let mut problem = self.problem.clone();
        problem.s /= factor;
        if let Forcing::Custom(f) = &problem.forcing {
            problem.forcing = Forcing::Custom(f.downsample(factor)?);
        }
        Ok(Trajectory {
            snapshots,
            dt_record: self.dt_record,
            problem,
        })
    }
}

/// Drives a single-step integrator, recording every `dt_record` and failing
/// on the first non-finite state.
pub(crate) fn integrate<S>(
    problem: &PdeProblem,
    state: &mut S,
    mut step: impl FnMut(&mut S) -> bool,
    mut snapshot: impl FnMut(&S) -> RealField,
) -> Result<Trajectory> {
    problem.validate()?;
    let per_record = problem.steps_per_record()?;
    let records = problem.record_count()?;
    let mut snapshots = Vec::with_capacity(records + 1);
    snapshots.push(snapshot(state));
    let mut n = 0;
    for _ in 0..records {
        for _ in 0..per_record {
            n += 1;
            if !step(state) {
                return Err(Error::SolverBlowUp { step: n });
            }
        }
        snapshots.push(snapshot(state));
    }
    Ok(Trajectory {
        snapshots,
        dt_record: problem.dt_record,
        problem: problem.clone(),
    })
}

/// Keeps `|k| < s/3` per axis.
pub(crate) fn dealias_keep(k: i64, s: usize) -> bool {
    3 * k.unsigned_abs() < s as u64
}
