use super::{burgers_solve, ns_vorticity_solve, PdeKind, PdeProblem, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{grf_sample, GrfParams};
use serde::{Deserialize, Serialize};

/// Per-channel affine normalization fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Mean and population standard deviation over every snapshot and grid
    /// point. A channel without variance gets `std = 1`.
    pub fn fit(trajectories: &[Trajectory]) -> Self {
        let channels = trajectories.first().map_or(1, Trajectory::channels);
        let mut sum = vec![0.0; channels];
        let mut sum_sq = vec![0.0; channels];
        let mut count = 0usize;
        for snap in trajectories.iter().flat_map(|t| &t.snapshots) {
            for c in 0..channels {
                for &v in snap.channel(c) {
                    sum[c] += v;
                    sum_sq[c] += v * v;
                }
            }
            count += snap.points();
        }
        let n = count.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / n - m * m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn normalize_in_place(&self, data: &mut [f64], channel: usize) {
        let (m, s) = (self.mean[channel], self.std[channel]);
        data.iter_mut().for_each(|v| *v = (*v - m) / s);
    }

    pub fn denormalize_in_place(&self, data: &mut [f64], channel: usize) {
        let (m, s) = (self.mean[channel], self.std[channel]);
        data.iter_mut().for_each(|v| *v = *v * s + m);
    }

    pub fn normalize_trajectory(&self, traj: &Trajectory) -> Trajectory {
        let mut out = traj.clone();
        for snap in &mut out.snapshots {
            for c in 0..snap.channels() {
                self.normalize_in_place(snap.channel_mut(c), c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: PdeProblem,
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    pub normalizer: Normalizer,
}

impl Dataset {
    /// Assembles a dataset from existing trajectories, fitting the normalizer
    /// on `train`.
    pub fn from_parts(problem: PdeProblem, train: Vec<Trajectory>, test: Vec<Trajectory>) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::InvalidParameter("dataset needs at least one training trajectory".into()))?;
        let (s, steps, dt) = (first.size(), first.len(), first.dt_record);
        for t in train.iter().chain(&test) {
            if t.size() != s || t.len() != steps || t.dt_record != dt {
                return Err(Error::ShapeMismatch(
                    "trajectories must share grid size, snapshot count and dt_record".into(),
                ));
            }
        }
        let normalizer = Normalizer::fit(&train);
        Ok(Self {
            problem,
            train,
            test,
            normalizer,
        })
    }

    /// Strided spatial subsampling of every trajectory; the normalizer is kept.
    pub fn downsample(&self, factor: usize) -> Result<Dataset> {
        let map = |ts: &[Trajectory]| ts.iter().map(|t| t.downsample(factor)).collect::<Result<Vec<_>>>();
        let mut problem = self.problem.clone();
        problem.s /= factor;
        Ok(Dataset {
            problem,
            train: map(&self.train)?,
            test: map(&self.test)?,
            normalizer: self.normalizer.clone(),
        })
    }

    pub fn size(&self) -> usize {
        self.problem.s
    }

    pub fn steps(&self) -> usize {
        self.train.first().map_or(0, Trajectory::len)
    }
}

/// Solves one trajectory whose initial condition is drawn with `seed`.
pub fn solve_seeded(problem: &PdeProblem, seed: u64) -> Result<Trajectory> {
    let ic = GrfParams { seed, ..problem.ic };
    let init = grf_sample(&ic, problem.s, problem.dim())?;
    let mut traj = match problem.kind {
        PdeKind::Burgers1d => burgers_solve(problem, &init)?,
        PdeKind::NavierStokes2d => ns_vorticity_solve(problem, &init)?,
    };
    traj.problem.ic.seed = seed;
    Ok(traj)
}

/// Trajectory `i` uses initial-condition seed `base_seed + i`; the first
/// `n_train` form the training split.
pub fn build_dataset(problem: &PdeProblem, n_train: usize, n_test: usize, base_seed: u64) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidParameter("n_train and n_test must be >= 1".into()));
    }
    problem.validate()?;
    let mut trajectories = (0..n_train + n_test)
        .map(|i| {
            solve_seeded(problem, base_seed + i as u64).map_err(|e| Error::Trajectory {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let test = trajectories.split_off(n_train);
    let mut problem = problem.clone();
    problem.ic.seed = base_seed;
    Dataset::from_parts(problem, trajectories, test)
}
