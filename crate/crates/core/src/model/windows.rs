use crate::error::{Error, Result};
use crate::pdegen::Trajectory;
use crate::spectral::RealField;

/// `m` consecutive snapshots stacked as channels (oldest first) and the `r`
/// snapshots that follow them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub input: RealField,
    pub targets: Vec<RealField>,
}

impl WindowSample {
    /// The newest input snapshot, the reconstruction target.
    pub fn last_input(&self) -> RealField {
        let c = self.targets.first().map_or(1, RealField::channels);
        let n = self.input.points();
        let data = self.input.data()[self.input.data().len() - c * n..].to_vec();
        RealField::new(self.input.size(), self.input.dim(), c, data).expect("window layout")
    }
}

/// Delay-embedded training windows starting at `0, stride, 2·stride, ...`.
pub fn build_hankel_windows(traj: &Trajectory, m: usize, r: usize, stride: usize) -> Result<Vec<WindowSample>> {
    if m == 0 || stride == 0 {
        return Err(Error::InvalidParameter("window depth and stride must be >= 1".into()));
    }
    let t = traj.len();
    if t < m + r {
        return Err(Error::TrajectoryTooShort { steps: t, needed: m + r });
    }
    let count = (t - m - r) / stride + 1;
    let first = &traj.snapshots[0];
    let (s, dim) = (first.size(), first.dim());
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * stride;
        let mut data = Vec::with_capacity(m * first.data().len());
        for snap in &traj.snapshots[start..start + m] {
            data.extend_from_slice(snap.data());
        }
        let input = RealField::new(s, dim, m * first.channels(), data)?;
        let targets = traj.snapshots[start + m..start + m + r].to_vec();
        out.push(WindowSample { input, targets });
    }
    Ok(out)
}
