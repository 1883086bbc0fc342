//! Fixed-step classical Runge-Kutta integration and dataset assembly.
//!
//! Ground truth for every experiment comes from [`simulate`]; the training
//! dataset is the simulated output sampled on the same grid, split 60/40
//! into train and test indices by a seeded shuffle (the initial time is
//! always a training sample).

use crate::error::{Error, Result};
use crate::systems::SystemModel;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

/// One classical fourth-order Runge-Kutta step of size `dt` from `(x, t)`.
pub fn rk4_step<F>(f: &F, x: &[f64], t: f64, dt: f64) -> Vec<f64>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    let n = x.len();
    let k1 = f(x, t);
    let mid1: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(&mid1, t + 0.5 * dt);
    let mid2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k2[i]).collect();
    let k3 = f(&mid2, t + 0.5 * dt);
    let end: Vec<f64> = (0..n).map(|i| x[i] + dt * k3[i]).collect();
    let k4 = f(&end, t + dt);
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// A uniformly sampled state history: `times[i] = i * dt`, one state row per
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `len() x n_x`.
    pub states: Array2<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_x(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, i: usize) -> Vec<f64> {
        self.states.row(i).to_vec()
    }

    /// Write as CSV with header `t,x1,...,xn`, 17-significant-digit values,
    /// LF line endings.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t");
        for i in 1..=self.n_x() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (i, &t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for j in 0..self.n_x() {
                out.push_str(&format!(",{:.16e}", self.states[(i, j)]));
            }
            out.push('\n');
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let bad = |reason: String| Error::MalformedFile {
            path: path.display().to_string(),
            reason,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(bad("header must be t,x1,...,xn".into()));
        }
        let n_x = cols.len() - 1;
        let mut times = Vec::new();
        let mut flat = Vec::new();
        for (row, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_x + 1 {
                return Err(bad(format!(
                    "row {} has {} fields, want {}",
                    row + 2,
                    fields.len(),
                    n_x + 1
                )));
            }
            let mut parsed = fields.iter().map(|s| s.parse::<f64>());
            let t = parsed
                .next()
                .unwrap()
                .map_err(|_| bad(format!("row {}: bad time", row + 2)))?;
            times.push(t);
            for v in parsed {
                flat.push(v.map_err(|_| bad(format!("row {}: bad value", row + 2)))?);
            }
        }
        let states =
            Array2::from_shape_vec((times.len(), n_x), flat).map_err(|e| bad(e.to_string()))?;
        Ok(Trajectory { times, states })
    }
}

/// Integrate the full system right-hand side from `x0` over `[0, t_max]`
/// with fixed step `dt`, producing `floor(t_max/dt) + 1` uniformly spaced
/// samples. Fails if any state stops being finite.
pub fn simulate(sys: &SystemModel, x0: &[f64], t_max: f64, dt: f64) -> Result<Trajectory> {
    assert!(dt > 0.0 && t_max >= 0.0, "need dt > 0 and t_max >= 0");
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let n_x = x0.len();
    let mut states = Array2::zeros((steps + 1, n_x));
    let mut times = Vec::with_capacity(steps + 1);
    let rhs = |x: &[f64], t: f64| sys.rhs(x, t);
    let mut x = x0.to_vec();
    for i in 0..=steps {
        let t = i as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrajectoryEscape { time: t });
        }
        times.push(t);
        for j in 0..n_x {
            states[(i, j)] = x[j];
        }
        if i < steps {
            x = rk4_step(&rhs, &x, t, dt);
        }
    }
    Ok(Trajectory { times, states })
}

/// Measurement samples on the trajectory grid plus a seeded 60/40
/// train/test index split. `y` rows are computed exactly as `C x`.
#[derive(Debug, Clone)]
pub struct TrainingDataset {
    pub times: Vec<f64>,
    /// `len() x m` measured outputs.
    pub y: Array2<f64>,
    /// Sorted; always contains index 0.
    pub train_idx: Vec<usize>,
    /// Sorted; disjoint from `train_idx`.
    pub test_idx: Vec<usize>,
    pub xhat0: Vec<f64>,
}

impl TrainingDataset {
    pub fn train_times(&self) -> Vec<f64> {
        self.train_idx.iter().map(|&i| self.times[i]).collect()
    }

    /// `m x n_train` measurement block in train-index order.
    pub fn train_y_block(&self) -> Array2<f64> {
        let m = self.y.ncols();
        let mut block = Array2::zeros((m, self.train_idx.len()));
        for (col, &i) in self.train_idx.iter().enumerate() {
            for r in 0..m {
                block[(r, col)] = self.y[(i, r)];
            }
        }
        block
    }
}

/// Sample the output along `traj` and split indices 60/40 with the seeded
/// shuffle; index 0 (the initial time) always lands in the train set.
pub fn build_dataset(traj: &Trajectory, sys: &SystemModel, split_seed: u64) -> TrainingDataset {
    let n = traj.len();
    let m = sys.m;
    let mut y = Array2::zeros((n, m));
    for i in 0..n {
        let yi = sys.output(&traj.state(i));
        for r in 0..m {
            y[(i, r)] = yi[r];
        }
    }
    let train_count = ((0.6 * n as f64).round() as usize).clamp(1, n);
    let mut rest: Vec<usize> = (1..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    rest.shuffle(&mut rng);
    let mut train_idx: Vec<usize> = std::iter::once(0)
        .chain(rest[..train_count - 1].iter().copied())
        .collect();
    let mut test_idx: Vec<usize> = rest[train_count - 1..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    TrainingDataset {
        times: traj.times.clone(),
        y,
        train_idx,
        test_idx,
        xhat0: sys.xhat0.clone(),
    }
}
