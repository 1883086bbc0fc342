//! Test-time observer replay and error metrics.
//!
//! After training, the network is used two ways:
//!
//! * **Replay** — integrate the observer ODE
//!   `dx̂/dt = f(x̂,t) + B u(t) + L(t)(y(t) − C x̂)` with RK4, reading the
//!   time-varying gain `L(t)` from the trained gain head at every solver
//!   stage time and the measurements from a linear interpolant over the
//!   sampled outputs.
//! * **Direct prediction** — evaluate the network state head on a time grid.
//!
//! Both produce trajectories that [`metrics`] compares against ground truth
//! (MAE, MSE, RMSE = √MSE, and SMAPE with a guarded zero denominator).

use crate::error::{Error, Result};
#[cfg(test)]
use crate::integrator::rk4_step;
use crate::integrator::Trajectory;
use crate::network::{forward, NetworkParams};
use crate::systems::SystemModel;
use ndarray::Array2;
use std::io::Write;
use std::path::Path;

/// Linear interpolation over sampled vector values on an increasing grid.
pub struct Interpolant<'a> {
    times: &'a [f64],
    /// `times.len() × dim`.
    values: &'a Array2<f64>,
}

impl<'a> Interpolant<'a> {
    pub fn new(times: &'a [f64], values: &'a Array2<f64>) -> Self {
        assert_eq!(times.len(), values.nrows(), "one value row per sample");
        assert!(times.len() >= 2, "need at least two samples");
        assert!(
            times.windows(2).all(|w| w[0] < w[1]),
            "times must be strictly increasing"
        );
        Interpolant { times, values }
    }

    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Value at `t`; queries outside the sampled span fail (with a relative
    /// slack of 1e-9 of the span for floating-point stage times at the
    /// boundary).
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = (self.t_min(), self.t_max());
        let tol = 1e-9 * (hi - lo);
        if t < lo - tol || t > hi + tol {
            return Err(Error::OutOfDomain {
                t,
                t_min: lo,
                t_max: hi,
            });
        }
        let t = t.clamp(lo, hi);
        let seg = self
            .times
            .partition_point(|&u| u <= t)
            .clamp(1, self.times.len() - 1);
        let (ta, tb) = (self.times[seg - 1], self.times[seg]);
        let w = (t - ta) / (tb - ta);
        Ok((0..self.values.ncols())
            .map(|c| {
                let (a, b) = (self.values[(seg - 1, c)], self.values[(seg, c)]);
                a + w * (b - a)
            })
            .collect())
    }
}

/// Integrate the observer ODE from `xhat0` over `[0, t_max]` with step `dt`.
///
/// The gain head is evaluated directly at every RK4 stage time (the state
/// head is ignored here — the estimate is the ODE solution). Feedback
/// components that are exactly zero are skipped so a zero gain head
/// reproduces the open-loop integration bit-for-bit.
pub fn replay_observer(
    sys: &SystemModel,
    params: &NetworkParams,
    xhat0: &[f64],
    measurements: &Interpolant,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    assert_eq!(xhat0.len(), sys.n_x);
    assert!(dt > 0.0 && t_max >= 0.0, "need dt > 0 and t_max >= 0");
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let n_x = sys.n_x;
    let mut states = Array2::zeros((steps + 1, n_x));
    let mut times = Vec::with_capacity(steps + 1);
    let rhs = |x: &[f64], t: f64| -> Result<Vec<f64>> {
        let mut dx = sys.rhs(x, t);
        let (_, gain) = forward(params, t, n_x, sys.m);
        let y = measurements.at(t)?;
        let cx = sys.output(x);
        let innovation: Vec<f64> = (0..sys.m).map(|j| y[j] - cx[j]).collect();
        let feed = gain.apply(&innovation);
        for i in 0..n_x {
            if feed[i] != 0.0 {
                dx[i] += feed[i];
            }
        }
        Ok(dx)
    };
    let mut x = xhat0.to_vec();
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
            x = rk4_step_res(&rhs, &x, t, dt)?;
        }
    }
    Ok(Trajectory { times, states })
}

/// RK4 step with a fallible right-hand side (measurement lookups can fail).
/// Stage arithmetic mirrors [`rk4_step`] exactly.
fn rk4_step_res<F>(f: &F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let n = x.len();
    let k1 = f(x, t)?;
    let mid1: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(&mid1, t + 0.5 * dt)?;
    let mid2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * dt * k2[i]).collect();
    let k3 = f(&mid2, t + 0.5 * dt)?;
    let end: Vec<f64> = (0..n).map(|i| x[i] + dt * k3[i]).collect();
    let k4 = f(&end, t + dt)?;
    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Evaluate the network state head on a time grid.
pub fn predict(params: &NetworkParams, times: &[f64], n_x: usize, m: usize) -> Trajectory {
    let mut states = Array2::zeros((times.len(), n_x));
    for (i, &t) in times.iter().enumerate() {
        let (xhat, _) = forward(params, t, n_x, m);
        for j in 0..n_x {
            states[(i, j)] = xhat[j];
        }
    }
    Trajectory {
        times: times.to_vec(),
        states,
    }
}

/// The four error numbers for one aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMetrics {
    pub mae: f64,
    pub mse: f64,
    /// Always exactly `mse.sqrt()`.
    pub rmse: f64,
    /// Symmetric mean absolute percentage error; a term whose denominator
    /// `(|x| + |x̂|)/2` sits below 5e-13 contributes 0.
    pub smape_percent: f64,
}

/// Error report for a trajectory pair: overall and per-state metrics plus
/// the absolute error series.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub overall: StateMetrics,
    pub per_state: Vec<StateMetrics>,
    pub times: Vec<f64>,
    /// `times.len() × n_x` absolute errors `|xᵢ(t) − x̂ᵢ(t)|`.
    pub per_time_error: Array2<f64>,
    /// Per-state (Σ|e|, Σe², Σ smape terms) for re-aggregation.
    sums: Vec<(f64, f64, f64)>,
}

const SMAPE_GUARD: f64 = 1e-12;

impl MetricsReport {
    /// Aggregate over a subset of states (e.g. only the unmeasured ones).
    pub fn over_states(&self, idx: &[usize]) -> StateMetrics {
        assert!(!idx.is_empty());
        let n = (self.times.len() * idx.len()) as f64;
        let (mut sa, mut sq, mut sp) = (0.0, 0.0, 0.0);
        for &i in idx {
            let (a, q, p) = self.sums[i];
            sa += a;
            sq += q;
            sp += p;
        }
        let mse = sq / n;
        StateMetrics {
            mae: sa / n,
            mse,
            rmse: mse.sqrt(),
            smape_percent: 100.0 * sp / n,
        }
    }

    /// Write the error series as CSV: header `t,e1,...,en`.
    pub fn write_errors_csv(&self, path: &Path) -> Result<()> {
        let n_x = self.per_time_error.ncols();
        let mut out = String::from("t");
        for i in 1..=n_x {
            out.push_str(&format!(",e{i}"));
        }
        out.push('\n');
        for (i, &t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for j in 0..n_x {
                out.push_str(&format!(",{:.16e}", self.per_time_error[(i, j)]));
            }
            out.push('\n');
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Key-value lines: overall metrics, per-state metrics, and (when
    /// `unmeasured` is nonempty) the unmeasured-only aggregation.
    pub fn key_values(&self, unmeasured: &[usize]) -> Vec<(String, f64)> {
        let mut kv = Vec::new();
        let push_set = |kv: &mut Vec<(String, f64)>, suffix: &str, s: &StateMetrics| {
            kv.push((format!("mae{suffix}"), s.mae));
            kv.push((format!("mse{suffix}"), s.mse));
            kv.push((format!("rmse{suffix}"), s.rmse));
            kv.push((format!("smape_percent{suffix}"), s.smape_percent));
        };
        push_set(&mut kv, "", &self.overall);
        for (i, s) in self.per_state.iter().enumerate() {
            push_set(&mut kv, &format!("_x{}", i + 1), s);
        }
        if !unmeasured.is_empty() {
            push_set(&mut kv, "_unmeasured", &self.over_states(unmeasured));
        }
        kv
    }
}

/// Compare two trajectories on the same grid.
pub fn metrics(truth: &Trajectory, estimate: &Trajectory) -> Result<MetricsReport> {
    if truth.len() != estimate.len() || truth.n_x() != estimate.n_x() {
        return Err(Error::GridMismatch {
            context: format!(
                "truth is {}x{}, estimate is {}x{}",
                truth.len(),
                truth.n_x(),
                estimate.len(),
                estimate.n_x()
            ),
        });
    }
    if let Some(i) = (0..truth.len()).find(|&i| truth.times[i] != estimate.times[i]) {
        return Err(Error::GridMismatch {
            context: format!(
                "time {} differs: {} vs {}",
                i, truth.times[i], estimate.times[i]
            ),
        });
    }
    let (n, n_x) = (truth.len(), truth.n_x());
    let mut per_time_error = Array2::zeros((n, n_x));
    let mut sums = vec![(0.0_f64, 0.0_f64, 0.0_f64); n_x];
    for i in 0..n {
        for j in 0..n_x {
            let (a, b) = (truth.states[(i, j)], estimate.states[(i, j)]);
            let e = (a - b).abs();
            per_time_error[(i, j)] = e;
            sums[j].0 += e;
            sums[j].1 += e * e;
            let denom = (a.abs() + b.abs()) / 2.0;
            if denom >= SMAPE_GUARD / 2.0 {
                sums[j].2 += e / denom;
            }
        }
    }
    let state = |sa: f64, sq: f64, sp: f64, count: f64| {
        let mse = sq / count;
        StateMetrics {
            mae: sa / count,
            mse,
            rmse: mse.sqrt(),
            smape_percent: 100.0 * sp / count,
        }
    };
    let per_state: Vec<StateMetrics> = sums
        .iter()
        .map(|&(a, q, p)| state(a, q, p, n as f64))
        .collect();
    let (ta, tq, tp) = sums.iter().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2)
    });
    let overall = state(ta, tq, tp, (n * n_x) as f64);
    Ok(MetricsReport {
        overall,
        per_state,
        times: truth.times.clone(),
        per_time_error,
        sums,
    })
}

/// Format key-value metric lines as `key=value` text.
pub fn format_metrics(kv: &[(String, f64)]) -> String {
    let mut out = String::new();
    for (k, v) in kv {
        out.push_str(&format!("{k}={v:.16e}\n"));
    }
    out
}

/// Serialize key-value metric lines as `key=value` text.
pub fn write_metrics_txt(path: &Path, kv: &[(String, f64)]) -> Result<()> {
    let out = format_metrics(kv);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

// Keep the two steppers in lockstep: used only by tests below.
#[cfg(test)]
fn rk4_steps_agree_bitwise(x: &[f64], t: f64, dt: f64) -> bool {
    let f = |x: &[f64], _t: f64| vec![x[1].powi(3), -x[0]];
    let g = |x: &[f64], t: f64| -> Result<Vec<f64>> { Ok(f(x, t)) };
    let a = rk4_step(&f, x, t, dt);
    let b = rk4_step_res(&g, x, t, dt).unwrap();
    a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits())
}
