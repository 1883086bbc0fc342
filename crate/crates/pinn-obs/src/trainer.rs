//! Physics-informed training of the observer network.
//!
//! The loss has three parts, each a mean over the training samples the
//! observer is allowed to see (measured outputs plus its own initial
//! estimate — never the hidden states):
//!
//! * `mse0` — squared distance between the network state at `t0` and the
//!   observer's initial estimate (optionally the unsquared norm);
//! * `mseg` — mean squared dynamics residual
//!   `g = dx̂/dt − f(x̂) − B u − L(t) (y − C x̂)` over the collocation grid;
//! * `msey` — mean squared output mismatch `‖C x̂(tⁱ) − yⁱ‖²`.
//!
//! `total = w0·mse0 + wg·mseg + wy·msey`; a weight of exactly zero removes
//! its term from the computation graph, so masked totals equal the single
//! surviving component bit-for-bit.
//!
//! One optimizer iteration records the whole batch on a fresh tape (network
//! forward plus its time-derivative stream), runs one backward sweep, and
//! applies a bias-corrected Adam update. Everything is deterministic for a
//! fixed seed.

use crate::autodiff::{Scalar, Tape, Var};
use crate::error::{Error, Result};
use crate::integrator::TrainingDataset;
use crate::network::{LayerSpec, NetworkParams, TapedNet};
use crate::systems::SystemModel;
use ndarray::Array2;

/// Multipliers for the three loss components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w0: f64,
    pub wg: f64,
    pub wy: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w0: 1.0,
            wg: 1.0,
            wy: 1.0,
        }
    }
}

/// Loss components of one evaluation; `total` is the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mse0: f64,
    pub mseg: f64,
    pub msey: f64,
}

/// One logged training iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub loss: LossBreakdown,
}

/// Where the dynamics residual is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collocation {
    /// Exactly the training sample times (the default).
    TrainGrid,
    /// `factor − 1` extra points inserted uniformly inside every adjacent
    /// pair of training times, with measurements linearly interpolated.
    Dense { factor: usize },
}

/// Everything one training run needs besides the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub spec: LayerSpec,
    pub lr: f64,
    pub max_iters: usize,
    /// Stop after this many consecutive iterations without relative
    /// improvement better than 1e-12.
    pub patience: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub collocation: Collocation,
    /// Use `‖x̂(t0) − x̂ₐ(t0)‖` instead of its square.
    pub mse0_unsquared: bool,
}

impl TrainConfig {
    /// Standard settings: lr 1e-3, 200k max iterations, patience 20k,
    /// unit weights, collocation on the train grid.
    pub fn new(spec: LayerSpec, seed: u64) -> Self {
        TrainConfig {
            spec,
            lr: 1e-3,
            max_iters: 200_000,
            patience: 20_000,
            weights: LossWeights::default(),
            seed,
            collocation: Collocation::TrainGrid,
            mse0_unsquared: false,
        }
    }
}

/// Result of [`train`]: the best parameters seen, the full per-iteration
/// history, and where the best/last evaluations happened.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: NetworkParams,
    pub history: Vec<HistoryRow>,
    pub best_iter: usize,
    pub best_loss: f64,
    pub stopped_iter: usize,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam accumulator.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Precomputed constant blocks shared by every iteration of one run.
struct LossTask {
    n_x: usize,
    m: usize,
    /// Collocation times, ascending; `[0]` is `t0`.
    times_c: Vec<f64>,
    /// `m × n_c` measurements at the collocation times.
    y_c: Array2<f64>,
    /// `n_x × n_c` forcing `B u(t)`; `None` when the system has no input.
    forcing_c: Option<Array2<f64>>,
    /// `m × n_c` 0/1 mask selecting measured train columns; `None` when the
    /// collocation grid is exactly the train grid.
    mask: Option<Array2<f64>>,
    /// Output-mismatch denominator (number of train samples).
    n_train: usize,
    c: Array2<f64>,
    t0: f64,
    xhat0: Vec<f64>,
}

impl LossTask {
    fn new(dataset: &TrainingDataset, sys: &SystemModel, collocation: Collocation) -> Self {
        let train_t = dataset.train_times();
        let n_t = train_t.len();
        assert!(
            n_t > 0 && dataset.train_idx[0] == 0,
            "train split must contain t0"
        );
        let factor = match collocation {
            Collocation::TrainGrid => 1,
            Collocation::Dense { factor } => factor.max(1),
        };
        let mut times_c = Vec::new();
        let mut y_cols: Vec<Vec<f64>> = Vec::new();
        let mut train_cols = Vec::new();
        let sample = |pos: usize| -> Vec<f64> {
            let i = dataset.train_idx[pos];
            (0..sys.m).map(|r| dataset.y[(i, r)]).collect()
        };
        for pos in 0..n_t {
            train_cols.push(times_c.len());
            times_c.push(train_t[pos]);
            y_cols.push(sample(pos));
            if pos + 1 < n_t {
                let (ta, tb) = (train_t[pos], train_t[pos + 1]);
                let (ya, yb) = (sample(pos), sample(pos + 1));
                for s in 1..factor {
                    let w = s as f64 / factor as f64;
                    times_c.push(ta + w * (tb - ta));
                    y_cols.push((0..sys.m).map(|r| ya[r] + w * (yb[r] - ya[r])).collect());
                }
            }
        }
        let n_c = times_c.len();
        let mut y_c = Array2::zeros((sys.m, n_c));
        for (col, y) in y_cols.iter().enumerate() {
            for r in 0..sys.m {
                y_c[(r, col)] = y[r];
            }
        }
        let forcing_c = sys.b.as_ref().map(|_| {
            let mut fc = Array2::zeros((sys.n_x, n_c));
            for (col, &t) in times_c.iter().enumerate() {
                for (i, v) in sys.forcing(t).into_iter().enumerate() {
                    fc[(i, col)] = v;
                }
            }
            fc
        });
        let mask = (factor > 1).then(|| {
            let mut mk = Array2::zeros((sys.m, n_c));
            for &col in &train_cols {
                for r in 0..sys.m {
                    mk[(r, col)] = 1.0;
                }
            }
            mk
        });
        LossTask {
            n_x: sys.n_x,
            m: sys.m,
            t0: times_c[0],
            times_c,
            y_c,
            forcing_c,
            mask,
            n_train: n_t,
            c: sys.c.clone(),
            xhat0: dataset.xhat0.clone(),
        }
    }
}

/// Record the full loss on `tape`; returns the total node, the parameter
/// leaves (flat order), and the component values.
fn record_loss<'t>(
    tape: &'t Tape,
    params: &NetworkParams,
    task: &LossTask,
    sys: &SystemModel,
    weights: &LossWeights,
    mse0_unsquared: bool,
) -> (Var<'t>, Vec<Var<'t>>, LossBreakdown) {
    let net = TapedNet::record(tape, params);
    let leaves = net.leaves();
    let (n_x, m) = (task.n_x, task.m);
    let n_c = task.times_c.len();

    // Dynamics residual over the collocation block.
    let times = tape.leaf_row(&task.times_c);
    let (out, dout) = net.forward_dual(times, tape);
    let xhat = out.rows(0, n_x);
    let innovation = tape.leaf(task.y_c.clone()) - tape.leaf(task.c.clone()).matmul(xhat);
    let x_rows: Vec<Var> = (0..n_x).map(|i| xhat.rows(i, i + 1)).collect();
    let drift = sys.f(&x_rows, times);
    let mut ssq_g: Option<Var> = None;
    for i in 0..n_x {
        let mut g = dout.rows(i, i + 1) - drift[i];
        if let Some(fc) = &task.forcing_c {
            g = g - tape.leaf_row(fc.row(i).as_slice().expect("row-major"));
        }
        for j in 0..m {
            let l_ij = out.rows(n_x + i * m + j, n_x + i * m + j + 1);
            g = g - l_ij * innovation.rows(j, j + 1);
        }
        let s = g.sum_sq();
        ssq_g = Some(match ssq_g {
            Some(acc) => acc + s,
            None => s,
        });
    }
    let mseg = ssq_g.expect("n_x >= 1").scale(1.0 / n_c as f64);

    // Output mismatch over the measured train columns only.
    let err_y = match &task.mask {
        None => innovation,
        Some(mk) => innovation * tape.leaf(mk.clone()),
    };
    let msey = err_y.sum_sq().scale(1.0 / task.n_train as f64);

    // Initial-estimate mismatch at t0.
    let out0 = net.forward(tape.leaf_row(&[task.t0]));
    let diff0 = out0.rows(0, n_x) - tape.leaf_col(&task.xhat0);
    let mut mse0 = diff0.sum_sq();
    if mse0_unsquared && mse0.scalar() > 0.0 {
        // At an exact zero the norm is kept as-is (valid subgradient, no
        // division by zero in the backward sweep).
        mse0 = mse0.sqrt();
    }

    let mut total: Option<Var> = None;
    for (w, node) in [(weights.w0, mse0), (weights.wg, mseg), (weights.wy, msey)] {
        if w != 0.0 {
            let term = node.scale(w);
            total = Some(match total {
                Some(acc) => acc + term,
                None => term,
            });
        }
    }
    let total = total.unwrap_or_else(|| tape.leaf_scalar(0.0));
    let breakdown = LossBreakdown {
        total: total.scalar(),
        mse0: mse0.scalar(),
        mseg: mseg.scalar(),
        msey: msey.scalar(),
    };
    (total, leaves, breakdown)
}

fn task_loss_and_grad(
    params: &NetworkParams,
    task: &LossTask,
    sys: &SystemModel,
    weights: &LossWeights,
    mse0_unsquared: bool,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let tape = Tape::new();
    let (total, leaves, breakdown) = record_loss(&tape, params, task, sys, weights, mse0_unsquared);
    let grads = tape.backward(total)?;
    let flat = grads.flat(&leaves)?;
    Ok((breakdown, flat))
}

/// Evaluate the loss components at `params` without differentiating.
pub fn evaluate_loss(
    params: &NetworkParams,
    dataset: &TrainingDataset,
    sys: &SystemModel,
    weights: &LossWeights,
    collocation: Collocation,
    mse0_unsquared: bool,
) -> LossBreakdown {
    let task = LossTask::new(dataset, sys, collocation);
    let tape = Tape::new();
    let (_, _, breakdown) = record_loss(&tape, params, &task, sys, weights, mse0_unsquared);
    breakdown
}

/// Evaluate the loss and its gradient with respect to every parameter
/// (flat layer order).
pub fn loss_and_grad(
    params: &NetworkParams,
    dataset: &TrainingDataset,
    sys: &SystemModel,
    weights: &LossWeights,
    collocation: Collocation,
    mse0_unsquared: bool,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let task = LossTask::new(dataset, sys, collocation);
    task_loss_and_grad(params, &task, sys, weights, mse0_unsquared)
}

/// Full-batch Adam training loop. Returns the parameters achieving the best
/// total loss (not the last iterate), the per-iteration history, and the
/// stopping bookkeeping. Non-finite losses or gradients abort with a
/// divergence error naming the iteration.
pub fn train(
    config: &TrainConfig,
    dataset: &TrainingDataset,
    sys: &SystemModel,
) -> Result<TrainResult> {
    config.spec.validate(sys.n_x, sys.m)?;
    let task = LossTask::new(dataset, sys, config.collocation);
    let mut params = NetworkParams::init_glorot(config.spec.clone(), config.seed);
    let mut adam = AdamState::new(params.flat.len());
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_iter = 0;
    let mut since_improve = 0usize;
    let mut stopped_iter = 0;
    let mut history = Vec::new();
    // Iterations are numbered from 1 in history rows and reports.
    for iter in 1..=config.max_iters {
        let (bd, grad) =
            task_loss_and_grad(&params, &task, sys, &config.weights, config.mse0_unsquared)
                .map_err(|e| match e {
                    Error::NonFiniteAdjoint { .. } => Error::Divergence { iteration: iter },
                    other => other,
                })?;
        if !bd.total.is_finite() {
            return Err(Error::Divergence { iteration: iter });
        }
        history.push(HistoryRow { iter, loss: bd });
        stopped_iter = iter;
        if bd.total < best_loss * (1.0 - 1e-12) {
            best_loss = bd.total;
            best_iter = iter;
            best.flat.copy_from_slice(&params.flat);
            since_improve = 0;
        } else {
            since_improve += 1;
            if since_improve >= config.patience.max(1) {
                break;
            }
        }
        adam.step(&mut params.flat, &grad, config.lr);
    }
    Ok(TrainResult {
        params: best,
        history,
        best_iter,
        best_loss,
        stopped_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{build_dataset, simulate};
    use crate::network::{forward, forward_with_time_derivative, Activation};
    use crate::systems::by_name;

    fn small_dataset(name: &str, points: usize) -> (crate::systems::SystemModel, TrainingDataset) {
        let sys = by_name(name).unwrap();
        // Each system's default step keeps its fast dynamics resolvable.
        let dt = sys.dt.min(0.1);
        let t_max = dt * (points - 1) as f64;
        let traj = simulate(&sys, &sys.x0, t_max, dt).unwrap();
        assert_eq!(traj.len(), points);
        let ds = build_dataset(&traj, &sys, 11);
        (sys, ds)
    }

    fn random_params(spec: LayerSpec, seed: u64) -> NetworkParams {
        NetworkParams::init_glorot(spec, seed)
    }

    /// Independent scalar-path reference: per-point forward duals, no tape.
    fn reference_loss(
        params: &NetworkParams,
        ds: &TrainingDataset,
        sys: &SystemModel,
        w: &LossWeights,
        unsquared: bool,
    ) -> LossBreakdown {
        let (n_x, m) = (sys.n_x, sys.m);
        let mut ssq_g = 0.0;
        let mut ssq_y = 0.0;
        for &i in &ds.train_idx {
            let t = ds.times[i];
            let (xh, dxh, gain) = forward_with_time_derivative(params, t, n_x, m);
            let cx = sys.output(&xh);
            let innov: Vec<f64> = (0..m).map(|r| ds.y[(i, r)] - cx[r]).collect();
            let f = sys.f(&xh, t);
            let u = sys.forcing(t);
            for s in 0..n_x {
                let fed: f64 = (0..m).map(|j| gain.get(s, j) * innov[j]).sum();
                let g = dxh[s] - f[s] - u[s] - fed;
                ssq_g += g * g;
            }
            for r in 0..m {
                ssq_y += innov[r] * innov[r];
            }
        }
        let n_t = ds.train_idx.len() as f64;
        let (xh0, _) = forward(params, ds.times[0], n_x, m);
        let mut mse0: f64 = (0..n_x).map(|s| (xh0[s] - ds.xhat0[s]).powi(2)).sum();
        if unsquared {
            mse0 = mse0.sqrt();
        }
        let (mseg, msey) = (ssq_g / n_t, ssq_y / n_t);
        LossBreakdown {
            total: w.w0 * mse0 + w.wg * mseg + w.wy * msey,
            mse0,
            mseg,
            msey,
        }
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        let denom = 1.0_f64.max(a.abs());
        assert!((a - b).abs() / denom <= tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn adam_first_step_matches_hand_formula() {
        let mut adam = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        let g = [1.0, -2.0];
        adam.step(&mut p, &g, 0.1);
        for i in 0..2 {
            // After one step m̂ = g, v̂ = g², so the update is
            // -lr·g/(|g| + eps).
            let expect = -0.1 * g[i] / (g[i].abs() + 1e-8);
            assert!(
                (p[i] - expect).abs() <= 1e-15,
                "coord {i}: {} vs {expect}",
                p[i]
            );
        }
        // Second step with the same gradient keeps m̂ = g, v̂ = g².
        adam.step(&mut p, &g, 0.1);
        for i in 0..2 {
            let expect = -0.2 * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn adam_zero_gradient_moves_nothing() {
        let mut adam = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p, &[0.0; 3], 0.5);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_network_loss_components_are_hand_computable() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let params = NetworkParams::zeros(LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh));
        let bd = evaluate_loss(
            &params,
            &ds,
            &sys,
            &LossWeights::default(),
            Collocation::TrainGrid,
            false,
        );
        // x̂ ≡ 0, L ≡ 0, dx̂ ≡ 0, and the duffing drift vanishes at the
        // origin, so the residual is identically zero.
        assert_eq!(bd.mseg, 0.0);
        // mse0 = ‖0 − (1,1)‖² = 2.
        assert_eq!(bd.mse0, 2.0);
        // msey = mean over train points of y².
        let expect: f64 = ds
            .train_idx
            .iter()
            .map(|&i| ds.y[(i, 0)].powi(2))
            .sum::<f64>()
            / ds.train_idx.len() as f64;
        assert_close(bd.msey, expect, 1e-15, "msey");
        assert_close(bd.total, 2.0 + expect, 1e-15, "total");
    }

    #[test]
    fn blocked_loss_matches_scalar_reference_on_every_system_shape() {
        // One measured output, two, forcing, division in the drift: between
        // them these cover every structural branch of the residual.
        for (name, seed) in [
            ("reverse_duffing", 3_u64),
            ("induction_motor", 4),
            ("rigid_body", 5),
            ("academic_ex3", 6),
        ] {
            let (sys, ds) = small_dataset(name, 12);
            let spec = LayerSpec::uniform(3, 8, sys.n_x, sys.m, Activation::Tanh);
            let params = random_params(spec, seed);
            let w = LossWeights {
                w0: 0.7,
                wg: 1.3,
                wy: 2.1,
            };
            let got = evaluate_loss(&params, &ds, &sys, &w, Collocation::TrainGrid, false);
            let want = reference_loss(&params, &ds, &sys, &w, false);
            assert_close(got.mse0, want.mse0, 1e-12, &format!("{name} mse0"));
            assert_close(got.mseg, want.mseg, 1e-12, &format!("{name} mseg"));
            assert_close(got.msey, want.msey, 1e-12, &format!("{name} msey"));
            assert_close(got.total, want.total, 1e-12, &format!("{name} total"));
        }
    }

    #[test]
    fn unsquared_initial_term_is_the_square_root() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let params = NetworkParams::zeros(LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh));
        let w = LossWeights::default();
        let sq = evaluate_loss(&params, &ds, &sys, &w, Collocation::TrainGrid, false);
        let un = evaluate_loss(&params, &ds, &sys, &w, Collocation::TrainGrid, true);
        assert_eq!(un.mse0, sq.mse0.sqrt());
        assert_eq!(un.mseg, sq.mseg);
        assert_eq!(un.msey, sq.msey);
    }

    #[test]
    fn dense_collocation_matches_a_reference_over_interpolated_points() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let spec = LayerSpec::uniform(3, 8, 2, 1, Activation::Tanh);
        let params = random_params(spec, 9);
        let w = LossWeights::default();
        let k = 3;
        let got = evaluate_loss(
            &params,
            &ds,
            &sys,
            &w,
            Collocation::Dense { factor: k },
            false,
        );

        // Reference: msey and mse0 are unchanged; mseg averages over the
        // densified grid with linearly interpolated measurements.
        let base = reference_loss(&params, &ds, &sys, &w, false);
        assert_close(got.msey, base.msey, 1e-12, "dense msey");
        assert_close(got.mse0, base.mse0, 1e-12, "dense mse0");

        let train_t = ds.train_times();
        let mut ssq_g = 0.0;
        let mut count = 0usize;
        for pos in 0..train_t.len() {
            let idx = ds.train_idx[pos];
            let mut pts = vec![(train_t[pos], ds.y[(idx, 0)])];
            if pos + 1 < train_t.len() {
                let jdx = ds.train_idx[pos + 1];
                for s in 1..k {
                    let wgt = s as f64 / k as f64;
                    pts.push((
                        train_t[pos] + wgt * (train_t[pos + 1] - train_t[pos]),
                        ds.y[(idx, 0)] + wgt * (ds.y[(jdx, 0)] - ds.y[(idx, 0)]),
                    ));
                }
            }
            for (t, y) in pts {
                let (xh, dxh, gain) = forward_with_time_derivative(&params, t, 2, 1);
                let innov = y - sys.output(&xh)[0];
                let f = sys.f(&xh, t);
                for s in 0..2 {
                    let g = dxh[s] - f[s] - gain.get(s, 0) * innov;
                    ssq_g += g * g;
                }
                count += 1;
            }
        }
        assert_eq!(count, (train_t.len() - 1) * k + 1);
        assert_close(got.mseg, ssq_g / count as f64, 1e-12, "dense mseg");
    }

    #[test]
    fn masked_weights_reproduce_single_components_exactly() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let spec = LayerSpec::uniform(3, 8, 2, 1, Activation::Tanh);
        let params = random_params(spec, 2);
        let only = |w0: f64, wg: f64, wy: f64| {
            evaluate_loss(
                &params,
                &ds,
                &sys,
                &LossWeights { w0, wg, wy },
                Collocation::TrainGrid,
                false,
            )
        };
        let y_only = only(0.0, 0.0, 1.0);
        assert_eq!(y_only.total.to_bits(), y_only.msey.to_bits());
        let g_only = only(0.0, 1.0, 0.0);
        assert_eq!(g_only.total.to_bits(), g_only.mseg.to_bits());
        let zero = only(0.0, 0.0, 0.0);
        assert_eq!(zero.total, 0.0);
        // Components themselves are unchanged by masking.
        let full = only(1.0, 1.0, 1.0);
        assert_eq!(full.msey.to_bits(), y_only.msey.to_bits());
        assert_eq!(full.mseg.to_bits(), g_only.mseg.to_bits());
    }

    #[test]
    fn total_is_linear_in_the_weights_to_1e_minus_15() {
        let (sys, ds) = small_dataset("academic_ex4", 10);
        let spec = LayerSpec::uniform(3, 8, 2, 1, Activation::Sine);
        let params = random_params(spec, 8);
        for (w0, wg, wy) in [
            (2.0, 0.5, 3.0),
            (1.0, 1.0, 1.0),
            (0.0, 2.5, 0.25),
            (5.0, 0.0, 0.0),
        ] {
            let bd = evaluate_loss(
                &params,
                &ds,
                &sys,
                &LossWeights { w0, wg, wy },
                Collocation::TrainGrid,
                false,
            );
            let manual = w0 * bd.mse0 + wg * bd.mseg + wy * bd.msey;
            assert!(
                (bd.total - manual).abs() <= 1e-15,
                "({w0},{wg},{wy}): {} vs {manual}",
                bd.total
            );
        }
    }

    #[test]
    fn gradient_matches_central_differences_on_a_small_problem() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let w = LossWeights::default();
        for seed in [1_u64, 2, 3] {
            let spec = LayerSpec::uniform(3, 8, 2, 1, Activation::Tanh);
            let params = random_params(spec.clone(), seed);
            let (_, grad) =
                loss_and_grad(&params, &ds, &sys, &w, Collocation::TrainGrid, false).unwrap();
            let mut worst = 0.0_f64;
            for k in 0..params.flat.len() {
                let h = 1e-6;
                let mut plus = params.clone();
                plus.flat[k] += h;
                let mut minus = params.clone();
                minus.flat[k] -= h;
                let fp = evaluate_loss(&plus, &ds, &sys, &w, Collocation::TrainGrid, false).total;
                let fm = evaluate_loss(&minus, &ds, &sys, &w, Collocation::TrainGrid, false).total;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (grad[k] - fd).abs() / 1.0_f64.max(grad[k].abs());
                worst = worst.max(rel);
            }
            assert!(worst <= 1e-5, "seed {seed}: worst relative error {worst}");
        }
    }

    #[test]
    fn training_improves_and_tracks_the_best_iterate() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let mut config = TrainConfig::new(LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh), 0);
        config.max_iters = 300;
        config.patience = 300;
        let result = train(&config, &ds, &sys).unwrap();
        assert_eq!(result.history.len(), 300);
        assert!(result.best_loss < result.history[0].loss.total / 2.0);
        assert_eq!(
            result.best_loss,
            result.history[result.best_iter - 1].loss.total
        );
        for row in &result.history {
            assert!(row.loss.total >= result.best_loss * (1.0 - 1e-12));
        }
        // Returned params reproduce the best loss exactly.
        let check = evaluate_loss(
            &result.params,
            &ds,
            &sys,
            &config.weights,
            config.collocation,
            false,
        );
        assert_eq!(check.total.to_bits(), result.best_loss.to_bits());
    }

    #[test]
    fn training_is_bit_deterministic_per_seed() {
        let (sys, ds) = small_dataset("rigid_body", 10);
        let mut config = TrainConfig::new(LayerSpec::uniform(2, 8, 3, 1, Activation::Tanh), 42);
        config.max_iters = 50;
        let a = train(&config, &ds, &sys).unwrap();
        let b = train(&config, &ds, &sys).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params.flat, b.params.flat);
        let mut other = config.clone();
        other.seed = 43;
        let c = train(&other, &ds, &sys).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn zero_learning_rate_stops_after_exactly_patience_iterations() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let mut config = TrainConfig::new(LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh), 1);
        config.lr = 0.0;
        config.max_iters = 1000;
        config.patience = 7;
        let result = train(&config, &ds, &sys).unwrap();
        // Iteration 1 improves from infinity; each later identical loss
        // counts against patience.
        assert_eq!(result.history.len(), 8);
        assert_eq!(result.best_iter, 1);
        assert_eq!(result.stopped_iter, 8);
    }

    #[test]
    fn absurd_learning_rate_reports_divergence_with_the_iteration() {
        let (sys, ds) = small_dataset("reverse_duffing", 10);
        let mut config = TrainConfig::new(LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh), 0);
        config.lr = 1e60;
        config.max_iters = 50;
        match train(&config, &ds, &sys) {
            Err(Error::Divergence { iteration }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn loss_gradient_is_finite_for_every_activation() {
        let (sys, ds) = small_dataset("harmonic_oscillator", 10);
        for act in Activation::ALL {
            let spec = LayerSpec::uniform(3, 8, 3, 1, act);
            let params = random_params(spec, 17);
            let (bd, grad) = loss_and_grad(
                &params,
                &ds,
                &sys,
                &LossWeights::default(),
                Collocation::TrainGrid,
                false,
            )
            .unwrap();
            assert!(bd.total.is_finite());
            assert!(grad.iter().all(|g| g.is_finite()));
            assert!(grad.iter().any(|&g| g != 0.0), "{act:?}: all-zero gradient");
        }
    }
}
