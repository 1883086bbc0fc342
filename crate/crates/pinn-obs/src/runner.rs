//! Experiment orchestration: single runs, ablation grids, replay-only runs,
//! and metrics-from-CSV — everything the command-line binary does.
//!
//! A single run produces, in its output directory:
//!
//! * `truth.csv`      — ground-truth trajectory (`t,x1,...,xn`)
//! * `estimate.csv`   — the network's state estimate on the same time column
//! * `errors.csv`     — per-time absolute errors (`t,e1,...,en`)
//! * `history.csv`    — training curve (`iter,total,mse0,mseg,msey`)
//! * `metrics.txt`    — key-value summary (estimate and replay metrics,
//!   held-out-split metrics, convergence stats, timing)
//! * `params.ckpt`    — trained network parameters
//! * `manifest.txt`   — the fully-resolved configuration, defaults included
//! * `replay.csv`     — the observer ODE integrated with the trained gain,
//!   when that integration stays bounded
//!
//! An undertrained gain can destabilize the observer ODE (the estimate is a
//! network output either way; the *replay* feeds it back through the plant
//! dynamics). That is a property of the learned observer, not a failure of
//! the run: the run still exits 0, `metrics.txt` records
//! `replay_escape_time`, and `replay.csv` is simply absent.
//!
//! Re-running with the same configuration and seed reproduces every CSV and
//! the checkpoint byte for byte (`metrics.txt` contains wall-clock timings).

use crate::config::{AblationAxis, RunConfig, WEIGHT_CASES};
use crate::error::{Error, Result};
use crate::evaluator::{
    format_metrics, metrics, predict, replay_observer, write_metrics_txt, Interpolant,
    MetricsReport,
};
use crate::integrator::{build_dataset, simulate, TrainingDataset, Trajectory};
use crate::network::{forward, NetworkParams};
use crate::systems::SystemModel;
use crate::trainer::{train, HistoryRow, TrainResult};
use ndarray::Array2;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Loss level under which a run is counted as converged (the fixed-threshold
/// convergence definition; the best-loss definition is reported alongside).
pub const CONVERGENCE_THRESHOLD: f64 = 1e-2;

/// Everything a completed run produced, for callers that want more than the
/// files (the ablation driver, tests).
pub struct RunOutcome {
    pub out: PathBuf,
    pub train: TrainResult,
    /// Estimate-vs-truth metrics over the full grid.
    pub estimate: MetricsReport,
    /// Direct-prediction metrics on the held-out test split.
    pub direct_test: MetricsReport,
    /// Replay-vs-truth metrics, when the observer integration stayed bounded.
    pub replay: Option<MetricsReport>,
    /// Where the observer integration left the finite range, if it did.
    pub replay_escape_time: Option<f64>,
    pub train_seconds: f64,
}

/// States that never appear in the output map (all-zero columns of C).
pub fn unmeasured_states(sys: &SystemModel) -> Vec<usize> {
    (0..sys.n_x)
        .filter(|&j| (0..sys.m).all(|i| sys.c[(i, j)] == 0.0))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_history_csv(path: &Path, history: &[HistoryRow], log_every: usize) -> Result<()> {
    let mut out = String::from("iter,total,mse0,mseg,msey\n");
    let last = history.len();
    for row in history {
        if row.iter == 1 || row.iter == last || row.iter % log_every == 0 {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                row.iter, row.loss.total, row.loss.mse0, row.loss.mseg, row.loss.msey
            ));
        }
    }
    write_text(path, &out)
}

/// First iteration whose total loss dips under the fixed threshold;
/// `None` when the run never does.
pub fn convergence_iteration(history: &[HistoryRow], threshold: f64) -> Option<usize> {
    history
        .iter()
        .find(|row| row.loss.total < threshold)
        .map(|row| row.iter)
}

/// Truth restricted to the test-split rows, paired with the same times.
fn test_subset(truth: &Trajectory, ds: &TrainingDataset) -> Trajectory {
    let n_x = truth.n_x();
    let times: Vec<f64> = ds.test_idx.iter().map(|&i| ds.times[i]).collect();
    let mut states = Array2::zeros((times.len(), n_x));
    for (r, &i) in ds.test_idx.iter().enumerate() {
        for j in 0..n_x {
            states[(r, j)] = truth.states[(i, j)];
        }
    }
    Trajectory { times, states }
}

/// Run one full experiment: simulate, split, train, replay, write artifacts.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    let resolved = cfg.resolve()?;
    let sys = &resolved.sys;
    std::fs::create_dir_all(&resolved.out)
        .map_err(|e| Error::io(resolved.out.display().to_string(), e))?;
    write_text(&resolved.out.join("manifest.txt"), &cfg.manifest(&resolved))?;

    let truth = simulate(sys, &sys.x0, sys.t_max, sys.dt)?;
    truth.write_csv(&resolved.out.join("truth.csv"))?;
    let ds = build_dataset(&truth, sys, resolved.split_seed);

    let started = Instant::now();
    let result = train(&resolved.train, &ds, sys)?;
    let train_seconds = started.elapsed().as_secs_f64();
    result.params.save(&resolved.out.join("params.ckpt"))?;
    write_history_csv(
        &resolved.out.join("history.csv"),
        &result.history,
        resolved.log_every,
    )?;

    // The network's state estimate on the full grid (truth's exact times).
    let estimate = predict(&result.params, &truth.times, sys.n_x, sys.m);
    estimate.write_csv(&resolved.out.join("estimate.csv"))?;
    let estimate_report = metrics(&truth, &estimate)?;
    estimate_report.write_errors_csv(&resolved.out.join("errors.csv"))?;

    // Direct network prediction on the held-out split.
    let test_truth = test_subset(&truth, &ds);
    let pred = predict(&result.params, &test_truth.times, sys.n_x, sys.m);
    let direct_report = metrics(&test_truth, &pred)?;

    // Observer replay: integrate the plant dynamics with the learned gain
    // against interpolated measurements. May escape when the gain is poor.
    let interp = Interpolant::new(&ds.times, &ds.y);
    let (replay_report, replay_escape_time) =
        match replay_observer(sys, &result.params, &ds.xhat0, &interp, sys.t_max, sys.dt) {
            Ok(replayed) => {
                replayed.write_csv(&resolved.out.join("replay.csv"))?;
                (Some(metrics(&truth, &replayed)?), None)
            }
            Err(Error::TrajectoryEscape { time }) => (None, Some(time)),
            Err(other) => return Err(other),
        };

    let unmeasured = unmeasured_states(sys);
    let mut kv = estimate_report.key_values(&unmeasured);
    for (k, v) in direct_report.key_values(&unmeasured) {
        kv.push((format!("direct_test_{k}"), v));
    }
    match (&replay_report, replay_escape_time) {
        (Some(report), _) => {
            for (k, v) in report.key_values(&unmeasured) {
                kv.push((format!("replay_{k}"), v));
            }
        }
        (None, Some(time)) => kv.push(("replay_escape_time".to_string(), time)),
        (None, None) => unreachable!(),
    }
    kv.push(("best_loss".to_string(), result.best_loss));
    kv.push(("convergence_iter_best".to_string(), result.best_iter as f64));
    kv.push((
        "convergence_iter_threshold".to_string(),
        convergence_iteration(&result.history, CONVERGENCE_THRESHOLD).map_or(-1.0, |i| i as f64),
    ));
    kv.push(("train_iters".to_string(), result.stopped_iter as f64));
    kv.push(("train_seconds".to_string(), train_seconds));
    write_metrics_txt(&resolved.out.join("metrics.txt"), &kv)?;

    Ok(RunOutcome {
        out: resolved.out,
        train: result,
        estimate: estimate_report,
        direct_test: direct_report,
        replay: replay_report,
        replay_escape_time,
        train_seconds,
    })
}

/// Replay a stored checkpoint without training: simulate truth, integrate the
/// observer with the checkpoint's gain, and write the evaluation artifacts.
pub fn replay_from_checkpoint(cfg: &RunConfig, ckpt: &Path) -> Result<()> {
    let resolved = cfg.resolve()?;
    let sys = &resolved.sys;
    let params = NetworkParams::load(ckpt)?;
    let want_out = sys.n_x + sys.n_x * sys.m;
    let got_out = *params.spec.widths.last().expect("validated spec");
    if got_out != want_out {
        return Err(Error::InvalidConfig {
            field: "ckpt".to_string(),
            reason: format!(
                "checkpoint has {got_out} outputs but system {} needs {want_out}",
                sys.name
            ),
        });
    }
    std::fs::create_dir_all(&resolved.out)
        .map_err(|e| Error::io(resolved.out.display().to_string(), e))?;
    write_text(&resolved.out.join("manifest.txt"), &cfg.manifest(&resolved))?;

    let truth = simulate(sys, &sys.x0, sys.t_max, sys.dt)?;
    truth.write_csv(&resolved.out.join("truth.csv"))?;
    let ds = build_dataset(&truth, sys, resolved.split_seed);

    let estimate = predict(&params, &truth.times, sys.n_x, sys.m);
    estimate.write_csv(&resolved.out.join("estimate.csv"))?;
    let estimate_report = metrics(&truth, &estimate)?;
    estimate_report.write_errors_csv(&resolved.out.join("errors.csv"))?;

    // The command's purpose is the replay, so an escaping observer is a
    // hard failure here (unlike in run_experiment).
    let interp = Interpolant::new(&ds.times, &ds.y);
    let replayed = replay_observer(sys, &params, &ds.xhat0, &interp, sys.t_max, sys.dt)?;
    replayed.write_csv(&resolved.out.join("replay.csv"))?;
    let replay_report = metrics(&truth, &replayed)?;

    let unmeasured = unmeasured_states(sys);
    let mut kv = estimate_report.key_values(&unmeasured);
    for (k, v) in replay_report.key_values(&unmeasured) {
        kv.push((format!("replay_{k}"), v));
    }
    write_metrics_txt(&resolved.out.join("metrics.txt"), &kv)?;
    Ok(())
}

/// Compare two trajectory CSVs and return `key=value` metric lines.
pub fn metrics_from_csv(truth_path: &Path, estimate_path: &Path) -> Result<String> {
    let truth = Trajectory::read_csv(truth_path)?;
    let estimate = Trajectory::read_csv(estimate_path)?;
    let report = metrics(&truth, &estimate)?;
    Ok(format_metrics(&report.key_values(&[])))
}

/// One grid cell's summary line for `ablation.csv`.
struct CellRow {
    cell: String,
    outcome: Result<CellStats>,
}

struct CellStats {
    rmse: f64,
    mae: f64,
    inference_ms: f64,
    train_s: f64,
    convergence_iter: f64,
    best_loss: f64,
}

/// Median wall-clock time of 1000 single-time forward passes, in ms.
fn median_inference_ms(params: &NetworkParams, sys: &SystemModel) -> f64 {
    let mut samples = Vec::with_capacity(1000);
    let mut sink = 0.0f64;
    for i in 0..1000 {
        let t = sys.t_max * (i as f64 / 999.0);
        let start = Instant::now();
        let (xhat, gain) = forward(params, t, sys.n_x, sys.m);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        sink += xhat[0] + gain.get(0, 0);
    }
    std::hint::black_box(sink);
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

fn run_cell(base: &RunConfig, axis: AblationAxis, index: usize) -> CellRow {
    let mut cfg = base.clone();
    let cell = match axis {
        AblationAxis::LayersNeurons => {
            let width_count = base.neurons.len();
            cfg.depth = base.layers[index / width_count];
            cfg.width = base.neurons[index % width_count];
            format!("L{}_N{}", cfg.depth, cfg.width)
        }
        AblationAxis::Activations => {
            cfg.activation = base.activations[index];
            cfg.activation.to_string()
        }
        AblationAxis::Weights => {
            cfg.weights = WEIGHT_CASES[index];
            format!("case{}", index + 1)
        }
    };
    let base_out = base
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}_ablation", base.system)));
    cfg.out = Some(base_out.join(&cell));
    let outcome = run_experiment(&cfg).map(|run| {
        let resolved = cfg.resolve().expect("already resolved once");
        CellStats {
            rmse: run.direct_test.overall.rmse,
            mae: run.direct_test.overall.mae,
            inference_ms: median_inference_ms(&run.train.params, &resolved.sys),
            train_s: run.train_seconds,
            convergence_iter: convergence_iteration(&run.train.history, CONVERGENCE_THRESHOLD)
                .map_or(-1.0, |i| i as f64),
            best_loss: run.train.best_loss,
        }
    });
    CellRow { cell, outcome }
}

/// Run every cell of the configured ablation axis (concurrently up to
/// `jobs` threads; 0 or absent picks the machine default) and write
/// `ablation.csv` under the grid's output directory. Cell failures are
/// recorded in the status column without aborting the grid.
pub fn run_ablation(cfg: &RunConfig, jobs: Option<usize>) -> Result<PathBuf> {
    let axis = cfg.ablation.ok_or_else(|| Error::InvalidConfig {
        field: "ablation".to_string(),
        reason: "missing: grid configs must pick layers_neurons, activations or weights"
            .to_string(),
    })?;
    cfg.resolve()?; // validate everything else up front
    let n_cells = match axis {
        AblationAxis::LayersNeurons => cfg.layers.len() * cfg.neurons.len(),
        AblationAxis::Activations => cfg.activations.len(),
        AblationAxis::Weights => WEIGHT_CASES.len(),
    };

    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig {
            field: "jobs".to_string(),
            reason: e.to_string(),
        })?;
    let rows: Vec<CellRow> = pool.install(|| {
        (0..n_cells)
            .into_par_iter()
            .map(|i| run_cell(cfg, axis, i))
            .collect()
    });

    let base_out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}_ablation", cfg.system)));
    std::fs::create_dir_all(&base_out).map_err(|e| Error::io(base_out.display().to_string(), e))?;
    let mut out =
        String::from("cell,rmse,mae,inference_ms,train_s,convergence_iter,best_loss,status\n");
    for row in &rows {
        match &row.outcome {
            Ok(s) => out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},ok\n",
                row.cell, s.rmse, s.mae, s.inference_ms, s.train_s, s.convergence_iter, s.best_loss
            )),
            Err(e) => out.push_str(&format!(
                "{},nan,nan,nan,nan,nan,nan,{}\n",
                row.cell,
                e.to_string().replace([',', '\n'], ";")
            )),
        }
    }
    let path = base_out.join("ablation.csv");
    write_text(&path, &out)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn desk_config(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::parse(
            "system = reverse_duffing\n\
             t_max = 2.0\n\
             dt = 0.02\n\
             depth = 2\n\
             width = 8\n\
             max_iters = 60\n\
             patience = 60\n\
             log_every = 10\n\
             seed = 11\n",
        )
        .unwrap();
        cfg.out = Some(dir.to_path_buf());
        cfg
    }

    #[test]
    fn single_run_writes_the_full_artifact_set() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = desk_config(&out);
        let outcome = run_experiment(&cfg).unwrap();
        for name in [
            "truth.csv",
            "estimate.csv",
            "errors.csv",
            "history.csv",
            "metrics.txt",
            "params.ckpt",
            "manifest.txt",
        ] {
            assert!(out.join(name).exists(), "missing {name}");
        }
        assert!(outcome.train.best_loss.is_finite());
        let metrics_text = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
        for key in [
            "rmse=",
            "rmse_x1=",
            "rmse_unmeasured=",
            "direct_test_rmse=",
            "best_loss=",
            "convergence_iter_best=",
            "convergence_iter_threshold=",
            "train_seconds=",
        ] {
            assert!(metrics_text.contains(key), "metrics.txt lacks {key}");
        }
        // The replay either produced metrics or an honest escape record,
        // and replay.csv exists exactly in the first case.
        let replayed = metrics_text.contains("replay_rmse=");
        let escaped = metrics_text.contains("replay_escape_time=");
        assert!(
            replayed != escaped,
            "exactly one replay outcome: {metrics_text}"
        );
        assert_eq!(out.join("replay.csv").exists(), replayed);
        let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(
            manifest.contains("lr = 0.001"),
            "defaults echoed: {manifest}"
        );
        assert!(manifest.contains("seed = 11"));
    }

    #[test]
    fn truth_and_estimate_share_the_time_column_exactly() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        run_experiment(&desk_config(&out)).unwrap();
        let truth = Trajectory::read_csv(&out.join("truth.csv")).unwrap();
        let estimate = Trajectory::read_csv(&out.join("estimate.csv")).unwrap();
        assert_eq!(truth.times, estimate.times);
    }

    #[test]
    fn rerunning_reproduces_csv_artifacts_byte_for_byte() {
        let dir = tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        run_experiment(&desk_config(&a)).unwrap();
        run_experiment(&desk_config(&b)).unwrap();
        for name in [
            "truth.csv",
            "estimate.csv",
            "errors.csv",
            "history.csv",
            "params.ckpt",
        ] {
            let x = std::fs::read(a.join(name)).unwrap();
            let y = std::fs::read(b.join(name)).unwrap();
            assert_eq!(x, y, "{name} differs between identical runs");
        }
    }

    #[test]
    fn history_rows_follow_the_logging_cadence() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        run_experiment(&desk_config(&out)).unwrap();
        let text = std::fs::read_to_string(out.join("history.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,total,mse0,mseg,msey");
        let iters: Vec<usize> = lines
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(iters, vec![1, 10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn replay_from_a_zero_checkpoint_matches_open_loop_simulation() {
        use crate::network::{Activation, LayerSpec, NetworkParams};
        let dir = tempdir().unwrap();
        let spec = LayerSpec::uniform(2, 8, 2, 1, Activation::Tanh);
        let zeros = NetworkParams::zeros(spec);
        let ckpt = dir.path().join("zeros.ckpt");
        zeros.save(&ckpt).unwrap();

        let replay_out = dir.path().join("replayed");
        let cfg = desk_config(&replay_out);
        replay_from_checkpoint(&cfg, &ckpt).unwrap();

        // Zero gain head: the observer integrates the bare plant dynamics
        // from the estimate's initial condition.
        let resolved = cfg.resolve().unwrap();
        let open_loop = simulate(
            &resolved.sys,
            &resolved.sys.xhat0,
            resolved.sys.t_max,
            resolved.sys.dt,
        )
        .unwrap();
        let reference = dir.path().join("open_loop.csv");
        open_loop.write_csv(&reference).unwrap();
        let a = std::fs::read(replay_out.join("replay.csv")).unwrap();
        let b = std::fs::read(&reference).unwrap();
        assert_eq!(a, b, "zero-gain replay must equal open-loop simulation");
        assert!(!replay_out.join("history.csv").exists());
        assert!(replay_out.join("estimate.csv").exists());
    }

    #[test]
    fn replay_rejects_a_checkpoint_from_another_system_shape() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = desk_config(&out);
        run_experiment(&cfg).unwrap();
        let mut wrong = cfg.clone();
        wrong.system = "harmonic_oscillator".to_string(); // n_x=3, m=1
        wrong.out = Some(dir.path().join("wrong"));
        wrong.t_max = None;
        wrong.dt = None;
        match replay_from_checkpoint(&wrong, &out.join("params.ckpt")) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "ckpt"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn metrics_from_csv_matches_the_library_report() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("run");
        run_experiment(&desk_config(&out)).unwrap();
        let text = metrics_from_csv(&out.join("truth.csv"), &out.join("estimate.csv")).unwrap();
        assert!(text.contains("rmse="));
        assert!(text.contains("smape_percent_x2="));
        assert!(
            !text.contains("unmeasured"),
            "no system info, no subset row"
        );
        let written = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
        let from_cmd: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix("rmse="))
            .unwrap()
            .parse()
            .unwrap();
        let from_run: f64 = written
            .lines()
            .find_map(|l| l.strip_prefix("rmse="))
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(from_cmd.to_bits(), from_run.to_bits());
    }

    #[test]
    fn unmeasured_states_are_the_zero_columns_of_c() {
        use crate::systems::by_name;
        assert_eq!(
            unmeasured_states(&by_name("reverse_duffing").unwrap()),
            vec![1]
        );
        assert_eq!(
            unmeasured_states(&by_name("harmonic_oscillator").unwrap()),
            vec![1, 2]
        );
        assert_eq!(
            unmeasured_states(&by_name("induction_motor").unwrap()),
            vec![2, 3, 4]
        );
    }

    #[test]
    fn activation_grid_writes_one_row_per_cell() {
        let dir = tempdir().unwrap();
        let mut cfg = RunConfig::parse(
            "system = reverse_duffing\n\
             ablation = activations\n\
             activations = tanh,relu\n\
             t_max = 1.0\n\
             dt = 0.05\n\
             depth = 1\n\
             width = 6\n\
             max_iters = 30\n\
             patience = 30\n",
        )
        .unwrap();
        cfg.out = Some(dir.path().join("grid"));
        let path = run_ablation(&cfg, Some(2)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "cell,rmse,mae,inference_ms,train_s,convergence_iter,best_loss,status"
        );
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("tanh,"));
        assert!(lines[2].starts_with("relu,"));
        assert!(lines[1].ends_with(",ok"));
        assert!(dir.path().join("grid/tanh/params.ckpt").exists());
        assert!(dir.path().join("grid/relu/metrics.txt").exists());
    }

    #[test]
    fn weight_grid_reproduces_the_seven_cases() {
        let dir = tempdir().unwrap();
        let mut cfg = RunConfig::parse(
            "system = reverse_duffing\n\
             ablation = weights\n\
             t_max = 1.0\n\
             dt = 0.05\n\
             depth = 1\n\
             width = 6\n\
             max_iters = 20\n\
             patience = 20\n",
        )
        .unwrap();
        cfg.out = Some(dir.path().join("grid"));
        let path = run_ablation(&cfg, Some(2)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 8);
        for i in 1..=7 {
            assert!(text.contains(&format!("case{i},")), "missing case{i}");
        }
        let manifest = std::fs::read_to_string(dir.path().join("grid/case3/manifest.txt")).unwrap();
        assert!(manifest.contains("w0 = 1.5"));
        assert!(manifest.contains("w_ode = 0.5"));
        assert!(manifest.contains("w_y = 1"));
    }

    #[test]
    fn a_failing_cell_records_status_without_aborting_the_grid() {
        let dir = tempdir().unwrap();
        let mut cfg = RunConfig::parse(
            "system = reverse_duffing\n\
             ablation = activations\n\
             activations = tanh,relu\n\
             t_max = 1.0\n\
             dt = 0.05\n\
             depth = 1\n\
             width = 6\n\
             max_iters = 20\n\
             patience = 20\n\
             lr = 1e60\n",
        )
        .unwrap();
        cfg.out = Some(dir.path().join("grid"));
        let path = run_ablation(&cfg, Some(1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3, "both cells reported: {text}");
        for line in text.lines().skip(1) {
            assert!(line.contains("nan,"), "failed cells use nan fields: {line}");
            assert!(!line.ends_with(",ok"));
        }
    }

    #[test]
    fn grid_requires_an_ablation_axis() {
        let cfg = RunConfig::parse("system = reverse_duffing\n").unwrap();
        match run_ablation(&cfg, None) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "ablation"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }
}
