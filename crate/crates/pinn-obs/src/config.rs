//! Experiment configuration: a flat `key = value` text format with optional
//! `[section]` headers (cosmetic) and `#` comments.
//!
//! Every key has a default except `system`; the fully-resolved settings are
//! echoed into each run's `manifest.txt`, and that echo parses back to the
//! identical configuration.

use crate::error::{Error, Result};
use crate::network::{Activation, LayerSpec};
use crate::systems::{by_name, InputSignal, SystemModel};
use crate::trainer::{Collocation, LossWeights, TrainConfig};
use std::path::PathBuf;

/// How the driven systems' input is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// The system's registered input signal.
    Default,
    /// Zero input (open-circuit fallback).
    Zero,
}

/// Which ablation axis a grid run sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    LayersNeurons,
    Activations,
    Weights,
}

/// The seven loss-weight cases of the sensitivity study
/// (w0, w_ode, w_y per case; case 1 is the uniform baseline).
pub const WEIGHT_CASES: [LossWeights; 7] = [
    LossWeights {
        w0: 1.0,
        wg: 1.0,
        wy: 1.0,
    },
    LossWeights {
        w0: 0.5,
        wg: 1.5,
        wy: 1.0,
    },
    LossWeights {
        w0: 1.5,
        wg: 0.5,
        wy: 1.0,
    },
    LossWeights {
        w0: 1.0,
        wg: 2.0,
        wy: 1.0,
    },
    LossWeights {
        w0: 2.0,
        wg: 1.0,
        wy: 1.0,
    },
    LossWeights {
        w0: 2.0,
        wg: 1.0,
        wy: 0.5,
    },
    LossWeights {
        w0: 2.0,
        wg: 1.5,
        wy: 1.5,
    },
];

/// Parsed experiment configuration (file values plus CLI overrides, before
/// resolution against the system registry).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: String,
    pub seed: u64,
    /// Train/test split seed; defaults to `seed`.
    pub split_seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Simulation horizon; defaults to the system's registered value.
    pub t_max: Option<f64>,
    /// Grid step; defaults to the system's registered value.
    pub dt: Option<f64>,
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub lr: f64,
    pub max_iters: usize,
    pub patience: usize,
    pub weights: LossWeights,
    pub mse0_unsquared: bool,
    /// 1 = residual on the train grid; k > 1 inserts k−1 midpoints per
    /// train interval.
    pub collocation_density: usize,
    /// History CSV row cadence.
    pub log_every: usize,
    pub input_mode: InputMode,
    pub input_scale: Option<f64>,
    pub ablation: Option<AblationAxis>,
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: String::new(),
            seed: 42,
            split_seed: None,
            out: None,
            t_max: None,
            dt: None,
            depth: 9,
            width: 20,
            activation: Activation::Tanh,
            lr: 1e-3,
            max_iters: 200_000,
            patience: 20_000,
            weights: LossWeights::default(),
            mse0_unsquared: false,
            collocation_density: 1,
            log_every: 100,
            input_mode: InputMode::Default,
            input_scale: None,
            ablation: None,
            layers: vec![4, 9, 12, 15],
            neurons: vec![10, 15, 20, 30],
            activations: vec![
                Activation::Relu,
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Sine,
            ],
        }
    }
}

/// A configuration resolved against the system registry: everything a run
/// needs, with no unfilled defaults left.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub sys: SystemModel,
    pub train: TrainConfig,
    pub split_seed: u64,
    pub out: PathBuf,
    pub log_every: usize,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| invalid(field, format!("cannot parse {value:?}")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(invalid(
            field,
            format!("expected true or false, got {other:?}"),
        )),
    }
}

fn parse_list<T: std::str::FromStr>(field: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(invalid(field, "empty list"));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| invalid(field, format!("cannot parse {s:?}")))
        })
        .collect()
}

impl RunConfig {
    /// Parse `key = value` text. Later files layer on CLI overrides via the
    /// public fields.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                continue; // section headers are cosmetic
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                invalid(
                    &format!("line {}", lineno + 1),
                    format!("expected key = value, got {line:?}"),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(invalid(key, "duplicate key"));
            }
            cfg.apply(key, value)?;
        }
        if cfg.system.is_empty() {
            return Err(invalid("system", "missing (required)"));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        RunConfig::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "system" => self.system = value.to_string(),
            "seed" => self.seed = parse_num(key, value)?,
            "split_seed" => self.split_seed = Some(parse_num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "t_max" => self.t_max = Some(parse_num(key, value)?),
            "dt" => self.dt = Some(parse_num(key, value)?),
            "depth" => self.depth = parse_num(key, value)?,
            "width" => self.width = parse_num(key, value)?,
            "activation" => self.activation = value.parse()?,
            "lr" => self.lr = parse_num(key, value)?,
            "max_iters" => self.max_iters = parse_num(key, value)?,
            "patience" => self.patience = parse_num(key, value)?,
            "w0" => self.weights.w0 = parse_num(key, value)?,
            "w_ode" => self.weights.wg = parse_num(key, value)?,
            "w_y" => self.weights.wy = parse_num(key, value)?,
            "mse0_unsquared" => self.mse0_unsquared = parse_bool(key, value)?,
            "collocation_density" => self.collocation_density = parse_num(key, value)?,
            "log_every" => self.log_every = parse_num(key, value)?,
            "input" => {
                self.input_mode = match value {
                    "default" => InputMode::Default,
                    "zero" => InputMode::Zero,
                    other => {
                        return Err(invalid(
                            key,
                            format!("expected default or zero, got {other:?}"),
                        ))
                    }
                }
            }
            "input_scale" => self.input_scale = Some(parse_num(key, value)?),
            "ablation" => {
                self.ablation = Some(match value {
                    "layers_neurons" => AblationAxis::LayersNeurons,
                    "activations" => AblationAxis::Activations,
                    "weights" => AblationAxis::Weights,
                    other => {
                        return Err(invalid(
                            key,
                            format!(
                                "expected layers_neurons, activations or weights, got {other:?}"
                            ),
                        ))
                    }
                })
            }
            "layers" => self.layers = parse_list(key, value)?,
            "neurons" => self.neurons = parse_list(key, value)?,
            "activations" => {
                let names: Vec<String> = parse_list(key, value)?;
                self.activations = names
                    .iter()
                    .map(|n| n.parse())
                    .collect::<Result<Vec<_>>>()?;
            }
            other => return Err(invalid(other, "unknown key")),
        }
        Ok(())
    }

    /// Check field ranges and look the system up in the registry, producing
    /// everything a run needs.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut sys = by_name(&self.system)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", format!("must be positive, got {}", self.lr)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(invalid("patience", "must be at least 1"));
        }
        if self.depth == 0 {
            return Err(invalid("depth", "must be at least 1"));
        }
        if self.width == 0 {
            return Err(invalid("width", "must be at least 1"));
        }
        if self.collocation_density == 0 {
            return Err(invalid("collocation_density", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(invalid("log_every", "must be at least 1"));
        }
        for (name, w) in [
            ("w0", self.weights.w0),
            ("w_ode", self.weights.wg),
            ("w_y", self.weights.wy),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {w}")));
            }
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("t_max", format!("must be positive, got {t}")));
            }
            sys.t_max = t;
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt", format!("must be positive, got {dt}")));
            }
            sys.dt = dt;
        }
        if sys.b.is_none() && (self.input_mode != InputMode::Default || self.input_scale.is_some())
        {
            let field = if self.input_scale.is_some() {
                "input_scale"
            } else {
                "input"
            };
            return Err(invalid(
                field,
                format!("system {} has no input channel", sys.name),
            ));
        }
        if self.input_mode == InputMode::Zero {
            sys.input = InputSignal::Zero { n_u: sys.n_u() };
        } else if let Some(scale) = self.input_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid(
                    "input_scale",
                    format!("must be positive, got {scale}"),
                ));
            }
            if let InputSignal::TwoPhase { scale: s, .. } = &mut sys.input {
                *s = scale;
            }
        }
        let spec = LayerSpec::uniform(self.depth, self.width, sys.n_x, sys.m, self.activation);
        spec.validate(sys.n_x, sys.m)?;
        let collocation = if self.collocation_density == 1 {
            Collocation::TrainGrid
        } else {
            Collocation::Dense {
                factor: self.collocation_density,
            }
        };
        let train = TrainConfig {
            spec,
            lr: self.lr,
            max_iters: self.max_iters,
            patience: self.patience,
            weights: self.weights,
            seed: self.seed,
            collocation,
            mse0_unsquared: self.mse0_unsquared,
        };
        Ok(Resolved {
            train,
            split_seed: self.split_seed.unwrap_or(self.seed),
            out: self
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(&self.system)),
            log_every: self.log_every,
            sys,
        })
    }

    /// Echo every setting, defaults resolved, as parseable `key = value`
    /// lines.
    pub fn manifest(&self, resolved: &Resolved) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        push("system", self.system.clone());
        push("seed", self.seed.to_string());
        push("split_seed", resolved.split_seed.to_string());
        push("out", resolved.out.display().to_string());
        push("t_max", format!("{}", resolved.sys.t_max));
        push("dt", format!("{}", resolved.sys.dt));
        push("depth", self.depth.to_string());
        push("width", self.width.to_string());
        push("activation", self.activation.to_string());
        push("lr", format!("{}", self.lr));
        push("max_iters", self.max_iters.to_string());
        push("patience", self.patience.to_string());
        push("w0", format!("{}", self.weights.w0));
        push("w_ode", format!("{}", self.weights.wg));
        push("w_y", format!("{}", self.weights.wy));
        push("mse0_unsquared", self.mse0_unsquared.to_string());
        push("collocation_density", self.collocation_density.to_string());
        push("log_every", self.log_every.to_string());
        if resolved.sys.b.is_some() {
            push(
                "input",
                match self.input_mode {
                    InputMode::Default => "default".to_string(),
                    InputMode::Zero => "zero".to_string(),
                },
            );
            if let InputSignal::TwoPhase { scale, .. } = &resolved.sys.input {
                push("input_scale", format!("{scale}"));
            }
        }
        if let Some(axis) = self.ablation {
            push(
                "ablation",
                match axis {
                    AblationAxis::LayersNeurons => "layers_neurons".to_string(),
                    AblationAxis::Activations => "activations".to_string(),
                    AblationAxis::Weights => "weights".to_string(),
                },
            );
            let join_usize = |v: &[usize]| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            push("layers", join_usize(&self.layers));
            push("neurons", join_usize(&self.neurons));
            push(
                "activations",
                self.activations
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# experiment definition
[experiment]
system = harmonic_oscillator
seed = 7
split_seed = 9
out = /tmp/run-here

[grid]
t_max = 10.0
dt = 0.004

[network]
depth = 4
width = 12
activation = sine

[training]
lr = 0.002
max_iters = 5000
patience = 800
w0 = 1.5
w_ode = 0.5
w_y = 1.0
mse0_unsquared = true
collocation_density = 2
log_every = 50
";

    #[test]
    fn full_file_parses_every_field() {
        let cfg = RunConfig::parse(FULL).unwrap();
        assert_eq!(cfg.system, "harmonic_oscillator");
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.split_seed, Some(9));
        assert_eq!(
            cfg.out.as_deref(),
            Some(std::path::Path::new("/tmp/run-here"))
        );
        assert_eq!(cfg.t_max, Some(10.0));
        assert_eq!(cfg.dt, Some(0.004));
        assert_eq!((cfg.depth, cfg.width), (4, 12));
        assert_eq!(cfg.activation, Activation::Sine);
        assert_eq!(cfg.lr, 0.002);
        assert_eq!((cfg.max_iters, cfg.patience), (5000, 800));
        assert_eq!(
            cfg.weights,
            LossWeights {
                w0: 1.5,
                wg: 0.5,
                wy: 1.0
            }
        );
        assert!(cfg.mse0_unsquared);
        assert_eq!(cfg.collocation_density, 2);
        assert_eq!(cfg.log_every, 50);
    }

    #[test]
    fn minimal_file_gets_documented_defaults() {
        let cfg = RunConfig::parse("system = reverse_duffing\n").unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!((cfg.depth, cfg.width), (9, 20));
        assert_eq!(cfg.activation, Activation::Tanh);
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.max_iters, 200_000);
        assert_eq!(cfg.patience, 20_000);
        assert_eq!(cfg.weights, LossWeights::default());
        assert!(!cfg.mse0_unsquared);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.sys.t_max, 20.0);
        assert_eq!(r.sys.dt, 2e-3);
        assert_eq!(r.split_seed, 42);
        assert_eq!(r.out, PathBuf::from("runs/reverse_duffing"));
    }

    #[test]
    fn negative_learning_rate_is_rejected_naming_the_field() {
        let cfg = RunConfig::parse("system = reverse_duffing\nlr = -1\n").unwrap();
        match cfg.resolve() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "lr"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn unknown_system_and_unknown_key_are_rejected() {
        let cfg = RunConfig::parse("system = pendulum\n").unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::UnknownSystem { .. })));
        match RunConfig::parse("system = reverse_duffing\nlearning_rate = 0.1\n") {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "learning_rate"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_are_rejected() {
        assert!(matches!(
            RunConfig::parse("system reverse_duffing\n"),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            RunConfig::parse("system = a\nsystem = b\n"),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            RunConfig::parse("seed = 1\n"),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            RunConfig::parse("system = reverse_duffing\nmse0_unsquared = yes\n"),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn grid_overrides_apply_to_the_resolved_system() {
        let cfg = RunConfig::parse("system = reverse_duffing\nt_max = 5\ndt = 0.01\n").unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.sys.t_max, 5.0);
        assert_eq!(r.sys.dt, 0.01);
        let bad = RunConfig::parse("system = reverse_duffing\ndt = 0\n").unwrap();
        assert!(matches!(bad.resolve(), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn input_settings_only_apply_to_driven_systems() {
        let cfg = RunConfig::parse("system = reverse_duffing\ninput_scale = 0.5\n").unwrap();
        match cfg.resolve() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "input_scale"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
        let motor = RunConfig::parse("system = induction_motor\ninput = zero\n").unwrap();
        let r = motor.resolve().unwrap();
        assert_eq!(r.sys.forcing(0.3), vec![0.0; 5]);
        let scaled = RunConfig::parse("system = induction_motor\ninput_scale = 0.25\n").unwrap();
        let r = scaled.resolve().unwrap();
        match r.sys.input {
            InputSignal::TwoPhase { scale, .. } => assert_eq!(scale, 0.25),
            ref other => panic!("unexpected input {other:?}"),
        }
    }

    #[test]
    fn ablation_axes_parse_with_defaults() {
        let cfg =
            RunConfig::parse("system = reverse_duffing\nablation = layers_neurons\n").unwrap();
        assert_eq!(cfg.ablation, Some(AblationAxis::LayersNeurons));
        assert_eq!(cfg.layers, vec![4, 9, 12, 15]);
        assert_eq!(cfg.neurons, vec![10, 15, 20, 30]);
        let cfg = RunConfig::parse(
            "system = reverse_duffing\nablation = activations\nactivations = tanh,sine\n",
        )
        .unwrap();
        assert_eq!(cfg.activations, vec![Activation::Tanh, Activation::Sine]);
        assert!(RunConfig::parse("system = reverse_duffing\nablation = nonsense\n").is_err());
    }

    #[test]
    fn weight_cases_match_the_sensitivity_grid() {
        assert_eq!(WEIGHT_CASES.len(), 7);
        assert_eq!(
            WEIGHT_CASES[0],
            LossWeights {
                w0: 1.0,
                wg: 1.0,
                wy: 1.0
            }
        );
        assert_eq!(
            WEIGHT_CASES[2],
            LossWeights {
                w0: 1.5,
                wg: 0.5,
                wy: 1.0
            }
        );
        assert_eq!(
            WEIGHT_CASES[5],
            LossWeights {
                w0: 2.0,
                wg: 1.0,
                wy: 0.5
            }
        );
    }

    #[test]
    fn manifest_round_trips_to_the_same_configuration() {
        for text in [
            "system = reverse_duffing\n",
            FULL,
            "system = induction_motor\nt_max = 1\ninput_scale = 0.5\nseed = 3\n",
            "system = rigid_body\nablation = weights\n",
        ] {
            let cfg = RunConfig::parse(text).unwrap();
            let resolved = cfg.resolve().unwrap();
            let echo = cfg.manifest(&resolved);
            let again = RunConfig::parse(&echo).unwrap();
            let r2 = again.resolve().unwrap();
            assert_eq!(r2.train, resolved.train, "config: {text}");
            assert_eq!(r2.split_seed, resolved.split_seed);
            assert_eq!(r2.out, resolved.out);
            assert_eq!(r2.sys.t_max, resolved.sys.t_max);
            assert_eq!(r2.sys.dt, resolved.sys.dt);
            assert_eq!(r2.sys.input, resolved.sys.input);
        }
    }
}
