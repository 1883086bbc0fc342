//! The observer network.
//!
//! A fully connected net maps the scalar time `t` to `n_x + n_x*m` outputs:
//! the first `n_x` are the state estimate `xhat(t)`, the rest reshape
//! row-major into the injection gain `L(t)` (`n_x` rows, `m` columns, entry
//! `(i, j)` at flat position `i*m + j`). Hidden layers share one activation;
//! the output layer is linear.
//!
//! Three evaluation paths share this architecture: plain `f64` for
//! inference, [`DualScalar`] for exact time derivatives, and a batched
//! tape recording for training gradients.

use crate::autodiff::{ActScalar, DualScalar, Scalar, Tape, Var};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sine,
    Relu,
    Sigmoid,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Tanh,
        Activation::Sine,
        Activation::Relu,
        Activation::Sigmoid,
    ];

    fn apply<S: ActScalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sine => z.sin(),
            Activation::Relu => z.relu(),
            Activation::Sigmoid => z.sigmoid(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        };
        f.write_str(name)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sine" => Ok(Activation::Sine),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidConfig {
                field: "activation".into(),
                reason: format!("unknown activation `{other}` (tanh|sine|relu|sigmoid)"),
            }),
        }
    }
}

/// Layer widths from input to output, plus the hidden activation.
/// `widths[0]` is always 1 (scalar time input).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl LayerSpec {
    /// `depth` hidden layers of `width` neurons between the scalar input and
    /// an output layer of `n_x + n_x*m` units.
    pub fn uniform(
        depth: usize,
        width: usize,
        n_x: usize,
        m: usize,
        activation: Activation,
    ) -> Self {
        let mut widths = Vec::with_capacity(depth + 2);
        widths.push(1);
        widths.extend(std::iter::repeat_n(width, depth));
        widths.push(n_x + n_x * m);
        LayerSpec { widths, activation }
    }

    pub fn validate(&self, n_x: usize, m: usize) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::ShapeMismatch {
                context: "network needs at least an input and an output layer".into(),
            });
        }
        if self.widths[0] != 1 {
            return Err(Error::ShapeMismatch {
                context: format!("input width must be 1, got {}", self.widths[0]),
            });
        }
        if self.widths.contains(&0) {
            return Err(Error::ShapeMismatch {
                context: "zero-width layer".into(),
            });
        }
        let expect = n_x + n_x * m;
        let got = *self.widths.last().unwrap();
        if got != expect {
            return Err(Error::ShapeMismatch {
                context: format!("output width {got} but the system needs n_x + n_x*m = {expect}"),
            });
        }
        Ok(())
    }

    /// Number of weight+bias entries in the flat parameter vector.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// Offset of layer `j`'s weight block in the flat vector.
    pub fn layer_offset(&self, j: usize) -> usize {
        (0..j)
            .map(|k| self.widths[k + 1] * self.widths[k] + self.widths[k + 1])
            .sum()
    }
}

/// Flat parameter vector plus the layer layout that gives it shape.
///
/// Layout per layer `j` (mapping width `in` to `out`): the weight matrix
/// row-major (`out * in` entries), then the bias (`out` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: LayerSpec,
    pub flat: Vec<f64>,
    pub rng_seed: u64,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases: each weight is uniform on
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, drawn from a
    /// counter-based generator so the same seed rebuilds identical bits.
    pub fn init_glorot(spec: LayerSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(spec.param_count());
        for w in spec.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for _ in 0..fan_out * fan_in {
                flat.push(dist.sample(&mut rng));
            }
            flat.extend(std::iter::repeat_n(0.0, fan_out));
        }
        NetworkParams {
            spec,
            flat,
            rng_seed: seed,
        }
    }

    /// All-zero parameters (useful as a neutral baseline in tests).
    pub fn zeros(spec: LayerSpec) -> Self {
        let flat = vec![0.0; spec.param_count()];
        NetworkParams {
            spec,
            flat,
            rng_seed: 0,
        }
    }

    /// Weight and bias slices of layer `j`.
    pub fn layer(&self, j: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.spec.widths[j], self.spec.widths[j + 1]);
        let off = self.spec.layer_offset(j);
        let w_end = off + fan_out * fan_in;
        (&self.flat[off..w_end], &self.flat[w_end..w_end + fan_out])
    }

    /// Save as a versioned, line-oriented text checkpoint. Values are
    /// written with 17 significant digits, which round-trips `f64` exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("pinn-obs checkpoint v1\n");
        out.push_str(&format!("seed {}\n", self.rng_seed));
        out.push_str(&format!("activation {}\n", self.spec.activation));
        out.push_str("widths");
        for w in &self.spec.widths {
            out.push_str(&format!(" {w}"));
        }
        out.push('\n');
        out.push_str(&format!("params {}\n", self.flat.len()));
        for v in &self.flat {
            out.push_str(&format!("{v:.16e}\n"));
        }
        let mut file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let bad = |reason: &str| Error::MalformedFile {
            path: path.display().to_string(),
            reason: reason.into(),
        };
        let mut lines = text.lines();
        if lines.next() != Some("pinn-obs checkpoint v1") {
            return Err(bad("missing or unsupported version header"));
        }
        let seed_line = lines.next().ok_or_else(|| bad("missing seed line"))?;
        let rng_seed = seed_line
            .strip_prefix("seed ")
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| bad("malformed seed line"))?;
        let act_line = lines.next().ok_or_else(|| bad("missing activation line"))?;
        let activation = act_line
            .strip_prefix("activation ")
            .ok_or_else(|| bad("malformed activation line"))?
            .parse::<Activation>()
            .map_err(|_| bad("unknown activation"))?;
        let widths_line = lines.next().ok_or_else(|| bad("missing widths line"))?;
        let widths = widths_line
            .strip_prefix("widths")
            .ok_or_else(|| bad("malformed widths line"))?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("malformed widths line"))?;
        let count_line = lines.next().ok_or_else(|| bad("missing params line"))?;
        let count = count_line
            .strip_prefix("params ")
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("malformed params line"))?;
        let spec = LayerSpec { widths, activation };
        if spec.param_count() != count {
            return Err(bad("param count does not match widths"));
        }
        let mut flat = Vec::with_capacity(count);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            flat.push(
                line.parse::<f64>()
                    .map_err(|_| bad("malformed parameter value"))?,
            );
        }
        if flat.len() != count {
            return Err(bad("wrong number of parameter values"));
        }
        Ok(NetworkParams {
            spec,
            flat,
            rng_seed,
        })
    }
}

/// Time-varying observer gain: `n_x` rows, `m` columns, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    /// Reshape a flat slice of `n_x * m` head outputs: entry `(i, j)` comes
    /// from flat position `i*m + j`.
    pub fn from_flat(flat: &[f64], n_x: usize, m: usize) -> Self {
        assert_eq!(flat.len(), n_x * m, "gain head width mismatch");
        GainMatrix {
            n_rows: n_x,
            n_cols: m,
            data: flat.to_vec(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn flatten(&self) -> &[f64] {
        &self.data
    }

    /// `L v` for an innovation vector `v` of length `m`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols, "innovation length mismatch");
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

fn forward_impl<S: ActScalar>(p: &NetworkParams, t: S) -> Vec<S> {
    let widths = &p.spec.widths;
    let last = widths.len() - 2;
    let mut a: Vec<S> = vec![t];
    for j in 0..widths.len() - 1 {
        let (w, b) = p.layer(j);
        let (fan_in, fan_out) = (widths[j], widths[j + 1]);
        let mut z: Vec<S> = Vec::with_capacity(fan_out);
        for i in 0..fan_out {
            let row = &w[i * fan_in..(i + 1) * fan_in];
            let mut acc = a[0].scale(row[0]);
            for k in 1..fan_in {
                acc = acc + a[k].scale(row[k]);
            }
            z.push(acc + S::of(b[i]));
        }
        a = if j < last {
            z.into_iter().map(|v| p.spec.activation.apply(v)).collect()
        } else {
            z
        };
    }
    a
}

/// Evaluate the network at time `t`: state estimate plus gain.
pub fn forward(p: &NetworkParams, t: f64, n_x: usize, m: usize) -> (Vec<f64>, GainMatrix) {
    p.spec
        .validate(n_x, m)
        .expect("spec incompatible with system dimensions");
    let out = forward_impl(p, t);
    let gain = GainMatrix::from_flat(&out[n_x..], n_x, m);
    (out[..n_x].to_vec(), gain)
}

/// Evaluate the network and the exact time derivative of the state estimate.
/// The value components are bit-identical to [`forward`]: both run the same
/// arithmetic, the dual path merely carries derivatives alongside.
pub fn forward_with_time_derivative(
    p: &NetworkParams,
    t: f64,
    n_x: usize,
    m: usize,
) -> (Vec<f64>, Vec<f64>, GainMatrix) {
    p.spec
        .validate(n_x, m)
        .expect("spec incompatible with system dimensions");
    let out = forward_impl(p, DualScalar::seed(t));
    let xhat = out[..n_x].iter().map(|d| d.value).collect();
    let dxhat = out[..n_x].iter().map(|d| d.deriv).collect();
    let gain_values: Vec<f64> = out[n_x..].iter().map(|d| d.value).collect();
    (xhat, dxhat, GainMatrix::from_flat(&gain_values, n_x, m))
}

/// Network parameters recorded as tape leaves, for batched training passes.
pub struct TapedNet<'t> {
    layers: Vec<(Var<'t>, Var<'t>)>,
    activation: Activation,
}

impl<'t> TapedNet<'t> {
    pub fn record(tape: &'t Tape, p: &NetworkParams) -> Self {
        let mut layers = Vec::with_capacity(p.spec.layer_count());
        for j in 0..p.spec.layer_count() {
            let (wj, bj) = p.layer(j);
            let (fan_in, fan_out) = (p.spec.widths[j], p.spec.widths[j + 1]);
            let w = tape.leaf(Array2::from_shape_vec((fan_out, fan_in), wj.to_vec()).unwrap());
            let b = tape.leaf(Array2::from_shape_vec((fan_out, 1), bj.to_vec()).unwrap());
            layers.push((w, b));
        }
        TapedNet {
            layers,
            activation: p.spec.activation,
        }
    }

    /// Parameter leaves in flat-vector order (`W0, b0, W1, b1, ...`).
    pub fn leaves(&self) -> Vec<Var<'t>> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    fn activate(&self, z: Var<'t>) -> Var<'t> {
        match self.activation {
            Activation::Tanh => z.tanh(),
            Activation::Sine => z.sin(),
            Activation::Relu => z.relu(),
            Activation::Sigmoid => z.sigmoid(),
        }
    }

    /// Hidden-activation slope as a recorded value, given pre-activation `z`
    /// and activation output `a`.
    fn slope(&self, z: Var<'t>, a: Var<'t>) -> Var<'t> {
        match self.activation {
            Activation::Tanh => a.one_minus_sq(),
            Activation::Sine => z.cos(),
            Activation::Relu => z.step_pos(),
            Activation::Sigmoid => a * a.scale(-1.0).offset(1.0),
        }
    }

    /// Batched forward: `times` is a `1 x n` row, the result is the
    /// `(n_x + n_x*m) x n` output block.
    pub fn forward(&self, times: Var<'t>) -> Var<'t> {
        let last = self.layers.len() - 1;
        let mut a = times;
        for (j, &(w, b)) in self.layers.iter().enumerate() {
            let z = w.matmul(a).add_col(b);
            a = if j < last { self.activate(z) } else { z };
        }
        a
    }

    /// Batched forward-with-tangent: alongside values, propagate the
    /// derivative of every unit with respect to the time input (seeded with
    /// ones). Both streams are recorded, so a backward sweep differentiates
    /// through the time derivative as well.
    pub fn forward_dual(&self, times: Var<'t>, tape: &'t Tape) -> (Var<'t>, Var<'t>) {
        let n = times.shape().1;
        let last = self.layers.len() - 1;
        let mut a = times;
        let mut da = tape.leaf(Array2::ones((1, n)));
        for (j, &(w, b)) in self.layers.iter().enumerate() {
            let z = w.matmul(a).add_col(b);
            let dz = w.matmul(da);
            if j < last {
                let act = self.activate(z);
                da = self.slope(z, act) * dz;
                a = act;
            } else {
                a = z;
                da = dz;
            }
        }
        (a, da)
    }
}
