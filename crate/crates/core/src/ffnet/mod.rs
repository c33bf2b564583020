//! Multiscale Fourier-feature network with trainable embedding frequencies.
//!
//! Each frequency group embeds `(X, Y, H)` as
//! `[sin(2 pi f X); cos(2 pi f X); sin(2 pi f Y); cos(2 pi f Y); H]`, runs the
//! embedding through the same stack of hidden layers, and a linear head maps
//! the concatenated final hidden states of all groups to `P_net`.
//!
//! Parameters are addressed by a flat slot index in this order: every
//! group's frequencies, then each hidden layer's weights (row-major,
//! `[out][in]`) and biases, then the head weights and bias.

pub mod batch;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{CoordJet, Jet, Scalar, Tape, Var};

pub use batch::{BatchEngine, BatchPoint, ForwardPass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParamCount { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    /// `(f, f', f'', f''')` at `z`.
    #[inline]
    pub fn derivatives(self, z: f64) -> (f64, f64, f64, f64) {
        match self {
            Activation::Sigmoid => {
                let s = crate::autodiff::sigmoid(z);
                let s1 = s * (1.0 - s);
                let s2 = s1 * (1.0 - 2.0 * s);
                let s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s);
                (s, s1, s2, s3)
            }
            Activation::Tanh => {
                let t = z.tanh();
                let t1 = 1.0 - t * t;
                let t2 = -2.0 * t * t1;
                let t3 = t1 * (6.0 * t * t - 2.0);
                (t, t1, t2, t3)
            }
        }
    }

    fn apply_jet<S: Scalar>(self, z: &CoordJet<S>) -> CoordJet<S> {
        match self {
            Activation::Sigmoid => z.sigmoid(),
            Activation::Tanh => z.tanh(),
        }
    }
}

/// Whether embedding frequencies are optimized or held at their initial draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    #[default]
    #[serde(rename = "trainable_freq")]
    Trainable,
    #[serde(rename = "fixed_freq")]
    Fixed,
}

impl FrequencyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyMode::Trainable => "trainable_freq",
            FrequencyMode::Fixed => "fixed_freq",
        }
    }
}

/// Unit of the embedding frequencies: `Cycles` embeds `sin(2 pi f X)`,
/// `Radians` embeds `sin(f X)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnits {
    #[default]
    Cycles,
    Radians,
}

impl FrequencyUnits {
    /// Angle per unit frequency and unit coordinate.
    pub fn scale(self) -> f64 {
        match self {
            FrequencyUnits::Cycles => TAU,
            FrequencyUnits::Radians => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub sigmas: Vec<f64>,
    pub freqs_per_group: usize,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub activation: Activation,
    #[serde(default)]
    pub units: FrequencyUnits,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            sigmas: vec![1.0, 20.0, 50.0],
            freqs_per_group: 30,
            hidden_layers: 5,
            neurons: 100,
            activation: Activation::Sigmoid,
            units: FrequencyUnits::Cycles,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidArchitecture(m.to_string()));
        if self.sigmas.is_empty() {
            return bad("need at least one frequency group");
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("sigmas must be finite and non-negative");
        }
        if self.freqs_per_group == 0 {
            return bad("need at least one frequency per group");
        }
        if self.hidden_layers == 0 {
            return bad("need at least one hidden layer");
        }
        if self.neurons == 0 {
            return bad("need at least one neuron per layer");
        }
        Ok(())
    }

    /// Width of the embedding fed to the first hidden layer.
    pub fn input_width(&self) -> usize {
        4 * self.freqs_per_group + 1
    }

    pub fn param_count(&self) -> usize {
        let n = self.neurons;
        let g = self.sigmas.len();
        let first = self.input_width() * n + n;
        let rest = (self.hidden_layers - 1) * (n * n + n);
        g * self.freqs_per_group + first + rest + g * n + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGroup {
    pub sigma: f64,
    pub freqs: Vec<f64>,
}

/// Fully connected layer, weights row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite deviation");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Every trainable quantity of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    pub activation: Activation,
    #[serde(default)]
    pub units: FrequencyUnits,
    pub groups: Vec<FrequencyGroup>,
    pub hidden: Vec<DenseLayer>,
    pub head: DenseLayer,
}

impl NetworkParams {
    /// Glorot-normal weights, zero biases, frequencies `N(0, sigma)` per group.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self, NetError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = arch
            .sigmas
            .iter()
            .map(|&sigma| {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                FrequencyGroup {
                    sigma,
                    freqs: (0..arch.freqs_per_group)
                        .map(|_| normal.sample(&mut rng))
                        .collect(),
                }
            })
            .collect();
        let mut hidden = Vec::with_capacity(arch.hidden_layers);
        let mut width = arch.input_width();
        for _ in 0..arch.hidden_layers {
            hidden.push(DenseLayer::glorot(width, arch.neurons, &mut rng));
            width = arch.neurons;
        }
        let head = DenseLayer::glorot(arch.sigmas.len() * arch.neurons, 1, &mut rng);
        Ok(Self {
            activation: arch.activation,
            units: arch.units,
            groups,
            hidden,
            head,
        })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            sigmas: self.groups.iter().map(|g| g.sigma).collect(),
            freqs_per_group: self.groups[0].freqs.len(),
            hidden_layers: self.hidden.len(),
            neurons: self.hidden[0].outputs,
            activation: self.activation,
            units: self.units,
        }
    }

    /// Checks internal shape consistency (used after deserialization).
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidArchitecture(m));
        if self.groups.is_empty() || self.hidden.is_empty() {
            return bad("empty network".into());
        }
        let f = self.groups[0].freqs.len();
        if f == 0 || self.groups.iter().any(|g| g.freqs.len() != f) {
            return bad("frequency groups must share one non-zero size".into());
        }
        let mut width = 4 * f + 1;
        let n = self.hidden[0].outputs;
        for (l, layer) in self.hidden.iter().enumerate() {
            if layer.inputs != width
                || layer.outputs != n
                || layer.weights.len() != width * n
                || layer.bias.len() != n
            {
                return bad(format!("hidden layer {l} has inconsistent shape"));
            }
            width = n;
        }
        let h = &self.head;
        if h.inputs != self.groups.len() * n || h.outputs != 1 || h.weights.len() != h.inputs || h.bias.len() != 1
        {
            return bad("head has inconsistent shape".into());
        }
        Ok(())
    }

    pub fn frequency_count(&self) -> usize {
        self.groups.iter().map(|g| g.freqs.len()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.frequency_count() + self.hidden.iter().map(DenseLayer::len).sum::<usize>() + self.head.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in &self.groups {
            out.extend_from_slice(&g.freqs);
        }
        for l in self.hidden.iter().chain(std::iter::once(&self.head)) {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), NetError> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(NetError::ParamCount {
                got: flat.len(),
                expected,
            });
        }
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (a, b) = rest.split_at(dst.len());
            dst.copy_from_slice(a);
            rest = b;
        };
        for g in &mut self.groups {
            take(&mut g.freqs);
        }
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            take(&mut l.weights);
            take(&mut l.bias);
        }
        Ok(())
    }

    /// Human-readable name of a flat slot, e.g. `hidden[2].weights[17]`.
    pub fn slot_name(&self, slot: usize) -> String {
        let mut s = slot;
        for (gi, g) in self.groups.iter().enumerate() {
            if s < g.freqs.len() {
                return format!("groups[{gi}].freqs[{s}]");
            }
            s -= g.freqs.len();
        }
        for (li, l) in self.hidden.iter().enumerate() {
            if s < l.weights.len() {
                return format!("hidden[{li}].weights[{s}]");
            }
            s -= l.weights.len();
            if s < l.bias.len() {
                return format!("hidden[{li}].bias[{s}]");
            }
            s -= l.bias.len();
        }
        if s < self.head.weights.len() {
            return format!("head.weights[{s}]");
        }
        s -= self.head.weights.len();
        if s < self.head.bias.len() {
            return "head.bias".to_string();
        }
        format!("<out of range {slot}>")
    }

    /// Puts every parameter on `tape` under its flat slot. Frequencies become
    /// constants (no slot) in fixed mode.
    pub fn register<'t>(&self, tape: &'t Tape, mode: FrequencyMode) -> Vec<Var<'t>> {
        let nf = self.frequency_count();
        self.to_flat()
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if i < nf && mode == FrequencyMode::Fixed {
                    tape.constant(v)
                } else {
                    tape.param(i, v)
                }
            })
            .collect()
    }

    /// `P_net` with full jets, reading parameters from a flat slice laid out
    /// like [`to_flat`](Self::to_flat).
    pub fn forward_with<S: Scalar>(
        &self,
        values: &[S],
        x: &CoordJet<S>,
        y: &CoordJet<S>,
        h: &CoordJet<S>,
    ) -> CoordJet<S> {
        assert_eq!(values.len(), self.param_count(), "parameter slice length");
        let nf = self.frequency_count();
        let (freqs, mut rest) = values.split_at(nf);
        let mut layers = Vec::with_capacity(self.hidden.len());
        for l in &self.hidden {
            let (w, r) = rest.split_at(l.weights.len());
            let (b, r) = r.split_at(l.bias.len());
            layers.push((l, w, b));
            rest = r;
        }
        let (head_w, head_b) = rest.split_at(self.head.weights.len());

        let mut out: Option<CoordJet<S>> = None;
        let mut offset = 0;
        for (gi, g) in self.groups.iter().enumerate() {
            let f = &freqs[offset..offset + g.freqs.len()];
            offset += g.freqs.len();
            let mut act = embed_scaled(f, self.units.scale(), x, y, h);
            for (layer, w, b) in &layers {
                act = dense(layer, w, b, &act, self.activation);
            }
            let n = act.len();
            for (j, a) in act.iter().enumerate() {
                let term = a.scale_by(&head_w[gi * n + j]);
                out = Some(match out {
                    None => term,
                    Some(o) => o + term,
                });
            }
        }
        out.expect("at least one group").add_scalar(&head_b[0])
    }

    /// `f64` forward pass.
    pub fn forward(&self, x: &Jet, y: &Jet, h: &Jet) -> Jet {
        self.forward_with(&self.to_flat(), x, y, h)
    }
}

fn dense<S: Scalar>(
    layer: &DenseLayer,
    w: &[S],
    b: &[S],
    input: &[CoordJet<S>],
    act: Activation,
) -> Vec<CoordJet<S>> {
    (0..layer.outputs)
        .map(|o| {
            let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
            let mut z: Option<CoordJet<S>> = None;
            for (wi, a) in row.iter().zip(input) {
                let t = a.scale_by(wi);
                z = Some(match z {
                    None => t,
                    Some(z) => z + t,
                });
            }
            act.apply_jet(&z.expect("non-empty layer").add_scalar(&b[o]))
        })
        .collect()
}

/// Fourier embedding of one group: `4 |f| + 1` jets, in the order
/// sin X block, cos X block, sin Y block, cos Y block, then raw `H`.
pub fn embed<S: Scalar>(
    freqs: &[S],
    x: &CoordJet<S>,
    y: &CoordJet<S>,
    h: &CoordJet<S>,
) -> Vec<CoordJet<S>> {
    embed_scaled(freqs, TAU, x, y, h)
}

/// [`embed`] with angle `scale * f * X` in place of `2 pi f X`.
pub fn embed_scaled<S: Scalar>(
    freqs: &[S],
    scale: f64,
    x: &CoordJet<S>,
    y: &CoordJet<S>,
    h: &CoordJet<S>,
) -> Vec<CoordJet<S>> {
    let theta = |c: &CoordJet<S>, f: &S| c.scale_by(f).scale(scale);
    let tx: Vec<_> = freqs.iter().map(|f| theta(x, f)).collect();
    let ty: Vec<_> = freqs.iter().map(|f| theta(y, f)).collect();
    let mut out = Vec::with_capacity(4 * freqs.len() + 1);
    out.extend(tx.iter().map(|t| t.sin()));
    out.extend(tx.iter().map(|t| t.cos()));
    out.extend(ty.iter().map(|t| t.sin()));
    out.extend(ty.iter().map(|t| t.cos()));
    out.push(h.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{seed_coordinate, Axis};

    fn small_arch() -> Architecture {
        Architecture {
            sigmas: vec![1.0, 3.0],
            freqs_per_group: 2,
            hidden_layers: 2,
            neurons: 3,
            activation: Activation::Sigmoid,
            ..Default::default()
        }
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = NetworkParams::init(&Architecture::default(), 9).unwrap();
        let b = NetworkParams::init(&Architecture::default(), 9).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
        assert!(a.hidden.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert_eq!(a.head.bias, vec![0.0]);
        assert_eq!(a.hidden[0].inputs, 121);
        assert_eq!(a.head.inputs, 300);
        assert_eq!(a.param_count(), Architecture::default().param_count());
        assert_ne!(a.to_flat(), NetworkParams::init(&Architecture::default(), 10).unwrap().to_flat());
    }

    #[test]
    fn invalid_architectures_rejected() {
        let mut a = small_arch();
        a.sigmas.clear();
        assert!(NetworkParams::init(&a, 0).is_err());
        let mut a = small_arch();
        a.hidden_layers = 0;
        assert!(NetworkParams::init(&a, 0).is_err());
        let mut a = small_arch();
        a.freqs_per_group = 0;
        assert!(NetworkParams::init(&a, 0).is_err());
    }

    #[test]
    fn flat_round_trip_and_slot_names() {
        let p = NetworkParams::init(&small_arch(), 1).unwrap();
        let mut q = p.clone();
        let flat: Vec<f64> = p.to_flat().iter().map(|v| v + 1.0).collect();
        q.set_flat(&flat).unwrap();
        assert_eq!(q.to_flat(), flat);
        assert!(q.set_flat(&flat[1..]).is_err());
        assert_eq!(p.slot_name(0), "groups[0].freqs[0]");
        assert_eq!(p.slot_name(3), "groups[1].freqs[1]");
        assert_eq!(p.slot_name(4), "hidden[0].weights[0]");
        assert_eq!(p.slot_name(p.param_count() - 1), "head.bias");
    }

    #[test]
    fn embedding_layout() {
        let f = [0.0, 1.0];
        let x = seed_coordinate(0.25, Axis::X);
        let y = seed_coordinate(0.6, Axis::Y);
        let h = Jet::from_array([1.7, -1.0, 0.1, 0.0, 0.0]);
        let e = embed(&f, &x, &y, &h);
        assert_eq!(e.len(), 9);
        // f = 0 entries
        assert_eq!(e[0].v, 0.0);
        assert_eq!(e[2].v, 1.0);
        assert_eq!(e[4].v, 0.0);
        assert_eq!(e[6].v, 1.0);
        // f = 1, X = 0.25
        assert!((e[1].v - 1.0).abs() < 1e-15);
        assert!(e[3].v.abs() < 1e-15);
        assert_eq!(e[8], h);

        let origin = embed(&[0.4, -2.0], &seed_coordinate(0.0, Axis::X), &seed_coordinate(0.0, Axis::Y), &h);
        for k in 0..2 {
            assert_eq!(origin[k].v, 0.0);
            assert_eq!(origin[2 + k].v, 1.0);
            assert_eq!(origin[4 + k].v, 0.0);
            assert_eq!(origin[6 + k].v, 1.0);
        }
    }

    #[test]
    fn zero_head_gives_zero_output() {
        let mut p = NetworkParams::init(&small_arch(), 2).unwrap();
        p.head.weights.iter_mut().for_each(|w| *w = 0.0);
        let out = p.forward(
            &seed_coordinate(0.3, Axis::X),
            &seed_coordinate(0.8, Axis::Y),
            &Jet::constant(1.4),
        );
        assert_eq!(out.as_array(), [0.0; 5]);
    }

    #[test]
    fn hand_evaluated_toy_network() {
        // one group, one frequency, one hidden neuron
        let p = NetworkParams {
            activation: Activation::Sigmoid,
            units: FrequencyUnits::Cycles,
            groups: vec![FrequencyGroup {
                sigma: 1.0,
                freqs: vec![0.5],
            }],
            hidden: vec![DenseLayer {
                inputs: 5,
                outputs: 1,
                weights: vec![0.3, -0.2, 0.7, 0.1, 0.4],
                bias: vec![0.05],
            }],
            head: DenseLayer {
                inputs: 1,
                outputs: 1,
                weights: vec![1.5],
                bias: vec![-0.25],
            },
        };
        p.validate().unwrap();
        let (x, y, h) = (0.2f64, 0.7f64, 1.3f64);
        let out = p.forward(
            &seed_coordinate(x, Axis::X),
            &seed_coordinate(y, Axis::Y),
            &Jet::constant(h),
        );
        let w = TAU * 0.5;
        let z = 0.3 * (w * x).sin() - 0.2 * (w * x).cos() + 0.7 * (w * y).sin() + 0.1 * (w * y).cos()
            + 0.4 * h
            + 0.05;
        let s = 1.0 / (1.0 + (-z).exp());
        assert!((out.v - (1.5 * s - 0.25)).abs() < 1e-14);
        let zx = w * (0.3 * (w * x).cos() + 0.2 * (w * x).sin());
        let zxx = -w * w * (0.3 * (w * x).sin() - 0.2 * (w * x).cos());
        let s1 = s * (1.0 - s);
        let s2 = s1 * (1.0 - 2.0 * s);
        assert!((out.dx - 1.5 * s1 * zx).abs() < 1e-14);
        assert!((out.dxx - 1.5 * (s2 * zx * zx + s1 * zxx)).abs() < 1e-14);
    }

    #[test]
    fn group_permutation_symmetry() {
        let p = NetworkParams::init(&small_arch(), 4).unwrap();
        let mut q = p.clone();
        q.groups.swap(0, 1);
        let n = p.hidden[0].outputs;
        let (a, b) = p.head.weights.split_at(n);
        q.head.weights = [b, a].concat();
        let args = (
            seed_coordinate(0.41, Axis::X),
            seed_coordinate(0.13, Axis::Y),
            Jet::from_array([1.2, -1.0, 0.0, 0.0, 0.0]),
        );
        let o1 = p.forward(&args.0, &args.1, &args.2);
        let o2 = q.forward(&args.0, &args.1, &args.2);
        for (u, v) in o1.as_array().iter().zip(o2.as_array()) {
            assert!((u - v).abs() <= 1e-14 * u.abs().max(1.0));
        }
    }

    #[test]
    fn fixed_mode_leaves_frequencies_off_the_tape() {
        let p = NetworkParams::init(&small_arch(), 5).unwrap();
        for mode in [FrequencyMode::Trainable, FrequencyMode::Fixed] {
            let tape = Tape::new();
            let vals = p.register(&tape, mode);
            let x = seed_coordinate(0.3, Axis::X).lift(&vals[0]);
            let y = seed_coordinate(0.6, Axis::Y).lift(&vals[0]);
            let h = Jet::constant(1.5).lift(&vals[0]);
            let out = p.forward_with(&vals, &x, &y, &h);
            let g = (out.dxx * out.dxx).backward().unwrap();
            for slot in 0..p.frequency_count() {
                match mode {
                    FrequencyMode::Trainable => assert!(g.get(slot).unwrap() != 0.0),
                    FrequencyMode::Fixed => assert_eq!(g.get(slot), None),
                }
            }
        }
    }

    #[test]
    fn sigma_fifty_sample_spread() {
        let arch = Architecture {
            sigmas: vec![50.0],
            freqs_per_group: 30,
            hidden_layers: 1,
            neurons: 1,
            activation: Activation::Sigmoid,
            ..Default::default()
        };
        let mut all = Vec::new();
        for seed in 0..100 {
            all.extend(NetworkParams::init(&arch, seed).unwrap().groups[0].freqs.clone());
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let sd = (all.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((40.0..=60.0).contains(&sd), "sd = {sd}");
    }
}
