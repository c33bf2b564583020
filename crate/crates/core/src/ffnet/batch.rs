//! Batched jet propagation with a hand-derived adjoint.
//!
//! All groups share the hidden weights, so the five jet components of every
//! point in every group are stacked as rows of one matrix and each layer is a
//! single GEMM. Row `(g * 5 + c) * B + i` holds component `c`
//! (`v, dx, dy, dxx, dyy`) of point `i` in group `g`.
//!
//! The backward pass is the reverse of exactly this propagation and is
//! cross-checked against the scalar tape in the tests.


use ndarray::linalg::general_mat_mul;
use ndarray::Array2;

use super::{Activation, NetworkParams};
use crate::autodiff::Jet;

const V: usize = 0;
const DX: usize = 1;
const DY: usize = 2;
const DXX: usize = 3;
const DYY: usize = 4;

/// A collocation point with its film-thickness jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchPoint {
    pub x: f64,
    pub y: f64,
    pub h: Jet,
}

/// Network view prepared for batched evaluation.
pub struct BatchEngine<'a> {
    params: &'a NetworkParams,
    weights: Vec<Array2<f64>>,
    chain_h: bool,
}

/// Cached intermediate state of one [`BatchEngine::forward`] call.
pub struct ForwardPass {
    pub outputs: Vec<Jet>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// pre-activations per hidden layer
    zs: Vec<Array2<f64>>,
    /// `acts[0]` is the embedding, `acts[l]` the output of hidden layer `l`
    acts: Vec<Array2<f64>>,
}

impl ForwardPass {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl<'a> BatchEngine<'a> {
    /// `chain_h = false` feeds `H` to the embedding as a constant (its
    /// coordinate derivatives are dropped).
    pub fn new(params: &'a NetworkParams, chain_h: bool) -> Self {
        let weights = params
            .hidden
            .iter()
            .map(|l| {
                Array2::from_shape_vec((l.outputs, l.inputs), l.weights.clone())
                    .expect("validated layer shape")
            })
            .collect();
        Self {
            params,
            weights,
            chain_h,
        }
    }

    pub fn params(&self) -> &NetworkParams {
        self.params
    }

    fn groups(&self) -> usize {
        self.params.groups.len()
    }

    fn neurons(&self) -> usize {
        self.params.hidden[0].outputs
    }

    fn embed(&self, points: &[BatchPoint]) -> Array2<f64> {
        let b = points.len();
        let f_count = self.params.groups[0].freqs.len();
        let width = 4 * f_count + 1;
        let mut a = Array2::<f64>::zeros((self.groups() * 5 * b, width));
        let data = a.as_slice_mut().expect("standard layout");
        let hmask = if self.chain_h { 1.0 } else { 0.0 };
        let tau = self.params.units.scale();
        for (g, group) in self.params.groups.iter().enumerate() {
            let row = |c: usize, i: usize| ((g * 5 + c) * b + i) * width;
            for (i, p) in points.iter().enumerate() {
                for (k, &f) in group.freqs.iter().enumerate() {
                    let w = tau * f;
                    let (sx, cx) = (w * p.x).sin_cos();
                    let (sy, cy) = (w * p.y).sin_cos();
                    let (sxk, cxk, syk, cyk) = (k, f_count + k, 2 * f_count + k, 3 * f_count + k);
                    data[row(V, i) + sxk] = sx;
                    data[row(V, i) + cxk] = cx;
                    data[row(V, i) + syk] = sy;
                    data[row(V, i) + cyk] = cy;
                    data[row(DX, i) + sxk] = w * cx;
                    data[row(DX, i) + cxk] = -w * sx;
                    data[row(DY, i) + syk] = w * cy;
                    data[row(DY, i) + cyk] = -w * sy;
                    data[row(DXX, i) + sxk] = -w * w * sx;
                    data[row(DXX, i) + cxk] = -w * w * cx;
                    data[row(DYY, i) + syk] = -w * w * sy;
                    data[row(DYY, i) + cyk] = -w * w * cy;
                }
                let hc = 4 * f_count;
                data[row(V, i) + hc] = p.h.v;
                data[row(DX, i) + hc] = hmask * p.h.dx;
                data[row(DY, i) + hc] = hmask * p.h.dy;
                data[row(DXX, i) + hc] = hmask * p.h.dxx;
                data[row(DYY, i) + hc] = hmask * p.h.dyy;
            }
        }
        a
    }

    /// Propagates jets through the network for every point.
    pub fn forward(&self, points: &[BatchPoint]) -> ForwardPass {
        let b = points.len();
        let n = self.neurons();
        let act = self.params.activation;
        let mut acts = vec![self.embed(points)];
        let mut zs = Vec::with_capacity(self.weights.len());
        for (l, w) in self.weights.iter().enumerate() {
            let prev = acts.last().expect("embedding");
            let mut z = Array2::<f64>::zeros((prev.nrows(), n));
            general_mat_mul(1.0, prev, &w.t(), 0.0, &mut z);
            let bias = &self.params.hidden[l].bias;
            let mut a = Array2::<f64>::zeros(z.raw_dim());
            {
                let zd = z.as_slice_mut().expect("standard layout");
                let ad = a.as_slice_mut().expect("standard layout");
                let block = b * n;
                for g in 0..self.groups() {
                    let base = g * 5 * block;
                    for (q, zv) in zd[base..base + block].iter_mut().enumerate() {
                        *zv += bias[q % n];
                    }
                    activate_block(act, &zd[base..base + 5 * block], &mut ad[base..base + 5 * block], block);
                }
            }
            zs.push(z);
            acts.push(a);
        }
        let last = acts.last().expect("hidden output");
        let ld = last.as_slice().expect("standard layout");
        let hw = &self.params.head.weights;
        let hb = self.params.head.bias[0];
        let mut outputs = vec![Jet::constant(0.0); b];
        for (i, out) in outputs.iter_mut().enumerate() {
            let mut comps = [hb, 0.0, 0.0, 0.0, 0.0];
            for (c, comp) in comps.iter_mut().enumerate() {
                for g in 0..self.groups() {
                    let r = ((g * 5 + c) * b + i) * n;
                    *comp += dot(&ld[r..r + n], &hw[g * n..(g + 1) * n]);
                }
            }
            *out = Jet::from_array(comps);
        }
        ForwardPass {
            outputs,
            xs: points.iter().map(|p| p.x).collect(),
            ys: points.iter().map(|p| p.y).collect(),
            zs,
            acts,
        }
    }

    /// Reverse pass: given the adjoint of every output jet component
    /// (`[v, dx, dy, dxx, dyy]` per point), returns the flat parameter
    /// gradient. Frequency slots stay 0 unless `train_freqs`.
    pub fn backward(&self, pass: &ForwardPass, adjoint: &[[f64; 5]], train_freqs: bool) -> Vec<f64> {
        let b = pass.len();
        assert_eq!(adjoint.len(), b, "one adjoint per point");
        let n = self.neurons();
        let groups = self.groups();
        let params = self.params;
        let mut grad = vec![0.0; params.param_count()];
        let nf = params.frequency_count();

        // offsets of each hidden layer and the head in the flat layout
        let mut offsets = Vec::with_capacity(params.hidden.len());
        let mut off = nf;
        for l in &params.hidden {
            offsets.push(off);
            off += l.weights.len() + l.bias.len();
        }
        let head_off = off;

        let last = pass.acts.last().expect("hidden output");
        let ld = last.as_slice().expect("standard layout");
        let hw = &params.head.weights;
        let mut abar = Array2::<f64>::zeros(last.raw_dim());
        {
            let ad = abar.as_slice_mut().expect("standard layout");
            for g in 0..groups {
                let w = &hw[g * n..(g + 1) * n];
                for c in 0..5 {
                    for (i, adj) in adjoint.iter().enumerate() {
                        let a = adj[c];
                        if a == 0.0 {
                            continue;
                        }
                        let r = ((g * 5 + c) * b + i) * n;
                        for j in 0..n {
                            ad[r + j] = a * w[j];
                            grad[head_off + g * n + j] += a * ld[r + j];
                        }
                    }
                }
            }
            grad[head_off + hw.len()] = adjoint.iter().map(|a| a[V]).sum();
        }

        let act = params.activation;
        for l in (0..self.weights.len()).rev() {
            let z = &pass.zs[l];
            let zd = z.as_slice().expect("standard layout");
            // abar becomes zbar in place
            {
                let ad = abar.as_slice_mut().expect("standard layout");
                let block = b * n;
                for g in 0..groups {
                    let base = g * 5 * block;
                    adjoint_block(act, &zd[base..base + 5 * block], &mut ad[base..base + 5 * block], block);
                }
            }
            let zbar = abar;
            let layer = &params.hidden[l];
            let prev = &pass.acts[l];
            let mut wgrad = Array2::<f64>::zeros((layer.outputs, layer.inputs));
            general_mat_mul(1.0, &zbar.t(), prev, 0.0, &mut wgrad);
            let wg = wgrad.as_slice().expect("standard layout");
            let o = offsets[l];
            for (dst, src) in grad[o..o + wg.len()].iter_mut().zip(wg) {
                *dst += src;
            }
            let bo = o + wg.len();
            let zb = zbar.as_slice().expect("standard layout");
            for g in 0..groups {
                let base = g * 5 * b * n;
                for i in 0..b {
                    let r = base + i * n;
                    for j in 0..n {
                        grad[bo + j] += zb[r + j];
                    }
                }
            }
            if l == 0 && !train_freqs {
                break;
            }
            let mut prev_bar = Array2::<f64>::zeros(prev.raw_dim());
            general_mat_mul(1.0, &zbar, &self.weights[l], 0.0, &mut prev_bar);
            abar = prev_bar;
            if l == 0 {
                self.frequency_gradient(pass, &abar, &mut grad[..nf]);
            }
        }
        grad
    }

    fn frequency_gradient(&self, pass: &ForwardPass, ebar: &Array2<f64>, out: &mut [f64]) {
        let b = pass.len();
        let f_count = self.params.groups[0].freqs.len();
        let width = 4 * f_count + 1;
        let e = ebar.as_slice().expect("standard layout");
        let tau = self.params.units.scale();
        let mut slot = 0;
        for (g, group) in self.params.groups.iter().enumerate() {
            let row = |c: usize, i: usize| ((g * 5 + c) * b + i) * width;
            for (k, &f) in group.freqs.iter().enumerate() {
                let w = tau * f;
                let mut acc = 0.0;
                for i in 0..b {
                    for (coord, cols, d1, d2) in [
                        (pass.xs[i], (k, f_count + k), DX, DXX),
                        (pass.ys[i], (2 * f_count + k, 3 * f_count + k), DY, DYY),
                    ] {
                        let (s, c) = (w * coord).sin_cos();
                        let t = tau * coord; // d(theta)/df
                        // d/df of the sin entry's v, first and second derivative
                        let sin_v = t * c;
                        let sin_d1 = tau * c - w * t * s;
                        let sin_d2 = -2.0 * w * tau * s - w * w * t * c;
                        let cos_v = -t * s;
                        let cos_d1 = -tau * s - w * t * c;
                        let cos_d2 = -2.0 * w * tau * c + w * w * t * s;
                        acc += e[row(V, i) + cols.0] * sin_v
                            + e[row(d1, i) + cols.0] * sin_d1
                            + e[row(d2, i) + cols.0] * sin_d2
                            + e[row(V, i) + cols.1] * cos_v
                            + e[row(d1, i) + cols.1] * cos_d1
                            + e[row(d2, i) + cols.1] * cos_d2;
                    }
                }
                out[slot] += acc;
                slot += 1;
            }
        }
    }

    /// Forward-only evaluation of `P_net` jets.
    pub fn evaluate(&self, points: &[BatchPoint]) -> Vec<Jet> {
        const CHUNK: usize = 512;
        points
            .chunks(CHUNK)
            .flat_map(|c| self.forward(c).outputs)
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Activation applied to the five stacked component blocks of one group.
fn activate_block(act: Activation, z: &[f64], a: &mut [f64], block: usize) {
    let (zv, zr) = z.split_at(block);
    let (zdx, zr) = zr.split_at(block);
    let (zdy, zr) = zr.split_at(block);
    let (zdxx, zdyy) = zr.split_at(block);
    let (av, ar) = a.split_at_mut(block);
    let (adx, ar) = ar.split_at_mut(block);
    let (ady, ar) = ar.split_at_mut(block);
    let (adxx, adyy) = ar.split_at_mut(block);
    for q in 0..block {
        let (s, s1, s2, _) = act.derivatives(zv[q]);
        av[q] = s;
        adx[q] = s1 * zdx[q];
        ady[q] = s1 * zdy[q];
        adxx[q] = s2 * zdx[q] * zdx[q] + s1 * zdxx[q];
        adyy[q] = s2 * zdy[q] * zdy[q] + s1 * zdyy[q];
    }
}

/// Turns activation adjoints into pre-activation adjoints, in place.
fn adjoint_block(act: Activation, z: &[f64], bar: &mut [f64], block: usize) {
    let (zv, zr) = z.split_at(block);
    let (zdx, zr) = zr.split_at(block);
    let (zdy, zr) = zr.split_at(block);
    let (zdxx, zdyy) = zr.split_at(block);
    let (bv, br) = bar.split_at_mut(block);
    let (bdx, br) = br.split_at_mut(block);
    let (bdy, br) = br.split_at_mut(block);
    let (bdxx, bdyy) = br.split_at_mut(block);
    for q in 0..block {
        let (_, s1, s2, s3) = act.derivatives(zv[q]);
        let (gx, gy, gxx, gyy) = (bdx[q], bdy[q], bdxx[q], bdyy[q]);
        let (dx, dy) = (zdx[q], zdy[q]);
        bv[q] = bv[q] * s1
            + (gx * dx + gy * dy) * s2
            + gxx * (s3 * dx * dx + s2 * zdxx[q])
            + gyy * (s3 * dy * dy + s2 * zdyy[q]);
        bdx[q] = gx * s1 + 2.0 * gxx * s2 * dx;
        bdy[q] = gy * s1 + 2.0 * gyy * s2 * dy;
        bdxx[q] = gxx * s1;
        bdyy[q] = gyy * s1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{seed_coordinate, Axis, Scalar, Tape};
    use crate::ffnet::{Architecture, FrequencyMode, FrequencyUnits};

    fn arch(activation: Activation, units: FrequencyUnits) -> Architecture {
        Architecture {
            sigmas: vec![1.0, 5.0],
            freqs_per_group: 3,
            hidden_layers: 3,
            neurons: 4,
            activation,
            units,
        }
    }

    fn points() -> Vec<BatchPoint> {
        [(0.12, 0.8), (0.5, 0.5), (0.91, 0.33)]
            .iter()
            .map(|&(x, y)| BatchPoint {
                x,
                y,
                h: Jet::from_array([1.0 + (1.0 - x), -1.0, 0.2, 0.3, -0.4]),
            })
            .collect()
    }

    #[test]
    fn batched_forward_matches_generic_forward() {
        for (act, units) in [
            (Activation::Sigmoid, FrequencyUnits::Cycles),
            (Activation::Tanh, FrequencyUnits::Radians),
        ] {
            let p = NetworkParams::init(&arch(act, units), 3).unwrap();
            let engine = BatchEngine::new(&p, true);
            let pass = engine.forward(&points());
            for (pt, out) in points().iter().zip(&pass.outputs) {
                let want = p.forward(&seed_coordinate(pt.x, Axis::X), &seed_coordinate(pt.y, Axis::Y), &pt.h);
                for (a, b) in out.as_array().iter().zip(want.as_array()) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn batched_backward_matches_tape() {
        let weights = [[0.3, -1.2, 0.7, 0.05, -0.02], [1.1, 0.4, -0.3, 0.01, 0.03], [-0.6, 0.2, 0.9, -0.04, 0.02]];
        for act in [Activation::Sigmoid, Activation::Tanh] {
            for mode in [FrequencyMode::Trainable, FrequencyMode::Fixed] {
                for chain_h in [true, false] {
                    let units = match (act, chain_h) {
                        (Activation::Sigmoid, true) | (Activation::Tanh, false) => FrequencyUnits::Cycles,
                        _ => FrequencyUnits::Radians,
                    };
                    let p = NetworkParams::init(&arch(act, units), 8).unwrap();
                    let engine = BatchEngine::new(&p, chain_h);
                    let pts = points();
                    let pass = engine.forward(&pts);
                    let fast = engine.backward(&pass, &weights, mode == FrequencyMode::Trainable);

                    let tape = Tape::new();
                    let vals = p.register(&tape, mode);
                    let mut loss = tape.constant(0.0);
                    for (pt, w) in pts.iter().zip(&weights) {
                        let x = seed_coordinate(pt.x, Axis::X).lift(&vals[0]);
                        let y = seed_coordinate(pt.y, Axis::Y).lift(&vals[0]);
                        let mut h = pt.h;
                        if !chain_h {
                            h = Jet::constant(h.v);
                        }
                        let out = p.forward_with(&vals, &x, &y, &h.lift(&vals[0]));
                        let comps = [out.v, out.dx, out.dy, out.dxx, out.dyy];
                        for (c, wc) in comps.into_iter().zip(w) {
                            loss = loss + c.scale(*wc);
                        }
                    }
                    let slow = loss.backward().unwrap().to_dense(p.param_count());
                    for (i, (a, b)) in fast.iter().zip(&slow).enumerate() {
                        assert!(
                            (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                            "{:?} {:?} chain_h={chain_h} slot {} ({}): {a} vs {b}",
                            act,
                            mode,
                            i,
                            p.slot_name(i)
                        );
                    }
                }
            }
        }
    }
}
