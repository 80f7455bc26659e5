//! Hand-fused jet forward/backward for the tanh network.
//!
//! This is the training hot path: one forward pass carries only the
//! requested input-derivative channels and caches every layer's jets;
//! the backward pass turns adjoints of the six output channels into a
//! parameter gradient without recording anything per weight. The generic
//! [`super::forward`] over taped scalars computes the same gradient and is
//! used to cross-check this module.

use crate::diffcore::{Channels, Jet2, Tape, Var};

use super::{param_count, MlpConfig, NetError};

const NCH: usize = 6;
const V: usize = 0;
const X: usize = 1;
const T: usize = 2;
const XX: usize = 3;
const XT: usize = 4;
const TT: usize = 5;

#[derive(Clone, Debug)]
struct LayerLayout {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
    /// Cache offsets of this layer's pre-activation and activation jets
    /// (hidden layers only).
    z_off: usize,
    h_off: usize,
}

/// Precomputed layout for the fused evaluator.
#[derive(Clone, Debug)]
pub struct FusedNet {
    layers: Vec<LayerLayout>,
    n_params: usize,
    cache_len: usize,
    max_width: usize,
}

impl FusedNet {
    pub fn new(config: &MlpConfig) -> Result<Self, NetError> {
        config.validate()?;
        let sizes = &config.layer_sizes;
        let mut layers = Vec::new();
        let mut p = 0;
        // input jets occupy the first 6 x 2 cache slots
        let mut c = NCH * sizes[0];
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let w_off = p;
            p += fan_in * fan_out;
            let b_off = p;
            p += fan_out;
            let z_off = c;
            let h_off = c + NCH * fan_out;
            c += 2 * NCH * fan_out;
            layers.push(LayerLayout {
                fan_in,
                fan_out,
                w_off,
                b_off,
                z_off,
                h_off,
            });
        }
        // the output layer's jets are returned, not cached
        let last = layers.last().expect("validated");
        let cache_len = last.z_off;
        Ok(FusedNet {
            max_width: sizes.iter().copied().max().unwrap_or(1),
            n_params: param_count(sizes),
            cache_len,
            layers,
        })
    }

    pub fn cache_len(&self) -> usize {
        self.cache_len
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Forward pass filling `cache`; returns the output channels
    /// `[value, d_x, d_t, d_xx, d_xt, d_tt]` (inactive channels are zero).
    pub fn forward(&self, params: &[f64], x: f64, t: f64, ch: Channels, cache: &mut [f64]) -> [f64; 6] {
        debug_assert_eq!(params.len(), self.n_params);
        debug_assert!(cache.len() >= self.cache_len);
        let m = ch.mask();
        let act: Vec<usize> = (0..NCH).filter(|&c| m[c]).collect();

        let h0 = &mut cache[..NCH * 2];
        h0.fill(0.0);
        h0[V * 2] = x;
        h0[V * 2 + 1] = t;
        h0[X * 2] = 1.0;
        h0[T * 2 + 1] = 1.0;

        let mut out = [0.0; 6];
        let mut prev_off = 0;
        let n = self.layers.len();
        for (li, l) in self.layers.iter().enumerate() {
            let w = &params[l.w_off..l.w_off + l.fan_in * l.fan_out];
            let b = &params[l.b_off..l.b_off + l.fan_out];
            if li + 1 == n {
                for &c in &act {
                    let hp = &cache[prev_off + c * l.fan_in..prev_off + (c + 1) * l.fan_in];
                    out[c] = dot(&w[..l.fan_in], hp) + if c == V { b[0] } else { 0.0 };
                }
                break;
            }
            let (head, tail) = cache.split_at_mut(l.z_off);
            let hp = &head[prev_off..prev_off + NCH * l.fan_in];
            let (z, h) = tail[..2 * NCH * l.fan_out].split_at_mut(NCH * l.fan_out);
            for &c in &act {
                let hpc = &hp[c * l.fan_in..(c + 1) * l.fan_in];
                let zc = &mut z[c * l.fan_out..(c + 1) * l.fan_out];
                for j in 0..l.fan_out {
                    zc[j] = dot(&w[j * l.fan_in..(j + 1) * l.fan_in], hpc);
                }
                if c == V {
                    for j in 0..l.fan_out {
                        zc[j] += b[j];
                    }
                }
            }
            let fo = l.fan_out;
            for j in 0..fo {
                let s = z[V * fo + j].tanh();
                let s1 = 1.0 - s * s;
                let s2 = -2.0 * s * s1;
                h[V * fo + j] = s;
                let zx = z[X * fo + j];
                let zt = z[T * fo + j];
                if m[X] {
                    h[X * fo + j] = s1 * zx;
                }
                if m[T] {
                    h[T * fo + j] = s1 * zt;
                }
                if m[XX] {
                    h[XX * fo + j] = s2 * zx * zx + s1 * z[XX * fo + j];
                }
                if m[XT] {
                    h[XT * fo + j] = s2 * zx * zt + s1 * z[XT * fo + j];
                }
                if m[TT] {
                    h[TT * fo + j] = s2 * zt * zt + s1 * z[TT * fo + j];
                }
            }
            prev_off = l.h_off;
        }
        for (c, o) in out.iter_mut().enumerate() {
            if !m[c] {
                *o = 0.0;
            }
        }
        out
    }

    /// Accumulates `sum_c out_adj[c] * d(out_c)/d(params)` into `grad`.
    ///
    /// `cache` must come from [`FusedNet::forward`] with the same `ch`.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &[f64],
        ch: Channels,
        out_adj: &[f64; 6],
        grad: &mut [f64],
        scratch: &mut Vec<f64>,
    ) {
        let m = ch.mask();
        let act: Vec<usize> = (0..NCH).filter(|&c| m[c]).collect();
        let mw = self.max_width;
        scratch.clear();
        scratch.resize(4 * NCH * mw, 0.0);
        let (hbar, rest) = scratch.split_at_mut(NCH * mw);
        let (zbar, _) = rest.split_at_mut(NCH * mw);

        let n = self.layers.len();
        // output layer: affine, adjoint of its "z" is out_adj itself
        let l = &self.layers[n - 1];
        let h_prev_off = if n >= 2 { self.layers[n - 2].h_off } else { 0 };
        let fi = l.fan_in;
        for &c in &act {
            let a = out_adj[c];
            if a == 0.0 {
                for i in 0..fi {
                    hbar[c * mw + i] = 0.0;
                }
                continue;
            }
            let hp = &cache[h_prev_off + c * fi..h_prev_off + (c + 1) * fi];
            let gw = &mut grad[l.w_off..l.w_off + fi];
            for i in 0..fi {
                gw[i] += a * hp[i];
            }
            let w = &params[l.w_off..l.w_off + fi];
            for i in 0..fi {
                hbar[c * mw + i] = a * w[i];
            }
        }
        grad[l.b_off] += out_adj[V];

        for li in (0..n - 1).rev() {
            let l = &self.layers[li];
            let fo = l.fan_out;
            let fi = l.fan_in;
            let z = &cache[l.z_off..l.z_off + NCH * fo];
            let h = &cache[l.h_off..l.h_off + NCH * fo];
            for j in 0..fo {
                let s = h[V * fo + j];
                let s1 = 1.0 - s * s;
                let s2 = -2.0 * s * s1;
                let s3 = -2.0 * (s1 * s1 + s * s2);
                let zx = if m[X] { z[X * fo + j] } else { 0.0 };
                let zt = if m[T] { z[T * fo + j] } else { 0.0 };
                let hb = |c: usize| if m[c] { hbar[c * mw + j] } else { 0.0 };
                let (bv, bx, bt, bxx, bxt, btt) = (hb(V), hb(X), hb(T), hb(XX), hb(XT), hb(TT));

                let mut zv = bv * s1;
                if m[X] {
                    zv += bx * s2 * zx;
                    zbar[X * mw + j] = bx * s1;
                }
                if m[T] {
                    zv += bt * s2 * zt;
                    zbar[T * mw + j] = bt * s1;
                }
                if m[XX] {
                    let zxx = z[XX * fo + j];
                    zv += bxx * (s3 * zx * zx + s2 * zxx);
                    zbar[X * mw + j] += bxx * 2.0 * s2 * zx;
                    zbar[XX * mw + j] = bxx * s1;
                }
                if m[XT] {
                    let zxt = z[XT * fo + j];
                    zv += bxt * (s3 * zx * zt + s2 * zxt);
                    zbar[X * mw + j] += bxt * s2 * zt;
                    zbar[T * mw + j] += bxt * s2 * zx;
                    zbar[XT * mw + j] = bxt * s1;
                }
                if m[TT] {
                    let ztt = z[TT * fo + j];
                    zv += btt * (s3 * zt * zt + s2 * ztt);
                    zbar[T * mw + j] += btt * 2.0 * s2 * zt;
                    zbar[TT * mw + j] = btt * s1;
                }
                zbar[V * mw + j] = zv;
            }

            let h_prev_off = if li == 0 { 0 } else { self.layers[li - 1].h_off };
            for &c in &act {
                let hp = &cache[h_prev_off + c * fi..h_prev_off + (c + 1) * fi];
                let zb = &zbar[c * mw..c * mw + fo];
                let gw = &mut grad[l.w_off..l.w_off + fi * fo];
                for j in 0..fo {
                    let a = zb[j];
                    if a == 0.0 {
                        continue;
                    }
                    let row = &mut gw[j * fi..(j + 1) * fi];
                    for i in 0..fi {
                        row[i] += a * hp[i];
                    }
                }
            }
            {
                let gb = &mut grad[l.b_off..l.b_off + fo];
                for j in 0..fo {
                    gb[j] += zbar[V * mw + j];
                }
            }
            if li > 0 {
                let w = &params[l.w_off..l.w_off + fi * fo];
                for &c in &act {
                    let zb = &zbar[c * mw..c * mw + fo];
                    let hb = &mut hbar[c * mw..c * mw + fi];
                    hb.fill(0.0);
                    for j in 0..fo {
                        let a = zb[j];
                        if a == 0.0 {
                            continue;
                        }
                        let row = &w[j * fi..(j + 1) * fi];
                        for i in 0..fi {
                            hb[i] += a * row[i];
                        }
                    }
                }
            }
        }
    }

    /// Value-path evaluation with a throwaway cache.
    pub fn eval(&self, params: &[f64], x: f64, t: f64, ch: Channels, cache: &mut Vec<f64>) -> Jet2<f64> {
        cache.resize(self.cache_len.max(cache.len()), 0.0);
        Jet2::from_array(self.forward(params, x, t, ch, cache))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One recorded network call on a tape.
#[derive(Clone, Copy, Debug)]
pub struct CallRecord {
    offset: usize,
    ch: Channels,
    leaves: [Option<usize>; 6],
}

/// Records network calls made while building a taped expression, then
/// back-propagates the tape's adjoints through the fused backward pass.
#[derive(Default)]
pub struct NetRecorder {
    arena: Vec<f64>,
    calls: Vec<CallRecord>,
    scratch: Vec<f64>,
}

impl NetRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.arena.clear();
        self.calls.clear();
    }

    pub fn n_calls(&self) -> usize {
        self.calls.len()
    }

    /// Evaluates the network and exposes each active output channel as a
    /// tape leaf.
    pub fn eval<'t>(
        &mut self,
        net: &FusedNet,
        params: &[f64],
        tape: &'t Tape,
        x: f64,
        t: f64,
        ch: Channels,
    ) -> Jet2<Var<'t>> {
        let offset = self.arena.len();
        self.arena.resize(offset + net.cache_len, 0.0);
        let out = net.forward(params, x, t, ch, &mut self.arena[offset..]);
        let m = ch.mask();
        let mut leaves = [None; 6];
        let mut vars = [Var::constant(0.0); 6];
        for c in 0..NCH {
            if m[c] {
                let v = tape.var(out[c]);
                leaves[c] = v.index();
                vars[c] = v;
            }
        }
        self.calls.push(CallRecord { offset, ch, leaves });
        Jet2::from_array(vars)
    }

    /// Adds `scale * d(root)/d(params)` to `grad`, where `adjoints` is the
    /// tape's reverse sweep from `root`.
    pub fn backprop(&mut self, net: &FusedNet, params: &[f64], adjoints: &[f64], scale: f64, grad: &mut [f64]) {
        for call in &self.calls {
            let mut out_adj = [0.0; 6];
            let mut any = false;
            for c in 0..NCH {
                if let Some(i) = call.leaves[c] {
                    out_adj[c] = scale * adjoints[i];
                    any |= out_adj[c] != 0.0;
                }
            }
            if !any {
                continue;
            }
            let cache = &self.arena[call.offset..call.offset + net.cache_len];
            net.backward(params, cache, call.ch, &out_adj, grad, &mut self.scratch);
        }
    }
}
