//! Encoder-decoder transformer with a Student-t output head.
//!
//! The encoder reads the context window (selected features plus target lags);
//! the decoder reads the known future covariates (calendar and key events)
//! for every forecast step at once, attends causally to earlier steps and
//! cross-attends to the encoder memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{HeadSpec, Matrix, Tape, Var};
use super::ModelConfig;
use crate::Scalar;

/// Named trainable tensors, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub values: Vec<Matrix<T>>,
}

impl<T: Scalar> ParamStore<T> {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    fn add(&mut self, name: String, m: Matrix<T>) -> usize {
        self.names.push(name);
        self.values.push(m);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }
}

/// Input and output widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub encoder_inputs: usize,
    pub decoder_inputs: usize,
    pub targets: usize,
    pub context_len: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Norm {
    gain: usize,
    bias: usize,
}

#[derive(Debug, Clone)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    norm_attn: Norm,
    attn: Attention,
    norm_ff: Norm,
    ff: FeedForward,
}

#[derive(Debug, Clone)]
struct DecoderLayer {
    norm_self: Norm,
    self_attn: Attention,
    norm_cross: Norm,
    cross_attn: Attention,
    norm_ff: Norm,
    ff: FeedForward,
}

/// Parameter layout of the network; the values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Transformer {
    pub dims: ModelDims,
    d_model: usize,
    heads: usize,
    dropout: f64,
    encoder_in: Linear,
    decoder_in: Linear,
    encoder: Vec<EncoderLayer>,
    decoder: Vec<DecoderLayer>,
    encoder_norm: Norm,
    decoder_norm: Norm,
    head: Linear,
    head_spec: HeadSpec<f64>,
}

/// Initial pre-activation biases: σ ≈ 1 and ν ≈ 4 in standardized units.
const SIGMA_BIAS_INIT: f64 = 0.541_324_854_612_918_1;
const NU_BIAS_INIT: f64 = 1.5;

struct Init<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Init<'_, T> {
    /// Glorot-uniform weight and zero bias.
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::c(self.rng.random_range(-limit..limit)))
            .collect();
        let w = self
            .store
            .add(format!("{name}.weight"), Matrix::from_vec(fan_in, fan_out, data));
        let b = self.store.add(format!("{name}.bias"), Matrix::zeros(1, fan_out));
        Linear { w, b }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gain: self.store.add(format!("{name}.gain"), Matrix::filled(1, d, T::one())),
            bias: self.store.add(format!("{name}.bias"), Matrix::zeros(1, d)),
        }
    }

    fn attention(&mut self, name: &str, d: usize) -> Attention {
        Attention {
            q: self.linear(&format!("{name}.query"), d, d),
            k: self.linear(&format!("{name}.key"), d, d),
            v: self.linear(&format!("{name}.value"), d, d),
            o: self.linear(&format!("{name}.out"), d, d),
        }
    }

    fn feed_forward(&mut self, name: &str, d: usize, ff: usize) -> FeedForward {
        FeedForward {
            up: self.linear(&format!("{name}.up"), d, ff),
            down: self.linear(&format!("{name}.down"), ff, d),
        }
    }
}

/// Sinusoidal position table, `len` × `d`.
pub fn positional_encoding<T: Scalar>(len: usize, d: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(len, d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            m.data[pos * d + i] = T::c(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    m
}

/// Dropout masks drawn from a seeded stream during training.
pub struct DropoutStream<'a> {
    pub rng: &'a mut ChaCha8Rng,
}

impl Transformer {
    /// Layout plus freshly initialized parameters, deterministic in `seed`.
    pub fn new<T: Scalar>(dims: ModelDims, config: &ModelConfig, seed: u64) -> (Self, ParamStore<T>) {
        let mut store = ParamStore::new();
        let d = config.d_model;
        let mut init = Init {
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let encoder_in = init.linear("encoder.input", dims.encoder_inputs, d);
        let decoder_in = init.linear("decoder.input", dims.decoder_inputs, d);
        let encoder = (0..config.encoder_layers)
            .map(|l| EncoderLayer {
                norm_attn: init.norm(&format!("encoder.{l}.norm_attn"), d),
                attn: init.attention(&format!("encoder.{l}.attn"), d),
                norm_ff: init.norm(&format!("encoder.{l}.norm_ff"), d),
                ff: init.feed_forward(&format!("encoder.{l}.ff"), d, config.ff_dim),
            })
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|l| DecoderLayer {
                norm_self: init.norm(&format!("decoder.{l}.norm_self"), d),
                self_attn: init.attention(&format!("decoder.{l}.self_attn"), d),
                norm_cross: init.norm(&format!("decoder.{l}.norm_cross"), d),
                cross_attn: init.attention(&format!("decoder.{l}.cross_attn"), d),
                norm_ff: init.norm(&format!("decoder.{l}.norm_ff"), d),
                ff: init.feed_forward(&format!("decoder.{l}.ff"), d, config.ff_dim),
            })
            .collect();
        let encoder_norm = init.norm("encoder.norm", d);
        let decoder_norm = init.norm("decoder.norm", d);
        let head = init.linear("head", d, 3 * dims.targets);
        let t = dims.targets;
        let bias = &mut store.values[head.b].data;
        bias[t..2 * t].iter_mut().for_each(|b| *b = T::c(SIGMA_BIAS_INIT));
        bias[2 * t..].iter_mut().for_each(|b| *b = T::c(NU_BIAS_INIT));
        let net = Self {
            dims,
            d_model: d,
            heads: config.heads,
            dropout: config.dropout,
            encoder_in,
            decoder_in,
            encoder,
            decoder,
            encoder_norm,
            decoder_norm,
            head,
            head_spec: HeadSpec {
                targets: t,
                sigma_floor: config.sigma_floor,
                nu_floor: config.nu_floor,
            },
        };
        (net, store)
    }

    pub fn head_spec<T: Scalar>(&self) -> HeadSpec<T> {
        HeadSpec {
            targets: self.head_spec.targets,
            sigma_floor: T::c(self.head_spec.sigma_floor),
            nu_floor: T::c(self.head_spec.nu_floor),
        }
    }

    /// Raw head output, `horizon` × 3·targets. Dropout applies only when a
    /// stream is given.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        encoder_input: Matrix<T>,
        decoder_input: Matrix<T>,
        mut dropout: Option<DropoutStream<'_>>,
    ) -> Var {
        assert_eq!(encoder_input.cols, self.dims.encoder_inputs, "encoder input width");
        assert_eq!(decoder_input.cols, self.dims.decoder_inputs, "decoder input width");
        let p: Vec<Var> = params
            .values
            .iter()
            .enumerate()
            .map(|(i, m)| tape.param(i, m))
            .collect();
        let mut fwd = Forward {
            net: self,
            tape,
            p: &p,
            dropout: dropout.as_mut(),
        };

        let embed_scale = T::c((self.d_model as f64).sqrt());
        let enc_len = encoder_input.rows;
        let x = fwd.tape.constant(encoder_input);
        let h = fwd.linear(x, &self.encoder_in);
        // Embeddings are scaled by √d_model so sparse inputs are not drowned
        // out by the positional encoding.
        let h = fwd.tape.scale(h, embed_scale);
        let pe = fwd.tape.constant(positional_encoding(enc_len, self.d_model));
        let h = fwd.tape.add(h, pe);
        let mut h = fwd.drop(h);
        for layer in &self.encoder {
            let n = fwd.norm(h, &layer.norm_attn);
            let a = fwd.attention(n, n, &layer.attn, None);
            let a = fwd.drop(a);
            h = fwd.tape.add(h, a);
            let n = fwd.norm(h, &layer.norm_ff);
            let f = fwd.feed_forward(n, &layer.ff);
            let f = fwd.drop(f);
            h = fwd.tape.add(h, f);
        }
        let memory = fwd.norm(h, &self.encoder_norm);

        let dec_len = decoder_input.rows;
        let causal: Vec<Vec<bool>> = (0..dec_len).map(|r| (0..dec_len).map(|c| c > r).collect()).collect();
        let y = fwd.tape.constant(decoder_input);
        let g = fwd.linear(y, &self.decoder_in);
        let g = fwd.tape.scale(g, embed_scale);
        let pe = fwd.tape.constant(positional_encoding(dec_len, self.d_model));
        let g = fwd.tape.add(g, pe);
        let mut g = fwd.drop(g);
        for layer in &self.decoder {
            let n = fwd.norm(g, &layer.norm_self);
            let a = fwd.attention(n, n, &layer.self_attn, Some(&causal));
            let a = fwd.drop(a);
            g = fwd.tape.add(g, a);
            let n = fwd.norm(g, &layer.norm_cross);
            let c = fwd.attention(n, memory, &layer.cross_attn, None);
            let c = fwd.drop(c);
            g = fwd.tape.add(g, c);
            let n = fwd.norm(g, &layer.norm_ff);
            let f = fwd.feed_forward(n, &layer.ff);
            let f = fwd.drop(f);
            g = fwd.tape.add(g, f);
        }
        let g = fwd.norm(g, &self.decoder_norm);
        fwd.linear(g, &self.head)
    }
}

struct Forward<'t, 'd, 'r, T> {
    net: &'t Transformer,
    tape: &'t mut Tape<T>,
    p: &'t [Var],
    dropout: Option<&'d mut DropoutStream<'r>>,
}

impl<T: Scalar> Forward<'_, '_, '_, T> {
    fn linear(&mut self, x: Var, l: &Linear) -> Var {
        let y = self.tape.matmul(x, self.p[l.w]);
        self.tape.add_row(y, self.p[l.b])
    }

    fn norm(&mut self, x: Var, n: &Norm) -> Var {
        self.tape.layer_norm(x, self.p[n.gain], self.p[n.bias])
    }

    fn feed_forward(&mut self, x: Var, ff: &FeedForward) -> Var {
        let h = self.linear(x, &ff.up);
        let h = self.tape.gelu(h);
        self.linear(h, &ff.down)
    }

    fn attention(&mut self, query_from: Var, kv_from: Var, a: &Attention, mask: Option<&[Vec<bool>]>) -> Var {
        let q = self.linear(query_from, &a.q);
        let k = self.linear(kv_from, &a.k);
        let v = self.linear(kv_from, &a.v);
        let heads = self.net.heads;
        let dh = self.net.d_model / heads;
        let scale = T::one() / T::from_count(dh).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * dh, dh);
            let kh = self.tape.slice_cols(k, h * dh, dh);
            let vh = self.tape.slice_cols(v, h * dh, dh);
            let s = self.tape.matmul_bt(qh, kh);
            let s = self.tape.scale(s, scale);
            let w = self.tape.softmax(s, mask);
            outs.push(self.tape.matmul(w, vh));
        }
        let cat = self.tape.concat_cols(&outs);
        self.linear(cat, &a.o)
    }

    fn drop(&mut self, x: Var) -> Var {
        let p = self.net.dropout;
        let Some(stream) = self.dropout.as_deref_mut() else {
            return x;
        };
        if p <= 0.0 {
            return x;
        }
        let keep = T::c(1.0 / (1.0 - p));
        let n = self.tape.value(x).data.len();
        let mask = (0..n)
            .map(|_| {
                if stream.rng.random::<f64>() < p {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        self.tape.dropout(x, mask)
    }
}
