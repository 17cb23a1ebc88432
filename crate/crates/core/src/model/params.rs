use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::{Graph, Tensor, Var};

/// Layer widths. The attention width equals the encoder state width, `2 * hidden_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
}

impl ModelDims {
    /// Full-size defaults.
    pub const DEFAULT: ModelDims = ModelDims {
        vocab_size: 50_000,
        emb_dim: 128,
        hidden_dim: 256,
    };

    /// Small profile for tests and desk-scale runs.
    pub const DESK: ModelDims = ModelDims {
        vocab_size: 2_000,
        emb_dim: 32,
        hidden_dim: 64,
    };

    pub fn attn_dim(&self) -> usize {
        2 * self.hidden_dim
    }

    /// Every parameter name with its shape, in sorted name order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (v, e, h, a) = (self.vocab_size, self.emb_dim, self.hidden_dim, self.attn_dim());
        let mut shapes = vec![
            ("attn.b", vec![a]),
            ("attn.v", vec![a, 1]),
            ("attn.w_c", vec![1, a]),
            ("attn.w_h", vec![2 * h, a]),
            ("attn.w_s", vec![h, a]),
            ("dec.b", vec![4 * h]),
            ("dec.w_h", vec![h, 4 * h]),
            ("dec.w_x", vec![e, 4 * h]),
            ("embedding", vec![v, e]),
            ("enc_bw.b", vec![4 * h]),
            ("enc_bw.w_h", vec![h, 4 * h]),
            ("enc_bw.w_x", vec![e, 4 * h]),
            ("enc_fw.b", vec![4 * h]),
            ("enc_fw.w_h", vec![h, 4 * h]),
            ("enc_fw.w_x", vec![e, 4 * h]),
            ("gen.b", vec![1]),
            ("gen.w_hstar", vec![2 * h, 1]),
            ("gen.w_s", vec![h, 1]),
            ("gen.w_x", vec![e, 1]),
            ("reduce.b_c", vec![h]),
            ("reduce.b_h", vec![h]),
            ("reduce.w_c", vec![2 * h, h]),
            ("reduce.w_h", vec![2 * h, h]),
            ("vocab.b1", vec![h]),
            ("vocab.b2", vec![v]),
            ("vocab.w1", vec![3 * h, h]),
            ("vocab.w2", vec![h, v]),
        ];
        shapes.sort_by_key(|(n, _)| *n);
        shapes
    }
}

/// Name of the coverage weight, zeroed when coverage is switched on.
pub const COVERAGE_WEIGHT: &str = "attn.w_c";

/// All learned tensors of the network, keyed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParams {
    /// Matrices uniform in (-0.02, 0.02); biases and the coverage weight zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = dims
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let mut t = Tensor::zeros(&shape);
                if shape.len() == 2 && name != COVERAGE_WEIGHT {
                    t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.02..0.02));
                }
                (name.to_string(), t)
            })
            .collect();
        Self { dims, tensors }
    }

    /// Every entry, biases and coverage weight included, uniform in `(-scale, scale)`.
    pub fn random(dims: ModelDims, seed: u64, scale: f64) -> Self {
        let mut params = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in params.tensors.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
        }
        params
    }

    pub fn zeros(dims: ModelDims) -> Self {
        let tensors = dims
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| (name.to_string(), Tensor::zeros(&shape)))
            .collect();
        Self { dims, tensors }
    }

    /// Validates names, shapes and finiteness against `dims`.
    pub fn from_tensors(dims: ModelDims, tensors: BTreeMap<String, Tensor>) -> Result<Self, ModelError> {
        let expected = dims.param_shapes();
        if let Some(extra) = tensors.keys().find(|k| !expected.iter().any(|(n, _)| n == k)) {
            return Err(ModelError::UnknownParam(extra.clone()));
        }
        for (name, shape) in &expected {
            let t = tensors.get(*name).ok_or_else(|| ModelError::MissingParam(name.to_string()))?;
            if t.shape() != shape.as_slice() {
                return Err(ModelError::ParamShape {
                    name: name.to_string(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(ModelError::NonFiniteParam(name.to_string()));
            }
        }
        Ok(Self { dims, tensors })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    /// Tensors in sorted name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Places every tensor on `graph` as a leaf and returns the handles.
    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> Bound {
        Bound::build(self.dims, |name| graph.leaf(self.tensors[name].clone(), trainable))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Lstm {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

/// Graph handles for every parameter of one [`ModelParams`].
#[derive(Clone, Copy, Debug)]
pub struct Bound {
    pub dims: ModelDims,
    pub embedding: Var,
    pub enc_fw: Lstm,
    pub enc_bw: Lstm,
    pub dec: Lstm,
    pub reduce_w_h: Var,
    pub reduce_b_h: Var,
    pub reduce_w_c: Var,
    pub reduce_b_c: Var,
    pub attn_v: Var,
    pub attn_w_h: Var,
    pub attn_w_s: Var,
    pub attn_w_c: Var,
    pub attn_b: Var,
    pub vocab_w1: Var,
    pub vocab_b1: Var,
    pub vocab_w2: Var,
    pub vocab_b2: Var,
    pub gen_w_hstar: Var,
    pub gen_w_s: Var,
    pub gen_w_x: Var,
    pub gen_b: Var,
}

impl Bound {
    fn build(dims: ModelDims, mut var: impl FnMut(&str) -> Var) -> Self {
        let mut lstm = |prefix: &str| Lstm {
            w_x: var(&format!("{prefix}.w_x")),
            w_h: var(&format!("{prefix}.w_h")),
            b: var(&format!("{prefix}.b")),
        };
        let (enc_fw, enc_bw, dec) = (lstm("enc_fw"), lstm("enc_bw"), lstm("dec"));
        Bound {
            dims,
            embedding: var("embedding"),
            enc_fw,
            enc_bw,
            dec,
            reduce_w_h: var("reduce.w_h"),
            reduce_b_h: var("reduce.b_h"),
            reduce_w_c: var("reduce.w_c"),
            reduce_b_c: var("reduce.b_c"),
            attn_v: var("attn.v"),
            attn_w_h: var("attn.w_h"),
            attn_w_s: var("attn.w_s"),
            attn_w_c: var("attn.w_c"),
            attn_b: var("attn.b"),
            vocab_w1: var("vocab.w1"),
            vocab_b1: var("vocab.b1"),
            vocab_w2: var("vocab.w2"),
            vocab_b2: var("vocab.b2"),
            gen_w_hstar: var("gen.w_hstar"),
            gen_w_s: var("gen.w_s"),
            gen_w_x: var("gen.w_x"),
            gen_b: var("gen.b"),
        }
    }

    /// Handles from `vars` given in the order of [`ModelDims::param_shapes`].
    pub fn from_vars(dims: ModelDims, vars: &[Var]) -> Self {
        let names = dims.param_shapes();
        assert_eq!(names.len(), vars.len(), "one handle per parameter");
        Self::build(dims, |name| {
            let i = names.iter().position(|(n, _)| *n == name).expect("known parameter");
            vars[i]
        })
    }

    /// `(name, handle)` pairs in sorted name order.
    pub fn named(&self) -> Vec<(&'static str, Var)> {
        let mut v = vec![
            ("attn.b", self.attn_b),
            ("attn.v", self.attn_v),
            ("attn.w_c", self.attn_w_c),
            ("attn.w_h", self.attn_w_h),
            ("attn.w_s", self.attn_w_s),
            ("dec.b", self.dec.b),
            ("dec.w_h", self.dec.w_h),
            ("dec.w_x", self.dec.w_x),
            ("embedding", self.embedding),
            ("enc_bw.b", self.enc_bw.b),
            ("enc_bw.w_h", self.enc_bw.w_h),
            ("enc_bw.w_x", self.enc_bw.w_x),
            ("enc_fw.b", self.enc_fw.b),
            ("enc_fw.w_h", self.enc_fw.w_h),
            ("enc_fw.w_x", self.enc_fw.w_x),
            ("gen.b", self.gen_b),
            ("gen.w_hstar", self.gen_w_hstar),
            ("gen.w_s", self.gen_w_s),
            ("gen.w_x", self.gen_w_x),
            ("reduce.b_c", self.reduce_b_c),
            ("reduce.b_h", self.reduce_b_h),
            ("reduce.w_c", self.reduce_w_c),
            ("reduce.w_h", self.reduce_w_h),
            ("vocab.b1", self.vocab_b1),
            ("vocab.b2", self.vocab_b2),
            ("vocab.w1", self.vocab_w1),
            ("vocab.w2", self.vocab_w2),
        ];
        v.sort_by_key(|(n, _)| *n);
        v
    }
}
