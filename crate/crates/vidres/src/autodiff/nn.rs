//! Named parameter storage and the small layer zoo used by the models.
//!
//! Layers hold parameter *names*; the values live in a [`ParamSet`] so that
//! checkpointing, optimizer state, and gradient bookkeeping all key off one
//! flat name → tensor map. Names use dotted prefixes (`g_i.deconv0.w`) and
//! prefixes double as parameter groups.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

use super::conv::{Conv2dSpec, Conv3dSpec};
use super::graph::{Graph, Var};
use super::{Scalar, Tensor};

/// Weight initialization family.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    FanIn(usize),
    Zeros,
    Const(f64),
}

struct Param<S> {
    name: String,
    shape: Vec<usize>,
    data: Rc<Vec<S>>,
}

/// Ordered, named parameter arrays for one model.
pub struct ParamSet<S> {
    entries: Vec<Param<S>>,
    index: BTreeMap<String, usize>,
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, shape: Vec<usize>, init: Init, rng: &mut RandomSource) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter {name:?}"
        );
        assert!(
            name.chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.'),
            "parameter name {name:?} must be [a-z0-9_.]"
        );
        let n: usize = shape.iter().product();
        let data: Vec<S> = match init {
            Init::Zeros => vec![S::ZERO; n],
            Init::Const(c) => vec![S::from_f64(c); n],
            Init::FanIn(fan_in) => {
                let a = 1.0 / (fan_in.max(1) as f64).sqrt();
                (0..n)
                    .map(|_| S::from_f64(rng.uniform_in(-a, a)))
                    .collect()
            }
        };
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(Param {
            name: name.to_string(),
            shape,
            data: Rc::new(data),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|p| p.name.as_str())
    }

    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.names().filter(move |n| n.starts_with(prefix))
    }

    pub(crate) fn entry(&self, idx: usize) -> (&[usize], Rc<Vec<S>>) {
        let p = &self.entries[idx];
        (&p.shape, Rc::clone(&p.data))
    }

    pub fn shape(&self, name: &str) -> Option<&[usize]> {
        self.index_of(name).map(|i| self.entries[i].shape.as_slice())
    }

    pub fn values(&self, name: &str) -> Option<&[S]> {
        self.index_of(name).map(|i| self.entries[i].data.as_slice())
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor<S>> {
        self.index_of(name)
            .map(|i| Tensor::new(self.entries[i].shape.clone(), self.entries[i].data.to_vec()))
    }

    /// Mutable view of one parameter's data (copy-on-write if a graph still
    /// holds the previous snapshot).
    pub fn values_mut(&mut self, idx: usize) -> &mut [S] {
        Rc::make_mut(&mut self.entries[idx].data).as_mut_slice()
    }

    pub fn set_values(&mut self, name: &str, data: &[S]) -> Result<()> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name:?}")))?;
        if data.len() != self.entries[idx].data.len() {
            return Err(Error::Contract(format!(
                "parameter {name:?} expects {} values, got {}",
                self.entries[idx].data.len(),
                data.len()
            )));
        }
        self.values_mut(idx).copy_from_slice(data);
        Ok(())
    }

    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|p| p.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    /// Iterate `(name, shape, data)` in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], &[S])> {
        self.entries
            .iter()
            .map(|p| (p.name.as_str(), p.shape.as_slice(), p.data.as_slice()))
    }
}

// ---- layers ----

#[derive(Debug, Clone)]
pub struct Linear {
    w: String,
    b: String,
    out_dim: usize,
}

impl Linear {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        ps.register(&format!("{name}.w"), vec![out_dim, in_dim], Init::FanIn(in_dim), rng);
        ps.register(&format!("{name}.b"), vec![out_dim], Init::FanIn(in_dim), rng);
        Linear {
            w: format!("{name}.w"),
            b: format!("{name}.b"),
            out_dim,
        }
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let w = g.param(ps, &self.w);
        let b = g.param(ps, &self.b);
        g.linear(x, w, b, self.out_dim)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    w: String,
    b: String,
    pub spec: Conv2dSpec,
}

impl Conv2d {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        spec: Conv2dSpec,
    ) -> Self {
        let fan_in = in_ch * k * k;
        ps.register(&format!("{name}.w"), vec![out_ch, in_ch, k, k], Init::FanIn(fan_in), rng);
        ps.register(&format!("{name}.b"), vec![out_ch], Init::FanIn(fan_in), rng);
        Conv2d {
            w: format!("{name}.w"),
            b: format!("{name}.b"),
            spec,
        }
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let w = g.param(ps, &self.w);
        let b = g.param(ps, &self.b);
        g.conv2d(x, w, b, self.spec)
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    w: String,
    b: String,
    pub spec: Conv2dSpec,
}

impl ConvTranspose2d {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        spec: Conv2dSpec,
    ) -> Self {
        let fan_in = in_ch * k * k;
        ps.register(&format!("{name}.w"), vec![in_ch, out_ch, k, k], Init::FanIn(fan_in), rng);
        ps.register(&format!("{name}.b"), vec![out_ch], Init::FanIn(fan_in), rng);
        ConvTranspose2d {
            w: format!("{name}.w"),
            b: format!("{name}.b"),
            spec,
        }
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let w = g.param(ps, &self.w);
        let b = g.param(ps, &self.b);
        g.conv_transpose2d(x, w, b, self.spec)
    }
}

#[derive(Debug, Clone)]
pub struct Conv3d {
    w: String,
    b: String,
    pub spec: Conv3dSpec,
}

impl Conv3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: [usize; 3],
        spec: Conv3dSpec,
    ) -> Self {
        let fan_in = in_ch * k[0] * k[1] * k[2];
        ps.register(
            &format!("{name}.w"),
            vec![out_ch, in_ch, k[0], k[1], k[2]],
            Init::FanIn(fan_in),
            rng,
        );
        ps.register(&format!("{name}.b"), vec![out_ch], Init::FanIn(fan_in), rng);
        Conv3d {
            w: format!("{name}.w"),
            b: format!("{name}.b"),
            spec,
        }
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let w = g.param(ps, &self.w);
        let b = g.param(ps, &self.b);
        g.conv3d(x, w, b, self.spec)
    }
}

/// LSTM cell with fused input/hidden projections; gate order (i, f, g, o).
#[derive(Debug, Clone)]
pub struct LstmCell {
    ih: Linear,
    hh: Linear,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        LstmCell {
            ih: Linear::new(ps, rng, &format!("{name}.ih"), in_dim, 4 * hidden),
            hh: Linear::new(ps, rng, &format!("{name}.hh"), hidden, 4 * hidden),
            hidden,
        }
    }

    /// One step; returns (h', c').
    pub fn step<S: Scalar>(
        &self,
        g: &mut Graph<S>,
        ps: &ParamSet<S>,
        x: Var,
        h: Var,
        c: Var,
    ) -> (Var, Var) {
        let hd = self.hidden;
        let gi = self.ih.apply(g, ps, x);
        let gh = self.hh.apply(g, ps, h);
        let gates = g.add(gi, gh);
        let i_g = g.slice_cols(gates, 0, hd);
        let f_g = g.slice_cols(gates, hd, 2 * hd);
        let g_g = g.slice_cols(gates, 2 * hd, 3 * hd);
        let o_g = g.slice_cols(gates, 3 * hd, 4 * hd);
        let i = g.sigmoid(i_g);
        let f = g.sigmoid(f_g);
        let cand = g.tanh(g_g);
        let o = g.sigmoid(o_g);
        let fc = g.mul(f, c);
        let ig = g.mul(i, cand);
        let c_new = g.add(fc, ig);
        let tc = g.tanh(c_new);
        let h_new = g.mul(o, tc);
        (h_new, c_new)
    }

    pub fn zero_state<S: Scalar>(&self, g: &mut Graph<S>, batch: usize) -> (Var, Var) {
        let h = g.input(Tensor::zeros(vec![batch, self.hidden]));
        let c = g.input(Tensor::zeros(vec![batch, self.hidden]));
        (h, c)
    }
}

/// GRU cell with fused projections; gate order (r, z, n).
#[derive(Debug, Clone)]
pub struct GruCell {
    ih: Linear,
    hh: Linear,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        GruCell {
            ih: Linear::new(ps, rng, &format!("{name}.ih"), in_dim, 3 * hidden),
            hh: Linear::new(ps, rng, &format!("{name}.hh"), hidden, 3 * hidden),
            hidden,
        }
    }

    pub fn step<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var, h: Var) -> Var {
        let hd = self.hidden;
        let gi = self.ih.apply(g, ps, x);
        let gh = self.hh.apply(g, ps, h);
        let r_i = g.slice_cols(gi, 0, hd);
        let z_i = g.slice_cols(gi, hd, 2 * hd);
        let n_i = g.slice_cols(gi, 2 * hd, 3 * hd);
        let r_h = g.slice_cols(gh, 0, hd);
        let z_h = g.slice_cols(gh, hd, 2 * hd);
        let n_h = g.slice_cols(gh, 2 * hd, 3 * hd);
        let r_sum = g.add(r_i, r_h);
        let r = g.sigmoid(r_sum);
        let z_sum = g.add(z_i, z_h);
        let z = g.sigmoid(z_sum);
        let rn = g.mul(r, n_h);
        let n_sum = g.add(n_i, rn);
        let n = g.tanh(n_sum);
        // h' = (1 - z) ⊙ n + z ⊙ h = n - z ⊙ n + z ⊙ h
        let zn = g.mul(z, n);
        let zh = g.mul(z, h);
        let n_minus = g.sub(n, zn);
        g.add(n_minus, zh)
    }

    pub fn zero_state<S: Scalar>(&self, g: &mut Graph<S>, batch: usize) -> Var {
        g.input(Tensor::zeros(vec![batch, self.hidden]))
    }
}

/// Feed-forward stack of linears with SiLU between hidden layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(
        ps: &mut ParamSet<impl Scalar>,
        rng: &mut RandomSource,
        name: &str,
        dims: &[usize],
    ) -> Self {
        assert!(dims.len() >= 2);
        let layers = (0..dims.len() - 1)
            .map(|i| Linear::new(ps, rng, &format!("{name}.fc{i}"), dims[i], dims[i + 1]))
            .collect();
        Mlp { layers }
    }

    pub fn apply<S: Scalar>(&self, g: &mut Graph<S>, ps: &ParamSet<S>, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(g, ps, h);
            if i + 1 < self.layers.len() {
                h = g.silu(h);
            }
        }
        h
    }
}
