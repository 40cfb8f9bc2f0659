//! Eager reverse-mode tape.
//!
//! Each op computes its value immediately and pushes a node whose backward
//! closure scatters the output gradient into the parents. Nodes are visited in
//! reverse creation order during [`Graph::backward`], which is a valid
//! topological order for an eagerly built tape.

use std::collections::HashMap;
use std::rc::Rc;

use super::conv::{self, Conv2dSpec, Conv3dSpec};
use super::nn::ParamSet;
use super::{Scalar, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type BackFn<S> = Box<dyn Fn(&[S], &mut GradBuf<S>)>;

struct Node<S: Scalar> {
    shape: Vec<usize>,
    value: Rc<Vec<S>>,
    backward: Option<BackFn<S>>,
}

/// Per-node gradient buffers, allocated lazily during the backward pass.
pub struct GradBuf<S: Scalar> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> GradBuf<S> {
    fn new(n: usize) -> Self {
        GradBuf {
            grads: (0..n).map(|_| None).collect(),
        }
    }

    fn slice_mut(&mut self, v: Var, len: usize) -> &mut [S] {
        self.grads[v.0].get_or_insert_with(|| vec![S::ZERO; len])
    }

    /// Accumulate `contrib` into the gradient of `v`.
    pub fn acc(&mut self, v: Var, contrib: &[S]) {
        let g = self.slice_mut(v, contrib.len());
        for (gi, ci) in g.iter_mut().zip(contrib) {
            *gi += *ci;
        }
    }

    /// Mutable access for ops that write gradients in place.
    pub fn acc_with(&mut self, v: Var, len: usize, f: impl FnOnce(&mut [S])) {
        f(self.slice_mut(v, len));
    }
}

/// Gradients for the parameters that participated in a graph, aligned with
/// the [`ParamSet`] the graph was built against.
pub struct Gradients<S: Scalar> {
    slots: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get<'a>(&'a self, ps: &ParamSet<S>, name: &str) -> Option<&'a [S]> {
        let idx = ps.index_of(name)?;
        self.slots.get(idx).and_then(|s| s.as_deref())
    }

    pub fn slot(&self, idx: usize) -> Option<&[S]> {
        self.slots.get(idx).and_then(|s| s.as_deref())
    }

    pub fn all_finite(&self) -> bool {
        self.slots
            .iter()
            .flatten()
            .all(|g| g.iter().all(|v| v.is_finite()))
    }
}

pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
    param_leaves: HashMap<usize, Var>,
    num_params: usize,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            param_leaves: HashMap::new(),
            num_params: 0,
        }
    }

    fn push(
        &mut self,
        shape: Vec<usize>,
        value: Vec<S>,
        backward: Option<BackFn<S>>,
    ) -> Var {
        self.nodes.push(Node {
            shape,
            value: Rc::new(value),
            backward,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[S] {
        &self.nodes[v.0].value
    }

    fn value_rc(&self, v: Var) -> Rc<Vec<S>> {
        Rc::clone(&self.nodes[v.0].value)
    }

    pub fn value_tensor(&self, v: Var) -> Tensor<S> {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].value.to_vec())
    }

    /// Scalar value of a single-element node.
    pub fn scalar_value(&self, v: Var) -> S {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    // ---- leaves ----

    pub fn input(&mut self, t: Tensor<S>) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), None)
    }

    pub fn input_from(&mut self, shape: Vec<usize>, data: Vec<S>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.push(shape, data, None)
    }

    /// Leaf mirroring a named parameter; repeated calls return the same node
    /// so every use of a parameter accumulates into one gradient slot.
    pub fn param(&mut self, ps: &ParamSet<S>, name: &str) -> Var {
        let idx = ps
            .index_of(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        self.num_params = self.num_params.max(ps.len());
        if let Some(&v) = self.param_leaves.get(&idx) {
            return v;
        }
        let (shape, data) = ps.entry(idx);
        self.nodes.push(Node {
            shape: shape.to_vec(),
            value: data,
            backward: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_leaves.insert(idx, v);
        v
    }

    /// Same value, cut from the gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let shape = self.nodes[v.0].shape.clone();
        let value = self.value_rc(v);
        self.nodes.push(Node {
            shape,
            value,
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    // ---- shape ops ----

    pub fn reshape(&mut self, v: Var, shape: Vec<usize>) -> Var {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.nodes[v.0].value.len(), "reshape size mismatch");
        let value = self.value_rc(v);
        let len = value.len();
        self.nodes.push(Node {
            shape,
            value,
            backward: Some(Box::new(move |dy, buf| {
                buf.acc_with(v, len, |g| {
                    for (gi, di) in g.iter_mut().zip(dy) {
                        *gi += *di;
                    }
                });
            })),
        });
        Var(self.nodes.len() - 1)
    }

    /// Rows `[r0, r1)` of a tensor whose first axis is the row axis.
    pub fn slice_rows(&mut self, v: Var, r0: usize, r1: usize) -> Var {
        let shape = self.nodes[v.0].shape.clone();
        let rows = shape[0];
        assert!(r0 < r1 && r1 <= rows);
        let row_len: usize = shape[1..].iter().product();
        let total = rows * row_len;
        let value = self.value_rc(v);
        let out: Vec<S> = value[r0 * row_len..r1 * row_len].to_vec();
        let mut out_shape = shape;
        out_shape[0] = r1 - r0;
        self.push(
            out_shape,
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, total, |g| {
                    for (gi, di) in g[r0 * row_len..r1 * row_len].iter_mut().zip(dy) {
                        *gi += *di;
                    }
                });
            })),
        )
    }

    /// Concatenate along the first axis; trailing dims must match.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let trail: Vec<usize> = self.nodes[parts[0].0].shape[1..].to_vec();
        let mut total_rows = 0;
        let mut out = Vec::new();
        let mut seg = Vec::with_capacity(parts.len());
        for &p in parts {
            let sh = &self.nodes[p.0].shape;
            assert_eq!(&sh[1..], trail.as_slice(), "concat_rows trailing dims");
            total_rows += sh[0];
            let v = self.value_rc(p);
            seg.push((p, v.len()));
            out.extend_from_slice(&v);
        }
        let mut shape = vec![total_rows];
        shape.extend_from_slice(&trail);
        self.push(
            shape,
            out,
            Some(Box::new(move |dy, buf| {
                let mut off = 0;
                for &(p, len) in &seg {
                    buf.acc(p, &dy[off..off + len]);
                    off += len;
                }
            })),
        )
    }

    /// Column-wise concat of two 2-D tensors with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (m, p) = self.dims2(a);
        let (m2, q) = self.dims2(b);
        assert_eq!(m, m2, "concat_cols row mismatch");
        let av = self.value_rc(a);
        let bv = self.value_rc(b);
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(&av[i * p..(i + 1) * p]);
            out.extend_from_slice(&bv[i * q..(i + 1) * q]);
        }
        self.push(
            vec![m, p + q],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(a, m * p, |g| {
                    for i in 0..m {
                        for j in 0..p {
                            g[i * p + j] += dy[i * (p + q) + j];
                        }
                    }
                });
                buf.acc_with(b, m * q, |g| {
                    for i in 0..m {
                        for j in 0..q {
                            g[i * q + j] += dy[i * (p + q) + p + j];
                        }
                    }
                });
            })),
        )
    }

    /// Columns `[c0, c1)` of a 2-D tensor.
    pub fn slice_cols(&mut self, v: Var, c0: usize, c1: usize) -> Var {
        let (m, n) = self.dims2(v);
        assert!(c0 < c1 && c1 <= n);
        let w = c1 - c0;
        let val = self.value_rc(v);
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&val[i * n + c0..i * n + c1]);
        }
        self.push(
            vec![m, w],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, m * n, |g| {
                    for i in 0..m {
                        for j in 0..w {
                            g[i * n + c0 + j] += dy[i * w + j];
                        }
                    }
                });
            })),
        )
    }

    fn dims2(&self, v: Var) -> (usize, usize) {
        let sh = &self.nodes[v.0].shape;
        assert_eq!(sh.len(), 2, "expected 2-D tensor, got {sh:?}");
        (sh[0], sh[1])
    }

    // ---- elementwise binary ----

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        f: impl Fn(S, S) -> S,
        back: impl Fn(S, S, S) -> (S, S) + 'static,
    ) -> Var {
        let ash = self.nodes[a.0].shape.clone();
        assert_eq!(
            ash, self.nodes[b.0].shape,
            "elementwise op shape mismatch"
        );
        let av = self.value_rc(a);
        let bv = self.value_rc(b);
        let out: Vec<S> = av.iter().zip(bv.iter()).map(|(&x, &y)| f(x, y)).collect();
        let n = out.len();
        self.push(
            ash,
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(a, n, |g| {
                    for i in 0..n {
                        g[i] += back(av[i], bv[i], dy[i]).0;
                    }
                });
                buf.acc_with(b, n, |g| {
                    for i in 0..n {
                        g[i] += back(av[i], bv[i], dy[i]).1;
                    }
                });
            })),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, |_, _, d| (d, d))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, |_, _, d| (d, -d))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, |x, y, d| (d * y, d * x))
    }

    // ---- elementwise unary ----

    fn unary(&mut self, v: Var, f: impl Fn(S) -> S, dfdx_from_xy: impl Fn(S, S) -> S + 'static) -> Var {
        let shape = self.nodes[v.0].shape.clone();
        let xv = self.value_rc(v);
        let out: Vec<S> = xv.iter().map(|&x| f(x)).collect();
        let yv = Rc::new(out);
        let y_for_back = Rc::clone(&yv);
        let n = yv.len();
        self.nodes.push(Node {
            shape,
            value: yv,
            backward: Some(Box::new(move |dy, buf| {
                buf.acc_with(v, n, |g| {
                    for i in 0..n {
                        g[i] += dy[i] * dfdx_from_xy(xv[i], y_for_back[i]);
                    }
                });
            })),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn neg(&mut self, v: Var) -> Var {
        self.unary(v, |x| -x, |_, _| -S::ONE)
    }

    pub fn exp(&mut self, v: Var) -> Var {
        self.unary(v, |x| x.exp(), |_, y| y)
    }

    pub fn ln(&mut self, v: Var) -> Var {
        self.unary(v, |x| x.ln(), |x, _| S::ONE / x)
    }

    pub fn tanh(&mut self, v: Var) -> Var {
        self.unary(v, |x| x.tanh(), |_, y| S::ONE - y * y)
    }

    pub fn sigmoid(&mut self, v: Var) -> Var {
        self.unary(
            v,
            |x| S::ONE / (S::ONE + (-x).exp()),
            |_, y| y * (S::ONE - y),
        )
    }

    /// x * sigmoid(x); smooth everywhere, which finite-difference checks need.
    pub fn silu(&mut self, v: Var) -> Var {
        self.unary(
            v,
            |x| x * (S::ONE / (S::ONE + (-x).exp())),
            |x, _| {
                let s = S::ONE / (S::ONE + (-x).exp());
                s + x * s * (S::ONE - s)
            },
        )
    }

    pub fn leaky_relu(&mut self, v: Var, alpha: f64) -> Var {
        let a = S::from_f64(alpha);
        self.unary(
            v,
            move |x| if x > S::ZERO { x } else { a * x },
            move |x, _| if x > S::ZERO { S::ONE } else { a },
        )
    }

    /// Clamp with pass-through gradient strictly inside the interval.
    pub fn clamp(&mut self, v: Var, lo: f64, hi: f64) -> Var {
        let l = S::from_f64(lo);
        let h = S::from_f64(hi);
        self.unary(
            v,
            move |x| x.maxv(l).minv(h),
            move |x, _| {
                if x > l && x < h {
                    S::ONE
                } else {
                    S::ZERO
                }
            },
        )
    }

    pub fn scale(&mut self, v: Var, c: f64) -> Var {
        let cs = S::from_f64(c);
        self.unary(v, move |x| x * cs, move |_, _| cs)
    }

    pub fn add_scalar(&mut self, v: Var, c: f64) -> Var {
        let cs = S::from_f64(c);
        self.unary(v, move |x| x + cs, |_, _| S::ONE)
    }

    // ---- reductions ----

    pub fn sum_all(&mut self, v: Var) -> Var {
        let xv = self.value_rc(v);
        let n = xv.len();
        let mut acc = S::ZERO;
        for &x in xv.iter() {
            acc += x;
        }
        self.push(
            vec![1],
            vec![acc],
            Some(Box::new(move |dy, buf| {
                let d = dy[0];
                buf.acc_with(v, n, |g| {
                    for gi in g.iter_mut() {
                        *gi += d;
                    }
                });
            })),
        )
    }

    pub fn mean_all(&mut self, v: Var) -> Var {
        let n = self.nodes[v.0].value.len();
        let s = self.sum_all(v);
        self.scale(s, 1.0 / n as f64)
    }

    /// Per-row sums of a 2-D tensor: [m, n] -> [m].
    pub fn row_sums(&mut self, v: Var) -> Var {
        let (m, n) = self.dims2(v);
        let xv = self.value_rc(v);
        let mut out = vec![S::ZERO; m];
        for i in 0..m {
            for j in 0..n {
                out[i] += xv[i * n + j];
            }
        }
        self.push(
            vec![m],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, m * n, |g| {
                    for i in 0..m {
                        for j in 0..n {
                            g[i * n + j] += dy[i];
                        }
                    }
                });
            })),
        )
    }

    /// Mean over all trailing dimensions per (batch, channel):
    /// [B, C, ...] -> [B, C].
    pub fn global_avg_pool(&mut self, v: Var) -> Var {
        let sh = self.nodes[v.0].shape.clone();
        assert!(sh.len() >= 3, "global_avg_pool expects [B, C, ...]");
        let (b, c) = (sh[0], sh[1]);
        let inner: usize = sh[2..].iter().product();
        let xv = self.value_rc(v);
        let scale = S::from_f64(1.0 / inner as f64);
        let mut out = vec![S::ZERO; b * c];
        for i in 0..b * c {
            let mut acc = S::ZERO;
            for j in 0..inner {
                acc += xv[i * inner + j];
            }
            out[i] = acc * scale;
        }
        self.push(
            vec![b, c],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, b * c * inner, |g| {
                    for i in 0..b * c {
                        let d = dy[i] * scale;
                        for j in 0..inner {
                            g[i * inner + j] += d;
                        }
                    }
                });
            })),
        )
    }

    /// Per-sample normalization over every non-batch dimension:
    /// y = (x - mean) / sqrt(var + eps), computed per row of the first axis.
    /// Stateless, so training and inference see the same function.
    pub fn layer_norm_rows(&mut self, v: Var, eps: f64) -> Var {
        let sh = self.nodes[v.0].shape.clone();
        assert!(sh.len() >= 2, "layer_norm_rows expects [B, ...]");
        let b = sh[0];
        let inner: usize = sh[1..].iter().product();
        let xv = self.value_rc(v);
        let epss = S::from_f64(eps);
        let invn = S::from_f64(1.0 / inner as f64);
        let mut out = vec![S::ZERO; b * inner];
        let mut inv_sigma = vec![S::ZERO; b];
        for i in 0..b {
            let row = &xv[i * inner..(i + 1) * inner];
            let mut mean = S::ZERO;
            for &x in row {
                mean += x;
            }
            mean *= invn;
            let mut var = S::ZERO;
            for &x in row {
                let d = x - mean;
                var += d * d;
            }
            var *= invn;
            let inv = S::ONE / (var + epss).sqrt();
            inv_sigma[i] = inv;
            for j in 0..inner {
                out[i * inner + j] = (row[j] - mean) * inv;
            }
        }
        let yv = Rc::new(out);
        let y_back = Rc::clone(&yv);
        self.nodes.push(Node {
            shape: sh,
            value: yv,
            backward: Some(Box::new(move |dy, buf| {
                buf.acc_with(v, b * inner, |g| {
                    for i in 0..b {
                        let yrow = &y_back[i * inner..(i + 1) * inner];
                        let drow = &dy[i * inner..(i + 1) * inner];
                        let mut mean_dy = S::ZERO;
                        let mut mean_dy_y = S::ZERO;
                        for j in 0..inner {
                            mean_dy += drow[j];
                            mean_dy_y += drow[j] * yrow[j];
                        }
                        mean_dy *= invn;
                        mean_dy_y *= invn;
                        let inv = inv_sigma[i];
                        for j in 0..inner {
                            g[i * inner + j] +=
                                inv * (drow[j] - mean_dy - yrow[j] * mean_dy_y);
                        }
                    }
                });
            })),
        });
        Var(self.nodes.len() - 1)
    }

    /// Max over all trailing dimensions per (batch, channel):
    /// [B, C, ...] -> [B, C]. Gradient flows to the first argmax.
    pub fn global_max_pool(&mut self, v: Var) -> Var {
        let sh = self.nodes[v.0].shape.clone();
        assert!(sh.len() >= 3, "global_max_pool expects [B, C, ...]");
        let (b, c) = (sh[0], sh[1]);
        let inner: usize = sh[2..].iter().product();
        let xv = self.value_rc(v);
        let mut out = vec![S::ZERO; b * c];
        let mut arg = vec![0usize; b * c];
        for i in 0..b * c {
            let mut best = xv[i * inner];
            let mut bj = 0;
            for j in 1..inner {
                if xv[i * inner + j] > best {
                    best = xv[i * inner + j];
                    bj = j;
                }
            }
            out[i] = best;
            arg[i] = bj;
        }
        self.push(
            vec![b, c],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, b * c * inner, |g| {
                    for i in 0..b * c {
                        g[i * inner + arg[i]] += dy[i];
                    }
                });
            })),
        )
    }

    /// Per-column sums of a 2-D tensor: [m, n] -> [n].
    pub fn col_sums(&mut self, v: Var) -> Var {
        let (m, n) = self.dims2(v);
        let xv = self.value_rc(v);
        let mut out = vec![S::ZERO; n];
        for i in 0..m {
            for j in 0..n {
                out[j] += xv[i * n + j];
            }
        }
        self.push(
            vec![n],
            out,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(v, m * n, |g| {
                    for i in 0..m {
                        for j in 0..n {
                            g[i * n + j] += dy[j];
                        }
                    }
                });
            })),
        )
    }

    // ---- linear algebra ----

    /// y = x · wᵀ + b with x: [m, in], w: [out, in], b: [out].
    pub fn linear(&mut self, x: Var, w: Var, b: Var, out_dim: usize) -> Var {
        let (m, k) = self.dims2(x);
        let (o, k2) = self.dims2(w);
        assert_eq!(k, k2, "linear in-dim mismatch");
        assert_eq!(o, out_dim);
        assert_eq!(self.nodes[b.0].value.len(), o, "linear bias dim");
        let xv = self.value_rc(x);
        let wv = self.value_rc(w);
        let bv = self.value_rc(b);
        let mut y = vec![S::ZERO; m * o];
        conv::matmul_nt(&xv, &wv, &mut y, m, k, o);
        for i in 0..m {
            for j in 0..o {
                y[i * o + j] += bv[j];
            }
        }
        self.push(
            vec![m, o],
            y,
            Some(Box::new(move |dy, buf| {
                // dx += dy · w
                buf.acc_with(x, m * k, |g| {
                    let mut tmp = vec![S::ZERO; m * k];
                    conv::matmul(dy, &wv, &mut tmp, m, o, k);
                    for (gi, ti) in g.iter_mut().zip(&tmp) {
                        *gi += *ti;
                    }
                });
                // dw += dyᵀ · x
                buf.acc_with(w, o * k, |g| {
                    conv::matmul_tn_acc(dy, &xv, g, o, m, k);
                });
                // db += column sums of dy
                buf.acc_with(b, o, |g| {
                    for i in 0..m {
                        for j in 0..o {
                            g[j] += dy[i * o + j];
                        }
                    }
                });
            })),
        )
    }

    /// y = a · b with a: [m, k], b: [k, n].
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims2(a);
        let (k2, n) = self.dims2(b);
        assert_eq!(k, k2, "matmul inner dim");
        let av = self.value_rc(a);
        let bv = self.value_rc(b);
        let mut y = vec![S::ZERO; m * n];
        conv::matmul(&av, &bv, &mut y, m, k, n);
        self.push(
            vec![m, n],
            y,
            Some(Box::new(move |dy, buf| {
                buf.acc_with(a, m * k, |g| {
                    let mut tmp = vec![S::ZERO; m * k];
                    conv::matmul_nt(dy, &bv, &mut tmp, m, n, k);
                    for (gi, ti) in g.iter_mut().zip(&tmp) {
                        *gi += *ti;
                    }
                });
                buf.acc_with(b, k * n, |g| {
                    conv::matmul_tn_acc(&av, dy, g, k, m, n);
                });
            })),
        )
    }

    // ---- convolutions ----

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, spec: Conv2dSpec) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[w.0].shape.clone();
        assert_eq!(xs.len(), 4, "conv2d input must be [B,C,H,W]");
        assert_eq!(ws.len(), 4, "conv2d weight must be [Co,Ci,kH,kW]");
        assert_eq!(xs[1], ws[1], "conv2d channel mismatch");
        let (bsz, ci, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (co, kh, kw) = (ws[0], ws[2], ws[3]);
        let (oh, ow) = spec.out_hw(h, wd, kh, kw);
        let xv = self.value_rc(x);
        let wv = self.value_rc(w);
        let bv = self.value_rc(b);
        let mut y = vec![S::ZERO; bsz * co * oh * ow];
        conv::conv2d_forward_fast(&xv, &wv, &bv, &mut y, (bsz, ci, h, wd), (co, kh, kw), spec);
        self.push(
            vec![bsz, co, oh, ow],
            y,
            Some(Box::new(move |dy, buf| {
                let mut dx = vec![S::ZERO; xv.len()];
                let mut dw = vec![S::ZERO; wv.len()];
                let mut db = vec![S::ZERO; bv.len()];
                conv::conv2d_backward_fast(
                    &xv,
                    &wv,
                    dy,
                    &mut dx,
                    &mut dw,
                    &mut db,
                    (bsz, ci, h, wd),
                    (co, kh, kw),
                    spec,
                );
                buf.acc(x, &dx);
                buf.acc(w, &dw);
                buf.acc(b, &db);
            })),
        )
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var, spec: Conv2dSpec) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[w.0].shape.clone();
        assert_eq!(xs.len(), 4, "conv_transpose2d input must be [B,C,H,W]");
        assert_eq!(ws.len(), 4, "conv_transpose2d weight must be [Ci,Co,kH,kW]");
        assert_eq!(xs[1], ws[0], "conv_transpose2d channel mismatch");
        let (bsz, ci, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (co, kh, kw) = (ws[1], ws[2], ws[3]);
        let (oh, ow) = spec.transpose_out_hw(h, wd, kh, kw);
        let xv = self.value_rc(x);
        let wv = self.value_rc(w);
        let bv = self.value_rc(b);
        let mut y = vec![S::ZERO; bsz * co * oh * ow];
        conv::conv_transpose2d_forward(
            &xv,
            &wv,
            &bv,
            &mut y,
            (bsz, ci, h, wd),
            (co, kh, kw),
            spec,
        );
        self.push(
            vec![bsz, co, oh, ow],
            y,
            Some(Box::new(move |dy, buf| {
                let mut dx = vec![S::ZERO; xv.len()];
                let mut dw = vec![S::ZERO; wv.len()];
                let mut db = vec![S::ZERO; bv.len()];
                conv::conv_transpose2d_backward(
                    &xv,
                    &wv,
                    dy,
                    &mut dx,
                    &mut dw,
                    &mut db,
                    (bsz, ci, h, wd),
                    (co, kh, kw),
                    spec,
                );
                buf.acc(x, &dx);
                buf.acc(w, &dw);
                buf.acc(b, &db);
            })),
        )
    }

    pub fn conv3d(&mut self, x: Var, w: Var, b: Var, spec: Conv3dSpec) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[w.0].shape.clone();
        assert_eq!(xs.len(), 5, "conv3d input must be [B,C,T,H,W]");
        assert_eq!(ws.len(), 5, "conv3d weight must be [Co,Ci,kT,kH,kW]");
        assert_eq!(xs[1], ws[1], "conv3d channel mismatch");
        let (bsz, ci, t, h, wd) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        let (co, kt, kh, kw) = (ws[0], ws[2], ws[3], ws[4]);
        let [ot, oh, ow] = spec.out_thw([t, h, wd], [kt, kh, kw]);
        let xv = self.value_rc(x);
        let wv = self.value_rc(w);
        let bv = self.value_rc(b);
        let mut y = vec![S::ZERO; bsz * co * ot * oh * ow];
        conv::conv3d_forward_fast(
            &xv,
            &wv,
            &bv,
            &mut y,
            (bsz, ci, t, h, wd),
            (co, kt, kh, kw),
            spec,
        );
        self.push(
            vec![bsz, co, ot, oh, ow],
            y,
            Some(Box::new(move |dy, buf| {
                let mut dx = vec![S::ZERO; xv.len()];
                let mut dw = vec![S::ZERO; wv.len()];
                let mut db = vec![S::ZERO; bv.len()];
                conv::conv3d_backward_fast(
                    &xv,
                    &wv,
                    dy,
                    &mut dx,
                    &mut dw,
                    &mut db,
                    (bsz, ci, t, h, wd),
                    (co, kt, kh, kw),
                    spec,
                );
                buf.acc(x, &dx);
                buf.acc(w, &dw);
                buf.acc(b, &db);
            })),
        )
    }

    // ---- fused classifier ops ----

    /// Row-wise log-softmax of a [m, n] tensor.
    pub fn log_softmax_rows(&mut self, v: Var) -> Var {
        let (m, n) = self.dims2(v);
        let xv = self.value_rc(v);
        let mut out = vec![S::ZERO; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            let mut mx = row[0];
            for &x in row {
                mx = mx.maxv(x);
            }
            let mut lse = S::ZERO;
            for &x in row {
                lse += (x - mx).exp();
            }
            let lse = mx + lse.ln();
            for j in 0..n {
                out[i * n + j] = row[j] - lse;
            }
        }
        let yv = Rc::new(out);
        let y_back = Rc::clone(&yv);
        self.nodes.push(Node {
            shape: vec![m, n],
            value: yv,
            backward: Some(Box::new(move |dy, buf| {
                buf.acc_with(v, m * n, |g| {
                    for i in 0..m {
                        let mut rowsum = S::ZERO;
                        for j in 0..n {
                            rowsum += dy[i * n + j];
                        }
                        for j in 0..n {
                            let p = y_back[i * n + j].exp();
                            g[i * n + j] += dy[i * n + j] - p * rowsum;
                        }
                    }
                });
            })),
        });
        Var(self.nodes.len() - 1)
    }

    /// Mean negative log-likelihood of per-row targets against row-wise
    /// log-probabilities.
    pub fn nll_rows(&mut self, logp: Var, targets: &[usize]) -> Var {
        let (m, n) = self.dims2(logp);
        assert_eq!(m, targets.len(), "nll_rows target count");
        let xv = self.value_rc(logp);
        let mut acc = S::ZERO;
        for (i, &t) in targets.iter().enumerate() {
            assert!(t < n, "target class out of range");
            acc += xv[i * n + t];
        }
        let val = -acc / S::from_f64(m as f64);
        let tg = targets.to_vec();
        self.push(
            vec![1],
            vec![val],
            Some(Box::new(move |dy, buf| {
                let d = dy[0] / S::from_f64(m as f64);
                buf.acc_with(logp, m * n, |g| {
                    for (i, &t) in tg.iter().enumerate() {
                        g[i * n + t] -= d;
                    }
                });
            })),
        )
    }

    // ---- backward ----

    /// Run reverse accumulation from a scalar root; returns parameter
    /// gradients aligned with the [`ParamSet`] used to build the graph.
    pub fn backward(&self, root: Var) -> Gradients<S> {
        assert_eq!(
            self.nodes[root.0].value.len(),
            1,
            "backward root must be scalar"
        );
        let mut buf = GradBuf::new(self.nodes.len());
        buf.slice_mut(root, 1)[0] = S::ONE;
        for id in (0..=root.0).rev() {
            let Some(g) = buf.grads[id].take() else {
                continue;
            };
            if let Some(back) = &self.nodes[id].backward {
                back(&g, &mut buf);
            }
            buf.grads[id] = Some(g);
        }
        let mut slots: Vec<Option<Vec<S>>> = (0..self.num_params).map(|_| None).collect();
        for (&pidx, &var) in &self.param_leaves {
            if let Some(g) = buf.grads[var.0].take() {
                if pidx >= slots.len() {
                    slots.resize_with(pidx + 1, || None);
                }
                slots[pidx] = Some(g);
            }
        }
        Gradients { slots }
    }
}
