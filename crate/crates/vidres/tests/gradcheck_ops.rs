//! Finite-difference verification of every graph op's backward pass.
//!
//! Each case builds a scalar loss from one op applied to a randomly
//! initialized parameter, then compares the tape gradient against central
//! differences in double precision. Everything downstream (models, training,
//! the ELBO oracle) leans on these checks.

use vidres::autodiff::{
    Adam, AdamConfig, Conv2dSpec, Conv3dSpec, Graph, GruCell, Init, LstmCell, ParamSet, Var,
};
use vidres::math::{central_difference, relative_error};
use vidres::rng::RandomSource;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

/// Check d(loss)/d(param) for every coordinate of every registered parameter.
fn check_all_coords(
    build: &dyn Fn(&mut Graph<f64>, &ParamSet<f64>) -> Var,
    params: &mut ParamSet<f64>,
) {
    let analytic: Vec<(String, Vec<f64>)> = {
        let mut g = Graph::new();
        let loss = build(&mut g, params);
        let grads = g.backward(loss);
        params
            .names()
            .map(|n| {
                let len = params.values(n).unwrap().len();
                let grad = grads
                    .get(params, n)
                    .map(|g| g.to_vec())
                    .unwrap_or_else(|| vec![0.0; len]);
                (n.to_string(), grad)
            })
            .collect()
    };
    let cell = std::cell::RefCell::new(params);
    for (name, grad) in &analytic {
        let idx = cell.borrow().index_of(name).unwrap();
        for (i, &a) in grad.iter().enumerate() {
            let orig = cell.borrow().values(name).unwrap()[i];
            let mut theta = vec![orig];
            let numeric = central_difference(&mut theta, 0, EPS, &mut |p| {
                let mut ps = cell.borrow_mut();
                ps.values_mut(idx)[i] = p[0];
                let mut g = Graph::new();
                let loss = build(&mut g, &ps);
                Ok(g.scalar_value(loss))
            })
            .unwrap();
            cell.borrow_mut().values_mut(idx)[i] = orig;
            let rel = relative_error(a, numeric, 1e-4);
            assert!(
                rel <= TOL,
                "{name}[{i}]: analytic {a} vs numeric {numeric} (rel {rel:.2e})"
            );
        }
    }
}

fn free_param(ps: &mut ParamSet<f64>, name: &str, shape: Vec<usize>, rng: &mut RandomSource) {
    ps.register(name, shape, Init::FanIn(4), rng);
}

#[test]
fn elementwise_and_reduction_ops() {
    let mut rng = RandomSource::new(100);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "a", vec![3, 4], &mut rng);
    free_param(&mut ps, "b", vec![3, 4], &mut rng);
    check_all_coords(
        &|g, ps| {
            let a = g.param(ps, "a");
            let b = g.param(ps, "b");
            let s = g.add(a, b);
            let d = g.sub(s, b);
            let m = g.mul(d, s);
            let e = g.exp(m);
            let sc = g.scale(e, 0.25);
            let t = g.tanh(sc);
            let si = g.sigmoid(t);
            let sl = g.silu(si);
            let lr = g.leaky_relu(sl, 0.2);
            let shifted = g.add_scalar(lr, 1.5);
            let l = g.ln(shifted);
            let n = g.neg(l);
            g.mean_all(n)
        },
        &mut ps,
    );
}

#[test]
fn row_and_col_sums_gradients() {
    let mut rng = RandomSource::new(115);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![3, 4], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let r = g.row_sums(x); // [3]
            let c = g.col_sums(x); // [4]
            let r2 = g.mul(r, r);
            let c2 = g.mul(c, c);
            let rs = g.sum_all(r2);
            let cs = g.sum_all(c2);
            g.add(rs, cs)
        },
        &mut ps,
    );
}

#[test]
fn mul_with_shared_operand_accumulates() {
    // square via mul(x, x) must produce gradient 2x.
    let mut rng = RandomSource::new(101);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![5], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let sq = g.mul(x, x);
            g.sum_all(sq)
        },
        &mut ps,
    );
}

#[test]
fn clamp_gradient_masks_outside() {
    let mut ps = ParamSet::new();
    let mut rng = RandomSource::new(102);
    ps.register("x", vec![3], Init::Zeros, &mut rng);
    ps.set_values("x", &[-2.0, 0.3, 2.0]).unwrap();
    let mut g = Graph::new();
    let x = g.param(&ps, "x");
    let c = g.clamp(x, -1.0, 1.0);
    let loss = g.sum_all(c);
    let grads = g.backward(loss);
    assert_eq!(grads.get(&ps, "x").unwrap(), &[0.0, 1.0, 0.0]);
}

#[test]
fn matmul_linear_and_shape_ops() {
    let mut rng = RandomSource::new(103);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "a", vec![3, 4], &mut rng);
    free_param(&mut ps, "b", vec![4, 2], &mut rng);
    free_param(&mut ps, "w", vec![5, 2], &mut rng);
    free_param(&mut ps, "bias", vec![5], &mut rng);
    check_all_coords(
        &|g, ps| {
            let a = g.param(ps, "a");
            let b = g.param(ps, "b");
            let w = g.param(ps, "w");
            let bias = g.param(ps, "bias");
            let mm = g.matmul(a, b); // [3,2]
            let lin = g.linear(mm, w, bias, 5); // [3,5]
            let left = g.slice_cols(lin, 0, 2);
            let right = g.slice_cols(lin, 2, 5);
            let right2 = g.slice_cols(right, 0, 2);
            let cc = g.concat_cols(left, right2); // [3,4]
            let top = g.slice_rows(cc, 0, 1);
            let bot = g.slice_rows(cc, 1, 3);
            let rows = g.concat_rows(&[top, bot]);
            let r = g.reshape(rows, vec![12]);
            let sq = g.mul(r, r);
            g.sum_all(sq)
        },
        &mut ps,
    );
}

#[test]
fn conv2d_gradients() {
    let mut rng = RandomSource::new(104);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![2, 2, 6, 6], &mut rng);
    free_param(&mut ps, "w", vec![3, 2, 4, 4], &mut rng);
    free_param(&mut ps, "b", vec![3], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let w = g.param(ps, "w");
            let b = g.param(ps, "b");
            let y = g.conv2d(x, w, b, Conv2dSpec { stride: 2, pad: 1 });
            let t = g.tanh(y);
            g.sum_all(t)
        },
        &mut ps,
    );
}

#[test]
fn conv_transpose2d_gradients() {
    let mut rng = RandomSource::new(105);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![2, 3, 3, 3], &mut rng);
    free_param(&mut ps, "w", vec![3, 2, 4, 4], &mut rng);
    free_param(&mut ps, "b", vec![2], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let w = g.param(ps, "w");
            let b = g.param(ps, "b");
            let y = g.conv_transpose2d(x, w, b, Conv2dSpec { stride: 2, pad: 1 });
            let t = g.silu(y);
            g.mean_all(t)
        },
        &mut ps,
    );
}

#[test]
fn conv_transpose2d_matches_upsample_shape() {
    let mut rng = RandomSource::new(106);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![1, 2, 4, 4], &mut rng);
    free_param(&mut ps, "w", vec![2, 1, 4, 4], &mut rng);
    free_param(&mut ps, "b", vec![1], &mut rng);
    let mut g = Graph::new();
    let x = g.param(&ps, "x");
    let w = g.param(&ps, "w");
    let b = g.param(&ps, "b");
    let y = g.conv_transpose2d(x, w, b, Conv2dSpec { stride: 2, pad: 1 });
    assert_eq!(g.shape(y), &[1, 1, 8, 8]);
}

#[test]
fn conv3d_gradients() {
    let mut rng = RandomSource::new(107);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![1, 2, 4, 6, 6], &mut rng);
    free_param(&mut ps, "w", vec![2, 2, 4, 4, 4], &mut rng);
    free_param(&mut ps, "b", vec![2], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let w = g.param(ps, "w");
            let b = g.param(ps, "b");
            let y = g.conv3d(
                x,
                w,
                b,
                Conv3dSpec {
                    stride: [2, 2, 2],
                    pad: [1, 1, 1],
                },
            );
            let t = g.tanh(y);
            g.sum_all(t)
        },
        &mut ps,
    );
}

#[test]
fn lstm_cell_gradients() {
    let mut rng = RandomSource::new(108);
    let mut ps = ParamSet::new();
    let cell = LstmCell::new(&mut ps, &mut rng, "cell", 3, 4);
    free_param(&mut ps, "x0", vec![2, 3], &mut rng);
    free_param(&mut ps, "x1", vec![2, 3], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x0 = g.param(ps, "x0");
            let x1 = g.param(ps, "x1");
            let (h, c) = cell.zero_state(g, 2);
            let (h, c) = cell.step(g, ps, x0, h, c);
            let (h, _c) = cell.step(g, ps, x1, h, c);
            let sq = g.mul(h, h);
            g.sum_all(sq)
        },
        &mut ps,
    );
}

#[test]
fn gru_cell_gradients() {
    let mut rng = RandomSource::new(109);
    let mut ps = ParamSet::new();
    let cell = GruCell::new(&mut ps, &mut rng, "cell", 3, 4);
    free_param(&mut ps, "x0", vec![2, 3], &mut rng);
    free_param(&mut ps, "x1", vec![2, 3], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x0 = g.param(ps, "x0");
            let x1 = g.param(ps, "x1");
            let h = cell.zero_state(g, 2);
            let h = cell.step(g, ps, x0, h);
            let h = cell.step(g, ps, x1, h);
            let sq = g.mul(h, h);
            g.sum_all(sq)
        },
        &mut ps,
    );
}

#[test]
fn log_softmax_nll_gradients() {
    let mut rng = RandomSource::new(110);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "logits", vec![4, 3], &mut rng);
    let targets = vec![0, 2, 1, 2];
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "logits");
            let lp = g.log_softmax_rows(x);
            g.nll_rows(lp, &targets)
        },
        &mut ps,
    );
}

#[test]
fn detach_blocks_gradient() {
    let mut rng = RandomSource::new(111);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![3], &mut rng);
    let mut g = Graph::new();
    let x = g.param(&ps, "x");
    let d = g.detach(x);
    let sq = g.mul(d, d);
    let loss = g.sum_all(sq);
    let grads = g.backward(loss);
    assert!(grads.get(&ps, "x").is_none());
}

#[test]
fn param_reuse_accumulates_into_one_slot() {
    let mut rng = RandomSource::new(112);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![2], &mut rng);
    let mut g = Graph::new();
    let x1 = g.param(&ps, "x");
    let x2 = g.param(&ps, "x");
    assert_eq!(x1, x2);
    let s = g.add(x1, x2); // 2x
    let loss = g.sum_all(s);
    let grads = g.backward(loss);
    assert_eq!(grads.get(&ps, "x").unwrap(), &[2.0, 2.0]);
}

#[test]
fn adam_converges_on_quadratic() {
    let mut rng = RandomSource::new(113);
    let mut ps: ParamSet<f64> = ParamSet::new();
    ps.register("theta", vec![4], Init::Const(5.0), &mut rng);
    let mut adam = Adam::new(
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
        &ps,
    );
    for _ in 0..400 {
        let mut g = Graph::new();
        let th = g.param(&ps, "theta");
        let sq = g.mul(th, th);
        let loss = g.sum_all(sq);
        let grads = g.backward(loss);
        adam.step(&mut ps, &grads);
    }
    for &v in ps.values("theta").unwrap() {
        assert!(v.abs() < 1e-2, "theta = {v}");
    }
    assert_eq!(adam.step_count(), 400);
}

#[test]
fn adam_skips_params_missing_from_graph() {
    let mut rng = RandomSource::new(114);
    let mut ps: ParamSet<f64> = ParamSet::new();
    ps.register("used", vec![2], Init::Const(1.0), &mut rng);
    ps.register("frozen", vec![2], Init::Const(3.5), &mut rng);
    let mut adam = Adam::new(AdamConfig::default(), &ps);
    let mut g = Graph::new();
    let u = g.param(&ps, "used");
    let sq = g.mul(u, u);
    let loss = g.sum_all(sq);
    let grads = g.backward(loss);
    adam.step(&mut ps, &grads);
    assert_eq!(ps.values("frozen").unwrap(), &[3.5, 3.5]);
    assert_ne!(ps.values("used").unwrap(), &[1.0, 1.0]);
}

#[test]
fn pooling_and_layer_norm_gradients() {
    let mut rng = RandomSource::new(116);
    let mut ps = ParamSet::new();
    free_param(&mut ps, "x", vec![2, 3, 2, 2], &mut rng);
    check_all_coords(
        &|g, ps| {
            let x = g.param(ps, "x");
            let ln = g.layer_norm_rows(x, 1e-5);
            let avg = g.global_avg_pool(ln);
            let sq = g.mul(avg, avg);
            g.sum_all(sq)
        },
        &mut ps,
    );
}

#[test]
fn global_max_pool_routes_gradient_to_argmax() {
    let mut rng = RandomSource::new(117);
    let mut ps: ParamSet<f64> = ParamSet::new();
    ps.register("x", vec![1, 2, 2, 2], Init::Zeros, &mut rng);
    ps.set_values("x", &[0.1, 0.9, 0.3, 0.2, -1.0, -0.5, -2.0, -0.1]).unwrap();
    let mut g = Graph::new();
    let x = g.param(&ps, "x");
    let mx = g.global_max_pool(x);
    assert_eq!(g.value(mx), &[0.9, -0.1]);
    let loss = g.sum_all(mx);
    let grads = g.backward(loss);
    assert_eq!(
        grads.get(&ps, "x").unwrap(),
        &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
    );
}
