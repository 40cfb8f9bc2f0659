//! Adam optimizer over a [`ParamSet`].

use super::graph::Gradients;
use super::nn::ParamSet;
use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient (classic Adam weight decay).
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

pub struct Adam<S> {
    cfg: AdamConfig,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(cfg: AdamConfig, params: &ParamSet<S>) -> Self {
        let m = params.iter().map(|(_, _, d)| vec![S::ZERO; d.len()]).collect();
        let v = params.iter().map(|(_, _, d)| vec![S::ZERO; d.len()]).collect();
        Adam { cfg, m, v, t: 0 }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update. Parameters without a gradient slot (absent from the graph)
    /// are left untouched, moments included.
    pub fn step(&mut self, params: &mut ParamSet<S>, grads: &Gradients<S>) {
        self.step_filtered(params, grads, |_| true);
    }

    /// One update restricted to parameters whose name passes `keep`. Used for
    /// alternating GAN updates, where generator losses have gradients through
    /// the discriminators that must not move them.
    pub fn step_filtered(
        &mut self,
        params: &mut ParamSet<S>,
        grads: &Gradients<S>,
        keep: impl Fn(&str) -> bool,
    ) {
        self.t += 1;
        let b1 = S::from_f64(self.cfg.beta1);
        let b2 = S::from_f64(self.cfg.beta2);
        let one_m_b1 = S::from_f64(1.0 - self.cfg.beta1);
        let one_m_b2 = S::from_f64(1.0 - self.cfg.beta2);
        let eps = S::from_f64(self.cfg.eps);
        let wd = S::from_f64(self.cfg.weight_decay);
        let bias1 = S::from_f64(1.0 - self.cfg.beta1.powi(self.t as i32));
        let bias2 = S::from_f64(1.0 - self.cfg.beta2.powi(self.t as i32));
        let lr = S::from_f64(self.cfg.lr);
        let names: Vec<String> = params.names().map(str::to_string).collect();
        for idx in 0..params.len() {
            let Some(grad) = grads.slot(idx) else {
                continue;
            };
            if !keep(&names[idx]) {
                continue;
            }
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let theta = params.values_mut(idx);
            for i in 0..theta.len() {
                let g = grad[i] + wd * theta[i];
                m[i] = b1 * m[i] + one_m_b1 * g;
                v[i] = b2 * v[i] + one_m_b2 * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// Raw optimizer state for checkpointing: (first moments, second moments, step).
    pub fn state(&self) -> (&[Vec<S>], &[Vec<S>], u64) {
        (&self.m, &self.v, self.t)
    }

    pub fn restore(&mut self, m: Vec<Vec<S>>, v: Vec<Vec<S>>, t: u64) {
        assert_eq!(m.len(), self.m.len());
        assert_eq!(v.len(), self.v.len());
        self.m = m;
        self.v = v;
        self.t = t;
    }
}
