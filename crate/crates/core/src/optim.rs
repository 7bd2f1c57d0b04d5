//! Per-tensor optimizers over flat parameter slices.

/// Adagrad with accumulated squared gradients.
#[derive(Debug, Clone)]
pub struct Adagrad {
    lr: f64,
    eps: f64,
    acc: Vec<f64>,
}

impl Adagrad {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            eps: 1e-10,
            acc: vec![0.0; len],
        }
    }

    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) {
        assert_eq!(param.len(), self.acc.len());
        assert_eq!(grad.len(), self.acc.len());
        for ((p, &g), a) in param.iter_mut().zip(grad).zip(&mut self.acc) {
            if g == 0.0 {
                continue;
            }
            *a += g * g;
            *p -= self.lr * g / (a.sqrt() + self.eps);
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) {
        assert_eq!(param.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..param.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            param[i] -= self.lr * (mhat / (vhat.sqrt() + self.eps) + self.weight_decay * param[i]);
        }
    }
}
