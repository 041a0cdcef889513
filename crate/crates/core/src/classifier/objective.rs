//! Mean cross-entropy of a softmax-linear model over sparse inputs, its
//! gradient, and the AdamW update.

/// One training input after column compaction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
    pub label: usize,
}

/// Dense parameters; `weights` is row-major `[n_labels × n_features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub n_labels: usize,
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Parameters {
    pub fn zeros(n_labels: usize, n_features: usize) -> Self {
        Self {
            n_labels,
            n_features,
            weights: vec![0.0; n_labels * n_features],
            bias: vec![0.0; n_labels],
        }
    }

    pub fn scores(&self, ex: &SparseExample) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (&c, &v) in ex.cols.iter().zip(&ex.values) {
            for (l, s) in out.iter_mut().enumerate() {
                *s += self.weights[l * self.n_features + c] * v;
            }
        }
        out
    }

    /// Natural-log softmax probabilities.
    pub fn proba(&self, ex: &SparseExample) -> Vec<f64> {
        softmax(&self.scores(ex))
    }

    /// Mean cross-entropy (nats) over `batch`.
    pub fn loss<'a>(&self, batch: impl IntoIterator<Item = &'a SparseExample>) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for ex in batch {
            let scores = self.scores(ex);
            total += log_sum_exp(&scores) - scores[ex.label];
            n += 1;
        }
        total / n as f64
    }

    /// Mean cross-entropy over `batch` and its gradient. Gradient buffers are
    /// overwritten.
    pub fn loss_and_gradient(&self, batch: &[&SparseExample], grad: &mut Gradient) -> f64 {
        grad.reset(self.n_labels, self.n_features);
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for ex in batch {
            let scores = self.scores(ex);
            let lse = log_sum_exp(&scores);
            total += lse - scores[ex.label];
            for (l, &score) in scores.iter().enumerate() {
                let residual = ((score - lse).exp() - if l == ex.label { 1.0 } else { 0.0 }) * scale;
                grad.bias[l] += residual;
                let row = l * self.n_features;
                for (&c, &v) in ex.cols.iter().zip(&ex.values) {
                    grad.weights[row + c] += residual * v;
                }
            }
        }
        total * scale
    }
}

#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradient {
    fn reset(&mut self, n_labels: usize, n_features: usize) {
        self.weights.clear();
        self.weights.resize(n_labels * n_features, 0.0);
        self.bias.clear();
        self.bias.resize(n_labels, 0.0);
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Adam with decoupled weight decay. Decay applies to weights only.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    step: i32,
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

impl AdamW {
    pub fn new(params: &Parameters, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            step: 0,
            m_w: vec![0.0; params.weights.len()],
            v_w: vec![0.0; params.weights.len()],
            m_b: vec![0.0; params.bias.len()],
            v_b: vec![0.0; params.bias.len()],
        }
    }

    pub fn step(&mut self, params: &mut Parameters, grad: &Gradient) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], decay: f64| {
            for i in 0..p.len() {
                p[i] *= decay;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        };
        update(&mut params.weights, &grad.weights, &mut self.m_w, &mut self.v_w, decay);
        update(&mut params.bias, &grad.bias, &mut self.m_b, &mut self.v_b, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert!((softmax(&[0.0, 0.0, 0.0, 0.0])[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_adam_step_moves_by_learning_rate() {
        // With bias correction the first step is lr * sign(g) (up to epsilon).
        let mut p = Parameters::zeros(2, 1);
        let mut opt = AdamW::new(&p, 0.1, 0.0);
        let grad = Gradient {
            weights: vec![0.5, -2.0],
            bias: vec![1e-3, 0.0],
        };
        opt.step(&mut p, &grad);
        assert!((p.weights[0] + 0.1).abs() < 1e-6);
        assert!((p.weights[1] - 0.1).abs() < 1e-6);
        assert!((p.bias[0] + 0.1).abs() < 1e-4);
        assert_eq!(p.bias[1], 0.0);
    }

    #[test]
    fn decoupled_decay_shrinks_weights_without_gradient() {
        let mut p = Parameters::zeros(1, 1);
        p.weights[0] = 2.0;
        p.bias[0] = 2.0;
        let mut opt = AdamW::new(&p, 0.1, 0.5);
        opt.step(&mut p, &Gradient { weights: vec![0.0], bias: vec![0.0] });
        assert!((p.weights[0] - 2.0 * 0.95).abs() < 1e-12);
        assert_eq!(p.bias[0], 2.0);
    }
}
