use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(shape_of: &Mlp, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: shape_of.zeros_like(),
            v: shape_of.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut Mlp, grads: &Mlp) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (lr, eps) = (self.learning_rate, self.epsilon);

        let moments = Moments { b1, b2, c1, c2, lr, eps };
        let layers = params
            .layers_mut()
            .iter_mut()
            .zip(grads.layers())
            .zip(self.m.layers_mut().iter_mut().zip(self.v.layers_mut()));
        for ((p, g), (m, v)) in layers {
            moments.apply(&mut p.weights, &g.weights, &mut m.weights, &mut v.weights);
            moments.apply(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}

struct Moments {
    b1: f64,
    b2: f64,
    c1: f64,
    c2: f64,
    lr: f64,
    eps: f64,
}

impl Moments {
    fn apply<D: Dimension>(&self, p: &mut Array<f64, D>, g: &Array<f64, D>, m: &mut Array<f64, D>, v: &mut Array<f64, D>) {
        Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = self.b1 * *m + (1.0 - self.b1) * g;
            *v = self.b2 * *v + (1.0 - self.b2) * g * g;
            *p -= self.lr * (*m / self.c1) / ((*v / self.c2).sqrt() + self.eps);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction the first update is lr * g / (|g| + eps)
        let mut p = Mlp::zeros(&[1, 1]);
        let mut g = Mlp::zeros(&[1, 1]);
        g.set_params_flat(&[2.0, -0.5]);
        let mut adam = Adam::new(&p, 0.01, 0.9, 0.999, 1e-8);
        adam.update(&mut p, &g);
        let flat = p.params_flat();
        assert!((flat[0] + 0.01).abs() < 1e-9);
        assert!((flat[1] - 0.01).abs() < 1e-9);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        let mut p = Mlp::zeros(&[2, 3, 1]);
        p.set_params_flat(&(0..13).map(|i| i as f64 * 0.1).collect::<Vec<_>>());
        let before = p.clone();
        let mut adam = Adam::new(&p, 0.01, 0.9, 0.999, 1e-8);
        let zero = p.zeros_like();
        adam.update(&mut p, &zero);
        assert_eq!(p, before);
    }
}
