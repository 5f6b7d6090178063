use serde::{Deserialize, Serialize};

use super::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

/// Optimizer state; moment buffers are allocated on the first step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) {
        self.step += 1;
        let blocks: Vec<&mut [f64]> = net
            .layers_mut()
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect();
        let grad_blocks: Vec<&Vec<f64>> = grads.layers.iter().flatten().collect();
        debug_assert_eq!(blocks.len(), grad_blocks.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (params, g) in blocks.into_iter().zip(grad_blocks) {
                    for (p, gv) in params.iter_mut().zip(g) {
                        *p -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first.is_empty() {
                    self.first = grad_blocks.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second = self.first.clone();
                }
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((params, g), m), v) in blocks
                    .into_iter()
                    .zip(grad_blocks)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for i in 0..params.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
