//! Nesterov-momentum SGD and the step learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SuvrError};

pub const DEFAULT_BASE_LR: f64 = 0.03;
pub const DEFAULT_NESTEROV_MU: f64 = 0.9;
/// The learning rate is multiplied by `LR_DECAY` every `LR_DECAY_EVERY` epochs.
pub const LR_DECAY: f64 = 0.9;
pub const LR_DECAY_EVERY: usize = 40;

/// Per-parameter velocity buffers plus schedule state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    velocities: Vec<Vec<f64>>,
    mu: f64,
    base_lr: f64,
    pub epoch: usize,
}

impl OptimizerState {
    pub fn new(lengths: &[usize], mu: f64, base_lr: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&mu) {
            return Err(SuvrError::config(
                "nesterov_mu",
                format!("must lie in [0, 1), got {mu}"),
            ));
        }
        if !(base_lr > 0.0) {
            return Err(SuvrError::config(
                "base_lr",
                format!("must be positive, got {base_lr}"),
            ));
        }
        Ok(OptimizerState {
            velocities: lengths.iter().map(|&n| vec![0.0; n]).collect(),
            mu,
            base_lr,
            epoch: 0,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn current_lr(&self) -> f64 {
        lr_at_epoch(self.base_lr, self.epoch)
    }
}

/// For every parameter `w` with gradient `g` and velocity `b`:
/// `b ← μ·b + g`, then `w ← w − lr·(g + μ·b)`.
pub fn nesterov_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocities.len() {
        return Err(SuvrError::ShapeMismatch(format!(
            "{} parameter tensors, {} gradients, {} velocity buffers",
            params.len(),
            grads.len(),
            state.velocities.len()
        )));
    }
    for (t, ((w, g), b)) in params.iter().zip(grads).zip(&state.velocities).enumerate() {
        if w.len() != g.len() || w.len() != b.len() {
            return Err(SuvrError::ShapeMismatch(format!(
                "tensor {t}: {} weights, {} gradients, {} velocities",
                w.len(),
                g.len(),
                b.len()
            )));
        }
    }
    let mu = state.mu;
    for ((w, g), b) in params.iter_mut().zip(grads).zip(&mut state.velocities) {
        for ((wi, &gi), bi) in w.iter_mut().zip(g.iter()).zip(b.iter_mut()) {
            *bi = mu * *bi + gi;
            *wi -= lr * (gi + mu * *bi);
        }
    }
    Ok(())
}

/// `base · 0.9^⌊epoch / 40⌋`.
pub fn lr_at_epoch(base: f64, epoch: usize) -> f64 {
    base * LR_DECAY.powi((epoch / LR_DECAY_EVERY) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn first_step_from_rest() {
        let mut state = OptimizerState::new(&[1], 0.9, 0.1).unwrap();
        let mut w = [0.0];
        nesterov_step(&mut [&mut w], &[&[1.0]], &mut state, 0.1).unwrap();
        assert_eq!(state.velocities()[0], vec![1.0]);
        assert!((w[0] + 0.19).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_at_rest_is_fixed_point() {
        let mut state = OptimizerState::new(&[3], 0.9, 0.1).unwrap();
        let mut w = [0.5, -1.0, 2.0];
        nesterov_step(&mut [&mut w], &[&[0.0; 3]], &mut state, 0.1).unwrap();
        assert_eq!(w, [0.5, -1.0, 2.0]);
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut rng = SeededRng::new(6);
        let mut state = OptimizerState::new(&[8], 0.0, 0.05).unwrap();
        let mut w: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let mut plain = w.clone();
        for _ in 0..5 {
            let g: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            nesterov_step(&mut [&mut w], &[&g], &mut state, 0.05).unwrap();
            for (p, gi) in plain.iter_mut().zip(&g) {
                *p -= 0.05 * gi;
            }
            assert_eq!(
                w.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                plain.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut state = OptimizerState::new(&[2], 0.9, 0.1).unwrap();
        let mut w = [0.0; 3];
        assert!(matches!(
            nesterov_step(&mut [&mut w], &[&[0.0; 3]], &mut state, 0.1),
            Err(SuvrError::ShapeMismatch(_))
        ));
        assert!(OptimizerState::new(&[1], 1.0, 0.1).is_err());
        assert!(OptimizerState::new(&[1], 0.5, 0.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        for e in 0..40 {
            assert_eq!(lr_at_epoch(0.03, e), 0.03);
        }
        assert!((lr_at_epoch(0.03, 40) - 0.027).abs() < 1e-15);
        assert!((lr_at_epoch(0.03, 80) - 0.0243).abs() < 1e-15);
    }

    #[test]
    fn schedule_is_stepwise_non_increasing() {
        for e in 0..400 {
            assert!(lr_at_epoch(0.03, e + 1) <= lr_at_epoch(0.03, e));
            if (e + 1) % 40 != 0 {
                assert_eq!(lr_at_epoch(0.03, e + 1), lr_at_epoch(0.03, e));
            }
        }
    }
}
