//! RMSProp with the staged learning-rate schedule, plus the epoch-level
//! training loop gluing data batching, backprop and the optimizer together.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;

pub const RHO: f64 = 0.95;
pub const EPSILON: f64 = 1e-8;

/// Staged step schedule over 1-based epochs: 1e-3 through epoch 20, then one
/// decade down every 20 epochs, floored at 1e-6 past epoch 60.
pub fn lr_schedule(epoch: usize) -> Result<f64> {
    match epoch {
        0 => Err(Error::InvalidArgument {
            what: "epoch",
            detail: "epochs are 1-based".to_string(),
        }),
        1..=20 => Ok(1e-3),
        21..=40 => Ok(1e-4),
        41..=60 => Ok(1e-5),
        _ => Ok(1e-6),
    }
}

/// Running mean of squared gradients, one accumulator per parameter.
#[derive(Debug, Clone)]
pub struct RmspropState {
    pub rho: f64,
    pub epsilon: f64,
    acc: Vec<f64>,
}

impl RmspropState {
    pub fn new(n_params: usize) -> Self {
        Self {
            rho: RHO,
            epsilon: EPSILON,
            acc: vec![0.0; n_params],
        }
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.acc
    }

    /// One update: s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.acc.len() || grads.len() != self.acc.len() {
            return Err(Error::LengthMismatch {
                what: "rmsprop step",
                expected: self.acc.len(),
                actual: if params.len() != self.acc.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        let one_minus_rho = 1.0 - self.rho;
        for ((s, theta), &g) in self.acc.iter_mut().zip(params.iter_mut()).zip(grads) {
            *s = self.rho * *s + one_minus_rho * g * g;
            *theta -= lr * g / (s.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Applies one RMSProp step to a network's flat parameters and re-applies the
/// activation-family clamps.
pub fn rmsprop_network_step(
    net: &mut Network,
    state: &mut RmspropState,
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    let mut flat = net.flat_params();
    state.step(&mut flat, grads, lr)?;
    net.set_flat_params(&flat)?;
    net.apply_param_constraints();
    Ok(())
}

/// Per-epoch training statistics (means over the epoch's batches, weighted by
/// batch size).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub mean_accuracy: f64,
}

/// One pass over `train` in shuffled batches at a fixed learning rate.
/// `shuffle_seed` should differ per epoch (derive it from the run seed and
/// epoch index).
pub fn train_epoch(
    net: &mut Network,
    state: &mut RmspropState,
    train: &Dataset,
    batch_size: usize,
    lr: f64,
    shuffle_seed: u64,
) -> Result<EpochStats> {
    let mut loss_sum = 0.0;
    let mut hit_sum = 0.0;
    let n = train.n() as f64;
    for batch in train.shuffled_batches(batch_size, shuffle_seed)? {
        let (images, one_hot) = train.batch(&batch)?;
        let (loss, acc, grads) = net.batch_loss_and_grads(&images, &one_hot)?;
        let b = batch.len() as f64;
        loss_sum += loss * b;
        hit_sum += acc * b;
        rmsprop_network_step(net, state, &grads, lr)?;
    }
    Ok(EpochStats {
        mean_loss: loss_sum / n,
        mean_accuracy: hit_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn schedule_boundaries_are_inclusive() {
        assert!(lr_schedule(0).is_err());
        assert_eq!(lr_schedule(1).unwrap(), 1e-3);
        assert_eq!(lr_schedule(20).unwrap(), 1e-3);
        assert_eq!(lr_schedule(21).unwrap(), 1e-4);
        assert_eq!(lr_schedule(40).unwrap(), 1e-4);
        assert_eq!(lr_schedule(41).unwrap(), 1e-5);
        assert_eq!(lr_schedule(60).unwrap(), 1e-5);
        assert_eq!(lr_schedule(61).unwrap(), 1e-6);
        assert_eq!(lr_schedule(500).unwrap(), 1e-6);
    }

    #[test]
    fn single_step_forced_arithmetic() {
        let mut state = RmspropState::new(1);
        let mut theta = [0.25];
        state.step(&mut theta, &[1.0], 1e-3).unwrap();
        assert!((state.acc[0] - 0.05).abs() < 1e-12);
        let expected_delta = 1e-3 / ((1.0f64 - RHO).sqrt() + EPSILON);
        assert!((theta[0] - (0.25 - expected_delta)).abs() < 1e-15);
        assert!((expected_delta - 0.004472135754999588).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_decays_accumulator_only() {
        let mut state = RmspropState::new(2);
        let mut theta = [1.0, -2.0];
        state.step(&mut theta, &[1.0, 3.0], 1e-3).unwrap();
        let theta_after = theta;
        let acc_after = state.acc.clone();
        state.step(&mut theta, &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(theta, theta_after);
        for (now, before) in state.acc.iter().zip(&acc_after) {
            assert!((now - RHO * before).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_descends_below_threshold() {
        let mut state = RmspropState::new(1);
        let mut theta = [1.0];
        for _ in 0..200 {
            let g = 2.0 * theta[0];
            state.step(&mut theta, &[g], 0.01).unwrap();
        }
        assert!(theta[0].abs() < 0.05, "theta after 200 steps: {}", theta[0]);
    }

    #[test]
    fn accumulators_stay_non_negative_under_random_steps() {
        let mut rng = crate::rng::seeded_rng(77);
        let mut state = RmspropState::new(8);
        let mut theta = vec![0.0; 8];
        for _ in 0..500 {
            let grads: Vec<f64> = (0..8).map(|_| rng.random_range(-10.0..10.0)).collect();
            state.step(&mut theta, &grads, 1e-3).unwrap();
            assert!(state.acc.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn step_rejects_length_mismatch() {
        let mut state = RmspropState::new(3);
        let mut theta = [0.0; 2];
        assert!(matches!(
            state.step(&mut theta, &[0.0; 3], 1e-3),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
