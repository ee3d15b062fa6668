//! Particle swarm optimization over the flattened network parameter vector —
//! the gradient-free alternative to backprop training.
//!
//! Velocity update, per component i with fresh uniform(0,1) draws r1, r2:
//!
//!   v[i] <- inertia * v[i] + c1 * r1 * (local_best[i] - x[i])
//!                          + c2 * r2 * (global_best[i] - x[i])
//!
//! then v is clamped to [-velocity_clamp, +velocity_clamp] and x <- x + v.
//! Fitness of a parameter vector on an evaluation batch is
//!
//!   f = 1 / (1 + (1/2n) * sum_p sum_c (y[p,c] - t[p,c])^2)  in (0, 1]
//!
//! with y the softmax outputs and t the one-hot labels.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{ModelConfig, Network};
use crate::rng::{component, component_seed, seeded_rng, stream_seed};
use crate::tensor::Tensor;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

/// Source of uniform(0,1) draws for the velocity update. Production runs use
/// a seeded ChaCha stream; tests substitute stubs to pin the arithmetic.
pub trait UnitRand {
    fn unit(&mut self) -> f64;
}

impl UnitRand for ChaCha8Rng {
    fn unit(&mut self) -> f64 {
        self.random_range(0.0..1.0)
    }
}

/// Always returns the same value.
pub struct ConstRand(pub f64);

impl UnitRand for ConstRand {
    fn unit(&mut self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

impl Particle {
    pub fn new(position: Vec<f64>) -> Self {
        let velocity = vec![0.0; position.len()];
        let best_position = position.clone();
        Particle {
            position,
            velocity,
            best_position,
            best_fitness: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub generations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub velocity_clamp: f64,
    /// Fitness is evaluated on a fixed subset of the training set of this
    /// size (the full set if it is smaller), shared by all particles.
    pub eval_subset_size: usize,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            n_particles: 10,
            generations: 50,
            inertia: 0.7,
            c1: 2.0,
            c2: 2.0,
            velocity_clamp: 0.5,
            eval_subset_size: 1000,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidArgument {
                what: "swarm particles",
                detail: format!("need at least 2, got {}", self.n_particles),
            });
        }
        if self.generations == 0 {
            return Err(Error::InvalidArgument {
                what: "swarm generations",
                detail: "must be at least 1".to_string(),
            });
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(Error::InvalidArgument {
                what: "velocity clamp",
                detail: format!("must be positive, got {}", self.velocity_clamp),
            });
        }
        Ok(())
    }
}

/// Swarm fitness of predicted probabilities against one-hot labels.
pub fn fitness_from_probs(probs: &Tensor, one_hot: &Tensor) -> Result<f64> {
    if probs.shape() != one_hot.shape() || probs.rank() != 2 {
        return Err(Error::ShapeMismatch {
            op: "swarm fitness",
            lhs: probs.shape().to_vec(),
            rhs: one_hot.shape().to_vec(),
        });
    }
    let n = probs.shape()[0];
    let sq: f64 = probs
        .data()
        .iter()
        .zip(one_hot.data())
        .map(|(y, t)| (y - t) * (y - t))
        .sum();
    Ok(1.0 / (1.0 + sq / (2.0 * n as f64)))
}

/// Installs `params` into `net` and evaluates swarm fitness on a batch.
pub fn network_fitness(
    net: &mut Network,
    params: &[f64],
    images: &Tensor,
    one_hot: &Tensor,
) -> Result<f64> {
    net.set_flat_params(params)?;
    let probs = net.predict(images)?;
    fitness_from_probs(&probs, one_hot)
}

/// One velocity + position update. Draws r1 then r2 per component, in
/// component order.
pub fn pso_update(
    p: &mut Particle,
    global_best: &[f64],
    cfg: &SwarmConfig,
    rng: &mut dyn UnitRand,
) -> Result<()> {
    let dim = p.position.len();
    if p.velocity.len() != dim || p.best_position.len() != dim || global_best.len() != dim {
        return Err(Error::LengthMismatch {
            what: "swarm update vectors",
            expected: dim,
            actual: global_best.len(),
        });
    }
    for i in 0..dim {
        let r1 = rng.unit();
        let r2 = rng.unit();
        let v = cfg.inertia * p.velocity[i]
            + cfg.c1 * r1 * (p.best_position[i] - p.position[i])
            + cfg.c2 * r2 * (global_best[i] - p.position[i]);
        let v = v.clamp(-cfg.velocity_clamp, cfg.velocity_clamp);
        p.velocity[i] = v;
        p.position[i] += v;
    }
    Ok(())
}

/// Generic swarm driver: seeds particles via `init`, scores them with `fit`,
/// and reports each generation's global best through `on_generation`.
/// Within a generation every particle is scored before any best is consulted
/// for movement; local and global bests only improve strictly.
///
/// Returns the global best position and the per-generation best fitness.
pub fn pso_optimize(
    cfg: &SwarmConfig,
    mut init: impl FnMut(usize, u64) -> Result<Vec<f64>>,
    mut fit: impl FnMut(&[f64]) -> Result<f64>,
    mut on_generation: impl FnMut(usize, &[f64], f64) -> Result<()>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let base = component_seed(cfg.seed, component::PSO);
    // stream 0 drives the velocity updates; streams 1..=n seed the particles
    let mut vel_rng = seeded_rng(stream_seed(base, 0));
    let mut particles: Vec<Particle> = Vec::with_capacity(cfg.n_particles);
    for k in 0..cfg.n_particles {
        let position = init(k, stream_seed(base, 1 + k as u64))?;
        if k > 0 && position.len() != particles[0_usize].position.len() {
            return Err(Error::LengthMismatch {
                what: "particle dimensions",
                expected: particles[0_usize].position.len(),
                actual: position.len(),
            });
        }
        particles.push(Particle::new(position));
    }
    let mut global_best = particles[0].position.clone();
    let mut global_fitness = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.generations);
    for generation in 1..=cfg.generations {
        for p in &mut particles {
            let f = fit(&p.position)?;
            if f > p.best_fitness {
                p.best_fitness = f;
                p.best_position.clone_from(&p.position);
            }
            if f > global_fitness {
                global_fitness = f;
                global_best.clone_from(&p.position);
            }
        }
        history.push(global_fitness);
        on_generation(generation, &global_best, global_fitness)?;
        for p in &mut particles {
            pso_update(p, &global_best, cfg, &mut vel_rng)?;
        }
    }
    Ok((global_best, history))
}

/// One history row of a swarm training run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub val_accuracy: f64,
}

/// Swarm-trains a CNN: particles are independently He-initialized networks,
/// fitness is evaluated on a fixed class-balanced training subset, and each
/// generation's global best is scored on the validation set (re-evaluated
/// only when it changes).
pub fn pso_train(
    cfg: &SwarmConfig,
    model_cfg: &ModelConfig,
    train: &Dataset,
    val: &Dataset,
) -> Result<(Vec<f64>, Vec<GenerationRecord>)> {
    cfg.validate()?;
    let subset;
    let eval = if cfg.eval_subset_size < train.n() {
        subset = train.subset(cfg.eval_subset_size, cfg.seed)?;
        &subset
    } else {
        train
    };
    let all: Vec<usize> = (0..eval.n()).collect();
    let (eval_images, eval_one_hot) = eval.batch(&all)?;
    let val_all: Vec<usize> = (0..val.n()).collect();
    let (val_images, val_one_hot) = val.batch(&val_all)?;

    let mut scratch = Network::build(model_cfg)?;
    let mut val_net = Network::build(model_cfg)?;
    let mut last_best: Vec<f64> = Vec::new();
    let mut last_acc = 0.0;
    let mut records: Vec<GenerationRecord> = Vec::with_capacity(cfg.generations);

    let arch = scratch.arch.clone();
    let (best, _) = pso_optimize(
        cfg,
        |_, init_seed| {
            let net = Network::build_custom(
                arch.clone(),
                model_cfg.activation,
                model_cfg.fourier_rank,
                model_cfg.per_channel,
                init_seed,
            )?;
            Ok(net.flat_params())
        },
        |params| network_fitness(&mut scratch, params, &eval_images, &eval_one_hot),
        |generation, best, best_fitness| {
            if best != last_best.as_slice() {
                val_net.set_flat_params(best)?;
                let (_, acc) = val_net.evaluate(&val_images, &val_one_hot)?;
                last_acc = acc;
                last_best = best.to_vec();
            }
            records.push(GenerationRecord {
                generation,
                best_fitness,
                val_accuracy: last_acc,
            });
            Ok(())
        },
    )?;
    Ok((best, records))
}
