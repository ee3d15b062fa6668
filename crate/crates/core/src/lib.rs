//! actgrad-core: a small, deterministic deep-learning library built around
//! trainable activation functions.
//!
//! Everything is f64, single-threaded and seed-reproducible. The building
//! blocks are a dense row-major [`tensor::Tensor`], two trainable activation
//! families ([`activations::FourierParams`] and [`activations::LcParams`]),
//! a three-block CNN ([`network`]), RMSProp with a step learning-rate
//! schedule ([`optim`]), particle swarm optimization over flattened
//! parameters ([`pso`]), greedy layerwise autoencoder pretraining
//! ([`pretrain`]), CIFAR-10 binary ingestion ([`data`]) and a
//! finite-difference gradient checker ([`gradcheck`]).

pub mod activations;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod optim;
pub mod pretrain;
pub mod pso;
pub mod rng;
pub mod tensor;
