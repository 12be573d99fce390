//! Neural Bayes estimation of a single extreme quantile: asymmetric loss,
//! DeepSets network, empirical-prior training data, training and bootstrap.

pub mod io;
mod loss;
mod network;
mod prior;
mod train;

pub use loss::asymmetric_loss;
pub use network::{DeepSetsNetwork, PreparedSet, LAYER_SHAPES, N_PARAMS, WIDTH};
pub use prior::{
    build_prior, generate_pairs, permute_prior, quantile_noise_warning, simulate_training_pair, NbePrior, PriorPool,
    TrainingPair,
};
pub use train::{bootstrap_estimate, estimate, risk, train, train_on_pairs, BootstrapEstimate, TrainingConfig, TrainingReport};

/// Output gradient of the network with respect to every parameter, for
/// gradient checks.
pub fn output_gradient(net: &DeepSetsNetwork, values: &[f64]) -> crate::Result<(f64, Vec<f64>)> {
    let set = net.prepare(values)?;
    let (out, cache) = net.forward_prepared(&set);
    let mut grad = vec![0.0; net.n_params()];
    net.backward(&cache, 1.0, &mut grad);
    Ok((out, grad))
}
