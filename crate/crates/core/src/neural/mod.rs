//! Small feed-forward networks trained with Adam, plus the Gaussian and
//! categorical policy heads used as proposal distributions.

mod adam;
mod heads;
mod mlp;

pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use heads::{CategoricalHead, GaussianHead, PolicyNet, LOG_STD_MAX, LOG_STD_MIN, PROB_FLOOR};
pub use mlp::{features_matrix, Mlp, Tape};

/// Hidden layer widths shared by every network.
pub const HIDDEN: [usize; 2] = [32, 32];

/// `[input, 32, 32, output]`.
pub fn widths(input: usize, output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(&HIDDEN);
    w.push(output);
    w
}
