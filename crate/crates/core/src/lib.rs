//! LSTM question intent classifiers built from scratch: a two-level
//! (main class / fine label) classifier trained by backpropagation through
//! time on pre-trained word embeddings, plus a class-conditioned
//! bidirectional answer generator.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below are what training uses.

pub mod dataset;
pub mod error;
pub mod lstm;
pub mod models;
pub mod numerics;
pub mod params;
pub mod scalar;
pub mod synth;
pub mod textpipe;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Vector64 = numerics::Vector<f64>;
pub type Matrix64 = numerics::Matrix<f64>;
pub type LstmParams64 = lstm::LstmParams<f64>;
pub type ModelOne64 = models::ModelOne<f64>;
pub type ModelTwo64 = models::ModelTwo<f64>;
pub type Responder64 = models::Responder<f64>;
pub type Classifier64 = models::Classifier<f64>;

pub type Vector32 = numerics::Vector<f32>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type LstmParams32 = lstm::LstmParams<f32>;
