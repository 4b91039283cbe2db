//! Embedding-matrix compression: low-rank factorization with a ReLU
//! bottleneck ("funneling"), trained by reconstruction distillation against a
//! frozen teacher embedding, plus truncated-SVD, GroupReduce, product
//! quantization and tensor-train baselines.

pub mod embio;
pub mod error;
pub mod factorizations;
pub mod gradcheck;
pub mod linalg;
pub mod losses;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use factorizations::{Activation, AnyEmbedding, CompressedEmbedding, CompressionStats, Method};
pub use matrix::DenseMatrix;
