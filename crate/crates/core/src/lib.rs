//! Near-lossless compression of deep-network feature tensors.
//!
//! A floating-point activation volume is uniformly quantized to `n` bits and
//! then coded losslessly: each channel is treated as a tile, every 4x4 block
//! is predicted with one of five modes (palette, horizontal, vertical and two
//! 3-tap filters) and the residuals are coded with a context-adaptive binary
//! arithmetic coder.
//!
//! ```
//! use nldc::{codec, tensor::FeatureTensor};
//!
//! let t = FeatureTensor::new(4, 4, 2, (0..32).map(|v| v as f32 * 0.25).collect()).unwrap();
//! let bytes = codec::encode_tensor(&t, 8).unwrap();
//! let q = codec::decode_tensor(&bytes).unwrap();
//! assert_eq!(q, nldc::tensor::quantize(&t, 8).unwrap());
//! ```

pub mod cli;
pub mod codec;
pub mod entropy;
pub mod error;
pub mod palette;
pub mod prediction;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod tiling;

pub use error::{Error, Result};
