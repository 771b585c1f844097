//! Second-order recurrent cells parameterized by the CP tensor
//! decomposition, the exact model conversions between the RNN variants,
//! witness-tensor rank analysis, and a from-scratch truncated-BPTT training
//! harness for character-level language modelling.

pub mod cp;
pub mod error;
pub mod rng;
pub mod tensor;

pub use cp::{
    als_fit, estimate_cp_rank, exact_slice_decomposition, max_rank_upper_bound,
    typical_rank_lower_bound, AlsConfig, CpFactors, RankReport,
};
pub use error::{Error, Result};
pub use tensor::{basis, hadamard, numerical_rank, outer3, Mode, Tensor3};
