//! Meta transfer learning for lake water temperature.

pub mod error;
pub mod gbm;
pub mod lakesim;
pub mod metafeatures;
pub mod mtl;
pub mod pipeline;
pub mod sourcemodel;
pub mod seed;

pub use error::{MtlError, Result};
