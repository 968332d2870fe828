pub mod assemblage;
pub mod circuit;
pub mod error;
pub mod history;
pub mod linalg;
pub mod noise;
pub mod pipeline;
pub mod sdp;
pub mod tomography;
pub mod selftest;
pub mod tqsm;

pub use assemblage::Assemblage;
pub use error::{Error, Result};
