pub mod blockop;
pub mod bundle;
pub mod cli;
pub mod decompose;
pub mod error;
pub mod family;
pub mod linalg;
pub mod mtx;
pub mod nil;
pub mod qn;

pub use error::{Error, Result};
pub use linalg::{Matrix, SubspaceBasis, C64};
