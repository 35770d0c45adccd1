pub mod error;
pub mod surface;
pub mod theta;
pub mod schemes;
pub mod linsys;
pub mod jump;
pub mod ledger;
mod solve;

pub use error::{Error, Result};
