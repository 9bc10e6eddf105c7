pub mod adapt;
pub mod error;
pub mod excitation;
pub mod harness;
pub mod netbus;
pub mod plant;
pub mod ring;
pub mod shiftpoly;
pub mod supervisor;

pub use error::{Error, Result};
