pub mod bott;
pub mod error;
pub mod fock;
pub mod fock_rep;
pub mod gauge;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod operator;
pub mod oscillator;
pub mod qhd;
pub mod quadrature;
pub mod sobolev;

pub use error::{Error, Result};
