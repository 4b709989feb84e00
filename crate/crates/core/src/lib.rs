pub mod actors;
pub mod algebra;
pub mod bench;
pub mod board;
mod codec;
pub mod envelope;
pub mod error;
pub mod hierarchy;
pub mod keyfile;
pub mod mo_rbe;
pub mod so_rbe;
