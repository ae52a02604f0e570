pub mod allocator;
pub mod cli;
pub mod compat;
pub mod composite;
pub mod error;
pub mod io;
pub mod mcts;
pub mod model;
pub mod scenario;
