//! Core of a dual-layer robot architecture: a reactive behavior-tree
//! tactical layer and a deliberative strategic layer per robot, joined by a
//! bounded message bus, plus the seeded world they act in.

pub mod bt;
pub mod bus;
pub mod kb;
pub mod sim;
pub mod strategic;
pub mod types;
