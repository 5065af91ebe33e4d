//! Composition, trimming and path algorithms over acyclic machines.

mod compose;
mod connect;
mod paths;

pub use compose::{compose, compose_with_origins, Composition};
pub use connect::{connect, connect_with_map, Connected};
pub use paths::{
    best_path, forward_backward, shortest_distance_log, topo_sort, BestPath, ForwardBackward,
};
