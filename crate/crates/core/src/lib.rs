pub mod branch;
pub mod bundle;
pub mod error;
pub mod heuristic;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod penalty;
pub mod pipeline;
pub mod sdp;
pub mod separation;
