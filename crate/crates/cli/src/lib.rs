//! Library surface of the pipeline runner, shared by the `artscat` binary
//! and the integration tests.

pub mod config;
pub mod farfield_file;
pub mod pipeline;
