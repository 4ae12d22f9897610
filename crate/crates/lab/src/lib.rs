//! Configuration, file formats, the experiment pipeline and the `magwell`
//! command line on top of `magwell-core`.

pub mod cli;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod pool;
pub mod report;
