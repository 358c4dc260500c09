pub mod geo;
pub mod ingest;
pub mod time;
pub mod fusion;
pub mod lightclass;
pub mod epoch;
pub mod trajflow;
pub mod synthgen;
pub mod exporter;
pub mod config;
pub mod pipeline;
pub mod cli;
