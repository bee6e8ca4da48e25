//! Evaluation harness: corpus files, model gateway with caching and mocks,
//! resumable runs, analysis and report emission.

pub mod analysis;
pub mod cache;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod gateway;
pub mod http;
pub mod manifest;
pub mod mock;
pub mod report;
pub mod runner;
