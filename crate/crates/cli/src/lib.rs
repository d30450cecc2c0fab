//! Std companion to `factrag-core`: file formats, HTTP clients and
//! mock services, configuration, and the record pipeline behind the
//! `factrag` CLI.

pub mod clients;
pub mod config;
pub mod http;
pub mod io;
pub mod pipeline;
pub mod snapshot;
pub mod wire;
