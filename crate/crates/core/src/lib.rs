pub mod agent;
pub mod comms;
pub mod config;
pub mod executor;
pub mod geometry;
pub mod harness;
pub mod map;
pub mod memory;
pub mod message;
pub mod planning;
pub mod reasoner;
pub mod scenario;
pub mod validation;
pub mod world;
