//! Subgoal-graph model of environment learning in agile guidance tasks.
//!
//! The crate covers the whole pipeline: polygonal worlds and their corner
//! nodes ([`env`]), the experiment vehicle and the Dubins reference vehicle
//! ([`dynamics`]), optimal benchmark subgoal graphs ([`benchmark`]), the
//! learned task representation ([`knowledge`]), the node-level decision
//! model ([`decision`]), a closed-loop learning agent ([`simulator`]) and the
//! log analysis toolkit ([`analysis`]). File formats live in [`formats`].

pub mod analysis;
pub mod benchmark;
pub mod decision;
pub mod dynamics;
pub mod env;
pub mod formats;
pub mod geometry;
pub mod knowledge;
pub mod simulator;
