//! Delay analysis of downlink small-cell networks under random and
//! round-robin scheduling.
//!
//! The crate has two halves that check each other:
//!
//! * a spatio-temporal simulator: access points drawn from a Poisson point
//!   process on a torus, a fixed number of users per Voronoi cell, Bernoulli
//!   packet arrivals, Rayleigh block fading, and coupled per-cell queues
//!   ([`geometry`], [`channel`], [`queuesim`]);
//! * an analytical stack: closed-form mean delays for both schedulers, a
//!   fixed-point solver for the distribution of the conditional per-link
//!   service probability, the induced delay CDFs, and an independent
//!   round-level Markov chain ([`analytic`], [`markov`]).
//!
//! Experiment drivers, the scenario file format, and CSV emission live in
//! [`cli`]; the `scheddelay` binary is a thin wrapper around them. The
//! `examples/` directory exercises every major capability end to end.

pub mod analytic;
pub mod channel;
pub mod cli;
pub mod geometry;
pub mod markov;
pub mod queuesim;

pub use analytic::{
    cdf_delay_rr, cdf_delay_rs, delay_outage, mean_delay_rr, mean_delay_rs,
    solve_meta_distribution, tau_a, FixedPointParams, MetaDistGrid,
};
pub use channel::{ActivityMask, ChannelParams};
pub use cli::ScenarioConfig;
pub use geometry::{NetworkRealization, SimWindow};
pub use queuesim::{DelayStats, PolicyKind};
