//! Shooting toolkit for cohomogeneity-one steady gradient Ricci solitons on
//! the SU(2)-invariant bundles over S^2.
//!
//! The pieces, bottom up: [`state`] (vector fields in two charts),
//! [`startup`] (series launch off the singular orbit), [`integrator`]
//! (adaptive shots with events), [`classifier`], [`search`] (critical
//! parameter bisection), [`geometry`] (metric profiles and reference
//! metrics), [`center_manifold`], and [`io`] for CSV/JSON.

pub mod state;
pub mod startup;
pub mod integrator;
pub mod classifier;
pub mod search;
pub mod geometry;
pub mod center_manifold;
pub mod io;
