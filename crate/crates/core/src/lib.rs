//! Computational toolkit for exponential and mixture models of probability
//! densities on `[0,1]` with Lebesgue reference measure.
//!
//! Everything is organized around piecewise-analytic descriptors: a density
//! or random variable is a finite list of pieces (constants, power atoms
//! `c*|x-a|^r`, logarithmic atoms, or annotated expressions), optionally
//! followed by an infinite family of power pieces accumulating at a cluster
//! point. Integrals prefer closed forms, fall back to adaptive quadrature
//! for expression pieces, and use series with explicit tail envelopes for
//! the infinite families. Divergence verdicts are always analytic, never
//! inferred from quadrature failure.
//!
//! Modules follow the mathematical layers:
//!
//! * [`measure`]: descriptors, integration, convergence classification.
//! * [`young`]: Young function pairs and conjugacy checks.
//! * [`orlicz`]: Luxemburg/Orlicz norms and membership deciders.
//! * [`divergence`]: Kullback-Leibler divergence and its finiteness
//!   equivalences.
//! * [`arcs`]: exponential/mixture arc connectivity and cumulants.
//! * [`counterexamples`]: the two singular series densities that separate
//!   the moment and divergence conditions.
//! * [`filtration`]: conditional restrictions to `[0,t]` and stability scans.
//! * [`closure`]: the clamped approximating sequence reaching arbitrary
//!   targets in total variation.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod arcs;
pub mod closure;
pub mod counterexamples;
pub mod divergence;
mod error;
pub mod filtration;
pub(crate) mod fm;
pub mod kahan;
pub mod measure;
pub mod orlicz;
pub mod quad;
pub mod young;

pub use error::{Error, Result};
