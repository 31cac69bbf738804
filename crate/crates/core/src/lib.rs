//! Diffusion sampling with text-embedding interpolation and residual set
//! operations (union, intersection, orthogonalization against guidance, norm
//! clamping) layered on classifier-free guidance, plus a trainable 2-D toy
//! model and evaluation kit for exercising it end to end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod evalkit;
pub mod io;
pub mod rso;
pub mod schedule;
pub mod selection;
pub mod toymodel;
pub mod vecspace;

pub use error::{Error, Result};
