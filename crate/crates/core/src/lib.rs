//! Köthe sequence algebras at desk scale.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod approx;
pub mod asymptotic;
pub mod catalog;
pub mod classifier;
pub mod conditions;
pub mod error;
pub mod expr;
pub mod index;
pub mod logvalue;
pub mod relations;
pub mod sequences;
pub mod verdict;
pub mod weights;
