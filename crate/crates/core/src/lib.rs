//! Circulation impact of sites in a weighted directed flow network.
//!
//! Pipeline: [`netmodel`] loads or generates a [`FlowNetwork`], [`balance`]
//! closes it with a source and a sink, [`impact`] derives the fundamental
//! matrix and per-site traffic/impact, and [`scaling`] fits
//! `C ~ A^gamma`. [`robustness`] and [`community`] re-run that pipeline on
//! thinned, reshuffled and per-label subnetworks; [`layout`] computes plot
//! coordinates.

pub mod balance;
pub mod community;
pub mod error;
pub mod impact;
pub mod layout;
pub mod netmodel;
pub mod output;
pub mod robustness;
pub mod scaling;
mod seeds;

pub use balance::{balance, transition_matrix, BalancedNetwork, TransitionMatrix};
pub use error::{Error, Result};
pub use impact::{analyze, compute_u, impact_table, FundamentalMatrix, ImpactTable};
pub use netmodel::{FlowNetwork, LabelMap, NodeId};
pub use scaling::{fit_scaling, ScalingFit};
