//! Solvers for stochastic power-allocation games on fast-fading Gaussian
//! interference channels with finite gain supports.
//!
//! Three information structures are supported (see [`Variant`]): every
//! transmitter sees the full channel state, only the gains incident on its
//! own receiver, or only its own direct gain. For each of them the crate
//! computes
//!
//! - Nash equilibria through a variational-inequality fixed-point heuristic
//!   (Picard iterations on the projected map, then cyclic steepest descent on
//!   the squared residual, with restarts) in [`vi`],
//! - Jensen lower bounds on equilibrium rates and their water-filling
//!   maximizers in [`rates`],
//! - weighted-sum Pareto points and Nash bargaining points through a
//!   distributed augmented Lagrangian ascent in [`pareto`],
//! - ε-Nash equilibria of the direct-gain game with quantized power levels
//!   through interference-belief Bayesian learning in [`bayes`].
//!
//! The crate is `no_std` and only needs `alloc`. All expectations are exact
//! enumerations over the finite channel supports.
#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

mod math;

pub mod bayes;
pub mod channel;
pub mod error;
pub mod game;
pub mod pareto;
pub mod policy;
pub mod presets;
pub mod rates;
pub mod vi;

pub use channel::{ChannelModel, GainDist, InfoIndexer, JointState, StateSpace, Variant};
pub use error::{Error, Result};
pub use game::Game;
pub use policy::{PolicyProfile, PowerPolicy, ProjectionMode};
pub use rates::{LogBase, RateReport};
pub use vi::{FieldKind, SolveParams, SolveReport, ViProblem};
