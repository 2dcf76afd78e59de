//! Solver toolkit for pessimistic distributionally robust bilevel linear
//! programs with binary leader decisions under moment-based ambiguity sets.
//!
//! A leader picks a binary vector `x`, uncertainty `ξ` is revealed, and a
//! follower solves the LP `min c(ξ)ᵀy s.t. Ay ≤ b_x(ξ)`. The leader pays
//! `wᵀx` plus the expected value of `v(ξ)ᵀy` where the follower breaks ties
//! *against* the leader, and the expectation is taken over the worst
//! distribution in a moment ambiguity set (mean within an ellipsoid of `μ₀`,
//! second moment dominated by `γ₂Σ₀`, support either a polytope or a finite
//! scenario list).
//!
//! The toolkit provides:
//!
//! - exact ground-truth evaluation of the pessimistic follower response and
//!   its recourse-dual reformulation ([`oracle`]),
//! - three 0-1 SDP formulations: a linear-decision-rule upper bound
//!   ([`ldr_sdp`]), a copositive-route inner approximation ([`cop_ia`]), and
//!   an exact reformulation for discrete ambiguity sets ([`discrete`])
//!   including worst-case distribution extraction,
//! - two cutting-plane algorithms: a Benders-style loop with closed-form
//!   optimality cuts ([`engine`]) and an LP-master / SDP-separation scheme
//!   over moment points ([`milp_cut`]),
//! - a facility-location benchmark and experiment harness ([`flp`],
//!   [`report`], and the `drbp` CLI).
//!
//! Start with the [`guide`] for worked examples.

pub mod cone;
pub mod cop_ia;
pub mod discrete;
pub mod engine;
pub mod flp;
pub mod guide;
pub mod instance;
pub mod io;
pub mod ldr_sdp;
pub mod linalg;
pub mod milp_cut;
pub mod moments;
pub mod oracle;
pub mod report;

mod error;
mod ldr_base;
pub mod synth;

pub use error::{DrbpError, Result};
