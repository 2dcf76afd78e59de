//! The narrative guide. Each chapter is a module whose documentation is the
//! corresponding chapter of the book under `book/`; the code blocks run as
//! doc-tests, which keeps the book and the library in sync.

#[doc = include_str!("../../../book/src/01-problem.md")]
pub mod ch01_problem {}

#[doc = include_str!("../../../book/src/02-oracle.md")]
pub mod ch02_oracle {}

#[doc = include_str!("../../../book/src/03-cone-programs.md")]
pub mod ch03_cone_programs {}

#[doc = include_str!("../../../book/src/04-decision-rules.md")]
pub mod ch04_decision_rules {}

#[doc = include_str!("../../../book/src/05-discrete.md")]
pub mod ch05_discrete {}

#[doc = include_str!("../../../book/src/06-cutting-planes.md")]
pub mod ch06_cutting_planes {}

#[doc = include_str!("../../../book/src/07-facility-location.md")]
pub mod ch07_facility_location {}
