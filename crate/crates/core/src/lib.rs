//! Decision support for innovation projects.
//!
//! The model layer ([`model`]) holds an AND/OR hierarchy of goals and
//! decisions whose nodes carry typed characteristic tables. The logic layer
//! ([`rules`]) grounds facts from a selection and forward-chains production
//! rules over them. [`variants`] enumerates the admissible configurations of
//! the hierarchy, filters them through rules and constraints, and scores
//! them. The data layer ([`star`]) keeps leaf-grained fact tables under two
//! dimension hierarchies that share their leaves; [`reporting`] renders
//! roll-ups and pivots over it. [`mining`] induces decision trees and
//! turns them back into rules.

pub mod mining;
pub mod model;
pub mod reporting;
pub mod rules;
pub mod star;
pub mod validation;
pub mod variants;

pub use validation::{ValidationReport, Violation};
