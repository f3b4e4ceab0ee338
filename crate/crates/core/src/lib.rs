//! Lifted probabilistic inference for relational models whose universe is unknown.
//!
//! A model with an unknown universe is a triple of a [`TemplateModel`], a constraint
//! [`Program`] and a [`DomainSpec`]. [`expand`] turns it into a weighted set of
//! parameterised models, [`lifted_query`] answers queries on each of them, and the
//! [`query`] module aggregates the answers (top-k, skyline, trends).

pub mod domain;
pub mod error;
pub mod lve;
pub mod model;
pub mod program;
pub mod query;
pub mod universe;

pub use domain::{
    beta_binomial_pmf, enumerate_worlds, filter_worlds, DomainSpec, DomainWorld, Filtered,
    WorldFilter,
};
pub use error::{Error, Result};
pub use lve::{
    absorb, ground_ve, lift_multiply, lift_sum_out, lifted_query, lifted_query_traced, split,
    Evidence, MarginalDistribution, OpLog, QuerySpec,
};
pub use model::{
    Constant, Constraint, ConstraintKind, GroundAtom, GroundFactor, Logvar, ParameterisedModel,
    Parfactor, PotentialTable, Prv, Range, TemplateModel,
};
pub use program::{evaluate, uniformize, ConstraintWorld, Program};
pub use query::{
    parse_query, query_all, query_all_with, skyline, top_k_model_prob, top_k_query_prob,
    trend_report, AnswerEntry, AnswerSet, EventProbe, Selection, Skipped, Trend, TrendReport,
};
pub use universe::{expand, instantiate, Expansion, UniverseModel, WeightedModel};
