//! Compiles the guide's code snippets as doc-tests so `cargo test --doc`
//! keeps the book in sync with the API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/model.md")]
pub struct ModelChapter;

#[doc = include_str!("../../../book/src/probabilities.md")]
pub struct ProbabilitiesChapter;

#[doc = include_str!("../../../book/src/propagator.md")]
pub struct PropagatorChapter;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct CliChapter;
