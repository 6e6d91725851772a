//! Keeps the guide honest: every chapter under `book/src/` is included here
//! as module documentation, so each Rust code block in the book is compiled
//! and executed by `cargo test` exactly like an ordinary doc-test. A book
//! edit that breaks a snippet breaks the build.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/signals.md")]
pub mod signals {}

#[doc = include_str!("../../../book/src/planning.md")]
pub mod planning {}

#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
