//! The guide in `book/`, compiled here so every listing runs under `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/manifolds.md")]
pub mod manifolds {}
#[doc = include_str!("../../../book/src/objectives.md")]
pub mod objectives {}
#[doc = include_str!("../../../book/src/riemannian.md")]
pub mod riemannian {}
#[doc = include_str!("../../../book/src/momentum.md")]
pub mod momentum {}
#[doc = include_str!("../../../book/src/stochastic.md")]
pub mod stochastic {}
#[doc = include_str!("../../../book/src/rates.md")]
pub mod rates {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
