//! Open-world linking and ranking between text mentions and a knowledge graph.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bow;
pub mod builder;
pub mod bundle;
pub mod complex;
pub mod config;
pub mod eval;
pub mod graph;
pub mod inductive;
pub mod optim;
pub mod rng;
pub mod synthetic;
pub mod text;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/bundles.md")]
    struct Bundles;
    #[doc = include_str!("../../../book/src/kgc.md")]
    struct Kgc;
    #[doc = include_str!("../../../book/src/ranking.md")]
    struct Ranking;
    #[doc = include_str!("../../../book/src/bm25.md")]
    struct Bm25;
    #[doc = include_str!("../../../book/src/configuration.md")]
    struct Configuration;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
