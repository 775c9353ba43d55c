//! Membership inference attacks against black-box code completion models.
//!
//! Small n-gram models play the victim and the attacker's surrogate. The
//! attacks range from an embedding classifier over input, ground truth and
//! model output down to plain perplexity ranking, and the [`eval`] and
//! [`stats`] modules turn their scores into power, error, AUC and tests.
//! The [`pipeline`] module wires everything into the `mia-lab` commands.

pub mod baselines;
pub mod corpus;
pub mod eval;
pub mod gotcha;
pub mod lm;
pub mod pipeline;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/gotcha.md")]
    mod gotcha {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
