//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("channel sampling gave {retries} consecutive ill-conditioned draws (cond > {threshold:.3e}); path-loss matrix is likely degenerate")]
    IllConditioned { retries: usize, threshold: f64 },

    #[error("domain error in {func}: argument {arg}")]
    Domain { func: &'static str, arg: f64 },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("no priority root for user {user} at backlog {q_bits} bits ({detail}); arrival rate is likely infeasible")]
    NoRoot {
        user: usize,
        q_bits: f64,
        detail: String,
    },

    #[error("expected service rate {rate:.6e} bits/s does not exceed arrival rate {lambda:.6e} bits/s for user {user}")]
    RateDeficit { user: usize, rate: f64, lambda: f64 },

    #[error("priority table invariant violated for user {user}: {detail}")]
    TableInvariant { user: usize, detail: String },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("near-zero denominator in {0}")]
    Degenerate(&'static str),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
