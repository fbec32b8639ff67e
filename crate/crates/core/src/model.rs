//! Wireless channel generation, quantization-noise model, zero-forcing, and
//! end-to-end rate computation for one cooperating cluster.
//!
//! Units are SI throughout: watts for powers and noise, Hz for bandwidth,
//! seconds for the slot length, bits/s for rates and arrival rates, and
//! bits/s/Hz for fronthaul capacities.

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, CMat};
use crate::numerics::Real;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Condition estimate above which a channel draw is rejected and resampled.
pub const CONDITION_THRESHOLD: f64 = 1e6;
/// Consecutive rejected draws tolerated before sampling aborts.
pub const RESAMPLE_CAP: usize = 100;

/// Physical and economic parameters of one cooperating cluster.
///
/// `n` users transmit to `n` RRHs; `path_loss` is the row-major n×n gain
/// matrix L (RRH i, user j). Receiver noise power and the quantization
/// reference noise are the same quantity and live in `sigma2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig<S> {
    /// Cluster size (users = RRHs).
    pub n: usize,
    /// Shared bandwidth in Hz.
    pub w_hz: S,
    /// Slot length in seconds.
    pub tau_s: S,
    /// Receiver noise power in watts.
    pub sigma2: S,
    /// Total fronthaul budget in bits/s/Hz.
    pub c_tot: S,
    /// Row-major n×n path-loss gain matrix (dimensionless).
    pub path_loss: Vec<S>,
    /// Per-user constant transmit power in watts.
    pub p0_w: Vec<S>,
    /// Per-user cap on total transmit power in watts.
    pub p_max_w: Vec<S>,
    /// Per-user arrival rate in bits/s.
    pub lambda_bps: Vec<S>,
    /// Per-user delay weights (dimensionless).
    pub beta: Vec<S>,
    /// Base RNG seed for everything derived from this cluster.
    pub seed: u64,
}

impl<S: Real> ClusterConfig<S> {
    pub fn l(&self, i: usize, j: usize) -> S {
        self.path_loss[i * self.n + j]
    }

    /// Largest cross-link gain δ = max L_ij, i ≠ j.
    pub fn delta(&self) -> S {
        let mut d = S::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    d = d.max(self.l(i, j));
                }
            }
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 1 {
            return Err(Error::Config("cluster size n must be >= 1".into()));
        }
        for (name, v) in [
            ("w_hz", self.w_hz),
            ("tau_s", self.tau_s),
            ("sigma2", self.sigma2),
            ("c_tot", self.c_tot),
        ] {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.path_loss.len() != n * n {
            return Err(Error::Config(format!(
                "path_loss must have {} entries, got {}",
                n * n,
                self.path_loss.len()
            )));
        }
        for (name, v) in [
            ("p0_w", &self.p0_w),
            ("p_max_w", &self.p_max_w),
            ("lambda_bps", &self.lambda_bps),
            ("beta", &self.beta),
        ] {
            if v.len() != n {
                return Err(Error::Config(format!(
                    "{name} must have {n} entries, got {}",
                    v.len()
                )));
            }
        }
        for i in 0..n {
            if !(self.l(i, i) > S::zero()) {
                return Err(Error::Config(format!("path_loss diagonal L_{i}{i} must be > 0")));
            }
            for j in 0..n {
                let l = self.l(i, j);
                if l < S::zero() || !l.is_finite() {
                    return Err(Error::Config(format!("path_loss L_{i}{j} must be >= 0")));
                }
                if i != j && l > self.l(i, i) {
                    return Err(Error::Config(format!(
                        "cross-link L_{i}{j} exceeds straight link L_{i}{i}; outside the perturbation regime"
                    )));
                }
            }
            if !(self.p0_w[i] > S::zero()) {
                return Err(Error::Config(format!("p0_w[{i}] must be > 0")));
            }
            if self.p_max_w[i] < self.p0_w[i] {
                return Err(Error::Config(format!("p_max_w[{i}] must be >= p0_w[{i}]")));
            }
            if self.lambda_bps[i] < S::zero() {
                return Err(Error::Config(format!("lambda_bps[{i}] must be >= 0")));
            }
            if self.beta[i] < S::zero() {
                return Err(Error::Config(format!("beta[{i}] must be >= 0")));
            }
        }
        if !(self.beta.iter().copied().sum::<S>() > S::zero()) {
            return Err(Error::Config("at least one beta weight must be positive".into()));
        }
        Ok(())
    }
}

/// One slot's channel state: small-scale gains, composite gains, and the
/// zero-forcing inverse.
#[derive(Debug, Clone)]
pub struct ChannelRealization<S> {
    /// Small-scale complex gains h̃ (unit-variance complex Gaussian).
    pub h_tilde: CMat<S>,
    /// Composite gains H_ij = h̃_ij · √L_ij.
    pub h: CMat<S>,
    /// Zero-forcing matrix S = H⁻¹.
    pub s: CMat<S>,
    /// Frobenius condition estimate of H.
    pub cond: S,
    /// Draws rejected for ill-conditioning before this one was accepted.
    pub resamples: usize,
}

impl<S: Real> ChannelRealization<S> {
    /// Builds the composite matrix, zero-forcing inverse, and condition
    /// estimate from given small-scale gains.
    pub fn from_small_scale(h_tilde: CMat<S>, config: &ClusterConfig<S>) -> Result<Self> {
        let n = config.n;
        let mut h = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = h_tilde[(i, j)] * Complex::new(config.l(i, j).sqrt(), S::zero());
            }
        }
        let s = h.inverse()?;
        let cond = condition_estimate(&h, &s);
        Ok(Self {
            h_tilde,
            h,
            s,
            cond,
            resamples: 0,
        })
    }

    /// |h̃_ii|², the exponential fading variable the closed forms integrate
    /// over.
    pub fn z(&self, i: usize) -> S {
        self.h_tilde[(i, i)].norm_sqr()
    }
}

/// Per-slot decision: fronthaul capacity per RRH and dynamic power per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation<S> {
    /// Fronthaul capacity in bits/s/Hz.
    pub c: Vec<S>,
    /// Dynamic transmit power in watts.
    pub p_d: Vec<S>,
}

impl<S: Real> Allocation<S> {
    pub fn zero(n: usize) -> Self {
        Self {
            c: vec![S::zero(); n],
            p_d: vec![S::zero(); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.c.iter().chain(self.p_d.iter()) {
            if !(*v >= S::zero()) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "allocation entries must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws a fresh i.i.d. channel realization, resampling (up to
/// [`RESAMPLE_CAP`] times) whenever the zero-forcing inverse would be
/// numerically untrustworthy.
pub fn sample_channel<S, R>(config: &ClusterConfig<S>, rng: &mut R) -> Result<ChannelRealization<S>>
where
    S: Real,
    R: Rng + ?Sized,
    StandardNormal: Distribution<S>,
{
    let n = config.n;
    let half = S::of(0.5).sqrt();
    let threshold = S::of(CONDITION_THRESHOLD);
    let mut rejected = 0usize;
    loop {
        let mut h_tilde = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let re: S = StandardNormal.sample(rng);
                let im: S = StandardNormal.sample(rng);
                h_tilde[(i, j)] = Complex::new(re * half, im * half);
            }
        }
        match ChannelRealization::from_small_scale(h_tilde, config) {
            Ok(mut real) if real.cond <= threshold => {
                real.resamples = rejected;
                return Ok(real);
            }
            _ => {
                rejected += 1;
                if rejected > RESAMPLE_CAP {
                    return Err(Error::IllConditioned {
                        retries: rejected,
                        threshold: CONDITION_THRESHOLD,
                    });
                }
            }
        }
    }
}

/// Per-RRH quantization-noise variance N_i = (Σ_j |H_ij|² p_j + σ²)/(2^Cᵢ − 1).
///
/// A zero capacity yields an infinite variance: that RRH forwards nothing.
pub fn quantization_noise<S: Real>(h: &CMat<S>, p: &[S], c: &[S], sigma2: S) -> Vec<S> {
    let n = h.n();
    (0..n)
        .map(|i| {
            debug_assert!(c[i] >= S::zero(), "negative fronthaul capacity");
            if c[i] <= S::zero() {
                return S::infinity();
            }
            let mut num = sigma2;
            for j in 0..n {
                num += h[(i, j)].norm_sqr() * p[j];
            }
            num / (S::of(2.0).powf(c[i]) - S::one())
        })
        .collect()
}

/// End-to-end rate per user, Rᵢ = (W/2)·log₂(1 + pᵢ / Σ_j |S_ij|²(N_j + σ²)).
///
/// The denominator sums over all j. Any RRH with zero capacity (infinite
/// quantization noise) zeroes the rate of every user its stream feeds into.
pub fn rates<S: Real>(
    channel: &ChannelRealization<S>,
    allocation: &Allocation<S>,
    config: &ClusterConfig<S>,
) -> Vec<S> {
    rates_with(channel, allocation, &config.p0_w, config.sigma2, config.w_hz)
}

/// [`rates`] with the physical parameters passed explicitly.
pub fn rates_with<S: Real>(
    channel: &ChannelRealization<S>,
    allocation: &Allocation<S>,
    p0_w: &[S],
    sigma2: S,
    w_hz: S,
) -> Vec<S> {
    let n = p0_w.len();
    let noise = {
        let p: Vec<S> = (0..n).map(|j| p0_w[j] + allocation.p_d[j]).collect();
        quantization_noise(&channel.h, &p, &allocation.c, sigma2)
    };
    (0..n)
        .map(|i| {
            let p_i = p0_w[i] + allocation.p_d[i];
            if !(p_i > S::zero()) {
                return S::zero();
            }
            let mut denom = S::zero();
            for j in 0..n {
                let s_sq = channel.s[(i, j)].norm_sqr();
                if noise[j].is_infinite() {
                    if s_sq > S::zero() {
                        return S::zero();
                    }
                    continue;
                }
                denom += s_sq * (noise[j] + sigma2);
            }
            if denom <= S::zero() {
                return S::zero();
            }
            w_hz * S::of(0.5) * (S::one() + p_i / denom).log2()
        })
        .collect()
}

/// Single-user rate with its own quantization noise folded in; the n = 1
/// reduction of [`rates`].
pub fn rate_single_user<S: Real>(h_ii: Complex<S>, c_i: S, p_i: S, sigma2: S, w_hz: S) -> S {
    if c_i <= S::zero() || p_i <= S::zero() {
        return S::zero();
    }
    let gain = h_ii.norm_sqr();
    let n_i = (p_i * gain + sigma2) / (S::of(2.0).powf(c_i) - S::one());
    w_hz * S::of(0.5) * (S::one() + p_i * gain / (n_i + sigma2)).log2()
}
