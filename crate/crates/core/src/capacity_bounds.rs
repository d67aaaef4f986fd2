//! Closed-form capacity bounds for the binomial channel and the mixture
//! output that certifies the upper bound.
//!
//! With `L(n) = ln(n pi / (2e))` the bounds read
//!
//! ```text
//! LB(n) = psi(n+1) - ln(1 + sqrt(3n+1)) + ln(3 pi / (2e)) / 2
//! UB(n) = L(n)/2 + r_ub(n),  r_ub(n) = -ln(1 - 2 (2e/(n pi))^(1/4)) + 10 / L(n)
//! ```
//!
//! and `LB(n) >= L(n)/2 + r_lb(n)`.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{beta_binomial_reference, kl_log, log_binomial_table, row_from_table, OutputPmf};
use crate::error::{Error, Result};
use crate::numerics::{digamma, log_sum_exp_unchecked};

/// Smallest `n` for which the upper bound is asserted.
pub const UB_MIN_N: u64 = 28;
/// Smallest `n` for which the gap cap `17 / L(n)` is asserted.
pub const GAP_CAP_MIN_N: u64 = 444;

/// `ln(n pi / (2e))`.
pub fn log_arg(n: f64) -> f64 {
    n.ln() + (PI / 2.0).ln() - 1.0
}

/// The common first-order term `ln(n pi / (2e)) / 2`.
pub fn asymptote(n: u64) -> f64 {
    0.5 * log_arg(n as f64)
}

fn require_positive(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    Ok(())
}

fn require_ub_range(n: u64) -> Result<()> {
    if n < UB_MIN_N {
        return Err(Error::Precondition(format!(
            "upper bound needs n >= {UB_MIN_N}, got {n}"
        )));
    }
    Ok(())
}

/// Lower bound on `C(n)` obtained from the arcsine input.
pub fn capacity_lower_bound(n: u64) -> Result<f64> {
    require_positive(n)?;
    let nf = n as f64;
    Ok(digamma(nf + 1.0)? - (3.0 * nf + 1.0).sqrt().ln_1p() + 0.5 * (3.0 * PI / (2.0 * E)).ln())
}

/// Second-order term of the lower bound:
/// `r_lb(n) = ln(1 + 1/(3n))/2 - ln(1 + 1/sqrt(3n+1)) - 1/(n+1)`.
pub fn r_lb(n: u64) -> Result<f64> {
    require_positive(n)?;
    let nf = n as f64;
    Ok(0.5 * (1.0 / (3.0 * nf)).ln_1p() - (1.0 / (3.0 * nf + 1.0).sqrt()).ln_1p() - 1.0 / (nf + 1.0))
}

/// Second-order term of the upper bound.
pub fn r_ub(n: u64) -> Result<f64> {
    require_ub_range(n)?;
    let (eta, _) = canonical_parameters(n)?;
    Ok(-(-2.0 * eta).ln_1p() + 10.0 / log_arg(n as f64))
}

/// Upper bound on `C(n)`, valid for `n >= 28`.
pub fn capacity_upper_bound(n: u64) -> Result<f64> {
    Ok(asymptote(n) + r_ub(n)?)
}

/// `r_ub(n) - r_lb(n)`.
pub fn gap(n: u64) -> Result<f64> {
    Ok(r_ub(n)? - r_lb(n)?)
}

/// `17 / ln(n pi / (2e))`, the cap on [`gap`] for `n >= 444`.
pub fn gap_cap(n: u64) -> Result<f64> {
    if n < GAP_CAP_MIN_N {
        return Err(Error::Precondition(format!(
            "gap cap needs n >= {GAP_CAP_MIN_N}, got {n}"
        )));
    }
    Ok(17.0 / log_arg(n as f64))
}

/// The extremal mixture parameters `eta = (2e/(n pi))^(1/4)` and
/// `c = ln(n pi/(2e)) / 2`.
pub fn canonical_parameters(n: u64) -> Result<(f64, f64)> {
    require_ub_range(n)?;
    let nf = n as f64;
    Ok(((2.0 * E / (nf * PI)).powf(0.25), 0.5 * log_arg(nf)))
}

fn check_mixture_params(n: u64, eta: f64, c: f64) -> Result<()> {
    require_ub_range(n)?;
    let (eta_min, c_max) = canonical_parameters(n)?;
    let slack = 1e-14;
    if !(eta >= eta_min * (1.0 - slack)) || !(eta < 0.5) {
        return Err(Error::Precondition(format!(
            "eta = {eta} must lie in [{eta_min}, 1/2)"
        )));
    }
    if !(c > 0.0) || !(c <= c_max * (1.0 + slack)) {
        return Err(Error::Precondition(format!("c = {c} must lie in (0, {c_max}]")));
    }
    Ok(())
}

fn mixture_log_probs(n: u64, eta: f64, c: f64) -> Vec<f64> {
    let spike = row_from_table(&log_binomial_table(n), c / n as f64);
    let reference = beta_binomial_reference(n);
    let (lw_spike, lw_ref) = ((2.0 * eta).ln(), (-2.0 * eta).ln_1p());
    spike
        .iter()
        .zip(reference.log_probs())
        .map(|(s, r)| log_sum_exp_unchecked(&[lw_spike + s, lw_ref + r]))
        .collect()
}

/// `Q_n = 2 eta Binomial(n, c/n) + (1 - 2 eta) P_{Y_r}`.
pub fn xie_barron_output(n: u64, eta: f64, c: f64) -> Result<OutputPmf> {
    check_mixture_params(n, eta, c)?;
    OutputPmf::from_log_weights(n, mixture_log_probs(n, eta, c))
}

/// `ln(n/(2 pi e))/2 + ln(pi/(1 - 2 eta)) + 5/c`, the analytic ceiling on
/// [`dual_certificate_max`].
pub fn dual_certificate_ceiling(n: u64, eta: f64, c: f64) -> f64 {
    0.5 * (n as f64 / (2.0 * PI * E)).ln() + (PI / (1.0 - 2.0 * eta)).ln() + 5.0 / c
}

/// Scan points for the dual certificate: a uniform grid plus log-spaced
/// points crowding `0`, `1` and the spike location `c/n`.
fn certificate_grid(n: u64, c: f64, grid_size: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let spike = c / n as f64;
    for k in 0..=120 {
        let d = 10f64.powf(-1.0 - 11.0 * k as f64 / 120.0);
        xs.push(d);
        xs.push(1.0 - d);
        for s in [spike * (1.0 - d), spike * (1.0 + d)] {
            if (0.0..=1.0).contains(&s) {
                xs.push(s);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `max_x D(P_{Y|x} || Q_n)` over a refined grid of inputs.
pub fn dual_certificate_max(n: u64, eta: f64, c: f64, grid_size: usize) -> Result<f64> {
    check_mixture_params(n, eta, c)?;
    if grid_size < 1000 {
        return Err(Error::Precondition(format!(
            "grid_size must be at least 1000, got {grid_size}"
        )));
    }
    let q = xie_barron_output(n, eta, c)?;
    let table = log_binomial_table(n);
    let values: Vec<f64> = certificate_grid(n, c, grid_size)
        .par_iter()
        .map(|&x| kl_log(&row_from_table(&table, x), q.log_probs()))
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Per-`n` summary of the bounds; fields outside their validity range are
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub n: u64,
    pub lb: f64,
    pub ub: Option<f64>,
    pub r_lb: f64,
    pub r_ub: Option<f64>,
    pub gap: Option<f64>,
    pub gap_cap: Option<f64>,
    pub asymptote: f64,
    pub ba_estimate: Option<f64>,
}

impl CapacityReport {
    pub fn new(n: u64) -> Result<Self> {
        Ok(Self {
            n,
            lb: capacity_lower_bound(n)?,
            ub: capacity_upper_bound(n).ok(),
            r_lb: r_lb(n)?,
            r_ub: r_ub(n).ok(),
            gap: gap(n).ok(),
            gap_cap: gap_cap(n).ok(),
            asymptote: asymptote(n),
            ba_estimate: None,
        })
    }

    pub fn with_ba_estimate(mut self, estimate: f64) -> Self {
        self.ba_estimate = Some(estimate);
        self
    }
}
