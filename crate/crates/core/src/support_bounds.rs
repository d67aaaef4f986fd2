//! Support-size lower bounds for capacity-achieving inputs.
//!
//! A `K`-atom input cannot make its output arbitrarily close to the
//! Beta-binomial reference in chi-square: the moment matrix of the input has
//! rank at most `K` while the arcsine moment matrix is diagonal of full
//! rank. Combined with an upper bound `u_n` on the chi-square distance of the
//! optimal output, this bounds the number of atoms from below.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::capacity_bounds::{log_arg, GAP_CAP_MIN_N};
use crate::channel::{beta_binomial_reference, DiscreteInput, OutputPmf};
use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::orthopoly::chebyshev_moments;

/// Denominator inside the iterated-log term of the support bound.
pub const LOGLOG_SCALE: f64 = 37_850.0;

/// `ln(2 pi) + 2 + ln(3) / 2`.
pub const A0: f64 = 4.387_183_210_743_4;
/// `2 + ln 2 + ln(3 pi) / 2`.
pub const B0: f64 = 3.814_818_267_818_700_4;

/// `1 / (4 e 3^(7/4) pi^(7/4))`, the floor on `P_{Y_r}(y) / P_{Y*}(y)`.
pub fn c_star() -> f64 {
    1.0 / (4.0 * E * 3f64.powf(1.75) * PI.powf(1.75))
}

/// `zeta(t) = (t - 1)^2 / (t - 1 - ln t)` for `t >= 1`, with `zeta(1) = 2`.
pub fn zeta(t: f64) -> Result<f64> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::Domain(format!("zeta needs t >= 1, got {t}")));
    }
    let u = t - 1.0;
    if u < 0.1 {
        // (u - ln(1+u)) / u^2 = sum_k (-u)^k / (k + 2)
        let mut acc = 0.0;
        for k in (0..30).rev() {
            acc = acc * -u + 1.0 / (k as f64 + 2.0);
        }
        return Ok(1.0 / acc);
    }
    Ok(u * u / (u - u.ln_1p()))
}

/// `zeta(1 / c_star)`.
pub fn zeta_at_c_star() -> f64 {
    zeta(1.0 / c_star()).expect("1/c_star > 1")
}

/// The `L x L` matrix `M[i][j] = E[T_i(X) T_j(X)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.entries.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// `|M - D|_F^2` with `D = diag(1, 1/2, ..., 1/2)`.
    pub fn frobenius_defect(&self) -> f64 {
        let l = self.dimension();
        let mut acc = KahanSum::new();
        for i in 0..l {
            for j in 0..l {
                let d = match (i, j) {
                    (0, 0) => 1.0,
                    _ if i == j => 0.5,
                    _ => 0.0,
                };
                let e = self.entries[(i, j)] - d;
                acc.add(e * e);
            }
        }
        acc.sum()
    }
}

fn require_dimension(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Admissibility("moment matrix needs L >= 1".into()));
    }
    Ok(())
}

/// Build the moment matrix from Chebyshev moments through the product rule
/// `T_i T_j = (T_{i+j} + T_{|i-j|}) / 2`.
pub fn moment_matrix(input: &DiscreteInput, l: usize) -> Result<MomentMatrix> {
    require_dimension(l)?;
    let eps = chebyshev_moments(input, 2 * l - 2).eps;
    Ok(MomentMatrix {
        entries: DMatrix::from_fn(l, l, |i, j| 0.5 * (eps[i + j] + eps[i.abs_diff(j)])),
    })
}

/// `|M - D|_F^2` for the moment matrix of `input`.
pub fn frobenius_defect(input: &DiscreteInput, l: usize) -> Result<f64> {
    Ok(moment_matrix(input, l)?.frobenius_defect())
}

/// `L * sum_{k=1}^{2L-2} eps_k^2`, an upper bound on [`frobenius_defect`].
pub fn frobenius_defect_ceiling(input: &DiscreteInput, l: usize) -> Result<f64> {
    require_dimension(l)?;
    let eps = chebyshev_moments(input, 2 * l - 2).eps;
    let mut acc = KahanSum::new();
    acc.extend(eps.iter().skip(1).map(|e| e * e));
    Ok(l as f64 * acc.sum())
}

fn check_admissible(k: usize, l: usize, n: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::Admissibility("K must be at least 1".into()));
    }
    if l <= k {
        return Err(Error::Admissibility(format!("L = {l} must exceed K = {k}")));
    }
    if (2 * l - 2) as u64 > n {
        return Err(Error::Admissibility(format!(
            "L = {l} exceeds (n + 2) / 2 for n = {n}"
        )));
    }
    Ok(())
}

/// `ln prod_{j=1}^{m} (n + j) / (n - j + 1)`.
fn log_ratio_product(m: usize, n: u64) -> f64 {
    let nf = n as f64;
    let mut acc = KahanSum::new();
    for j in 1..=m {
        let j = j as f64;
        acc.add(((nf + j) / (nf - j + 1.0)).ln());
    }
    acc.sum()
}

/// `B_n(L) = (L - K) / (2 L prod_{j=1}^{2L-2} (n+j)/(n-j+1))`, a lower bound
/// on `chi2(P_Y || P_{Y_r})` for every `K`-atom input.
pub fn mixture_chi2_lower_bound(k: usize, l: usize, n: u64) -> Result<f64> {
    check_admissible(k, l, n)?;
    let lead = (l - k) as f64 / (2.0 * l as f64);
    Ok((lead.ln() - log_ratio_product(2 * l - 2, n)).exp())
}

/// Maximize [`mixture_chi2_lower_bound`] over admissible `L`; ties go to the
/// smallest `L`.
pub fn best_admissible_l(k: usize, n: u64) -> Result<(usize, f64)> {
    let l_max = ((n + 2) / 2) as usize;
    if k == 0 || k >= l_max {
        return Err(Error::Admissibility(format!(
            "no admissible L for K = {k}, n = {n}"
        )));
    }
    let mut best = (k + 1, mixture_chi2_lower_bound(k, k + 1, n)?);
    for l in k + 2..=l_max {
        let b = mixture_chi2_lower_bound(k, l, n)?;
        if b > best.1 {
            best = (l, b);
        }
    }
    Ok(best)
}

/// `((L - K) / (2L)) exp(-(2L - 2)^2 / (n - 2L + 3))`, a closed-form lower
/// bound on `B_n(L)`.
pub fn explicit_lower_bound(k: usize, l: usize, n: u64) -> Result<f64> {
    check_admissible(k, l, n)?;
    let m = (2 * l - 2) as f64;
    let denom = n as f64 - 2.0 * l as f64 + 3.0;
    Ok((l - k) as f64 / (2.0 * l as f64) * (-m * m / denom).exp())
}

/// `17 / ln(n pi / (2e))`, the bound on `D(P_{Y_r} || P_{Y*})`.
pub fn kl_gap_bound(n: u64) -> Result<f64> {
    if n < GAP_CAP_MIN_N {
        return Err(Error::Precondition(format!(
            "divergence bound needs n >= {GAP_CAP_MIN_N}, got {n}"
        )));
    }
    Ok(17.0 / log_arg(n as f64))
}

/// `u_n = zeta(1 / c_star) * 17 / ln(n pi / (2e))`, the bound on
/// `chi2(P_{Y*} || P_{Y_r})`.
pub fn chi2_output_bound(n: u64) -> Result<f64> {
    Ok(zeta_at_c_star() * kl_gap_bound(n)?)
}

/// [`chi2_output_bound`] as a function of `ln n`, for `n` too large to
/// represent.
pub fn chi2_output_bound_log_n(log_n: f64) -> Result<f64> {
    let arg = log_n + (PI / 2.0).ln() - 1.0;
    if !(log_n >= (GAP_CAP_MIN_N as f64).ln()) || !log_n.is_finite() {
        return Err(Error::Precondition(format!(
            "ln n = {log_n} is below ln {GAP_CAP_MIN_N}"
        )));
    }
    Ok(zeta_at_c_star() * 17.0 / arg)
}

/// Lower bound on the number of atoms of any input whose output is within
/// chi-square `u_n` of the reference: the smaller of `(n + 2)/4` and
/// `(4 - a + sqrt(a (4n + a + 4))) / 8` with `a = ln(1 / (4 u_n))`.
pub fn invert_chi2_to_support(u_n: f64, n: f64) -> Result<f64> {
    if !(u_n > 0.0 && u_n < 0.25) {
        return Err(Error::Domain(format!("u_n = {u_n} outside (0, 1/4)")));
    }
    let a = (0.25 / u_n).ln();
    let quadratic = (4.0 - a + (a * (4.0 * n + a + 4.0)).sqrt()) / 8.0;
    Ok(quadratic.min((n + 2.0) / 4.0))
}

/// `ln(n pi / (2e))` must exceed this for `u_n < 1/4`.
pub fn quarter_threshold_log_arg() -> f64 {
    68.0 * zeta_at_c_star()
}

/// Round-number threshold `ln n > 37851 + ln(2/pi)`, sufficient for
/// `u_n < 1/4`.
pub fn sufficient_threshold_log_n() -> f64 {
    37_851.0 + (2.0 / PI).ln()
}

/// `(1/8) sqrt(n log+(ln(n pi/(2e)) / 37850))`.
pub fn loglog_term(n: u64) -> f64 {
    let lp = (log_arg(n as f64) / LOGLOG_SCALE).ln().max(0.0);
    (n as f64 * lp).sqrt() / 8.0
}

/// Natural log of the iterated-log term for `n = exp(log_n)`, or `None`
/// when the term vanishes.
pub fn log_loglog_term(log_n: f64) -> Option<f64> {
    let arg = log_n + (PI / 2.0).ln() - 1.0;
    if !(arg > LOGLOG_SCALE) {
        return None;
    }
    let lp = (arg / LOGLOG_SCALE).ln();
    Some(0.5 * (log_n + lp.ln()) - 8f64.ln())
}

/// The three terms of the support bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub two: f64,
    pub exp_capacity: f64,
    pub loglog_term: f64,
}

/// Lower bound on the support size of a capacity-achieving input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBoundReport {
    pub n: u64,
    pub c_star: f64,
    pub zeta_value: f64,
    pub u_n: Option<f64>,
    pub alpha_n: Option<f64>,
    pub lower_bound_terms: BoundTerms,
    pub final_bound: u64,
}

/// Flat form of [`SupportBoundReport`] for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBoundRow {
    pub n: u64,
    pub c_star: f64,
    pub zeta_value: f64,
    pub u_n: Option<f64>,
    pub alpha_n: Option<f64>,
    pub two: f64,
    pub exp_capacity: f64,
    pub loglog_term: f64,
    pub final_bound: u64,
}

impl From<&SupportBoundReport> for SupportBoundRow {
    fn from(r: &SupportBoundReport) -> Self {
        Self {
            n: r.n,
            c_star: r.c_star,
            zeta_value: r.zeta_value,
            u_n: r.u_n,
            alpha_n: r.alpha_n,
            two: r.lower_bound_terms.two,
            exp_capacity: r.lower_bound_terms.exp_capacity,
            loglog_term: r.lower_bound_terms.loglog_term,
            final_bound: r.final_bound,
        }
    }
}

impl From<SupportBoundRow> for SupportBoundReport {
    fn from(r: SupportBoundRow) -> Self {
        Self {
            n: r.n,
            c_star: r.c_star,
            zeta_value: r.zeta_value,
            u_n: r.u_n,
            alpha_n: r.alpha_n,
            lower_bound_terms: BoundTerms {
                two: r.two,
                exp_capacity: r.exp_capacity,
                loglog_term: r.loglog_term,
            },
            final_bound: r.final_bound,
        }
    }
}

/// Ceiling that ignores a relative excess of 1e-9 over an integer, so that
/// `exp(ln 2)` counts as 2.
pub fn tolerant_ceil(v: f64) -> u64 {
    (v - 1e-9 * v.abs().max(1.0)).ceil().max(0.0) as u64
}

/// `max{2, e^C, (1/8) sqrt(n log+(ln(n pi/(2e))/37850))}` rounded up.
///
/// The report is a valid bound whenever `capacity` is a lower bound on
/// `C(n)`.
pub fn support_size_lower_bound(n: u64, capacity: f64) -> Result<SupportBoundReport> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if !capacity.is_finite() {
        return Err(Error::Domain(format!("capacity {capacity} is not finite")));
    }
    let u_n = chi2_output_bound(n).ok();
    let terms = BoundTerms {
        two: 2.0,
        exp_capacity: capacity.exp(),
        loglog_term: loglog_term(n),
    };
    let top = terms.two.max(terms.exp_capacity).max(terms.loglog_term);
    Ok(SupportBoundReport {
        n,
        c_star: c_star(),
        zeta_value: zeta_at_c_star(),
        u_n,
        alpha_n: u_n.map(|u| (0.25 / u).ln()),
        lower_bound_terms: terms,
        final_bound: tolerant_ceil(top),
    })
}

/// Threshold comparisons for `n = exp(log_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicSupportReport {
    pub log_n: f64,
    /// `ln(n pi / (2e))`.
    pub log_arg: f64,
    pub u_n: f64,
    pub alpha_n: f64,
    pub u_n_below_quarter: bool,
    /// Whether `ln n > 37851 + ln(2/pi)`.
    pub above_sufficient_threshold: bool,
    /// `ln` of the iterated-log term; absent when the term is zero.
    pub log_loglog_term: Option<f64>,
}

/// The support bound regime for astronomically large `n`, given `ln n`.
pub fn symbolic_support_bound(log_n: f64) -> Result<SymbolicSupportReport> {
    let u_n = chi2_output_bound_log_n(log_n)?;
    Ok(SymbolicSupportReport {
        log_n,
        log_arg: log_n + (PI / 2.0).ln() - 1.0,
        u_n,
        alpha_n: (0.25 / u_n).ln(),
        u_n_below_quarter: u_n < 0.25,
        above_sufficient_threshold: log_n > sufficient_threshold_log_n(),
        log_loglog_term: log_loglog_term(log_n),
    })
}

/// `1 / (6 pi)`.
pub fn central_mass_floor() -> f64 {
    1.0 / (6.0 * PI)
}

/// Mass of `{ceil(n/3), ..., floor(2n/3)}` under `pmf`.
pub fn central_mass(pmf: &OutputPmf) -> f64 {
    let n = pmf.n() as usize;
    let lo = n.div_ceil(3);
    let hi = 2 * n / 3;
    let mut acc = KahanSum::new();
    for y in lo..=hi {
        acc.add(pmf.prob(y));
    }
    acc.sum()
}

/// Second differences of `h_y = ln(P_{Y*}(y) / P_{Y_r}(y))` against the
/// ceiling `ln[(y - 1/2)(n - y - 1/2) / ((y + 1/2)(n - y + 1/2))]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub n: u64,
    /// `max_y` of the second difference minus its ceiling.
    pub max_excess: f64,
    pub worst_y: Option<u64>,
    /// Largest second difference; concavity needs this to be negative.
    pub max_second_difference: f64,
    pub violations: usize,
}

/// Check the discrete-concavity inequality on an optimal output estimate.
pub fn concavity_check(optimal_output: &OutputPmf, slack: f64) -> ConcavityReport {
    let n = optimal_output.n();
    let reference = beta_binomial_reference(n);
    let h: Vec<f64> = optimal_output
        .log_probs()
        .iter()
        .zip(reference.log_probs())
        .map(|(q, r)| q - r)
        .collect();
    let mut report = ConcavityReport {
        n,
        max_excess: f64::NEG_INFINITY,
        worst_y: None,
        max_second_difference: f64::NEG_INFINITY,
        violations: 0,
    };
    for y in 1..n as usize {
        let d2 = h[y + 1] - 2.0 * h[y] + h[y - 1];
        let (yf, nf) = (y as f64, n as f64);
        let ceiling = ((yf - 0.5) * (nf - yf - 0.5) / ((yf + 0.5) * (nf - yf + 0.5))).ln();
        let excess = d2 - ceiling;
        report.max_second_difference = report.max_second_difference.max(d2);
        if excess > report.max_excess {
            report.max_excess = excess;
            report.worst_y = Some(y as u64);
        }
        if excess > slack {
            report.violations += 1;
        }
    }
    report
}

/// `|C + ln P_{Y*}(0)|`, zero when the endpoint `x = 0` satisfies the
/// optimality condition with equality.
pub fn endpoint_identity_residual(capacity: f64, optimal_output: &OutputPmf) -> f64 {
    (capacity + optimal_output.log_probs()[0]).abs()
}
