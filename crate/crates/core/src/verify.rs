//! Property suites behind the `verify` command.
//!
//! Every random case draws from its own ChaCha8 stream, keyed by the run
//! seed, the suite and the case index, so results do not depend on thread
//! scheduling. Reports carry no timings and are byte-identical across runs
//! with the same seed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{beta_binomial_reference, chi2_divergence, induced_output, DiscreteInput};
use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::orthopoly::{
    adjoint_residual, hk_log_norm, hk_polynomial, parseval_chi2_with, shifted_chebyshev,
    shifted_chebyshev_eval, PolyX, PolyY,
};
use crate::solver::{blahut_arimoto, kkt_check, verify_output_ratio, SolverConfig, SolverResult};
use crate::support_bounds::{
    central_mass, central_mass_floor, c_star, concavity_check, explicit_lower_bound,
    frobenius_defect_ceiling, mixture_chi2_lower_bound, moment_matrix,
};

/// Failures listed per check; the count is always complete.
const MAX_LISTED_FAILURES: usize = 20;

/// A named property suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Orthopoly,
    Parseval,
    Eym,
    Thm5,
    Kkt,
    Ratio,
    Concavity,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Orthopoly,
        Suite::Parseval,
        Suite::Eym,
        Suite::Thm5,
        Suite::Kkt,
        Suite::Ratio,
        Suite::Concavity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Orthopoly => "orthopoly",
            Suite::Parseval => "parseval",
            Suite::Eym => "eym",
            Suite::Thm5 => "thm5",
            Suite::Kkt => "kkt",
            Suite::Ratio => "ratio",
            Suite::Concavity => "concavity",
            Suite::All => "all",
        }
    }

    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::EACH.to_vec(),
            s => vec![s],
        }
    }

    fn stream_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::EACH
            .iter()
            .copied()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Deliberate corruption used to confirm that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Scale every `h_k` with `k >= 1` by 3/2.
    CorruptHkNorm,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl VerifyOptions {
    fn log_norm(&self, k: usize, n: u64) -> Result<f64> {
        let v = hk_log_norm(k, n)?;
        Ok(match self.fault {
            Some(Fault::CorruptHkNorm) if k > 0 => v + 1.5f64.ln(),
            _ => v,
        })
    }

    fn rng(&self, suite: Suite, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(suite.stream_tag() << 40 | index);
        rng
    }
}

/// A case whose excess over its limit was positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub case: String,
    pub excess: f64,
}

/// Outcome of one property over all its cases. A case passes when its
/// excess is at most zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: u64,
    pub failures: u64,
    /// Absent when there were no cases.
    pub worst_excess: Option<f64>,
    pub listed: Vec<Failure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_cases(name: &str, cases: Vec<(String, f64)>) -> Self {
        let mut report = CheckReport {
            name: name.to_string(),
            cases: cases.len() as u64,
            failures: 0,
            worst_excess: None,
            listed: Vec::new(),
        };
        for (case, excess) in cases {
            // NaN counts as a failure; non-finite values are stored as MAX
            // so that reports stay valid JSON.
            let failed = !(excess <= 0.0);
            let excess = if excess.is_nan() { f64::MAX } else { excess.clamp(-f64::MAX, f64::MAX) };
            report.worst_excess = Some(report.worst_excess.map_or(excess, |w| w.max(excess)));
            if failed {
                report.failures += 1;
                if report.listed.len() < MAX_LISTED_FAILURES {
                    report.listed.push(Failure { case, excess });
                }
            }
        }
        report
    }

    fn from_error(name: &str, err: &Error) -> Self {
        CheckReport {
            name: name.to_string(),
            cases: 1,
            failures: 1,
            worst_excess: Some(f64::MAX),
            listed: vec![Failure {
                case: format!("error: {err}"),
                excess: f64::MAX,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    /// `(suite, check)` names of every failing check.
    pub fn failing_checks(&self) -> Vec<(Suite, String)> {
        self.suites
            .iter()
            .flat_map(|s| {
                s.checks
                    .iter()
                    .filter(|c| !c.passed())
                    .map(move |c| (s.suite, c.name.clone()))
            })
            .collect()
    }
}

/// One line per check, for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub suite: Suite,
    pub check: String,
    pub cases: u64,
    pub failures: u64,
    pub worst_excess: Option<f64>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn rows(&self) -> Vec<CheckRow> {
        self.suites
            .iter()
            .flat_map(|s| {
                s.checks.iter().map(move |c| CheckRow {
                    suite: s.suite,
                    check: c.name.clone(),
                    cases: c.cases,
                    failures: c.failures,
                    worst_excess: c.worst_excess,
                    passed: c.passed(),
                })
            })
            .collect()
    }
}

fn check(name: &str, cases: Result<Vec<(String, f64)>>) -> CheckReport {
    match cases {
        Ok(c) => CheckReport::from_cases(name, c),
        Err(e) => CheckReport::from_error(name, &e),
    }
}

/// Random input with `k` atoms, locations uniform on `[0, 1]` and weights
/// uniform on `[0.05, 1]` before normalization.
pub fn random_input(rng: &mut impl Rng, k: usize) -> Result<DiscreteInput> {
    let pairs: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random::<f64>(), rng.random_range(0.05..1.0)))
        .collect();
    DiscreteInput::from_weights(&pairs)
}

/// Solves shared by the suites that need the capacity-achieving output.
#[derive(Default)]
pub struct SolveCache {
    solved: BTreeMap<u64, SolverResult>,
}

impl SolveCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solve every `n` not yet cached at its default configuration.
    pub fn ensure(&mut self, ns: &[u64]) -> Result<()> {
        let missing: Vec<u64> = ns
            .iter()
            .copied()
            .filter(|n| !self.solved.contains_key(n))
            .collect();
        let fresh: Vec<SolverResult> = missing
            .par_iter()
            .map(|&n| blahut_arimoto(n, &SolverConfig::for_n(n)))
            .collect::<Result<_>>()?;
        self.solved.extend(missing.into_iter().zip(fresh));
        Ok(())
    }

    pub fn get(&self, n: u64) -> Option<&SolverResult> {
        self.solved.get(&n)
    }
}

/// Run `suite` (every suite for [`Suite::All`]).
pub fn run(suite: Suite, options: &VerifyOptions) -> VerifyReport {
    let mut cache = SolveCache::new();
    let suites: Vec<SuiteReport> = suite
        .expand()
        .into_iter()
        .map(|s| {
            let checks = match s {
                Suite::Orthopoly => orthopoly_suite(options),
                Suite::Parseval => parseval_suite(options),
                Suite::Eym => eym_suite(options),
                Suite::Thm5 => thm5_suite(options),
                Suite::Kkt => kkt_suite(&mut cache),
                Suite::Ratio => ratio_suite(&mut cache),
                Suite::Concavity => concavity_suite(&mut cache),
                Suite::All => unreachable!("expanded above"),
            };
            SuiteReport {
                suite: s,
                passed: checks.iter().all(CheckReport::passed),
                checks,
            }
        })
        .collect();
    VerifyReport {
        seed: options.seed,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}

/// Largest `n` and degree in the orthogonality check.
pub const ORTHO_MAX_N: u64 = 40;
pub const ORTHO_MAX_K: usize = 15;
pub const ADJOINT_MAX_DEGREE: usize = 12;
pub const ADJOINT_CASES: u64 = 200;

fn orthopoly_suite(opts: &VerifyOptions) -> Vec<CheckReport> {
    let grams: Result<Vec<Vec<(String, f64)>>> = (1..=ORTHO_MAX_N)
        .into_par_iter()
        .map(|n| gram_cases(n, opts))
        .collect();
    let (diag, off): (Vec<_>, Vec<_>) = match grams {
        Ok(g) => g.into_iter().flatten().partition(|(c, _)| c.starts_with("diag")),
        Err(e) => {
            return vec![CheckReport::from_error("hk_norm_brute_force", &e)];
        }
    };
    let monotone = (1..=ORTHO_MAX_N)
        .flat_map(|n| (2..=n as usize).map(move |k| (n, k)))
        .map(|(n, k)| {
            let step = opts.log_norm(k, n)? - opts.log_norm(k - 1, n)?;
            Ok((format!("n={n} k={k}"), -step))
        })
        .collect();
    let adjoint = (0..ADJOINT_CASES)
        .into_par_iter()
        .map(|i| adjoint_case(&mut opts.rng(Suite::Orthopoly, i)))
        .collect();
    vec![
        CheckReport::from_cases("hk_norm_brute_force", diag),
        CheckReport::from_cases("hk_orthogonality", off),
        check("hk_norm_increasing", monotone),
        check("adjoint_residual", adjoint),
    ]
}

/// Brute-force Gram matrix of `H_0..H_K` under the Beta-binomial reference.
/// Diagonal cases compare against `h_k` at relative tolerance 1e-8; off
/// diagonal ones against `1e-8 sqrt(h_k h_l)`.
fn gram_cases(n: u64, opts: &VerifyOptions) -> Result<Vec<(String, f64)>> {
    let reference = beta_binomial_reference(n);
    let top = ORTHO_MAX_K.min(n as usize);
    let values: Vec<Vec<f64>> = (0..=top)
        .map(|k| {
            let h = hk_polynomial(k, n)?;
            (0..=n).map(|y| h.eval(y as f64)).collect()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k in 0..=top {
        for l in k..=top {
            let mut acc = KahanSum::new();
            for y in 0..=n as usize {
                acc.add(reference.prob(y) * values[k][y] * values[l][y]);
            }
            let inner = acc.sum();
            let (hk, hl) = (opts.log_norm(k, n)?.exp(), opts.log_norm(l, n)?.exp());
            if k == l {
                out.push((format!("diag n={n} k={k}"), (inner - hk).abs() / hk - 1e-8));
            } else {
                let scale = (hk * hl).sqrt();
                out.push((format!("off n={n} k={k} l={l}"), inner.abs() / scale - 1e-8));
            }
        }
    }
    Ok(out)
}

/// `f = sum a_j T_j`, `g = sum b_j H_j` with random coefficients in
/// `[-1, 1]`, degrees up to 12, checked against a quadrature input exact to
/// degree 31.
fn adjoint_case(rng: &mut ChaCha8Rng) -> Result<(String, f64)> {
    let df = rng.random_range(0..=ADJOINT_MAX_DEGREE);
    let dg = rng.random_range(0..=ADJOINT_MAX_DEGREE);
    let n = rng.random_range(ADJOINT_MAX_DEGREE as u64..=ORTHO_MAX_N);
    let mut f = vec![num_rational::BigRational::from_integer(0.into()); df + 1];
    for j in 0..=df {
        let a = exact_coefficient(rng);
        for (slot, c) in f.iter_mut().zip(shifted_chebyshev(j)?.coeffs()) {
            *slot += &a * c;
        }
    }
    let mut g = vec![num_rational::BigRational::from_integer(0.into()); dg + 1];
    for j in 0..=dg {
        let b = exact_coefficient(rng);
        for (slot, c) in g.iter_mut().zip(hk_polynomial(j, n)?.coeffs()) {
            *slot += &b * c;
        }
    }
    let quad = DiscreteInput::beta_quadrature(16)?;
    let r = adjoint_residual(&PolyX::new(f)?, &PolyY::new(g)?, &quad, n)?;
    Ok((format!("n={n} deg_f={df} deg_g={dg}"), r - 1e-9))
}

fn exact_coefficient(rng: &mut ChaCha8Rng) -> num_rational::BigRational {
    let num: i64 = rng.random_range(-1000..=1000);
    num_rational::BigRational::new(num.into(), 1000.into())
}

pub const PARSEVAL_CASES: u64 = 200;

fn parseval_suite(opts: &VerifyOptions) -> Vec<CheckReport> {
    let cases = (0..PARSEVAL_CASES)
        .into_par_iter()
        .map(|i| {
            let mut rng = opts.rng(Suite::Parseval, i);
            let k = rng.random_range(1..=5);
            let n = rng.random_range(2..=30u64);
            let input = random_input(&mut rng, k)?;
            let direct = chi2_divergence(&induced_output(&input, n)?, &beta_binomial_reference(n))?;
            let series = parseval_chi2_with(&input, n, n as usize, |k, n| opts.log_norm(k, n))?;
            Ok((format!("case={i} n={n} atoms={k}"), (direct - series).abs() - 1e-9))
        })
        .collect();
    vec![check("parseval_identity", cases)]
}

pub const EYM_CASES: u64 = 300;

fn eym_suite(opts: &VerifyOptions) -> Vec<CheckReport> {
    let cases: Result<Vec<[(String, f64); 4]>> = (0..EYM_CASES)
        .into_par_iter()
        .map(|i| {
            let mut rng = opts.rng(Suite::Eym, i);
            let k = rng.random_range(1..=4usize);
            let l = k + rng.random_range(1..=4usize);
            let input = random_input(&mut rng, k)?;
            let m = moment_matrix(&input, l)?;
            let tag = format!("case={i} K={} L={l}", input.len());
            let gram_err = (0..l)
                .flat_map(|a| (0..l).map(move |b| (a, b)))
                .map(|(a, b)| {
                    let direct: f64 = input
                        .atoms()
                        .iter()
                        .map(|at| at.p * shifted_chebyshev_eval(a, at.x) * shifted_chebyshev_eval(b, at.x))
                        .sum();
                    (m.entries()[(a, b)] - direct).abs()
                })
                .fold(0.0, f64::max);
            let defect = m.frobenius_defect();
            let floor = (l - input.len()) as f64 / 4.0;
            let ceiling = frobenius_defect_ceiling(&input, l)?;
            let sv = m.singular_values();
            let tail = sv.get(input.len()).copied().unwrap_or(0.0);
            Ok([
                (tag.clone(), gram_err - 1e-12),
                (tag.clone(), floor - defect - 1e-10),
                (tag.clone(), defect - ceiling - 1e-10),
                (tag, tail - 1e-10),
            ])
        })
        .collect();
    let cases = match cases {
        Ok(c) => c,
        Err(e) => return vec![CheckReport::from_error("moment_matrix_gram", &e)],
    };
    let column = |j: usize| cases.iter().map(|c| c[j].clone()).collect();
    vec![
        CheckReport::from_cases("moment_matrix_gram", column(0)),
        CheckReport::from_cases("defect_above_rank_floor", column(1)),
        CheckReport::from_cases("defect_below_moment_sum", column(2)),
        CheckReport::from_cases("rank_at_most_atoms", column(3)),
    ]
}

/// Random inputs per `(n, K)` in the mixture bound check.
pub const MIXTURE_INPUTS_PER_CELL: u64 = 40;
pub const MIXTURE_MAX_N: u64 = 30;
pub const MIXTURE_MAX_K: usize = 3;
pub const DOMINANCE_MAX_N: u64 = 200;

fn thm5_suite(opts: &VerifyOptions) -> Vec<CheckReport> {
    // Only cells with at least one admissible L.
    let cells: Vec<(u64, usize)> = (2..=MIXTURE_MAX_N)
        .flat_map(|n| (1..=MIXTURE_MAX_K).map(move |k| (n, k)))
        .filter(|&(n, k)| k < ((n + 2) / 2) as usize)
        .collect();
    let per_cell = MIXTURE_INPUTS_PER_CELL;
    // One case per input: the worst excess over all admissible L.
    let cases = (0..cells.len() as u64 * per_cell)
        .into_par_iter()
        .map(|i| {
            let (n, k) = cells[(i / per_cell) as usize];
            let mut rng = opts.rng(Suite::Thm5, i);
            let input = random_input(&mut rng, k)?;
            let chi2 = chi2_divergence(&induced_output(&input, n)?, &beta_binomial_reference(n))?;
            let l_max = ((n + 2) / 2) as usize;
            let mut worst = (0, f64::NEG_INFINITY);
            for l in k + 1..=l_max {
                let excess = mixture_chi2_lower_bound(k, l, n)? - 1e-12 - chi2;
                if excess > worst.1 {
                    worst = (l, excess);
                }
            }
            Ok((format!("case={i} n={n} K={k} L={}", worst.0), worst.1))
        })
        .collect();
    let dominance = (1..=DOMINANCE_MAX_N)
        .into_par_iter()
        .map(|n| {
            let l_max = ((n + 2) / 2) as usize;
            let mut out = Vec::new();
            for l in 2..=l_max {
                for k in 1..l {
                    let gap = explicit_lower_bound(k, l, n)? - mixture_chi2_lower_bound(k, l, n)?;
                    out.push((format!("n={n} K={k} L={l}"), gap - 1e-12));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect());
    vec![
        check("mixture_bound_holds", cases),
        check("explicit_below_mixture_bound", dominance),
    ]
}

/// Orders solved by the KKT suite.
pub const KKT_NS: [u64; 10] = [1, 2, 3, 4, 5, 10, 20, 28, 50, 100];
pub const KKT_SCAN_GRID: usize = 10_001;
pub const KKT_SLACK: f64 = 1e-5;

fn kkt_suite(cache: &mut SolveCache) -> Vec<CheckReport> {
    if let Err(e) = cache.ensure(&KKT_NS) {
        return vec![CheckReport::from_error("kkt_conditions", &e)];
    }
    let cases = KKT_NS
        .iter()
        .map(|&n| {
            let r = kkt_check(cache.get(n).expect("solved"), n, KKT_SCAN_GRID, KKT_SLACK)?;
            Ok((format!("n={n}"), r.max_violation.max(r.support_deviation) - KKT_SLACK))
        })
        .collect();
    let converged = KKT_NS
        .iter()
        .map(|&n| {
            let ok = cache.get(n).expect("solved").converged;
            (format!("n={n}"), if ok { -1.0 } else { 1.0 })
        })
        .collect();
    vec![
        CheckReport::from_cases("solver_converged", converged),
        check("kkt_conditions", cases),
    ]
}

pub const RATIO_MAX_N: u64 = 100;

fn ratio_suite(cache: &mut SolveCache) -> Vec<CheckReport> {
    let ns: Vec<u64> = (1..=RATIO_MAX_N).collect();
    if let Err(e) = cache.ensure(&ns) {
        return vec![CheckReport::from_error("reference_to_optimal_ratio", &e)];
    }
    let floor = c_star();
    let cases = ns
        .iter()
        .map(|&n| {
            let ratio = verify_output_ratio(n, cache.get(n).expect("solved"))?;
            Ok((format!("n={n}"), floor - ratio))
        })
        .collect();
    vec![check("reference_to_optimal_ratio", cases)]
}

/// Orders sampled by the concavity suite.
pub fn concavity_ns() -> Vec<u64> {
    (2..=40)
        .chain([50, 60, 75, 100, 125, 150, 200, 250, 300, 400, 500])
        .collect()
}

pub const CONCAVITY_SLACK: f64 = 1e-6;

fn concavity_suite(cache: &mut SolveCache) -> Vec<CheckReport> {
    let ns = concavity_ns();
    if let Err(e) = cache.ensure(&ns) {
        return vec![CheckReport::from_error("central_mass", &e)];
    }
    let floor = central_mass_floor();
    let reference_mass = ns
        .iter()
        .map(|&n| (format!("n={n}"), floor - central_mass(&beta_binomial_reference(n))))
        .collect();
    let optimal_mass = ns
        .iter()
        .map(|&n| (format!("n={n}"), floor - central_mass(&cache.get(n).expect("solved").output)))
        .collect();
    let concave = ns
        .iter()
        .map(|&n| {
            let r = concavity_check(&cache.get(n).expect("solved").output, CONCAVITY_SLACK);
            let at = r.worst_y.map_or(String::new(), |y| format!(" y={y}"));
            (format!("n={n}{at} violations={}", r.violations), r.max_excess - CONCAVITY_SLACK)
        })
        .collect();
    vec![
        CheckReport::from_cases("central_mass_reference", reference_mass),
        CheckReport::from_cases("central_mass_optimal", optimal_mass),
        CheckReport::from_cases("log_ratio_concavity", concave),
    ]
}
