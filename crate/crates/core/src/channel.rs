//! The binomial channel `Y ~ Binomial(n, x)`, input and output distributions,
//! and the divergences between them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_binomial_unchecked, log_gamma_ratio_half, log_sum_exp_unchecked, KahanSum};

/// Tolerance on `sum p = 1` accepted by [`DiscreteInput::new`].
pub const INPUT_SUM_TOLERANCE: f64 = 1e-12;

/// A single mass point of a discrete input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub p: f64,
}

/// A finitely supported distribution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInput", into = "RawInput")]
pub struct DiscreteInput {
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct RawInput {
    atoms: Vec<Atom>,
}

impl TryFrom<RawInput> for DiscreteInput {
    type Error = Error;
    fn try_from(raw: RawInput) -> Result<Self> {
        DiscreteInput::new(raw.atoms)
    }
}

impl From<DiscreteInput> for RawInput {
    fn from(d: DiscreteInput) -> Self {
        RawInput { atoms: d.atoms }
    }
}

impl DiscreteInput {
    /// Validate and wrap a list of atoms.
    ///
    /// Every `x` must lie in `[0, 1]`, every `p` must be positive, the
    /// locations must be distinct and the masses must sum to one within
    /// [`INPUT_SUM_TOLERANCE`].
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("no atoms".into()));
        }
        let mut total = KahanSum::new();
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.x) {
                return Err(Error::InvalidInput(format!("location {} outside [0,1]", a.x)));
            }
            if !(a.p > 0.0) || !a.p.is_finite() {
                return Err(Error::InvalidInput(format!("mass {} is not positive", a.p)));
            }
            total.add(a.p);
        }
        if (total.sum() - 1.0).abs() > INPUT_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "masses sum to {} instead of 1",
                total.sum()
            )));
        }
        let mut xs: Vec<f64> = atoms.iter().map(|a| a.x).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate atom location".into()));
        }
        Ok(Self { atoms })
    }

    /// Build from unnormalized `(x, weight)` pairs. Zero weights are dropped
    /// and atoms at the same location are merged.
    pub fn from_weights(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, w)| w != 0.0).collect();
        if sorted.iter().any(|&(_, w)| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative and finite".into()));
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let mut total = KahanSum::new();
        total.extend(merged.iter().map(|&(_, w)| w));
        let total = total.sum();
        if merged.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidInput("total weight is zero".into()));
        }
        let atoms = merged
            .into_iter()
            .map(|(x, w)| Atom { x, p: w / total })
            .collect();
        Self::new(atoms)
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![Atom { x, p: 1.0 }])
    }

    /// Gauss–Chebyshev representation of Beta(1/2, 1/2) with `m` nodes.
    pub fn beta_quadrature(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("quadrature order must be positive".into()));
        }
        let w = 1.0 / m as f64;
        Self::new(gauss_chebyshev_nodes(m).into_iter().map(|x| Atom { x, p: w }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Number of atoms `K`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &DiscreteInput, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("mixing weight {lambda} outside [0,1]")));
        }
        let pairs: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.x, lambda * a.p))
            .chain(other.atoms.iter().map(|a| (a.x, (1.0 - lambda) * a.p)))
            .collect();
        Self::from_weights(&pairs)
    }
}

/// Nodes `(1 + cos((2j - 1) pi / (2m))) / 2`, `j = 1..=m`, of the `m`-point
/// Gauss–Chebyshev rule for the arcsine density on `[0, 1]`.
pub fn gauss_chebyshev_nodes(m: usize) -> Vec<f64> {
    let mf = m as f64;
    (1..=m)
        .map(|j| {
            let k = 2 * j - 1;
            if k <= m {
                (k as f64 * PI / (4.0 * mf)).cos().powi(2)
            } else {
                ((2 * m - k) as f64 * PI / (4.0 * mf)).sin().powi(2)
            }
        })
        .collect()
}

/// A pmf on `{0, ..., n}` stored as log probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf", into = "RawPmf")]
pub struct OutputPmf {
    n: u64,
    log_probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPmf {
    n: u64,
    #[serde(with = "log_vec")]
    log_probs: Vec<f64>,
}

impl TryFrom<RawPmf> for OutputPmf {
    type Error = Error;
    fn try_from(raw: RawPmf) -> Result<Self> {
        OutputPmf::from_log_probs(raw.n, raw.log_probs)
    }
}

impl From<OutputPmf> for RawPmf {
    fn from(p: OutputPmf) -> Self {
        RawPmf {
            n: p.n,
            log_probs: p.log_probs,
        }
    }
}

/// JSON has no `-inf`; zero-probability entries are written as `null`.
pub(crate) mod log_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|&x| x.is_finite().then_some(x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

impl OutputPmf {
    /// Wrap log probabilities that already sum to one within 1e-10.
    pub fn from_log_probs(n: u64, log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.len() as u64 != n + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} log probabilities, got {}",
                n + 1,
                log_probs.len()
            )));
        }
        if log_probs.iter().any(|v| v.is_nan() || *v == f64::INFINITY || *v > 1e-12) {
            return Err(Error::InvalidInput("log probabilities must be <= 0".into()));
        }
        let total = log_sum_exp_unchecked(&log_probs);
        if !(total.abs() <= 1e-10) {
            return Err(Error::InvalidInput(format!("pmf sums to exp({total})")));
        }
        Ok(Self { n, log_probs })
    }

    /// Normalize arbitrary log weights by subtracting their log-sum-exp.
    pub fn from_log_weights(n: u64, mut log_w: Vec<f64>) -> Result<Self> {
        if log_w.len() as u64 != n + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} log weights, got {}",
                n + 1,
                log_w.len()
            )));
        }
        let total = log_sum_exp_unchecked(&log_w);
        if !total.is_finite() {
            return Err(Error::InvalidInput("weights do not have finite positive sum".into()));
        }
        for v in &mut log_w {
            *v -= total;
        }
        Ok(Self { n, log_probs: log_w })
    }

    /// Normalize a linear-domain probability vector.
    pub fn from_probs(n: u64, probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be nonnegative".into()));
        }
        Self::from_log_weights(n, probs.iter().map(|p| p.ln()).collect())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn prob(&self, y: usize) -> f64 {
        self.log_probs[y].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|v| v.exp()).collect()
    }
}

/// The law of `Y` given `X = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRow {
    pub n: u64,
    pub x: f64,
    pub log_probs: Vec<f64>,
}

impl ChannelRow {
    pub fn as_pmf(&self) -> OutputPmf {
        OutputPmf {
            n: self.n,
            log_probs: self.log_probs.clone(),
        }
    }
}

/// `ln C(n, y)` for every `y`.
pub fn log_binomial_table(n: u64) -> Vec<f64> {
    (0..=n).map(|y| log_binomial_unchecked(n, y)).collect()
}

/// Binomial log pmf at `x` given a precomputed [`log_binomial_table`].
pub(crate) fn row_from_table(table: &[f64], x: f64) -> Vec<f64> {
    let n = table.len() - 1;
    if x == 0.0 || x == 1.0 {
        let hit = if x == 0.0 { 0 } else { n };
        return (0..=n)
            .map(|y| if y == hit { 0.0 } else { f64::NEG_INFINITY })
            .collect();
    }
    let lx = x.ln();
    let l1x = (-x).ln_1p();
    table
        .iter()
        .enumerate()
        .map(|(y, c)| c + y as f64 * lx + (n - y) as f64 * l1x)
        .collect()
}

/// The channel row `P_{Y|X=x}` as a log pmf.
pub fn binomial_row(n: u64, x: f64) -> Result<ChannelRow> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("channel input {x} outside [0,1]")));
    }
    Ok(ChannelRow {
        n,
        x,
        log_probs: row_from_table(&log_binomial_table(n), x),
    })
}

/// Output law of a discrete input, mixed in the log domain.
pub fn induced_output(input: &DiscreteInput, n: u64) -> Result<OutputPmf> {
    let table = log_binomial_table(n);
    let rows: Vec<Vec<f64>> = input
        .atoms()
        .iter()
        .map(|a| {
            let lp = a.p.ln();
            row_from_table(&table, a.x).into_iter().map(|v| v + lp).collect()
        })
        .collect();
    let mut scratch = vec![0.0; rows.len()];
    let log_w = (0..=n as usize)
        .map(|y| {
            for (s, r) in scratch.iter_mut().zip(&rows) {
                *s = r[y];
            }
            log_sum_exp_unchecked(&scratch)
        })
        .collect();
    OutputPmf::from_log_weights(n, log_w)
}

/// The Beta-binomial(n, 1/2, 1/2) pmf, i.e. the output law of the arcsine
/// input.
pub fn beta_binomial_reference(n: u64) -> OutputPmf {
    let ln_pi = PI.ln();
    let log_w = (0..=n)
        .map(|y| {
            let a = log_gamma_ratio_half(y);
            let b = log_gamma_ratio_half(n - y);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            (lo + hi) - ln_pi
        })
        .collect();
    OutputPmf::from_log_weights(n, log_w).expect("Beta-binomial weights are finite")
}

fn check_same_n(p: &OutputPmf, q: &OutputPmf) -> Result<()> {
    if p.n != q.n {
        return Err(Error::InvalidInput(format!(
            "pmfs over different alphabets: n = {} and n = {}",
            p.n, q.n
        )));
    }
    Ok(())
}

/// Relative entropy `D(p || q)` in nats.
pub fn kl_divergence(p: &OutputPmf, q: &OutputPmf) -> Result<f64> {
    check_same_n(p, q)?;
    kl_log(&p.log_probs, &q.log_probs)
}

pub(crate) fn kl_log(lp: &[f64], lq: &[f64]) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (y, (&a, &b)) in lp.iter().zip(lq).enumerate() {
        if a == f64::NEG_INFINITY {
            continue;
        }
        if b == f64::NEG_INFINITY {
            return Err(Error::SupportViolation { y });
        }
        acc.add(a.exp() * (a - b));
    }
    Ok(acc.sum().max(0.0))
}

/// Chi-square divergence `sum (p - q)^2 / q`.
pub fn chi2_divergence(p: &OutputPmf, q: &OutputPmf) -> Result<f64> {
    check_same_n(p, q)?;
    let mut acc = KahanSum::new();
    for (y, (&a, &b)) in p.log_probs.iter().zip(&q.log_probs).enumerate() {
        if b == f64::NEG_INFINITY {
            if a == f64::NEG_INFINITY {
                continue;
            }
            return Err(Error::SupportViolation { y });
        }
        let r = (a - b).exp_m1();
        acc.add(b.exp() * r * r);
    }
    Ok(acc.sum())
}

/// `I(X; Y)` for a discrete input.
pub fn mutual_information(input: &DiscreteInput, n: u64) -> Result<f64> {
    let out = induced_output(input, n)?;
    let table = log_binomial_table(n);
    let mut acc = KahanSum::new();
    for a in input.atoms() {
        let row = row_from_table(&table, a.x);
        acc.add(a.p * kl_log(&row, &out.log_probs)?);
    }
    Ok(acc.sum().max(0.0))
}

/// `I(X_r; Y_r)` for the arcsine input, by `quadrature_order`-point
/// Gauss–Chebyshev quadrature of `D(P_{Y|x} || P_{Y_r})`.
pub fn mutual_information_beta_input(n: u64, quadrature_order: usize) -> Result<f64> {
    if quadrature_order == 0 {
        return Err(Error::Domain("quadrature order must be positive".into()));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let reference = beta_binomial_reference(n);
    let table = log_binomial_table(n);
    let mut acc = KahanSum::new();
    for x in gauss_chebyshev_nodes(quadrature_order) {
        let row = row_from_table(&table, x);
        acc.add(kl_log(&row, &reference.log_probs)?);
    }
    Ok(acc.sum() / quadrature_order as f64)
}
