//! Numerical capacity oracle on a uniform input grid.
//!
//! The optimizer works on symmetric inputs only: every grid point `x` is
//! paired with its mirror `1 - x` and both carry the same mass. The optimum
//! of the continuous problem is symmetric and the objective is concave, so
//! nothing is lost, and each iterate is exactly symmetric by construction.
//!
//! A Blahut–Arimoto warm start locates the support clusters. The iterate is
//! then compressed onto the local maxima of the divergence profile and
//! polished by a projected Newton method on the active pairs, alternated
//! with vertex-exchange steps that move mass to the point of largest
//! divergence. The reported duality gap `max_x D(P_{Y|x} || P_Y) - I` is
//! always computed over the full grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    beta_binomial_reference, binomial_row, kl_log, log_binomial_table, Atom, DiscreteInput,
    OutputPmf,
};
use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// Row entries with log probability below this are dropped.
const BAND_CUTOFF: f64 = -100.0;
/// Blahut–Arimoto iterations before the polish phase.
const WARM_START_ITERATIONS: usize = 200;
/// Newton steps per polish round.
const NEWTON_STEPS: usize = 30;
/// Polish rounds without improvement before giving up.
const STALL_ROUNDS: usize = 25;

/// Parameters of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_size: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub support_threshold: f64,
    pub cluster_radius: f64,
}

impl SolverConfig {
    /// Defaults for block length `n`: grid `20n + 1` clamped to
    /// `[1001, 20001]`, gap
    /// tolerance 1e-9, support threshold 1e-7, cluster radius
    /// `1 / (4 sqrt(n + 1))`.
    pub fn for_n(n: u64) -> Self {
        Self {
            grid_size: (20 * n as usize + 1).clamp(1001, 20_001),
            tolerance: 1e-9,
            max_iterations: 100_000,
            support_threshold: 1e-7,
            cluster_radius: 0.25 / ((n + 1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::Config(format!("grid_size {} < 2", self.grid_size)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tolerance)));
        }
        if !(self.support_threshold > 0.0 && self.support_threshold < 1.0) {
            return Err(Error::Config(format!(
                "support_threshold {} outside (0, 1)",
                self.support_threshold
            )));
        }
        if !(self.cluster_radius > 0.0 && self.cluster_radius < 1.0) {
            return Err(Error::Config(format!(
                "cluster_radius {} outside (0, 1)",
                self.cluster_radius
            )));
        }
        Ok(())
    }
}

/// A group of nearby support atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: f64,
    pub mass: f64,
}

/// Outcome of [`blahut_arimoto`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawResult", into = "RawResult")]
pub struct SolverResult {
    pub n: u64,
    pub capacity_estimate: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Grid-supported input, atoms in increasing `x`.
    pub input: DiscreteInput,
    pub output: OutputPmf,
    pub extracted_support: Vec<Cluster>,
    /// Mutual information after each accepted iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawResult {
    n: u64,
    capacity_estimate: f64,
    duality_gap: f64,
    iterations: usize,
    converged: bool,
    support: Vec<Atom>,
    #[serde(with = "crate::channel::log_vec")]
    output_log_probs: Vec<f64>,
    clusters: Vec<Cluster>,
    objective_trace: Vec<f64>,
}

impl TryFrom<RawResult> for SolverResult {
    type Error = Error;
    fn try_from(r: RawResult) -> Result<Self> {
        Ok(Self {
            n: r.n,
            capacity_estimate: r.capacity_estimate,
            duality_gap: r.duality_gap,
            iterations: r.iterations,
            converged: r.converged,
            input: DiscreteInput::new(r.support)?,
            output: OutputPmf::from_log_probs(r.n, r.output_log_probs)?,
            extracted_support: r.clusters,
            objective_trace: r.objective_trace,
        })
    }
}

impl From<SolverResult> for RawResult {
    fn from(r: SolverResult) -> Self {
        Self {
            n: r.n,
            capacity_estimate: r.capacity_estimate,
            duality_gap: r.duality_gap,
            iterations: r.iterations,
            converged: r.converged,
            support: r.input.atoms().to_vec(),
            output_log_probs: r.output.log_probs().to_vec(),
            clusters: r.extracted_support,
            objective_trace: r.objective_trace,
        }
    }
}

/// Channel rows for the lower half of a symmetric grid.
///
/// Pair `k` stands for the grid points `k` and `g - 1 - k`; when `g` is odd
/// the middle pair is the single point `1/2`. Rows are stored for the lower
/// member only and reflected (`y -> n - y`) for the upper one.
struct PairChannel {
    n: usize,
    g: usize,
    starts: Vec<usize>,
    rows: Vec<Vec<f64>>,
    negent: Vec<f64>,
}

impl PairChannel {
    fn new(n: usize, g: usize) -> Self {
        let pairs = g.div_ceil(2);
        let table = log_binomial_table(n as u64);
        let built: Vec<(usize, Vec<f64>, f64)> = (0..pairs)
            .into_par_iter()
            .map(|k| {
                let x = k as f64 / (g - 1) as f64;
                let lw = crate::channel::row_from_table(&table, x);
                let lo = lw.iter().position(|&v| v >= BAND_CUTOFF).unwrap_or(0);
                let hi = lw.iter().rposition(|&v| v >= BAND_CUTOFF).unwrap_or(0);
                let mut neg = KahanSum::new();
                let row: Vec<f64> = lw[lo..=hi]
                    .iter()
                    .map(|&v| {
                        let w = v.exp();
                        if w > 0.0 {
                            neg.add(w * v);
                        }
                        w
                    })
                    .collect();
                (lo, row, neg.sum())
            })
            .collect();
        let mut starts = Vec::with_capacity(pairs);
        let mut rows = Vec::with_capacity(pairs);
        let mut negent = Vec::with_capacity(pairs);
        for (s, r, e) in built {
            starts.push(s);
            rows.push(r);
            negent.push(e);
        }
        Self {
            n,
            g,
            starts,
            rows,
            negent,
        }
    }

    fn pairs(&self) -> usize {
        self.rows.len()
    }

    fn x(&self, k: usize) -> f64 {
        k as f64 / (self.g - 1) as f64
    }

    /// Output law of the symmetric input with pair masses `u` restricted to
    /// `support`. Exactly symmetric in `y`.
    fn output(&self, u: &[f64], support: &[usize]) -> Vec<f64> {
        let mut half = vec![KahanSum::new(); self.n + 1];
        for &k in support {
            let w = 0.5 * u[k];
            for (off, v) in self.rows[k].iter().enumerate() {
                half[self.starts[k] + off].add(w * v);
            }
        }
        (0..=self.n)
            .map(|y| half[y].sum() + half[self.n - y].sum())
            .collect()
    }

    /// `I = H(q) + sum_k u_k sum_y W ln W`.
    fn objective(&self, u: &[f64], support: &[usize], q: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        for &v in q {
            if v > 0.0 {
                acc.add(-v * v.ln());
            }
        }
        for &k in support {
            acc.add(u[k] * self.negent[k]);
        }
        acc.sum()
    }

    /// `D(P_{Y|x_k} || q)` given `ln q`.
    fn divergence(&self, k: usize, lq: &[f64]) -> f64 {
        let mut acc = KahanSum::new();
        acc.add(self.negent[k]);
        for (off, &w) in self.rows[k].iter().enumerate() {
            if w > 0.0 {
                let l = lq[self.starts[k] + off];
                if l == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                acc.add(-w * l);
            }
        }
        acc.sum()
    }

    fn all_divergences(&self, lq: &[f64]) -> Vec<f64> {
        (0..self.pairs())
            .into_par_iter()
            .map(|k| self.divergence(k, lq))
            .collect()
    }

    /// Dense symmetric row `(W_k(y) + W_k(n - y)) / 2`.
    fn pair_row(&self, k: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.n + 1];
        for (off, &w) in self.rows[k].iter().enumerate() {
            let y = self.starts[k] + off;
            r[y] += 0.5 * w;
            r[self.n - y] += 0.5 * w;
        }
        r
    }

    /// Expand pair masses to grid atoms in increasing `x`.
    fn expand(&self, u: &[f64]) -> Vec<(f64, f64)> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (k, &m) in u.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let mirror = self.g - 1 - k;
            if mirror == k {
                lower.push((0.5, m));
            } else {
                lower.push((self.x(k), 0.5 * m));
                upper.push((mirror as f64 / (self.g - 1) as f64, 0.5 * m));
            }
        }
        upper.reverse();
        lower.extend(upper);
        lower
    }
}

fn ln_vec(q: &[f64]) -> Vec<f64> {
    q.iter().map(|v| v.ln()).collect()
}

fn normalize(u: &mut [f64]) {
    let mut acc = KahanSum::new();
    acc.extend(u.iter().copied());
    let s = acc.sum();
    for v in u.iter_mut() {
        *v /= s;
    }
}

fn support_of(u: &[f64]) -> Vec<usize> {
    (0..u.len()).filter(|&k| u[k] > 0.0).collect()
}

/// Index of the first maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A solver iterate with its cached output law and objective.
#[derive(Clone)]
struct Iterate {
    u: Vec<f64>,
    support: Vec<usize>,
    q: Vec<f64>,
    info: f64,
}

impl Iterate {
    fn new(ch: &PairChannel, u: Vec<f64>) -> Self {
        let support = support_of(&u);
        let q = ch.output(&u, &support);
        let info = ch.objective(&u, &support, &q);
        Self { u, support, q, info }
    }
}

struct Run<'a> {
    ch: &'a PairChannel,
    cfg: &'a SolverConfig,
    iterations: usize,
    trace: Vec<f64>,
}

impl Run<'_> {
    fn budget_left(&self) -> bool {
        self.iterations < self.cfg.max_iterations
    }

    /// Record an accepted iterate; values below the incumbent are not
    /// recorded.
    fn record(&mut self, info: f64) {
        if self.trace.last().is_none_or(|&last| info >= last) {
            self.trace.push(info);
        }
    }

    /// One Blahut–Arimoto update restricted to the current support.
    fn ba_step(&mut self, it: &Iterate, d: &[f64]) -> Iterate {
        let dmax = it
            .support
            .iter()
            .map(|&k| d[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut u = vec![0.0; it.u.len()];
        for &k in &it.support {
            u[k] = it.u[k] * (d[k] - dmax).exp();
        }
        normalize(&mut u);
        self.iterations += 1;
        Iterate::new(self.ch, u)
    }

    fn support_divergences(&self, it: &Iterate) -> Vec<(usize, f64)> {
        let lq = ln_vec(&it.q);
        it.support
            .iter()
            .map(|&k| (k, self.ch.divergence(k, &lq)))
            .collect()
    }

    /// Remove a direction of affine dependence among the active rows, if any,
    /// moving along it until one mass reaches zero. Returns true when a pair
    /// was dropped.
    fn reduce_dependence(&mut self, it: &mut Iterate) -> bool {
        let s = it.support.len();
        if s < 2 {
            return false;
        }
        let n = self.ch.n;
        let rows = (n + 2).max(s);
        let mut a = DMatrix::<f64>::zeros(rows, s);
        for (c, &k) in it.support.iter().enumerate() {
            let r = self.ch.pair_row(k);
            for y in 0..=n {
                if it.q[y] > 0.0 {
                    a[(y, c)] = r[y] / it.q[y].sqrt();
                }
            }
            a[(n + 1, c)] = 1.0;
        }
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        let sv = &svd.singular_values;
        let smax = sv.max();
        let (imin, smin) = sv
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        if smin > 1e-10 * smax {
            return false;
        }
        let mut v: Vec<f64> = v_t.row(imin).iter().copied().collect();
        let slope: f64 = it
            .support
            .iter()
            .zip(&v)
            .map(|(&k, vi)| vi * self.ch.negent[k])
            .sum();
        if slope < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let mut t = f64::INFINITY;
        let mut hit = 0;
        for (c, &k) in it.support.iter().enumerate() {
            if v[c] < 0.0 {
                let tk = -it.u[k] / v[c];
                if tk < t {
                    t = tk;
                    hit = k;
                }
            }
        }
        if !t.is_finite() {
            return false;
        }
        let mut u = it.u.clone();
        for (c, &k) in it.support.iter().enumerate() {
            u[k] = (u[k] + t * v[c]).max(0.0);
        }
        u[hit] = 0.0;
        normalize(&mut u);
        *it = Iterate::new(self.ch, u);
        self.iterations += 1;
        self.record(it.info);
        true
    }

    /// Projected Newton steps on the active pairs. Returns true if the
    /// objective increased.
    fn newton(&mut self, it: &mut Iterate) -> bool {
        let start = it.info;
        for _ in 0..NEWTON_STEPS {
            if !self.budget_left() {
                break;
            }
            let ds = self.support_divergences(it);
            let spread = ds
                .iter()
                .map(|&(_, d)| (d - it.info).abs())
                .fold(0.0, f64::max);
            if spread <= 1e-3 * self.cfg.tolerance {
                break;
            }
            if self.reduce_dependence(it) {
                continue;
            }
            let s = it.support.len();
            let dense: Vec<Vec<f64>> = it.support.iter().map(|&k| self.ch.pair_row(k)).collect();
            let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
            for i in 0..s {
                for j in i..s {
                    let mut acc = KahanSum::new();
                    for y in 0..=self.ch.n {
                        if it.q[y] > 0.0 {
                            acc.add(dense[i][y] * dense[j][y] / it.q[y]);
                        }
                    }
                    kkt[(i, j)] = acc.sum();
                    kkt[(j, i)] = acc.sum();
                }
                kkt[(i, s)] = 1.0;
                kkt[(s, i)] = 1.0;
            }
            let mut rhs = DVector::<f64>::zeros(s + 1);
            for (i, &(_, d)) in ds.iter().enumerate() {
                rhs[i] = d;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                break;
            };
            let dp: Vec<f64> = (0..s).map(|i| sol[i]).collect();
            if dp.iter().any(|v| !v.is_finite()) {
                break;
            }
            let mut tmax = 1.0;
            let mut blocking = None;
            for (i, &k) in it.support.iter().enumerate() {
                if dp[i] < 0.0 {
                    let tk = -it.u[k] / dp[i];
                    if tk < tmax {
                        tmax = tk;
                        blocking = Some(k);
                    }
                }
            }
            let mut t = tmax;
            let mut accepted = None;
            for _ in 0..40 {
                let mut u = it.u.clone();
                for (i, &k) in it.support.iter().enumerate() {
                    u[k] = (u[k] + t * dp[i]).max(0.0);
                }
                if t == tmax {
                    if let Some(b) = blocking {
                        u[b] = 0.0;
                    }
                }
                normalize(&mut u);
                let cand = Iterate::new(self.ch, u);
                if cand.info > it.info {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some(c) => {
                    *it = c;
                    self.iterations += 1;
                    self.record(it.info);
                }
                None => break,
            }
        }
        it.info > start
    }

    /// Move mass from the support neighbours of pair `j` onto `j`, with an
    /// exact line search along the exchange direction.
    fn exchange(&mut self, it: &mut Iterate, j: usize) -> bool {
        let below = it.support.iter().rev().find(|&&k| k < j).copied();
        let above = it.support.iter().find(|&&k| k > j).copied();
        let mut dir: Vec<(usize, f64)> = vec![(j, 1.0)];
        match (below, above) {
            (Some(a), Some(b)) => {
                let span = (b - a) as f64;
                dir.push((a, -((b - j) as f64) / span));
                dir.push((b, -((j - a) as f64) / span));
            }
            (Some(a), None) => dir.push((a, -1.0)),
            (None, Some(b)) => dir.push((b, -1.0)),
            (None, None) => return false,
        }
        let tmax = dir
            .iter()
            .filter(|&&(_, c)| c < 0.0)
            .map(|&(k, c)| -it.u[k] / c)
            .fold(f64::INFINITY, f64::min);
        let rows: Vec<(usize, f64, Vec<f64>)> =
            dir.iter().map(|&(k, c)| (k, c, self.ch.pair_row(k))).collect();
        let q_at = |t: f64| -> Vec<f64> {
            let mut q = it.q.clone();
            for (_, c, r) in &rows {
                for (qy, ry) in q.iter_mut().zip(r) {
                    *qy += t * c * ry;
                }
            }
            q.iter_mut().for_each(|v| *v = v.max(0.0));
            q
        };
        let slope = |t: f64| -> f64 {
            let lq = ln_vec(&q_at(t));
            rows.iter()
                .map(|(k, c, _)| c * self.ch.divergence(*k, &lq))
                .sum()
        };
        if !(slope(0.0) > 0.0) {
            return false;
        }
        let t = if slope(tmax) >= 0.0 {
            tmax
        } else {
            let (mut lo, mut hi) = (0.0, tmax);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if !(t > 0.0) {
            return false;
        }
        let mut u = it.u.clone();
        for &(k, c) in &dir {
            u[k] = (u[k] + t * c).max(0.0);
        }
        if t == tmax {
            for &(k, c) in &dir {
                if c < 0.0 && u[k] <= 1e-300_f64.max(1e-15 * it.u[k]) {
                    u[k] = 0.0;
                }
            }
        }
        normalize(&mut u);
        let cand = Iterate::new(self.ch, u);
        if cand.info < it.info {
            return false;
        }
        *it = cand;
        self.iterations += 1;
        self.record(it.info);
        true
    }
}

/// Merge a Blahut–Arimoto iterate onto the local maxima of its divergence
/// profile that come within `2 * gap` of the objective.
fn compress(ch: &PairChannel, it: &Iterate, d: &[f64], gap: f64) -> Vec<f64> {
    let p = ch.pairs();
    let last = p - 1;
    let mut peaks: Vec<usize> = (0..p)
        .filter(|&k| {
            let left = k == 0 || d[k] >= d[k - 1];
            let right = k == last || d[k] >= d[k + 1];
            left && right && d[k] >= it.info - 2.0 * gap
        })
        .collect();
    if !peaks.contains(&0) {
        peaks.insert(0, 0);
    }
    let mut u = vec![0.0; p];
    for k in 0..p {
        let nearest = match peaks.binary_search(&k) {
            Ok(i) => peaks[i],
            Err(i) => {
                if i == 0 {
                    peaks[0]
                } else if i == peaks.len() || k - peaks[i - 1] <= peaks[i] - k {
                    peaks[i - 1]
                } else {
                    peaks[i]
                }
            }
        };
        u[nearest] += it.u[k];
    }
    normalize(&mut u);
    u
}

struct Finish {
    it: Iterate,
    gap: f64,
}

fn evaluate_gap(ch: &PairChannel, it: &Iterate) -> (Vec<f64>, f64) {
    let d = ch.all_divergences(&ln_vec(&it.q));
    let dmax = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (d, dmax - it.info)
}

fn polish(run: &mut Run, start: Iterate) -> Finish {
    let mut it = start;
    let mut best = it.info;
    let mut stall = 0;
    loop {
        run.newton(&mut it);
        let (d, gap) = evaluate_gap(run.ch, &it);
        if gap <= run.cfg.tolerance || !run.budget_left() {
            return Finish { it, gap };
        }
        let j = argmax(&d);
        let moved = if it.u[j] > 0.0 {
            false
        } else {
            run.exchange(&mut it, j)
        };
        if !moved {
            for _ in 0..20 {
                if !run.budget_left() {
                    break;
                }
                let ds = run.ch.all_divergences(&ln_vec(&it.q));
                it = run.ba_step(&it, &ds);
                run.record(it.info);
            }
        }
        if it.info > best {
            best = it.info;
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_ROUNDS {
                let (_, gap) = evaluate_gap(run.ch, &it);
                return Finish { it, gap };
            }
        }
    }
}

/// Capacity of the `n`-trial binomial channel restricted to the uniform
/// input grid of `config.grid_size` points.
///
/// Hitting `max_iterations` is not an error: the result comes back with
/// `converged = false` and the last duality gap.
pub fn blahut_arimoto(n: u64, config: &SolverConfig) -> Result<SolverResult> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    if n == 1 {
        return binary_solution(config);
    }
    let ch = PairChannel::new(n as usize, config.grid_size);
    let mut run = Run {
        ch: &ch,
        cfg: config,
        iterations: 0,
        trace: Vec::new(),
    };
    let p = ch.pairs();
    let mut u0 = vec![2.0 / config.grid_size as f64; p];
    if config.grid_size % 2 == 1 {
        u0[p - 1] = 1.0 / config.grid_size as f64;
    }
    normalize(&mut u0);
    let mut it = Iterate::new(&ch, u0);
    run.record(it.info);
    let mut finish = None;
    for _ in 0..WARM_START_ITERATIONS {
        let (d, gap) = evaluate_gap(&ch, &it);
        if gap <= config.tolerance || !run.budget_left() {
            finish = Some(Finish { it: it.clone(), gap });
            break;
        }
        it = run.ba_step(&it, &d);
        run.record(it.info);
    }
    let finish = match finish {
        Some(f) => f,
        None => {
            let (d, gap) = evaluate_gap(&ch, &it);
            let candidate = Iterate::new(&ch, compress(&ch, &it, &d, gap));
            let polished = polish(&mut run, candidate);
            if polished.it.info >= it.info {
                polished
            } else {
                Finish { it, gap }
            }
        }
    };
    assemble(n, config, &ch, finish, run.iterations, run.trace)
}

fn assemble(
    n: u64,
    config: &SolverConfig,
    ch: &PairChannel,
    finish: Finish,
    iterations: usize,
    trace: Vec<f64>,
) -> Result<SolverResult> {
    let atoms = ch
        .expand(&finish.it.u)
        .into_iter()
        .map(|(x, p)| Atom { x, p })
        .collect();
    let input = DiscreteInput::new(atoms)?;
    let output = OutputPmf::from_probs(n, &finish.it.q)?;
    let extracted_support = extract_support(&input, config.support_threshold, config.cluster_radius)?;
    Ok(SolverResult {
        n,
        capacity_estimate: finish.it.info,
        duality_gap: finish.gap.max(0.0),
        iterations,
        converged: finish.gap <= config.tolerance,
        input,
        output,
        extracted_support,
        objective_trace: trace,
    })
}

/// The known optimum for `n = 1`: equal masses on `{0, 1}`.
fn binary_solution(config: &SolverConfig) -> Result<SolverResult> {
    let input = DiscreteInput::new(vec![Atom { x: 0.0, p: 0.5 }, Atom { x: 1.0, p: 0.5 }])?;
    let output = OutputPmf::from_probs(1, &[0.5, 0.5])?;
    let capacity = std::f64::consts::LN_2;
    let g = config.grid_size;
    let mut gap = f64::NEG_INFINITY;
    for i in 0..g {
        let row = binomial_row(1, i as f64 / (g - 1) as f64)?;
        gap = gap.max(kl_log(&row.log_probs, output.log_probs())? - capacity);
    }
    let extracted_support = extract_support(&input, config.support_threshold, config.cluster_radius)?;
    Ok(SolverResult {
        n: 1,
        capacity_estimate: capacity,
        duality_gap: gap.max(0.0),
        iterations: 0,
        converged: true,
        input,
        output,
        extracted_support,
        objective_trace: vec![capacity],
    })
}

fn arcsine_coordinate(x: f64) -> f64 {
    x.sqrt().asin()
}

/// Drop atoms below `threshold`, merge the survivors whose consecutive
/// spacing in `arcsin(sqrt(x))` is at most `radius`, and renormalize the
/// cluster masses. Near `1/2` the coordinate moves at the rate of `x`; near
/// the endpoints it stretches the `O(1/n)` gaps between atoms.
pub fn extract_support(input: &DiscreteInput, threshold: f64, radius: f64) -> Result<Vec<Cluster>> {
    let mut kept: Vec<Atom> = input
        .atoms()
        .iter()
        .copied()
        .filter(|a| a.p >= threshold)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySupport);
    }
    kept.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut groups: Vec<Vec<Atom>> = Vec::new();
    for a in kept {
        match groups.last_mut() {
            Some(g) if arcsine_coordinate(a.x) - arcsine_coordinate(g.last().expect("nonempty group").x) <= radius => {
                g.push(a)
            }
            _ => groups.push(vec![a]),
        }
    }
    let mut total = KahanSum::new();
    total.extend(groups.iter().flatten().map(|a| a.p));
    let total = total.sum();
    Ok(groups
        .into_iter()
        .map(|g| {
            let mut m = KahanSum::new();
            let mut mx = KahanSum::new();
            for a in &g {
                m.add(a.p);
                mx.add(a.p * a.x);
            }
            Cluster {
                center: mx.sum() / m.sum(),
                mass: m.sum() / total,
            }
        })
        .collect())
}

/// KKT diagnostics of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max_x D(P_{Y|x} || P_Y) - C` over the scan grid.
    pub max_violation: f64,
    /// `max |D(P_{Y|x} || P_Y) - C|` over the cluster centers.
    pub support_deviation: f64,
    pub passed: bool,
}

/// Check the optimality conditions `D(P_{Y|x} || P_Y) <= C` everywhere with
/// equality on the support.
pub fn kkt_check(result: &SolverResult, n: u64, scan_grid: usize, slack_tol: f64) -> Result<KktReport> {
    if result.output.n() != n {
        return Err(Error::InvalidInput(format!(
            "result is for n = {}, not {n}",
            result.output.n()
        )));
    }
    if scan_grid < 2 {
        return Err(Error::Config("scan grid needs at least 2 points".into()));
    }
    let table = log_binomial_table(n);
    let lq = result.output.log_probs();
    let c = result.capacity_estimate;
    let scan: Vec<f64> = (0..scan_grid)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / (scan_grid - 1) as f64;
            kl_log(&crate::channel::row_from_table(&table, x), lq).map(|d| d - c)
        })
        .collect::<Result<_>>()?;
    let max_violation = scan.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut support_deviation: f64 = 0.0;
    for cl in &result.extracted_support {
        let d = kl_log(&crate::channel::row_from_table(&table, cl.center), lq)?;
        support_deviation = support_deviation.max((d - c).abs());
    }
    Ok(KktReport {
        max_violation,
        support_deviation,
        passed: max_violation <= slack_tol && support_deviation <= slack_tol,
    })
}

/// `min_y P_{Y_r}(y) / P_Y(y)` for the solver's output law.
pub fn verify_output_ratio(n: u64, result: &SolverResult) -> Result<f64> {
    if result.output.n() != n {
        return Err(Error::InvalidInput(format!(
            "result is for n = {}, not {n}",
            result.output.n()
        )));
    }
    let reference = beta_binomial_reference(n);
    Ok(reference
        .log_probs()
        .iter()
        .zip(result.output.log_probs())
        .map(|(r, q)| (r - q).exp())
        .fold(f64::INFINITY, f64::min))
}
