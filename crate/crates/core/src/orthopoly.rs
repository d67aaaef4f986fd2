//! Shifted Chebyshev polynomials, the conditional-expectation operators of
//! the binomial channel under the arcsine prior, and the Parseval expansion
//! of the chi-square divergence to the Beta-binomial reference.
//!
//! Explicit polynomials carry exact rational coefficients and are capped at
//! degree [`MAX_EXPLICIT_DEGREE`]. The production path
//! ([`chebyshev_moments`], [`hk_log_norm`], [`parseval_chi2`]) never builds
//! them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::channel::{induced_output, DiscreteInput};
use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// Largest degree of an explicit polynomial.
pub const MAX_EXPLICIT_DEGREE: usize = 30;

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn exact(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("{x} is not finite")))
}

fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn trim(mut c: Vec<BigRational>) -> Vec<BigRational> {
    while c.last().is_some_and(|v| v.is_zero()) {
        c.pop();
    }
    c
}

fn check_degree(c: &[BigRational]) -> Result<()> {
    if c.len() > MAX_EXPLICIT_DEGREE + 1 {
        return Err(Error::Degree {
            degree: c.len() - 1,
            limit: MAX_EXPLICIT_DEGREE,
        });
    }
    Ok(())
}

/// Polynomial in `x`, monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyX {
    coeffs: Vec<BigRational>,
}

/// Polynomial in `y`, falling-factorial basis `y(y-1)...(y-k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyY {
    coeffs: Vec<BigRational>,
}

impl PolyX {
    pub fn new(coeffs: Vec<BigRational>) -> Result<Self> {
        let coeffs = trim(coeffs);
        check_degree(&coeffs)?;
        Ok(Self { coeffs })
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| rat(c)).collect())
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Result<Self> {
        let mut c = vec![BigRational::zero(); k + 1];
        c[k] = BigRational::one();
        Self::new(c)
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn eval_exact(&self, x: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    /// Exact evaluation at the double `x`, rounded once at the end.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(to_f64(&self.eval_exact(&exact(x)?)))
    }
}

impl PolyY {
    pub fn new(coeffs: Vec<BigRational>) -> Result<Self> {
        let coeffs = trim(coeffs);
        check_degree(&coeffs)?;
        Ok(Self { coeffs })
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| rat(c)).collect())
    }

    /// The basis element `y^(k)` (falling factorial).
    pub fn falling(k: usize) -> Result<Self> {
        let mut c = vec![BigRational::zero(); k + 1];
        c[k] = BigRational::one();
        Self::new(c)
    }

    /// Convert monomial coefficients `sum a_j y^j` to this basis, using
    /// `y^j = sum_k S(j, k) y^(k)` with Stirling numbers of the second kind.
    pub fn from_monomial(coeffs: &[BigRational]) -> Result<Self> {
        let coeffs = trim(coeffs.to_vec());
        check_degree(&coeffs)?;
        let s2 = stirling2(coeffs.len().saturating_sub(1));
        let mut out = vec![BigRational::zero(); coeffs.len()];
        for (j, a) in coeffs.iter().enumerate() {
            for (k, s) in s2[j].iter().enumerate() {
                if !s.is_zero() {
                    out[k] += a * BigRational::from_integer(s.clone());
                }
            }
        }
        Self::new(out)
    }

    /// Monomial coefficients, using `y^(k) = sum_j s(k, j) y^j` with signed
    /// Stirling numbers of the first kind.
    pub fn to_monomial(&self) -> Vec<BigRational> {
        let s1 = stirling1(self.degree());
        let mut out = vec![BigRational::zero(); self.coeffs.len()];
        for (k, c) in self.coeffs.iter().enumerate() {
            for (j, s) in s1[k].iter().enumerate() {
                if !s.is_zero() {
                    out[j] += c * BigRational::from_integer(s.clone());
                }
            }
        }
        trim(out)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Nested evaluation `c_0 + y (c_1 + (y - 1)(c_2 + ...))`.
    pub fn eval_exact(&self, y: &BigRational) -> BigRational {
        let Some(top) = self.coeffs.last() else {
            return BigRational::zero();
        };
        let mut acc = top.clone();
        for k in (0..self.coeffs.len() - 1).rev() {
            acc = &self.coeffs[k] + (y - rat(k as i64)) * acc;
        }
        acc
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        Ok(to_f64(&self.eval_exact(&exact(y)?)))
    }
}

/// Rows `0..=m` of the signed Stirling numbers of the first kind.
fn stirling1(m: usize) -> Vec<Vec<BigInt>> {
    let mut rows = vec![vec![BigInt::one()]];
    for k in 1..=m {
        let prev = &rows[k - 1];
        let mut row = vec![BigInt::zero(); k + 1];
        for j in 0..=k {
            let mut v = BigInt::zero();
            if j >= 1 {
                v += &prev[j - 1];
            }
            if j < k {
                v -= &prev[j] * BigInt::from(k - 1);
            }
            row[j] = v;
        }
        rows.push(row);
    }
    rows
}

/// Rows `0..=m` of the Stirling numbers of the second kind.
fn stirling2(m: usize) -> Vec<Vec<BigInt>> {
    let mut rows = vec![vec![BigInt::one()]];
    for j in 1..=m {
        let prev = &rows[j - 1];
        let mut row = vec![BigInt::zero(); j + 1];
        for k in 1..=j {
            let mut v = &prev[k - 1] + BigInt::zero();
            if k < j {
                v += &prev[k] * BigInt::from(k);
            }
            row[k] = v;
        }
        rows.push(row);
    }
    rows
}

/// Falling factorial `n (n-1) ... (n-k+1)` as an exact integer.
fn falling_int(n: u64, k: usize) -> BigInt {
    (0..k as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(n as i64 - i as i64))
}

/// Monomial coefficients of the shifted Chebyshev polynomial
/// `T_k(x) = cos(k arccos(2x - 1))`.
pub fn shifted_chebyshev(k: usize) -> Result<PolyX> {
    if k > MAX_EXPLICIT_DEGREE {
        return Err(Error::Degree {
            degree: k,
            limit: MAX_EXPLICIT_DEGREE,
        });
    }
    let mut prev = vec![BigInt::one()];
    if k == 0 {
        return PolyX::new(vec![BigRational::one()]);
    }
    let mut cur = vec![BigInt::from(-1), BigInt::from(2)];
    for _ in 1..k {
        let mut next = vec![BigInt::zero(); cur.len() + 1];
        for (j, c) in cur.iter().enumerate() {
            next[j + 1] += c * BigInt::from(4);
            next[j] -= c * BigInt::from(2);
        }
        for (j, c) in prev.iter().enumerate() {
            next[j] -= c;
        }
        prev = cur;
        cur = next;
    }
    PolyX::new(cur.into_iter().map(BigRational::from_integer).collect())
}

/// `T_k(x)` by the three-term recurrence.
pub fn shifted_chebyshev_eval(k: usize, x: f64) -> f64 {
    let t = 2.0 * x - 1.0;
    let (mut a, mut b) = (1.0, t);
    if k == 0 {
        return a;
    }
    for _ in 1..k {
        let c = 2.0 * t * b - a;
        a = b;
        b = c;
    }
    b
}

/// `(A g)(x) = E[g(Y) | X = x]`, sending `y^(k)` to `n^(k) x^k`.
pub fn forward_operator(poly: &PolyY, n: u64) -> Result<PolyX> {
    if poly.degree() as u64 > n {
        return Err(Error::Degree {
            degree: poly.degree(),
            limit: n as usize,
        });
    }
    PolyX::new(
        poly.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * BigRational::from_integer(falling_int(n, k)))
            .collect(),
    )
}

/// `(B f)(y) = E[f(X) | Y = y]` under the arcsine prior, sending `x^k` to
/// `(y + 1/2)_k / (n + 1)_k`.
pub fn backward_operator(poly: &PolyX, n: u64) -> Result<PolyY> {
    if poly.degree() as u64 > n {
        return Err(Error::Degree {
            degree: poly.degree(),
            limit: n as usize,
        });
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut total = vec![BigRational::zero(); poly.coeffs.len()];
    // Monomial coefficients of (y + 1/2)_k and the value of (n + 1)_k.
    let mut rising = vec![BigRational::one()];
    let mut denom = BigRational::one();
    for (k, c) in poly.coeffs.iter().enumerate() {
        if k > 0 {
            let shift = &half + rat(k as i64 - 1);
            let mut next = vec![BigRational::zero(); rising.len() + 1];
            for (j, r) in rising.iter().enumerate() {
                next[j + 1] += r;
                next[j] += r * &shift;
            }
            rising = next;
            denom *= rat(n as i64 + k as i64);
        }
        if !c.is_zero() {
            for (j, r) in rising.iter().enumerate() {
                total[j] += c * r / &denom;
            }
        }
    }
    PolyY::from_monomial(&total)
}

/// `|E[g(Y) (B f)(Y)] - E[f(X) (A g)(X)]|` with `X` drawn from `input` and
/// `Y` its channel output. The two sides agree when `input` reproduces the
/// arcsine law on polynomials of degree `deg f + deg g`.
pub fn adjoint_residual(f: &PolyX, g: &PolyY, input: &DiscreteInput, n: u64) -> Result<f64> {
    let bf = backward_operator(f, n)?;
    let ag = forward_operator(g, n)?;
    let out = induced_output(input, n)?;
    let mut lhs = KahanSum::new();
    for y in 0..=n {
        let yr = rat(y as i64);
        lhs.add(out.prob(y as usize) * to_f64(&(g.eval_exact(&yr) * bf.eval_exact(&yr))));
    }
    let mut rhs = KahanSum::new();
    for a in input.atoms() {
        let xr = exact(a.x)?;
        rhs.add(a.p * to_f64(&(f.eval_exact(&xr) * ag.eval_exact(&xr))));
    }
    Ok((lhs.sum() - rhs.sum()).abs())
}

fn check_k(k: usize, n: u64) -> Result<()> {
    if k as u64 > n {
        return Err(Error::Range {
            k,
            max: n as usize,
        });
    }
    Ok(())
}

/// The output polynomial `H_k` with `A H_k = T_k`.
pub fn hk_polynomial(k: usize, n: u64) -> Result<PolyY> {
    check_k(k, n)?;
    let t = shifted_chebyshev(k)?;
    PolyY::new(
        t.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c / BigRational::from_integer(falling_int(n, j)))
            .collect(),
    )
}

/// `ln h_k` where `h_k = E[H_k(Y_r)^2] = (1/2) prod_{j=1}^k (n+j)/(n-j+1)`
/// and `h_0 = 1`.
pub fn hk_log_norm(k: usize, n: u64) -> Result<f64> {
    check_k(k, n)?;
    if k == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let mut acc = KahanSum::new();
    acc.add(-std::f64::consts::LN_2);
    for j in 1..=k {
        let j = j as f64;
        acc.add(((nf + j) / (nf - j + 1.0)).ln());
    }
    Ok(acc.sum())
}

/// `h_k` in the linear domain; overflows to infinity for large `k`.
pub fn hk_norm(k: usize, n: u64) -> Result<f64> {
    Ok(hk_log_norm(k, n)?.exp())
}

/// Chebyshev moments `eps_k = E[T_k(X)]` for `k = 0..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevMoments {
    pub n: Option<u64>,
    pub eps: Vec<f64>,
}

/// `eps_0..=eps_m` of a discrete input.
pub fn chebyshev_moments(input: &DiscreteInput, m: usize) -> ChebyshevMoments {
    let mut acc = vec![KahanSum::new(); m + 1];
    for a in input.atoms() {
        let t = 2.0 * a.x - 1.0;
        let (mut prev, mut cur) = (1.0, t);
        for (k, slot) in acc.iter_mut().enumerate() {
            let v = match k {
                0 => 1.0,
                1 => t,
                _ => {
                    let next = 2.0 * t * cur - prev;
                    prev = cur;
                    cur = next;
                    next
                }
            };
            slot.add(a.p * v);
        }
    }
    let mut eps: Vec<f64> = acc.iter().map(|s| s.sum().clamp(-1.0, 1.0)).collect();
    eps[0] = 1.0;
    ChebyshevMoments { n: None, eps }
}

/// `sum_{k=1}^m eps_k^2 / h_k`. For `m = n` this is the chi-square
/// divergence from the Beta-binomial reference; smaller `m` truncate it.
pub fn parseval_chi2(input: &DiscreteInput, n: u64, m: usize) -> Result<f64> {
    parseval_chi2_with(input, n, m, hk_log_norm)
}

/// [`parseval_chi2`] with a caller-supplied `ln h_k`.
pub fn parseval_chi2_with(
    input: &DiscreteInput,
    n: u64,
    m: usize,
    log_norm: impl Fn(usize, u64) -> Result<f64>,
) -> Result<f64> {
    check_k(m, n)?;
    let eps = chebyshev_moments(input, m).eps;
    let mut acc = KahanSum::new();
    for (k, e) in eps.iter().enumerate().skip(1) {
        acc.add(e * e * (-log_norm(k, n)?).exp());
    }
    Ok(acc.sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(shifted_chebyshev_eval(0, 0.3), 1.0);
        assert_eq!(shifted_chebyshev_eval(1, 0.75), 0.5);
        for k in 0..20 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(shifted_chebyshev_eval(k, 0.0), sign);
            assert_eq!(shifted_chebyshev_eval(k, 1.0), 1.0);
        }
        assert_eq!(shifted_chebyshev(2).unwrap(), PolyX::from_i64(&[1, -8, 8]).unwrap());
        assert!(shifted_chebyshev(31).is_err());
    }

    #[test]
    fn chebyshev_coefficients_match_recurrence() {
        for k in 0..=30 {
            let p = shifted_chebyshev(k).unwrap();
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                let direct = (k as f64 * (2.0 * x - 1.0).acos()).cos();
                assert!((p.eval(x).unwrap() - shifted_chebyshev_eval(k, x)).abs() <= 1e-10);
                assert!((direct - shifted_chebyshev_eval(k, x)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn falling_factorial_evaluation() {
        let p = PolyY::from_i64(&[1, 2, 3]).unwrap();
        // 1 + 2y + 3y(y-1) at y = 4
        assert_eq!(p.eval(4.0).unwrap(), 1.0 + 8.0 + 36.0);
        let round = PolyY::from_monomial(&p.to_monomial()).unwrap();
        assert_eq!(round, p);
    }

    #[test]
    fn operator_examples() {
        let one = PolyY::from_i64(&[1]).unwrap();
        assert_eq!(forward_operator(&one, 3).unwrap(), PolyX::from_i64(&[1]).unwrap());
        let y = PolyY::falling(1).unwrap();
        assert_eq!(forward_operator(&y, 5).unwrap(), PolyX::from_i64(&[0, 5]).unwrap());
        let y2 = PolyY::from_monomial(&[rat(0), rat(0), rat(1)]).unwrap();
        assert_eq!(forward_operator(&y2, 4).unwrap(), PolyX::from_i64(&[0, 4, 12]).unwrap());
        assert!(forward_operator(&PolyY::falling(4).unwrap(), 3).is_err());

        let b1 = backward_operator(&PolyX::monomial(1).unwrap(), 3).unwrap();
        assert_eq!(b1.to_monomial(), vec![r(1, 8), r(1, 4)]);
        let b2 = backward_operator(&PolyX::monomial(2).unwrap(), 3).unwrap();
        // (y + 1/2)(y + 3/2) / 20
        assert_eq!(b2.to_monomial(), vec![r(3, 80), r(1, 10), r(1, 20)]);
    }

    #[test]
    fn hk_examples() {
        let h1 = hk_polynomial(1, 4).unwrap();
        assert_eq!(h1.coeffs(), &[rat(-1), r(1, 2)]);
        assert_eq!(hk_polynomial(0, 4).unwrap(), PolyY::from_i64(&[1]).unwrap());
        let h2 = hk_polynomial(2, 10).unwrap();
        assert_eq!(h2.coeffs()[2], r(8, 90));
        assert!(hk_polynomial(5, 4).is_err());
        assert!((hk_norm(1, 2).unwrap() - 0.75).abs() < 1e-15);
        assert!((hk_norm(2, 4).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(hk_norm(0, 7).unwrap(), 1.0);
        assert!(hk_log_norm(3, 2).is_err());
    }

    #[test]
    fn moments_examples() {
        let half = DiscreteInput::point_mass(0.5).unwrap();
        let e = chebyshev_moments(&half, 6).eps;
        let expect = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let ends = DiscreteInput::from_weights(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let e = chebyshev_moments(&ends, 2).eps;
        assert_eq!(e[1], 0.0);
        assert_eq!(e[2], 1.0);
    }

    #[test]
    fn parseval_point_mass_two_trials() {
        let half = DiscreteInput::point_mass(0.5).unwrap();
        let v = parseval_chi2(&half, 2, 2).unwrap();
        assert!((v - 1.0 / hk_norm(2, 2).unwrap()).abs() < 1e-15);
        assert!(parseval_chi2(&half, 2, 3).is_err());
    }
}
