//! Log-domain special functions and stable summation.
//!
//! `log_gamma` splits the positive axis into three regimes: a Taylor series
//! around 1 and 2 built from `zeta(k) - 1`, downward recurrence into that
//! window for moderate arguments, and the Stirling series from 10 upward.

use std::cmp::Ordering;
use std::ops::{Mul, Neg};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// `0.5 * ln(2 pi)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

/// `zeta(k) - 1` for k = 2..=31.
const ZETA_MINUS_ONE: [f64; 30] = [
    0.644_934_066_848_226_436_47,
    0.202_056_903_159_594_285_4,
    0.082_323_233_711_138_191_516,
    0.036_927_755_143_369_926_331,
    0.017_343_061_984_449_139_715,
    0.008_349_277_381_922_826_839_8,
    0.004_077_356_197_944_339_378_7,
    0.002_008_392_826_082_214_417_9,
    0.000_994_575_127_818_085_337_15,
    0.000_494_188_604_119_464_558_7,
    0.000_246_086_553_308_048_298_64,
    0.000_122_713_347_578_489_146_75,
    6.124_813_505_870_482_925_9e-5,
    3.058_823_630_702_049_355_2e-5,
    1.528_225_940_865_187_173_3e-5,
    7.637_197_637_899_762_273_6e-6,
    3.817_293_264_999_839_856_5e-6,
    1.908_212_716_553_938_925_7e-6,
    9.539_620_338_727_961_131_5e-7,
    4.769_329_867_878_064_631_2e-7,
    2.384_505_027_277_329_9e-7,
    1.192_199_259_653_110_730_7e-7,
    5.960_818_905_125_947_961_2e-8,
    2.980_350_351_465_228_018_6e-8,
    1.490_155_482_836_504_123_5e-8,
    7.450_711_789_835_429_492e-9,
    3.725_334_024_788_457_054_8e-9,
    1.862_659_723_513_049_006_4e-9,
    9.313_274_324_196_681_828_7e-10,
    4.656_629_065_033_784_073e-10,
];

/// Stirling correction `ln Gamma(x) - [(x - 1/2) ln x - x + ln sqrt(2 pi)]`.
/// Accurate to double precision for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let r = 1.0 / x;
    let r2 = r * r;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * r2 + c;
    }
    acc * r
}

/// `S(z) = sum_{k>=2} (-1)^k (zeta(k) - 1) z^k / k`, valid for |z| <= 1/2.
fn zeta_series(z: f64) -> f64 {
    let mut acc = 0.0;
    for (i, c) in ZETA_MINUS_ONE.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc * z + sign * c / k;
    }
    acc * z * z
}

/// `ln Gamma(x)` for x in [0.5, 2.5].
fn log_gamma_window(x: f64) -> f64 {
    if x < 1.5 {
        let z = x - 1.0;
        -z.ln_1p() + z * (1.0 - EULER_GAMMA) + zeta_series(z)
    } else {
        let z = x - 2.0;
        z * (1.0 - EULER_GAMMA) + zeta_series(z)
    }
}

/// Natural log of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        log_gamma_window(x + 1.0) - x.ln()
    } else if x <= 2.5 {
        log_gamma_window(x)
    } else if x < 10.0 {
        let mut y = x;
        let mut prod = 1.0;
        while y > 2.5 {
            y -= 1.0;
            prod *= y;
        }
        log_gamma_window(y) + prod.ln()
    } else {
        (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x)
    }
}

/// Digamma function `psi(x) = d/dx ln Gamma(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut y = x;
    let mut shift = 0.0;
    while y < 10.0 {
        shift += 1.0 / y;
        y += 1.0;
    }
    // Bernoulli numbers B_{2k} / (2k) for k = 1..=8.
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
        -3617.0 / 8160.0,
    ];
    let r2 = 1.0 / (y * y);
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * r2 + c;
    }
    Ok(y.ln() - 0.5 / y - acc * r2 - shift)
}

/// `ln C(n, y)`.
///
/// The two `log_gamma` terms for `y` and `n - y` are added in a fixed order
/// so that the result is bitwise symmetric under `y -> n - y`.
pub fn log_binomial(n: u64, y: i64) -> Result<f64> {
    if y < 0 || y as u64 > n {
        return Err(Error::Index { index: y, n });
    }
    Ok(log_binomial_unchecked(n, y as u64))
}

pub(crate) fn log_binomial_unchecked(n: u64, y: u64) -> f64 {
    if y == 0 || y == n {
        return 0.0;
    }
    let a = log_gamma_unchecked(y as f64 + 1.0);
    let b = log_gamma_unchecked((n - y) as f64 + 1.0);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    log_gamma_unchecked(n as f64 + 1.0) - (lo + hi)
}

/// `ln [Gamma(m + 1/2) / Gamma(m + 1)]` for integer `m >= 0`.
pub fn log_gamma_ratio_half(m: u64) -> f64 {
    if m < 10 {
        let mf = m as f64;
        return log_gamma_unchecked(mf + 0.5) - log_gamma_unchecked(mf + 1.0);
    }
    let mf = m as f64;
    let b = mf + 1.0;
    mf * (-0.5 / b).ln_1p() - 0.5 * b.ln() + 0.5 + stirling_correction(mf + 0.5)
        - stirling_correction(b)
}

/// `ln sum exp(v_i)` with a max shift.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("log_sum_exp"));
    }
    Ok(log_sum_exp_unchecked(values))
}

pub(crate) fn log_sum_exp_unchecked(values: &[f64]) -> f64 {
    if values.len() == 1 {
        return values[0];
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    let mut acc = KahanSum::new();
    for v in values {
        acc.add((v - m).exp());
    }
    m + acc.sum().ln()
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for KahanSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of `values` in the given order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    acc.extend(values.iter().copied());
    acc.sum()
}

/// A signed real stored as `sign * exp(log_magnitude)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    log_magnitude: f64,
    sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogValue = LogValue {
        log_magnitude: 0.0,
        sign: 1,
    };

    /// Build from a log magnitude and a sign in {-1, 0, 1}.
    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_ln(log_magnitude: f64) -> Self {
        Self::new(log_magnitude, 1)
    }

    pub fn from_f64(v: f64) -> Self {
        match v.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self::new(v.ln(), 1),
            Some(Ordering::Less) => Self::new((-v).ln(), -1),
            _ => Self::ZERO,
        }
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        f64::from(self.sign) * self.log_magnitude.exp()
    }

    pub fn add(self, other: LogValue) -> LogValue {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_magnitude >= other.log_magnitude {
            (self, other)
        } else {
            (other, self)
        };
        let d = (small.log_magnitude - big.log_magnitude).exp();
        if big.sign == small.sign {
            LogValue::new(big.log_magnitude + d.ln_1p(), big.sign)
        } else if d == 1.0 {
            LogValue::ZERO
        } else {
            LogValue::new(big.log_magnitude + (-d).ln_1p(), big.sign)
        }
    }

    pub fn sub(self, other: LogValue) -> LogValue {
        self.add(-other)
    }

    pub fn div(self, other: LogValue) -> Result<LogValue> {
        if other.is_zero() {
            return Err(Error::Domain("division by zero LogValue".into()));
        }
        Ok(LogValue::new(
            self.log_magnitude - other.log_magnitude,
            self.sign * other.sign,
        ))
    }

    pub fn powf(self, e: f64) -> Result<LogValue> {
        if self.sign < 0 {
            return Err(Error::Domain("power of a negative LogValue".into()));
        }
        Ok(LogValue::new(self.log_magnitude * e, self.sign))
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::new(self.log_magnitude + rhs.log_magnitude, self.sign * rhs.sign)
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue {
            log_magnitude: self.log_magnitude,
            sign: -self.sign,
        }
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(x: f64) -> f64 {
    let h = |t: f64| if t > 0.0 { -t * t.ln() } else { 0.0 };
    h(x) + h(1.0 - x)
}
