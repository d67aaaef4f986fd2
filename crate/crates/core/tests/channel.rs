use std::f64::consts::{LN_2, PI};

use binomcap::capacity_bounds::{capacity_lower_bound, capacity_upper_bound};
use binomcap::channel::*;
use binomcap::orthopoly::parseval_chi2;
use binomcap::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

fn input(pairs: &[(f64, f64)]) -> DiscreteInput {
    DiscreteInput::new(pairs.iter().map(|&(x, p)| Atom { x, p }).collect()).unwrap()
}

fn pmf(n: u64, probs: &[f64]) -> OutputPmf {
    OutputPmf::from_probs(n, probs).unwrap()
}

/// `C(n, y) (1/2)_y (1/2)_{n-y} / n!` in exact arithmetic.
fn beta_binomial_exact(n: u64, y: u64) -> f64 {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rising = |k: u64| {
        (0..k).fold(BigRational::one(), |acc, j| acc * (&half + BigRational::from_integer(j.into())))
    };
    let fact = |k: u64| (1..=k).fold(BigInt::one(), |acc, j| acc * j);
    let binom = fact(n) / (fact(y) * fact(n - y));
    let v = BigRational::from_integer(binom) * rising(y) * rising(n - y)
        / BigRational::from_integer(fact(n));
    v.to_f64().unwrap()
}

fn strategy_input(max_atoms: usize) -> impl Strategy<Value = DiscreteInput> {
    prop::collection::vec((0.0f64..=1.0, 0.05f64..1.0), 1..=max_atoms)
        .prop_map(|v| DiscreteInput::from_weights(&v).unwrap())
}

#[test]
fn binomial_rows() {
    let r = binomial_row(1, 0.0).unwrap().as_pmf();
    assert_eq!(r.probs(), vec![1.0, 0.0]);
    let r = binomial_row(2, 0.5).unwrap().as_pmf().probs();
    for (a, b) in r.iter().zip([0.25, 0.5, 0.25]) {
        assert!((a - b).abs() < 1e-15);
    }
    // (0.3 + 0.7)^4 expanded term by term.
    let expect = [0.7f64.powi(4), 4.0 * 0.3 * 0.7f64.powi(3), 6.0 * 0.09 * 0.49, 4.0 * 0.027 * 0.7, 0.0081];
    for (a, b) in binomial_row(4, 0.3).unwrap().as_pmf().probs().iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(binomial_row(3, 1.5).is_err());
    assert!(binomial_row(3, f64::NAN).is_err());
}

#[test]
fn induced_outputs() {
    let binary = input(&[(0.0, 0.5), (1.0, 0.5)]);
    let out = induced_output(&binary, 1).unwrap().probs();
    assert!((out[0] - 0.5).abs() < 1e-15 && (out[1] - 0.5).abs() < 1e-15);
    let out = induced_output(&binary, 3).unwrap().probs();
    assert_eq!(out[1], 0.0);
    assert_eq!(out[2], 0.0);
    assert!((out[0] - 0.5).abs() < 1e-15 && (out[3] - 0.5).abs() < 1e-15);
    let out = induced_output(&DiscreteInput::point_mass(0.5).unwrap(), 2).unwrap().probs();
    for (a, b) in out.iter().zip([0.25, 0.5, 0.25]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn reference_small_cases() {
    assert_eq!(beta_binomial_reference(0).probs(), vec![1.0]);
    let r = beta_binomial_reference(1).probs();
    assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
}

#[test]
fn reference_matches_exact_rationals() {
    for n in [2u64, 5, 17, 40, 90] {
        let r = beta_binomial_reference(n);
        for y in 0..=n {
            let exact = beta_binomial_exact(n, y);
            assert!((r.prob(y as usize) - exact).abs() <= 1e-13 * exact, "n={n} y={y}");
        }
    }
}

#[test]
fn reference_matches_quadrature() {
    let n = 20;
    let quad = induced_output(&DiscreteInput::beta_quadrature(64).unwrap(), n).unwrap();
    let r = beta_binomial_reference(n);
    for y in 0..=n as usize {
        assert!((quad.prob(y) - r.prob(y)).abs() < 1e-10);
    }
}

#[test]
fn reference_symmetry_and_ceiling() {
    for n in 0..=200u64 {
        let r = beta_binomial_reference(n);
        let lp = r.log_probs();
        for y in 0..=n as usize {
            assert_eq!(lp[y], lp[n as usize - y], "n={n} y={y}");
            let (yf, nf) = (y as f64, n as f64);
            let ceiling = 1.0 / (PI * ((yf + 0.25) * (nf - yf + 0.25)).sqrt());
            assert!(r.prob(y) <= ceiling * (1.0 + 1e-12), "n={n} y={y}");
        }
        let total: f64 = r.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn reference_extreme_n_stays_normalized() {
    let r = beta_binomial_reference(1_000_000);
    assert!(r.log_probs().iter().all(|v| v.is_finite()));
    let total: f64 = r.probs().iter().sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn divergences() {
    let p = pmf(1, &[1.0, 0.0]);
    let q = pmf(1, &[0.5, 0.5]);
    assert!((kl_divergence(&p, &q).unwrap() - LN_2).abs() < 1e-15);
    assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
    assert!(matches!(kl_divergence(&q, &p), Err(Error::SupportViolation { y: 1 })));
    assert!(matches!(chi2_divergence(&q, &p), Err(Error::SupportViolation { .. })));
    let a = pmf(1, &[0.25, 0.75]);
    assert!((chi2_divergence(&a, &q).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(chi2_divergence(&a, &a).unwrap(), 0.0);
    assert!(kl_divergence(&a, &pmf(2, &[0.2, 0.3, 0.5])).is_err());
}

#[test]
fn chi2_matches_series_for_two_atoms() {
    for n in [2u64, 10, 30] {
        let inp = input(&[(0.2, 0.5), (0.8, 0.5)]);
        let direct = chi2_divergence(&induced_output(&inp, n).unwrap(), &beta_binomial_reference(n)).unwrap();
        let series = parseval_chi2(&inp, n, n as usize).unwrap();
        assert!((direct - series).abs() < 1e-10, "n={n}");
    }
}

#[test]
fn mutual_information_examples() {
    let single = DiscreteInput::point_mass(0.3).unwrap();
    assert!(mutual_information(&single, 7).unwrap().abs() < 1e-15);
    let binary = input(&[(0.0, 0.5), (1.0, 0.5)]);
    assert!((mutual_information(&binary, 1).unwrap() - LN_2).abs() < 1e-15);
    assert!((mutual_information(&binary, 5).unwrap() - LN_2).abs() < 1e-15);
}

#[test]
fn arcsine_input_information() {
    assert_eq!(mutual_information_beta_input(0, 100).unwrap(), 0.0);
    // n = 1: H(Y_r) = ln 2 and H(Y | x) = h(x) averaged over the arcsine law;
    // E[h(X)] = 2 ln 2 - 1 for X ~ Beta(1/2, 1/2).
    let v = mutual_information_beta_input(1, 10_000).unwrap();
    assert!(v > 0.0 && v < LN_2);
    assert!((v - (1.0 - LN_2)).abs() < 1e-6);
    let v = mutual_information_beta_input(100, 4000).unwrap();
    assert!(v >= capacity_lower_bound(100).unwrap() - 1e-9);
    assert!(v <= capacity_upper_bound(100).unwrap());
}

#[test]
fn input_validation() {
    assert!(DiscreteInput::new(vec![]).is_err());
    assert!(DiscreteInput::new(vec![Atom { x: 1.2, p: 1.0 }]).is_err());
    assert!(DiscreteInput::new(vec![Atom { x: 0.2, p: 0.6 }, Atom { x: 0.3, p: 0.6 }]).is_err());
    assert!(DiscreteInput::new(vec![Atom { x: 0.2, p: 0.5 }, Atom { x: 0.2, p: 0.5 }]).is_err());
    assert!(serde_json::from_str::<DiscreteInput>(r#"{"atoms":[{"x":0.5,"p":0.9}]}"#).is_err());
    let ok: DiscreteInput = serde_json::from_str(r#"{"atoms":[{"x":0.5,"p":1.0}]}"#).unwrap();
    assert_eq!(ok.len(), 1);
}

#[test]
fn pmf_json_round_trip_with_zero_mass() {
    let out = induced_output(&input(&[(0.0, 0.5), (1.0, 0.5)]), 3).unwrap();
    let text = serde_json::to_string(&out).unwrap();
    let back: OutputPmf = serde_json::from_str(&text).unwrap();
    assert_eq!(back, out);
}

proptest! {
    #[test]
    fn outputs_normalized(inp in strategy_input(6), n in 0u64..300) {
        let out = induced_output(&inp, n).unwrap();
        let total: f64 = out.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_linearity(a in strategy_input(4), b in strategy_input(4), lambda in 0.01f64..0.99, n in 1u64..60) {
        let mixed = induced_output(&a.mix(&b, lambda).unwrap(), n).unwrap();
        let (pa, pb) = (induced_output(&a, n).unwrap(), induced_output(&b, n).unwrap());
        for y in 0..=n as usize {
            let expect = lambda * pa.prob(y) + (1.0 - lambda) * pb.prob(y);
            prop_assert!((mixed.prob(y) - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn information_ceilings(inp in strategy_input(6), n in 1u64..100) {
        let i = mutual_information(&inp, n).unwrap();
        prop_assert!(i >= 0.0);
        prop_assert!(i <= (inp.len() as f64).ln() + 1e-9);
        prop_assert!(i <= ((n + 1) as f64).ln() + 1e-9);
    }

    #[test]
    fn divergence_ordering(inp in strategy_input(5), n in 1u64..80) {
        // KL <= ln(1 + chi2) <= chi2.
        let p = induced_output(&inp, n).unwrap();
        let q = beta_binomial_reference(n);
        let kl = kl_divergence(&p, &q).unwrap();
        let chi2 = chi2_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(kl <= chi2.ln_1p() + 1e-12 * (1.0 + chi2));
    }

    #[test]
    fn input_json_round_trip(inp in strategy_input(6)) {
        let text = serde_json::to_string(&inp).unwrap();
        let back: DiscreteInput = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, inp);
    }
}
